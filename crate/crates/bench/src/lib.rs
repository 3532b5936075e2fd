//! Fixtures shared by the benchmarks.

use aoi_core::assignment::uniform_blind_assign;
use aoi_core::{AssignmentMatrix, AssignmentMode, ChannelConfig, LinkTable, Policy, Schedule, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random SNR table with a blind starting assignment.
pub fn assignment_instance(carriers: usize, cluster_size: usize, seed: u64) -> (LinkTable, AssignmentMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr: Vec<f64> = (0..carriers * cluster_size).map(|_| rng.random_range(0.2..8.0)).collect();
    let table = LinkTable::from_snr(carriers, cluster_size, &snr).expect("valid table");
    let init = uniform_blind_assign(carriers, cluster_size, &mut rng).expect("valid split");
    (table, init)
}

/// Default desk-scale fading setup for one policy and assignment mode.
pub fn fading_config(policy: Policy, mode: AssignmentMode, sigma_db: f64) -> SimConfig {
    let mut cfg = SimConfig { channel: ChannelConfig::faded(sigma_db), ..Default::default() };
    cfg.scheduler.policy = policy;
    cfg.assignment.mode = mode;
    cfg
}

/// Single-UE-per-slot schedule drawn uniformly.
pub fn random_schedule(ues: usize, slots: usize, seed: u64) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..slots).map(|_| rng.random_range(0..ues)).collect();
    Schedule::single(ues, &picks).expect("valid schedule")
}
