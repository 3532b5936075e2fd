mod common;

use aoi_core::sim::{run_experiment, run_replication, Simulator, SummaryStat};
use aoi_core::{AutoOr, ChannelConfig, ChannelState, Policy, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn fixed(per: f64, ues: u32, l: u64, slots: u64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.system.ues = ues;
    cfg.channel = ChannelConfig::fixed_per(per);
    cfg.scheduler.cluster_size = AutoOr::Value(l);
    cfg.run.slots = slots;
    cfg
}

#[test]
fn round_robin_aoi_matches_renewal_formula() {
    for (eps, l) in [(0.1, 2u64), (0.3, 4)] {
        let cfg = fixed(eps, 20, l, 100_000);
        let rec = run_replication(&cfg, 0, cfg.run.slots).unwrap();
        let alpha = 20.0 / l as f64;
        let want = rr_aoi(eps, 1.0, alpha);
        assert!((want - rr_aoi_renewal(eps, 1.0, alpha)).abs() < 1e-12);
        assert!((rec.avg_aoi - want).abs() < 0.02 * want, "eps {eps} l {l}: {} vs {want}", rec.avg_aoi);
    }
    // the worked value
    assert!((rr_aoi(0.1, 1.0, 10.0) - 6.6111).abs() < 1e-4);
}

#[test]
fn longer_blocks_follow_the_renewal_formula() {
    let mut cfg = fixed(0.2, 12, 3, 60_000);
    cfg.system.blocklength = 4;
    let rec = run_replication(&cfg, 0, cfg.run.slots).unwrap();
    let want = rr_aoi_renewal(0.2, 4.0, 4.0);
    assert!((rec.avg_aoi - want).abs() < 0.02 * want, "{} vs {want}", rec.avg_aoi);
}

#[test]
fn empirical_error_rate_within_three_sigma() {
    let cfg = fixed(0.3, 10, 2, 50_000);
    let rec = run_replication(&cfg, 3, cfg.run.slots).unwrap();
    let sigma = (0.3 * 0.7 / rec.attempts as f64).sqrt();
    assert!((rec.avg_per - 0.3).abs() < 3.0 * sigma, "{} over {} attempts", rec.avg_per, rec.attempts);
}

#[test]
fn index_policy_without_errors_is_round_robin() {
    let mut rr = fixed(0.0, 12, 3, 100);
    rr.scheduler.policy = Policy::ClusteredRr;
    let mut idx = rr;
    idx.scheduler.policy = Policy::AoiIndex;
    let (mut a, mut b) = (Simulator::new(&rr, 5).unwrap(), Simulator::new(&idx, 5).unwrap());
    for slot in 0..100 {
        a.run_slot().unwrap();
        b.run_slot().unwrap();
        let (mut x, mut y) = (a.last_cluster().to_vec(), b.last_cluster().to_vec());
        x.sort();
        y.sort();
        assert_eq!(x, y, "slot {slot}");
    }
}

#[test]
fn index_policy_without_errors_revisits_within_a_cycle() {
    // l does not divide I: the tie-break after wraparound differs from the
    // sliding window, but no UE waits longer than ceil(I / l) slots
    let mut cfg = fixed(0.0, 10, 3, 100);
    cfg.scheduler.policy = Policy::AoiIndex;
    let mut sim = Simulator::new(&cfg, 5).unwrap();
    let mut last = vec![0u64; 10];
    for slot in 1..=200u64 {
        sim.run_slot().unwrap();
        for &ue in sim.last_cluster() {
            last[ue] = slot;
        }
        assert!(last.iter().all(|&s| slot - s < 4 || slot < 4), "slot {slot}: {last:?}");
    }
}

#[test]
fn replications_are_reproducible_and_order_independent() {
    let mut cfg = SimConfig::default();
    cfg.system.ues = 30;
    cfg.system.carriers = 60;
    cfg.run.slots = 500;
    let serial = run_experiment(&cfg, 4, AutoOr::Value(1)).unwrap();
    let parallel = run_experiment(&cfg, 4, AutoOr::Value(3)).unwrap();
    assert_eq!(serial.records, parallel.records);
    let single = run_replication(&cfg, 2, 500).unwrap();
    assert_eq!(single, serial.records[2]);
    assert_ne!(serial.records[0].replication_seed, serial.records[1].replication_seed);
}

#[test]
fn summary_interval_uses_student_t() {
    let s = SummaryStat::from_samples(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    assert!((s.mean - 3.0).abs() < 1e-12);
    assert!((s.std - 2.5f64.sqrt()).abs() < 1e-12);
    // t(0.975, 4) = 2.7764451
    let half = 2.7764451 * 2.5f64.sqrt() / 5f64.sqrt();
    assert!((s.ci_high - 3.0 - half).abs() < 1e-6);
    assert!((3.0 - s.ci_low - half).abs() < 1e-6);
}

#[test]
fn fading_blocks_have_unit_mean_and_the_configured_dwell() {
    let cfg = ChannelConfig::faded(0.0);
    let (ues, steps) = (200usize, 40_000u64);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut ch = ChannelState::new(&cfg, 60, ues, 1, &mut rng).unwrap();
    assert_eq!(ch.bins(), 1);
    let reference = cfg.reference_snr();
    let (mut blocks, mut fade_sum) = (0u64, 0.0);
    for _ in 0..steps {
        for ue in 0..ues {
            if ch.changed()[ue] {
                blocks += 1;
                fade_sum += ch.bin_snr(0, ue) / reference;
            }
        }
        ch.clear_changed();
        ch.step(&mut rng);
    }
    let mean = fade_sum / blocks as f64;
    assert!((mean - 1.0).abs() < 0.01, "fade mean {mean} over {blocks} blocks");
    let dwell = (ues as u64 * steps) as f64 / blocks as f64;
    let want = cfg.mean_block_slots(1);
    assert!((want - 5e-3 / 71.3e-6).abs() < 1e-9);
    assert!((dwell - want).abs() < 0.05 * want, "dwell {dwell} vs {want}");
}

#[test]
fn shadowing_sets_a_stationary_per_ue_mean() {
    let cfg = ChannelConfig::faded(5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut ch = ChannelState::new(&cfg, 60, 4, 1, &mut rng).unwrap();
    let steps = 400_000;
    let mut sums = [0.0; 4];
    for _ in 0..steps {
        for (ue, s) in sums.iter_mut().enumerate() {
            *s += ch.bin_snr(0, ue);
        }
        ch.step(&mut rng);
    }
    // about 5700 independent blocks per UE: a relative sd near 1.3%
    for (ue, s) in sums.iter().enumerate() {
        let mean = s / steps as f64;
        let want = ch.mean_snr(ue);
        assert!((mean - want).abs() < 0.06 * want, "ue {ue}: {mean} vs {want}");
    }
}
