//! Slot-level simulator and Monte Carlo driver.
//!
//! Every slot the scheduler picks a cluster, the carriers are split among
//! its members, each member transmits once and succeeds with probability
//! `1 - eps`, and then every AoI grows by `n` except for the successful UEs,
//! which reset to `n`.
//!
//! Each replication draws four independent ChaCha streams from its seed:
//! 0 channel, 1 scheduler, 2 assignment, 3 transmission outcomes. The
//! channel consumes its stream the same way under every policy, so policies
//! compared at the same seed see the same channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::assignment::{recursive_assign, uniform_blind_assign_into, AssignmentMatrix, LinkTable};
use crate::channel::{ChannelModel, ChannelState};
use crate::config::{AssignmentMode, AutoOr, SimConfig};
use crate::error::{Error, Result};
use crate::fbl::{per_from_sums, uniform_per, LinkQuality};
use crate::schedulers::{AoiIndexInputs, Policy, SchedulerState};

const STREAM_CHANNEL: u64 = 0;
const STREAM_SCHEDULER: u64 = 1;
const STREAM_ASSIGNMENT: u64 = 2;
const STREAM_OUTCOME: u64 = 3;

/// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `r`: `mix(master + (r + 1) * golden)`, the `r+1`-th
/// output of a splitmix64 generator started at `master`.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    mix(master.wrapping_add(replication.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeState {
    /// h_i in symbols
    pub aoi: f64,
    pub attempts: u64,
    pub successes: u64,
    pub shadow: f64,
    /// error-rate estimate used by the AoI index
    pub est_per: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub mean_aoi: f64,
    pub attempts: u32,
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub replication: u64,
    pub replication_seed: u64,
    pub cluster_size: u32,
    /// time average of the per-slot mean AoI, in symbols
    pub avg_aoi: f64,
    /// failed over attempted transmissions
    pub avg_per: f64,
    pub per_ue_aoi: Vec<f64>,
    pub slots: u64,
    pub attempts: u64,
}

/// One replication in progress.
pub struct Simulator {
    carriers: usize,
    blocklength: u32,
    payload_bits: u32,
    mode: AssignmentMode,
    fixed_per: Option<f64>,
    /// refresh the AoI-index error estimates from the current channel
    track_rssi: bool,
    ues: Vec<UeState>,
    aoi: Vec<f64>,
    est_per: Vec<f64>,
    scheduler: SchedulerState,
    channel: ChannelState,
    channel_rng: ChaCha8Rng,
    assign_rng: ChaCha8Rng,
    outcome_rng: ChaCha8Rng,
    cluster: Vec<usize>,
    owners: Vec<usize>,
    bin_links: Vec<LinkQuality>,
    table: LinkTable,
    cap: Vec<f64>,
    disp: Vec<f64>,
    per: Vec<f64>,
}

impl Simulator {
    pub fn new(cfg: &SimConfig, replication_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.resolve_cluster_size()?.cluster_size as usize;
        let (ue_count, carriers) = (cfg.system.ues as usize, cfg.system.carriers as usize);
        let (n, tau) = (cfg.system.blocklength, cfg.system.payload_bits);
        let mut channel_rng = stream(replication_seed, STREAM_CHANNEL);
        let channel = ChannelState::new(&cfg.channel, carriers, ue_count, n, &mut channel_rng)?;
        let scheduler =
            SchedulerState::with_rng(cfg.scheduler.policy, l, ue_count, stream(replication_seed, STREAM_SCHEDULER))?;
        let fixed_per = (cfg.channel.model == ChannelModel::FixedPer).then_some(cfg.channel.fixed_per);
        let share = (carriers / l) as f64;
        let est_per = (0..ue_count)
            .map(|ue| match fixed_per {
                Some(p) => Ok(p),
                None => uniform_per(&LinkQuality::from_snr(channel.wideband_snr(ue))?, share, n, tau),
            })
            .collect::<Result<Vec<_>>>()?;
        let track_rssi = cfg.scheduler.policy == Policy::AoiIndex && cfg.channel.model == ChannelModel::Faded;
        let ues = (0..ue_count)
            .map(|ue| UeState {
                aoi: n as f64,
                attempts: 0,
                successes: 0,
                shadow: channel.shadow(ue),
                est_per: est_per[ue],
            })
            .collect();
        Ok(Self {
            carriers,
            blocklength: n,
            payload_bits: tau,
            mode: cfg.assignment.mode,
            fixed_per,
            track_rssi,
            ues,
            aoi: vec![n as f64; ue_count],
            est_per,
            scheduler,
            channel,
            channel_rng,
            assign_rng: stream(replication_seed, STREAM_ASSIGNMENT),
            outcome_rng: stream(replication_seed, STREAM_OUTCOME),
            cluster: Vec::with_capacity(l),
            owners: Vec::with_capacity(carriers),
            bin_links: Vec::new(),
            table: LinkTable::empty(),
            cap: vec![0.0; l],
            disp: vec![0.0; l],
            per: vec![0.0; l],
        })
    }

    pub fn ues(&self) -> &[UeState] {
        &self.ues
    }

    pub fn cluster_size(&self) -> usize {
        self.scheduler.cluster_size
    }

    /// Cluster scheduled in the most recent slot.
    pub fn last_cluster(&self) -> &[usize] {
        &self.cluster
    }

    /// Error rates of the most recent cluster, in cluster order.
    pub fn last_per(&self) -> &[f64] {
        &self.per[..self.cluster.len()]
    }

    pub fn run_slot(&mut self) -> Result<SlotRecord> {
        if self.track_rssi {
            self.refresh_estimates()?;
        }
        let inputs = AoiIndexInputs { aoi: &self.aoi, est_per: &self.est_per };
        self.scheduler.next_cluster_into(&inputs, &mut self.cluster);
        self.transmission_error_rates()?;

        let n = self.blocklength as f64;
        let mut failures = 0;
        for h in self.aoi.iter_mut() {
            *h += n;
        }
        for (j, &ue) in self.cluster.iter().enumerate() {
            let ok = self.outcome_rng.random::<f64>() >= self.per[j];
            let state = &mut self.ues[ue];
            state.attempts += 1;
            if ok {
                state.successes += 1;
                self.aoi[ue] = n;
            } else {
                failures += 1;
            }
        }
        let mut sum = 0.0;
        for (state, &h) in self.ues.iter_mut().zip(&self.aoi) {
            debug_assert!(h == n || h == state.aoi + n);
            state.aoi = h;
            sum += h;
        }
        self.channel.step(&mut self.channel_rng);
        Ok(SlotRecord { mean_aoi: sum / self.aoi.len() as f64, attempts: self.cluster.len() as u32, failures })
    }

    /// Re-estimates the error rate of every UE whose channel changed, from
    /// its wideband SNR and a uniform share of `floor(M/l)` carriers.
    fn refresh_estimates(&mut self) -> Result<()> {
        let share = (self.carriers / self.scheduler.cluster_size) as f64;
        for ue in 0..self.est_per.len() {
            if self.channel.changed()[ue] {
                let link = LinkQuality::from_snr_unchecked(self.channel.wideband_snr(ue));
                self.est_per[ue] = uniform_per(&link, share, self.blocklength, self.payload_bits)?;
                self.ues[ue].est_per = self.est_per[ue];
            }
        }
        self.channel.clear_changed();
        Ok(())
    }

    /// Fills `self.per` for the current cluster.
    fn transmission_error_rates(&mut self) -> Result<()> {
        let l = self.cluster.len();
        if let Some(p) = self.fixed_per {
            self.per[..l].iter_mut().for_each(|e| *e = p);
            return Ok(());
        }
        let (n, tau) = (self.blocklength, self.payload_bits);
        let bins = self.channel.bins();
        self.bin_links.clear();
        for bin in 0..bins {
            for &ue in &self.cluster {
                self.bin_links.push(LinkQuality::from_snr_unchecked(self.channel.bin_snr(bin, ue)));
            }
        }
        uniform_blind_assign_into(self.carriers, l, &mut self.assign_rng, &mut self.owners);
        match self.mode {
            AssignmentMode::UniformBlind => {
                self.cap[..l].iter_mut().for_each(|c| *c = 0.0);
                self.disp[..l].iter_mut().for_each(|v| *v = 0.0);
                for (m, &o) in self.owners.iter().enumerate() {
                    let link = &self.bin_links[self.channel.bin_of(m) * l + o];
                    self.cap[o] += link.capacity;
                    self.disp[o] += link.dispersion;
                }
                for j in 0..l {
                    self.per[j] = per_from_sums(self.cap[j], self.disp[j], n, tau)?;
                }
            }
            AssignmentMode::RecursiveCsi => {
                self.table.reset(self.carriers, l);
                for m in 0..self.carriers {
                    let bin = self.channel.bin_of(m);
                    for j in 0..l {
                        self.table.set(m, j, self.bin_links[bin * l + j]);
                    }
                }
                let init = AssignmentMatrix::from_owners(std::mem::take(&mut self.owners), l)?;
                let out = recursive_assign(&self.table, n, tau, init)?;
                self.per[..l].copy_from_slice(&out.per);
                self.owners = out.assignment.owners().to_vec();
            }
        }
        Ok(())
    }
}

/// Runs warm-up plus `slots` measured slots.
pub fn run_replication(cfg: &SimConfig, replication: u64, slots: u64) -> Result<MetricsRecord> {
    if slots == 0 {
        return Err(Error::Config("at least one slot is required".into()));
    }
    let seed = replication_seed(cfg.run.master_seed, replication);
    let mut sim = Simulator::new(cfg, seed)?;
    let l = sim.cluster_size() as u32;
    for _ in 0..cfg.warmup_slots(l) {
        sim.run_slot()?;
    }
    let ue_count = sim.ues.len();
    let mut aoi_sum = 0.0;
    let mut per_ue = vec![0.0; ue_count];
    let (mut attempts, mut failures) = (0u64, 0u64);
    for _ in 0..slots {
        let rec = sim.run_slot()?;
        aoi_sum += rec.mean_aoi;
        attempts += rec.attempts as u64;
        failures += rec.failures as u64;
        for (acc, &h) in per_ue.iter_mut().zip(&sim.aoi) {
            *acc += h;
        }
    }
    let t = slots as f64;
    per_ue.iter_mut().for_each(|a| *a /= t);
    Ok(MetricsRecord {
        replication,
        replication_seed: seed,
        cluster_size: l,
        avg_aoi: aoi_sum / t,
        avg_per: failures as f64 / attempts as f64,
        per_ue_aoi: per_ue,
        slots,
        attempts,
    })
}

/// Mean, sample standard deviation and Student-t 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SummaryStat {
    pub fn from_samples(xs: &[f64]) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        if xs.len() < 2 {
            return Self { mean, std: 0.0, ci_low: mean, ci_high: mean };
        }
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let t = StudentsT::new(0.0, 1.0, k - 1.0).expect("positive dof").inverse_cdf(0.975);
        let half = t * std / k.sqrt();
        Self { mean, std, ci_low: mean - half, ci_high: mean + half }
    }

    /// The two 95% intervals share no point.
    pub fn disjoint(&self, other: &SummaryStat) -> bool {
        self.ci_high < other.ci_low || other.ci_high < self.ci_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub records: Vec<MetricsRecord>,
    pub aoi: SummaryStat,
    pub per: SummaryStat,
}

/// Runs `replications` independent replications, in parallel on up to
/// `parallelism` threads. Records come back in replication order whatever
/// the thread count.
pub fn run_experiment(cfg: &SimConfig, replications: u64, parallelism: AutoOr) -> Result<ExperimentSummary> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    cfg.validate()?;
    let job = || {
        (0..replications).into_par_iter().map(|r| run_replication(cfg, r, cfg.run.slots)).collect::<Result<Vec<_>>>()
    };
    let records = match parallelism {
        AutoOr::Auto => job()?,
        AutoOr::Value(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads as usize)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(job)?,
    };
    let aoi = SummaryStat::from_samples(&records.iter().map(|r| r.avg_aoi).collect::<Vec<_>>());
    let per = SummaryStat::from_samples(&records.iter().map(|r| r.avg_per).collect::<Vec<_>>());
    Ok(ExperimentSummary { records, aoi, per })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::config::SystemConfig;

    fn fixed(ues: u32, l: u64, per: f64) -> SimConfig {
        let mut cfg = SimConfig {
            system: SystemConfig { ues, carriers: 100, blocklength: 1, payload_bits: 32 },
            channel: ChannelConfig::fixed_per(per),
            ..SimConfig::default()
        };
        cfg.scheduler.cluster_size = AutoOr::Value(l);
        cfg.run.warmup = AutoOr::Value(0);
        cfg
    }

    #[test]
    fn full_cluster_without_errors_keeps_aoi_at_n() {
        let cfg = fixed(4, 4, 0.0);
        let mut sim = Simulator::new(&cfg, 1).unwrap();
        for _ in 0..10 {
            assert_eq!(sim.run_slot().unwrap().mean_aoi, 1.0);
        }
    }

    #[test]
    fn unscheduled_aoi_grows_by_n() {
        let mut cfg = fixed(3, 1, 0.0);
        cfg.system.blocklength = 3;
        let mut sim = Simulator::new(&cfg, 1).unwrap();
        sim.run_slot().unwrap();
        let aoi: Vec<f64> = sim.ues().iter().map(|u| u.aoi).collect();
        assert_eq!(aoi, vec![3.0, 6.0, 6.0]);
    }

    #[test]
    fn two_ue_alternation_matches_hand_computation() {
        // AoI sequence per UE: 1, 2, 1, 2, ... so the mean over any even
        // number of slots is 1.5.
        let cfg = fixed(2, 1, 0.0);
        let rec = run_replication(&cfg, 0, 10).unwrap();
        assert_eq!(rec.avg_aoi, 1.5);
        assert_eq!(rec.per_ue_aoi, vec![1.5, 1.5]);
        assert_eq!(rec.avg_per, 0.0);
    }

    #[test]
    fn same_seed_same_record() {
        let mut cfg = SimConfig::default();
        cfg.system.ues = 20;
        cfg.channel = ChannelConfig::faded(3.0);
        cfg.scheduler.policy = Policy::AoiIndex;
        cfg.assignment.mode = AssignmentMode::RecursiveCsi;
        let a = run_replication(&cfg, 3, 500).unwrap();
        let b = run_replication(&cfg, 3, 500).unwrap();
        assert_eq!(a, b);
        assert!(a.avg_aoi >= 1.0 && (0.0..=1.0).contains(&a.avg_per));
    }

    #[test]
    fn single_replication_summary() {
        let mut cfg = fixed(4, 2, 0.2);
        cfg.run.slots = 100;
        let s = run_experiment(&cfg, 1, AutoOr::Value(1)).unwrap();
        assert_eq!(s.aoi.mean, s.records[0].avg_aoi);
        assert_eq!(s.aoi.ci_low, s.aoi.ci_high);
    }

    #[test]
    fn replication_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|r| replication_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn summary_t_interval() {
        let s = SummaryStat::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        // t_{0.975, 2} = 4.302653
        assert!((s.ci_high - (2.0 + 4.302653 / 3f64.sqrt())).abs() < 1e-5);
    }
}
