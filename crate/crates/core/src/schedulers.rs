//! Per-slot UE selection policies.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster_opt::ClusterOptInput;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Round-robin over a fixed circular UE order, `l` UEs per slot.
    ClusteredRr,
    /// The `l` UEs with the largest AoI index.
    AoiIndex,
    /// A uniformly random `l`-subset each slot.
    Random,
    /// Round-robin with `l = 1`.
    NoClustering,
    /// Round-robin with the cluster size sized for URLLC targets.
    UrllcBaseline,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::ClusteredRr => "clustered_rr",
            Policy::AoiIndex => "aoi_index",
            Policy::Random => "random",
            Policy::NoClustering => "no_clustering",
            Policy::UrllcBaseline => "urllc_baseline",
        }
    }

    fn is_round_robin(&self) -> bool {
        matches!(self, Policy::ClusteredRr | Policy::NoClustering | Policy::UrllcBaseline)
    }
}

/// Instantaneous knowledge consumed by the AoI-index policy.
#[derive(Debug, Clone, Copy)]
pub struct AoiIndexInputs<'a> {
    /// h_i(t) in symbols
    pub aoi: &'a [f64],
    /// per-UE error-rate estimate
    pub est_per: &'a [f64],
}

/// `zeta = h (h + 1) (1 - eps)`
#[inline]
pub fn aoi_index(aoi: f64, est_per: f64) -> f64 {
    aoi * (aoi + 1.0) * (1.0 - est_per)
}

/// Writes into `out` the `l` UEs with the largest AoI index, highest first;
/// equal indices go to the lower UE id.
pub fn next_cluster_aoi_index_into(inputs: &AoiIndexInputs<'_>, l: usize, out: &mut Vec<usize>) {
    let ue_count = inputs.aoi.len();
    debug_assert_eq!(inputs.est_per.len(), ue_count);
    out.clear();
    out.extend(0..ue_count);
    let key = |i: usize| aoi_index(inputs.aoi[i], inputs.est_per[i]);
    let order = |a: &usize, b: &usize| key(*b).total_cmp(&key(*a)).then(a.cmp(b));
    let l = l.min(ue_count);
    if l == 0 {
        out.clear();
        return;
    }
    if l < ue_count {
        out.select_nth_unstable_by(l - 1, order);
        out.truncate(l);
    }
    out.sort_unstable_by(order);
}

pub fn next_cluster_aoi_index(inputs: &AoiIndexInputs<'_>, l: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(inputs.aoi.len());
    next_cluster_aoi_index_into(inputs, l, &mut out);
    out
}

/// Mutable state of one scheduler instance.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    pub policy: Policy,
    pub cluster_size: usize,
    pub ue_count: usize,
    /// next UE position in the round-robin rotation
    pub rr_cursor: usize,
    rng: ChaCha8Rng,
}

impl SchedulerState {
    pub fn new(policy: Policy, cluster_size: usize, ue_count: usize, seed: u64) -> Result<Self> {
        Self::with_rng(policy, cluster_size, ue_count, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(policy: Policy, cluster_size: usize, ue_count: usize, rng: ChaCha8Rng) -> Result<Self> {
        if ue_count == 0 {
            return Err(Error::Config("at least one UE is required".into()));
        }
        if cluster_size == 0 || cluster_size > ue_count {
            return Err(Error::Config(format!("cluster size {cluster_size} must lie in [1, {ue_count}]")));
        }
        if policy == Policy::NoClustering && cluster_size != 1 {
            return Err(Error::Config("the no-clustering policy requires l = 1".into()));
        }
        Ok(Self { policy, cluster_size, ue_count, rr_cursor: 0, rng })
    }

    /// Selects the cluster for the next slot into `out`. `inputs` is only
    /// read by the AoI-index policy.
    pub fn next_cluster_into(&mut self, inputs: &AoiIndexInputs<'_>, out: &mut Vec<usize>) {
        match self.policy {
            p if p.is_round_robin() => self.rr_into(out),
            Policy::AoiIndex => next_cluster_aoi_index_into(inputs, self.cluster_size, out),
            Policy::Random => {
                out.clear();
                out.extend(sample(&mut self.rng, self.ue_count, self.cluster_size));
            }
            _ => unreachable!(),
        }
    }

    fn rr_into(&mut self, out: &mut Vec<usize>) {
        out.clear();
        out.extend((0..self.cluster_size).map(|j| (self.rr_cursor + j) % self.ue_count));
        self.rr_cursor = (self.rr_cursor + self.cluster_size) % self.ue_count;
    }
}

/// Next round-robin cluster: UEs `cursor, cursor+1, ..., cursor+l-1 (mod I)`.
/// The window slides by `l`, so clusters straddle the list end when `l` does
/// not divide `I`.
pub fn next_cluster_rr(state: &mut SchedulerState) -> Result<Vec<usize>> {
    if !state.policy.is_round_robin() {
        return Err(Error::Config(format!("policy {} is not round-robin", state.policy.name())));
    }
    let mut out = Vec::with_capacity(state.cluster_size);
    state.rr_into(&mut out);
    Ok(out)
}

/// Outcome of URLLC cluster sizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UrllcSizing {
    pub cluster_size: u32,
    /// both the PER and the delay target are met
    pub feasible: bool,
    pub per: f64,
    /// round-robin revisit interval in seconds
    pub revisit: f64,
}

/// Largest `l` whose uniform allocation `b = M/l` keeps the error rate at or
/// below `target_per` while the revisit interval `ceil(I/l)` slots stays
/// within `max_delay`. When no `l` meets both, the one with the smallest
/// summed log-violation is returned and flagged infeasible.
pub fn urllc_cluster_size(
    input: &ClusterOptInput,
    ue_count: u32,
    slot_duration: f64,
    max_delay: f64,
    target_per: f64,
) -> Result<UrllcSizing> {
    input.validate()?;
    if !(target_per > 0.0 && target_per < 1.0) {
        return Err(Error::Domain(format!("target PER must lie in (0, 1), got {target_per}")));
    }
    if !(slot_duration > 0.0 && max_delay >= slot_duration) {
        return Err(Error::Domain("need 0 < slot_duration <= max_delay".into()));
    }
    if ue_count == 0 {
        return Err(Error::Domain("UE count must be positive".into()));
    }
    let max_l = ue_count.min(input.carriers);
    let evaluate = |l: u32| {
        let per = input.uniform_per(l as f64);
        let revisit = ue_count.div_ceil(l) as f64 * slot_duration;
        (per, revisit)
    };
    let mut fallback: Option<(f64, UrllcSizing)> = None;
    for l in (1..=max_l).rev() {
        let (per, revisit) = evaluate(l);
        if per <= target_per && revisit <= max_delay {
            return Ok(UrllcSizing { cluster_size: l, feasible: true, per, revisit });
        }
        let violation = (per / target_per).ln().max(0.0) + (revisit / max_delay).ln().max(0.0);
        if fallback.as_ref().is_none_or(|(v, _)| violation <= *v) {
            fallback = Some((violation, UrllcSizing { cluster_size: l, feasible: false, per, revisit }));
        }
    }
    Ok(fallback.expect("at least one candidate").1)
}
