//! Numeric witnesses for the optimality of round-robin among blind schedules.
//!
//! A UE's history is the vector of its inter-transmission intervals (ITI).
//! From the zero initial state every UE starts with the single interval `(1)`.
//! Each applied slot then either opens a new interval of length 1 (the UE
//! transmits) or extends the last one, so after `T` slots the horizon is
//! `t = T + 1`, every history sums to `t`, and the interval counts sum to
//! `I + l T`.
//!
//! Flattening the histories from the newest interval backwards gives a
//! probability mass over the lag `kappa`; the expected AoI is the
//! expectation of the convex decreasing map `kappa -> eps^kappa`, so
//! second-order dominance of the measure orders schedules for every `eps`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Deterministic slot-to-cluster sequence over `ue_count` UEs (0-based ids).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    ue_count: usize,
    cluster_size: usize,
    slots: Vec<Vec<usize>>,
}

impl Schedule {
    pub fn new(ue_count: usize, slots: Vec<Vec<usize>>) -> Result<Self> {
        let cluster_size = slots.first().map_or(0, Vec::len);
        if ue_count == 0 || cluster_size == 0 && !slots.is_empty() {
            return Err(Error::Precondition("schedule needs UEs and non-empty clusters".into()));
        }
        for (t, cluster) in slots.iter().enumerate() {
            if cluster.len() != cluster_size {
                return Err(Error::Precondition(format!(
                    "slot {t} schedules {} UEs, expected {cluster_size}",
                    cluster.len()
                )));
            }
            let mut seen = vec![false; ue_count];
            for &ue in cluster {
                if ue >= ue_count || std::mem::replace(&mut seen[ue], true) {
                    return Err(Error::Precondition(format!("slot {t} has an invalid or repeated UE {ue}")));
                }
            }
        }
        Ok(Self { ue_count, cluster_size, slots })
    }

    /// One UE per slot.
    pub fn single(ue_count: usize, ues: &[usize]) -> Result<Self> {
        Self::new(ue_count, ues.iter().map(|&u| vec![u]).collect())
    }

    /// Sliding-window round-robin following `order`.
    pub fn round_robin(order: &[usize], cluster_size: usize, slots: usize) -> Result<Self> {
        let ue_count = order.len();
        if cluster_size == 0 || cluster_size > ue_count {
            return Err(Error::Config(format!("cluster size {cluster_size} must lie in [1, {ue_count}]")));
        }
        let slots =
            (0..slots).map(|t| (0..cluster_size).map(|q| order[(t * cluster_size + q) % ue_count]).collect()).collect();
        Self::new(ue_count, slots)
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn slots(&self) -> &[Vec<usize>] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// The single UE of slot `t` for `l = 1` schedules, 0-based.
    pub fn single_ues(&self) -> Option<Vec<usize>> {
        (self.cluster_size == 1).then(|| self.slots.iter().map(|c| c[0]).collect())
    }
}

/// Inter-transmission-interval histories of every UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItiHistory {
    /// oldest interval first
    pub intervals: Vec<Vec<u64>>,
    /// horizon `t`: applied slots plus one
    pub horizon: u64,
}

impl ItiHistory {
    pub fn ue_count(&self) -> usize {
        self.intervals.len()
    }

    /// k(pi, i, t)
    pub fn attempts(&self, ue: usize) -> usize {
        self.intervals[ue].len()
    }

    /// sum over UEs and intervals
    pub fn total(&self) -> u64 {
        self.intervals.iter().flatten().sum()
    }
}

/// Histories after applying every slot of `schedule`. `initial` holds each
/// UE's starting AoI (at least 1); `None` is the zero initial state.
pub fn iti_from_schedule(schedule: &Schedule, initial: Option<&[u64]>) -> Result<ItiHistory> {
    let ue_count = schedule.ue_count;
    let mut intervals: Vec<Vec<u64>> = match initial {
        None => vec![vec![1]; ue_count],
        Some(init) => {
            if init.len() != ue_count || init.contains(&0) {
                return Err(Error::Precondition("initial AoI must be given and positive for every UE".into()));
            }
            init.iter().map(|&a| vec![a]).collect()
        }
    };
    let mut active = vec![false; ue_count];
    for cluster in &schedule.slots {
        active.iter_mut().for_each(|a| *a = false);
        for &ue in cluster {
            active[ue] = true;
        }
        for (s, &on) in intervals.iter_mut().zip(&active) {
            if on {
                s.push(1);
            } else {
                *s.last_mut().unwrap() += 1;
            }
        }
    }
    Ok(ItiHistory { intervals, horizon: schedule.len() as u64 + 1 })
}

/// Lag measure `s_kappa`, its CDF and the running sum of the CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMeasure {
    pub pmf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub second_order_cdf: Vec<f64>,
}

impl StochasticMeasure {
    /// Running CDF sum at any lag; the CDF is 1 past the support.
    pub fn second_order_at(&self, kappa: usize) -> f64 {
        let last = self.second_order_cdf.len() - 1;
        if kappa <= last {
            self.second_order_cdf[kappa]
        } else {
            self.second_order_cdf[last] + (kappa - last) as f64
        }
    }

    /// Mean lag.
    pub fn first_moment(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

pub fn measure_from_iti(history: &ItiHistory) -> StochasticMeasure {
    let depth = history.intervals.iter().map(Vec::len).max().unwrap_or(1);
    let mut pmf = vec![0.0; depth];
    for s in &history.intervals {
        for (kappa, &v) in s.iter().rev().enumerate() {
            pmf[kappa] += v as f64;
        }
    }
    let total = history.total() as f64;
    pmf.iter_mut().for_each(|p| *p /= total);
    let cdf: Vec<f64> = pmf
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let second_order_cdf = cdf
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c;
            Some(*acc)
        })
        .collect();
    StochasticMeasure { pmf, cdf, second_order_cdf }
}

/// `a - b` of the second-order CDF sums over the union of both supports.
pub fn second_order_difference(a: &StochasticMeasure, b: &StochasticMeasure) -> Vec<f64> {
    let len = a.second_order_cdf.len().max(b.second_order_cdf.len());
    (0..len).map(|k| a.second_order_at(k) - b.second_order_at(k)).collect()
}

/// True if `a` second-order dominates `b`, i.e. its CDF sums never exceed
/// those of `b` (beyond `tol`).
pub fn dominates(a: &StochasticMeasure, b: &StochasticMeasure, tol: f64) -> bool {
    second_order_difference(a, b).iter().all(|&d| d <= tol)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Domain(format!("eps must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

/// Average expected AoI over UEs, summing each history from the newest
/// interval back with weights `eps^kappa`.
pub fn expected_avg_aoi(history: &ItiHistory, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let sum: f64 = history
        .intervals
        .iter()
        .map(|s| {
            let mut w = 1.0;
            let mut acc = 0.0;
            for &v in s.iter().rev() {
                acc += v as f64 * w;
                w *= eps;
            }
            acc
        })
        .sum();
    Ok(sum / history.ue_count() as f64)
}

/// Same quantity through the lag measure: `(total / I) sum_kappa s_kappa eps^kappa`.
pub fn expected_avg_aoi_from_measure(
    measure: &StochasticMeasure,
    total: u64,
    ue_count: usize,
    eps: f64,
) -> Result<f64> {
    check_eps(eps)?;
    let mut w = 1.0;
    let mut acc = 0.0;
    for p in &measure.pmf {
        acc += p * w;
        w *= eps;
    }
    Ok(total as f64 / ue_count as f64 * acc)
}

/// Zero-initial part and initial-state part of the expected AoI; the second
/// is `(1/I) sum_i (a_i - 1) eps^(k_i - 1)` for initial AoI `a_i`.
pub fn initial_state_split(history: &ItiHistory, initial: &[u64], eps: f64) -> Result<(f64, f64)> {
    if initial.len() != history.ue_count() {
        return Err(Error::Precondition("one initial AoI per UE is required".into()));
    }
    let total = expected_avg_aoi(history, eps)?;
    let part2 = history
        .intervals
        .iter()
        .zip(initial)
        .map(|(s, &a)| (a.saturating_sub(1)) as f64 * eps.powi(s.len() as i32 - 1))
        .sum::<f64>()
        / history.ue_count() as f64;
    Ok((total - part2, part2))
}

/// An exchange of two transmission slots between UEs `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExchangeTuple {
    pub x: usize,
    pub y: usize,
    pub kappa: usize,
    pub kappa_prime: usize,
    pub kappa_double_prime: usize,
}

/// Located exchange: `tau1` moves from `x` to `y`, `tau2` from `y` to `x`
/// (1-based slot numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ExchangeSlots {
    tau1: usize,
    tau2: usize,
    kappa_prime: usize,
    kappa_double_prime: usize,
}

fn cumulative(s: &[u64]) -> Vec<u64> {
    let mut c = Vec::with_capacity(s.len() + 1);
    c.push(0);
    for &v in s {
        c.push(c.last().unwrap() + v);
    }
    c
}

/// Lag `kappa'` whose interval of the other UE strictly contains slot `tau`.
fn enclosing_lag(c: &[u64], tau: u64) -> Option<usize> {
    let k = c.len() - 1;
    (0..k).find(|&lag| c[k - lag - 1] < tau && tau < c[k - lag])
}

fn locate(history: &ItiHistory, x: usize, y: usize, kappa: usize) -> Option<ExchangeSlots> {
    let (cx, cy) = (cumulative(&history.intervals[x]), cumulative(&history.intervals[y]));
    let (kx, ky) = (cx.len() - 1, cy.len() - 1);
    if kappa == 0 || kappa >= kx || kappa >= ky {
        return None;
    }
    let tau1 = cx[kx - kappa];
    let tau2 = cy[ky - kappa];
    let kappa_prime = enclosing_lag(&cy, tau1)?;
    let kappa_double_prime = enclosing_lag(&cx, tau2)?;
    let ordered = kappa_prime < kappa && kappa < kappa_double_prime;
    let equal = kappa_double_prime == kappa && kappa == kappa_prime + 1;
    (ordered || equal).then_some(ExchangeSlots {
        tau1: tau1 as usize,
        tau2: tau2 as usize,
        kappa_prime,
        kappa_double_prime,
    })
}

fn apply_exchange(schedule: &Schedule, x: usize, y: usize, slots: ExchangeSlots) -> Schedule {
    let mut out = schedule.clone();
    for u in out.slots[slots.tau1 - 1].iter_mut().filter(|u| **u == x) {
        *u = y;
    }
    for u in out.slots[slots.tau2 - 1].iter_mut().filter(|u| **u == y) {
        *u = x;
    }
    out
}

/// Slot exchange from the zero initial state: the transmission of `x` at lag
/// `kappa` goes to `y`, and the transmission of `y` at lag `kappa` goes to `x`.
/// The lags of the enclosing intervals must equal `kappa_prime` (in `y`'s
/// history) and `kappa_double_prime` (in `x`'s history).
pub fn slot_exchange(schedule: &Schedule, tuple: ExchangeTuple) -> Result<Schedule> {
    let ExchangeTuple { x, y, kappa, kappa_prime, kappa_double_prime } = tuple;
    if x == y || x >= schedule.ue_count || y >= schedule.ue_count {
        return Err(Error::Precondition(format!("invalid UE pair ({x}, {y})")));
    }
    let history = iti_from_schedule(schedule, None)?;
    match locate(&history, x, y, kappa) {
        Some(s) if s.kappa_prime == kappa_prime && s.kappa_double_prime == kappa_double_prime => {
            Ok(apply_exchange(schedule, x, y, s))
        }
        Some(s) => Err(Error::Precondition(format!(
            "tuple {tuple:?} locates lags ({}, {}), not ({kappa_prime}, {kappa_double_prime})",
            s.kappa_prime, s.kappa_double_prime
        ))),
        None => Err(Error::Precondition(format!("no valid exchange slots for {tuple:?}"))),
    }
}

/// Every exchange tuple that `slot_exchange` accepts on `schedule`.
pub fn admissible_exchanges(schedule: &Schedule) -> Result<Vec<ExchangeTuple>> {
    let history = iti_from_schedule(schedule, None)?;
    let mut out = Vec::new();
    for x in 0..schedule.ue_count {
        for y in 0..schedule.ue_count {
            if x == y {
                continue;
            }
            let max_kappa = history.attempts(x).min(history.attempts(y));
            for kappa in 1..max_kappa {
                if let Some(s) = locate(&history, x, y, kappa) {
                    out.push(ExchangeTuple {
                        x,
                        y,
                        kappa,
                        kappa_prime: s.kappa_prime,
                        kappa_double_prime: s.kappa_double_prime,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Largest schedule space `verify_rr_optimality` enumerates.
pub const ENUMERATION_BOUND: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleObjective {
    pub index: u64,
    pub slots: Vec<Vec<usize>>,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrOptimalityReport {
    pub ue_count: usize,
    pub cluster_size: usize,
    pub slots: usize,
    pub schedules: u64,
    pub eps_grid: Vec<f64>,
    /// best round-robin objective per `eps`
    pub rr_objective: Vec<f64>,
    /// best objective over all schedules per `eps`
    pub min_objective: Vec<f64>,
    pub rr_minimal: Vec<bool>,
    /// schedules whose CDF sums dip below round-robin's somewhere
    pub dominance_violations: u64,
    pub objectives: Option<Vec<ScheduleObjective>>,
}

impl RrOptimalityReport {
    pub fn passed(&self) -> bool {
        self.rr_minimal.iter().all(|&b| b) && self.dominance_violations == 0
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j as u128 + 1))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

fn objectives(history: &ItiHistory, eps_grid: &[f64]) -> Result<Vec<f64>> {
    eps_grid.iter().map(|&e| expected_avg_aoi(history, e)).collect()
}

/// Enumerates every `l`-clustered schedule of `T` slots from the zero
/// initial state and checks that round-robin attains the minimum expected
/// average AoI at every `eps` and that its lag measure second-order
/// dominates that of every schedule.
pub fn verify_rr_optimality(
    ue_count: usize,
    cluster_size: usize,
    slots: usize,
    eps_grid: &[f64],
    keep_objectives: bool,
) -> Result<RrOptimalityReport> {
    if cluster_size == 0 || cluster_size > ue_count {
        return Err(Error::Config(format!("cluster size {cluster_size} must lie in [1, {ue_count}]")));
    }
    for &e in eps_grid {
        check_eps(e)?;
    }
    let base = binomial(ue_count, cluster_size);
    let count = (0..slots).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX);
    if count > ENUMERATION_BOUND {
        return Err(Error::EnumerationBound { count, bound: ENUMERATION_BOUND });
    }
    let clusters = subsets(ue_count, cluster_size);

    // Round-robin over every UE ordering.
    let orders = if ue_count <= 8 { permutations(ue_count) } else { vec![(0..ue_count).collect()] };
    let mut rr_objective = vec![f64::INFINITY; eps_grid.len()];
    let mut rr_measure = None;
    for order in &orders {
        let h = iti_from_schedule(&Schedule::round_robin(order, cluster_size, slots)?, None)?;
        for (best, v) in rr_objective.iter_mut().zip(objectives(&h, eps_grid)?) {
            *best = best.min(v);
        }
        rr_measure.get_or_insert_with(|| measure_from_iti(&h));
    }
    let rr_measure = rr_measure.expect("at least one ordering");

    let decode = |index: u64| -> Schedule {
        let mut rem = index;
        let slots = (0..slots)
            .map(|_| {
                let c = clusters[(rem % base as u64) as usize].clone();
                rem /= base as u64;
                c
            })
            .collect();
        Schedule { ue_count, cluster_size, slots }
    };

    struct Partial {
        min: Vec<f64>,
        violations: u64,
        kept: Vec<ScheduleObjective>,
    }
    let n_eps = eps_grid.len();
    let empty = || Partial { min: vec![f64::INFINITY; n_eps], violations: 0, kept: Vec::new() };
    let result = (0..count as u64)
        .into_par_iter()
        .try_fold(empty, |mut acc, index| -> Result<Partial> {
            let schedule = decode(index);
            let h = iti_from_schedule(&schedule, None)?;
            let obj = objectives(&h, eps_grid)?;
            for (m, &v) in acc.min.iter_mut().zip(&obj) {
                *m = m.min(v);
            }
            if !dominates(&rr_measure, &measure_from_iti(&h), 1e-12) {
                acc.violations += 1;
            }
            if keep_objectives {
                acc.kept.push(ScheduleObjective { index, slots: schedule.slots, objectives: obj });
            }
            Ok(acc)
        })
        .try_reduce(empty, |mut a, mut b| {
            for (x, y) in a.min.iter_mut().zip(&b.min) {
                *x = x.min(*y);
            }
            a.violations += b.violations;
            a.kept.append(&mut b.kept);
            Ok(a)
        })?;

    let rr_minimal =
        rr_objective.iter().zip(&result.min).map(|(&rr, &min)| rr <= min + 1e-12 * min.abs().max(1.0)).collect();
    let objectives = keep_objectives.then(|| {
        let mut kept = result.kept;
        kept.sort_unstable_by_key(|o| o.index);
        kept
    });
    Ok(RrOptimalityReport {
        ue_count,
        cluster_size,
        slots,
        schedules: count as u64,
        eps_grid: eps_grid.to_vec(),
        rr_objective,
        min_objective: result.min,
        rr_minimal,
        dominance_violations: result.violations,
        objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(ues: &[usize]) -> Schedule {
        Schedule::single(2, &ues.iter().map(|u| u - 1).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(3, vec![vec![0, 1], vec![2]]).is_err());
        assert!(Schedule::new(3, vec![vec![0, 0]]).is_err());
        assert!(Schedule::new(3, vec![vec![3]]).is_err());
    }

    #[test]
    fn zero_initial_histories_of_a_worked_example() {
        let s = one_based(&[1, 2, 2, 2, 1, 1, 2, 1, 2, 1]);
        let h = iti_from_schedule(&s, None).unwrap();
        assert_eq!(h.horizon, 11);
        assert_eq!(h.intervals[0], vec![1, 4, 1, 2, 2, 1]);
        assert_eq!(h.intervals[1], vec![2, 1, 1, 3, 2, 2]);
    }

    #[test]
    fn rr_intervals_are_short() {
        let s = Schedule::round_robin(&[0, 1], 1, 10).unwrap();
        let h = iti_from_schedule(&s, None).unwrap();
        assert!(h.intervals.iter().flatten().all(|&v| v <= 2));
    }

    #[test]
    fn always_transmitting_ue_has_unit_intervals() {
        let s = Schedule::single(1, &[0; 4]).unwrap();
        let h = iti_from_schedule(&s, None).unwrap();
        assert_eq!(h.intervals[0], vec![1; 5]);
        let m = measure_from_iti(&h);
        assert_eq!(m.pmf, vec![0.2; 5]);
        assert!((m.cdf[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eps_zero_keeps_only_last_interval() {
        let s = one_based(&[1, 2, 2, 2, 1, 1, 2, 1, 2, 1]);
        let h = iti_from_schedule(&s, None).unwrap();
        assert_eq!(expected_avg_aoi(&h, 0.0).unwrap(), (1.0 + 2.0) / 2.0);
        assert!(expected_avg_aoi(&h, 1.0).is_err());
    }

    #[test]
    fn exchange_is_an_involution_on_the_touched_slots() {
        let s = one_based(&[1, 2, 2, 2, 1, 1, 2, 1, 2, 1]);
        let tuple = ExchangeTuple { x: 0, y: 1, kappa: 3, kappa_prime: 2, kappa_double_prime: 4 };
        let s2 = slot_exchange(&s, tuple).unwrap();
        let diff: Vec<usize> = (0..s.len()).filter(|&t| s.slots()[t] != s2.slots()[t]).collect();
        assert_eq!(diff, vec![3, 5]);
        let mut back = s2.clone();
        back.slots.swap(3, 5);
        assert_eq!(back, s);
    }

    #[test]
    fn mismatched_tuple_is_rejected() {
        let s = one_based(&[1, 2, 2, 2, 1, 1, 2, 1, 2, 1]);
        let bad = ExchangeTuple { x: 0, y: 1, kappa: 3, kappa_prime: 1, kappa_double_prime: 4 };
        assert!(matches!(slot_exchange(&s, bad), Err(Error::Precondition(_))));
        let none = ExchangeTuple { x: 0, y: 1, kappa: 9, kappa_prime: 0, kappa_double_prime: 0 };
        assert!(slot_exchange(&s, none).is_err());
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        assert!(matches!(verify_rr_optimality(4, 2, 10, &[0.5], false), Err(Error::EnumerationBound { .. })));
    }

    #[test]
    fn binomial_and_subsets_agree() {
        for (n, k) in [(4, 2), (5, 3), (6, 1)] {
            assert_eq!(subsets(n, k).len() as u128, binomial(n, k));
        }
    }
}
