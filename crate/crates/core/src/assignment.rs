//! Sub-carrier assignment inside one slot.
//!
//! UEs are addressed by their position `0..l` in the slot's cluster.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbl::{per_from_sums, LinkQuality, SnrDistribution};

/// Carrier ownership: each of the `M` carriers belongs to exactly one of the
/// `l` cluster members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    owner: Vec<usize>,
    counts: Vec<usize>,
}

impl AssignmentMatrix {
    /// Builds the matrix from the owner of every carrier. Every UE must own at
    /// least one carrier.
    pub fn from_owners(owner: Vec<usize>, cluster_size: usize) -> Result<Self> {
        let mut counts = vec![0usize; cluster_size];
        for &o in &owner {
            if o >= cluster_size {
                return Err(Error::Precondition(format!("owner {o} outside cluster of {cluster_size}")));
            }
            counts[o] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::Precondition("every cluster member needs a carrier".into()));
        }
        Ok(Self { owner, counts })
    }

    pub fn carrier_count(&self) -> usize {
        self.owner.len()
    }

    pub fn cluster_size(&self) -> usize {
        self.counts.len()
    }

    pub fn owner(&self, carrier: usize) -> usize {
        self.owner[carrier]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    /// b_i
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// a_{m,i}
    pub fn entry(&self, carrier: usize, ue: usize) -> bool {
        self.owner[carrier] == ue
    }

    pub fn carriers_of(&self, ue: usize) -> impl Iterator<Item = usize> + '_ {
        self.owner.iter().enumerate().filter(move |(_, &o)| o == ue).map(|(m, _)| m)
    }

    fn reassign(&mut self, carrier: usize, to: usize) {
        let from = self.owner[carrier];
        self.counts[from] -= 1;
        self.counts[to] += 1;
        self.owner[carrier] = to;
    }

    /// Checks the one-owner-per-carrier and count invariants.
    pub fn is_consistent(&self) -> bool {
        let mut counts = vec![0usize; self.counts.len()];
        for &o in &self.owner {
            if o >= counts.len() {
                return false;
            }
            counts[o] += 1;
        }
        counts == self.counts && counts.iter().sum::<usize>() == self.owner.len()
    }
}

/// Link quality of every (carrier, cluster member) pair, row-major by carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    carriers: usize,
    cluster_size: usize,
    links: Vec<LinkQuality>,
}

impl LinkTable {
    pub fn new(carriers: usize, cluster_size: usize, links: Vec<LinkQuality>) -> Result<Self> {
        if links.len() != carriers * cluster_size {
            return Err(Error::Precondition(format!(
                "link table holds {} entries, expected {carriers} x {cluster_size}",
                links.len()
            )));
        }
        Ok(Self { carriers, cluster_size, links })
    }

    /// Table from linear SNRs laid out as `snr[m * l + i]`.
    pub fn from_snr(carriers: usize, cluster_size: usize, snr: &[f64]) -> Result<Self> {
        let links = snr.iter().map(|&s| LinkQuality::from_snr(s)).collect::<Result<Vec<_>>>()?;
        Self::new(carriers, cluster_size, links)
    }

    /// Same link on every entry.
    pub fn flat(carriers: usize, cluster_size: usize, link: LinkQuality) -> Self {
        Self { carriers, cluster_size, links: vec![link; carriers * cluster_size] }
    }

    pub(crate) fn empty() -> Self {
        Self { carriers: 0, cluster_size: 0, links: Vec::new() }
    }

    /// Resizes for reuse; entries are then overwritten with `set`.
    pub(crate) fn reset(&mut self, carriers: usize, cluster_size: usize) {
        self.carriers = carriers;
        self.cluster_size = cluster_size;
        self.links.resize(carriers * cluster_size, LinkQuality::from_snr_unchecked(1.0));
    }

    pub(crate) fn set(&mut self, carrier: usize, ue: usize, link: LinkQuality) {
        self.links[carrier * self.cluster_size + ue] = link;
    }

    pub fn carriers(&self) -> usize {
        self.carriers
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    #[inline]
    pub fn get(&self, carrier: usize, ue: usize) -> &LinkQuality {
        &self.links[carrier * self.cluster_size + ue]
    }
}

/// Per-UE error rates of `assignment` over `table`.
pub fn assignment_per(table: &LinkTable, assignment: &AssignmentMatrix, n: u32, tau: u32) -> Result<Vec<f64>> {
    check_dims(table, assignment)?;
    let (c, v) = per_ue_sums(table, assignment);
    c.iter().zip(&v).map(|(&c, &v)| per_from_sums(c, v, n, tau)).collect()
}

fn check_dims(table: &LinkTable, assignment: &AssignmentMatrix) -> Result<()> {
    if table.carriers != assignment.carrier_count() || table.cluster_size != assignment.cluster_size() {
        return Err(Error::Precondition("link table and assignment dimensions differ".into()));
    }
    Ok(())
}

fn per_ue_sums(table: &LinkTable, assignment: &AssignmentMatrix) -> (Vec<f64>, Vec<f64>) {
    let l = assignment.cluster_size();
    let (mut c, mut v) = (vec![0.0; l], vec![0.0; l]);
    for (m, &o) in assignment.owner.iter().enumerate() {
        let link = table.get(m, o);
        c[o] += link.capacity;
        v[o] += link.dispersion;
    }
    (c, v)
}

/// Blind uniform assignment: `floor(M/l)` carriers each, one extra for
/// `M mod l` UEs drawn at random, and a random carrier-to-UE mapping.
pub fn uniform_blind_assign<R: Rng + ?Sized>(
    carriers: usize,
    cluster_size: usize,
    rng: &mut R,
) -> Result<AssignmentMatrix> {
    if cluster_size == 0 || cluster_size > carriers {
        return Err(Error::Precondition(format!("cannot split {carriers} carriers among {cluster_size} UEs")));
    }
    let mut owner = Vec::with_capacity(carriers);
    uniform_blind_assign_into(carriers, cluster_size, rng, &mut owner);
    AssignmentMatrix::from_owners(owner, cluster_size)
}

pub(crate) fn uniform_blind_assign_into<R: Rng + ?Sized>(
    carriers: usize,
    cluster_size: usize,
    rng: &mut R,
    owner: &mut Vec<usize>,
) {
    let base = carriers / cluster_size;
    owner.clear();
    for ue in 0..cluster_size {
        owner.extend(std::iter::repeat_n(ue, base));
    }
    let extra = carriers % cluster_size;
    if extra > 0 {
        owner.extend(sample(rng, cluster_size, extra));
    }
    owner.shuffle(rng);
}

/// Result of the recursive CSI-driven assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveOutcome {
    pub assignment: AssignmentMatrix,
    /// accepted moves
    pub iterations: usize,
    pub per: Vec<f64>,
    pub per_sum: f64,
}

/// Recursive assignment with full CSI. Each round moves the weakest carrier
/// of the most reliable UE to the least reliable UE and keeps the move only if
/// the summed error rate strictly drops. A move that would leave a UE without
/// carriers ends the search.
pub fn recursive_assign(table: &LinkTable, n: u32, tau: u32, init: AssignmentMatrix) -> Result<RecursiveOutcome> {
    check_dims(table, &init)?;
    if !init.is_consistent() || init.counts.contains(&0) {
        return Err(Error::Precondition("initial assignment violates the ownership invariants".into()));
    }
    let mut assignment = init;
    let (mut c, mut v) = per_ue_sums(table, &assignment);
    let mut per = c.iter().zip(&v).map(|(&c, &v)| per_from_sums(c, v, n, tau)).collect::<Result<Vec<_>>>()?;
    let mut per_sum: f64 = per.iter().sum();
    let mut iterations = 0;
    let cap = 100 * assignment.carrier_count() * assignment.cluster_size() + 1;

    while iterations < cap {
        let (best, worst) = extremes(&per);
        if per[best] == per[worst] || assignment.counts[best] <= 1 {
            break;
        }
        // weakest carrier of `best`, lowest index on ties
        let mut carrier = usize::MAX;
        let mut weakest = f64::INFINITY;
        for (m, &o) in assignment.owner.iter().enumerate() {
            if o == best && table.get(m, best).snr < weakest {
                weakest = table.get(m, best).snr;
                carrier = m;
            }
        }
        let (from, to) = (table.get(carrier, best), table.get(carrier, worst));
        let (cb, vb) = (c[best] - from.capacity, v[best] - from.dispersion);
        let (cw, vw) = (c[worst] + to.capacity, v[worst] + to.dispersion);
        let eb = per_from_sums(cb, vb.max(f64::MIN_POSITIVE), n, tau)?;
        let ew = per_from_sums(cw, vw, n, tau)?;
        let candidate = per_sum - per[best] - per[worst] + eb + ew;
        if candidate.is_nan() || candidate >= per_sum {
            break;
        }
        assignment.reassign(carrier, worst);
        (c[best], v[best], c[worst], v[worst]) = (cb, vb, cw, vw);
        (per[best], per[worst]) = (eb, ew);
        per_sum = candidate;
        iterations += 1;
    }
    // Drop accumulated rounding from the incremental updates.
    let per = assignment_per(table, &assignment, n, tau)?;
    let per_sum = per.iter().sum();
    Ok(RecursiveOutcome { assignment, iterations, per, per_sum })
}

/// (argmin, argmax) with ties to the lowest index.
fn extremes(per: &[f64]) -> (usize, usize) {
    let (mut lo, mut hi) = (0, 0);
    for (i, &e) in per.iter().enumerate().skip(1) {
        if e < per[lo] {
            lo = i;
        }
        if e > per[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

/// UEs whose carrier count cannot carry the payload even at the average SNR:
/// `b_i C(z) n < tau`.
pub fn capacity_shortfall(counts: &[usize], mean_link: &LinkQuality, n: u32, tau: u32) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &b)| (b as f64) * mean_link.capacity * (n as f64) < tau as f64)
        .map(|(i, _)| i)
        .collect()
}

/// Largest enumeration accepted by the partition oracle.
pub const ORACLE_MAX_CARRIERS: usize = 12;
pub const ORACLE_MAX_CLUSTER: usize = 4;
const ORACLE_CHUNK: usize = 1 << 14;

/// Summary of one composition in the partition oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionStats {
    pub counts: Vec<usize>,
    /// estimated sum of expected error rates
    pub objective: f64,
    /// mean of the paired difference against the reference composition
    pub diff_mean: f64,
    /// standard error of that difference
    pub diff_se: f64,
}

impl CompositionStats {
    pub fn is_balanced(&self) -> bool {
        let (lo, hi) = (self.counts.iter().min(), self.counts.iter().max());
        matches!((lo, hi), (Some(a), Some(b)) if b - a <= 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOracleReport {
    pub compositions: Vec<CompositionStats>,
    /// index of the reference (first balanced) composition
    pub reference: usize,
    /// index of the composition with the smallest objective
    pub argmin: usize,
    pub samples: usize,
}

impl PartitionOracleReport {
    pub fn best_counts(&self) -> &[usize] {
        &self.compositions[self.argmin].counts
    }

    /// True if the minimum is balanced, or the balanced reference trails it
    /// by at most `k` standard errors of the paired difference.
    pub fn balanced_is_optimal(&self, k: f64) -> bool {
        let best = &self.compositions[self.argmin];
        best.is_balanced() || -best.diff_mean <= k * best.diff_se
    }
}

/// All compositions of `total` into `parts` positive integers, in
/// lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=left - (parts - 1) {
            cur.push(first);
            rec(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

#[derive(Clone)]
struct Accum {
    obj: Vec<f64>,
    diff: Vec<f64>,
    diff_sq: Vec<f64>,
}

impl Accum {
    fn new(k: usize) -> Self {
        Self { obj: vec![0.0; k], diff: vec![0.0; k], diff_sq: vec![0.0; k] }
    }

    fn merge(mut self, other: &Accum) -> Self {
        for j in 0..self.obj.len() {
            self.obj[j] += other.obj[j];
            self.diff[j] += other.diff[j];
            self.diff_sq[j] += other.diff_sq[j];
        }
        self
    }
}

/// Enumerates every split of `M` i.i.d. carriers among `l` UEs and estimates
/// the summed expected error rate of each. All compositions see the same SNR
/// draws per sample, laid out contiguously, so the differences between
/// compositions are estimated with common random numbers.
pub fn brute_force_partition_oracle(
    carriers: usize,
    cluster_size: usize,
    distribution: &SnrDistribution,
    n: u32,
    tau: u32,
    samples: usize,
    seed: u64,
) -> Result<PartitionOracleReport> {
    if carriers > ORACLE_MAX_CARRIERS || cluster_size > ORACLE_MAX_CLUSTER {
        return Err(Error::EnumerationBound {
            count: compositions(carriers.min(40), cluster_size.min(40)).len() as u128,
            bound: compositions(ORACLE_MAX_CARRIERS, ORACLE_MAX_CLUSTER).len() as u128,
        });
    }
    if cluster_size == 0 || cluster_size > carriers {
        return Err(Error::Precondition(format!("cannot split {carriers} carriers among {cluster_size} UEs")));
    }
    if samples < 2 {
        return Err(Error::Domain("the oracle needs at least two samples".into()));
    }
    let sampler = distribution.sampler()?;
    let comps = compositions(carriers, cluster_size);
    let reference = comps
        .iter()
        .position(|c| c.iter().max().unwrap() - c.iter().min().unwrap() <= 1)
        .expect("a balanced composition always exists");
    // Contiguous blocks as (start, len) index pairs into the block table.
    let block_index = |start: usize, len: usize| start * carriers + (len - 1);
    let layout: Vec<Vec<usize>> = comps
        .iter()
        .map(|c| {
            let mut start = 0;
            c.iter()
                .map(|&b| {
                    let idx = block_index(start, b);
                    start += b;
                    idx
                })
                .collect()
        })
        .collect();

    let chunks = samples.div_ceil(ORACLE_CHUNK);
    let partials: Vec<Accum> = (0..chunks)
        .into_par_iter()
        .map(|chunk| -> Result<Accum> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = ORACLE_CHUNK.min(samples - chunk * ORACLE_CHUNK);
            let mut acc = Accum::new(comps.len());
            let mut links = vec![LinkQuality::from_snr_unchecked(1.0); carriers];
            let mut block = vec![0.0; carriers * carriers];
            let mut obj = vec![0.0; comps.len()];
            for _ in 0..count {
                for link in links.iter_mut() {
                    *link = LinkQuality::from_snr_unchecked(sampler.sample(&mut rng));
                }
                for start in 0..carriers {
                    let (mut c, mut v) = (0.0, 0.0);
                    for (len, link) in links[start..].iter().enumerate() {
                        c += link.capacity;
                        v += link.dispersion;
                        block[block_index(start, len + 1)] = per_from_sums(c, v, n, tau)?;
                    }
                }
                for (o, blocks) in obj.iter_mut().zip(&layout) {
                    *o = blocks.iter().map(|&b| block[b]).sum();
                }
                let base = obj[reference];
                for (j, &o) in obj.iter().enumerate() {
                    let d = o - base;
                    acc.obj[j] += o;
                    acc.diff[j] += d;
                    acc.diff_sq[j] += d * d;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = partials.iter().fold(Accum::new(comps.len()), |a, b| a.merge(b));

    let s = samples as f64;
    let compositions: Vec<CompositionStats> = comps
        .into_iter()
        .enumerate()
        .map(|(j, counts)| {
            let mean = total.diff[j] / s;
            let var = ((total.diff_sq[j] - s * mean * mean) / (s - 1.0)).max(0.0);
            CompositionStats { counts, objective: total.obj[j] / s, diff_mean: mean, diff_se: (var / s).sqrt() }
        })
        .collect();
    let argmin = compositions
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.diff_mean.total_cmp(&b.1.diff_mean).then(a.0.cmp(&b.0)))
        .map(|(j, _)| j)
        .unwrap();
    Ok(PartitionOracleReport { compositions, reference, argmin, samples })
}
