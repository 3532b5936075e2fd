//! Finite-blocklength link model.
//!
//! A packet of `tau` information bits sent over a set of sub-carriers, each
//! used for `n` channel symbols, fails with probability
//!
//! ```text
//! eps = Q( (sum_m C_m * n - tau) * ln 2 / sqrt(sum_m V_m * n) )
//! ```
//!
//! where `C = log2(1 + snr)` and `V = 1 - 1/(1 + snr)^2` are the capacity and
//! dispersion of a complex AWGN sub-carrier. The `ln 2` factor is applied in
//! every code path (some statements of the model drop it from the numerator).

use std::f64::consts::LN_2;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Capacity and dispersion of one sub-carrier at a given linear SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkQuality {
    pub snr: f64,
    /// bits per symbol
    pub capacity: f64,
    pub dispersion: f64,
}

impl LinkQuality {
    pub fn from_snr(snr: f64) -> Result<Self> {
        if !(snr.is_finite() && snr > 0.0) {
            return Err(Error::Domain(format!("snr must be finite and positive, got {snr}")));
        }
        Ok(Self::from_snr_unchecked(snr))
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::from_snr(db_to_linear(snr_db))
    }

    #[inline]
    pub(crate) fn from_snr_unchecked(snr: f64) -> Self {
        let inv = 1.0 / (1.0 + snr);
        Self { snr, capacity: snr.ln_1p() / LN_2, dispersion: 1.0 - inv * inv }
    }
}

/// Blocklength and payload of one transmission, with the `ln 2`-scaled
/// quantities used by the cluster-size analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FblParams {
    /// n, symbols per sub-carrier and slot
    pub blocklength: u32,
    /// tau, information bits per packet
    pub payload_bits: u32,
}

impl FblParams {
    pub fn new(blocklength: u32, payload_bits: u32) -> Result<Self> {
        if blocklength == 0 || payload_bits == 0 {
            return Err(Error::Domain("blocklength and payload must be positive".into()));
        }
        Ok(Self { blocklength, payload_bits })
    }

    /// tau' = tau * ln 2
    pub fn scaled_payload(&self) -> f64 {
        self.payload_bits as f64 * LN_2
    }

    /// C' = C * ln 2
    pub fn scaled_capacity(capacity: f64) -> f64 {
        capacity * LN_2
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`, clamped to `[0, 1]`.
pub fn q_function(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("Q-function argument must be finite, got {x}")));
    }
    Ok(gaussian_tail(x))
}

#[inline]
pub(crate) fn gaussian_tail(x: f64) -> f64 {
    (0.5 * erfc(x / std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
}

/// Error probability from the summed capacity and dispersion of the carriers
/// a UE holds. The sums may be fractional (relaxed carrier counts).
pub fn per_from_sums(capacity_sum: f64, dispersion_sum: f64, n: u32, tau: u32) -> Result<f64> {
    if dispersion_sum <= 0.0 {
        return Err(Error::ZeroDispersion);
    }
    let n = n as f64;
    let arg = (capacity_sum * n - tau as f64) * LN_2 / (dispersion_sum * n).sqrt();
    if arg.is_nan() {
        return Err(Error::Domain("non-finite error-rate argument".into()));
    }
    Ok(gaussian_tail(arg))
}

/// Packet error rate of a UE transmitting over `links`.
pub fn packet_error_rate(links: &[LinkQuality], n: u32, tau: u32) -> Result<f64> {
    if links.is_empty() {
        return Err(Error::NoCarriers);
    }
    if n == 0 || tau == 0 {
        return Err(Error::Domain("n and tau must be at least 1".into()));
    }
    let (c, v) = links.iter().fold((0.0, 0.0), |(c, v), l| (c + l.capacity, v + l.dispersion));
    per_from_sums(c, v, n, tau)
}

/// Error rate for `carriers` identical sub-carriers; `carriers` may be fractional.
pub fn uniform_per(link: &LinkQuality, carriers: f64, n: u32, tau: u32) -> Result<f64> {
    if carriers.is_nan() || carriers <= 0.0 {
        return Err(Error::NoCarriers);
    }
    per_from_sums(carriers * link.capacity, carriers * link.dispersion, n, tau)
}

/// Statistical description of the per-carrier linear SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SnrDistribution {
    /// Every carrier sees the same SNR.
    PointMass { snr: f64 },
    /// Gamma-distributed SNR with the given shape and mean.
    Gamma { shape: f64, mean: f64 },
}

impl SnrDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SnrDistribution::PointMass { snr } => snr.is_finite() && snr > 0.0,
            SnrDistribution::Gamma { shape, mean } => {
                shape.is_finite() && shape > 0.0 && mean.is_finite() && mean > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid SNR distribution {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SnrDistribution::PointMass { snr } => snr,
            SnrDistribution::Gamma { mean, .. } => mean,
        }
    }

    pub fn sampler(&self) -> Result<SnrSampler> {
        self.validate()?;
        Ok(match *self {
            SnrDistribution::PointMass { snr } => SnrSampler::Fixed(snr),
            SnrDistribution::Gamma { shape, mean } => {
                SnrSampler::Gamma(Gamma::new(shape, mean / shape).map_err(|e| Error::Config(e.to_string()))?)
            }
        })
    }
}

/// Parses `point:<snr>` or `gamma:<shape>:<mean>` (linear SNR).
impl FromStr for SnrDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {t:?} in {s:?}")));
        let dist = match parts.as_slice() {
            ["point", snr] => SnrDistribution::PointMass { snr: num(snr)? },
            ["gamma", shape, mean] => SnrDistribution::Gamma { shape: num(shape)?, mean: num(mean)? },
            _ => return Err(Error::Config(format!("unsupported SNR distribution {s:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SnrSampler {
    Fixed(f64),
    Gamma(Gamma<f64>),
}

impl Distribution<f64> for SnrSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SnrSampler::Fixed(v) => *v,
            // Gamma can return exactly 0 for tiny shapes; keep the SNR positive.
            SnrSampler::Gamma(g) => g.sample(rng).max(f64::MIN_POSITIVE),
        }
    }
}

/// Monte Carlo estimate of the expected error rate of a UE holding `b`
/// carriers whose SNRs are i.i.d. draws from `distribution`.
pub fn expected_per_over_fading(
    distribution: &SnrDistribution,
    b: usize,
    n: u32,
    tau: u32,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if b == 0 {
        return Err(Error::NoCarriers);
    }
    if samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let sampler = distribution.sampler()?;
    if let SnrSampler::Fixed(snr) = sampler {
        return uniform_per(&LinkQuality::from_snr(snr)?, b as f64, n, tau);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..samples {
        let (mut c, mut v) = (0.0, 0.0);
        for _ in 0..b {
            let link = LinkQuality::from_snr_unchecked(sampler.sample(&mut rng));
            c += link.capacity;
            v += link.dispersion;
        }
        acc += per_from_sums(c, v, n, tau)?;
    }
    Ok(acc / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link_with_capacity(bits: f64) -> LinkQuality {
        LinkQuality::from_snr(2f64.powf(bits) - 1.0).unwrap()
    }

    #[test]
    fn q_of_zero_is_half() {
        assert_eq!(q_function(0.0).unwrap(), 0.5);
    }

    #[test]
    fn q_far_tail_does_not_underflow_into_error() {
        let v = q_function(40.0).unwrap();
        assert!((0.0..1e-300).contains(&v));
        assert_eq!(q_function(-40.0).unwrap(), 1.0);
    }

    #[test]
    fn q_rejects_non_finite() {
        assert!(matches!(q_function(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(q_function(f64::INFINITY), Err(Error::Domain(_))));
    }

    #[test]
    fn link_quality_consistency() {
        let l = LinkQuality::from_db(5.0).unwrap();
        assert!((l.capacity - (1.0 + l.snr).log2()).abs() <= 1e-12 * l.capacity);
        assert!(l.dispersion > 0.0 && l.dispersion < 1.0);
        assert!(LinkQuality::from_snr(0.0).is_err());
        assert!(LinkQuality::from_snr(-1.0).is_err());
    }

    #[test]
    fn per_at_capacity_boundary_is_half() {
        // C * n = tau exactly: 2 bits/symbol, n = 8, tau = 16
        let link = link_with_capacity(2.0);
        assert_eq!(packet_error_rate(&[link], 8, 16).unwrap(), 0.5);
    }

    #[test]
    fn per_two_identical_links() {
        let link = link_with_capacity(2.0);
        let (n, tau) = (8u32, 16u32);
        let got = packet_error_rate(&[link, link], n, tau).unwrap();
        // Independent scalar evaluation of Q(tau ln2 / sqrt(2 V n)).
        let arg = tau as f64 * LN_2 / (2.0 * link.dispersion * n as f64).sqrt();
        let expected = 0.5 * erfc(arg / 2f64.sqrt());
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn per_empty_link_set_errors() {
        assert_eq!(packet_error_rate(&[], 1, 1), Err(Error::NoCarriers));
    }

    #[test]
    fn doubling_carriers_reduces_per_below_half() {
        let link = LinkQuality::from_db(0.0).unwrap();
        let (n, tau) = (4, 20);
        let mut prev = f64::NAN;
        for count in 1..=64usize {
            let links = vec![link; count];
            let eps = packet_error_rate(&links, n, tau).unwrap();
            if count.is_power_of_two() && count > 1 && prev < 0.5 {
                assert!(eps < prev, "count {count}: {eps} !< {prev}");
            }
            if count.is_power_of_two() {
                prev = eps;
            }
        }
    }

    #[test]
    fn point_mass_expectation_is_exact() {
        let dist = SnrDistribution::PointMass { snr: 2.5 };
        let mc = expected_per_over_fading(&dist, 3, 4, 20, 10, 7).unwrap();
        let direct = packet_error_rate(&[LinkQuality::from_snr(2.5).unwrap(); 3], 4, 20).unwrap();
        assert_eq!(mc, direct);
    }

    #[test]
    fn monte_carlo_is_deterministic_under_seed() {
        let dist = SnrDistribution::Gamma { shape: 2.0, mean: 3.0 };
        let a = expected_per_over_fading(&dist, 2, 10, 40, 5000, 11).unwrap();
        let b = expected_per_over_fading(&dist, 2, 10, 40, 5000, 11).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn distribution_parsing() {
        assert_eq!("gamma:2:3.5".parse::<SnrDistribution>().unwrap(), SnrDistribution::Gamma { shape: 2.0, mean: 3.5 });
        assert!(matches!("rician:3".parse::<SnrDistribution>(), Err(Error::Config(_))));
        assert!(matches!("gamma:-1:2".parse::<SnrDistribution>(), Err(Error::Config(_))));
    }
}
