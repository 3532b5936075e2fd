//! AoI-optimal cluster size for clustered round-robin over a flat channel.
//!
//! With `l` UEs per slot and `b = M/l` carriers each, the per-UE average AoI
//! under round-robin is
//!
//! ```text
//! h(l) = 1/lambda + n (1 + eps(l)) / (2 (1 - eps(l))) * I/l + n - 3/2
//! eps(l) = Q(beta(l)),   beta(l) = (M C' n - tau' l) / sqrt(M V n l)
//! ```
//!
//! Neglecting `eps^2`, the stationary point solves `beta^2 + 4C'tau'/V =
//! 2 pi e^{beta^2}`, i.e. `w e^w = -2 pi e^{-4C'tau'/V}` with
//! `w = -(beta^2 + 4C'tau'/V)`. Of the four candidate roots only the one on
//! `W_{-1}` with the minus sign keeps `beta > 0`:
//!
//! ```text
//! l = (delta - sqrt(delta^2 - 4 tau'^2 M^2 C'^2 n^2)) / (2 tau'^2)
//! delta = -M n (2 C' tau' + w V)
//! ```
//!
//! The optimum does not depend on the UE count `I`.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::fbl::{gaussian_tail, LinkQuality};
use crate::lambert::{lambert_w0, lambert_w_minus1_log};

/// Predicted error rates above this mark make the `eps^2 ~ 0` step unreliable.
pub const HIGH_PER_WARNING: f64 = 0.3;

/// Homogeneous, frequency-flat system seen by the cluster-size analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptInput {
    /// M
    pub carriers: u32,
    /// n
    pub blocklength: u32,
    /// C in bits per symbol
    pub capacity: f64,
    /// tau in bits
    pub payload_bits: u32,
    /// V
    pub dispersion: f64,
}

impl ClusterOptInput {
    pub fn from_link(carriers: u32, blocklength: u32, link: LinkQuality, payload_bits: u32) -> Result<Self> {
        let input = Self { carriers, blocklength, capacity: link.capacity, payload_bits, dispersion: link.dispersion };
        input.validate()?;
        Ok(input)
    }

    pub fn from_snr_db(carriers: u32, blocklength: u32, snr_db: f64, payload_bits: u32) -> Result<Self> {
        Self::from_link(carriers, blocklength, LinkQuality::from_db(snr_db)?, payload_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.carriers == 0 || self.blocklength == 0 || self.payload_bits == 0 {
            return Err(Error::Domain("M, n and tau must be positive".into()));
        }
        if !(self.capacity > 0.0 && self.dispersion > 0.0 && self.dispersion < 1.0) {
            return Err(Error::Domain("capacity and dispersion must be positive".into()));
        }
        let capacity_bits = self.carriers as f64 * self.capacity * self.blocklength as f64;
        if capacity_bits <= self.payload_bits as f64 {
            return Err(Error::InfeasiblePayload { capacity_bits, payload_bits: self.payload_bits });
        }
        Ok(())
    }

    /// C' = C ln 2
    pub fn scaled_capacity(&self) -> f64 {
        self.capacity * LN_2
    }

    /// tau' = tau ln 2
    pub fn scaled_payload(&self) -> f64 {
        self.payload_bits as f64 * LN_2
    }

    /// `M C' n / tau'`, the cluster size at which `beta` reaches zero.
    pub fn cluster_bound(&self) -> f64 {
        self.carriers as f64 * self.capacity * self.blocklength as f64 / self.payload_bits as f64
    }

    /// `beta(l)` under uniform allocation `b = M/l`.
    pub fn beta(&self, l: f64) -> f64 {
        let (m, n) = (self.carriers as f64, self.blocklength as f64);
        (m * self.scaled_capacity() * n - self.scaled_payload() * l) / (m * self.dispersion * n * l).sqrt()
    }

    /// Error rate under uniform allocation `b = M/l`, `l` relaxed to a real.
    pub fn uniform_per(&self, l: f64) -> f64 {
        gaussian_tail(self.beta(l))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptResult {
    /// relaxed optimum
    pub l_real: f64,
    /// integer choice in `[1, M]`
    pub l_int: u32,
    pub delta: f64,
    /// `W_{-1}(-2 pi e^{-4C'tau'/V})`
    pub w: f64,
    pub beta_opt: f64,
    /// `Q(beta_opt)`
    pub predicted_per: f64,
    /// set when `predicted_per > HIGH_PER_WARNING`
    pub high_per_warning: bool,
}

/// Average AoI of a UE under round-robin with cluster ratio `alpha = I/l`.
pub fn rr_average_aoi(eps_uni: f64, n: u32, alpha: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps_uni) || eps_uni.is_nan() {
        return Err(Error::Domain(format!("eps must lie in [0, 1), got {eps_uni}")));
    }
    if eps_uni == 1.0 {
        return Err(Error::Divergent);
    }
    if alpha.is_nan() || alpha < 1.0 || lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Domain(format!("need alpha >= 1 and lambda > 0, got {alpha}, {lambda}")));
    }
    let n = n as f64;
    Ok(1.0 / lambda + n * (1.0 + eps_uni) / (2.0 * (1.0 - eps_uni)) * alpha + n - 1.5)
}

/// `l`-dependent part of the round-robin AoI per unit of `I`; shares its
/// argmin with `rr_average_aoi` for every UE count.
fn relative_objective(input: &ClusterOptInput, l: f64) -> f64 {
    let eps = input.uniform_per(l);
    if eps >= 1.0 {
        return f64::INFINITY;
    }
    input.blocklength as f64 * (1.0 + eps) / (2.0 * (1.0 - eps) * l)
}

/// `W_{-1}` of the stationarity equation, computed from the log of its argument.
fn lambert_argument_log(input: &ClusterOptInput) -> f64 {
    (2.0 * PI).ln() - 4.0 * input.scaled_capacity() * input.scaled_payload() / input.dispersion
}

pub fn optimal_cluster_size(input: &ClusterOptInput) -> Result<ClusterOptResult> {
    input.validate()?;
    let (m, n) = (input.carriers as f64, input.blocklength as f64);
    let (c, tau, v) = (input.scaled_capacity(), input.scaled_payload(), input.dispersion);

    let log_arg = lambert_argument_log(input);
    if log_arg > -1.0 {
        return Err(Error::LambertDomain { log_magnitude: log_arg });
    }
    let w = lambert_w_minus1_log(log_arg);
    let a = 4.0 * c * tau / v;
    let beta_sq = (-w - a).max(0.0);

    // delta = -M n (2 C' tau' + w V) = M n (2 C' tau' + V beta^2)
    let delta = m * n * (2.0 * c * tau + v * beta_sq);
    let p = tau * m * c * n;
    // delta^2 - 4 p^2 factored to avoid cancellation, and the smaller root
    // taken as (product of roots) / (larger root).
    let disc = (m * n * v * beta_sq) * (delta + 2.0 * p);
    let l_real = 2.0 * (m * c * n).powi(2) / (delta + disc.sqrt());

    let beta_opt = input.beta(l_real);
    let predicted_per = gaussian_tail(beta_opt);
    Ok(ClusterOptResult {
        l_real,
        l_int: round_cluster_size(input, l_real),
        delta,
        w,
        beta_opt,
        predicted_per,
        high_per_warning: predicted_per > HIGH_PER_WARNING,
    })
}

/// Better of `floor(l)` and `ceil(l)` under the AoI objective, clamped to `[1, M]`.
fn round_cluster_size(input: &ClusterOptInput, l_real: f64) -> u32 {
    let clamp = |x: f64| x.clamp(1.0, input.carriers as f64) as u32;
    let (lo, hi) = (clamp(l_real.floor()), clamp(l_real.ceil()));
    if relative_objective(input, lo as f64) <= relative_objective(input, hi as f64) {
        lo
    } else {
        hi
    }
}

/// Integer cluster size minimizing the round-robin AoI by direct scan over
/// `1..=min(I, M)`. Carrier counts are relaxed to `b = M/l`; ties go to the
/// smaller `l`.
pub fn exhaustive_cluster_search(input: &ClusterOptInput, ue_count: u32) -> Result<u32> {
    input.validate()?;
    if ue_count == 0 {
        return Err(Error::Domain("UE count must be positive".into()));
    }
    let mut best = (1u32, f64::INFINITY);
    for l in 1..=ue_count.min(input.carriers) {
        let eps = input.uniform_per(l as f64);
        let Ok(aoi) = rr_average_aoi(eps, input.blocklength, ue_count as f64 / l as f64, 1.0) else {
            continue;
        };
        if aoi < best.1 {
            best = (l, aoi);
        }
    }
    Ok(best.0)
}

/// The four candidate stationary points. The principal branch produces a
/// complex-conjugate pair (or a real pair) with negative real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateRoots {
    pub w_principal: f64,
    /// real parts of the two principal-branch roots
    pub principal_re: [f64; 2],
    /// imaginary magnitude of the principal-branch roots (0 if real)
    pub principal_im: f64,
    /// larger lower-branch root, rejected because it exceeds `M C' n / tau'`
    pub lower_plus: f64,
    /// smaller lower-branch root, the optimum
    pub lower_minus: f64,
}

pub fn candidate_roots(input: &ClusterOptInput) -> Result<CandidateRoots> {
    let opt = optimal_cluster_size(input)?;
    let (m, n) = (input.carriers as f64, input.blocklength as f64);
    let (c, tau, v) = (input.scaled_capacity(), input.scaled_payload(), input.dispersion);

    let x = -lambert_argument_log(input).exp();
    let w0 = lambert_w0(x)?;
    let delta0 = -m * n * (2.0 * c * tau + w0 * v);
    let disc0 = delta0 * delta0 - 4.0 * (tau * m * c * n).powi(2);
    let (principal_re, principal_im) = if disc0 >= 0.0 {
        let s = disc0.sqrt();
        ([(delta0 + s) / (2.0 * tau * tau), (delta0 - s) / (2.0 * tau * tau)], 0.0)
    } else {
        let re = delta0 / (2.0 * tau * tau);
        ([re, re], (-disc0).sqrt() / (2.0 * tau * tau))
    };

    let product = (m * c * n / tau).powi(2);
    Ok(CandidateRoots {
        w_principal: w0,
        principal_re,
        principal_im,
        lower_plus: product / opt.l_real,
        lower_minus: opt.l_real,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rr_aoi_plug_in_values() {
        assert_eq!(rr_average_aoi(0.0, 1, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(rr_average_aoi(0.0, 1, 2.0, 1.0).unwrap(), 1.5);
        let v = rr_average_aoi(0.1, 1, 10.0, 1.0).unwrap();
        assert!((v - (1.0 + 1.1 / 1.8 * 10.0 - 0.5)).abs() < 1e-12);
        assert!((v - 6.6111).abs() < 1e-4);
    }

    #[test]
    fn rr_aoi_errors() {
        assert_eq!(rr_average_aoi(1.0, 1, 2.0, 1.0), Err(Error::Divergent));
        assert!(rr_average_aoi(-0.1, 1, 2.0, 1.0).is_err());
        assert!(rr_average_aoi(0.1, 1, 0.5, 1.0).is_err());
        assert!(rr_average_aoi(0.1, 1, 2.0, 0.0).is_err());
    }

    #[test]
    fn infeasible_payload_is_reported() {
        let link = LinkQuality::from_snr(1.0).unwrap(); // 1 bit/symbol
        let err = ClusterOptInput::from_link(10, 1, link, 10).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePayload { .. }));
    }

    #[test]
    fn barely_feasible_payload_prefers_single_ue() {
        let link = LinkQuality::from_snr(1.0).unwrap();
        let input = ClusterOptInput::from_link(10, 10, link, 99).unwrap();
        assert_eq!(exhaustive_cluster_search(&input, 50).unwrap(), 1);
    }

    #[test]
    fn optimum_is_interior_and_below_bound() {
        let input = ClusterOptInput::from_snr_db(1000, 1, 5.0, 64).unwrap();
        let r = optimal_cluster_size(&input).unwrap();
        assert!(r.l_real > 0.0 && r.l_real < input.cluster_bound());
        assert!(r.beta_opt > 0.0 && r.predicted_per < 0.5);
        assert!(
            (r.beta_opt.powi(2) - (-r.w - 4.0 * input.scaled_capacity() * input.scaled_payload() / input.dispersion))
                .abs()
                < 1e-6 * r.beta_opt.powi(2)
        );
        assert!(!r.high_per_warning);
    }

    #[test]
    fn delta_matches_lambert_form() {
        let input = ClusterOptInput::from_snr_db(500, 2, 3.0, 100).unwrap();
        let r = optimal_cluster_size(&input).unwrap();
        let (m, n) = (500.0, 2.0);
        let direct = -m * n * (2.0 * input.scaled_capacity() * input.scaled_payload() + r.w * input.dispersion);
        assert!((r.delta - direct).abs() <= 1e-9 * direct.abs());
        // direct quadratic formula
        let tau = input.scaled_payload();
        let p = tau * m * input.scaled_capacity() * n;
        let l4 = (direct - (direct * direct - 4.0 * p * p).sqrt()) / (2.0 * tau * tau);
        assert!((r.l_real - l4).abs() <= 1e-6 * l4);
    }

    #[test]
    fn lambert_domain_violation_is_distinct() {
        // 4 C' tau' / V below 1 + ln(2 pi): tiny SNR, tiny payload, huge M.
        let link = LinkQuality::from_snr(0.05).unwrap();
        let input = ClusterOptInput::from_link(10_000, 10, link, 1).unwrap();
        assert!(matches!(optimal_cluster_size(&input), Err(Error::LambertDomain { .. })));
    }

    #[test]
    fn high_per_warning_flag() {
        let link = LinkQuality::from_snr(0.2).unwrap();
        let input = ClusterOptInput::from_link(400, 1, link, 3).unwrap();
        let r = optimal_cluster_size(&input).unwrap();
        assert_eq!(r.high_per_warning, r.predicted_per > HIGH_PER_WARNING);
    }
}
