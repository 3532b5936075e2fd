//! Reference computations used as oracles. None of them call into the
//! library's numeric kernels.
#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

/// Composite Simpson rule with `intervals` (even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

pub fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Gaussian tail by integrating the density; negative arguments use
/// `Q(x) = 1 - Q(-x)`.
pub fn q_by_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_by_quadrature(-x);
    }
    simpson(normal_pdf, x, x + 40.0, 400_000)
}

/// Error rate of `b` identical carriers at linear SNR `snr`, written out
/// from the model definition with the quadrature tail.
pub fn per_by_quadrature(snr: f64, b: f64, n: f64, tau: f64) -> f64 {
    let c = (1.0 + snr).log2();
    let v = 1.0 - 1.0 / (1.0 + snr).powi(2);
    let arg = (b * c * n - tau) * LN_2 / (b * v * n).sqrt();
    q_by_quadrature(arg)
}

/// Bisection for `w e^w = x` on `[lo, hi]`, where the map is monotone.
pub fn lambert_by_bisection(x: f64, mut lo: f64, mut hi: f64) -> f64 {
    let f = |w: f64| w * w.exp() - x;
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Round-robin AoI, `1/lambda + n (1 + e) / (2 (1 - e)) * alpha + n - 3/2`.
pub fn rr_aoi(eps: f64, n: f64, alpha: f64) -> f64 {
    1.0 + n * (1.0 + eps) / (2.0 * (1.0 - eps)) * alpha + n - 1.5
}

/// Exact time-average AoI of one UE served every `alpha` slots with
/// error rate `eps`, AoI reset to `n` on success (renewal argument).
pub fn rr_aoi_renewal(eps: f64, n: f64, alpha: f64) -> f64 {
    n * ((alpha + 1.0) / 2.0 + alpha * eps / (1.0 - eps))
}

/// Gamma density with the given shape and mean.
pub fn gamma_pdf(z: f64, shape: f64, mean: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let scale = mean / shape;
    let ln = (shape - 1.0) * z.ln() - z / scale - shape * scale.ln() - statrs::function::gamma::ln_gamma(shape);
    ln.exp()
}

/// Cheaper Gaussian tail for use inside outer loops: Laplace's continued
/// fraction (evaluated backwards) for `x >= 3`, Simpson on `[0, x]` below.
pub fn q_fast(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_fast(-x);
    }
    if x < 3.0 {
        return 0.5 - simpson(normal_pdf, 0.0, x, 2_000);
    }
    let mut d = 0.0;
    for k in (1..200).rev() {
        d = k as f64 / (x + d);
    }
    normal_pdf(x) / (x + d)
}

/// `(1 + e) / ((1 - e) l)` with `e` the uniform-allocation error rate for
/// cluster size `l`: the `l`-dependent part of the round-robin AoI.
pub fn relative_objective(l: f64, m: f64, n: f64, snr: f64, tau: f64) -> f64 {
    let c = (1.0 + snr).log2();
    let v = 1.0 - 1.0 / (1.0 + snr).powi(2);
    let b = m / l;
    let e = q_fast((b * c * n - tau) * LN_2 / (b * v * n).sqrt());
    (1.0 + e) / ((1.0 - e) * l)
}
