//! Real branches of the Lambert W function.
//!
//! `W_{-1}` is the branch the optimal cluster size lives on; `W_0` is only
//! needed to mechanize the rejection of the principal-branch roots.

use std::f64::consts::E;

use crate::error::{Error, Result};

const BRANCH_POINT: f64 = -1.0 / E;
/// Halley iteration budget before falling back to bisection.
pub const MAX_HALLEY_ITERATIONS: usize = 60;
const RESIDUAL_TOL: f64 = 1e-12;

fn tolerance(x: f64) -> f64 {
    RESIDUAL_TOL * x.abs().max(1e-300)
}

fn residual(w: f64, x: f64) -> f64 {
    w * w.exp() - x
}

/// Series about the branch point; `p = -sqrt(2(ex+1))` selects `W_{-1}`,
/// `p = +sqrt(..)` selects `W_0`.
fn branch_point_guess(p: f64) -> f64 {
    -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
}

fn halley(mut w: f64, x: f64) -> Option<f64> {
    let tol = tolerance(x);
    for _ in 0..MAX_HALLEY_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f.abs() <= tol {
            return Some(w);
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return None;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        let next = w - f / denom;
        if !next.is_finite() {
            return None;
        }
        if next == w {
            break;
        }
        w = next;
    }
    (residual(w, x).abs() <= tol).then_some(w)
}

/// Bisection on a bracket where `w e^w - x` changes sign. Returns the
/// midpoint with the smallest residual seen.
fn bisect(mut lo: f64, mut hi: f64, x: f64) -> f64 {
    let f_lo = residual(lo, x);
    let mut best = if f_lo.abs() < residual(hi, x).abs() { lo } else { hi };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = residual(mid, x);
        if f_mid.abs() < residual(best, x).abs() {
            best = mid;
        }
        if f_mid == 0.0 {
            break;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Lower real branch `W_{-1}(x)` for `-1/e <= x < 0`; the result is `<= -1`.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(x.is_finite() && (BRANCH_POINT..0.0).contains(&x)) {
        return Err(Error::Domain(format!("W_-1 is real only on [-1/e, 0), got {x}")));
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    if x > -1e-290 {
        // e^w would be subnormal; solve in log form instead.
        return Ok(lambert_w_minus1_log((-x).ln()));
    }
    let guess = if x < -0.25 {
        branch_point_guess(-(2.0 * (E * x + 1.0)).max(0.0).sqrt())
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    if let Some(w) = halley(guess.min(-1.0), x) {
        return Ok(w);
    }
    // On (-inf, -1] the map w -> w e^w decreases from 0 to -1/e.
    let mut lo = -2.0;
    while residual(lo, x) < 0.0 && lo > -800.0 {
        lo *= 2.0;
    }
    Ok(bisect(lo, -1.0, x))
}

/// `W_{-1}(x)` given only `ln(-x)`, for arguments whose magnitude underflows
/// `f64`. Solves `w + ln(-w) = ln(-x)` with `w <= -1`.
pub fn lambert_w_minus1_log(log_neg_x: f64) -> f64 {
    debug_assert!(log_neg_x <= -1.0);
    if log_neg_x > -600.0 {
        if let Ok(w) = lambert_w_minus1(-log_neg_x.exp()) {
            return w;
        }
    }
    let mut w = log_neg_x - (-log_neg_x).ln();
    for _ in 0..MAX_HALLEY_ITERATIONS {
        let g = w + (-w).ln() - log_neg_x;
        let step = g / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 1e-15 * w.abs() {
            break;
        }
    }
    w
}

/// Principal branch `W_0(x)` for `x >= -1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !(x.is_finite() && x >= BRANCH_POINT) {
        return Err(Error::Domain(format!("W_0 is real only on [-1/e, inf), got {x}")));
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let guess = if x < -0.25 {
        branch_point_guess((2.0 * (E * x + 1.0)).max(0.0).sqrt())
    } else if x < 3.0 {
        x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
    } else {
        let l1 = x.ln();
        l1 - l1.ln()
    };
    if let Some(w) = halley(guess.max(-1.0), x) {
        return Ok(w);
    }
    // w e^w increases on [-1, inf).
    let mut hi = 1.0;
    while residual(hi, x) < 0.0 {
        hi *= 2.0;
    }
    Ok(bisect(-1.0, hi, x))
}
