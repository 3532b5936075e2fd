mod common;

use aoi_core::cluster_opt::{
    candidate_roots, exhaustive_cluster_search, optimal_cluster_size, rr_average_aoi, ClusterOptInput,
};
use aoi_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn input(m: u32, n: u32, snr_db: f64, tau: u32) -> Option<ClusterOptInput> {
    ClusterOptInput::from_snr_db(m, n, snr_db, tau).ok()
}

/// Integer argmin of the round-robin AoI computed from the oracle formula.
fn oracle_search(m: u32, n: u32, snr_db: f64, tau: u32, ues: u32) -> u32 {
    let snr = 10f64.powf(snr_db / 10.0);
    let mut best = (1, f64::INFINITY);
    for l in 1..=ues.min(m) {
        let v = relative_objective(l as f64, m as f64, n as f64, snr, tau as f64);
        if v < best.1 {
            best = (l, v);
        }
    }
    best.0
}

#[test]
fn analytic_size_tracks_search_on_a_coarse_grid() {
    let mut checked = 0;
    for m in [100, 400, 1000, 2000] {
        for tau in [32, 128, 512] {
            for g in [0.0, 5.0, 10.0] {
                for n in [1, 4, 10] {
                    let Some(inp) = input(m, n, g, tau) else { continue };
                    let Ok(r) = optimal_cluster_size(&inp) else { continue };
                    let search = exhaustive_cluster_search(&inp, 1000).unwrap();
                    let oracle = oracle_search(m, n, g, tau, 1000);
                    assert!(search.abs_diff(oracle) <= 1, "search {search} oracle {oracle}");
                    if oracle < 1000 {
                        assert!(r.l_int.abs_diff(search) <= 1, "M {m} tau {tau} g {g} n {n}: {} vs {search}", r.l_int);
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn search_returns_global_minimum() {
    let inp = input(600, 2, 3.0, 100).unwrap();
    let l = exhaustive_cluster_search(&inp, 600).unwrap();
    let aoi = |l: u32| rr_average_aoi(inp.uniform_per(l as f64), 2, 600.0 / l as f64, 1.0).unwrap_or(f64::INFINITY);
    for other in 1..=600 {
        assert!(aoi(l) <= aoi(other));
    }
}

#[test]
fn scaling_carriers_scales_the_relaxed_optimum() {
    let base = optimal_cluster_size(&input(500, 2, 5.0, 64).unwrap()).unwrap().l_real;
    for k in [2u32, 3, 4] {
        let scaled = optimal_cluster_size(&input(500 * k, 2, 5.0, 64).unwrap()).unwrap().l_real;
        assert!((scaled - k as f64 * base).abs() <= 1e-9 * scaled, "k {k}: {scaled} vs {}", k as f64 * base);
    }
}

#[test]
fn optimum_does_not_depend_on_ue_count() {
    let inp = input(1000, 1, 5.0, 64).unwrap();
    let a = exhaustive_cluster_search(&inp, 500).unwrap();
    let b = exhaustive_cluster_search(&inp, 5000).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stationary_point_of_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    while checked < 30 {
        let m = rng.random_range(100..2000u32);
        let n = rng.random_range(1..10u32);
        let g: f64 = rng.random_range(0.0..10.0);
        let tau = rng.random_range(32..512u32);
        let Some(inp) = input(m, n, g, tau) else { continue };
        let Ok(r) = optimal_cluster_size(&inp) else { continue };
        if r.high_per_warning || r.l_real < 2.0 {
            continue;
        }
        let snr = 10f64.powf(g / 10.0);
        let f = |l: f64| relative_objective(l, m as f64, n as f64, snr, tau as f64);
        let (l, h) = (r.l_real, 1e-4 * r.l_real);
        let slope = (f(l + h) - f(l - h)) / (2.0 * h) * l / f(l);
        let curvature = f(l + h) - 2.0 * f(l) + f(l - h);
        // The closed form drops eps^2, so the relative slope is O(eps^2).
        let eps = r.predicted_per;
        assert!(slope.abs() <= 2.0 * eps * eps + 1e-6, "M {m} n {n} g {g} tau {tau}: slope {slope} eps {eps}");
        assert!(curvature > 0.0);
        checked += 1;
    }
}

#[test]
fn rejected_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 25 {
        let inp = match input(
            rng.random_range(100..2000),
            rng.random_range(1..10),
            rng.random_range(0.0..10.0),
            rng.random_range(32..512),
        ) {
            Some(i) => i,
            None => continue,
        };
        let Ok(roots) = candidate_roots(&inp) else { continue };
        let bound = inp.cluster_bound();
        // principal branch: negative real part
        assert!(roots.principal_re.iter().all(|&re| re < 0.0), "{roots:?}");
        // the larger lower-branch root lies past the zero of beta, where beta < 0
        assert!(roots.lower_plus > bound);
        assert!(inp.beta(roots.lower_plus) < 0.0);
        assert!(
            (inp.beta(roots.lower_plus) + inp.beta(roots.lower_minus)).abs()
                <= 1e-9 * inp.beta(roots.lower_minus).abs()
        );
        // the kept root
        assert!(roots.lower_minus > 0.0 && roots.lower_minus < bound);
        assert!(inp.beta(roots.lower_minus) > 0.0);
        checked += 1;
    }
}

#[test]
fn distinct_errors() {
    assert!(matches!(ClusterOptInput::from_snr_db(10, 1, 0.0, 100), Err(Error::InfeasiblePayload { .. })));
    let link = aoi_core::LinkQuality::from_snr(0.05).unwrap();
    let inp = ClusterOptInput::from_link(10_000, 10, link, 1).unwrap();
    assert!(matches!(optimal_cluster_size(&inp), Err(Error::LambertDomain { .. })));
}

#[test]
fn large_arguments_stay_finite() {
    // 4 C' tau' / V in the thousands: the Lambert argument underflows.
    let r = optimal_cluster_size(&input(2000, 10, 10.0, 512).unwrap()).unwrap();
    assert!(r.l_real.is_finite() && r.w < -1000.0);
}
