//! Brute-force oracles for the classical engine.
//!
//! Each oracle reimplements the target quantity from scratch and checks the
//! engine against it: the REML estimate against a dense grid maximizer of
//! the restricted log-likelihood, and the Q-profile bounds against a plain
//! bisection using externally computed chi-squared quantiles.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use sdma_core::classical::{q_profile_ci, reml_tau};
use sdma_core::estimates::{record, EstimateSet};

fn set_of(pairs: &[(f64, f64)]) -> EstimateSet {
    EstimateSet::new(
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(y, se))| record(format!("r{i}"), format!("t{i}"), y, se))
            .collect(),
    )
    .unwrap()
}

/// Restricted log-likelihood of y_k ~ Normal(mu, se_k^2 + tau2), written
/// independently of the library (log-determinant via a running product).
fn oracle_restricted_loglik(ys: &[f64], ses: &[f64], tau2: f64) -> f64 {
    let mut precision_sum = 0.0;
    let mut weighted_y = 0.0;
    let mut det = 1.0;
    for (&y, &se) in ys.iter().zip(ses) {
        let v = se * se + tau2;
        precision_sum += 1.0 / v;
        weighted_y += y / v;
        det *= v;
    }
    let mu = weighted_y / precision_sum;
    let mut quad = 0.0;
    for (&y, &se) in ys.iter().zip(ses) {
        let v = se * se + tau2;
        quad += (y - mu) * (y - mu) / v;
    }
    -0.5 * (det.ln() + precision_sum.ln() + quad)
}

/// Argmax of the restricted log-likelihood on a grid of `points` values of
/// tau2 covering [0, hi].
fn grid_maximizer(ys: &[f64], ses: &[f64], hi: f64, points: usize) -> f64 {
    let step = hi / (points - 1) as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..points {
        let tau2 = i as f64 * step;
        let ll = oracle_restricted_loglik(ys, ses, tau2);
        if ll > best.1 {
            best = (tau2, ll);
        }
    }
    best.0
}

const GRID_POINTS: usize = 1_000_000;

#[test]
fn reml_matches_grid_on_symmetric_example() {
    let ys = [-0.2, 0.0, 0.2];
    let ses = [0.1, 0.1, 0.1];
    let grid = grid_maximizer(&ys, &ses, 1.0, GRID_POINTS);
    let set = set_of(&[(-0.2, 0.1), (0.0, 0.1), (0.2, 0.1)]);
    let reml = reml_tau(&set).unwrap();
    assert!(
        (reml.tau2_hat - grid).abs() < 1e-6,
        "reml {} vs grid {}",
        reml.tau2_hat,
        grid
    );
    // With equal sampling variances the REML optimum has a closed form:
    // sample variance of y minus se^2.
    assert!((reml.tau2_hat - 0.03).abs() < 1e-9);
}

#[test]
fn reml_matches_grid_on_randomized_sets() {
    let n_sets = 200;
    let results: Vec<(f64, f64)> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chunk in 0..2 {
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                for i in (chunk * n_sets / 2)..((chunk + 1) * n_sets / 2) {
                    let mut rng = ChaCha12Rng::seed_from_u64(31_000 + i as u64);
                    let k = rng.random_range(2..=10usize);
                    let pairs: Vec<(f64, f64)> = (0..k)
                        .map(|_| {
                            (
                                rng.random_range(-0.15..0.15),
                                rng.random_range(0.05..0.3),
                            )
                        })
                        .collect();
                    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                    let ses: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                    let grid = grid_maximizer(&ys, &ses, 1.0, GRID_POINTS);
                    let reml = reml_tau(&set_of(&pairs)).unwrap();
                    out.push((reml.tau2_hat, grid));
                }
                out
            }));
        }
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    for (i, &(engine, grid)) in results.iter().enumerate() {
        assert!(
            (engine - grid).abs() < 1e-6,
            "set {i}: reml {engine} vs grid {grid}"
        );
    }
}

/// chi-squared quantiles at 0.025 / 0.975, df 1..=9, computed externally
/// (scipy.stats.chi2.ppf); keeps the Q-profile oracle independent of the
/// library's quantile code.
#[allow(clippy::excessive_precision)]
const CHI2_LO: [f64; 9] = [
    0.0009820691171752555,
    0.05063561596857975,
    0.2157952826137081,
    0.48441855708793044,
    0.8312116134617382,
    1.2373442458094444,
    1.6898691806677078,
    2.1797307472948035,
    2.7003894999803584,
];
const CHI2_HI: [f64; 9] = [
    5.023886187314888,
    7.377758908227871,
    9.348403604496145,
    11.143286781876334,
    12.832501994030027,
    14.449375456745134,
    16.012764274629934,
    17.534546139484647,
    19.02276779864163,
];

fn oracle_q_gen(ys: &[f64], ses: &[f64], tau: f64) -> f64 {
    let mut precision_sum = 0.0;
    let mut weighted_y = 0.0;
    for (&y, &se) in ys.iter().zip(ses) {
        let v = se * se + tau * tau;
        precision_sum += 1.0 / v;
        weighted_y += y / v;
    }
    let mu = weighted_y / precision_sum;
    ys.iter()
        .zip(ses)
        .map(|(&y, &se)| (y - mu) * (y - mu) / (se * se + tau * tau))
        .sum()
}

fn oracle_q_profile(ys: &[f64], ses: &[f64]) -> (f64, f64) {
    let df = ys.len() - 1;
    let (lo_q, hi_q) = (CHI2_LO[df - 1], CHI2_HI[df - 1]);
    let q0 = oracle_q_gen(ys, ses, 0.0);
    let root = |target: f64| {
        let mut hi = 1.0;
        while oracle_q_gen(ys, ses, hi) > target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if oracle_q_gen(ys, ses, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if q0 <= hi_q { 0.0 } else { root(hi_q) };
    let upper = if q0 <= lo_q { 0.0 } else { root(lo_q) };
    (lower, upper)
}

#[test]
fn q_profile_matches_oracle_on_symmetric_example() {
    let ys = [-0.2, 0.0, 0.2];
    let ses = [0.1, 0.1, 0.1];
    let (oracle_lo, oracle_hi) = oracle_q_profile(&ys, &ses);
    let set = set_of(&[(-0.2, 0.1), (0.0, 0.1), (0.2, 0.1)]);
    let (lo, hi) = q_profile_ci(&set, 0.95).unwrap();
    assert!((lo - oracle_lo).abs() < 1e-6, "{lo} vs {oracle_lo}");
    assert!((hi - oracle_hi).abs() < 1e-6, "{hi} vs {oracle_hi}");
}

#[test]
fn q_profile_matches_oracle_on_randomized_sets() {
    let mut rng = ChaCha12Rng::seed_from_u64(47_000);
    for case in 0..150 {
        let k = rng.random_range(2..=10usize);
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(-0.4..0.4), rng.random_range(0.05..0.3)))
            .collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ses: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (oracle_lo, oracle_hi) = oracle_q_profile(&ys, &ses);
        let (lo, hi) = q_profile_ci(&set_of(&pairs), 0.95).unwrap();
        assert!(
            (lo - oracle_lo).abs() < 1e-6 && (hi - oracle_hi).abs() < 1e-6,
            "case {case}: ({lo}, {hi}) vs oracle ({oracle_lo}, {oracle_hi})"
        );
    }
}

#[test]
fn q_profile_brackets_reml_point_estimate() {
    let mut rng = ChaCha12Rng::seed_from_u64(53_000);
    for _ in 0..100 {
        let k = rng.random_range(3..=12usize);
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.random_range(-0.4..0.4), rng.random_range(0.05..0.3)))
            .collect();
        let set = set_of(&pairs);
        let tau_hat = reml_tau(&set).unwrap().tau2_hat.sqrt();
        let (lo, hi) = q_profile_ci(&set, 0.95).unwrap();
        // The Q-profile interval brackets the REML point estimate up to the
        // zero-truncation convention (a point interval forces tau_hat ~ 0).
        if hi == 0.0 {
            assert!(tau_hat < 1e-4, "point interval but tau_hat = {tau_hat}");
        } else {
            assert!(lo <= tau_hat + 1e-6 && tau_hat <= hi + 1e-6);
        }
    }
}
