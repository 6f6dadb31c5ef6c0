mod common;

use cminet::graph::lasso::{lasso, LassoSettings};
use cminet::graph::{
    gcoda_fit, graphical_lasso, lambda_path, mb_neighborhood, spieceasi_fit, spring_fit, CombineRule, GcodaParams,
    GlassoSettings, SpiecEasiMode, SpiecEasiParams, SpringParams,
};
use cminet::linalg;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn tight() -> GlassoSettings {
    GlassoSettings {
        tol: 1e-10,
        max_iter: 1000,
    }
}

/// Correlation matrix of `A A^T + c I` for a seeded Gaussian `A`.
fn random_correlation(p: usize, ridge: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((p, p), |_| StandardNormal.sample(&mut rng));
    let s: Array2<f64> = a.dot(&a.t()) + Array2::<f64>::eye(p) * ridge;
    linalg::cov_to_cor(s.view())
}

fn chain_data(p: usize, n: usize, seed: u64) -> Array2<f64> {
    let cov = common::covariance_from_precision(&common::chain_precision(p, -0.3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::mvn(&cov, n, &mut rng)
}

fn labels(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

#[test]
fn zero_penalty_inverts_random_correlations() {
    for seed in 0..20 {
        let s = random_correlation(5, 5.0, seed);
        let est = graphical_lasso(s.view(), 0.0, tight()).unwrap();
        let inv = linalg::inverse(s.view()).unwrap();
        let err = est
            .omega
            .iter()
            .zip(inv.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "seed {seed}: {err}");
    }
}

#[test]
fn penalty_above_max_gives_diagonal() {
    let s = random_correlation(6, 2.0, 7);
    let path = lambda_path(s.view(), 3, 0.1).unwrap();
    let lambda = path.lambda_max() * 1.01;
    let est = graphical_lasso(s.view(), lambda, tight()).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            if i == j {
                assert!((est.omega[[i, i]] - 1.0 / (s[[i, i]] + lambda)).abs() < 1e-9);
            } else {
                assert_eq!(est.omega[[i, j]], 0.0);
            }
        }
    }
}

#[test]
fn permuting_variables_permutes_precision() {
    let s = random_correlation(5, 1.0, 3);
    let perm = [3usize, 0, 4, 1, 2];
    let sp = Array2::from_shape_fn((5, 5), |(i, j)| s[[perm[i], perm[j]]]);
    let a = graphical_lasso(s.view(), 0.1, tight()).unwrap().omega;
    let b = graphical_lasso(sp.view(), 0.1, tight()).unwrap().omega;
    for i in 0..5 {
        for j in 0..5 {
            assert!((b[[i, j]] - a[[perm[i], perm[j]]]).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // stationarity: W = inv(Omega) satisfies |W_ij - S_ij| <= lambda off the
    // support and W_ij - S_ij = lambda * sign(Omega_ij) on it
    #[test]
    fn glasso_satisfies_kkt(seed in 0u64..10_000, frac in 0.05f64..0.9) {
        let p = 6;
        let s = random_correlation(p, 1.0, seed);
        let lmax = lambda_path(s.view(), 1, 0.1).unwrap().lambda_max();
        let lambda = frac * lmax;
        let est = graphical_lasso(s.view(), lambda, tight()).unwrap();
        let w = linalg::inverse(est.omega.view()).unwrap();
        for i in 0..p {
            prop_assert!((w[[i, i]] - s[[i, i]] - lambda).abs() < 1e-5);
            for j in 0..p {
                if i == j { continue; }
                let g = w[[i, j]] - s[[i, j]];
                let om = est.omega[[i, j]];
                if om == 0.0 {
                    prop_assert!(g.abs() <= lambda + 1e-5, "{g} vs {lambda}");
                } else {
                    prop_assert!((g + lambda * om.signum()).abs() < 1e-5 || (g - lambda * om.signum()).abs() < 1e-5);
                    prop_assert!((g.abs() - lambda).abs() < 1e-5);
                }
            }
        }
        prop_assert!(linalg::is_positive_definite(est.omega.view()));
    }

    #[test]
    fn lasso_satisfies_kkt(seed in 0u64..10_000, lambda in 0.01f64..0.5) {
        let (n, k) = (40, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, k), |_| StandardNormal.sample(&mut rng));
        let y: Array1<f64> = (0..n).map(|i| x[[i, 0]] - 0.5 * x[[i, 2]] + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let settings = LassoSettings { tol: 1e-12, max_sweeps: 10_000 };
        let (b, out) = lasso(x.view(), y.view(), lambda, settings);
        prop_assert!(out.converged);
        let resid = &y - &x.dot(&b);
        let grad = x.t().dot(&resid) / n as f64;
        for j in 0..k {
            if b[j] == 0.0 {
                prop_assert!(grad[j].abs() <= lambda + 1e-8);
            } else {
                prop_assert!((grad[j] - lambda * b[j].signum()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lambda_path_is_geometric(seed in 0u64..1000, nlambda in 2usize..30, ratio in 1e-4f64..0.5) {
        let s = random_correlation(5, 1.0, seed);
        let path = lambda_path(s.view(), nlambda, ratio).unwrap();
        prop_assert_eq!(path.len(), nlambda);
        let max_off = (0..5).flat_map(|i| (0..5).map(move |j| (i, j)))
            .filter(|(i, j)| i != j).map(|(i, j)| s[[i, j]].abs()).fold(0.0, f64::max);
        prop_assert!((path.values[0] - max_off).abs() < 1e-12);
        prop_assert!((path.values[nlambda - 1] / path.values[0] - ratio).abs() < 1e-9);
        let q = path.values[1] / path.values[0];
        for w in path.values.windows(2) {
            prop_assert!(w[1] < w[0]);
            prop_assert!((w[1] / w[0] - q).abs() < 1e-9);
        }
    }
}

#[test]
fn neighborhood_selection_recovers_chain() {
    let p = 10;
    let x = chain_data(p, 500, 4);
    // about 3.4 noise standard deviations of a correlation at n = 500
    let net = mb_neighborhood(x.view(), &labels(p), 0.15, CombineRule::Or).unwrap();
    let f1 = common::f1(&net, &common::chain_edges(p));
    assert!(f1 >= 0.9, "{f1}");
    let and = mb_neighborhood(x.view(), &labels(p), 0.15, CombineRule::And).unwrap();
    assert!(and.is_subgraph_of(&net));
}

#[test]
fn compositional_methods_recover_chain() {
    let (p, n) = (10, 500);
    let t = common::abundance_table(&chain_data(p, n, 1), 5.0);
    let truth = common::chain_edges(p);
    let mb = spieceasi_fit(&t, SpiecEasiMode::Mb, &SpiecEasiParams::mb(), 1).unwrap();
    let gl = spieceasi_fit(&t, SpiecEasiMode::Glasso, &SpiecEasiParams::glasso(), 1).unwrap();
    let sp = spring_fit(&t, &SpringParams::default(), 1).unwrap();
    let gc = gcoda_fit(&t, &GcodaParams::default()).unwrap();
    for (name, r, floor) in [("mb", &mb, 0.8), ("glasso", &gl, 0.7), ("spring", &sp, 0.7), ("gcoda", &gc, 0.7)] {
        let net = r.network.as_ref().unwrap();
        let f1 = common::f1(net, &truth);
        println!("{name}: F1 {f1:.3}, lambda {:?}", r.selection.lambda);
        assert!(f1 >= floor, "{name}: {f1}");
    }
    // StARS stopped where the monotone instability was still under the threshold
    let inst = &mb.selection.instability;
    let lam = mb.selection.lambda.unwrap();
    let k = mb.selection.path.iter().position(|&l| l == lam).unwrap();
    assert!(inst[..=k].iter().all(|&d| d <= 0.1), "{inst:?}");
}

#[test]
fn stars_is_seed_deterministic() {
    let t = common::abundance_table(&chain_data(8, 200, 9), 5.0);
    let params = SpiecEasiParams {
        rep_num: 8,
        ..SpiecEasiParams::mb()
    };
    let a = spieceasi_fit(&t, SpiecEasiMode::Mb, &params, 5).unwrap();
    let b = spieceasi_fit(&t, SpiecEasiMode::Mb, &params, 5).unwrap();
    assert_eq!(a.network, b.network);
    assert_eq!(a.selection, b.selection);
}
