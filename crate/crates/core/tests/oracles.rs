mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schwarz::chebyshev::{diff_matrix, Grid1D};
use schwarz::decomposition::{Decomposition, Rect};
use schwarz::local::LocalSolveOptions;
use schwarz::newton_krylov::{inexact_newton, ForcingSchedule, NewtonOptions, OuterSystem};
use schwarz::pde::{burgers_problem, cavity_problem, poisson_problem, PdeProblem};
use schwarz::solvers::{Discretization, NksSystem, SnkSystem};

fn poisson() -> Arc<dyn PdeProblem> {
    poisson_problem(|x, y| -2.0 * PI * PI * (PI * x).sin() * (PI * y).sin())
}

fn disc(domain: Rect, mx: usize, my: usize, n: usize, p: Arc<dyn PdeProblem>) -> Arc<Discretization> {
    let dec = Decomposition::build_uniform(domain, mx, my, 0.25, n, n).unwrap();
    Discretization::new(dec, p).unwrap()
}

fn jitter(u: &[f64], scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    u.iter().map(|x| x + scale * rng.gen_range(-1.0..1.0)).collect()
}

fn dense_of(sys: &dyn OuterSystem, u: &[f64]) -> DMatrix<f64> {
    let m = sys.dim();
    let mut out = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    for c in 0..m {
        e[c] = 1.0;
        let col = sys.jacobian_apply(u, &e).unwrap();
        out.column_mut(c).copy_from_slice(&col);
        e[c] = 0.0;
    }
    out
}

#[test]
fn differentiation_matrix_matches_closed_form() {
    for (n, a, b) in [(5, -1.0, 1.0), (9, 0.0, 1.0), (17, -0.625, 0.125)] {
        let g = Grid1D::new(n, a, b).unwrap();
        let nodes = cheb_nodes(n, a, b);
        assert!(max_abs_diff(g.points(), &nodes) <= 1e-15 * (b - a).abs().max(1.0));
        let lib = diff_matrix(&g);
        let oracle = cheb_diff(n, a, b);
        let scale = oracle.amax();
        for i in 0..n {
            for j in 0..n {
                assert!((lib[(i, j)] - oracle[(i, j)]).abs() <= 1e-12 * scale, "n={n} ({i},{j})");
            }
        }
    }
}

#[test]
fn transfer_matches_product_form_interpolation() {
    for n in [9, 11] {
        let d = disc(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 2, 2, n, burgers_problem(0.01).unwrap());
        let oracle = DenseSystem::new(d.decomposition(), Model::Burgers { nu: 0.01 });
        let lib = d.transfer().to_dense();
        let m = oracle.dim();
        assert_eq!(lib.nrows(), m);
        for r in 0..m {
            for c in 0..m {
                assert!((lib[(r, c)] - oracle.transfer[(r, c)]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn nks_residual_matches_dense_assembly() {
    let cases: Vec<(Rect, Arc<dyn PdeProblem>, Model, usize)> = vec![
        (Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), burgers_problem(1.0 / 400.0).unwrap(), Model::Burgers { nu: 1.0 / 400.0 }, 9),
        (Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), burgers_problem(0.05).unwrap(), Model::Burgers { nu: 0.05 }, 13),
        (Rect::unit_square(), cavity_problem(100.0).unwrap(), Model::Cavity { re: 100.0 }, 9),
        (Rect::unit_square(), cavity_problem(1000.0).unwrap(), Model::Cavity { re: 1000.0 }, 11),
        (Rect::unit_square(), poisson(), Model::Poisson, 11),
    ];
    for (seed, (domain, p, model, n)) in cases.into_iter().enumerate() {
        let d = disc(domain, 2, 2, n, p);
        let oracle = DenseSystem::new(d.decomposition(), model);
        let u = jitter(&d.initial_guess(), 0.1, seed as u64);
        let mut sys = NksSystem::new(d.clone());
        let lib = sys.residual(&u).unwrap();
        let reference = oracle.nks_residual(&u);
        let scale = reference.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        assert!(max_abs_diff(&lib, &reference) <= 1e-12 * scale, "{model:?} n={n}");
    }
}

#[test]
fn snk_residual_matches_dense_poisson() {
    let d = disc(Rect::unit_square(), 2, 2, 11, poisson());
    let oracle = DenseSystem::new(d.decomposition(), Model::Poisson);
    let m = oracle.dim();
    let zero = vec![0.0; m];
    let a = oracle.block_jacobian(&zero);
    let r0 = DVector::from_vec(oracle.local_residuals(&zero));
    let u = jitter(&vec![0.0; m], 1.0, 7);
    // f(w) = A w + r0, so f⁻¹(t) = A⁻¹ (t − r0).
    let tu = DVector::from_vec(oracle.apply_transfer(&u));
    let w = a.lu().solve(&(tu - r0)).unwrap();
    let reference: Vec<f64> = u.iter().zip(w.iter()).map(|(x, y)| x - y).collect();

    let mut sys = SnkSystem::new(d, LocalSolveOptions::default());
    let lib = sys.residual(&u).unwrap();
    assert!(max_abs_diff(&lib, &reference) <= 1e-10 * reference.iter().fold(1.0_f64, |s, x| s.max(x.abs())));
}

/// For a linear problem the SNK Jacobian is `I − A⁻¹ T`; its spectrum is
/// that of an overlapping Schwarz iteration, clustered around 1.
#[test]
fn snk_jacobian_equals_dense_operator_and_clusters() {
    let d = disc(Rect::unit_square(), 2, 1, 9, poisson());
    let oracle = DenseSystem::new(d.decomposition(), Model::Poisson);
    let m = oracle.dim();
    let a = oracle.block_jacobian(&vec![0.0; m]);
    let reference = DMatrix::identity(m, m) - a.lu().solve(&oracle.transfer).unwrap();

    let mut sys = SnkSystem::new(d, LocalSolveOptions::default());
    let u = jitter(&vec![0.0; m], 0.5, 3);
    sys.linearize(&u).unwrap();
    let lib = dense_of(&sys, &u);
    assert!((&lib - &reference).amax() <= 1e-10);

    let svd = reference.clone().svd(false, false);
    assert!(svd.singular_values.min() > 1e-8, "g' must be nonsingular");
    let schur = reference.clone().try_schur(1e-13, 100_000).expect("Schur iteration did not converge");
    for lam in schur.complex_eigenvalues().iter() {
        assert!((lam - nalgebra::Complex::new(1.0, 0.0)).norm() < 1.0 - 1e-6, "eigenvalue {lam}");
    }
}

#[test]
fn snk_jacobian_matches_dense_nonlinear_formula() {
    let nu = 0.05;
    let d = disc(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 2, 2, 9, burgers_problem(nu).unwrap());
    let oracle = DenseSystem::new(d.decomposition(), Model::Burgers { nu });
    let u = jitter(&d.initial_guess(), 0.05, 11);
    let mut sys = SnkSystem::new(d, LocalSolveOptions::default());
    let g = sys.residual(&u).unwrap();
    sys.linearize(&u).unwrap();
    let lib = dense_of(&sys, &u);
    // g'(u) = I − f'(u − g)⁻¹ T.
    let w: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - b).collect();
    let m = oracle.dim();
    let jw = oracle.block_jacobian(&w);
    let reference = DMatrix::identity(m, m) - jw.lu().solve(&oracle.transfer).unwrap();
    assert!((&lib - &reference).amax() <= 1e-9 * reference.amax());
}

#[test]
fn single_box_burgers_matches_dense_newton() {
    let nu = 1.0 / 400.0;
    let n = 9;
    let d = disc(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 1, 1, n, burgers_problem(nu).unwrap());
    let ops = BoxOps::new(n, n, (-1.0, 1.0), (-1.0, 1.0));
    let u0: Vec<f64> = (0..ops.len()).map(|k| {
        let (x, y) = ops.point(k);
        burgers_data(x, y)
    }).collect();
    let reference = newton_single_box(Model::Burgers { nu }, &ops, &u0, 1e-13);

    let mut sys = NksSystem::new(d.clone());
    let opts = NewtonOptions {
        rtol: 1e-13,
        ..NewtonOptions::default()
    };
    let (u, report) = inexact_newton(&mut sys, &d.initial_guess(), &opts).unwrap();
    assert!(report.converged());
    assert!(max_abs_diff(&u, &reference) <= 1e-9, "{}", max_abs_diff(&u, &reference));
}

#[test]
fn forcing_terms_follow_residual_ratios() {
    let d = disc(Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 2, 2, 11, burgers_problem(0.02).unwrap());
    let mut sys = NksSystem::new(d.clone());
    let (_, report) = inexact_newton(&mut sys, &d.initial_guess(), &NewtonOptions::default()).unwrap();
    assert!(report.converged());
    let recs = &report.records;
    let schedule = ForcingSchedule::default();
    // The tolerance stored with iterate k was chosen at iterate k − 1.
    assert_eq!(recs[0].eta, None);
    assert_eq!(recs[1].eta, Some(1e-4));
    for k in 2..recs.len() {
        let ratio = recs[k - 1].residual_norm / recs[k - 2].residual_norm;
        let expected = (1e-4 * ratio * ratio).clamp(1e-12, 1e-4);
        let eta = recs[k].eta.unwrap();
        assert!((eta - expected).abs() <= 1e-14 * expected, "step {k}");
        assert_eq!(eta, schedule.eta(recs[k - 1].residual_norm, Some(recs[k - 2].residual_norm)));
    }
}
