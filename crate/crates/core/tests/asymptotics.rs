mod common;

use fnls_core::asymptotics::{
    alpha_of, epsilon_of, fit_exponential_decay, fit_power_law, rescale_problem, rescale_state, sweep_alpha,
    FreeReference, SweepSettings, DEFAULT_DECAY_WINDOW,
};
use fnls_core::constraints::random_localized_set;
use fnls_core::lattice::{Grid3D, ScalarField, Stencil};
use fnls_core::model::{coulomb_potential, density_of, Density, ModelParams};
use fnls_core::solvers::{multistart, SolveOptions};
use fnls_core::FnlsError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn epsilon_formula_is_exact(alpha in 1e-2f64..1e3, p in 1.01f64..1.66) {
        let eps = epsilon_of(alpha, p).unwrap();
        let check = eps.powf(2.0 - 3.0 * (p - 1.0)) * alpha.powf(2.0 * (p - 1.0));
        prop_assert!((check - 1.0).abs() < 1e-14);
        let back = alpha_of(eps, p).unwrap();
        prop_assert!((back / alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_recovers_noisy_exponent(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..8).map(|i| 0.5 * 1.6f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.sqrt() * (1.0 + rng.gen_range(-0.01..0.01))).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        prop_assert!((fit.exponent - 0.5).abs() < 0.05);
    }
}

#[test]
fn power_law_exact_and_rejections() {
    let xs = [1.0, 2.0, 3.0, 5.0];
    let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
    assert!((fit_power_law(&xs, &ys).unwrap().exponent - 2.0).abs() < 1e-10);
    assert!(matches!(fit_power_law(&xs, &[1.0, 0.0, 2.0, 3.0]), Err(FnlsError::Domain(_))));
    assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
}

fn radial_density(grid: Grid3D, f: impl Fn(f64) -> f64 + Sync) -> Density {
    Density::from_field(ScalarField::from_fn(grid, |x| f((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))).unwrap()
}

#[test]
fn synthetic_exponential_decay() {
    let g = Grid3D::new(10.0, 65).unwrap();
    let d = radial_density(g, |r| 2.0 * (-1.3 * r).exp());
    let fit = fit_exponential_decay(&d, (3.5, 7.0)).unwrap();
    assert!((fit.rate - 1.3).abs() < 1e-3, "{fit:?}");
    let tight = fit_exponential_decay(&d, (3.5, 3.6));
    assert!(matches!(tight, Err(FnlsError::InsufficientSamples(_))));
}

#[test]
fn hydrogen_density_decay() {
    let g = Grid3D::new(20.0, 81).unwrap();
    let u = common::hydrogen(g, [0.0; 3]);
    let d = Density::from_field(u.mul(&u)).unwrap();
    let fit = fit_exponential_decay(&d, (DEFAULT_DECAY_WINDOW.0 * 20.0, DEFAULT_DECAY_WINDOW.1 * 20.0)).unwrap();
    assert!((fit.rate - 1.0).abs() < 0.02, "{fit:?}");
}

#[test]
fn profile_transport() {
    let g = Grid3D::new(8.0, 48).unwrap();
    let state = random_localized_set(2, g, 5, [0.5, -0.3, 0.2], 1.5).unwrap();
    // ε = 1, z = 0 moves nothing.
    let same = rescale_state(&state, 1.0, [0.0; 3], &g).unwrap();
    for (a, b) in same.state.orbitals().iter().zip(state.orbitals()) {
        assert!(a.sub(b).max_abs() < 1e-10);
    }
    // Physical state of width ~ε about z, then back to blown-up coordinates.
    let eps = 0.2;
    let z = [0.4, 0.0, -0.2];
    let phys_grid = Grid3D::new(2.0, 64).unwrap();
    let blown = common::gaussian(g, [0.0; 3], 1.5);
    let blown_state = fnls_core::model::OrbitalSet::with_tolerance(vec![blown.clone()], vec![1.0], 1e-3).unwrap();
    let physical = rescale_state(&blown_state, 1.0 / eps, [-z[0] / eps, -z[1] / eps, -z[2] / eps], &phys_grid).unwrap();
    let back = rescale_state(&physical.state, eps, z, &g).unwrap();
    assert!(back.norms.iter().all(|n| (n - 1.0).abs() < 0.02), "{:?}", back.norms);
    let err = back.state.orbitals()[0].sub(&blown).max_abs() / blown.max_abs();
    assert!(err < 0.02, "{err}");
}

#[test]
fn blown_up_potential_near_origin() {
    let g = Grid3D::new(10.0, 41).unwrap();
    let params = ModelParams::new(1.5, 4.0, 1.0, vec![[0.3, 0.0, 0.0]], Grid3D::new(2.0, 17).unwrap()).unwrap();
    let problem = rescale_problem(&params, 0, g).unwrap();
    let eps = problem.epsilon;
    assert!((eps - 1.0 / 16.0).abs() < 1e-15);
    let v = coulomb_potential(&problem.params).unwrap();
    let h = g.spacing();
    let (i, j, k) = g.center_node();
    for (di, r) in [(0usize, 0.0), (1, h), (5, 5.0 * h)] {
        let expected = -eps / (r * r + h * h).sqrt();
        assert!((v.at(i + di, j, k) - expected).abs() < 1e-14);
    }
}

#[test]
fn short_sweeps_are_rejected() {
    let g = Grid3D::new(6.0, 17).unwrap();
    let params = ModelParams::new(4.0 / 3.0, 1.0, 1.0, vec![[0.0; 3]], g).unwrap();
    let reference = FreeReference {
        energy: -1.0,
        eigenvalues: vec![-1.0],
        density: Density::zero(g),
        converged: true,
    };
    let settings = SweepSettings {
        grid: g,
        center_index: 0,
        solve: SolveOptions::default(),
        decay_window: DEFAULT_DECAY_WINDOW,
    };
    let err = sweep_alpha(&params, &[1.0, 2.0], &settings, &reference).unwrap_err();
    assert!(err.to_string().contains("at least 3"));
    assert!(sweep_alpha(&params, &[2.0, 1.0, 3.0], &settings, &reference).is_err());
}

#[test]
fn small_sweep_records() {
    let p = 4.0 / 3.0;
    let g = Grid3D::new(15.0, 25).unwrap();
    let opts = SolveOptions {
        tol: 1e-5,
        max_iters: 500,
        multistart: 1,
        ..SolveOptions::default()
    };
    let reference = FreeReference::solve(p, 1.0, g, Stencil::Second, &opts).unwrap();
    assert!(reference.converged && reference.energy < 0.0);
    let template = ModelParams::new(p, 1.0, 1.0, vec![[0.0; 3], [4.0, 0.0, 0.0]], Grid3D::new(6.0, 17).unwrap()).unwrap();
    let alphas = [2.0, 4.0, 8.0];
    let settings = SweepSettings {
        grid: g,
        center_index: 0,
        solve: opts,
        decay_window: DEFAULT_DECAY_WINDOW,
    };
    let records = sweep_alpha(&template, &alphas, &settings, &reference).unwrap();
    for (r, &a) in records.iter().zip(&alphas) {
        assert!(r.is_ok(), "{:?}", r.error);
        assert_eq!(r.epsilon, epsilon_of(a, p).unwrap());
        assert!(r.kinetic_scaled > 0.0 && r.nonlinear_scaled < 0.0);
        assert!(r.gap > 0.0, "{r:?}");
    }
}

#[test]
fn two_center_concentration_picks_a_center() {
    // p = 4/3, α = 8: ε = 1/4.
    let p = 4.0 / 3.0;
    let alpha = 8.0;
    let eps = epsilon_of(alpha, p).unwrap();
    let centers = vec![[-3.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
    let g = Grid3D::new(6.0, 49).unwrap();
    let params = ModelParams::new(p, alpha, 1.0, centers.clone(), g).unwrap();
    let opts = SolveOptions {
        tol: 1e-5,
        max_iters: 1000,
        multistart: 1,
        ..SolveOptions::default()
    };
    for seed in 0..2 {
        let init = fnls_core::solvers::initial_state(&params, seed, [0.0; 3]).unwrap();
        let rep = fnls_core::solvers::minimize_direct_with(&params, &init, &SolveOptions { seed, ..opts }).unwrap();
        let z = density_of(&rep.state).argmax_position();
        let nearest = centers.iter().map(|c| common::dist(z, *c)).fold(f64::INFINITY, f64::min);
        assert!(nearest <= 2.0 * eps, "seed {seed}: z = {z:?}");
    }
    let (best, _) = multistart(&params, &opts).unwrap();
    assert!(best.energy.total < 0.0);
}
