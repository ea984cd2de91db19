mod common;

use fnls_core::constraints::{random_localized_set, random_orthonormal_set};
use fnls_core::energy::{energy_gradient, evaluate_energy, EnergyModel};
use fnls_core::lattice::{rescale_field, Grid3D, ScalarField, Stencil};
use fnls_core::model::{density_of, ModelParams, OrbitalSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sorted_occupations(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut occ: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..=1.0)).collect();
    occ.sort_by(|a, b| b.total_cmp(a));
    occ
}

/// Central difference of the energy along `delta`, against `⟨g, δ⟩`.
fn directional_check(state: &OrbitalSet, params: &ModelParams, delta: &[ScalarField], t: f64) -> (f64, f64) {
    let shifted = |sign: f64| {
        let orbitals = state
            .orbitals()
            .iter()
            .zip(delta)
            .map(|(u, d)| ScalarField::linear_combination(1.0, u, sign * t, d))
            .collect();
        // Perturbed orbitals are no longer orthonormal; the functional does
        // not need them to be.
        OrbitalSet::with_tolerance(orbitals, state.occupations().to_vec(), f64::INFINITY).unwrap()
    };
    let plus = evaluate_energy(&shifted(1.0), params).unwrap().total;
    let minus = evaluate_energy(&shifted(-1.0), params).unwrap().total;
    let fd = (plus - minus) / (2.0 * t);
    let g = energy_gradient(state, params).unwrap();
    let analytic: f64 = g.iter().zip(delta).map(|(a, b)| a.inner(b)).sum();
    (fd, analytic)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..10_000, m in 1usize..4, p in 1.1f64..1.6) {
        let g = Grid3D::new(5.0, 20).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let occ = sorted_occupations(m, &mut rng);
        let lambda: f64 = occ.iter().sum();
        let frame = random_localized_set(m, g, seed, [0.0; 3], 1.5).unwrap();
        let state = OrbitalSet::new(frame.orbitals().to_vec(), occ).unwrap();
        let params = ModelParams::new(p, 1.7, lambda, vec![[0.25, 0.0, 0.0]], g).unwrap();
        let delta = random_localized_set(m, g, seed + 1, [0.5, 0.0, 0.0], 1.5).unwrap();
        let (fd, an) = directional_check(&state, &params, delta.orbitals(), 1e-4);
        prop_assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-8), "fd {} analytic {}", fd, an);
    }

    #[test]
    fn concavity_displacement_inequality(seed in 0u64..10_000, m in 1usize..5, p in 1.05f64..1.65) {
        let g = Grid3D::new(5.0, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_orthonormal_set(m, g, seed).unwrap();
        let a = OrbitalSet::new(frame.orbitals().to_vec(), sorted_occupations(m, &mut rng)).unwrap();
        let b = OrbitalSet::new(frame.orbitals().to_vec(), sorted_occupations(m, &mut rng)).unwrap();
        let params = ModelParams::new(p, 2.0, 1.0, vec![[0.1, 0.2, 0.3]], g).unwrap();
        let model = EnergyModel::new(params).unwrap();
        let h = model.hamiltonian(&density_of(&a));
        let linear: f64 = frame
            .orbitals()
            .iter()
            .zip(a.occupations().iter().zip(b.occupations()))
            .map(|(u, (na, nb))| (nb - na) * h.apply(u).inner(u))
            .sum();
        let ea = model.energy(&a).total;
        let eb = model.energy(&b).total;
        prop_assert!(eb <= ea + linear + 1e-10 * ea.abs().max(eb.abs()), "{} > {} + {}", eb, ea, linear);
    }

    #[test]
    fn free_functional_scaling_identity(alpha in 1.0f64..1.6, p in 1.2f64..1.6) {
        let g = Grid3D::new(9.0, 96).unwrap();
        let u = common::gaussian(g, [0.0; 3], 1.6);
        let d = 2.0 - 3.0 * (p - 1.0);
        let a = alpha.powf(2.0 * (p - 1.0) / d);
        let ua = rescale_field(&u, a, [0.0; 3], &g).unwrap();
        let base = ModelParams::new(p, 1.0, 1.0, vec![], g).unwrap().with_stencil(Stencil::Fourth);
        let one = evaluate_energy(&OrbitalSet::with_tolerance(vec![u], vec![1.0], 1e-3).unwrap(), &base).unwrap();
        let scaled_params = base.with_alpha(alpha).unwrap();
        let scaled = evaluate_energy(&OrbitalSet::with_tolerance(vec![ua], vec![1.0], 1e-2).unwrap(), &scaled_params).unwrap();
        let expected = alpha.powf(4.0 * (p - 1.0) / d) * one.total;
        prop_assert!((scaled.total / expected - 1.0).abs() < 0.01, "{} vs {}", scaled.total, expected);
    }
}

#[test]
fn hydrogen_orbital_energy_with_weak_coupling() {
    let g = Grid3D::new(20.0, 96).unwrap();
    let u = common::hydrogen(g, [0.0; 3]);
    let state = OrbitalSet::with_tolerance(vec![u], vec![1.0], 1e-3).unwrap();
    // The origin is not a node at even n, so the bare potential is finite.
    let params = ModelParams::new(1.5, 1e-6, 1.0, vec![[0.0; 3]], g).unwrap().with_softening(0.0).unwrap();
    let e = evaluate_energy(&state, &params).unwrap();
    assert!((e.total / -0.25 - 1.0).abs() < 0.02, "{e:?}");
}

#[test]
fn nonlinear_term_fades_with_alpha() {
    let g = Grid3D::new(6.0, 32).unwrap();
    let u = common::gaussian(g, [0.0; 3], 1.0);
    let state = OrbitalSet::with_tolerance(vec![u], vec![1.0], 1e-3).unwrap();
    let mut last = f64::INFINITY;
    for alpha in [1.0, 1e-1, 1e-2, 1e-3] {
        let params = ModelParams::new(1.5, alpha, 1.0, vec![], g).unwrap();
        let nl = evaluate_energy(&state, &params).unwrap().nonlinear.abs();
        assert!(nl < last);
        last = nl;
    }
    assert!(last < 1e-3);
}
