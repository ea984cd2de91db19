mod common;

use fnls_core::constraints::{mix_orbitals, random_orthonormal_set};
use fnls_core::energy::evaluate_energy;
use fnls_core::lattice::Grid3D;
use fnls_core::model::{coulomb_potential, density_of, ModelParams, OrbitalSet};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_orthogonal(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    a.qr().q()
}

fn random_occupations(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occ: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
    occ.sort_by(|a, b| b.total_cmp(a));
    occ
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn density_is_nonnegative(seed in 0u64..10_000, m in 1usize..5) {
        let g = Grid3D::new(4.0, 16).unwrap();
        let frame = random_orthonormal_set(m, g, seed).unwrap();
        let state = OrbitalSet::new(frame.orbitals().to_vec(), random_occupations(m, seed)).unwrap();
        let rho = density_of(&state);
        prop_assert!(rho.rho.values().iter().all(|&v| v >= 0.0));
        let sum: f64 = state.occupations().iter().sum();
        prop_assert!((rho.mass - sum).abs() < 1e-10);
    }

    #[test]
    fn pure_state_functionals_ignore_mixing(seed in 0u64..10_000, m in 2usize..5) {
        let g = Grid3D::new(4.0, 16).unwrap();
        let state = random_orthonormal_set(m, g, seed).unwrap();
        let mixed = mix_orbitals(&state, &random_orthogonal(m, seed ^ 0x77)).unwrap();
        let a = density_of(&state).rho;
        let b = density_of(&mixed).rho;
        prop_assert!(a.sub(&b).max_abs() <= 1e-12 * a.max_abs());
        let params = ModelParams::new(1.4, 1.3, m as f64, vec![[0.3, -0.2, 0.1]], g).unwrap();
        let ea = evaluate_energy(&state, &params).unwrap();
        let eb = evaluate_energy(&mixed, &params).unwrap();
        for (x, y) in [(ea.kinetic, eb.kinetic), (ea.potential, eb.potential), (ea.nonlinear, eb.nonlinear), (ea.total, eb.total)] {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn coulomb_potential_is_monotone_in_softening(s1 in 0.01f64..2.0, ds in 0.0f64..2.0, cx in -2.0f64..2.0) {
        let g = Grid3D::new(4.0, 16).unwrap();
        let base = ModelParams::new(1.5, 1.0, 1.0, vec![[cx, 0.1, -0.3], [-1.0, 1.0, 0.5]], g).unwrap();
        let v1 = coulomb_potential(&base.clone().with_softening(s1).unwrap()).unwrap();
        let v2 = coulomb_potential(&base.with_softening(s1 + ds).unwrap()).unwrap();
        prop_assert!(v1.values().iter().zip(v2.values()).all(|(a, b)| a <= b && *b <= 0.0));
    }
}

#[test]
fn unequal_occupations_mass() {
    let g = Grid3D::new(4.0, 16).unwrap();
    let frame = random_orthonormal_set(2, g, 5).unwrap();
    let state = OrbitalSet::new(frame.orbitals().to_vec(), vec![1.0, 0.5]).unwrap();
    assert!((density_of(&state).mass - 1.5).abs() < 1e-6);
}

#[test]
fn rotation_of_full_pair_keeps_density() {
    let g = Grid3D::new(4.0, 16).unwrap();
    let state = random_orthonormal_set(2, g, 6).unwrap();
    let (c, s) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let rotated = mix_orbitals(&state, &q).unwrap();
    let diff = density_of(&state).rho.sub(&density_of(&rotated).rho).max_abs();
    assert!(diff < 1e-12);
}

#[test]
fn softened_value_at_center() {
    let g = Grid3D::new(4.0, 17).unwrap();
    let params = ModelParams::new(1.5, 1.0, 1.0, vec![[0.0; 3]], g).unwrap();
    let v = coulomb_potential(&params).unwrap();
    let (i, j, k) = g.center_node();
    assert!((v.at(i, j, k) + 1.0 / g.spacing()).abs() < 1e-12);
}
