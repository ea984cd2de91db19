use fnls_core::constraints::{gram, lowdin_orthonormalize, mix_orbitals, random_orthonormal_set};
use fnls_core::lattice::{Grid3D, ScalarField};
use fnls_core::FnlsError;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Skewed, overlapping family: random fields plus a shared component.
fn skewed_family(m: usize, grid: Grid3D, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = ScalarField::from_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 4.0).exp());
    (0..m)
        .map(|_| {
            let noise = ScalarField::from_values(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            ScalarField::linear_combination(rng.gen_range(0.0..2.0), &common, rng.gen_range(0.5..2.0), &noise)
        })
        .collect()
}

/// Largest `‖v − P v‖ / ‖v‖` with `P` the projector onto `span(basis)`.
fn span_residual(vs: &[ScalarField], basis: &[ScalarField]) -> f64 {
    vs.iter()
        .map(|v| {
            let mut r = v.clone();
            for b in basis {
                r.axpy(-b.inner(v), b);
            }
            r.norm() / v.norm()
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lowdin_properties(seed in 0u64..10_000, m in 1usize..6) {
        let g = Grid3D::new(3.0, 16).unwrap();
        let family = skewed_family(m, g, seed);
        let ortho = lowdin_orthonormalize(&family).unwrap();
        prop_assert!(gram(&ortho).identity_defect() < 1e-10);
        prop_assert!(span_residual(&family, &ortho) < 1e-8);
        let again = lowdin_orthonormalize(&ortho).unwrap();
        let drift = ortho.iter().zip(&again).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max);
        let scale = ortho.iter().map(ScalarField::max_abs).fold(0.0, f64::max);
        prop_assert!(drift <= 1e-10 * scale);
    }

    #[test]
    fn random_frames_are_orthonormal_and_repeatable(seed in 0u64..10_000, m in 1usize..6) {
        let g = Grid3D::new(3.0, 16).unwrap();
        let a = random_orthonormal_set(m, g, seed).unwrap();
        let b = random_orthonormal_set(m, g, seed).unwrap();
        prop_assert!(gram(a.orbitals()).identity_defect() < 1e-10);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn near_duplicate_pair_is_rank_deficient() {
    let g = Grid3D::new(3.0, 16).unwrap();
    let u = random_orthonormal_set(2, g, 1).unwrap();
    let a = u.orbitals()[0].clone();
    let b = ScalarField::linear_combination(1.0, &a, 1e-8, &u.orbitals()[1]);
    let err = lowdin_orthonormalize(&[a, b]).unwrap_err();
    assert!(matches!(err, FnlsError::RankDeficient { .. }), "{err}");
}

#[test]
fn identity_and_forbidden_mixing() {
    let g = Grid3D::new(3.0, 16).unwrap();
    let frame = random_orthonormal_set(2, g, 3).unwrap();
    let same = mix_orbitals(&frame, &DMatrix::identity(2, 2)).unwrap();
    assert_eq!(same, frame);
    let state = fnls_core::model::OrbitalSet::new(frame.orbitals().to_vec(), vec![1.0, 0.5]).unwrap();
    let (c, s) = (0.6, 0.8);
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    assert!(matches!(mix_orbitals(&state, &q), Err(FnlsError::OccupationMismatch(..))));
}
