//! Orthonormality machinery: Gram matrices, symmetric (Löwdin)
//! orthonormalization, seeded random frames and orbital mixing.

use std::borrow::Borrow;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{FnlsError, Result};
use crate::lattice::{Grid3D, ScalarField};
use crate::model::OrbitalSet;

/// Gram eigenvalues at or below this make the family numerically dependent.
pub const RANK_TOL: f64 = 1e-12;

/// Tolerance on `QᵀQ = I` accepted by [`mix_orbitals`].
pub const ORTHOGONAL_TOL: f64 = 1e-10;

/// Symmetric overlap matrix `G_ij = ⟨u_i, u_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `max |G_ij − δ_ij|`.
    pub fn identity_defect(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.entries[(i, j)] - t).abs());
            }
        }
        worst
    }

    /// `G^{-1/2}` through the symmetric eigendecomposition.
    pub fn inverse_sqrt(&self) -> Result<DMatrix<f64>> {
        let eig = SymmetricEigen::new(self.entries.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > RANK_TOL) {
            return Err(FnlsError::RankDeficient { min_eigenvalue: min });
        }
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
    }
}

pub fn gram(orbitals: &[ScalarField]) -> GramMatrix {
    let m = orbitals.len();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let a = orbitals[i].inner(&orbitals[j]);
            let b = if i == j { a } else { orbitals[j].inner(&orbitals[i]) };
            let v = 0.5 * (a + b);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    GramMatrix { entries }
}

/// Column combinations `out_j = Σ_i c_ij u_i`.
pub fn combine<F: Borrow<ScalarField> + Sync>(orbitals: &[F], coeffs: &DMatrix<f64>) -> Vec<ScalarField> {
    assert_eq!(orbitals.len(), coeffs.nrows(), "coefficient rows must match orbital count");
    let grid = *orbitals[0].borrow().grid();
    (0..coeffs.ncols())
        .map(|j| {
            let mut out = vec![0.0; grid.len()];
            out.par_chunks_mut(4096).enumerate().for_each(|(c, chunk)| {
                let start = c * 4096;
                for (i, u) in orbitals.iter().enumerate() {
                    let w = coeffs[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &u.borrow().values()[start..start + chunk.len()];
                    for (o, &v) in chunk.iter_mut().zip(src) {
                        *o += w * v;
                    }
                }
            });
            ScalarField::from_raw(grid, out)
        })
        .collect()
}

/// Right-multiplies the family by `G^{-1/2}`.
pub fn lowdin_orthonormalize(orbitals: &[ScalarField]) -> Result<Vec<ScalarField>> {
    if orbitals.is_empty() {
        return Ok(Vec::new());
    }
    let s = gram(orbitals).inverse_sqrt()?;
    Ok(combine(orbitals, &s))
}

/// `M` seeded orthonormal orbitals around the box center with envelope width `L/4`.
pub fn random_orthonormal_set(m: usize, grid: Grid3D, seed: u64) -> Result<OrbitalSet> {
    random_localized_set(m, grid, seed, [0.0; 3], grid.half_width() / 4.0)
}

/// Seeded orthonormal orbitals: random low-degree polynomials times a Gaussian
/// of width `width` centred at `center`, plus faint white noise.
pub fn random_localized_set(
    m: usize,
    grid: Grid3D,
    seed: u64,
    center: [f64; 3],
    width: f64,
) -> Result<OrbitalSet> {
    if m == 0 {
        return Err(FnlsError::Validation("need at least one orbital".into()));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(FnlsError::Domain(format!("envelope width must be positive, got {width}")));
    }
    let mut degree = 1;
    while monomials(degree).len() < 2 * m {
        degree += 1;
    }
    let powers = monomials(degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(m);
    for _ in 0..m {
        let coeffs: Vec<f64> = powers.iter().map(|_| -> f64 { StandardNormal.sample(&mut rng) }).collect();
        let noise: Vec<f64> = (0..grid.len())
            .map(|_| -> f64 { 1e-3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) })
            .collect();
        let mut values = vec![0.0; grid.len()];
        values.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let x = grid.position(idx);
            let t = [
                (x[0] - center[0]) / width,
                (x[1] - center[1]) / width,
                (x[2] - center[2]) / width,
            ];
            let env = (-0.5 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2])).exp();
            let poly: f64 = powers
                .iter()
                .zip(&coeffs)
                .map(|(e, c)| c * t[0].powi(e[0]) * t[1].powi(e[1]) * t[2].powi(e[2]))
                .sum();
            *v = env * (poly + noise[idx]);
        });
        raw.push(ScalarField::from_raw(grid, values));
    }
    let orbitals = lowdin_orthonormalize(&raw)?;
    Ok(OrbitalSet::from_parts(orbitals, vec![1.0; m]))
}

fn monomials(degree: i32) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                out.push([a, b, total - a - b]);
            }
        }
    }
    out
}

/// Replaces the orbitals by `(u) Q`. `Q` may only couple equal occupations.
pub fn mix_orbitals(state: &OrbitalSet, q: &DMatrix<f64>) -> Result<OrbitalSet> {
    let m = state.len();
    if q.nrows() != m || q.ncols() != m {
        return Err(FnlsError::ShapeMismatch {
            expected: m * m,
            actual: q.nrows() * q.ncols(),
        });
    }
    let defect = (q.transpose() * q - DMatrix::<f64>::identity(m, m)).amax();
    if defect > ORTHOGONAL_TOL {
        return Err(FnlsError::Validation(format!("mixing matrix not orthogonal (defect {defect:e})")));
    }
    let occ = state.occupations();
    for i in 0..m {
        for j in 0..m {
            if q[(i, j)].abs() > ORTHOGONAL_TOL && occ[i] != occ[j] {
                return Err(FnlsError::OccupationMismatch(occ[i], occ[j]));
            }
        }
    }
    Ok(OrbitalSet::from_parts(combine(state.orbitals(), q), occ.to_vec()))
}
