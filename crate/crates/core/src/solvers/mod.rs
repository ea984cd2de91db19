//! Ground-state computation: preconditioned Riemannian descent, damped
//! self-consistent field iteration, the translation-pinned free problem and
//! the studies built on them.

mod descent;
mod scf;
mod studies;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use descent::{minimize_direct, minimize_direct_with, solve_free, solve_free_with};
pub use scf::{minimize_scf, minimize_scf_with};
pub use studies::{binding_check, energy_curve, multistart, BindingReport, CurvePoint};

use crate::constraints::random_localized_set;
use crate::eigensolver::{block_inner, solve_operator, EigenOptions, SpectrumResult};
use crate::energy::{EnergyBreakdown, EnergyModel};
use crate::error::Result;
use crate::lattice::ScalarField;
use crate::model::{density_of, ModelParams, OrbitalSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchStall,
    Oscillation,
}

/// Knobs shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Density mixing weight of the SCF loop, in `(0, 1]`.
    pub damping: f64,
    /// Residual bound for the eigenpairs reported with each solve.
    pub eigen_tol: f64,
    pub seed: u64,
    /// Seeds tried by [`multistart`].
    pub multistart: usize,
    /// History depth of Anderson acceleration in the SCF loop; 0 keeps plain
    /// damped mixing.
    pub anderson: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 2000,
            damping: 0.5,
            eigen_tol: 1e-6,
            seed: 0,
            multistart: 3,
            anderson: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub state: OrbitalSet,
    pub energy: EnergyBreakdown,
    /// Lowest eigenpairs of the mean-field operator at the final density.
    pub spectrum: SpectrumResult,
    pub iterations: usize,
    /// Convergence measure of the method: tangential gradient norm for
    /// descent, `∫|ρ_new − ρ|` for SCF.
    pub residual: f64,
    /// Tangential gradient norm at the final state.
    pub stationarity: f64,
    pub converged: bool,
    pub status: SolveStatus,
    /// Position of the density maximum.
    pub concentration_point: [f64; 3],
    /// Energy after each accepted step (descent) or each cycle (SCF).
    pub history: Vec<f64>,
}

impl SolveReport {
    /// `μ₁ < μ₂ ≤ … ≤ μ_N < 0`.
    pub fn eigenvalue_ordering_holds(&self) -> bool {
        let e = &self.spectrum.eigenvalues;
        let strict_first = e.len() < 2 || e[0] < e[1];
        strict_first && e.windows(2).all(|w| w[0] <= w[1]) && e.iter().all(|&v| v < 0.0)
    }
}

/// Outcome of comparing a solve against the definition of a ground state.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateCheck {
    /// Largest principal angle between the orbital span and the span of the
    /// lowest eigenfields.
    pub max_principal_angle: f64,
    pub ordering_holds: bool,
}

/// Principal angles between two orthonormal families of equal size.
pub fn principal_angles(a: &[ScalarField], b: &[ScalarField]) -> Vec<f64> {
    let ar: Vec<&ScalarField> = a.iter().collect();
    let br: Vec<&ScalarField> = b.iter().collect();
    let c: DMatrix<f64> = block_inner(&ar, &br);
    let svd = c.svd(false, false);
    let mut angles: Vec<f64> = svd.singular_values.iter().map(|&s| s.min(1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn verify_ground_state(report: &SolveReport) -> GroundStateCheck {
    let angles = principal_angles(report.state.orbitals(), report.spectrum.eigenfields.orbitals());
    GroundStateCheck {
        max_principal_angle: angles.last().copied().unwrap_or(0.0),
        ordering_holds: report.eigenvalue_ordering_holds(),
    }
}

/// Seeded orthonormal start localized at `center` with aufbau occupations.
pub fn initial_state(params: &ModelParams, seed: u64, center: [f64; 3]) -> Result<OrbitalSet> {
    let g = params.grid;
    let width = (1.0 / params.mu_estimate().abs().sqrt())
        .max(4.0 * g.spacing())
        .min(g.half_width() / 4.0);
    let occ = params.occupations();
    let set = random_localized_set(occ.len(), g, seed, center, width)?;
    let (orbitals, _) = set.into_parts();
    Ok(OrbitalSet::from_parts(orbitals, occ))
}

/// Default start: the first center, or the box center for free problems.
pub fn default_initial_state(params: &ModelParams, seed: u64) -> Result<OrbitalSet> {
    let center = params.centers.first().copied().unwrap_or([0.0; 3]);
    initial_state(params, seed, center)
}

pub(crate) fn block_dot(a: &[ScalarField], b: &[ScalarField]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

pub(crate) fn block_norm(a: &[ScalarField]) -> f64 {
    block_dot(a, a).sqrt()
}

/// `Z − U sym(UᵀZ)`: projection onto the tangent space of the orthonormality
/// constraint at `U`.
pub(crate) fn tangent_project(u: &[ScalarField], z: &[ScalarField]) -> Vec<ScalarField> {
    let ur: Vec<&ScalarField> = u.iter().collect();
    let zr: Vec<&ScalarField> = z.iter().collect();
    let a = block_inner(&ur, &zr);
    let s = 0.5 * (&a + a.transpose());
    z.iter()
        .enumerate()
        .map(|(j, zj)| {
            let mut out = zj.clone();
            for (i, ui) in u.iter().enumerate() {
                out.axpy(-s[(i, j)], ui);
            }
            out
        })
        .collect()
}

/// Tangential gradient norm of the functional at `state`.
pub fn stationarity_residual(model: &EnergyModel, state: &OrbitalSet) -> f64 {
    let (_, g) = model.energy_and_gradient(state);
    block_norm(&tangent_project(state.orbitals(), &g))
}

/// Spectrum of the mean-field operator at the density of `state`, warm
/// started from its orbitals.
pub(crate) fn final_spectrum(
    model: &EnergyModel,
    state: &OrbitalSet,
    eigen_tol: f64,
    seed: u64,
) -> Result<SpectrumResult> {
    let density = density_of(state);
    let op = model.hamiltonian(&density);
    let opts = EigenOptions {
        tol: eigen_tol,
        seed,
        ..EigenOptions::default()
    };
    solve_operator(&op, state.len(), &opts, Some(state.orbitals()), density.argmax_position())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::random_orthonormal_set;
    use crate::lattice::Grid3D;

    #[test]
    fn principal_angles_of_rotated_span_vanish() {
        let g = Grid3D::new(5.0, 20).unwrap();
        let s = random_orthonormal_set(2, g, 3).unwrap();
        let (c, sn) = (0.6, 0.8);
        let rotated = vec![
            ScalarField::linear_combination(c, &s.orbitals()[0], sn, &s.orbitals()[1]),
            ScalarField::linear_combination(-sn, &s.orbitals()[0], c, &s.orbitals()[1]),
        ];
        let angles = principal_angles(s.orbitals(), &rotated);
        assert!(angles.iter().all(|&a| a < 1e-6), "{angles:?}");
        let other = random_orthonormal_set(3, g, 4).unwrap();
        let angles = principal_angles(s.orbitals(), &other.orbitals()[..2]);
        assert!(angles[1] > 1e-2);
    }

    #[test]
    fn tangent_projection_is_tangent() {
        let g = Grid3D::new(5.0, 20).unwrap();
        let u = random_orthonormal_set(3, g, 1).unwrap();
        let z = random_orthonormal_set(3, g, 2).unwrap();
        let t = tangent_project(u.orbitals(), z.orbitals());
        for i in 0..3 {
            for j in 0..3 {
                let sym = u.orbitals()[i].inner(&t[j]) + t[i].inner(&u.orbitals()[j]);
                assert!(sym.abs() < 1e-12);
            }
        }
    }
}
