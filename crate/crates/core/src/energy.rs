//! The energy functional, its mixed-state form, and its L² gradient.
//!
//! For a state `γ = Σ n_i |u_i⟩⟨u_i|`
//!
//! ```text
//! E(γ) = Σ n_i ∫|∇u_i|² + ∫ V ρ − (α^{2p−2}/p) ∫ ρ^p,     ρ = Σ n_i u_i²
//! ```
//!
//! and `∂E/∂u_i = 2 n_i H_ρ u_i` with `H_ρ = −Δ + V − α^{2p−2} ρ^{p−1}`.
//! Energy, gradient and Hamiltonian share the same stencil and quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{neg_laplacian_into, sum, ScalarField, Stencil};
use crate::model::{coulomb_potential, density_of, Density, ModelParams, OrbitalSet};

/// The three terms of the functional and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(kinetic: f64, potential: f64, nonlinear: f64) -> Self {
        Self {
            kinetic,
            potential,
            nonlinear,
            total: kinetic + potential + nonlinear,
        }
    }
}

/// `ρ^e` for `e > 0`, with `0^e = 0`.
#[inline]
pub fn density_power(rho: f64, e: f64) -> f64 {
    if rho > 0.0 {
        (e * rho.ln()).exp()
    } else {
        0.0
    }
}

/// `H = −Δ_h + W` for a frozen local potential `W`.
#[derive(Debug, Clone)]
pub struct MeanFieldOperator {
    potential: ScalarField,
    stencil: Stencil,
}

impl MeanFieldOperator {
    pub fn new(potential: ScalarField, stencil: Stencil) -> Self {
        Self { potential, stencil }
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        let g = *u.grid();
        let mut out = ScalarField::zeros(g);
        neg_laplacian_into(u.values(), out.values_mut(), g.points(), g.spacing(), self.stencil);
        out.values_mut()
            .par_iter_mut()
            .zip(u.values().par_iter().zip(self.potential.values().par_iter()))
            .for_each(|(o, (&v, &w))| *o += w * v);
        out
    }
}

/// Energy functional with the Coulomb field precomputed.
#[derive(Debug, Clone)]
pub struct EnergyModel {
    params: ModelParams,
    potential: ScalarField,
}

impl EnergyModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let potential = coulomb_potential(&params)?;
        Ok(Self { params, potential })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// The external potential `V_s` sampled on the grid.
    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    /// Local part `V − α^{2p−2} ρ^{p−1}` of the mean-field operator.
    pub fn mean_field_potential(&self, density: &Density) -> ScalarField {
        let c = self.params.coupling();
        let e = self.params.p - 1.0;
        self.potential
            .zip_map(&density.rho, |v, r| v - c * density_power(r, e))
    }

    pub fn hamiltonian(&self, density: &Density) -> MeanFieldOperator {
        MeanFieldOperator::new(self.mean_field_potential(density), self.params.stencil)
    }

    fn laplacians(&self, state: &OrbitalSet) -> Vec<ScalarField> {
        let g = *state.grid();
        state
            .orbitals()
            .iter()
            .map(|u| {
                let mut out = ScalarField::zeros(g);
                neg_laplacian_into(u.values(), out.values_mut(), g.points(), g.spacing(), self.params.stencil);
                out
            })
            .collect()
    }

    fn assemble(&self, state: &OrbitalSet, laps: &[ScalarField], density: &Density) -> EnergyBreakdown {
        let kinetic: f64 = state
            .orbitals()
            .iter()
            .zip(laps)
            .zip(state.occupations())
            .map(|((u, l), &n)| if n == 0.0 { 0.0 } else { n * u.inner(l) })
            .sum();
        let potential = density.rho.inner(&self.potential);
        let e = self.params.p - 1.0;
        let rho = density.rho.values();
        let int_rho_p = density.rho.grid().cell_volume() * sum::sum_by(rho.len(), |i| rho[i] * density_power(rho[i], e));
        let nonlinear = -self.params.coupling() / self.params.p * int_rho_p;
        EnergyBreakdown::new(kinetic, potential, nonlinear)
    }

    pub fn energy(&self, state: &OrbitalSet) -> EnergyBreakdown {
        let laps = self.laplacians(state);
        let density = density_of(state);
        self.assemble(state, &laps, &density)
    }

    /// Energy together with `g_i = 2 n_i H_ρ u_i`.
    pub fn energy_and_gradient(&self, state: &OrbitalSet) -> (EnergyBreakdown, Vec<ScalarField>) {
        let laps = self.laplacians(state);
        let density = density_of(state);
        let energy = self.assemble(state, &laps, &density);
        let w = self.mean_field_potential(&density);
        let grads = state
            .orbitals()
            .iter()
            .zip(laps)
            .zip(state.occupations())
            .map(|((u, mut l), &n)| {
                l.values_mut()
                    .par_iter_mut()
                    .zip(u.values().par_iter().zip(w.values().par_iter()))
                    .for_each(|(o, (&v, &wv))| *o = 2.0 * n * (*o + wv * v));
                l
            })
            .collect();
        (energy, grads)
    }

    pub fn gradient(&self, state: &OrbitalSet) -> Vec<ScalarField> {
        self.energy_and_gradient(state).1
    }

    /// `∫ ρ^p` of a state.
    pub fn rho_p_integral(&self, density: &Density) -> f64 {
        let e = self.params.p - 1.0;
        let rho = density.rho.values();
        density.rho.grid().cell_volume() * sum::sum_by(rho.len(), |i| rho[i] * density_power(rho[i], e))
    }
}

/// Evaluates the functional for `state` under `params`.
pub fn evaluate_energy(state: &OrbitalSet, params: &ModelParams) -> Result<EnergyBreakdown> {
    Ok(EnergyModel::new(params.clone())?.energy(state))
}

/// L² gradient of the functional with respect to each orbital.
pub fn energy_gradient(state: &OrbitalSet, params: &ModelParams) -> Result<Vec<ScalarField>> {
    Ok(EnergyModel::new(params.clone())?.gradient(state))
}
