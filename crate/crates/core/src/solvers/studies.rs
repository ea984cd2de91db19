use serde::{Deserialize, Serialize};

use super::{default_initial_state, minimize_direct_with, solve_free_with, SolveOptions, SolveReport};
use crate::energy::EnergyBreakdown;
use crate::error::{FnlsError, Result};
use crate::lattice::Grid3D;
use crate::model::ModelParams;

/// Direct solves from `opts.multistart` consecutive seeds; returns the lowest
/// energy report and the final energy of every start.
pub fn multistart(params: &ModelParams, opts: &SolveOptions) -> Result<(SolveReport, Vec<f64>)> {
    let starts = opts.multistart.max(1);
    let mut best: Option<SolveReport> = None;
    let mut energies = Vec::with_capacity(starts);
    for k in 0..starts {
        let seed = opts.seed.wrapping_add(k as u64);
        let init = default_initial_state(params, seed)?;
        let o = SolveOptions { seed, ..*opts };
        let rep = minimize_direct_with(params, &init, &o)?;
        energies.push(rep.energy.total);
        let better = match &best {
            None => true,
            Some(b) => rep.energy.total < b.energy.total,
        };
        if better {
            best = Some(rep);
        }
    }
    Ok((best.expect("at least one start"), energies))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub energy: Option<EnergyBreakdown>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub error: Option<String>,
}

/// `E_α(λ)` for each `λ`; failures are recorded per point.
pub fn energy_curve(template: &ModelParams, lambdas: &[f64], opts: &SolveOptions) -> Result<Vec<CurvePoint>> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FnlsError::Validation("lambdas must be positive and strictly ascending".into()));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let point = template
            .clone()
            .with_lambda(lambda)
            .and_then(|p| multistart(&p, opts));
        out.push(match point {
            Ok((rep, _)) => CurvePoint {
                lambda,
                energy: Some(rep.energy),
                converged: rep.converged,
                iterations: rep.iterations,
                residual: rep.residual,
                error: None,
            },
            Err(e) => CurvePoint {
                lambda,
                energy: None,
                converged: false,
                iterations: 0,
                residual: f64::NAN,
                error: Some(e.to_string()),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingReport {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `E(λ₁ + λ₂)`.
    pub combined: f64,
    /// `E(λ₁)`.
    pub bound: f64,
    /// `E^∞(λ₂)`.
    pub free: f64,
    /// `E(λ₁) + E^∞(λ₂) − E(λ₁ + λ₂)`.
    pub margin: f64,
    pub converged: bool,
}

impl BindingReport {
    pub fn from_energies(lambda1: f64, lambda2: f64, combined: f64, bound: f64, free: f64, converged: bool) -> Self {
        Self {
            lambda1,
            lambda2,
            combined,
            bound,
            free,
            margin: bound + free - combined,
            converged,
        }
    }

    pub fn binds(&self) -> bool {
        self.margin > 0.0
    }
}

/// Computes the three energies of the binding inequality. The free energy is
/// solved on `free_grid`, which must hold the much wider free minimizer.
pub fn binding_check(
    params: &ModelParams,
    lambda1: f64,
    lambda2: f64,
    free_grid: Grid3D,
    opts: &SolveOptions,
) -> Result<BindingReport> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(FnlsError::Validation("binding masses must be positive".into()));
    }
    let (combined, _) = multistart(&params.clone().with_lambda(lambda1 + lambda2)?, opts)?;
    let (bound, _) = multistart(&params.clone().with_lambda(lambda1)?, opts)?;
    let free_params = params.free().with_grid(free_grid)?.with_lambda(lambda2)?;
    let init = default_initial_state(&free_params, opts.seed)?;
    let free = solve_free_with(&free_params, &init, opts)?;
    Ok(BindingReport::from_energies(
        lambda1,
        lambda2,
        combined.energy.total,
        bound.energy.total,
        free.energy.total,
        combined.converged && bound.converged && free.converged,
    ))
}
