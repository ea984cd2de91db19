use std::collections::VecDeque;

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::descent::check_start;
use super::{final_spectrum, stationarity_residual, SolveOptions, SolveReport, SolveStatus};
use crate::eigensolver::{solve_operator, EigenOptions};
use crate::energy::EnergyModel;
use crate::error::{FnlsError, Result};
use crate::lattice::ScalarField;
use crate::model::{density_of, Density, ModelParams, OrbitalSet};

/// Cycles inspected by the oscillation detector.
const WINDOW: usize = 15;

/// Damped self-consistent field iteration with aufbau filling.
pub fn minimize_scf(
    params: &ModelParams,
    init: &OrbitalSet,
    tol: f64,
    max_iters: usize,
    damping: f64,
) -> Result<SolveReport> {
    let opts = SolveOptions {
        tol,
        max_iters,
        damping,
        ..SolveOptions::default()
    };
    minimize_scf_with(params, init, &opts)
}

pub fn minimize_scf_with(params: &ModelParams, init: &OrbitalSet, opts: &SolveOptions) -> Result<SolveReport> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(FnlsError::Domain(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    check_start(params, init)?;
    let model = EnergyModel::new(params.clone())?;
    let occ = params.occupations();
    let n = occ.len();
    let mut rho = density_of(init).rho;
    let mut guess = init.orbitals().to_vec();
    let mut residuals: Vec<f64> = Vec::new();
    let mut history = Vec::new();
    let mut state = init.clone();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut eigen_tol = 1e-4;
    let mut mixer = Anderson::default();
    while iterations < opts.max_iters {
        iterations += 1;
        let density = Density {
            mass: rho.integrate(),
            rho: rho.clone(),
        };
        let op = model.hamiltonian(&density);
        let eopts = EigenOptions {
            tol: eigen_tol,
            seed: opts.seed,
            ..EigenOptions::default()
        };
        let spec = solve_operator(&op, n, &eopts, Some(&guess), density.argmax_position())?;
        let (fields, _) = spec.eigenfields.into_parts();
        guess = fields.clone();
        state = OrbitalSet::from_parts(fields, occ.clone());
        let rho_new = density_of(&state).rho;
        let res = rho_new.sub(&rho).map(f64::abs).integrate();
        residuals.push(res);
        history.push(model.energy(&state).total);
        debug!("scf it={iterations} res={res:.3e} E={:.12e}", history.last().unwrap());
        if res <= opts.tol * params.lambda {
            status = SolveStatus::Converged;
            break;
        }
        if oscillating(&residuals) {
            status = SolveStatus::Oscillation;
            break;
        }
        eigen_tol = (0.01 * res).clamp(0.1 * opts.tol, 1e-4);
        let f = rho_new.sub(&rho);
        rho = if opts.anderson > 0 {
            mixer.next(rho, f, opts.damping, opts.anderson)
        } else {
            let mut mixed = rho;
            mixed.axpy(opts.damping, &f);
            mixed
        };
    }

    let energy = model.energy(&state);
    let stationarity = stationarity_residual(&model, &state);
    let spectrum = final_spectrum(&model, &state, opts.eigen_tol, opts.seed)?;
    let concentration_point = density_of(&state).argmax_position();
    Ok(SolveReport {
        state,
        energy,
        spectrum,
        iterations,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        stationarity,
        converged: status == SolveStatus::Converged,
        status,
        concentration_point,
        history,
    })
}

/// Anderson acceleration of the damped density update.
#[derive(Default)]
struct Anderson {
    prev: Option<(ScalarField, ScalarField)>,
    d_rho: VecDeque<ScalarField>,
    d_res: VecDeque<ScalarField>,
}

impl Anderson {
    fn next(&mut self, rho: ScalarField, res: ScalarField, damping: f64, depth: usize) -> ScalarField {
        if let Some((r0, f0)) = self.prev.take() {
            if self.d_rho.len() == depth {
                self.d_rho.pop_front();
                self.d_res.pop_front();
            }
            self.d_rho.push_back(rho.sub(&r0));
            self.d_res.push_back(res.sub(&f0));
        }
        let k = self.d_res.len();
        let mut out = rho.clone();
        out.axpy(damping, &res);
        if k > 0 {
            let a = DMatrix::from_fn(k, k, |i, j| self.d_res[i].inner(&self.d_res[j]));
            let b = DVector::from_fn(k, |i, _| self.d_res[i].inner(&res));
            let reg = 1e-12 * a.diagonal().max().max(f64::MIN_POSITIVE);
            let a = a + DMatrix::identity(k, k) * reg;
            if let Some(gamma) = a.cholesky().map(|c| c.solve(&b)) {
                for i in 0..k {
                    out.axpy(-gamma[i], &self.d_rho[i]);
                    out.axpy(-damping * gamma[i], &self.d_res[i]);
                }
            }
        }
        self.prev = Some((rho, res));
        out.map(|v| v.max(0.0))
    }
}

/// No progress over the last window compared with the one before it.
fn oscillating(res: &[f64]) -> bool {
    if res.len() < 2 * WINDOW {
        return false;
    }
    let k = res.len();
    let recent = res[k - WINDOW..].iter().copied().fold(f64::INFINITY, f64::min);
    let before = res[k - 2 * WINDOW..k - WINDOW].iter().copied().fold(f64::INFINITY, f64::min);
    recent >= 0.95 * before
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillation_detector() {
        let flat: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 0.1 } else { 0.2 }).collect();
        assert!(oscillating(&flat));
        let decaying: Vec<f64> = (0..40).map(|i| 0.9f64.powi(i)).collect();
        assert!(!oscillating(&decaying));
        assert!(!oscillating(&flat[..10]));
    }
}
