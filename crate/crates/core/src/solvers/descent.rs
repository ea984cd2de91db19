use std::collections::VecDeque;

use log::debug;

use super::{block_dot, block_norm, final_spectrum, tangent_project, SolveOptions, SolveReport, SolveStatus};
use crate::constraints::lowdin_orthonormalize;
use crate::energy::{EnergyBreakdown, EnergyModel};
use crate::error::{FnlsError, Result};
use crate::lattice::{shift_cells, KineticPreconditioner, ScalarField};
use crate::model::{density_of, ModelParams, OrbitalSet};

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 40;
const STEP_MIN: f64 = 1e-6;
const STEP_MAX: f64 = 1e2;
/// Curvature pairs kept by the quasi-Newton direction.
const MEMORY: usize = 8;
/// Centroid drift, in cells, tolerated before the free solve re-centres.
const PIN_SLACK: f64 = 0.75;

/// Projected preconditioned descent on the orthonormality constraint.
pub fn minimize_direct(params: &ModelParams, init: &OrbitalSet, tol: f64, max_iters: usize) -> Result<SolveReport> {
    let opts = SolveOptions {
        tol,
        max_iters,
        ..SolveOptions::default()
    };
    minimize_direct_with(params, init, &opts)
}

pub fn minimize_direct_with(params: &ModelParams, init: &OrbitalSet, opts: &SolveOptions) -> Result<SolveReport> {
    check_start(params, init)?;
    let model = EnergyModel::new(params.clone())?;
    descend(&model, init, opts, false)
}

/// The same descent with no external potential, re-centring the density on
/// the central node whenever it drifts.
pub fn solve_free(params: &ModelParams, init: &OrbitalSet, tol: f64, max_iters: usize) -> Result<SolveReport> {
    let opts = SolveOptions {
        tol,
        max_iters,
        ..SolveOptions::default()
    };
    solve_free_with(params, init, &opts)
}

pub fn solve_free_with(params: &ModelParams, init: &OrbitalSet, opts: &SolveOptions) -> Result<SolveReport> {
    if !params.centers.is_empty() || !params.exterior_centers.is_empty() {
        return Err(FnlsError::Validation("free problem takes no centers".into()));
    }
    check_start(params, init)?;
    let model = EnergyModel::new(params.clone())?;
    descend(&model, init, opts, true)
}

pub(crate) fn check_start(params: &ModelParams, init: &OrbitalSet) -> Result<()> {
    if init.grid() != &params.grid {
        return Err(FnlsError::GridMismatch);
    }
    if (init.lambda() - params.lambda).abs() > 1e-9 * params.lambda.max(1.0) {
        return Err(FnlsError::Validation(format!(
            "occupations sum to {} but lambda is {}",
            init.lambda(),
            params.lambda
        )));
    }
    Ok(())
}

/// Shifts every orbital by whole cells so that the density sits on the
/// central node. The shift follows the rounded centroid and only fires once
/// the centroid has drifted more than [`PIN_SLACK`] cells, so a soliton
/// straddling two nodes does not hop back and forth. Returns whether anything
/// moved.
fn pin_to_center(orbitals: &mut Vec<ScalarField>, occ: &[f64]) -> Result<bool> {
    let state = OrbitalSet::from_parts(orbitals.clone(), occ.to_vec());
    let rho = density_of(&state).rho;
    let g = *rho.grid();
    let (ci, cj, ck) = g.center_node();
    let centre = [ci as f64, cj as f64, ck as f64];
    let mut moment = [0.0; 3];
    let mut mass = 0.0;
    for (idx, &r) in rho.values().iter().enumerate() {
        let (i, j, k) = g.unindex(idx);
        moment[0] += r * i as f64;
        moment[1] += r * j as f64;
        moment[2] += r * k as f64;
        mass += r;
    }
    if !(mass > 0.0) {
        return Ok(false);
    }
    let drift: Vec<f64> = (0..3).map(|d| moment[d] / mass - centre[d]).collect();
    if drift.iter().all(|c| c.abs() <= PIN_SLACK) {
        return Ok(false);
    }
    let offset = [drift[0].round() as isize, drift[1].round() as isize, drift[2].round() as isize];
    if offset == [0, 0, 0] {
        return Ok(false);
    }
    let shifted: Vec<ScalarField> = orbitals.iter().map(|u| shift_cells(u, offset)).collect();
    *orbitals = lowdin_orthonormalize(&shifted)?;
    Ok(true)
}

/// Whole-cell shift putting the density maximum on the central node.
fn pin_argmax(orbitals: &mut Vec<ScalarField>, occ: &[f64]) -> Result<bool> {
    let state = OrbitalSet::from_parts(orbitals.clone(), occ.to_vec());
    let rho = density_of(&state).rho;
    let g = *rho.grid();
    let (i, j, k) = g.unindex(rho.argmax());
    let (ci, cj, ck) = g.center_node();
    let offset = [i as isize - ci as isize, j as isize - cj as isize, k as isize - ck as isize];
    if offset == [0, 0, 0] {
        return Ok(false);
    }
    let shifted: Vec<ScalarField> = orbitals.iter().map(|u| shift_cells(u, offset)).collect();
    *orbitals = lowdin_orthonormalize(&shifted)?;
    Ok(true)
}

fn retract(u: &[ScalarField], d: &[ScalarField], t: f64) -> Result<Vec<ScalarField>> {
    let moved: Vec<ScalarField> = u
        .iter()
        .zip(d)
        .map(|(a, b)| ScalarField::linear_combination(1.0, a, t, b))
        .collect();
    lowdin_orthonormalize(&moved)
}

/// Curvature pair of the quasi-Newton memory.
struct Pair {
    s: Vec<ScalarField>,
    y: Vec<ScalarField>,
    rho: f64,
}

/// Preconditioned two-loop recursion; the result is projected to the tangent
/// space and negated.
fn two_loop(
    u: &[ScalarField],
    r: &[ScalarField],
    pr: &[ScalarField],
    memory: &VecDeque<Pair>,
    gamma: f64,
    pc: &KineticPreconditioner,
) -> Vec<ScalarField> {
    if memory.is_empty() {
        return tangent_project(u, pr).into_iter().map(|f| f.scaled(-gamma)).collect();
    }
    let mut q: Vec<ScalarField> = r.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for pair in memory.iter().rev() {
        let a = pair.rho * block_dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            qi.axpy(-a, yi);
        }
        alphas.push(a);
    }
    let mut z: Vec<ScalarField> = q.iter().map(|f| pc.apply(f).scaled(gamma)).collect();
    for (pair, a) in memory.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * block_dot(&pair.y, &z);
        for (zi, si) in z.iter_mut().zip(&pair.s) {
            zi.axpy(a - b, si);
        }
    }
    tangent_project(u, &z).into_iter().map(|f| f.scaled(-1.0)).collect()
}

fn descend(model: &EnergyModel, init: &OrbitalSet, opts: &SolveOptions, pin: bool) -> Result<SolveReport> {
    let params = model.params();
    let occ = init.occupations().to_vec();
    let mut u = lowdin_orthonormalize(init.orbitals())?;
    if pin {
        pin_to_center(&mut u, &occ)?;
    }
    let grid = params.grid;
    let floor = KineticPreconditioner::new(grid, params.stencil, 1.0)?.lowest_symbol();
    let sigma = params.mu_estimate().abs().max(floor);
    let pc = KineticPreconditioner::new(grid, params.stencil, sigma)?;

    let evaluate = |u: &[ScalarField]| -> (EnergyBreakdown, Vec<ScalarField>, Vec<ScalarField>) {
        let state = OrbitalSet::from_parts(u.to_vec(), occ.clone());
        let (e, g) = model.energy_and_gradient(&state);
        let r = tangent_project(u, &g);
        (e, g, r)
    };

    let (mut energy, mut grad, mut r) = evaluate(&u);
    let mut pr: Vec<ScalarField> = r.iter().map(|f| pc.apply(f)).collect();
    let mut history = vec![energy.total];
    let mut memory: VecDeque<Pair> = VecDeque::with_capacity(MEMORY);
    let mut gamma = 0.5;
    let mut iterations = 0;
    let status;
    loop {
        let res = block_norm(&r);
        if res <= opts.tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= opts.max_iters {
            status = SolveStatus::MaxIterations;
            break;
        }
        iterations += 1;

        let mut d = two_loop(&u, &r, &pr, &memory, gamma, &pc);
        let mut slope = block_dot(&grad, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = tangent_project(&u, &pr).into_iter().map(|f| f.scaled(-gamma)).collect();
            slope = block_dot(&grad, &d);
        }

        let noise = 1e-13 * energy.total.abs();
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            let trial = retract(&u, &d, t)?;
            let e_t = model.energy(&OrbitalSet::from_parts(trial.clone(), occ.clone()));
            if e_t.total <= energy.total + ARMIJO * t * slope + noise {
                accepted = Some(trial);
                break;
            }
            t *= BACKTRACK;
        }
        let Some(mut next) = accepted else {
            status = SolveStatus::LineSearchStall;
            break;
        };
        let moved = if pin { pin_to_center(&mut next, &occ)? } else { false };
        let old_u = std::mem::replace(&mut u, next);
        let (e, g, rr) = evaluate(&u);
        let new_pr: Vec<ScalarField> = rr.iter().map(|f| pc.apply(f)).collect();
        if moved {
            memory.clear();
        } else {
            let s: Vec<ScalarField> = u.iter().zip(&old_u).map(|(a, b)| a.sub(b)).collect();
            let y: Vec<ScalarField> = rr.iter().zip(&r).map(|(a, b)| a.sub(b)).collect();
            let ty: Vec<ScalarField> = new_pr.iter().zip(&pr).map(|(a, b)| a.sub(b)).collect();
            let sy = block_dot(&s, &y);
            let yty = block_dot(&y, &ty);
            if sy > 0.0 && yty > 0.0 {
                gamma = (sy / yty).clamp(STEP_MIN, STEP_MAX);
                if memory.len() == MEMORY {
                    memory.pop_front();
                }
                memory.push_back(Pair { s, y, rho: 1.0 / sy });
            }
        }
        energy = e;
        grad = g;
        r = rr;
        pr = new_pr;
        history.push(energy.total);
        if iterations % 20 == 0 {
            debug!("descent it={iterations} E={:.12e} res={:.3e} t={t:.3e}", energy.total, block_norm(&r));
        }
    }

    if pin && status == SolveStatus::Converged {
        // Final exact placement of the maximum; kept only if the shifted
        // state still meets the tolerance.
        let mut shifted = u.clone();
        if pin_argmax(&mut shifted, &occ)? {
            let (e, g, rr) = evaluate(&shifted);
            if block_norm(&rr) <= opts.tol {
                u = shifted;
                energy = e;
                r = rr;
                let _ = g;
            }
        }
    }
    let residual = block_norm(&r);
    let state = OrbitalSet::from_parts(u, occ);
    let spectrum = final_spectrum(model, &state, opts.eigen_tol, opts.seed)?;
    let concentration_point = density_of(&state).argmax_position();
    Ok(SolveReport {
        state,
        energy,
        spectrum,
        iterations,
        residual,
        stationarity: residual,
        converged: status == SolveStatus::Converged,
        status,
        concentration_point,
        history,
    })
}
