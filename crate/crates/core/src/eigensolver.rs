//! Lowest eigenpairs of the frozen-density mean-field operator by a locally
//! optimal block preconditioned conjugate direction iteration.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::constraints::{combine, random_localized_set, RANK_TOL};
use crate::energy::{EnergyModel, MeanFieldOperator};
use crate::error::{FnlsError, Result};
use crate::lattice::{KineticPreconditioner, ScalarField};
use crate::model::{Density, ModelParams, OrbitalSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Bound on `‖Hu − μu‖₂` for each returned pair.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Extra block vectors carried along and dropped on return.
    pub guards: usize,
    /// Shift of the kinetic preconditioner; picked from Ritz values when `None`.
    pub shift: Option<f64>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 500,
            seed: 0,
            guards: 2,
            shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    /// Non-decreasing.
    pub eigenvalues: Vec<f64>,
    pub eigenfields: OrbitalSet,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues `≥ 0`: box states with no bound-state meaning.
    pub fn unbound_flags(&self) -> Vec<bool> {
        self.eigenvalues.iter().map(|&e| e >= 0.0).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `index,eigenvalue,residual` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,residual\n");
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{},{:.17e},{:.17e}\n", i + 1, e, r));
        }
        s
    }
}

/// `−Δu + V u − α^{2p−2} ρ^{p−1} u`.
pub fn apply_hamiltonian(u: &ScalarField, density: &Density, params: &ModelParams) -> Result<ScalarField> {
    if u.grid() != &params.grid || density.rho.grid() != &params.grid {
        return Err(FnlsError::GridMismatch);
    }
    Ok(EnergyModel::new(params.clone())?.hamiltonian(density).apply(u))
}

/// The `m` lowest eigenpairs of `H_ρ`. Fails with `NoConvergence`, carrying
/// the best iterate, when the residual bound is not met.
pub fn lowest_eigenpairs(
    density: &Density,
    params: &ModelParams,
    m: usize,
    tol: f64,
    seed: u64,
) -> Result<SpectrumResult> {
    if density.rho.grid() != &params.grid {
        return Err(FnlsError::GridMismatch);
    }
    let op = EnergyModel::new(params.clone())?.hamiltonian(density);
    let opts = EigenOptions {
        tol,
        seed,
        ..EigenOptions::default()
    };
    let out = solve_operator(&op, m, &opts, None, centroid(&params.centers))?;
    if out.converged {
        Ok(out)
    } else {
        Err(FnlsError::NoConvergence {
            iterations: out.iterations,
            best: Box::new(out),
        })
    }
}

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    if points.is_empty() {
        return [0.0; 3];
    }
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a] / points.len() as f64;
        }
    }
    c
}

/// All pairwise inner products `⟨a_i, b_j⟩`, accumulated chunk by chunk in a
/// fixed order.
pub(crate) fn block_inner(a: &[&ScalarField], b: &[&ScalarField]) -> DMatrix<f64> {
    block_inner_impl(a, b, false)
}

/// Like [`block_inner`] for a product known to be symmetric: only `i ≤ j`
/// is accumulated and the result is mirrored.
fn block_inner_sym(a: &[&ScalarField], b: &[&ScalarField]) -> DMatrix<f64> {
    let mut m = block_inner_impl(a, b, true);
    for i in 0..m.nrows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

fn block_inner_impl(a: &[&ScalarField], b: &[&ScalarField], upper: bool) -> DMatrix<f64> {
    const CHUNK: usize = 2048;
    let (ra, cb) = (a.len(), b.len());
    if ra == 0 || cb == 0 {
        return DMatrix::zeros(ra, cb);
    }
    let grid = *a[0].grid();
    let len = grid.len();
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut out = vec![0.0; ra * cb];
            for (i, u) in a.iter().enumerate() {
                let us = &u.values()[lo..hi];
                for (j, v) in b.iter().enumerate() {
                    if upper && j < i {
                        continue;
                    }
                    let vs = &v.values()[lo..hi];
                    out[i * cb + j] = us.iter().zip(vs).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            out
        })
        .collect();
    let mut total = vec![0.0; ra * cb];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let dv = grid.cell_volume();
    DMatrix::from_fn(ra, cb, |i, j| dv * total[i * cb + j])
}

/// Rayleigh–Ritz on the span of `s`, dropping numerically dependent
/// directions. Returns the `keep` lowest Ritz values and coefficients.
fn rayleigh_ritz(s: &[&ScalarField], hs: &[&ScalarField], keep: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let b = block_inner_sym(s, s);
    let a = block_inner_sym(s, hs);
    let eb = SymmetricEigen::new(b);
    let dmax = eb.eigenvalues.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..eb.eigenvalues.len())
        .filter(|&i| eb.eigenvalues[i] > 1e-11 * dmax && eb.eigenvalues[i] > RANK_TOL)
        .collect();
    if kept.len() < keep {
        return Err(FnlsError::RankDeficient {
            min_eigenvalue: eb.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    let z = DMatrix::from_fn(s.len(), kept.len(), |r, c| {
        eb.eigenvectors[(r, kept[c])] / eb.eigenvalues[kept[c]].sqrt()
    });
    let mut red = z.transpose() * a * &z;
    red = 0.5 * (&red + red.transpose());
    let er = SymmetricEigen::new(red);
    let mut order: Vec<usize> = (0..er.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| er.eigenvalues[i].total_cmp(&er.eigenvalues[j]));
    let theta = order[..keep].iter().map(|&i| er.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(kept.len(), keep, |r, c| er.eigenvectors[(r, order[c])]);
    Ok((theta, z * y))
}

fn refs(v: &[ScalarField]) -> Vec<&ScalarField> {
    v.iter().collect()
}

fn residual_fields(x: &[ScalarField], hx: &[ScalarField], theta: &[f64]) -> Vec<ScalarField> {
    x.iter()
        .zip(hx)
        .zip(theta)
        .map(|((u, hu), &t)| ScalarField::linear_combination(1.0, hu, -t, u))
        .collect()
}

fn pick_shift(theta0: f64, floor: f64) -> f64 {
    (-theta0).max(floor)
}

/// Block iteration on an explicit operator. Never fails on slow convergence;
/// the result carries `converged = false` instead.
pub fn solve_operator(
    op: &MeanFieldOperator,
    m: usize,
    opts: &EigenOptions,
    start: Option<&[ScalarField]>,
    center: [f64; 3],
) -> Result<SpectrumResult> {
    if m == 0 {
        return Err(FnlsError::Validation("need at least one eigenpair".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(FnlsError::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let grid = *op.potential().grid();
    let b = m + opts.guards;
    let mut init: Vec<ScalarField> = start.map(|s| s.iter().take(b).cloned().collect()).unwrap_or_default();
    if init.len() < b {
        let fill = random_localized_set(b - init.len(), grid, opts.seed, center, grid.half_width() / 4.0)?;
        init.extend(fill.into_parts().0);
    }
    let init_h: Vec<ScalarField> = init.par_iter().map(|u| op.apply(u)).collect();
    let (mut theta, c) = rayleigh_ritz(&refs(&init), &refs(&init_h), b)?;
    let mut x = combine(&init, &c);
    let mut hx = combine(&init_h, &c);
    drop(init);
    drop(init_h);

    // Rough lower end of the box spectrum, used as a floor for the shift.
    let floor = KineticPreconditioner::new(grid, op.stencil(), 1.0)?.lowest_symbol();
    let mut shift = opts.shift.unwrap_or_else(|| pick_shift(theta[0], floor));
    let mut pc = KineticPreconditioner::new(grid, op.stencil(), shift)?;

    let mut p: Vec<ScalarField> = Vec::new();
    let mut hp: Vec<ScalarField> = Vec::new();
    let mut iterations = 0;
    let mut res_norms;
    loop {
        let r = residual_fields(&x, &hx, &theta);
        res_norms = r.iter().map(|f| f.norm()).collect::<Vec<_>>();
        let done = res_norms[..m].iter().all(|&n| n <= opts.tol);
        if done || iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        if opts.shift.is_none() && iterations % 10 == 0 {
            let want = pick_shift(theta[0], floor);
            if want > 2.0 * shift || want < 0.5 * shift {
                shift = want;
                pc = KineticPreconditioner::new(grid, op.stencil(), shift)?;
            }
        }

        // Preconditioned residuals of the unconverged columns, made
        // orthogonal to the current block.
        let active: Vec<usize> = (0..b)
            .filter(|&i| i >= m || res_norms[i] > 0.01 * opts.tol)
            .collect();
        let mut w: Vec<ScalarField> = active.par_iter().map(|&i| pc.apply(&r[i])).collect();
        let xw = block_inner(&refs(&x), &refs(&w));
        for (j, wj) in w.iter_mut().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                wj.axpy(-xw[(i, j)], xi);
            }
        }
        w.retain(|f| f.norm() > 1e-300);
        for f in w.iter_mut() {
            let n = f.norm();
            f.scale_mut(1.0 / n);
        }
        let hw: Vec<ScalarField> = w.par_iter().map(|u| op.apply(u)).collect();

        let mut s: Vec<&ScalarField> = refs(&x);
        let mut hs: Vec<&ScalarField> = refs(&hx);
        s.extend(w.iter());
        hs.extend(hw.iter());
        s.extend(p.iter());
        hs.extend(hp.iter());
        let (new_theta, c) = match rayleigh_ritz(&s, &hs, b) {
            Ok(v) => v,
            Err(_) => {
                // Drop the history block and retry on [X, W].
                let k = x.len() + w.len();
                let (s2, hs2) = (&s[..k], &hs[..k]);
                rayleigh_ritz(s2, hs2, b)?
            }
        };
        let used = s.len().min(c.nrows());
        let s_used = &s[..used];
        let hs_used = &hs[..used];
        let mut new_x = combine(s_used, &c);
        let mut new_hx = combine(hs_used, &c);

        let nb = x.len();
        let c_rest = c.rows(nb, used - nb).into_owned();
        let mut new_p = combine(&s_used[nb..], &c_rest);
        let mut new_hp = combine(&hs_used[nb..], &c_rest);
        let mut keep_p = Vec::new();
        let mut keep_hp = Vec::new();
        for (mut f, mut hf) in new_p.drain(..).zip(new_hp.drain(..)) {
            let n = f.norm();
            if n > 1e-300 {
                f.scale_mut(1.0 / n);
                hf.scale_mut(1.0 / n);
                keep_p.push(f);
                keep_hp.push(hf);
            }
        }

        // Restore exact orthonormality if rounding drifted.
        let g = block_inner_sym(&refs(&new_x), &refs(&new_x));
        let defect = (&g - DMatrix::<f64>::identity(b, b)).amax();
        if defect > 1e-10 {
            let eg = SymmetricEigen::new(g);
            let min = eg.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > RANK_TOL) {
                return Err(FnlsError::RankDeficient { min_eigenvalue: min });
            }
            let inv = &eg.eigenvectors
                * DMatrix::from_diagonal(&eg.eigenvalues.map(|l| 1.0 / l.sqrt()))
                * eg.eigenvectors.transpose();
            new_x = combine(&new_x, &inv);
            new_hx = combine(&new_hx, &inv);
        }
        x = new_x;
        hx = new_hx;
        theta = x.iter().zip(&hx).map(|(u, hu)| u.inner(hu)).collect();
        let _ = new_theta;
        p = keep_p;
        hp = keep_hp;
    }

    // Final ordering and sign convention on the wanted columns.
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| theta[i].total_cmp(&theta[j]));
    order.truncate(m);
    let mut fields = Vec::with_capacity(m);
    let mut eigenvalues = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for &i in &order {
        let mut u = x[i].clone();
        if sign_of(&u) < 0.0 {
            u.scale_mut(-1.0);
        }
        fields.push(u);
        eigenvalues.push(theta[i]);
        residuals.push(res_norms[i]);
    }
    let converged = residuals.iter().all(|&r| r <= opts.tol);
    Ok(SpectrumResult {
        eigenvalues,
        eigenfields: OrbitalSet::from_parts(fields, vec![1.0; m]),
        residuals,
        iterations,
        converged,
    })
}

/// `+1` when `∫u³ > 0`, or, if that integral is negligible, when the first
/// significant node value is positive.
fn sign_of(u: &ScalarField) -> f64 {
    let max = u.max_abs();
    let cube = u.map(|v| v * v * v).integrate();
    let scale = max * max * max * u.grid().cell_volume();
    if cube.abs() > 1e-8 * scale {
        return cube.signum();
    }
    u.values()
        .iter()
        .find(|v| v.abs() > 1e-6 * max)
        .map_or(1.0, |v| v.signum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Grid3D, Stencil};

    #[test]
    fn empty_box_ground_level() {
        let g = Grid3D::new(3.0, 24).unwrap();
        let op = MeanFieldOperator::new(ScalarField::zeros(g), Stencil::Second);
        let opts = EigenOptions {
            tol: 1e-8,
            ..EigenOptions::default()
        };
        let out = solve_operator(&op, 4, &opts, None, [0.0; 3]).unwrap();
        assert!(out.converged);
        let exact = 3.0 * Stencil::Second.sine_symbol(1, 24, g.spacing());
        assert!((out.eigenvalues[0] - exact).abs() < 1e-9);
        let second = 2.0 * Stencil::Second.sine_symbol(1, 24, g.spacing()) + Stencil::Second.sine_symbol(2, 24, g.spacing());
        for e in &out.eigenvalues[1..4] {
            assert!((e - second).abs() < 1e-8, "{e} vs {second}");
        }
        assert!(out.eigenfields.orthonormality_defect() < 1e-8);
        assert!(out.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(out.unbound_flags().iter().all(|&f| f));
    }

    #[test]
    fn harmonic_well_levels() {
        let g = Grid3D::new(6.0, 40).unwrap();
        let pot = ScalarField::from_fn(g, |x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let op = MeanFieldOperator::new(pot, Stencil::Fourth);
        let out = solve_operator(&op, 4, &EigenOptions::default(), None, [0.0; 3]).unwrap();
        assert!(out.converged);
        // −Δ + |x|² has levels 3, 5, 5, 5.
        assert!((out.eigenvalues[0] - 3.0).abs() < 2e-2, "{:?}", out.eigenvalues);
        for e in &out.eigenvalues[1..] {
            assert!((e - 5.0).abs() < 5e-2, "{:?}", out.eigenvalues);
        }
        assert!(out.max_residual() <= 1e-6);
        let u = &out.eigenfields.orbitals()[0];
        assert!(u.values().iter().all(|&v| v >= -1e-6 * u.max_abs()));
    }

    #[test]
    fn csv_layout() {
        let g = Grid3D::new(3.0, 16).unwrap();
        let op = MeanFieldOperator::new(ScalarField::zeros(g), Stencil::Second);
        let out = solve_operator(&op, 1, &EigenOptions::default(), None, [0.0; 3]).unwrap();
        let csv = out.to_csv();
        assert!(csv.starts_with("index,eigenvalue,residual\n1,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
