//! Large-coupling harness: blow-up coordinates, concentration diagnostics,
//! decay and power-law fits, and the sweep over `α`.
//!
//! With `ε = α^{−2(p−1)/(2−3(p−1))}` and `ŵᵢ(x) = ε^{3/2} uᵢ(εx + z)`,
//!
//! ```text
//! ε² E_α(γ) = Σ nᵢ∫|∇ŵᵢ|² − ε Σ_k ∫ ρ̂ / |x − (y_k − z)/ε| − (1/p) ∫ ρ̂^p,
//! ```
//!
//! the free functional at unit coupling plus a Coulomb term of strength `ε`.
//! Solving this form keeps the minimizer at a fixed size on a fixed grid.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::constraints::{gram, lowdin_orthonormalize};
use crate::error::{FnlsError, Result};
use crate::lattice::{rescale_field, sample_trilinear, Grid3D, ScalarField, Stencil};
use crate::model::{check_exponent, density_of, Density, ModelParams, OrbitalSet};
use crate::solvers::{default_initial_state, multistart, solve_free_with, SolveOptions, SolveReport};

/// `α^{−2(p−1)/(2−3(p−1))}`.
pub fn epsilon_of(alpha: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(FnlsError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(alpha.powf(-2.0 * (p - 1.0) / (2.0 - 3.0 * (p - 1.0))))
}

/// Inverse of [`epsilon_of`].
pub fn alpha_of(epsilon: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(FnlsError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(epsilon.powf(-(2.0 - 3.0 * (p - 1.0)) / (2.0 * (p - 1.0))))
}

/// Orbitals moved into blown-up coordinates around `z`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub state: OrbitalSet,
    /// Largest `|⟨ŵᵢ, ŵⱼ⟩ − δᵢⱼ|` before re-orthonormalization.
    pub correction: f64,
    /// `L²` norm of each orbital before re-orthonormalization.
    pub norms: Vec<f64>,
}

/// `ŵᵢ(x) = ε^{3/2} uᵢ(εx + z)` on `target`, with `z` the concentration point
/// of the report and `ε` taken from the parameters.
pub fn extract_profile(report: &SolveReport, params: &ModelParams, target: &Grid3D) -> Result<Profile> {
    let eps = epsilon_of(params.alpha, params.p)?;
    rescale_state(&report.state, eps, report.concentration_point, target)
}

pub fn rescale_state(state: &OrbitalSet, eps: f64, z: [f64; 3], target: &Grid3D) -> Result<Profile> {
    let moved: Vec<ScalarField> = state
        .orbitals()
        .iter()
        .map(|u| rescale_field(u, eps, z, target))
        .collect::<Result<_>>()?;
    let norms = moved.iter().map(ScalarField::norm).collect();
    let correction = gram(&moved).identity_defect();
    let orbitals = lowdin_orthonormalize(&moved)?;
    Ok(Profile {
        state: OrbitalSet::with_tolerance(orbitals, state.occupations().to_vec(), 1e-6)?,
        correction,
        norms,
    })
}

/// The blown-up problem around one center.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledProblem {
    /// Unit coupling, Coulomb strength `ε`, centers `(y_j − y_k)/ε`.
    pub params: ModelParams,
    pub epsilon: f64,
    /// Physical position of the blow-up origin, `y_k`.
    pub origin: [f64; 3],
    /// Indices of centers mapped beyond three box widths and dropped.
    pub dropped: Vec<usize>,
    /// Bound on the potential the dropped centers would add inside the box.
    pub truncation_bound: f64,
}

/// Maps `params` to blown-up coordinates around center `center_index`, on
/// `grid`. The softening becomes the spacing of `grid`.
pub fn rescale_problem(params: &ModelParams, center_index: usize, grid: Grid3D) -> Result<RescaledProblem> {
    params.validate()?;
    let origin = *params.centers.get(center_index).ok_or_else(|| {
        FnlsError::Validation(format!(
            "center index {center_index} out of range for {} centers",
            params.centers.len()
        ))
    })?;
    let eps = epsilon_of(params.alpha, params.p)?;
    let l = grid.half_width();
    let mut inside = vec![[0.0; 3]];
    let mut exterior = Vec::new();
    let mut dropped = Vec::new();
    let mut bound = 0.0;
    for (j, y) in params.centers.iter().enumerate() {
        if j == center_index {
            continue;
        }
        let c = [(y[0] - origin[0]) / eps, (y[1] - origin[1]) / eps, (y[2] - origin[2]) / eps];
        let reach = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if reach > 3.0 * l {
            let dist = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            bound += eps / (dist - 3f64.sqrt() * l);
            dropped.push(j);
        } else if grid.contains(c) {
            inside.push(c);
        } else {
            exterior.push(c);
        }
    }
    if !dropped.is_empty() {
        warn!("dropped {} remote centers; potential error below {bound:.3e}", dropped.len());
    }
    let mut scaled = ModelParams::new(params.p, 1.0, params.lambda, inside, grid)?.with_stencil(params.stencil);
    scaled.coulomb_scale = eps * params.coulomb_scale;
    scaled.exterior_centers = exterior;
    scaled.validate()?;
    Ok(RescaledProblem {
        params: scaled,
        epsilon: eps,
        origin,
        dropped,
        truncation_bound: bound,
    })
}

/// Blown-up solve and its problem. The report's energy is `ε² J_α`.
#[derive(Debug, Clone)]
pub struct RescaledSolve {
    pub problem: RescaledProblem,
    pub report: SolveReport,
}

impl RescaledSolve {
    /// Concentration point in physical coordinates, `y_k + ε ẑ`.
    pub fn physical_concentration(&self) -> [f64; 3] {
        let z = self.report.concentration_point;
        let o = self.problem.origin;
        let e = self.problem.epsilon;
        [o[0] + e * z[0], o[1] + e * z[1], o[2] + e * z[2]]
    }
}

/// Minimizes the blown-up functional around center `center_index`, with
/// `params.grid` read as a grid in blown-up coordinates.
pub fn solve_rescaled(params: &ModelParams, center_index: usize, opts: &SolveOptions) -> Result<RescaledSolve> {
    solve_rescaled_on(params, center_index, params.grid, opts)
}

/// As [`solve_rescaled`], on an explicit blown-up grid.
pub fn solve_rescaled_on(
    params: &ModelParams,
    center_index: usize,
    grid: Grid3D,
    opts: &SolveOptions,
) -> Result<RescaledSolve> {
    let problem = rescale_problem(params, center_index, grid)?;
    let (report, _) = multistart(&problem.params, opts)?;
    Ok(RescaledSolve { problem, report })
}

/// Free minimizer in blown-up units (unit coupling) used as the limit object.
#[derive(Debug, Clone)]
pub struct FreeReference {
    /// `J₁^∞(λ)`.
    pub energy: f64,
    /// `μ̂₁ ≤ … ≤ μ̂_N`.
    pub eigenvalues: Vec<f64>,
    pub density: Density,
    pub converged: bool,
}

impl FreeReference {
    pub fn solve(p: f64, lambda: f64, grid: Grid3D, stencil: Stencil, opts: &SolveOptions) -> Result<Self> {
        let params = ModelParams::new(p, 1.0, lambda, Vec::new(), grid)?.with_stencil(stencil);
        let init = default_initial_state(&params, opts.seed)?;
        let report = solve_free_with(&params, &init, opts)?;
        Ok(Self {
            energy: report.energy.total,
            eigenvalues: report.spectrum.eigenvalues.clone(),
            density: density_of(&report.state),
            converged: report.converged,
        })
    }
}

/// `‖ρ_a − ρ_b‖_∞` on the grid of `a`, after moving `b` so that its maximum
/// sits on the maximum of `a`.
pub fn aligned_density_error(a: &Density, b: &Density) -> f64 {
    let za = a.argmax_position();
    let zb = b.argmax_position();
    let shift = [zb[0] - za[0], zb[1] - za[1], zb[2] - za[2]];
    let g = *a.rho.grid();
    a.rho
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let x = g.position(idx);
            let other = sample_trilinear(&b.rho, [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]);
            (v - other).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Window as fractions of the half-width.
pub const DEFAULT_DECAY_WINDOW: (f64, f64) = (0.35, 0.7);

/// Line fit of `log` of the shell-averaged density against the radius
/// about the density maximum, over radii `window`. Shells are one grid
/// spacing thick.
pub fn fit_exponential_decay(density: &Density, window: (f64, f64)) -> Result<DecayFit> {
    fit_decay_about(density, density.argmax_position(), window)
}

pub fn fit_decay_about(density: &Density, center: [f64; 3], window: (f64, f64)) -> Result<DecayFit> {
    let (r1, r2) = window;
    let g = *density.rho.grid();
    if !(r1 > 0.0 && r2 > r1 && r2 <= g.half_width()) {
        return Err(FnlsError::Domain(format!("fit window ({r1}, {r2}) must lie in (0, L]")));
    }
    let h = g.spacing();
    let bins = (r2 / h).ceil() as usize + 1;
    let mut sum_rho = vec![0.0; bins];
    let mut sum_r = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (idx, &v) in density.rho.values().iter().enumerate() {
        let x = g.position(idx);
        let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) + (x[2] - center[2]).powi(2)).sqrt();
        if r < r1 || r > r2 {
            continue;
        }
        let b = (r / h) as usize;
        sum_rho[b] += v;
        sum_r[b] += r;
        count[b] += 1;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for b in 0..bins {
        if count[b] == 0 {
            continue;
        }
        let mean = sum_rho[b] / count[b] as f64;
        if mean > 0.0 {
            xs.push(sum_r[b] / count[b] as f64);
            ys.push(mean.ln());
        }
    }
    let (slope, intercept, r_squared) = line_fit(&xs, &ys)?;
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 3 {
        return Err(FnlsError::InsufficientSamples(format!("{n} usable samples, need at least 3")));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FnlsError::InsufficientSamples("abscissae do not spread".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, my - slope * mx, r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLaw> {
    if xs.len() != ys.len() {
        return Err(FnlsError::ShapeMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(FnlsError::Domain("power-law data must be positive".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, _, r_squared) = line_fit(&lx, &ly)?;
    Ok(PowerLaw {
        exponent: slope,
        r_squared,
    })
}

/// One point of the `α` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRecord {
    pub alpha: f64,
    pub epsilon: f64,
    /// `ε² J_α(N)`.
    pub energy_scaled: f64,
    /// `J₁^∞(N) − ε² J_α(N)`.
    pub gap: f64,
    /// Density maximum, physical coordinates.
    pub z: [f64; 3],
    pub dist_to_center: f64,
    pub decay_rate: f64,
    pub profile_linf_err: f64,
    /// Kinetic and nonlinear terms of the blown-up energy.
    pub kinetic_scaled: f64,
    pub nonlinear_scaled: f64,
    /// `ε² μᵢ`.
    pub eigenvalues_scaled: Vec<f64>,
    pub truncation_bound: f64,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

impl AsymptoticsRecord {
    fn failed(alpha: f64, epsilon: f64, error: String) -> Self {
        Self {
            alpha,
            epsilon,
            energy_scaled: f64::NAN,
            gap: f64::NAN,
            z: [f64::NAN; 3],
            dist_to_center: f64::NAN,
            decay_rate: f64::NAN,
            profile_linf_err: f64::NAN,
            kinetic_scaled: f64::NAN,
            nonlinear_scaled: f64::NAN,
            eigenvalues_scaled: Vec::new(),
            truncation_bound: 0.0,
            converged: false,
            iterations: 0,
            error: Some(error),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Decay lengths held by the default blown-up box.
pub const SWEEP_BOX_LENGTHS: f64 = 6.0;

/// Blown-up grid with `points` nodes per axis, wide enough for the most
/// extended point of the sweep: `6/√|μ|` with `μ` the eigenvalue estimate
/// at the smallest `ε`.
pub fn default_sweep_grid(template: &ModelParams, alphas: &[f64], points: usize) -> Result<Grid3D> {
    let top = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0 && top.is_finite()) {
        return Err(FnlsError::Validation("alphas must be positive".into()));
    }
    let eps = epsilon_of(top, template.p)?;
    let mut probe = template.free();
    probe.alpha = 1.0;
    probe.centers = vec![[0.0; 3]];
    probe.coulomb_scale = eps * template.coulomb_scale;
    let mu = probe.mu_estimate();
    Grid3D::new(SWEEP_BOX_LENGTHS / mu.abs().sqrt(), points)
}

/// Grid for a free solve: `6/√|μ|` with the Gaussian-trial eigenvalue
/// estimate.
pub fn default_free_grid(p: f64, alpha: f64, lambda: f64, points: usize) -> Result<Grid3D> {
    check_exponent(p)?;
    let mu = crate::model::free_mu_estimate(p, alpha, lambda);
    Grid3D::new(SWEEP_BOX_LENGTHS / mu.abs().sqrt(), points)
}

/// Settings of [`sweep_alpha`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    /// Blown-up grid shared by every point.
    pub grid: Grid3D,
    pub center_index: usize,
    pub solve: SolveOptions,
    /// Decay window as fractions of the blown-up half-width.
    pub decay_window: (f64, f64),
}

/// Blown-up solves for each `α` against a free reference. Failures are kept
/// as records with `error` set.
pub fn sweep_alpha(
    template: &ModelParams,
    alphas: &[f64],
    settings: &SweepSettings,
    reference: &FreeReference,
) -> Result<Vec<AsymptoticsRecord>> {
    if alphas.len() < 3 {
        return Err(FnlsError::Validation(format!(
            "sweep needs at least 3 alphas, got {}",
            alphas.len()
        )));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) || alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FnlsError::Validation("alphas must be positive and strictly ascending".into()));
    }
    if template.centers.is_empty() {
        return Err(FnlsError::Validation("sweep needs at least one center".into()));
    }
    let l = settings.grid.half_width();
    let window = (settings.decay_window.0 * l, settings.decay_window.1 * l);
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let eps = epsilon_of(alpha, template.p)?;
        let point = template
            .clone()
            .with_alpha(alpha)
            .and_then(|p| solve_rescaled_on(&p, settings.center_index, settings.grid, &settings.solve));
        let solve = match point {
            Ok(s) => s,
            Err(e) => {
                out.push(AsymptoticsRecord::failed(alpha, eps, e.to_string()));
                continue;
            }
        };
        let rep = &solve.report;
        let density = density_of(&rep.state);
        let z = solve.physical_concentration();
        let dist = template
            .centers
            .iter()
            .map(|y| ((z[0] - y[0]).powi(2) + (z[1] - y[1]).powi(2) + (z[2] - y[2]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        let decay = fit_exponential_decay(&density, window).map(|f| f.rate).unwrap_or(f64::NAN);
        out.push(AsymptoticsRecord {
            alpha,
            epsilon: eps,
            energy_scaled: rep.energy.total,
            gap: reference.energy - rep.energy.total,
            z,
            dist_to_center: dist,
            decay_rate: decay,
            profile_linf_err: aligned_density_error(&density, &reference.density),
            kinetic_scaled: rep.energy.kinetic,
            nonlinear_scaled: rep.energy.nonlinear,
            eigenvalues_scaled: rep.spectrum.eigenvalues.clone(),
            truncation_bound: solve.problem.truncation_bound,
            converged: rep.converged,
            iterations: rep.iterations,
            error: None,
        });
    }
    Ok(out)
}

/// Fitted exponents and trend flags of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: usize,
    /// Power law of the gap in `ε`, when every gap is positive.
    pub gap_fit: Option<PowerLaw>,
    pub gaps_positive: bool,
    pub max_dist_ratio: f64,
    /// Power law of `dist_to_center/ε` in `1/ε`; near zero or negative when
    /// the ratio does not grow as `ε` shrinks.
    pub dist_ratio_growth: Option<f64>,
    pub profile_error_decreasing: bool,
    /// `max_i |ε²μᵢ − μ̂ᵢ| / |μ̂ᵢ|` at the smallest `ε`.
    pub eigenvalue_rel_err: f64,
    /// Decay rate bracket `[0.85 √|μ̂_N|, 2.3 √|μ̂₁|]` and whether every rate
    /// falls inside it.
    pub decay_bracket: (f64, f64),
    pub decay_in_bracket: bool,
}

impl SweepSummary {
    pub fn from_records(records: &[AsymptoticsRecord], reference: &FreeReference) -> Self {
        let ok: Vec<&AsymptoticsRecord> = records.iter().filter(|r| r.is_ok()).collect();
        let mut sorted = ok.clone();
        // Descending ε.
        sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        let eps: Vec<f64> = sorted.iter().map(|r| r.epsilon).collect();
        let gaps: Vec<f64> = sorted.iter().map(|r| r.gap).collect();
        let gaps_positive = !gaps.is_empty() && gaps.iter().all(|&g| g > 0.0);
        let gap_fit = if gaps_positive { fit_power_law(&eps, &gaps).ok() } else { None };
        let ratios: Vec<f64> = sorted.iter().map(|r| r.dist_to_center / r.epsilon).collect();
        let max_dist_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let inv: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
        let dist_ratio_growth = if ratios.iter().all(|&r| r > 0.0) {
            fit_power_law(&inv, &ratios).ok().map(|f| f.exponent)
        } else {
            // Zero distances: the ratio cannot grow past the sweep's maximum.
            Some(0.0)
        };
        let errs: Vec<f64> = sorted.iter().map(|r| r.profile_linf_err).collect();
        let profile_error_decreasing = errs.len() >= 2 && errs.windows(2).all(|w| w[1] < w[0]);
        let eigenvalue_rel_err = sorted
            .last()
            .map(|r| {
                r.eigenvalues_scaled
                    .iter()
                    .zip(&reference.eigenvalues)
                    .map(|(a, b)| ((a - b) / b).abs())
                    .fold(0.0, f64::max)
            })
            .unwrap_or(f64::NAN);
        let mu = &reference.eigenvalues;
        let decay_bracket = match (mu.first(), mu.last()) {
            (Some(first), Some(last)) => (0.85 * last.abs().sqrt(), 2.3 * first.abs().sqrt()),
            _ => (f64::NAN, f64::NAN),
        };
        let decay_in_bracket = !sorted.is_empty()
            && sorted
                .iter()
                .all(|r| r.decay_rate >= decay_bracket.0 && r.decay_rate <= decay_bracket.1);
        Self {
            points: ok.len(),
            gap_fit,
            gaps_positive,
            max_dist_ratio,
            dist_ratio_growth,
            profile_error_decreasing,
            eigenvalue_rel_err,
            decay_bracket,
            decay_in_bracket,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_examples() {
        assert!((epsilon_of(2.0, 1.5).unwrap() - 0.25).abs() < 1e-15);
        assert!((epsilon_of(10.0, 1.2).unwrap() - 10f64.powf(-2.0 / 7.0)).abs() < 1e-14);
        assert_eq!(epsilon_of(1.0, 1.3).unwrap(), 1.0);
        assert!(epsilon_of(2.0, 1.7).is_err());
        let a = alpha_of(0.05, 1.5).unwrap();
        assert!((epsilon_of(a, 1.5).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn power_law_exact() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-10);
        assert!(fit_power_law(&[1.0, 2.0, -1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn remote_centers_are_split() {
        let g = Grid3D::new(10.0, 16).unwrap();
        let params = ModelParams::new(1.5, 4.0, 1.0, vec![[0.0; 3], [1.0, 0.0, 0.0], [5.0, 0.0, 0.0]], g).unwrap();
        // ε = 1/16: the second center lands at 16 (exterior), the third at 80 (dropped).
        let prob = rescale_problem(&params, 0, g).unwrap();
        assert_eq!(prob.params.centers, vec![[0.0; 3]]);
        assert_eq!(prob.params.exterior_centers, vec![[16.0, 0.0, 0.0]]);
        assert_eq!(prob.dropped, vec![2]);
        assert!(prob.truncation_bound > 0.0);
        assert_eq!(prob.params.coulomb_scale, 1.0 / 16.0);
    }
}
