//! Margins of the functional inequalities behind the existence theory,
//! evaluated on grid states, and the GNS constant `K(p, N)`.
//!
//! Every margin is "left side minus right side", so a valid inequality shows
//! up as a non-negative number. Gradients are the quadratic form of the
//! chosen stencil; with the 7-point stencil that form is a sum of squared
//! forward differences and the Hoffmann–Ostenhof bound holds exactly on the
//! grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::random_orthonormal_set;
use crate::energy::density_power;
use crate::error::{FnlsError, Result};
use crate::lattice::{kinetic_quadratic_form, Grid3D, ScalarField, Stencil};
use crate::model::{check_exponent, density_of, OrbitalSet};

/// Default kinetic Lieb–Thirring constant for spinless fermions.
///
/// The semiclassical value is `(3/5)(6π²)^{2/3} ≈ 9.1156`; Frank, Hundertmark,
/// Jex and Nam (2021) showed the true constant is at least `1.456^{-2/3}`
/// times that, about 7.097. Rounded down.
pub const LIEB_THIRRING_CONSTANT: f64 = 7.09;

fn check_stencil_form(state: &OrbitalSet, stencil: Stencil) -> f64 {
    state
        .orbitals()
        .iter()
        .zip(state.occupations())
        .filter(|(_, &n)| n > 0.0)
        .map(|(u, &n)| n * kinetic_quadratic_form(u, stencil))
        .sum()
}

/// `ε∫|∇u|² + (4/ε)∫u² − ∫u²/|x|`, with `|x|` softened by one grid spacing.
pub fn check_hardy(u: &ScalarField, epsilon: f64, stencil: Stencil) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(FnlsError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let g = *u.grid();
    let s2 = g.spacing() * g.spacing();
    let weight = ScalarField::from_fn(g, |x| 1.0 / (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + s2).sqrt());
    let coulomb = u.mul(u).inner(&weight);
    Ok(epsilon * kinetic_quadratic_form(u, stencil) + 4.0 / epsilon * u.norm_sq() - coulomb)
}

/// `‖γ‖^{2/3} Σ nᵢ∫|∇uᵢ|²  /  ∫ρ^{5/3}`: the largest Lieb–Thirring constant
/// this state allows.
pub fn lieb_thirring_ratio(state: &OrbitalSet, stencil: Stencil) -> f64 {
    let lhs = state.max_occupation().powf(2.0 / 3.0) * check_stencil_form(state, stencil);
    let rho = density_of(state).rho;
    lhs / rho.map(|r| density_power(r, 5.0 / 3.0)).integrate()
}

/// `‖γ‖^{2/3} Σ nᵢ∫|∇uᵢ|² − c_LT ∫ρ^{5/3}` with `‖γ‖ = max nᵢ`.
pub fn check_lieb_thirring(state: &OrbitalSet, c_lt: f64, stencil: Stencil) -> f64 {
    let lhs = state.max_occupation().powf(2.0 / 3.0) * check_stencil_form(state, stencil);
    let rho = density_of(state).rho;
    lhs - c_lt * rho.map(|r| density_power(r, 5.0 / 3.0)).integrate()
}

/// Guard added under the square root of the density.
const SQRT_GUARD: f64 = 1e-300;

/// `Σ nᵢ∫|∇uᵢ|² − ∫|∇√ρ|²`.
pub fn check_hoffmann_ostenhof(state: &OrbitalSet, stencil: Stencil) -> f64 {
    let root = density_of(state).rho.map(|r| (r.max(0.0) + SQRT_GUARD).sqrt());
    check_stencil_form(state, stencil) - kinetic_quadratic_form(&root, stencil)
}

/// `K(p, N)` from the free ground-state energy `J₁^∞(N) < 0` at unit coupling.
pub fn gns_constant(p: f64, j1inf: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(j1inf < 0.0 && j1inf.is_finite()) {
        return Err(FnlsError::Domain(format!("free energy must be negative, got {j1inf}")));
    }
    let q = 3.0 * (p - 1.0);
    let r = (2.0 - q) / q;
    // Summed in logs: near p = 1 the exponents are large.
    let ln_k = (p - 1.0).ln() - r * j1inf.abs().ln() + 2.0 / q * (3.0 / (2.0 * p)).ln() + r * (5.0 / 3.0 - p).ln();
    let k = ln_k.exp();
    if !k.is_finite() {
        return Err(FnlsError::Domain(format!("K(p, N) overflows at p = {p}, J = {j1inf}")));
    }
    Ok(k)
}

/// `Σ∫|∇uᵢ|² − K(p,N) (∫ρ^p)^{2/(3(p−1))}` for a pure state of `N` orbitals.
pub fn check_gns(state: &OrbitalSet, p: f64, j1inf: f64, stencil: Stencil) -> Result<f64> {
    if !state.is_pure() {
        return Err(FnlsError::Validation("GNS check needs a pure state".into()));
    }
    let k = gns_constant(p, j1inf)?;
    let rho = density_of(state).rho;
    let rho_p = rho.map(|r| density_power(r, p)).integrate();
    Ok(check_stencil_form(state, stencil) - k * rho_p.powf(2.0 / (3.0 * (p - 1.0))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    Hardy,
    LiebThirring,
    HoffmannOstenhof,
    Gns,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::Hardy => "hardy",
            Inequality::LiebThirring => "lieb_thirring",
            Inequality::HoffmannOstenhof => "hoffmann_ostenhof",
            Inequality::Gns => "gns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub inequality: Inequality,
    pub seed: u64,
    pub margin: f64,
}

/// Random-state sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub states: usize,
    pub orbitals: usize,
    pub seed: u64,
    pub hardy_epsilon: f64,
    pub c_lt: f64,
    pub stencil: Stencil,
    /// Exponent and free energy `J₁^∞(orbitals)` for the GNS margin; skipped
    /// when absent.
    pub gns: Option<(f64, f64)>,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            states: 100,
            orbitals: 3,
            seed: 0,
            hardy_epsilon: 1.0,
            c_lt: LIEB_THIRRING_CONSTANT,
            stencil: Stencil::Second,
            gns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub records: Vec<MarginRecord>,
    /// Smallest Lieb–Thirring ratio met: the largest constant for which every
    /// margin of the ensemble stays non-negative.
    pub empirical_lt_constant: f64,
}

impl EnsembleReport {
    pub fn worst(&self, which: Inequality) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.inequality == which)
            .map(|r| r.margin)
            .min_by(f64::total_cmp)
    }
}

/// Seeded orthonormal frames, each also given random non-increasing
/// occupations for the mixed-state inequalities.
pub fn run_ensemble(grid: Grid3D, settings: &EnsembleSettings) -> Result<EnsembleReport> {
    if settings.states == 0 || settings.orbitals == 0 {
        return Err(FnlsError::Validation("ensemble needs states and orbitals".into()));
    }
    let mut records = Vec::with_capacity(4 * settings.states);
    let mut empirical = f64::INFINITY;
    for k in 0..settings.states {
        let seed = settings.seed.wrapping_add(k as u64);
        let pure = random_orthonormal_set(settings.orbitals, grid, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0cc);
        let mut occ: Vec<f64> = (0..settings.orbitals).map(|_| rng.gen_range(0.1..=1.0)).collect();
        occ.sort_by(|a, b| b.total_cmp(a));
        let mixed = OrbitalSet::new(pure.orbitals().to_vec(), occ)?;

        let hardy = check_hardy(&pure.orbitals()[0], settings.hardy_epsilon, settings.stencil)?;
        records.push(MarginRecord { inequality: Inequality::Hardy, seed, margin: hardy });
        let lt = check_lieb_thirring(&mixed, settings.c_lt, settings.stencil);
        records.push(MarginRecord { inequality: Inequality::LiebThirring, seed, margin: lt });
        empirical = empirical.min(lieb_thirring_ratio(&mixed, settings.stencil));
        let ho = check_hoffmann_ostenhof(&mixed, settings.stencil);
        records.push(MarginRecord { inequality: Inequality::HoffmannOstenhof, seed, margin: ho });
        if let Some((p, j)) = settings.gns {
            let gns = check_gns(&pure, p, j, settings.stencil)?;
            records.push(MarginRecord { inequality: Inequality::Gns, seed, margin: gns });
        }
    }
    Ok(EnsembleReport {
        records,
        empirical_lt_constant: empirical,
    })
}
