//! Problem definition: parameters, Coulomb centers, orbital states and densities.

use serde::{Deserialize, Serialize};

use crate::error::{FnlsError, Result};
use crate::lattice::{Grid3D, ScalarField, Stencil};

/// Default orthonormality tolerance for [`OrbitalSet`].
pub const ORTHO_TOL: f64 = 1e-8;

/// Upper end of the exponent range, `5/3`.
pub const P_MAX: f64 = 5.0 / 3.0;

/// Checks `1 < p < 5/3`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 && p < P_MAX {
        Ok(())
    } else {
        Err(FnlsError::Domain(format!("p outside (1, 5/3): {p}")))
    }
}

/// Parameters of the energy functional on a fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub centers: Vec<[f64; 3]>,
    /// Soft-core length `s` in `-(|x-y|² + s²)^{-1/2}`.
    pub softening: f64,
    pub grid: Grid3D,
    pub stencil: Stencil,
    /// Overall factor on the Coulomb term; 1 in physical coordinates, `ε`
    /// in blown-up coordinates.
    pub coulomb_scale: f64,
    /// Centers outside the box that still act through their potential. Only
    /// blown-up problems produce these, when the other singular points are
    /// mapped far away.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exterior_centers: Vec<[f64; 3]>,
}

impl ModelParams {
    /// Builds validated parameters with softening `h` and the 7-point stencil.
    pub fn new(p: f64, alpha: f64, lambda: f64, centers: Vec<[f64; 3]>, grid: Grid3D) -> Result<Self> {
        let params = Self {
            p,
            alpha,
            lambda,
            centers,
            softening: grid.spacing(),
            grid,
            stencil: Stencil::Second,
            coulomb_scale: 1.0,
            exterior_centers: Vec::new(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_softening(mut self, softening: f64) -> Result<Self> {
        self.softening = softening;
        self.validate()?;
        Ok(self)
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: Grid3D) -> Result<Self> {
        if self.softening == self.grid.spacing() {
            self.softening = grid.spacing();
        }
        self.grid = grid;
        self.validate()?;
        Ok(self)
    }

    /// Same model with the Coulomb centers removed.
    pub fn free(&self) -> Self {
        Self {
            centers: Vec::new(),
            exterior_centers: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p).map_err(|_| FnlsError::Validation(format!("p outside (1, 5/3): {}", self.p)))?;
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(FnlsError::Validation(format!("alpha must be positive: {}", self.alpha)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(FnlsError::Validation(format!("lambda must be positive: {}", self.lambda)));
        }
        if !(self.softening.is_finite() && self.softening >= 0.0) {
            return Err(FnlsError::Validation(format!(
                "softening must be non-negative: {}",
                self.softening
            )));
        }
        if !(self.coulomb_scale.is_finite() && self.coulomb_scale >= 0.0) {
            return Err(FnlsError::Validation("Coulomb scale must be non-negative".into()));
        }
        for (k, c) in self.centers.iter().enumerate() {
            if !c.iter().all(|v| v.is_finite()) {
                return Err(FnlsError::Validation(format!("center {k} is not finite")));
            }
            if !self.grid.contains(*c) {
                return Err(FnlsError::Validation(format!("center {k} lies outside the box")));
            }
            for (l, d) in self.centers.iter().enumerate().skip(k + 1) {
                if c == d {
                    return Err(FnlsError::Validation(format!(
                        "centers pairwise distinct: {k} and {l} coincide"
                    )));
                }
            }
        }
        for (k, c) in self.exterior_centers.iter().enumerate() {
            if !c.iter().all(|v| v.is_finite()) || self.grid.contains(*c) {
                return Err(FnlsError::Validation(format!("exterior center {k} must be finite and outside the box")));
            }
        }
        Ok(())
    }

    /// Coefficient `α^{2p-2}` of the nonlinear term.
    pub fn coupling(&self) -> f64 {
        self.alpha.powf(2.0 * self.p - 2.0)
    }

    /// Smallest integer `N` with `λ ≤ N`.
    pub fn orbital_count(&self) -> usize {
        aufbau_count(self.lambda)
    }

    /// Aufbau occupations `(1, …, 1, λ - N + 1)`.
    pub fn occupations(&self) -> Vec<f64> {
        aufbau_occupations(self.lambda)
    }

    /// Crude estimate of the lowest mean-field eigenvalue, used to size boxes
    /// and to shift preconditioners.
    pub fn mu_estimate(&self) -> f64 {
        let free = free_mu_estimate(self.p, self.alpha, self.lambda);
        if self.centers.is_empty() || self.coulomb_scale == 0.0 {
            free
        } else {
            let z = self.coulomb_scale;
            free.min(-0.25 * z * z)
        }
    }
}

/// Estimate of the free-problem eigenvalue from the best Gaussian trial
/// state of mass `lambda` (within a factor of a few of the true value).
pub fn free_mu_estimate(p: f64, alpha: f64, lambda: f64) -> f64 {
    let q = 1.5 * (p - 1.0);
    let c = alpha.powf(2.0 * p - 2.0) * lambda.powf(p - 1.0) * p.powf(-2.5) * (2.0 / std::f64::consts::PI).powf(q);
    let beta = (3.0 / (q * c)).powf(1.0 / (q - 1.0));
    -4.0 * beta
}

/// Default box half-width `12 / sqrt|μ|` plus the largest center offset.
pub fn auto_half_width(p: f64, alpha: f64, lambda: f64, centers: &[[f64; 3]]) -> f64 {
    let mut mu = free_mu_estimate(p, alpha, lambda);
    if !centers.is_empty() {
        mu = mu.min(-0.25);
    }
    let reach = centers
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    12.0 / mu.abs().sqrt() + reach
}

pub fn aufbau_count(lambda: f64) -> usize {
    (lambda - 1e-12).ceil().max(1.0) as usize
}

pub fn aufbau_occupations(lambda: f64) -> Vec<f64> {
    let n = aufbau_count(lambda);
    let mut occ = vec![1.0; n];
    occ[n - 1] = (lambda - n as f64 + 1.0).min(1.0);
    occ
}

/// Orthonormal orbitals with occupation numbers in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSet {
    orbitals: Vec<ScalarField>,
    occupations: Vec<f64>,
}

impl OrbitalSet {
    pub fn new(orbitals: Vec<ScalarField>, occupations: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(orbitals, occupations, ORTHO_TOL)
    }

    pub fn with_tolerance(orbitals: Vec<ScalarField>, occupations: Vec<f64>, tol: f64) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(FnlsError::Validation("orbital set is empty".into()));
        }
        if orbitals.len() != occupations.len() {
            return Err(FnlsError::Validation(format!(
                "{} orbitals but {} occupations",
                orbitals.len(),
                occupations.len()
            )));
        }
        let grid = *orbitals[0].grid();
        if orbitals.iter().any(|u| *u.grid() != grid) {
            return Err(FnlsError::GridMismatch);
        }
        if occupations.iter().any(|&n| !(0.0..=1.0).contains(&n)) {
            return Err(FnlsError::Validation("occupations must lie in [0, 1]".into()));
        }
        if occupations.windows(2).any(|w| w[1] > w[0]) {
            return Err(FnlsError::Validation("occupations must be non-increasing".into()));
        }
        let set = Self {
            orbitals,
            occupations,
        };
        let dev = set.orthonormality_defect();
        if dev > tol {
            return Err(FnlsError::Validation(format!(
                "orbitals not orthonormal: max |<u_i,u_j> - δ_ij| = {dev:e}"
            )));
        }
        Ok(set)
    }

    /// Pure state: every occupation equals one.
    pub fn pure(orbitals: Vec<ScalarField>) -> Result<Self> {
        let occ = vec![1.0; orbitals.len()];
        Self::new(orbitals, occ)
    }

    pub(crate) fn from_parts(orbitals: Vec<ScalarField>, occupations: Vec<f64>) -> Self {
        debug_assert_eq!(orbitals.len(), occupations.len());
        Self {
            orbitals,
            occupations,
        }
    }

    pub fn orbitals(&self) -> &[ScalarField] {
        &self.orbitals
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn into_parts(self) -> (Vec<ScalarField>, Vec<f64>) {
        (self.orbitals, self.occupations)
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn grid(&self) -> &Grid3D {
        self.orbitals[0].grid()
    }

    /// `Σ n_i`.
    pub fn lambda(&self) -> f64 {
        self.occupations.iter().sum()
    }

    pub fn is_pure(&self) -> bool {
        self.occupations.iter().all(|&n| n == 1.0)
    }

    /// Operator norm of the density matrix, `max n_i`.
    pub fn max_occupation(&self) -> f64 {
        self.occupations.iter().fold(0.0_f64, |m, &n| m.max(n))
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.orbitals.len();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in i..m {
                let g = self.orbitals[i].inner(&self.orbitals[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// One-particle density `ρ = Σ n_i u_i²` and its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub rho: ScalarField,
    pub mass: f64,
}

impl Density {
    pub fn from_field(rho: ScalarField) -> Result<Self> {
        if rho.values().iter().any(|&v| v < 0.0) {
            return Err(FnlsError::Validation("density has negative values".into()));
        }
        let mass = rho.integrate();
        Ok(Self { rho, mass })
    }

    pub fn zero(grid: Grid3D) -> Self {
        Self {
            rho: ScalarField::zeros(grid),
            mass: 0.0,
        }
    }

    /// Physical position of the density maximum.
    pub fn argmax_position(&self) -> [f64; 3] {
        self.rho.grid().position(self.rho.argmax())
    }
}

pub fn density_of(state: &OrbitalSet) -> Density {
    let grid = *state.grid();
    let mut rho = vec![0.0; grid.len()];
    for (u, &n) in state.orbitals().iter().zip(state.occupations()) {
        if n == 0.0 {
            continue;
        }
        for (r, &v) in rho.iter_mut().zip(u.values()) {
            *r += n * v * v;
        }
    }
    let rho = ScalarField::from_raw(grid, rho);
    let mass = rho.integrate();
    Density { rho, mass }
}

/// Softened attractive Coulomb potential `-c Σ_k (|x - y_k|² + s²)^{-1/2}`.
pub fn coulomb_potential(params: &ModelParams) -> Result<ScalarField> {
    let s2 = params.softening * params.softening;
    if params.softening == 0.0 {
        if let Some(index) = params.centers.iter().position(|c| params.grid.is_node(*c)) {
            return Err(FnlsError::SingularSample { index });
        }
    }
    let scale = params.coulomb_scale;
    let centers: Vec<[f64; 3]> = params.centers.iter().chain(&params.exterior_centers).copied().collect();
    Ok(ScalarField::from_fn(params.grid, move |x| {
        let mut v = 0.0;
        for y in &centers {
            let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2);
            v -= 1.0 / (d2 + s2).sqrt();
        }
        scale * v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid3D {
        Grid3D::new(4.0, 17).unwrap()
    }

    #[test]
    fn parameter_validation() {
        let g = grid();
        assert!(ModelParams::new(1.5, 1.0, 2.0, vec![[0.0; 3]], g).is_ok());
        assert!(ModelParams::new(1.8, 1.0, 2.0, vec![], g).is_err());
        assert!(ModelParams::new(1.0, 1.0, 2.0, vec![], g).is_err());
        assert!(ModelParams::new(1.5, 0.0, 2.0, vec![], g).is_err());
        assert!(ModelParams::new(1.5, 1.0, 0.0, vec![], g).is_err());
        let dup = ModelParams::new(1.5, 1.0, 1.0, vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], g);
        assert!(matches!(dup, Err(FnlsError::Validation(m)) if m.contains("pairwise distinct")));
        assert!(ModelParams::new(1.5, 1.0, 1.0, vec![[9.0, 0.0, 0.0]], g).is_err());
    }

    #[test]
    fn aufbau_filling() {
        assert_eq!(aufbau_occupations(2.0), vec![1.0, 1.0]);
        assert_eq!(aufbau_occupations(1.5), vec![1.0, 0.5]);
        assert_eq!(aufbau_occupations(0.5), vec![0.5]);
        assert_eq!(aufbau_count(1.0), 1);
        assert_eq!(aufbau_count(1.25), 2);
    }

    #[test]
    fn coulomb_values() {
        let g = grid(); // h = 0.5, origin is a node
        let p = ModelParams::new(1.5, 1.0, 1.0, vec![[0.0; 3]], g)
            .unwrap()
            .with_softening(0.0);
        let p = p.unwrap();
        assert!(matches!(coulomb_potential(&p), Err(FnlsError::SingularSample { index: 0 })));

        let off = ModelParams::new(1.5, 1.0, 1.0, vec![[0.25, 0.25, 0.25]], g)
            .unwrap()
            .with_softening(0.0)
            .unwrap();
        let v = coulomb_potential(&off).unwrap();
        let expected = -1.0 / (3.0 * 0.25f64 * 0.25).sqrt();
        let at = v.at(8, 8, 8);
        assert!((at - expected).abs() < 1e-12);

        let soft = ModelParams::new(1.5, 1.0, 1.0, vec![[0.0; 3]], g).unwrap();
        let v = coulomb_potential(&soft).unwrap();
        assert!((v.at(8, 8, 8) + 1.0 / g.spacing()).abs() < 1e-12);
        // x = (1, 0, 0) is node (10, 8, 8); distance 1, softened by h = 0.5
        assert!((v.at(10, 8, 8) + 1.0 / (1.0f64 + 0.25).sqrt()).abs() < 1e-12);

        let two = ModelParams::new(1.5, 1.0, 1.0, vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], g)
            .unwrap()
            .with_softening(0.0)
            .unwrap();
        assert!(matches!(coulomb_potential(&two), Err(FnlsError::SingularSample { .. })));
    }

    #[test]
    fn coulomb_definition_points() {
        // odd grid with a center off the nodes so s = 0 is admissible
        let g = Grid3D::new(4.0, 16).unwrap();
        let y = [g.coord(8) - 1.0, g.coord(8), g.coord(8)];
        let p = ModelParams::new(1.5, 1.0, 1.0, vec![y], g)
            .unwrap()
            .with_softening(0.0)
            .unwrap();
        // y is not a node because its first coordinate is off by 1 / h = 1 / 0.533...
        let v = coulomb_potential(&p).unwrap();
        assert!((v.at(8, 8, 8) + 1.0).abs() < 1e-12);
    }
}
