//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::DEFAULT_DECAY_WINDOW;
use crate::error::{FnlsError, Result};
use crate::inequalities::LIEB_THIRRING_CONSTANT;
use crate::lattice::{Grid3D, Stencil};
use crate::model::{auto_half_width, ModelParams};
use crate::solvers::SolveOptions;

fn default_points() -> usize {
    64
}

/// Run configuration as read from disk. Absent optional fields are filled by
/// [`RunConfig::resolve`]; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
    #[serde(default)]
    pub centers: Vec<[f64; 3]>,
    /// Soft-core length; defaults to the grid spacing.
    #[serde(default)]
    pub softening: Option<f64>,
    /// Box half-width `L`; defaults to `12/√|μ|` plus the center reach.
    #[serde(default)]
    pub box_halfwidth: Option<f64>,
    #[serde(default = "default_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for the parallel kernels.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<BindingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Direct,
    Scf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub eigen_tol: f64,
    pub multistart: usize,
    pub anderson: usize,
    /// Finite-difference order of the Laplacian: 2 or 4.
    pub stencil_order: u8,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            method: Method::Direct,
            tol: o.tol,
            max_iters: o.max_iters,
            damping: o.damping,
            eigen_tol: o.eigen_tol,
            multistart: o.multistart,
            anderson: o.anderson,
            stencil_order: 2,
        }
    }
}

/// Which density the `spectrum` command diagonalizes at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumDensity {
    /// `ρ = 0`: the bare operator `−Δ + V`.
    #[default]
    Zero,
    /// The density of a ground-state solve.
    GroundState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub count: usize,
    pub density: SpectrumDensity,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            count: 5,
            density: SpectrumDensity::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub center_index: usize,
    /// Blown-up box half-width; sized from the smallest `ε` when absent.
    #[serde(default)]
    pub box_halfwidth: Option<f64>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    /// Box of the free reference solve.
    #[serde(default)]
    pub reference_box_halfwidth: Option<f64>,
    #[serde(default)]
    pub reference_grid_points: Option<usize>,
    #[serde(default = "default_window")]
    pub decay_window: (f64, f64),
}

fn default_window() -> (f64, f64) {
    DEFAULT_DECAY_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingConfig {
    #[serde(default = "one")]
    pub lambda1: f64,
    #[serde(default = "one")]
    pub lambda2: f64,
    /// Box of the free solve; sized from the free eigenvalue estimate when
    /// absent.
    #[serde(default)]
    pub free_box_halfwidth: Option<f64>,
    #[serde(default)]
    pub free_grid_points: Option<usize>,
}

impl Default for BindingConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            free_box_halfwidth: None,
            free_grid_points: None,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub states: usize,
    pub orbitals: usize,
    pub hardy_epsilon: f64,
    pub c_lt: f64,
    /// Solve the free problem for `J₁^∞` and include the GNS margin.
    pub gns: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            states: 100,
            orbitals: 3,
            hardy_epsilon: 1.0,
            c_lt: LIEB_THIRRING_CONSTANT,
            gns: true,
        }
    }
}

/// Configuration with every default made explicit, plus the objects built
/// from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: RunConfig,
    pub params: ModelParams,
    pub options: SolveOptions,
}

impl RunConfig {
    /// Fills defaults and validates; the returned config echoes every value
    /// actually used.
    pub fn resolve(&self) -> Result<Resolved> {
        let mut config = self.clone();
        let stencil = Stencil::from_order(config.solver.stencil_order)
            .map_err(|_| FnlsError::Validation(format!("stencil_order must be 2 or 4, got {}", config.solver.stencil_order)))?;
        // Validate p before anything uses it to size a box.
        crate::model::check_exponent(config.p)
            .map_err(|_| FnlsError::Validation(format!("p outside (1, 5/3): {}", config.p)))?;
        if !(config.alpha > 0.0 && config.alpha.is_finite()) {
            return Err(FnlsError::Validation(format!("alpha must be positive: {}", config.alpha)));
        }
        if !(config.lambda > 0.0 && config.lambda.is_finite()) {
            return Err(FnlsError::Validation(format!("lambda must be positive: {}", config.lambda)));
        }
        let l = match config.box_halfwidth {
            Some(l) => l,
            None => auto_half_width(config.p, config.alpha, config.lambda, &config.centers),
        };
        let grid = Grid3D::new(l, config.grid_points).map_err(|e| FnlsError::Validation(e.to_string()))?;
        let softening = config.softening.unwrap_or(grid.spacing());
        let params = ModelParams::new(config.p, config.alpha, config.lambda, config.centers.clone(), grid)?
            .with_softening(softening)?
            .with_stencil(stencil);
        let s = &config.solver;
        if !(s.tol > 0.0 && s.eigen_tol > 0.0) {
            return Err(FnlsError::Validation("solver tolerances must be positive".into()));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(FnlsError::Validation(format!("damping must lie in (0, 1], got {}", s.damping)));
        }
        if s.max_iters == 0 || s.multistart == 0 {
            return Err(FnlsError::Validation("max_iters and multistart must be positive".into()));
        }
        if config.threads == Some(0) {
            return Err(FnlsError::Validation("threads must be positive".into()));
        }
        let options = SolveOptions {
            tol: s.tol,
            max_iters: s.max_iters,
            damping: s.damping,
            eigen_tol: s.eigen_tol,
            seed: config.seed,
            multistart: s.multistart,
            anderson: s.anderson,
        };
        config.box_halfwidth = Some(l);
        config.softening = Some(softening);
        Ok(Resolved {
            config,
            params,
            options,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses configuration text. Syntax and schema errors carry line and column.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    serde_json::from_str(text).map_err(|e| FnlsError::Parse(e.to_string()))
}

/// Reads, parses and resolves a configuration file.
pub fn parse_config(path: &Path) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)?.resolve()
}
