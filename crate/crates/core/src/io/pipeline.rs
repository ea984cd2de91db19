//! The run pipelines behind each subcommand.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde_json::json;

use super::config::{Method, Resolved, SpectrumDensity};
use super::manifest::{artifact, read_manifest, Artifact, OperationSummary, RunManifest, StateRecord};
use super::tables::{to_csv, BindingRow, EnergyRow, MarginRow, SweepRow};
use crate::asymptotics::{default_free_grid, default_sweep_grid, sweep_alpha, FreeReference, SweepSettings, SweepSummary};
use crate::eigensolver::{lowest_eigenpairs, SpectrumResult};
use crate::energy::{evaluate_energy, EnergyBreakdown};
use crate::error::{FnlsError, Result};
use crate::inequalities::{run_ensemble, EnsembleSettings, Inequality};
use crate::lattice::dump::{encode_field, read_field};
use crate::lattice::Grid3D;
use crate::model::{density_of, Density, ModelParams, OrbitalSet};
use crate::solvers::{
    binding_check, default_initial_state, energy_curve, minimize_scf_with, multistart, solve_free_with, SolveReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SolveFree,
    Spectrum,
    SweepAlpha,
    Curve,
    Binding,
    Check,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Solve,
        Command::SolveFree,
        Command::Spectrum,
        Command::SweepAlpha,
        Command::Curve,
        Command::Binding,
        Command::Check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SolveFree => "solve-free",
            Command::Spectrum => "spectrum",
            Command::SweepAlpha => "sweep-alpha",
            Command::Curve => "curve",
            Command::Binding => "binding",
            Command::Check => "check",
        }
    }
}

impl FromStr for Command {
    type Err = FnlsError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| FnlsError::Validation(format!("unknown command {s}")))
    }
}

/// What a pipeline produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// False when a solver stopped short of its tolerance.
    pub converged: bool,
}

pub const MANIFEST_NAME: &str = "manifest.json";

struct RunDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        self.artifacts.push(artifact(name, bytes));
        Ok(())
    }

    /// Dumps each orbital and the density; returns the record of the state.
    fn write_state(&mut self, prefix: &str, state: &OrbitalSet, free: bool) -> Result<StateRecord> {
        let mut names = Vec::with_capacity(state.len());
        for (i, u) in state.orbitals().iter().enumerate() {
            let name = format!("{prefix}orbital_{i:03}.fld");
            self.write(&name, &encode_field(u))?;
            names.push(name);
        }
        self.write(&format!("{prefix}density.fld"), &encode_field(&density_of(state).rho))?;
        Ok(StateRecord {
            orbitals: names,
            occupations: state.occupations().to_vec(),
            free,
        })
    }
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs `command` with a resolved configuration, writing into `out`.
pub fn run(command: Command, resolved: &Resolved, out: &Path) -> Result<RunOutcome> {
    let started = timestamp();
    let mut dir = RunDir::create(out)?;
    info!("{} -> {}", command.name(), out.display());
    let operations = match command {
        Command::Solve => run_solve(resolved, &mut dir)?,
        Command::SolveFree => run_solve_free(resolved, &mut dir)?,
        Command::Spectrum => run_spectrum(resolved, &mut dir)?,
        Command::SweepAlpha => run_sweep(resolved, &mut dir)?,
        Command::Curve => run_curve(resolved, &mut dir)?,
        Command::Binding => run_binding(resolved, &mut dir)?,
        Command::Check => run_check(resolved, &mut dir)?,
    };
    let converged = operations.iter().all(|o| o.converged);
    let manifest = RunManifest {
        tool: "fnls".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config: resolved.config.clone(),
        seed: resolved.options.seed,
        started,
        finished: timestamp(),
        operations,
        artifacts: dir.artifacts,
    };
    std::fs::write(out.join(MANIFEST_NAME), manifest.to_json())?;
    Ok(RunOutcome { manifest, converged })
}

fn ground_state(resolved: &Resolved) -> Result<SolveReport> {
    let params = &resolved.params;
    let opts = &resolved.options;
    match resolved.config.solver.method {
        Method::Direct => multistart(params, opts).map(|(r, _)| r),
        Method::Scf => {
            let init = default_initial_state(params, opts.seed)?;
            minimize_scf_with(params, &init, opts)
        }
    }
}

fn summarize(name: &str, rep: &SolveReport, state: StateRecord) -> OperationSummary {
    OperationSummary {
        name: name.into(),
        converged: rep.converged,
        status: serde_json::to_value(rep.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
        iterations: rep.iterations,
        residual: Some(rep.residual),
        energy: Some(rep.energy),
        state: Some(state),
        detail: json!({
            "stationarity": finite(rep.stationarity),
            "eigenvalues": rep.spectrum.eigenvalues,
            "concentration_point": rep.concentration_point,
        }),
    }
}

fn finite(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn energy_row(params: &ModelParams, rep: &SolveReport) -> EnergyRow {
    EnergyRow::new(params.p, params.alpha, params.lambda, &rep.energy, rep.iterations, rep.residual)
}

fn run_solve(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let rep = ground_state(resolved)?;
    dir.write("energies.csv", &to_csv(&[energy_row(&resolved.params, &rep)])?)?;
    dir.write("spectrum.csv", rep.spectrum.to_csv().as_bytes())?;
    let state = dir.write_state("", &rep.state, false)?;
    Ok(vec![summarize("solve", &rep, state)])
}

fn run_solve_free(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let params = resolved.params.free();
    let init = default_initial_state(&params, resolved.options.seed)?;
    let rep = solve_free_with(&params, &init, &resolved.options)?;
    dir.write("energies.csv", &to_csv(&[energy_row(&params, &rep)])?)?;
    dir.write("spectrum.csv", rep.spectrum.to_csv().as_bytes())?;
    let state = dir.write_state("", &rep.state, true)?;
    Ok(vec![summarize("solve-free", &rep, state)])
}

fn run_spectrum(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let cfg = resolved.config.spectrum.clone().unwrap_or_default();
    if cfg.count == 0 {
        return Err(FnlsError::Validation("spectrum count must be positive".into()));
    }
    let params = &resolved.params;
    let mut ops = Vec::new();
    let density = match cfg.density {
        SpectrumDensity::Zero => Density::zero(params.grid),
        SpectrumDensity::GroundState => {
            let rep = ground_state(resolved)?;
            let state = dir.write_state("", &rep.state, false)?;
            ops.push(summarize("solve", &rep, state));
            density_of(&rep.state)
        }
    };
    let (spec, converged): (SpectrumResult, bool) =
        match lowest_eigenpairs(&density, params, cfg.count, resolved.options.eigen_tol, resolved.options.seed) {
            Ok(s) => (s, true),
            Err(FnlsError::NoConvergence { best, .. }) => (*best, false),
            Err(e) => return Err(e),
        };
    dir.write("spectrum.csv", spec.to_csv().as_bytes())?;
    let mut op = OperationSummary::new("spectrum");
    op.converged = converged;
    op.status = if converged { "converged" } else { "max_iterations" }.into();
    op.iterations = spec.iterations;
    op.residual = Some(spec.max_residual());
    op.detail = json!({ "eigenvalues": spec.eigenvalues, "unbound": spec.unbound_flags() });
    ops.push(op);
    Ok(ops)
}

fn free_grid(resolved: &Resolved, alpha: f64, lambda: f64, l: Option<f64>, points: Option<usize>) -> Result<Grid3D> {
    let c = &resolved.config;
    let points = points.unwrap_or(c.grid_points);
    match l {
        Some(l) => Grid3D::new(l, points),
        None => default_free_grid(c.p, alpha, lambda, points),
    }
    .map_err(|e| FnlsError::Validation(e.to_string()))
}

fn run_sweep(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let cfg = resolved
        .config
        .sweep
        .clone()
        .ok_or_else(|| FnlsError::Validation("sweep-alpha needs a sweep block with alphas".into()))?;
    if cfg.alphas.len() < 3 {
        return Err(FnlsError::Validation(format!(
            "sweep needs at least 3 alphas, got {}",
            cfg.alphas.len()
        )));
    }
    let params = &resolved.params;
    let points = cfg.grid_points.unwrap_or(resolved.config.grid_points);
    let grid = match cfg.box_halfwidth {
        Some(l) => Grid3D::new(l, points).map_err(|e| FnlsError::Validation(e.to_string()))?,
        None => default_sweep_grid(params, &cfg.alphas, points)?,
    };
    let ref_grid = free_grid(resolved, 1.0, params.lambda, cfg.reference_box_halfwidth, cfg.reference_grid_points)?;
    let reference = FreeReference::solve(params.p, params.lambda, ref_grid, params.stencil, &resolved.options)?;
    let settings = SweepSettings {
        grid,
        center_index: cfg.center_index,
        solve: resolved.options,
        decay_window: cfg.decay_window,
    };
    let records = sweep_alpha(params, &cfg.alphas, &settings, &reference)?;
    let rows: Vec<SweepRow> = records.iter().map(SweepRow::from).collect();
    dir.write("sweep.csv", &to_csv(&rows)?)?;
    let summary = SweepSummary::from_records(&records, &reference);
    let summary_json = json!({
        "reference_energy": reference.energy,
        "reference_eigenvalues": reference.eigenvalues,
        "reference_converged": reference.converged,
        "blown_up_half_width": grid.half_width(),
        "blown_up_points": grid.points(),
        "summary": summary,
    });
    dir.write("sweep_summary.json", serde_json::to_string_pretty(&summary_json)?.as_bytes())?;
    let mut op = OperationSummary::new("sweep-alpha");
    op.converged = reference.converged && records.iter().all(|r| r.is_ok() && r.converged);
    op.status = if op.converged { "converged" } else { "incomplete" }.into();
    op.iterations = records.iter().map(|r| r.iterations).sum();
    op.detail = json!({
        "points": records.len(),
        "gap_exponent": summary.gap_fit.map(|f| f.exponent),
        "max_dist_ratio": finite(summary.max_dist_ratio),
    });
    Ok(vec![op])
}

fn run_curve(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let cfg = resolved
        .config
        .curve
        .clone()
        .ok_or_else(|| FnlsError::Validation("curve needs a curve block with lambdas".into()))?;
    let params = &resolved.params;
    let points = energy_curve(params, &cfg.lambdas, &resolved.options)?;
    let rows: Vec<EnergyRow> = points.iter().map(|pt| EnergyRow::from_curve(params.p, params.alpha, pt)).collect();
    dir.write("energies.csv", &to_csv(&rows)?)?;
    let mut op = OperationSummary::new("curve");
    op.converged = points.iter().all(|pt| pt.converged);
    op.status = if op.converged { "converged" } else { "incomplete" }.into();
    op.iterations = points.iter().map(|pt| pt.iterations).sum();
    op.detail = json!({ "errors": points.iter().filter_map(|pt| pt.error.clone()).collect::<Vec<_>>() });
    Ok(vec![op])
}

fn run_binding(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let cfg = resolved.config.binding.clone().unwrap_or_default();
    let params = &resolved.params;
    let grid = free_grid(resolved, params.alpha, cfg.lambda2, cfg.free_box_halfwidth, cfg.free_grid_points)?;
    let report = binding_check(params, cfg.lambda1, cfg.lambda2, grid, &resolved.options)?;
    dir.write("binding.csv", &to_csv(&[BindingRow::from(&report)])?)?;
    let mut op = OperationSummary::new("binding");
    op.converged = report.converged;
    op.status = if report.converged { "converged" } else { "incomplete" }.into();
    op.detail = json!({ "margin": report.margin, "binds": report.binds() });
    Ok(vec![op])
}

fn run_check(resolved: &Resolved, dir: &mut RunDir) -> Result<Vec<OperationSummary>> {
    let cfg = resolved.config.check.clone().unwrap_or_default();
    let params = &resolved.params;
    let mut ops = Vec::new();
    let gns = if cfg.gns {
        let n = cfg.orbitals as f64;
        let grid = free_grid(resolved, 1.0, n, None, None)?;
        let free = ModelParams::new(params.p, 1.0, n, Vec::new(), grid)?.with_stencil(params.stencil);
        let init = default_initial_state(&free, resolved.options.seed)?;
        let rep = solve_free_with(&free, &init, &resolved.options)?;
        let mut op = OperationSummary::new("free-reference");
        op.converged = rep.converged;
        op.iterations = rep.iterations;
        op.energy = Some(rep.energy);
        ops.push(op);
        Some((params.p, rep.energy.total))
    } else {
        None
    };
    let settings = EnsembleSettings {
        states: cfg.states,
        orbitals: cfg.orbitals,
        seed: resolved.options.seed,
        hardy_epsilon: cfg.hardy_epsilon,
        c_lt: cfg.c_lt,
        stencil: params.stencil,
        gns,
    };
    let report = run_ensemble(params.grid, &settings)?;
    let rows: Vec<MarginRow> = report.records.iter().map(MarginRow::from).collect();
    dir.write("check.csv", &to_csv(&rows)?)?;
    let worst = |w: Inequality| report.worst(w).map(finite).unwrap_or(serde_json::Value::Null);
    let summary = json!({
        "empirical_lt_constant": report.empirical_lt_constant,
        "c_lt": cfg.c_lt,
        "worst_hardy": worst(Inequality::Hardy),
        "worst_lieb_thirring": worst(Inequality::LiebThirring),
        "worst_hoffmann_ostenhof": worst(Inequality::HoffmannOstenhof),
        "worst_gns": worst(Inequality::Gns),
        "gns_free_energy": gns.map(|g| g.1),
    });
    dir.write("check_summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    let mut op = OperationSummary::new("check");
    op.detail = summary;
    ops.push(op);
    Ok(ops)
}

/// Outcome of re-checking a run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checksum_failures: Vec<String>,
    /// `(operation, recorded, recomputed)` for every state whose energy
    /// differs by more than the tolerance.
    pub energy_mismatches: Vec<(String, EnergyBreakdown, EnergyBreakdown)>,
    pub states_checked: usize,
    pub max_deviation: f64,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checksum_failures.is_empty() && self.energy_mismatches.is_empty()
    }
}

/// Tolerance on recomputed energies, relative to `max(1, |E|)`.
pub const VERIFY_TOL: f64 = 1e-12;

/// Checks the artifacts of the run in `dir` against its manifest and
/// recomputes every recorded energy from the field dumps.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let manifest = read_manifest(&dir.join(MANIFEST_NAME))?;
    let checksum_failures = manifest.verify_checksums(dir);
    let resolved = manifest.config.resolve()?;
    let mut mismatches = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut checked = 0;
    for (op, rec) in manifest.states() {
        let Some(recorded) = op.energy else { continue };
        let orbitals = rec
            .orbitals
            .iter()
            .map(|name| read_field(&dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        let state = OrbitalSet::new(orbitals, rec.occupations.clone())?;
        let mut params = if rec.free { resolved.params.free() } else { resolved.params.clone() };
        if state.grid() != &params.grid {
            params = params.with_grid(*state.grid())?;
        }
        let e = evaluate_energy(&state, &params)?;
        let scale = recorded.total.abs().max(1.0);
        let dev = [
            e.kinetic - recorded.kinetic,
            e.potential - recorded.potential,
            e.nonlinear - recorded.nonlinear,
            e.total - recorded.total,
        ]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
            / scale;
        max_dev = max_dev.max(dev);
        checked += 1;
        if !(dev <= VERIFY_TOL) {
            mismatches.push((op.name.clone(), recorded, e));
        }
    }
    Ok(VerifyReport {
        checksum_failures,
        energy_mismatches: mismatches,
        states_checked: checked,
        max_deviation: max_dev,
    })
}
