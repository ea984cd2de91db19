//! CSV rows emitted by the run pipelines.

use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticsRecord;
use crate::energy::EnergyBreakdown;
use crate::error::{FnlsError, Result};
use crate::inequalities::MarginRecord;
use crate::solvers::{BindingReport, CurvePoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub p: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub total: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl EnergyRow {
    pub fn new(p: f64, alpha: f64, lambda: f64, e: &EnergyBreakdown, iterations: usize, residual: f64) -> Self {
        Self {
            p,
            alpha,
            lambda,
            kinetic: e.kinetic,
            potential: e.potential,
            nonlinear: e.nonlinear,
            total: e.total,
            iterations,
            residual,
        }
    }

    pub fn from_curve(p: f64, alpha: f64, point: &CurvePoint) -> Self {
        let nan = EnergyBreakdown {
            kinetic: f64::NAN,
            potential: f64::NAN,
            nonlinear: f64::NAN,
            total: f64::NAN,
        };
        Self::new(p, alpha, point.lambda, point.energy.as_ref().unwrap_or(&nan), point.iterations, point.residual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub epsilon: f64,
    pub energy_scaled: f64,
    pub gap: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub z_z: f64,
    pub dist_to_center: f64,
    pub decay_rate: f64,
    pub profile_linf_err: f64,
    pub kinetic_scaled: f64,
    pub nonlinear_scaled: f64,
    /// `ε²μᵢ`, separated by `;`.
    pub eigenvalues_scaled: String,
    pub truncation_bound: f64,
    pub converged: bool,
    pub iterations: usize,
    pub error: String,
}

impl From<&AsymptoticsRecord> for SweepRow {
    fn from(r: &AsymptoticsRecord) -> Self {
        Self {
            alpha: r.alpha,
            epsilon: r.epsilon,
            energy_scaled: r.energy_scaled,
            gap: r.gap,
            z_x: r.z[0],
            z_y: r.z[1],
            z_z: r.z[2],
            dist_to_center: r.dist_to_center,
            decay_rate: r.decay_rate,
            profile_linf_err: r.profile_linf_err,
            kinetic_scaled: r.kinetic_scaled,
            nonlinear_scaled: r.nonlinear_scaled,
            eigenvalues_scaled: r
                .eigenvalues_scaled
                .iter()
                .map(|v| format!("{v:e}"))
                .collect::<Vec<_>>()
                .join(";"),
            truncation_bound: r.truncation_bound,
            converged: r.converged,
            iterations: r.iterations,
            error: r.error.clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub combined: f64,
    pub bound: f64,
    pub free: f64,
    pub margin: f64,
    pub binds: bool,
    pub converged: bool,
}

impl From<&BindingReport> for BindingRow {
    fn from(r: &BindingReport) -> Self {
        Self {
            lambda1: r.lambda1,
            lambda2: r.lambda2,
            combined: r.combined,
            bound: r.bound,
            free: r.free,
            margin: r.margin,
            binds: r.binds(),
            converged: r.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub inequality: String,
    pub seed: u64,
    pub margin: f64,
}

impl From<&MarginRecord> for MarginRow {
    fn from(r: &MarginRecord) -> Self {
        Self {
            inequality: r.inequality.name().to_string(),
            seed: r.seed,
            margin: r.margin,
        }
    }
}

/// Rows as CSV bytes with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| FnlsError::Io(std::io::Error::other(e.to_string())))
}

/// Parses CSV bytes written by [`to_csv`].
pub fn from_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_error)
}

fn csv_error(e: csv::Error) -> FnlsError {
    FnlsError::Parse(e.to_string())
}
