//! Error norms, experimental orders of convergence and mass-balance auditing
//! over whole-network states.

use crate::network::NetworkState;
use crate::scheme::StepReport;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("states live on different grids (edge count or cell count mismatch)")]
    GridMismatch,
    #[error("state carries no auxiliary arrays")]
    MissingAuxiliary,
    #[error("need one error value per parameter: {parameters} parameters, {errors} errors")]
    LengthMismatch { parameters: usize, errors: usize },
}

/// Discrete L1 distance of the `u` fields: `dx * sum |u_a - u_b|` over all
/// edges and cells.
pub fn l1_error(a: &NetworkState, b: &NetworkState) -> Result<f64, AnalysisError> {
    l1_of(a, b, |es| Some(&es.u))
}

/// Discrete L1 distance of the auxiliary fields; both states must carry them.
pub fn l1_error_v(a: &NetworkState, b: &NetworkState) -> Result<f64, AnalysisError> {
    if !(a.has_auxiliary() && b.has_auxiliary()) {
        return Err(AnalysisError::MissingAuxiliary);
    }
    l1_of(a, b, |es| es.v.as_deref())
}

fn l1_of(
    a: &NetworkState,
    b: &NetworkState,
    field: impl Fn(&crate::network::EdgeState) -> Option<&[f64]>,
) -> Result<f64, AnalysisError> {
    if a.edges.len() != b.edges.len() {
        return Err(AnalysisError::GridMismatch);
    }
    let mut total = 0.0;
    for (ea, eb) in a.edges.iter().zip(&b.edges) {
        let (xa, xb) = (
            field(ea).ok_or(AnalysisError::MissingAuxiliary)?,
            field(eb).ok_or(AnalysisError::MissingAuxiliary)?,
        );
        if xa.len() != xb.len() {
            return Err(AnalysisError::GridMismatch);
        }
        let dx = 1.0 / xa.len() as f64;
        total += dx * xa.iter().zip(xb).map(|(p, q)| (p - q).abs()).sum::<f64>();
    }
    Ok(total)
}

/// Experimental orders of convergence for decade-spaced parameters:
/// `eoc[k] = log10(E_{k-1} / E_k)`. The first entry and entries next to a
/// non-positive error are undefined.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for k in 1..errors.len() {
        if errors[k - 1] > 0.0 && errors[k] > 0.0 {
            out[k] = Some((errors[k - 1] / errors[k]).log10());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub parameter: f64,
    pub l1_error: f64,
    pub eoc: Option<f64>,
}

/// Convergence table over a parameter sweep (epsilon or dx).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn from_errors(parameters: &[f64], errors: &[f64]) -> Result<Self, AnalysisError> {
        if parameters.len() != errors.len() {
            return Err(AnalysisError::LengthMismatch {
                parameters: parameters.len(),
                errors: errors.len(),
            });
        }
        let orders = eoc(errors);
        Ok(Self {
            rows: parameters
                .iter()
                .zip(errors)
                .zip(orders)
                .map(|((&parameter, &l1_error), eoc)| ErrorRow {
                    parameter,
                    l1_error,
                    eoc,
                })
                .collect(),
        })
    }

    /// CSV with columns `parameter,l1_error,eoc`; numbers in full-precision
    /// scientific notation, undefined EOC entries left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "parameter,l1_error,eoc")?;
        for row in &self.rows {
            match row.eoc {
                Some(eoc) => writeln!(out, "{:e},{:e},{:e}", row.parameter, row.l1_error, eoc)?,
                None => writeln!(out, "{:e},{:e},", row.parameter, row.l1_error)?,
            }
        }
        Ok(())
    }
}

/// Result of auditing a trajectory of step reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassAudit {
    pub steps: usize,
    pub max_defect: f64,
    pub pass: bool,
}

/// Checks the per-step identity `mass_after = mass_before - dt * outflux`
/// over a whole run; passes when the largest defect stays below
/// `1e-11 * (initial mass + 1)`.
pub fn mass_balance_audit(reports: &[StepReport]) -> MassAudit {
    let max_defect = reports
        .iter()
        .map(|r| {
            let outflux: f64 = r.boundary_outflux.iter().sum();
            (r.mass_after - r.mass_before + r.dt * outflux).abs()
        })
        .fold(0.0, f64::max);
    let initial_mass = reports.first().map_or(0.0, |r| r.mass_before);
    MassAudit {
        steps: reports.len(),
        max_defect,
        pass: max_defect <= 1e-11 * (initial_mass + 1.0),
    }
}
