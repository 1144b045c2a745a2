//! Structured text documents written by the commands.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use rendezvous_core::synthesis::{Bound, SynthesisReport};

use crate::scenario::matrix_to_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDoc {
    pub controller: String,
    /// `rho` (cost bound) or `gamma` (H∞ level).
    pub bound_kind: String,
    pub bound: f64,
    pub solver_status: String,
    pub iterations: usize,
    pub epsilon: f64,
    pub certificate_max_eigenvalue: f64,
    pub k: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub verification: VerificationDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationDoc {
    pub nominal_spectral_abscissa: f64,
    pub worst_spectral_abscissa: f64,
    pub grid_rad: Vec<f64>,
    pub lmi_residuals: Vec<Residual>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Residual {
    pub constraint: String,
    pub max_eigenvalue: f64,
}

impl ReportDoc {
    pub fn new(controller: &str, r: &SynthesisReport<f64>) -> Self {
        let (bound_kind, bound) = match r.bound {
            Bound::Cost(v) => ("rho", v),
            Bound::Hinf(v) => ("gamma", v),
        };
        Self {
            controller: controller.into(),
            bound_kind: bound_kind.into(),
            bound,
            solver_status: format!("{:?}", r.status),
            iterations: r.iterations,
            epsilon: r.epsilon,
            certificate_max_eigenvalue: r.certificate_max_eigenvalue,
            k: matrix_to_rows(&r.k),
            x: matrix_to_rows(&r.x),
            y: matrix_to_rows(&r.y),
            verification: VerificationDoc {
                nominal_spectral_abscissa: r.verification.nominal_abscissa,
                worst_spectral_abscissa: r.verification.worst_abscissa,
                grid_rad: r.verification.grid.clone(),
                lmi_residuals: r
                    .verification
                    .lmi_residuals
                    .iter()
                    .map(|(n, v)| Residual { constraint: n.clone(), max_eigenvalue: *v })
                    .collect(),
            },
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Matrix as a bracketed literal, rows on separate lines.
pub fn matrix_literal(m: &nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = m.row(i).iter().map(|v| format!("{v:.6e}")).collect();
            format!("  [{}]", cells.join(", "))
        })
        .collect();
    format!("[\n{}\n]", rows.join(",\n"))
}
