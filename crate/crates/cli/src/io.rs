//! Serialization owned by the CLI: result CSVs, covariance JSON blobs, and
//! the per-level sample CSV format with its companion manifest.
//!
//! Floats in CSVs carry 17 significant digits so a file round-trips
//! losslessly; non-finite values are the lowercase tokens `inf`, `-inf`, and
//! `nan`.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use mfcov_core::{CoupledSampleHierarchy, SymmetricMatrix};

use crate::error::CliError;

/// Lossless lowercase float formatting for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)
                        .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
                }
            }
            std::fs::write(p, text).map_err(|e| CliError::io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Pretty-printed JSON with a trailing newline (stable across reruns).
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Covariance estimate blob emitted by `estimate` and accepted as a stored
/// reference by `bench`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceBlob {
    pub estimator: String,
    pub dim: usize,
    /// Row-major dense entries.
    pub entries: Vec<Vec<f64>>,
    pub lambda_min: f64,
    pub spd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_cost: Option<f64>,
    /// Frobenius gap to the barycenter-form recomputation, present when the
    /// cross-check was requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frechet_gap: Option<f64>,
}

impl CovarianceBlob {
    pub fn matrix(&self) -> Result<SymmetricMatrix, CliError> {
        if self.entries.len() != self.dim || self.entries.iter().any(|r| r.len() != self.dim) {
            return Err(CliError::numeric(
                "covariance blob entries do not match dim",
            ));
        }
        SymmetricMatrix::new(DMatrix::from_fn(self.dim, self.dim, |i, j| {
            self.entries[i][j]
        }))
        .map_err(CliError::from)
    }

    pub fn from_matrix(estimator: &str, m: &SymmetricMatrix, lambda_min: f64) -> Self {
        let d = m.dim();
        let entries = (0..d)
            .map(|i| (0..d).map(|j| m.entries()[(i, j)]).collect())
            .collect();
        CovarianceBlob {
            estimator: estimator.to_string(),
            dim: d,
            entries,
            lambda_min,
            spd: lambda_min > 0.0,
            realized_cost: None,
            frechet_gap: None,
        }
    }
}

/// One level entry of a sample manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestLevel {
    /// CSV path, relative to the manifest file.
    pub path: PathBuf,
    pub cost: f64,
    /// Number of samples; also the length of the event prefix this level
    /// shares with every other level.
    pub coupled_prefix: u64,
}

/// Companion manifest of a set of per-level sample CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleManifest {
    pub dim: usize,
    /// Levels in fidelity order (level 0 first).
    pub levels: Vec<ManifestLevel>,
}

/// Writes one CSV per level plus `manifest.json` into `dir`.
pub fn write_samples(
    dir: &Path,
    hierarchy: &CoupledSampleHierarchy,
    costs: &[f64],
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    let mut levels = Vec::new();
    for l in 0..hierarchy.num_levels() {
        let name = PathBuf::from(format!("level_{l}.csv"));
        let m = hierarchy.level(l);
        let mut text = String::new();
        for j in 0..m.ncols() {
            let row: Vec<String> = (0..m.nrows()).map(|i| fmt_f64(m[(i, j)])).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        std::fs::write(dir.join(&name), text)
            .map_err(|e| CliError::io(format!("{}: {e}", dir.join(&name).display())))?;
        levels.push(ManifestLevel {
            path: name,
            cost: costs[l],
            coupled_prefix: m.ncols() as u64,
        });
    }
    let manifest = SampleManifest {
        dim: hierarchy.dim(),
        levels,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, to_json_string(&manifest)?)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Loads a hierarchy (and its per-level costs) from a manifest.
pub fn read_samples(manifest_path: &Path) -> Result<(CoupledSampleHierarchy, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| CliError::io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: SampleManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", manifest_path.display())))?;
    if manifest.levels.is_empty() {
        return Err(CliError::config("manifest: levels must be nonempty"));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut levels = Vec::new();
    let mut costs = Vec::new();
    for level in manifest.levels.iter() {
        let path = base.join(&level.path);
        let csv = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut cols: Vec<f64> = Vec::new();
        let mut rows = 0usize;
        for (lineno, line) in csv.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> =
                line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| {
                CliError::config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            if vals.len() != manifest.dim {
                return Err(CliError::config(format!(
                    "{}:{}: {} columns, expected {}",
                    path.display(),
                    lineno + 1,
                    vals.len(),
                    manifest.dim
                )));
            }
            cols.extend(vals);
            rows += 1;
        }
        if rows as u64 != level.coupled_prefix {
            return Err(CliError::config(format!(
                "{}: {} rows but manifest says coupled_prefix = {}",
                path.display(),
                rows,
                level.coupled_prefix
            )));
        }
        // samples are rows in the file, columns in the matrix
        let m = DMatrix::from_fn(manifest.dim, rows, |i, j| cols[j * manifest.dim + i]);
        levels.push(m);
        costs.push(level.cost);
    }
    let hierarchy = CoupledSampleHierarchy::new(levels).map_err(CliError::from)?;
    Ok((hierarchy, costs))
}

/// Appends one CSV row of already-formatted cells.
pub fn push_csv_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// Sibling path carrying the per-cell summary of a bench/metric CSV.
pub fn summary_path(main: &Path) -> PathBuf {
    let stem = main
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".to_string());
    let ext = main
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    main.with_file_name(format!("{stem}_summary.{ext}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_tokens_are_lowercase_and_lossless() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        let x = 0.1 + 0.2;
        let parsed: f64 = fmt_f64(x).parse().unwrap();
        assert_eq!(parsed, x);
    }

    #[test]
    fn summary_path_is_a_sibling() {
        let p = summary_path(Path::new("runs/out.csv"));
        assert_eq!(p, Path::new("runs/out_summary.csv"));
    }
}
