//! Artifact writers: lossless CSV matrices and JSON reports, plus rounded
//! human-readable tables.

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Formats a float with 17 significant digits, enough to round-trip `f64`.
pub fn lossless(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn matrix_rows(matrix: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..matrix.nrows())
        .map(|i| (0..matrix.ncols()).map(|j| matrix[(i, j)]).collect())
        .collect()
}

pub fn vector_entries(vector: &DVector<f64>) -> Vec<f64> {
    vector.iter().cloned().collect()
}

pub struct OutputWriter {
    directory: PathBuf,
    pub write_csv: bool,
    precision: usize,
}

impl OutputWriter {
    pub fn new(directory: &Path, format: &str, precision: usize) -> Result<Self, CliError> {
        let write_csv = match format {
            "csv" => true,
            "json" => false,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown output format `{other}` (expected csv or json)"
                )))
            }
        };
        std::fs::create_dir_all(directory)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", directory.display())))?;
        Ok(Self {
            directory: directory.to_owned(),
            write_csv,
            precision,
        })
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        let path = self.directory.join(name);
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("serialize {name}: {e}")))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_matrix_csv(&self, name: &str, matrix: &DMatrix<f64>) -> Result<PathBuf, CliError> {
        let path = self.directory.join(name);
        let mut out = String::new();
        for i in 0..matrix.nrows() {
            let row: Vec<String> = (0..matrix.ncols()).map(|j| lossless(matrix[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(&path, out)
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn write_profile_csv(
        &self,
        name: &str,
        k: usize,
        points: &[(Vec<f64>, f64)],
    ) -> Result<PathBuf, CliError> {
        let path = self.directory.join(name);
        let mut out = String::new();
        let header: Vec<String> = (1..=k)
            .map(|d| format!("theta_{d}"))
            .chain(std::iter::once("objective".to_owned()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (theta, objective) in points {
            let row: Vec<String> = theta
                .iter()
                .map(|v| lossless(*v))
                .chain(std::iter::once(lossless(*objective)))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(&path, out)
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        Ok(path)
    }

    pub fn print_matrix(&self, label: &str, matrix: &DMatrix<f64>) {
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "{label}:");
        for i in 0..matrix.nrows() {
            let row: Vec<String> = (0..matrix.ncols())
                .map(|j| format!("{:>width$.prec$}", matrix[(i, j)], width = self.precision + 7, prec = self.precision))
                .collect();
            let _ = writeln!(stdout, "  [{}]", row.join(", "));
        }
    }

    pub fn print_vector(&self, label: &str, vector: &DVector<f64>) {
        let row: Vec<String> = vector
            .iter()
            .map(|v| format!("{:.prec$}", v, prec = self.precision))
            .collect();
        println!("{label}: [{}]", row.join(", "));
    }
}

pub fn json_matrix(matrix: &DMatrix<f64>) -> Value {
    json!(matrix_rows(matrix))
}

pub fn json_vector(vector: &DVector<f64>) -> Value {
    json!(vector_entries(vector))
}
