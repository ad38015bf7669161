//! Named, reproducible experiment drivers binding fields, methods, and
//! checks together, with CSV and JSON reporting.

mod registry;

pub use registry::{expected_verdict, experiment_names, run_named};

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldDescriptor;
use crate::sampling::DEFAULT_SEED;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_preserve_tol() -> f64 {
    1e-10
}

fn default_violate_tol() -> f64 {
    1e-8
}

/// Flat experiment configuration; every field has a per-experiment default
/// and can be overridden from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub field: Option<FieldDescriptor>,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub n_steps: Option<usize>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_preserve_tol")]
    pub preserve_tol: f64,
    #[serde(default = "default_violate_tol")]
    pub violate_tol: f64,
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        ExperimentConfig {
            experiment: experiment.to_string(),
            field: None,
            method: None,
            h: None,
            h_grid: None,
            x0: None,
            n_steps: None,
            samples: None,
            seed: DEFAULT_SEED,
            preserve_tol: default_preserve_tol(),
            violate_tol: default_violate_tol(),
        }
    }

    /// Verdict hysteresis requires preserve_tol < violate_tol.
    pub fn validate(&self) -> Result<()> {
        if !(self.preserve_tol < self.violate_tol) {
            return Err(Error::BadConfig(format!(
                "preserve_tol ({}) must be strictly below violate_tol ({})",
                self.preserve_tol, self.violate_tol
            )));
        }
        if self.preserve_tol <= 0.0 {
            return Err(Error::BadConfig("preserve_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, overrides: &ConfigOverrides) {
        if let Some(v) = &overrides.field {
            self.field = Some(v.clone());
        }
        if let Some(v) = &overrides.method {
            self.method = Some(v.clone());
        }
        if let Some(v) = overrides.h {
            self.h = Some(v);
        }
        if let Some(v) = &overrides.h_grid {
            self.h_grid = Some(v.clone());
        }
        if let Some(v) = &overrides.x0 {
            self.x0 = Some(v.clone());
        }
        if let Some(v) = overrides.n_steps {
            self.n_steps = Some(v);
        }
        if let Some(v) = overrides.samples {
            self.samples = Some(v);
        }
        if let Some(v) = overrides.seed {
            self.seed = v;
        }
        if let Some(v) = overrides.preserve_tol {
            self.preserve_tol = v;
        }
        if let Some(v) = overrides.violate_tol {
            self.violate_tol = v;
        }
    }
}

/// Partial configuration parsed from a user JSON file.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ConfigOverrides {
    pub field: Option<FieldDescriptor>,
    pub method: Option<String>,
    pub h: Option<f64>,
    pub h_grid: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub n_steps: Option<usize>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub preserve_tol: Option<f64>,
    pub violate_tol: Option<f64>,
}

impl ConfigOverrides {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PRESERVED")]
    Preserved,
    #[serde(rename = "VIOLATED")]
    Violated,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

impl Verdict {
    pub fn from_deviation(dev: f64, preserve_tol: f64, violate_tol: f64) -> Self {
        if dev <= preserve_tol {
            Verdict::Preserved
        } else if dev >= violate_tol {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Preserved => "PRESERVED",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        f.write_str(s)
    }
}

/// One recorded integration step.
#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    /// Sub-case label (field, method, h, sample); JSON only, not in CSV.
    pub case: String,
    pub step: usize,
    pub h: f64,
    pub det_phi: f64,
    pub abs_dev: f64,
    pub density_residual: f64,
    pub x: Vec<f64>,
}

/// Named auxiliary assertion evaluated during an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub verdict: Verdict,
    pub expected: Option<Verdict>,
    pub max_deviation: f64,
    pub checks: Vec<CheckOutcome>,
    pub error: Option<String>,
    pub rows: Vec<StepRow>,
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn matches_expectation(&self) -> bool {
        self.expected.map_or(true, |e| e == self.verdict)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// CSV with the fixed header `step,h,det_phi,abs_dev,density_residual,x...`;
    /// each row carries as many trailing x columns as its state dimension.
    /// Floats print as shortest round-trip decimals, so identical configs
    /// yield byte-identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,h,det_phi,abs_dev,density_residual,x...\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}",
                row.step, row.h, row.det_phi, row.abs_dev, row.density_residual
            ));
            for v in &row.x {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Write the report's step rows as CSV.
pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(report.to_csv().as_bytes())?;
    Ok(())
}
