use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dualfit_core::metrics::MetricReport;
use dualfit_core::{InpaintOutcome, PerPart, SolveStatus, WearingStyle};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub status: SolveStatus,
    pub residual: f64,
    pub iterations: usize,
}

impl From<&InpaintOutcome> for Convergence {
    fn from(o: &InpaintOutcome) -> Self {
        Convergence {
            status: o.status,
            residual: o.residual,
            iterations: o.iterations,
        }
    }
}

/// One row of the band-thickness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub n: usize,
    /// Widest of the three measured part bands.
    pub band_width: usize,
    pub band_widths: PerPart<usize>,
    pub mask_area: usize,
    pub ssim: f64,
    pub l1: f64,
    pub psnr_db: Option<f64>,
    pub fid: Option<f64>,
    pub lpips: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub kernel: usize,
    pub tol: f64,
    pub ground_truth: PathBuf,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("n,band_width,mask_area,ssim,fid,lpips,l1,psnr_db,converged\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.band_width,
                r.mask_area,
                r.ssim,
                opt(r.fid),
                opt(r.lpips),
                r.l1,
                opt(r.psnr_db),
                r.converged
            ));
        }
        out
    }
}

/// Record of one CLI invocation, written next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: PipelineConfig,
    pub outputs: BTreeMap<String, PathBuf>,
    /// Wall-clock stage durations; the only nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_widths: Option<PerPart<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inpaint_mask_area: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hole_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wearing_style: Option<WearingStyle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_truncation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    pub warnings: Vec<String>,
    pub unused_inputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        RunManifest {
            command: command.to_owned(),
            config: config.clone(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
            convergence: None,
            band_widths: None,
            inpaint_mask_area: None,
            hole_count: None,
            wearing_style: None,
            gradient_truncation: None,
            ablation: None,
            metrics: None,
            warnings: Vec::new(),
            unused_inputs: Vec::new(),
        }
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// Copy with timings cleared, for run-to-run comparison.
    pub fn without_timings(&self) -> RunManifest {
        RunManifest {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> CliResult<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
