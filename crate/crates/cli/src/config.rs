//! Pipeline configuration: JSON file, then `DUALFIT_*` environment
//! variables, then command-line flags, each layer overriding the last.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dualfit_core::{BandSpec, PerPart, SolverSpec, SynthFlow};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Width x height in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Resolution { width, height }
    }

    pub fn dims(self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| format!("bad dimension {t:?} in {s:?}"))
        };
        Ok(Resolution::new(parse(w)?, parse(h)?))
    }
}

/// Input and output locations. Stage inputs that other stages produce
/// default to files in `output_dir`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub person: Option<PathBuf>,
    pub parsing: Option<PathBuf>,
    pub garment: Option<PathBuf>,
    pub garment_parsing: Option<PathBuf>,
    /// Per-part assignment of the warped garment; defaults to the garment
    /// labels of `parsing`.
    pub global_parsing: Option<PathBuf>,
    pub flows: Option<PerPart<PathBuf>>,
    pub densepose: Option<PathBuf>,
    pub pose: Option<PathBuf>,
    /// Reference image for ablation metrics; defaults to `person`.
    pub ground_truth: Option<PathBuf>,
    pub warped: Option<PathBuf>,
    pub garment_alpha: Option<PathBuf>,
    pub hole_mask: Option<PathBuf>,
    pub preserved: Option<PathBuf>,
    pub inpaint_mask: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub flow_resolution: Resolution,
    pub output_resolution: Resolution,
    pub band: BandSpec,
    pub solver: SolverSpec,
    pub dgt_threshold: f64,
    /// Used for all three parts instead of flow files when set.
    pub synth_flow: Option<SynthFlow>,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flow_resolution: Resolution::new(384, 512),
            output_resolution: Resolution::new(768, 1024),
            band: BandSpec::default(),
            solver: SolverSpec::default(),
            dgt_threshold: dualfit_core::dgt::DEFAULT_DGT_THRESHOLD,
            synth_flow: None,
            paths: Paths::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths are taken from the file's directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.person,
            &mut p.parsing,
            &mut p.garment,
            &mut p.garment_parsing,
            &mut p.global_parsing,
            &mut p.densepose,
            &mut p.pose,
            &mut p.ground_truth,
            &mut p.warped,
            &mut p.garment_alpha,
            &mut p.hole_mask,
            &mut p.preserved,
            &mut p.inpaint_mask,
            &mut p.output_dir,
        ] {
            rebase(base, slot);
        }
        if let Some(flows) = &mut p.flows {
            for f in [&mut flows.left, &mut flows.right, &mut flows.torso] {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.band.validate()?;
        self.solver.validate()?;
        if !(self.dgt_threshold >= 0.0 && self.dgt_threshold < 1.0) {
            return Err(CliError::Config(format!(
                "dgt threshold must be in [0, 1), got {}",
                self.dgt_threshold
            )));
        }
        let (f, o) = (self.flow_resolution, self.output_resolution);
        if f.width == 0 || f.height == 0 || o.width < f.width || o.height < f.height {
            return Err(CliError::Config(format!(
                "output resolution {o} must be at least the flow resolution {f}"
            )));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("dualfit-out"))
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    /// Path of a stage input, falling back to the file an earlier stage writes.
    pub fn stage_input(&self, explicit: &Option<PathBuf>, produced: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.output_path(produced))
    }
}

pub fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Config(format!("missing required path: {what}")))
}

/// Values that may come from flags or the environment. `None` leaves the
/// file (or default) value in place.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub band_n: Option<usize>,
    pub kernel: Option<usize>,
    pub dgt_threshold: Option<f64>,
    pub inpaint_tol: Option<f64>,
    pub inpaint_max_iters: Option<usize>,
    pub flow_res: Option<Resolution>,
    pub out_res: Option<Resolution>,
    pub synth_flow: Option<SynthFlow>,
    pub person: Option<PathBuf>,
    pub parsing: Option<PathBuf>,
    pub garment: Option<PathBuf>,
    pub garment_parsing: Option<PathBuf>,
    pub flows: Option<PerPart<PathBuf>>,
    pub ground_truth: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut PipelineConfig) {
        fn set<T>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut cfg.band.iterations, self.band_n);
        set(&mut cfg.band.kernel_size, self.kernel);
        set(&mut cfg.dgt_threshold, self.dgt_threshold);
        set(&mut cfg.solver.tolerance, self.inpaint_tol);
        set(&mut cfg.solver.max_iterations, self.inpaint_max_iters);
        set(&mut cfg.flow_resolution, self.flow_res);
        set(&mut cfg.output_resolution, self.out_res);
        set_opt(&mut cfg.synth_flow, self.synth_flow);
        let p = &mut cfg.paths;
        set_opt(&mut p.person, self.person);
        set_opt(&mut p.parsing, self.parsing);
        set_opt(&mut p.garment, self.garment);
        set_opt(&mut p.garment_parsing, self.garment_parsing);
        set_opt(&mut p.flows, self.flows);
        set_opt(&mut p.ground_truth, self.ground_truth);
        set_opt(&mut p.output_dir, self.output_dir);
    }
}
