use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualfit_cli::commands::DEFAULT_ABLATION_N;
use dualfit_cli::{
    cmd_ablate_band, cmd_inpaint, cmd_metrics, cmd_pipeline, cmd_preprocess, cmd_warp, write_fixture,
    CliError, CliResult, Overrides, PipelineConfig, Resolution, RunManifest,
};
use dualfit_core::{PerPart, SynthFlow};

#[derive(Parser, Debug)]
#[command(name = "dualfit", version, about = "Two-stage virtual try-on pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Warp the garment per part and assemble it.
    Warp(Common),
    /// Build the preserved-region image and the inpainting mask.
    Preprocess(Common),
    /// Fill the inpainting mask of the preserved-region image.
    Inpaint(Common),
    /// Run warp, preprocess and inpaint in sequence.
    Pipeline(Common),
    /// Score output images against ground truth.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Directory of ground-truth PNGs.
        #[arg(long)]
        gt: PathBuf,
        /// Directory of outputs named like the ground truth.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the band erosion count and report metrics per value.
    AblateBand {
        #[command(flatten)]
        common: Common,
        /// Erosion counts to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ABLATION_N)]
        n_values: Vec<usize>,
    },
    /// Write the bundled synthetic scene with identity flows and a config.
    MakeFixture {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "192x256")]
        out_res: Resolution,
        #[arg(long, default_value = "96x128")]
        flow_res: Resolution,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON pipeline configuration.
    #[arg(long, env = "DUALFIT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "DUALFIT_BAND_N")]
    band_n: Option<usize>,
    #[arg(long, env = "DUALFIT_KERNEL")]
    kernel: Option<usize>,
    #[arg(long, env = "DUALFIT_DGT_THRESHOLD")]
    dgt_threshold: Option<f64>,
    #[arg(long, env = "DUALFIT_INPAINT_TOL")]
    inpaint_tol: Option<f64>,
    #[arg(long, env = "DUALFIT_INPAINT_MAX_ITERS")]
    inpaint_max_iters: Option<usize>,
    /// Flow resolution as WxH.
    #[arg(long, env = "DUALFIT_FLOW_RES")]
    flow_res: Option<Resolution>,
    /// Output resolution as WxH.
    #[arg(long, env = "DUALFIT_OUT_RES")]
    out_res: Option<Resolution>,
    /// identity | translate:DX,DY | affine:A,B,C,D,E,F | tps:LAMBDA:X,Y>X',Y':...
    #[arg(long, env = "DUALFIT_SYNTH_FLOW")]
    synth_flow: Option<SynthFlow>,
    #[arg(long, env = "DUALFIT_PERSON")]
    person: Option<PathBuf>,
    #[arg(long, env = "DUALFIT_PARSING")]
    parsing: Option<PathBuf>,
    #[arg(long, env = "DUALFIT_GARMENT")]
    garment: Option<PathBuf>,
    #[arg(long, env = "DUALFIT_GARMENT_PARSING")]
    garment_parsing: Option<PathBuf>,
    /// Flow files for left sleeve, right sleeve and torso, comma separated.
    #[arg(long, env = "DUALFIT_FLOWS", value_delimiter = ',', num_args = 3)]
    flows: Option<Vec<PathBuf>>,
    #[arg(long, env = "DUALFIT_GROUND_TRUTH")]
    ground_truth: Option<PathBuf>,
    #[arg(long, env = "DUALFIT_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Report file (metrics, ablate-band).
    #[arg(long, env = "DUALFIT_REPORT")]
    report: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        let flows = self.flows.as_ref().map(|f| PerPart {
            left: f[0].clone(),
            right: f[1].clone(),
            torso: f[2].clone(),
        });
        Overrides {
            band_n: self.band_n,
            kernel: self.kernel,
            dgt_threshold: self.dgt_threshold,
            inpaint_tol: self.inpaint_tol,
            inpaint_max_iters: self.inpaint_max_iters,
            flow_res: self.flow_res,
            out_res: self.out_res,
            synth_flow: self.synth_flow.clone(),
            person: self.person.clone(),
            parsing: self.parsing.clone(),
            garment: self.garment.clone(),
            garment_parsing: self.garment_parsing.clone(),
            flows,
            ground_truth: self.ground_truth.clone(),
            output_dir: self.out_dir.clone(),
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<Option<RunManifest>> {
    Ok(Some(match cli.command {
        Command::Warp(c) => cmd_warp(&c.config()?)?,
        Command::Preprocess(c) => cmd_preprocess(&c.config()?)?,
        Command::Inpaint(c) => cmd_inpaint(&c.config()?)?,
        Command::Pipeline(c) => cmd_pipeline(&c.config()?)?,
        Command::Metrics { common, gt, out } => {
            let report = common
                .report
                .clone()
                .ok_or_else(|| CliError::Config("metrics needs --report".into()))?;
            cmd_metrics(&common.config()?, &gt, &out, &report)?
        }
        Command::AblateBand { common, n_values } => {
            cmd_ablate_band(&common.config()?, &n_values, common.report.as_deref())?
        }
        Command::MakeFixture { dir, out_res, flow_res } => {
            let path = write_fixture(&dir, out_res, flow_res)?;
            println!("{}", path.display());
            return Ok(None);
        }
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Some(manifest)) => {
            if let Some(p) = manifest.outputs.get("manifest").or(manifest.outputs.get("report")) {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
