//! Subcommand implementations. Every command loads and validates all of its
//! inputs before it writes anything.

use std::path::{Path, PathBuf};
use std::time::Instant;

use dualfit_core::fixture::synthetic_scene;
use dualfit_core::io::{load_image, load_mask, load_parsing_map, save_image, save_mask, save_parsing_map};
use dualfit_core::metrics::{evaluate_pair, evaluate_pairs, ConfigEcho};
use dualfit_core::{
    apply_flow, assemble_parts, compose_tryon, dgt_classify, mask_from_labels, preprocess, read_flow,
    upsample_flow, write_flow, Assembly, AuxInputs, BinaryMask, FlowField, GarmentPart, Image,
    InpaintOutcome, Label, ParsingMap, PerPart, PreprocessResult, Style,
};

use crate::config::{require, PipelineConfig, Resolution};
use crate::error::{CliError, CliResult};
use crate::manifest::{AblationReport, AblationRow, Convergence, RunManifest};

pub const WARPED: &str = "warped_garment.png";
pub const GARMENT_ALPHA: &str = "garment_alpha.png";
pub const HOLE_MASK: &str = "hole_mask.png";
pub const PRESERVED: &str = "preserved.png";
pub const INPAINT_MASK: &str = "inpaint_mask.png";
pub const TRYON: &str = "tryon.png";

fn ensure_dims(what: &str, got: (usize, usize), want: Resolution) -> CliResult<()> {
    if got != want.dims() {
        return Err(CliError::Config(format!(
            "{what} is {}x{}, configured resolution is {want}",
            got.0, got.1
        )));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Values exactly as a later stage would read them back from 8-bit PNG.
fn quantized(img: &Image) -> Image {
    Image::from_u8(img.width(), img.height(), img.channels(), &img.to_u8()).expect("same shape")
}

struct Outputs<'a> {
    manifest: &'a mut RunManifest,
    dir: PathBuf,
}

impl Outputs<'_> {
    fn image(&mut self, key: &str, name: &str, img: &Image) -> CliResult<()> {
        let p = self.dir.join(name);
        save_image(img, &p)?;
        self.manifest.outputs.insert(key.into(), p);
        Ok(())
    }

    fn mask(&mut self, key: &str, name: &str, mask: &BinaryMask) -> CliResult<()> {
        let p = self.dir.join(name);
        save_mask(mask, &p)?;
        self.manifest.outputs.insert(key.into(), p);
        Ok(())
    }
}

fn finish(manifest: &mut RunManifest, dir: &Path) -> CliResult<()> {
    let p = dir.join(format!("{}.manifest.json", manifest.command));
    manifest.outputs.insert("manifest".into(), p.clone());
    manifest.write(&p)
}

// ---------------------------------------------------------------- warp

struct WarpInputs {
    garment: Image,
    garment_parsing: ParsingMap,
    global: PerPart<BinaryMask>,
    flows: PerPart<FlowField>,
}

fn load_warp_inputs(cfg: &PipelineConfig) -> CliResult<WarpInputs> {
    let p = &cfg.paths;
    let garment = load_image(require(&p.garment, "garment")?)?;
    let garment_parsing = load_parsing_map(require(&p.garment_parsing, "garment_parsing")?)?;
    if garment.dims() != garment_parsing.dims() {
        return Err(CliError::Config(format!(
            "garment is {}x{} but its parsing is {}x{}",
            garment.width(),
            garment.height(),
            garment_parsing.width(),
            garment_parsing.height()
        )));
    }
    let global_src = match &p.global_parsing {
        Some(path) => load_parsing_map(path)?,
        None => load_parsing_map(require(&p.parsing, "parsing (for the global garment parsing)")?)?,
    };
    ensure_dims("global parsing", global_src.dims(), cfg.output_resolution)?;
    let global = PerPart::from_fn(|part: GarmentPart| mask_from_labels(&global_src, &[part.label()]));

    let (fw, fh) = cfg.flow_resolution.dims();
    let flows = match (&cfg.synth_flow, &p.flows) {
        (Some(kind), _) => {
            let f = kind.generate(fw, fh)?;
            PerPart::from_fn(|_| f.clone())
        }
        (None, Some(paths)) => paths.try_map(|_, path| read_flow(path))?,
        (None, None) => {
            return Err(CliError::Config(
                "no flows: set paths.flows or synth_flow".into(),
            ))
        }
    };
    for (part, f) in flows.iter() {
        ensure_dims(&format!("{} flow", part.name()), f.dims(), cfg.flow_resolution)?;
    }
    Ok(WarpInputs {
        garment,
        garment_parsing,
        global,
        flows,
    })
}

fn run_warp(cfg: &PipelineConfig, inputs: &WarpInputs, manifest: &mut RunManifest) -> CliResult<Assembly> {
    let (ow, oh) = cfg.output_resolution.dims();
    let mut parts = Vec::with_capacity(3);
    for (part, flow) in inputs.flows.iter() {
        let full = upsample_flow(flow, ow, oh)?;
        let alpha = mask_from_labels(&inputs.garment_parsing, &[part.label()]);
        parts.push(apply_flow(&inputs.garment, &alpha, &full, part)?);
    }
    let asm = assemble_parts(&parts, &inputs.global)?;
    if !asm.alpha.is_disjoint_from(&asm.holes) {
        return Err(CliError::Invariant("garment alpha overlaps hole mask".into()));
    }

    let flat_torso = mask_from_labels(&inputs.garment_parsing, &[Label::TorsoGarment]);
    let warped_torso = asm.alpha.intersection(&inputs.global.torso)?;
    match dgt_classify(&flat_torso, &warped_torso, cfg.dgt_threshold) {
        Ok(style) => {
            manifest.gradient_truncation = Some(style.style == Style::TuckedIn);
            manifest.wearing_style = Some(style);
        }
        Err(e) => manifest.warn(format!("wearing style not classified: {e}")),
    }
    manifest.hole_count = Some(asm.holes.count());
    Ok(asm)
}

fn write_assembly(asm: &Assembly, out: &mut Outputs) -> CliResult<()> {
    out.image("warped_garment", WARPED, &asm.garment)?;
    out.mask("garment_alpha", GARMENT_ALPHA, &asm.alpha)?;
    out.mask("hole_mask", HOLE_MASK, &asm.holes)
}

pub fn cmd_warp(cfg: &PipelineConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("warp", cfg);
    let t = Instant::now();
    let inputs = load_warp_inputs(cfg)?;
    let asm = run_warp(cfg, &inputs, &mut manifest)?;
    manifest.timings_ms.insert("warp".into(), elapsed_ms(t));

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    write_assembly(&asm, &mut Outputs { manifest: &mut manifest, dir: dir.clone() })?;
    finish(&mut manifest, &dir)?;
    Ok(manifest)
}

// ---------------------------------------------------------- preprocess

struct PersonInputs {
    person: Image,
    parsing: ParsingMap,
}

fn load_person(cfg: &PipelineConfig, manifest: &mut RunManifest) -> CliResult<PersonInputs> {
    let p = &cfg.paths;
    let person = load_image(require(&p.person, "person")?)?;
    let parsing = load_parsing_map(require(&p.parsing, "parsing")?)?;
    ensure_dims("person", person.dims(), cfg.output_resolution)?;
    ensure_dims("parsing", parsing.dims(), cfg.output_resolution)?;
    if let Some(dp) = &p.densepose {
        let densepose = load_image(dp)?;
        let pose = match &p.pose {
            Some(pp) => load_image(pp)?,
            None => Image::filled(person.width(), person.height(), 1, 0.0)?,
        };
        AuxInputs::new(&person, densepose, pose)?;
        manifest.unused_inputs.push("densepose".into());
    }
    if let Some(pp) = &p.pose {
        let pose = load_image(pp)?;
        ensure_dims("pose heatmap", pose.dims(), cfg.output_resolution)?;
        manifest.unused_inputs.push("pose".into());
    }
    Ok(PersonInputs { person, parsing })
}

fn run_preprocess(
    cfg: &PipelineConfig,
    person: &PersonInputs,
    warped: &Image,
    alpha: &BinaryMask,
    holes: &BinaryMask,
    manifest: &mut RunManifest,
) -> CliResult<PreprocessResult> {
    let res = preprocess(&person.person, &person.parsing, warped, alpha, holes, &cfg.band)?;
    for (_, band) in res.bands.iter() {
        if !band.is_subset_of(&res.inpaint_mask) {
            return Err(CliError::Invariant("band outside inpainting mask".into()));
        }
    }
    manifest.band_widths = Some(res.band_widths.clone());
    manifest.inpaint_mask_area = Some(res.inpaint_mask.count());
    Ok(res)
}

fn write_preprocess(res: &PreprocessResult, out: &mut Outputs) -> CliResult<()> {
    out.image("preserved", PRESERVED, &res.preserved)?;
    out.mask("inpaint_mask", INPAINT_MASK, &res.inpaint_mask)
}

pub fn cmd_preprocess(cfg: &PipelineConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("preprocess", cfg);
    let p = &cfg.paths;
    let person = load_person(cfg, &mut manifest)?;
    let warped = load_image(cfg.stage_input(&p.warped, WARPED))?;
    let alpha = load_mask(cfg.stage_input(&p.garment_alpha, GARMENT_ALPHA))?;
    let holes = load_mask(cfg.stage_input(&p.hole_mask, HOLE_MASK))?;
    ensure_dims("warped garment", warped.dims(), cfg.output_resolution)?;

    let t = Instant::now();
    let res = run_preprocess(cfg, &person, &warped, &alpha, &holes, &mut manifest)?;
    manifest.timings_ms.insert("preprocess".into(), elapsed_ms(t));

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    write_preprocess(&res, &mut Outputs { manifest: &mut manifest, dir: dir.clone() })?;
    finish(&mut manifest, &dir)?;
    Ok(manifest)
}

// -------------------------------------------------------------- inpaint

fn run_inpaint(
    cfg: &PipelineConfig,
    preserved: &Image,
    mask: &BinaryMask,
    manifest: &mut RunManifest,
) -> CliResult<InpaintOutcome> {
    let outcome = compose_tryon(preserved, mask, &cfg.solver)?;
    for i in 0..mask.width() * mask.height() {
        if !mask.at(i) && outcome.image.pixel(i) != preserved.pixel(i) {
            return Err(CliError::Invariant(format!(
                "preserved pixel {i} changed during synthesis"
            )));
        }
    }
    if !outcome.converged() {
        manifest.warn(format!(
            "inpainting did not converge in {} iterations (residual {:.3e})",
            outcome.iterations, outcome.residual
        ));
    }
    manifest.convergence = Some(Convergence::from(&outcome));
    Ok(outcome)
}

pub fn cmd_inpaint(cfg: &PipelineConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("inpaint", cfg);
    let preserved = load_image(cfg.stage_input(&cfg.paths.preserved, PRESERVED))?;
    let mask = load_mask(cfg.stage_input(&cfg.paths.inpaint_mask, INPAINT_MASK))?;

    let t = Instant::now();
    let outcome = run_inpaint(cfg, &preserved, &mask, &mut manifest)?;
    manifest.timings_ms.insert("inpaint".into(), elapsed_ms(t));

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    Outputs { manifest: &mut manifest, dir: dir.clone() }.image("tryon", TRYON, &outcome.image)?;
    finish(&mut manifest, &dir)?;
    Ok(manifest)
}

// ------------------------------------------------------------- pipeline

struct TryOn {
    assembly: Assembly,
    pre: PreprocessResult,
    outcome: InpaintOutcome,
}

/// Runs preprocess and synthesis on an assembly. Stage hand-offs go through
/// 8-bit quantization so the result equals running the stages one by one.
fn run_tryon_stages(
    cfg: &PipelineConfig,
    person: &PersonInputs,
    asm: &Assembly,
    manifest: &mut RunManifest,
) -> CliResult<(PreprocessResult, InpaintOutcome)> {
    let t = Instant::now();
    let warped = quantized(&asm.garment);
    let pre = run_preprocess(cfg, person, &warped, &asm.alpha, &asm.holes, manifest)?;
    manifest.timings_ms.insert("preprocess".into(), elapsed_ms(t));

    let t = Instant::now();
    let outcome = run_inpaint(cfg, &quantized(&pre.preserved), &pre.inpaint_mask, manifest)?;
    manifest.timings_ms.insert("inpaint".into(), elapsed_ms(t));
    Ok((pre, outcome))
}

fn run_pipeline(cfg: &PipelineConfig, manifest: &mut RunManifest) -> CliResult<TryOn> {
    let person = load_person(cfg, manifest)?;
    let inputs = load_warp_inputs(cfg)?;
    let t = Instant::now();
    let assembly = run_warp(cfg, &inputs, manifest)?;
    manifest.timings_ms.insert("warp".into(), elapsed_ms(t));
    let (pre, outcome) = run_tryon_stages(cfg, &person, &assembly, manifest)?;
    Ok(TryOn {
        assembly,
        pre,
        outcome,
    })
}

pub fn cmd_pipeline(cfg: &PipelineConfig) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("pipeline", cfg);
    let run = run_pipeline(cfg, &mut manifest)?;

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    let mut out = Outputs { manifest: &mut manifest, dir: dir.clone() };
    write_assembly(&run.assembly, &mut out)?;
    write_preprocess(&run.pre, &mut out)?;
    out.image("tryon", TRYON, &run.outcome.image)?;
    finish(&mut manifest, &dir)?;
    Ok(manifest)
}

// ------------------------------------------------------------- ablation

/// Keeps the first occurrence of each value.
fn dedup_preserving_order(values: &[usize]) -> (Vec<usize>, bool) {
    let mut seen = Vec::new();
    for &v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    let dropped = seen.len() != values.len();
    (seen, dropped)
}

pub const DEFAULT_ABLATION_N: [usize; 3] = [2, 5, 10];

/// Runs the try-on stage once per band iteration count against a shared
/// warp, and scores each output against the ground truth.
pub fn cmd_ablate_band(
    cfg: &PipelineConfig,
    n_values: &[usize],
    report: Option<&Path>,
) -> CliResult<RunManifest> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("ablate-band", cfg);
    let (ns, dropped) = dedup_preserving_order(n_values);
    if dropped {
        manifest.warn(format!("duplicate band iteration values removed: {n_values:?} -> {ns:?}"));
    }
    if ns.is_empty() {
        return Err(CliError::Config("no band iteration values given".into()));
    }

    let person = load_person(cfg, &mut manifest)?;
    let gt_path = match &cfg.paths.ground_truth {
        Some(p) => p.clone(),
        None => {
            manifest.warn("no ground truth configured; scoring against the person image");
            require(&cfg.paths.person, "person")?.to_owned()
        }
    };
    let gt = load_image(&gt_path)?;
    ensure_dims("ground truth", gt.dims(), cfg.output_resolution)?;
    let inputs = load_warp_inputs(cfg)?;

    let t = Instant::now();
    let asm = run_warp(cfg, &inputs, &mut manifest)?;
    manifest.timings_ms.insert("warp".into(), elapsed_ms(t));

    let mut runs = Vec::with_capacity(ns.len());
    for &n in &ns {
        let mut run_cfg = cfg.clone();
        run_cfg.band.iterations = n;
        let mut sub = RunManifest::new("ablate-band", &run_cfg);
        let t = Instant::now();
        let (pre, outcome) = run_tryon_stages(&run_cfg, &person, &asm, &mut sub)?;
        manifest.timings_ms.insert(format!("n{n}"), elapsed_ms(t));
        for w in sub.warnings {
            manifest.warn(format!("n={n}: {w}"));
        }
        let scored = quantized(&outcome.image);
        let metrics = evaluate_pair(&format!("n{n}"), &gt, &scored)?;
        let row = AblationRow {
            n,
            band_width: pre.band_widths.iter().map(|(_, &w)| w).max().unwrap_or(0),
            band_widths: pre.band_widths.clone(),
            mask_area: pre.inpaint_mask.count(),
            ssim: metrics.ssim,
            l1: metrics.l1,
            psnr_db: metrics.psnr_db,
            fid: None,
            lpips: None,
            converged: outcome.converged(),
            iterations: outcome.iterations,
        };
        runs.push((row, pre, outcome));
    }

    let dir = cfg.output_dir();
    create_dir(&dir)?;
    let mut out = Outputs { manifest: &mut manifest, dir: dir.clone() };
    write_assembly(&asm, &mut out)?;
    for (row, pre, outcome) in &runs {
        let sub = dir.join(format!("n{}", row.n));
        create_dir(&sub)?;
        let mut out = Outputs { manifest: &mut manifest, dir: sub };
        out.image(&format!("n{}/preserved", row.n), PRESERVED, &pre.preserved)?;
        out.mask(&format!("n{}/inpaint_mask", row.n), INPAINT_MASK, &pre.inpaint_mask)?;
        out.image(&format!("n{}/tryon", row.n), TRYON, &outcome.image)?;
    }

    let ablation = AblationReport {
        rows: runs.into_iter().map(|(row, _, _)| row).collect(),
        kernel: cfg.band.kernel_size,
        tol: cfg.solver.tolerance,
        ground_truth: gt_path,
    };
    let json_path = report.map(Path::to_path_buf).unwrap_or_else(|| dir.join("ablation.json"));
    let csv_path = json_path.with_extension("csv");
    let json = serde_json::to_string_pretty(&ablation).expect("report serializes");
    std::fs::write(&json_path, json + "\n").map_err(|e| CliError::io(&json_path, e))?;
    std::fs::write(&csv_path, ablation.to_csv()).map_err(|e| CliError::io(&csv_path, e))?;
    manifest.outputs.insert("report".into(), json_path);
    manifest.outputs.insert("report_csv".into(), csv_path);
    manifest.ablation = Some(ablation);
    finish(&mut manifest, &dir)?;
    Ok(manifest)
}

// -------------------------------------------------------------- metrics

fn png_names(dir: &Path) -> CliResult<Vec<String>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Scores every PNG in `gt_dir` against the same-named file in `out_dir`.
pub fn cmd_metrics(cfg: &PipelineConfig, gt_dir: &Path, out_dir: &Path, report: &Path) -> CliResult<RunManifest> {
    let mut manifest = RunManifest::new("metrics", cfg);
    let t = Instant::now();
    let mut pairs = Vec::new();
    for name in png_names(gt_dir)? {
        let gt = load_image(gt_dir.join(&name))?;
        let out = load_image(out_dir.join(&name))?;
        let id = name.trim_end_matches(".png").trim_end_matches(".PNG").to_owned();
        pairs.push((gt, out, id));
    }
    let mut rep = evaluate_pairs(&pairs)?;
    rep.config = Some(ConfigEcho::new(&cfg.band, &cfg.solver));
    manifest.timings_ms.insert("metrics".into(), elapsed_ms(t));

    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    std::fs::write(report, json + "\n").map_err(|e| CliError::io(report, e))?;
    manifest.outputs.insert("report".into(), report.to_owned());
    manifest.metrics = Some(rep);
    Ok(manifest)
}

// -------------------------------------------------------------- fixture

/// Writes the synthetic scene, identity flow files and a config pointing at
/// them. Returns the config path.
pub fn write_fixture(dir: &Path, out_res: Resolution, flow_res: Resolution) -> CliResult<PathBuf> {
    create_dir(dir)?;
    let scene = synthetic_scene(out_res.width, out_res.height);
    save_image(&scene.person, dir.join("person.png"))?;
    save_parsing_map(&scene.parsing, dir.join("parsing.png"))?;
    save_image(&scene.garment, dir.join("garment.png"))?;
    save_parsing_map(&scene.garment_parsing, dir.join("garment_parsing.png"))?;
    let flow = FlowField::zeros(flow_res.width, flow_res.height);
    for part in GarmentPart::ALL {
        write_flow(&flow, dir.join(format!("flow_{}.flo", part.name())))?;
    }
    let cfg = serde_json::json!({
        "flow_resolution": flow_res,
        "output_resolution": out_res,
        "paths": {
            "person": "person.png",
            "parsing": "parsing.png",
            "garment": "garment.png",
            "garment_parsing": "garment_parsing.png",
            "ground_truth": "person.png",
            "flows": {
                "left": "flow_left_sleeve.flo",
                "right": "flow_right_sleeve.flo",
                "torso": "flow_torso.flo"
            },
            "output_dir": "out"
        }
    });
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
