//! Deterministic core of a two-stage virtual try-on pipeline.
//!
//! The warping stage moves a flat garment onto a person with one dense flow
//! per garment part and assembles the parts with a global parsing. The
//! try-on stage removes the upper body, overlays the warped garment, carves
//! narrow bands along the part boundaries into an inpainting mask, and
//! regenerates the masked pixels with a harmonic fill.

pub mod dgt;
pub mod error;
pub mod fixture;
pub mod flow;
pub mod inpaint;
pub mod io;
pub mod metrics;
pub mod morph;
pub mod preprocess;
pub mod raster;

pub use dgt::{dgt_classify, truncation_mask, Style, WearingStyle};
pub use error::{Error, Result};
pub use flow::{
    apply_flow, assemble_parts, read_flow, synth_flow, upsample_flow, write_flow, Assembly,
    FlowField, GarmentPart, PerPart, SynthFlow, WarpedPart,
};
pub use inpaint::{compose_tryon, harmonic_inpaint, InpaintOutcome, SolveStatus, SolverSpec};
pub use metrics::{evaluate_pairs, l1, mse, psnr, ssim, MetricReport, Psnr};
pub use morph::{band_width, erode, narrow_band, BandSpec};
pub use preprocess::{build_inpaint_mask, build_preserved_input, preprocess, PreprocessResult};
pub use raster::{mask_from_labels, overlay, AuxInputs, BinaryMask, Image, Label, ParsingMap};
