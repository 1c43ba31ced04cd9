//! Inputs for the try-on stage: the inpainting mask and the
//! preserved-region image.

use crate::error::Result;
use crate::flow::{GarmentPart, PerPart};
use crate::morph::{band_width, narrow_band, BandSpec};
use crate::raster::{ensure_same_dims, mask_from_labels, BinaryMask, Image, Label, ParsingMap};

/// Sample value written into removed pixels.
pub const FILL_VALUE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessResult {
    pub preserved: Image,
    pub inpaint_mask: BinaryMask,
    pub bands: PerPart<BinaryMask>,
    /// Measured Chebyshev width of each band inside its part mask.
    pub band_widths: PerPart<usize>,
}

/// Union of the hands and neck from `parsing`, the garment bands, and any
/// assembly holes.
pub fn build_inpaint_mask(
    parsing: &ParsingMap,
    bands: &PerPart<BinaryMask>,
    extra_holes: &BinaryMask,
) -> Result<BinaryMask> {
    let mut mask = mask_from_labels(parsing, &[Label::LeftHand, Label::RightHand, Label::Neck]);
    for (_, band) in bands.iter() {
        mask = mask.union(band)?;
    }
    mask.union(extra_holes)
}

/// Removes the upper body (keeping head and hair), lays the warped garment
/// on top, then blanks everything under the inpainting mask.
pub fn build_preserved_input(
    person: &Image,
    parsing: &ParsingMap,
    warped: &Image,
    warped_alpha: &BinaryMask,
    inpaint_mask: &BinaryMask,
) -> Result<Image> {
    ensure_same_dims("person vs parsing", person.dims(), parsing.dims())?;
    ensure_same_dims("person vs warped garment", person.dims(), warped.dims())?;
    ensure_same_dims("person vs garment alpha", person.dims(), warped_alpha.dims())?;
    ensure_same_dims("person vs inpainting mask", person.dims(), inpaint_mask.dims())?;
    if warped.channels() != person.channels() {
        return Err(crate::Error::DimensionMismatch(format!(
            "warped garment has {} channels, person {}",
            warped.channels(),
            person.channels()
        )));
    }

    let mut out = person.clone();
    for (i, label) in parsing.labels().iter().enumerate() {
        let sample = if inpaint_mask.at(i) {
            None
        } else if warped_alpha.at(i) {
            Some(warped.pixel(i))
        } else if Label::UPPER_BODY.contains(label) {
            None
        } else {
            continue;
        };
        let px = out.pixel_mut(i);
        match sample {
            Some(s) => px.copy_from_slice(s),
            None => px.fill(FILL_VALUE),
        }
    }
    Ok(out)
}

/// Garment part masks from the parsing map, restricted to the warped
/// garment's footprint.
pub fn part_masks(parsing: &ParsingMap, warped_alpha: &BinaryMask) -> Result<PerPart<BinaryMask>> {
    ensure_same_dims("parsing vs garment alpha", parsing.dims(), warped_alpha.dims())?;
    PerPart::from_fn(|part: GarmentPart| mask_from_labels(parsing, &[part.label()]))
        .try_map(|_, m| m.intersection(warped_alpha))
}

pub fn preprocess(
    person: &Image,
    parsing: &ParsingMap,
    warped: &Image,
    warped_alpha: &BinaryMask,
    hole_mask: &BinaryMask,
    spec: &BandSpec,
) -> Result<PreprocessResult> {
    ensure_same_dims("person vs hole mask", person.dims(), hole_mask.dims())?;
    let parts = part_masks(parsing, warped_alpha)?;
    let bands = parts.try_map(|_, m| narrow_band(m, spec))?;
    let band_widths = PerPart::from_fn(|p| band_width(bands.get(p), parts.get(p)));
    let inpaint_mask = build_inpaint_mask(parsing, &bands, hole_mask)?;
    let preserved = build_preserved_input(person, parsing, warped, warped_alpha, &inpaint_mask)?;
    Ok(PreprocessResult {
        preserved,
        inpaint_mask,
        bands,
        band_widths,
    })
}
