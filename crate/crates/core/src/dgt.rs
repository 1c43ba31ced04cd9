//! Wearing-style classification for dynamic gradient truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

pub const DEFAULT_DGT_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Style {
    TuckedIn,
    TuckedOut,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WearingStyle {
    pub style: Style,
    pub ratio_flat: f64,
    pub ratio_warped: f64,
    /// `|ratio_warped - ratio_flat| / ratio_flat`.
    pub disparity: f64,
}

fn aspect_ratio(mask: &BinaryMask, what: &'static str) -> Result<f64> {
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(Error::EmptyMask(what))?;
    Ok((y1 - y0 + 1) as f64 / (x1 - x0 + 1) as f64)
}

/// Compares the height/width ratio of the flat torso with the warped torso.
/// A warped torso noticeably shorter than the flat one reads as tucked in.
pub fn dgt_classify(
    flat_torso: &BinaryMask,
    warped_torso: &BinaryMask,
    threshold: f64,
) -> Result<WearingStyle> {
    let ratio_flat = aspect_ratio(flat_torso, "flat torso")?;
    let ratio_warped = aspect_ratio(warped_torso, "warped torso")?;
    let style = if ratio_warped < ratio_flat * (1.0 - threshold) {
        Style::TuckedIn
    } else {
        Style::TuckedOut
    };
    Ok(WearingStyle {
        style,
        ratio_flat,
        ratio_warped,
        disparity: (ratio_warped - ratio_flat).abs() / ratio_flat,
    })
}

/// Region in which warping-loss gradients would be cut during training.
pub fn truncation_mask(style: &WearingStyle, preserved_region: &BinaryMask) -> BinaryMask {
    match style.style {
        Style::TuckedIn => preserved_region.clone(),
        Style::TuckedOut => BinaryMask::empty(preserved_region.width(), preserved_region.height()),
    }
}
