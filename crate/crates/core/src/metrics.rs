//! Full-reference image metrics: MSE, PSNR, SSIM and mean absolute error,
//! all on unit-interval samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inpaint::SolverSpec;
use crate::morph::BandSpec;
use crate::raster::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn l1(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio; identical images have no finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    pub fn from_mse(mse: f64) -> Psnr {
        if mse == 0.0 {
            Psnr::Infinite
        } else {
            Psnr::Finite(10.0 * (1.0 / mse).log10())
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Psnr::Finite(db) => Some(db),
            Psnr::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Psnr::Infinite
    }
}

pub fn psnr(a: &Image, b: &Image) -> Result<Psnr> {
    Ok(Psnr::from_mse(mse(a, b)?))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Separable Gaussian filter, valid region only.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let src = &plane[y * w + x..y * w + x + SSIM_WINDOW];
            rows[y * ow + x] = src.iter().zip(kernel).map(|(s, k)| s * k).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| rows[(y + k) * ow + x] * kernel[k]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// evaluated where the window fits inside the frame, averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let kernel = gaussian_window();
    let ch = a.channels();
    let mut total = 0.0;
    for c in 0..ch {
        let plane = |img: &Image| -> Vec<f64> { img.data().iter().skip(c).step_by(ch).copied().collect() };
        let x = plane(a);
        let y = plane(b);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mu_x = filter_valid(&x, w, h, &kernel);
        let mu_y = filter_valid(&y, w, h, &kernel);
        let e_xx = filter_valid(&xx, w, h, &kernel);
        let e_yy = filter_valid(&yy, w, h, &kernel);
        let e_xy = filter_valid(&xy, w, h, &kernel);
        let mut sum = 0.0;
        for i in 0..mu_x.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2);
            sum += num / den;
        }
        total += sum / mu_x.len() as f64;
    }
    Ok(total / ch as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub mse: f64,
    /// `None` when the pair is identical; see `psnr_infinite`.
    pub psnr_db: Option<f64>,
    pub psnr_infinite: bool,
    pub ssim: f64,
    pub l1: f64,
}

/// Means over pairs. Columns needing pretrained networks are always null.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mse: Option<f64>,
    /// Mean over pairs with finite PSNR.
    pub psnr_db: Option<f64>,
    pub psnr_infinite_count: usize,
    pub ssim: Option<f64>,
    pub l1: Option<f64>,
    pub fid: Option<f64>,
    pub lpips: Option<f64>,
    pub dists: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub band_n: usize,
    pub kernel: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl ConfigEcho {
    pub fn new(band: &BandSpec, solver: &SolverSpec) -> Self {
        ConfigEcho {
            band_n: band.iterations,
            kernel: band.kernel_size,
            tol: solver.tolerance,
            max_iters: solver.max_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    pub aggregate: Aggregate,
    pub config: Option<ConfigEcho>,
}

pub fn evaluate_pair(id: &str, gt: &Image, out: &Image) -> Result<PairMetrics> {
    let mse = mse(gt, out)?;
    let psnr = Psnr::from_mse(mse);
    Ok(PairMetrics {
        id: id.to_owned(),
        mse,
        psnr_db: psnr.finite(),
        psnr_infinite: psnr.is_infinite(),
        ssim: ssim(gt, out)?,
        l1: l1(gt, out)?,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn aggregate(pairs: &[PairMetrics]) -> Aggregate {
    Aggregate {
        count: pairs.len(),
        mse: mean(pairs.iter().map(|p| p.mse)),
        psnr_db: mean(pairs.iter().filter_map(|p| p.psnr_db)),
        psnr_infinite_count: pairs.iter().filter(|p| p.psnr_infinite).count(),
        ssim: mean(pairs.iter().map(|p| p.ssim)),
        l1: mean(pairs.iter().map(|p| p.l1)),
        fid: None,
        lpips: None,
        dists: None,
    }
}

/// Scores `(ground truth, output, id)` triples, ordered by id.
pub fn evaluate_pairs(pairs: &[(Image, Image, String)]) -> Result<MetricReport> {
    let mut order: Vec<&(Image, Image, String)> = pairs.iter().collect();
    order.sort_by(|a, b| a.2.cmp(&b.2));
    let per_pair = order
        .into_iter()
        .map(|(gt, out, id)| {
            evaluate_pair(id, gt, out).map_err(|e| match e {
                Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("pair {id}: {msg}")),
                Error::InvalidArgument(msg) => Error::InvalidArgument(format!("pair {id}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        aggregate: aggregate(&per_pair),
        pairs: per_pair,
        config: None,
    })
}
