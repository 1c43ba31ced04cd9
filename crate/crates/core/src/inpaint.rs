//! Harmonic inpainting: masked pixels are filled with the solution of the
//! discrete Laplace equation whose Dirichlet data are the surrounding
//! unmasked pixels.
//!
//! The solve runs red-black Gauss-Seidel sweeps per channel. Because every
//! red cell depends only on black cells and vice versa, the result does not
//! depend on the order within a color class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, Image};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    /// Bound on the largest per-pixel update of the final sweep, and on the
    /// extrapolated distance to the fixed point.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tolerance: 1e-5,
            max_iterations: 10_000,
        }
    }
}

impl SolverSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "solver needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; the last iterate is returned.
    NotConverged,
}

#[derive(Clone, Debug)]
pub struct InpaintOutcome {
    pub image: Image,
    /// Largest absolute update over masked samples in the final sweep.
    pub residual: f64,
    /// Sweeps used by the slowest channel.
    pub iterations: usize,
    pub status: SolveStatus,
}

impl InpaintOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Masked pixel with its in-frame 4-neighbors.
struct Cell {
    index: u32,
    neighbors: [u32; 4],
    count: u8,
}

impl Cell {
    #[inline]
    fn mean(&self, plane: &[f64]) -> f64 {
        let n = &self.neighbors[..self.count as usize];
        n.iter().map(|&j| plane[j as usize]).sum::<f64>() / f64::from(self.count)
    }
}

fn neighbors(i: usize, w: usize, h: usize) -> ([u32; 4], u8) {
    let (x, y) = (i % w, i / w);
    let mut out = [0u32; 4];
    let mut n = 0;
    let mut push = |j: usize| {
        out[n] = j as u32;
        n += 1;
    };
    if x > 0 {
        push(i - 1);
    }
    if x + 1 < w {
        push(i + 1);
    }
    if y > 0 {
        push(i - w);
    }
    if y + 1 < h {
        push(i + w);
    }
    (out, n as u8)
}

/// Breadth-first peeling from the Dirichlet boundary inward. Returns the
/// masked pixels layer by layer; each layer only touches known pixels of
/// earlier layers or the boundary.
fn peel_layers(mask: &BinaryMask) -> Result<Vec<Vec<usize>>> {
    let (w, h) = mask.dims();
    let mut known: Vec<bool> = mask.bits().iter().map(|&b| !b).collect();
    let mut queued = vec![false; w * h];
    let mut layer: Vec<usize> = Vec::new();
    for i in 0..w * h {
        if mask.at(i) {
            let (n, c) = neighbors(i, w, h);
            if n[..c as usize].iter().any(|&j| known[j as usize]) {
                layer.push(i);
                queued[i] = true;
            }
        }
    }
    let mut layers = Vec::new();
    let mut reached = 0;
    while !layer.is_empty() {
        reached += layer.len();
        let mut next = Vec::new();
        for &i in &layer {
            let (n, c) = neighbors(i, w, h);
            for &j in &n[..c as usize] {
                let j = j as usize;
                if mask.at(j) && !queued[j] {
                    queued[j] = true;
                    next.push(j);
                }
            }
        }
        for &i in &layer {
            known[i] = true;
        }
        next.sort_unstable();
        layers.push(std::mem::replace(&mut layer, next));
    }
    if reached < mask.count() {
        let index = (0..w * h).find(|&i| mask.at(i) && !queued[i]).unwrap();
        return Err(Error::NoBoundary { index });
    }
    Ok(layers)
}

struct ChannelSolve {
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn solve_plane(plane: &mut [f64], red: &[Cell], black: &[Cell], spec: &SolverSpec) -> ChannelSolve {
    const RATE_WINDOW: usize = 5;
    let mut history: Vec<f64> = Vec::with_capacity(RATE_WINDOW + 1);
    let mut residual = f64::INFINITY;
    for iteration in 1..=spec.max_iterations {
        let mut delta = 0.0f64;
        for class in [red, black] {
            for cell in class {
                let v = cell.mean(plane);
                let slot = &mut plane[cell.index as usize];
                delta = delta.max((v - *slot).abs());
                *slot = v;
            }
        }
        residual = delta;
        if delta == 0.0 {
            return ChannelSolve {
                residual,
                iterations: iteration,
                converged: true,
            };
        }
        // Contraction estimate from recent sweeps; the remaining error of a
        // linear iteration is about delta * rate / (1 - rate).
        history.push(delta);
        if history.len() > RATE_WINDOW + 1 {
            history.remove(0);
        }
        let rate = history
            .windows(2)
            .map(|pair| pair[1] / pair[0])
            .fold(0.0f64, f64::max);
        if delta <= spec.tolerance
            && history.len() >= 2
            && rate < 1.0
            && delta * rate / (1.0 - rate) <= spec.tolerance
        {
            return ChannelSolve {
                residual,
                iterations: iteration,
                converged: true,
            };
        }
    }
    ChannelSolve {
        residual,
        iterations: spec.max_iterations,
        converged: false,
    }
}

/// Fills `mask` in `image` with a harmonic interpolant of the surrounding
/// pixels. Pixels outside the mask are returned unchanged.
pub fn harmonic_inpaint(image: &Image, mask: &BinaryMask, spec: &SolverSpec) -> Result<InpaintOutcome> {
    spec.validate()?;
    ensure_same_dims("image vs inpainting mask", image.dims(), mask.dims())?;
    if mask.is_empty() {
        return Ok(InpaintOutcome {
            image: image.clone(),
            residual: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
        });
    }
    let layers = peel_layers(mask)?;

    let (w, h) = mask.dims();
    let mut red = Vec::new();
    let mut black = Vec::new();
    for i in (0..w * h).filter(|&i| mask.at(i)) {
        let (neighbors, count) = neighbors(i, w, h);
        let cell = Cell {
            index: i as u32,
            neighbors,
            count,
        };
        if (i % w + i / w) % 2 == 0 {
            red.push(cell);
        } else {
            black.push(cell);
        }
    }

    let ch = image.channels();
    let mut out = image.clone();
    let mut residual = 0.0f64;
    let mut iterations = 0;
    let mut converged = true;
    let mut plane = vec![0.0; w * h];
    for c in 0..ch {
        for (i, v) in plane.iter_mut().enumerate() {
            *v = image.data()[i * ch + c];
        }
        // Start from the mean of already known neighbors, layer by layer.
        let mut known: Vec<bool> = mask.bits().iter().map(|&b| !b).collect();
        for layer in &layers {
            for &i in layer {
                let (n, cnt) = neighbors(i, w, h);
                let (sum, k) = n[..cnt as usize]
                    .iter()
                    .filter(|&&j| known[j as usize])
                    .fold((0.0, 0u32), |(s, k), &j| (s + plane[j as usize], k + 1));
                plane[i] = sum / f64::from(k);
            }
            for &i in layer {
                known[i] = true;
            }
        }
        let solve = solve_plane(&mut plane, &red, &black, spec);
        residual = residual.max(solve.residual);
        iterations = iterations.max(solve.iterations);
        converged &= solve.converged;
        for cell in red.iter().chain(&black) {
            let i = cell.index as usize;
            out.data_mut()[i * ch + c] = plane[i];
        }
    }
    Ok(InpaintOutcome {
        image: out,
        residual,
        iterations,
        status: if converged {
            SolveStatus::Converged
        } else {
            SolveStatus::NotConverged
        },
    })
}

/// Produces the try-on output from the preserved-region image: only pixels
/// under `mask` are regenerated.
pub fn compose_tryon(preserved: &Image, mask: &BinaryMask, spec: &SolverSpec) -> Result<InpaintOutcome> {
    harmonic_inpaint(preserved, mask, spec)
}
