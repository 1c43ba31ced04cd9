//! Dense flow fields: `.flo` serialization, resolution changes, backward
//! warping and assembly of the per-part warps into one garment.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, Image, Label};

const FLO_MAGIC: [u8; 4] = *b"PIEH";

/// Per-pixel `(u, v)` displacements, in pixels of this field's own grid.
#[derive(Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
}

impl fmt::Debug for FlowField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FlowField({}x{})", self.width, self.height)
    }
}

impl FlowField {
    pub fn new(width: usize, height: usize, vectors: Vec<[f32; 2]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "flow dimensions must be positive, got {width}x{height}"
            )));
        }
        if vectors.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} vectors for a {width}x{height} flow",
                vectors.len()
            )));
        }
        if let Some(index) = vectors
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::NonFiniteFlow { index });
        }
        Ok(FlowField {
            width,
            height,
            vectors,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            vectors: vec![[0.0; 2]; width * height],
        }
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Result<Self> {
        Self::new(width, height, vec![[u, v]; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 2]) -> Result<Self> {
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let [u, v] = f(x, y);
                vectors.push([u as f32, v as f32]);
            }
        }
        Self::new(width, height, vectors)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vectors(&self) -> &[[f32; 2]] {
        &self.vectors
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.vectors[y * self.width + x]
    }

    /// Decodes a Middlebury `.flo` byte stream.
    pub fn from_flo_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::TruncatedFlow {
                expected: 12,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != FLO_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if width <= 0 || height <= 0 {
            return Err(Error::InvalidArgument(format!(
                "flow header declares {width}x{height}"
            )));
        }
        let (width, height) = (width as usize, height as usize);
        let expected = 12 + width * height * 8;
        if bytes.len() < expected {
            return Err(Error::TruncatedFlow {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::InvalidArgument(format!(
                "{} trailing bytes after flow payload",
                bytes.len() - expected
            )));
        }
        let vectors = bytes[12..]
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                ]
            })
            .collect();
        Self::new(width, height, vectors)
    }

    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.vectors.len() * 8);
        out.extend_from_slice(&FLO_MAGIC);
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for [u, v] in &self.vectors {
            out.extend_from_slice(&u.to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    FlowField::from_flo_bytes(&bytes)
}

pub fn write_flow(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, flow.to_flo_bytes()).map_err(|e| Error::io(path, e))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // Exact when a == b or t == 0.
    a + (b - a) * t
}

/// Bilinear lookup through `sample(x, y)`.
/// `px`, `py` must lie in `[0, w-1] x [0, h-1]`.
#[inline]
fn bilinear(sample: impl Fn(usize, usize) -> f64, w: usize, h: usize, px: f64, py: f64) -> f64 {
    let x0 = px.floor() as usize;
    let y0 = py.floor() as usize;
    let fx = px - x0 as f64;
    let fy = py - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = lerp(sample(x0, y0), sample(x1, y0), fx);
    let bottom = lerp(sample(x0, y1), sample(x1, y1), fx);
    lerp(top, bottom, fy)
}

/// Resamples `flow` onto a larger grid with half-pixel-centered bilinear
/// interpolation and rescales the vectors into target pixel units.
pub fn upsample_flow(flow: &FlowField, target_w: usize, target_h: usize) -> Result<FlowField> {
    let (sw, sh) = flow.dims();
    if target_w < sw || target_h < sh {
        return Err(Error::Downscale {
            from_w: sw,
            from_h: sh,
            to_w: target_w,
            to_h: target_h,
        });
    }
    let rx = sw as f64 / target_w as f64;
    let ry = sh as f64 / target_h as f64;
    let scale_u = target_w as f64 / sw as f64;
    let scale_v = target_h as f64 / sh as f64;
    let src = |x: f64, r: f64, n: usize| ((x + 0.5) * r - 0.5).clamp(0.0, (n - 1) as f64);

    let mut vectors = Vec::with_capacity(target_w * target_h);
    for y in 0..target_h {
        let py = src(y as f64, ry, sh);
        for x in 0..target_w {
            let px = src(x as f64, rx, sw);
            let u = bilinear(|i, j| f64::from(flow.get(i, j)[0]), sw, sh, px, py);
            let v = bilinear(|i, j| f64::from(flow.get(i, j)[1]), sw, sh, px, py);
            vectors.push([(u * scale_u) as f32, (v * scale_v) as f32]);
        }
    }
    FlowField::new(target_w, target_h, vectors)
}

/// The three separately warped garment regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GarmentPart {
    LeftSleeve,
    RightSleeve,
    Torso,
}

impl GarmentPart {
    pub const ALL: [GarmentPart; 3] = [
        GarmentPart::LeftSleeve,
        GarmentPart::RightSleeve,
        GarmentPart::Torso,
    ];

    pub fn label(self) -> Label {
        match self {
            GarmentPart::LeftSleeve => Label::LeftGarment,
            GarmentPart::RightSleeve => Label::RightGarment,
            GarmentPart::Torso => Label::TorsoGarment,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GarmentPart::LeftSleeve => "left_sleeve",
            GarmentPart::RightSleeve => "right_sleeve",
            GarmentPart::Torso => "torso",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One value per garment part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerPart<T> {
    pub left: T,
    pub right: T,
    pub torso: T,
}

impl<T> PerPart<T> {
    pub fn from_fn(mut f: impl FnMut(GarmentPart) -> T) -> Self {
        PerPart {
            left: f(GarmentPart::LeftSleeve),
            right: f(GarmentPart::RightSleeve),
            torso: f(GarmentPart::Torso),
        }
    }

    pub fn get(&self, part: GarmentPart) -> &T {
        match part {
            GarmentPart::LeftSleeve => &self.left,
            GarmentPart::RightSleeve => &self.right,
            GarmentPart::Torso => &self.torso,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (GarmentPart, &T)> {
        GarmentPart::ALL.into_iter().map(move |p| (p, self.get(p)))
    }

    pub fn try_map<U>(&self, mut f: impl FnMut(GarmentPart, &T) -> Result<U>) -> Result<PerPart<U>> {
        Ok(PerPart {
            left: f(GarmentPart::LeftSleeve, &self.left)?,
            right: f(GarmentPart::RightSleeve, &self.right)?,
            torso: f(GarmentPart::Torso, &self.torso)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WarpedPart {
    pub part: GarmentPart,
    pub image: Image,
    /// Pixels where the warp landed fully inside the source and on the part.
    pub coverage: BinaryMask,
}

/// Backward-warps `source` by `flow`: each output pixel bilinearly samples
/// the source at its own position plus the displacement. Output dimensions
/// are the flow's; when the source grid differs, sample positions are scaled
/// by the source/flow size ratio.
pub fn apply_flow(
    source: &Image,
    source_alpha: &BinaryMask,
    flow: &FlowField,
    part: GarmentPart,
) -> Result<WarpedPart> {
    ensure_same_dims("source alpha", source.dims(), source_alpha.dims())?;
    let (sw, sh) = source.dims();
    let (fw, fh) = flow.dims();
    let ch = source.channels();
    let sx = sw as f64 / fw as f64;
    let sy = sh as f64 / fh as f64;
    let max_x = (sw - 1) as f64;
    let max_y = (sh - 1) as f64;

    let mut out = Image::filled(fw, fh, ch, 0.0)?;
    let mut coverage = BinaryMask::empty(fw, fh);
    for y in 0..fh {
        for x in 0..fw {
            let [u, v] = flow.get(x, y);
            let mut px = x as f64 + f64::from(u);
            let mut py = y as f64 + f64::from(v);
            if sw != fw {
                px *= sx;
            }
            if sh != fh {
                py *= sy;
            }
            if !(0.0..=max_x).contains(&px) || !(0.0..=max_y).contains(&py) {
                continue;
            }
            let alpha = bilinear(
                |i, j| if source_alpha.get(i, j) { 1.0 } else { 0.0 },
                sw,
                sh,
                px,
                py,
            );
            if alpha < 0.5 {
                continue;
            }
            coverage.set(x, y, true);
            for c in 0..ch {
                let value = bilinear(|i, j| source.get(i, j, c), sw, sh, px, py);
                out.set(x, y, c, value);
            }
        }
    }
    Ok(WarpedPart {
        part,
        image: out,
        coverage,
    })
}

/// The assembled warped garment.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    pub garment: Image,
    pub alpha: BinaryMask,
    /// Pixels assigned to a part by the global parsing but not covered by its warp.
    pub holes: BinaryMask,
}

/// Combines per-part warps, taking each pixel from the part the global
/// parsing assigns it to.
pub fn assemble_parts(parts: &[WarpedPart], global: &PerPart<BinaryMask>) -> Result<Assembly> {
    let mut slots: [Option<&WarpedPart>; 3] = [None; 3];
    for p in parts {
        if slots[p.part.index()].replace(p).is_some() {
            return Err(Error::DuplicatePart(p.part.name()));
        }
    }
    let mut ordered = Vec::with_capacity(3);
    for part in GarmentPart::ALL {
        ordered.push(slots[part.index()].ok_or(Error::MissingPart(part.name()))?);
    }

    let first = &ordered[0].image;
    let dims = first.dims();
    for p in &ordered {
        if !p.image.same_shape(first) {
            return Err(Error::DimensionMismatch(format!(
                "warped part {} differs in shape",
                p.part.name()
            )));
        }
        ensure_same_dims("part coverage", p.coverage.dims(), dims)?;
    }
    for (_, m) in global.iter() {
        ensure_same_dims("global parsing", m.dims(), dims)?;
    }

    let (w, h) = dims;
    let mut garment = Image::filled(w, h, first.channels(), 0.0)?;
    let mut alpha = BinaryMask::empty(w, h);
    let mut holes = BinaryMask::empty(w, h);
    for i in 0..w * h {
        let mut owner = None;
        for part in GarmentPart::ALL {
            if global.get(part).at(i) {
                if owner.is_some() {
                    return Err(Error::OverlappingParsing { index: i });
                }
                owner = Some(part);
            }
        }
        let Some(part) = owner else { continue };
        let warped = ordered[part.index()];
        let (x, y) = (i % w, i / w);
        if warped.coverage.at(i) {
            garment.pixel_mut(i).copy_from_slice(warped.image.pixel(i));
            alpha.set(x, y, true);
        } else {
            holes.set(x, y, true);
        }
    }
    Ok(Assembly {
        garment,
        alpha,
        holes,
    })
}

/// Synthetic flow fixtures, described by the transform that backward
/// warping should realize.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthFlow {
    Identity,
    Translate { dx: f64, dy: f64 },
    /// Row-major 2x3 matrix mapping output `(x, y, 1)` to source coordinates.
    Affine { matrix: [f64; 6] },
    /// Control pairs `(output point, source point)` with smoothing `lambda`.
    Tps {
        pairs: Vec<([f64; 2], [f64; 2])>,
        lambda: f64,
    },
}

impl SynthFlow {
    pub fn generate(&self, w: usize, h: usize) -> Result<FlowField> {
        synth_flow(self, w, h)
    }
}

impl fmt::Display for SynthFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthFlow::Identity => write!(f, "identity"),
            SynthFlow::Translate { dx, dy } => write!(f, "translate:{dx},{dy}"),
            SynthFlow::Affine { matrix: m } => write!(
                f,
                "affine:{},{},{},{},{},{}",
                m[0], m[1], m[2], m[3], m[4], m[5]
            ),
            SynthFlow::Tps { pairs, lambda } => {
                write!(f, "tps:{lambda}")?;
                for (p, q) in pairs {
                    write!(f, ":{},{}>{},{}", p[0], p[1], q[0], q[1])?;
                }
                Ok(())
            }
        }
    }
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad number in {s:?}: {e}")))?;
    if vals.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} numbers in {s:?}, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Parses `identity`, `translate:DX,DY`, `affine:A,B,C,D,E,F` or
/// `tps:LAMBDA:X,Y>X',Y':...`.
impl FromStr for SynthFlow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "identity" => Ok(SynthFlow::Identity),
            "translate" => {
                let v = parse_floats(rest, 2)?;
                Ok(SynthFlow::Translate { dx: v[0], dy: v[1] })
            }
            "affine" => {
                let v = parse_floats(rest, 6)?;
                Ok(SynthFlow::Affine {
                    matrix: v.try_into().unwrap(),
                })
            }
            "tps" => {
                let mut fields = rest.split(':');
                let lambda = fields
                    .next()
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidArgument(format!("bad tps lambda: {e}")))?;
                let pairs = fields
                    .map(|pair| {
                        let (p, q) = pair.split_once('>').ok_or_else(|| {
                            Error::InvalidArgument(format!("tps pair {pair:?} lacks '>'"))
                        })?;
                        let p = parse_floats(p, 2)?;
                        let q = parse_floats(q, 2)?;
                        Ok(([p[0], p[1]], [q[0], q[1]]))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SynthFlow::Tps { pairs, lambda })
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic flow {other:?}"
            ))),
        }
    }
}

/// Thin-plate radial kernel `r^2 log r^2`.
fn tps_kernel(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        r2 * r2.ln()
    }
}

struct ThinPlate {
    centers: Vec<[f64; 2]>,
    // Columns: x and y outputs. Rows: one weight per center, then a0, ax, ay.
    coeffs: DMatrix<f64>,
}

impl ThinPlate {
    fn fit(pairs: &[([f64; 2], [f64; 2])], lambda: f64) -> Result<Self> {
        let n = pairs.len();
        if n < 3 {
            return Err(Error::SingularTps(format!(
                "need at least 3 control points, got {n}"
            )));
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tps lambda must be >= 0, got {lambda}"
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                if pairs[i].0 == pairs[j].0 {
                    return Err(Error::SingularTps(format!(
                        "duplicate control point {:?}",
                        pairs[i].0
                    )));
                }
            }
        }
        // Non-collinear iff the centered scatter matrix has full rank.
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (p, _)| (a + p[0], b + p[1]));
        let (mx, my) = (mx / n as f64, my / n as f64);
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (p, _) in pairs {
            let (dx, dy) = (p[0] - mx, p[1] - my);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        let det = sxx * syy - sxy * sxy;
        if det <= 1e-12 * (sxx + syy).powi(2) {
            return Err(Error::SingularTps("control points are collinear".into()));
        }

        let size = n + 3;
        let mut system = DMatrix::<f64>::zeros(size, size);
        let mut rhs = DMatrix::<f64>::zeros(size, 2);
        for (i, (pi, qi)) in pairs.iter().enumerate() {
            for (j, (pj, _)) in pairs.iter().enumerate() {
                let r2 = (pi[0] - pj[0]).powi(2) + (pi[1] - pj[1]).powi(2);
                system[(i, j)] = tps_kernel(r2);
            }
            system[(i, i)] += lambda;
            let affine = [1.0, pi[0], pi[1]];
            for (k, a) in affine.into_iter().enumerate() {
                system[(i, n + k)] = a;
                system[(n + k, i)] = a;
            }
            rhs[(i, 0)] = qi[0];
            rhs[(i, 1)] = qi[1];
        }
        let coeffs = system
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SingularTps("thin-plate system is singular".into()))?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularTps("thin-plate solution is not finite".into()));
        }
        Ok(ThinPlate {
            centers: pairs.iter().map(|(p, _)| *p).collect(),
            coeffs,
        })
    }

    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let n = self.centers.len();
        let mut basis = DVector::<f64>::zeros(n + 3);
        for (i, c) in self.centers.iter().enumerate() {
            basis[i] = tps_kernel((x - c[0]).powi(2) + (y - c[1]).powi(2));
        }
        basis[n] = 1.0;
        basis[n + 1] = x;
        basis[n + 2] = y;
        let out = self.coeffs.tr_mul(&basis);
        [out[0], out[1]]
    }
}

/// Builds a flow whose backward warp realizes `kind`: `flow(p) = T(p) - p`.
pub fn synth_flow(kind: &SynthFlow, w: usize, h: usize) -> Result<FlowField> {
    match kind {
        SynthFlow::Identity => Ok(FlowField::zeros(w, h)),
        SynthFlow::Translate { dx, dy } => FlowField::constant(w, h, *dx as f32, *dy as f32),
        SynthFlow::Affine { matrix: m } => FlowField::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            [
                m[0] * x + m[1] * y + m[2] - x,
                m[3] * x + m[4] * y + m[5] - y,
            ]
        }),
        SynthFlow::Tps { pairs, lambda } => {
            let tps = ThinPlate::fit(pairs, *lambda)?;
            FlowField::from_fn(w, h, |x, y| {
                let (xf, yf) = (x as f64, y as f64);
                let [tx, ty] = tps.eval(xf, yf);
                [tx - xf, ty - yf]
            })
        }
    }
}
