//! Binary erosion with a square structuring element and the narrow bands
//! derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Structuring element size and erosion count for narrow bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSpec {
    pub kernel_size: usize,
    pub iterations: usize,
}

impl Default for BandSpec {
    fn default() -> Self {
        BandSpec {
            kernel_size: 3,
            iterations: 5,
        }
    }
}

impl BandSpec {
    pub fn new(kernel_size: usize, iterations: usize) -> Result<Self> {
        let spec = BandSpec {
            kernel_size,
            iterations,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel size must be odd and >= 1, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.kernel_size / 2
    }
}

/// One pass of a 1-D minimum filter of radius `r` over `len` samples spaced
/// `stride` apart, treating positions outside the line as unset.
fn min_filter_line(src: &[bool], dst: &mut [bool], start: usize, len: usize, stride: usize, r: usize) {
    // Length of the run of set samples ending at each position decides the
    // result: out[i] is set iff src[i-r..=i+r] are all set and in range.
    let mut run = 0usize;
    let mut runs = vec![0usize; len];
    for (i, slot) in runs.iter_mut().enumerate() {
        run = if src[start + i * stride] { run + 1 } else { 0 };
        *slot = run;
    }
    for i in 0..len {
        let hi = i + r;
        dst[start + i * stride] = i >= r && hi < len && runs[hi] > 2 * r;
    }
}

fn erode_once(mask: &BinaryMask, r: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    let src = mask.bits();
    // A square element is separable: rows, then columns.
    let mut rows = vec![false; w * h];
    for y in 0..h {
        min_filter_line(src, &mut rows, y * w, w, 1, r);
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        min_filter_line(&rows, &mut out, x, h, w, r);
    }
    BinaryMask::new(w, h, out).expect("same dims")
}

/// Applies `spec.iterations` erosions with a `k x k` square element. Pixels
/// outside the frame count as background.
pub fn erode(mask: &BinaryMask, spec: &BandSpec) -> Result<BinaryMask> {
    spec.validate()?;
    let r = spec.radius();
    let mut out = mask.clone();
    if r == 0 {
        return Ok(out);
    }
    for _ in 0..spec.iterations {
        if out.is_empty() {
            break;
        }
        out = erode_once(&out, r);
    }
    Ok(out)
}

/// The mask minus its n-fold erosion.
pub fn narrow_band(mask: &BinaryMask, spec: &BandSpec) -> Result<BinaryMask> {
    mask.difference(&erode(mask, spec)?)
}

/// Chebyshev distance from each pixel to the nearest unset pixel, with the
/// area outside the frame unset. Unset pixels get 0; a set pixel on the
/// boundary gets 1.
pub fn chebyshev_depth(mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = mask.dims();
    let inf = w.max(h) + 1;
    let mut d: Vec<usize> = mask.bits().iter().map(|&b| if b { inf } else { 0 }).collect();
    let at = |x: isize, y: isize, d: &[usize]| -> usize {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            d[y as usize * w + x as usize]
        }
    };
    // Two-pass chamfer with unit weights on all eight neighbors.
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let best = [(-1, -1), (0, -1), (1, -1), (-1, 0)]
                .iter()
                .map(|&(dx, dy)| at(x + dx, y + dy, &d))
                .min()
                .unwrap();
            d[i] = d[i].min(best + 1);
        }
    }
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let i = y as usize * w + x as usize;
            if d[i] == 0 {
                continue;
            }
            let best = [(1, 1), (0, 1), (-1, 1), (1, 0)]
                .iter()
                .map(|&(dx, dy)| at(x + dx, y + dy, &d))
                .min()
                .unwrap();
            d[i] = d[i].min(best + 1);
        }
    }
    d
}

/// Width of `band` measured inside `mask`: the largest Chebyshev depth of any
/// band pixel. Zero for an empty band.
pub fn band_width(band: &BinaryMask, mask: &BinaryMask) -> usize {
    let depth = chebyshev_depth(mask);
    band.bits()
        .iter()
        .zip(depth)
        .filter(|(&b, _)| b)
        .map(|(_, d)| d)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct min over the k x k window, repeated n times.
    fn erode_oracle(mask: &BinaryMask, k: usize, n: usize) -> BinaryMask {
        let r = (k / 2) as isize;
        let (w, h) = mask.dims();
        let mut cur = mask.clone();
        for _ in 0..n {
            let prev = cur.clone();
            cur = BinaryMask::from_fn(w, h, |x, y| {
                (-r..=r).all(|dy| {
                    (-r..=r).all(|dx| {
                        let (nx, ny) = (x as isize + dx, y as isize + dy);
                        nx >= 0
                            && ny >= 0
                            && nx < w as isize
                            && ny < h as isize
                            && prev.get(nx as usize, ny as usize)
                    })
                })
            });
        }
        cur
    }

    fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side)
    }

    #[test]
    fn full_5x5_erodes_to_interior() {
        let out = erode(&BinaryMask::full(5, 5), &BandSpec::new(3, 1).unwrap()).unwrap();
        assert_eq!(out, square(5, 5, 1, 1, 3));
        assert_eq!(out, erode_oracle(&BinaryMask::full(5, 5), 3, 1));
    }

    #[test]
    fn zero_iterations_is_identity() {
        let m = BinaryMask::from_fn(9, 7, |x, y| (x * 3 + y) % 4 != 0);
        assert_eq!(erode(&m, &BandSpec::new(3, 0).unwrap()).unwrap(), m);
        assert!(narrow_band(&m, &BandSpec::new(3, 0).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn ten_square_vanishes_after_five() {
        let m = square(20, 20, 5, 5, 10);
        let spec = BandSpec::new(3, 5).unwrap();
        assert!(erode(&m, &spec).unwrap().is_empty());
        assert!(!erode(&m, &BandSpec::new(3, 4).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn ring_of_twenty_square() {
        let m = square(30, 30, 5, 5, 20);
        let band = narrow_band(&m, &BandSpec::default()).unwrap();
        assert_eq!(band.count(), 300);
        let depth = chebyshev_depth(&m);
        for i in 0..900 {
            assert_eq!(band.at(i), m.at(i) && depth[i] <= 5);
        }
        assert_eq!(band_width(&band, &m), 5);
    }

    #[test]
    fn empty_mask_has_empty_band() {
        assert!(narrow_band(&BinaryMask::empty(8, 8), &BandSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn larger_kernel_matches_oracle() {
        let m = BinaryMask::from_fn(23, 17, |x, y| (x as i32 - 11).pow(2) + (y as i32 - 8).pow(2) < 60);
        for k in [1, 3, 5, 7] {
            for n in 0..4 {
                let spec = BandSpec::new(k, n).unwrap();
                assert_eq!(erode(&m, &spec).unwrap(), erode_oracle(&m, k, n), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(BandSpec::new(4, 1).is_err());
        assert!(BandSpec::new(0, 1).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (3usize..20, 3usize..20).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop::bool::weighted(0.75), w * h)
                .prop_map(move |bits| BinaryMask::new(w, h, bits).unwrap())
        })
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (3usize..16, 3usize..16).prop_flat_map(|(w, h)| {
            let bits = || proptest::collection::vec(prop::bool::weighted(0.8), w * h);
            (bits(), bits()).prop_map(move |(a, b)| {
                (BinaryMask::new(w, h, a).unwrap(), BinaryMask::new(w, h, b).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn matches_bruteforce(m in arb_mask(), k in prop::sample::select(vec![1usize, 3, 5]), n in 0usize..4) {
            prop_assert_eq!(erode(&m, &BandSpec::new(k, n).unwrap()).unwrap(), erode_oracle(&m, k, n));
        }

        #[test]
        fn anti_extensive_and_partition(m in arb_mask(), n in 0usize..6) {
            let spec = BandSpec::new(3, n).unwrap();
            let e = erode(&m, &spec).unwrap();
            let b = narrow_band(&m, &spec).unwrap();
            prop_assert!(e.is_subset_of(&m));
            prop_assert!(b.is_subset_of(&m));
            prop_assert!(b.is_disjoint_from(&e));
            prop_assert_eq!(b.union(&e).unwrap(), m.clone());
            let depth = chebyshev_depth(&m);
            for i in 0..depth.len() {
                if b.at(i) {
                    prop_assert!(depth[i] <= n);
                }
            }
        }

        #[test]
        fn monotone_and_commutes_with_intersection((a, b) in arb_pair(), n in 0usize..4) {
            let spec = BandSpec::new(3, n).unwrap();
            let ab = a.intersection(&b).unwrap();
            let ea = erode(&a, &spec).unwrap();
            let eb = erode(&b, &spec).unwrap();
            prop_assert!(erode(&ab, &spec).unwrap().is_subset_of(&ea));
            prop_assert_eq!(erode(&ab, &spec).unwrap(), ea.intersection(&eb).unwrap());
            let aub = a.union(&b).unwrap();
            prop_assert!(ea.is_subset_of(&erode(&aub, &spec).unwrap()));
        }

        #[test]
        fn iterations_compose(m in arb_mask(), a in 0usize..4, b in 0usize..4) {
            let twice = erode(&erode(&m, &BandSpec::new(3, a).unwrap()).unwrap(), &BandSpec::new(3, b).unwrap()).unwrap();
            prop_assert_eq!(twice, erode(&m, &BandSpec::new(3, a + b).unwrap()).unwrap());
        }

        #[test]
        fn bands_are_nested(m in arb_mask(), a in 0usize..5, extra in 0usize..5) {
            let small = narrow_band(&m, &BandSpec::new(3, a).unwrap()).unwrap();
            let big = narrow_band(&m, &BandSpec::new(3, a + extra).unwrap()).unwrap();
            prop_assert!(small.is_subset_of(&big));
        }
    }
}
