//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use dualfit_cli::{cmd_ablate_band, cmd_pipeline, write_fixture, PipelineConfig, Resolution};
use dualfit_core::io::{load_image, load_mask};
use dualfit_core::morph::chebyshev_depth;
use dualfit_core::{
    apply_flow, assemble_parts, band_width, erode, harmonic_inpaint, mse, narrow_band, psnr, ssim,
    upsample_flow, BandSpec, BinaryMask, FlowField, GarmentPart, Image, PerPart, Psnr, SolverSpec,
    SynthFlow,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_image(rng: &mut StdRng, w: usize, h: usize, ch: usize) -> Image {
    let bytes: Vec<u8> = (0..w * h * ch).map(|_| rng.gen()).collect();
    Image::from_u8(w, h, ch, &bytes).unwrap()
}

/// Masks of mixed character: sparse noise, dense noise and unions of boxes.
fn random_mask(rng: &mut StdRng, w: usize, h: usize) -> BinaryMask {
    match rng.gen_range(0..3) {
        0 | 1 => {
            let p: f64 = rng.gen_range(0.2..0.95);
            BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(p)).collect()).unwrap()
        }
        _ => {
            let mut bits = vec![false; w * h];
            for _ in 0..rng.gen_range(1..6) {
                let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
                let (x1, y1) = (rng.gen_range(x0..=w), rng.gen_range(y0..=h));
                for y in y0..y1 {
                    for x in x0..x1 {
                        bits[y * w + x] = true;
                    }
                }
            }
            BinaryMask::new(w, h, bits).unwrap()
        }
    }
}

/// One erosion step by direct neighborhood minimum; outside the frame is 0.
fn erode_once_oracle(m: &BinaryMask, r: usize) -> BinaryMask {
    let (w, h) = m.dims();
    let r = r as isize;
    BinaryMask::from_fn(w, h, |x, y| {
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let (xx, yy) = (x as isize + dx, y as isize + dy);
                xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h && m.get(xx as usize, yy as usize)
            })
        })
    })
}

fn erode_oracle(m: &BinaryMask, spec: &BandSpec) -> BinaryMask {
    (0..spec.iterations).fold(m.clone(), |acc, _| erode_once_oracle(&acc, spec.radius()))
}

fn morphology_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(11);
    let mut mismatched = 0usize;
    let mut checked = 0usize;
    for i in 0..200 {
        let mask = random_mask(&mut rng, 48, 64);
        let spec = BandSpec::new([1, 3, 5][i % 3], rng.gen_range(0..=6)).unwrap();
        let want = erode_oracle(&mask, &spec);
        let got = erode(&mask, &spec).unwrap();
        let band = narrow_band(&mask, &spec).unwrap();
        let want_band = mask.difference(&want).unwrap();
        for p in 0..48 * 64 {
            mismatched += usize::from(got.at(p) != want.at(p)) + usize::from(band.at(p) != want_band.at(p));
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    check(mismatched == 0, format!("{mismatched} mismatched pixels"))?;
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("{checked} masks, 0 mismatches, {:.2}s", elapsed.as_secs_f64()))
}

fn partition_identity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(12);
    let mut cases = 0;
    for _ in 0..200 {
        let mask = random_mask(&mut rng, 48, 64);
        for n in [0, 1, 2, 5, 10] {
            let spec = BandSpec::new(3, n).unwrap();
            let band = narrow_band(&mask, &spec).unwrap();
            let core = erode(&mask, &spec).unwrap();
            check(band.union(&core).unwrap() == mask, format!("union differs from mask at n={n}"))?;
            check(band.is_disjoint_from(&core), format!("band meets core at n={n}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} mask/n cases exact"))
}

fn band_width_rectangles() -> Outcome {
    let mut rows = Vec::new();
    for &(w, h, x0, y0, x1, y1) in &[(64, 64, 4, 6, 60, 58), (96, 80, 10, 5, 90, 75), (48, 64, 0, 0, 48, 64)] {
        let rect = BinaryMask::from_fn(w, h, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y));
        for n in [2, 5, 10] {
            let band = narrow_band(&rect, &BandSpec::new(3, n).unwrap()).unwrap();
            let measured = band_width(&band, &rect);
            check(measured == n, format!("{w}x{h} rectangle, n={n}: width {measured}"))?;
            let depth = chebyshev_depth(&rect);
            let exact = (0..w * h).all(|p| band.at(p) == (depth[p] >= 1 && depth[p] <= n));
            check(exact, format!("{w}x{h} rectangle, n={n}: band is not the depth<=n ring"))?;
        }
        rows.push(format!("{w}x{h}"));
    }
    Ok(format!("width == n for n in {{2,5,10}} on {}", rows.join(", ")))
}

fn warp_shift_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(13);
    let (w, h) = (48usize, 64usize);
    let mut samples = 0usize;
    for _ in 0..100 {
        let img = random_image(&mut rng, w, h, 3);
        let alpha = if rng.gen_bool(0.5) {
            BinaryMask::full(w, h)
        } else {
            BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(0.7)).collect()).unwrap()
        };
        let (dx, dy) = (rng.gen_range(-12i32..=12), rng.gen_range(-12i32..=12));
        let flow = FlowField::constant(w, h, dx as f32, dy as f32).unwrap();
        let out = apply_flow(&img, &alpha, &flow, GarmentPart::Torso).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = (x as i32 + dx, y as i32 + dy);
                let inside = sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h;
                let covered = inside && alpha.get(sx as usize, sy as usize);
                check(
                    out.coverage.get(x, y) == covered,
                    format!("coverage mismatch at ({x},{y}) shift ({dx},{dy})"),
                )?;
                if covered {
                    for c in 0..3 {
                        samples += 1;
                        check(
                            out.image.get(x, y, c) == img.get(sx as usize, sy as usize, c),
                            format!("sample mismatch at ({x},{y},{c}) shift ({dx},{dy})"),
                        )?;
                    }
                } else {
                    check(
                        out.image.pixel(y * w + x).iter().all(|&v| v == 0.0),
                        format!("uncovered pixel ({x},{y}) not zero"),
                    )?;
                }
            }
        }
    }
    Ok(format!("100 images, {samples} covered samples, 0 mismatches"))
}

/// Half-pixel-centered bilinear resampling, coordinates clamped to the grid.
fn upsample_oracle(src: &FlowField, tw: usize, th: usize, x: usize, y: usize) -> [f64; 2] {
    let (sw, sh) = src.dims();
    let fx = ((x as f64 + 0.5) * sw as f64 / tw as f64 - 0.5).clamp(0.0, (sw - 1) as f64);
    let fy = ((y as f64 + 0.5) * sh as f64 / th as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
    let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
    let scale = [tw as f64 / sw as f64, th as f64 / sh as f64];
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        let v = |xx: usize, yy: usize| src.get(xx, yy)[c] as f64;
        let val = v(x0, y0) * (1.0 - ax) * (1.0 - ay)
            + v(x1, y0) * ax * (1.0 - ay)
            + v(x0, y1) * (1.0 - ax) * ay
            + v(x1, y1) * ax * ay;
        *o = val * scale[c];
    }
    out
}

fn upsampling() -> Outcome {
    let mut rng = StdRng::seed_from_u64(14);
    for &(sw, sh, tw, th) in &[(24, 32, 48, 64), (24, 32, 36, 48), (384, 512, 768, 1024), (5, 7, 5, 7)] {
        for _ in 0..5 {
            let (u, v) = (rng.gen_range(-20.0f32..20.0), rng.gen_range(-20.0f32..20.0));
            let up = upsample_flow(&FlowField::constant(sw, sh, u, v).unwrap(), tw, th).unwrap();
            let want = [
                (u as f64 * tw as f64 / sw as f64) as f32,
                (v as f64 * th as f64 / sh as f64) as f32,
            ];
            check(
                up.vectors().iter().all(|&p| p == want),
                format!("constant ({u},{v}) {sw}x{sh}->{tw}x{th} not exact"),
            )?;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let vecs: Vec<[f32; 2]> = (0..4).map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]).collect();
        let src = FlowField::new(2, 2, vecs).unwrap();
        let up = upsample_flow(&src, 4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let want = upsample_oracle(&src, 4, 4, x, y);
                let got = up.get(x, y);
                for c in 0..2 {
                    worst = worst.max((got[c] as f64 - want[c]).abs());
                }
            }
        }
    }
    check(worst <= 1e-6, format!("2x2->4x4 max error {worst:e}"))?;
    Ok(format!("constants exact; 2x2->4x4 max error {worst:.1e}"))
}

fn assembly_partition() -> Outcome {
    let mut rng = StdRng::seed_from_u64(15);
    let (w, h) = (40usize, 56usize);
    for i in 0..100 {
        // Disjoint global part masks from a random label field.
        let owner: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..4)).collect();
        let global = PerPart::from_fn(|p| {
            let k = match p {
                GarmentPart::LeftSleeve => 1,
                GarmentPart::RightSleeve => 2,
                GarmentPart::Torso => 3,
            };
            BinaryMask::new(w, h, owner.iter().map(|&o| o == k).collect()).unwrap()
        });
        let parts: Vec<_> = [GarmentPart::LeftSleeve, GarmentPart::RightSleeve, GarmentPart::Torso]
            .into_iter()
            .map(|part| {
                let img = random_image(&mut rng, w, h, 3);
                let alpha = random_mask(&mut rng, w, h);
                let kind = SynthFlow::Translate {
                    dx: rng.gen_range(-6.0..6.0),
                    dy: rng.gen_range(-6.0..6.0),
                };
                let flow = kind.generate(w, h).unwrap();
                apply_flow(&img, &alpha, &flow, part).unwrap()
            })
            .collect();
        let asm = assemble_parts(&parts, &global).unwrap();
        let union = global
            .iter()
            .fold(BinaryMask::empty(w, h), |acc, (_, m)| acc.union(m).unwrap());
        check(asm.alpha.is_disjoint_from(&asm.holes), format!("fixture {i}: alpha meets holes"))?;
        check(asm.alpha.is_subset_of(&union), format!("fixture {i}: alpha outside parsing"))?;
        check(asm.holes.is_subset_of(&union), format!("fixture {i}: holes outside parsing"))?;
        check(
            asm.alpha.union(&asm.holes).unwrap() == union,
            format!("fixture {i}: alpha and holes do not cover the parsing"),
        )?;
    }
    Ok("100 fixtures exact".into())
}

/// 4-connected components of `mask`.
fn components(mask: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask.at(start) || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            let (x, y) = (p % w, p / w);
            let mut nb = Vec::with_capacity(4);
            if x > 0 { nb.push(p - 1) }
            if x + 1 < w { nb.push(p + 1) }
            if y > 0 { nb.push(p - w) }
            if y + 1 < h { nb.push(p + w) }
            for q in nb {
                if mask.at(q) && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        out.push(comp);
    }
    out
}

fn harmonic_solver() -> Outcome {
    let start = Instant::now();
    let spec = SolverSpec { tolerance: 1e-5, max_iterations: 10000 };
    let (w, h) = (64usize, 64usize);
    let mut ramp = Image::filled(w, h, 3, 0.0).unwrap();
    for y in 0..h {
        for x in 0..w {
            ramp.set(x, y, 0, 0.1 + 0.8 * x as f64 / 63.0);
            ramp.set(x, y, 1, 0.9 - 0.7 * y as f64 / 63.0);
            ramp.set(x, y, 2, 0.2 + 0.3 * x as f64 / 63.0 + 0.4 * y as f64 / 63.0);
        }
    }
    let hole = BinaryMask::from_fn(w, h, |x, y| (22..42).contains(&x) && (22..42).contains(&y));
    let mut damaged = ramp.clone();
    for p in 0..w * h {
        if hole.at(p) {
            damaged.pixel_mut(p).fill(0.5);
        }
    }
    let out = harmonic_inpaint(&damaged, &hole, &spec).map_err(|e| e.to_string())?;
    check(out.converged(), "ramp solve did not converge")?;
    let err = ramp
        .data()
        .iter()
        .zip(out.image.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(err <= 2.0 * spec.tolerance, format!("ramp error {err:e}"))?;
    let mut max_iters = out.iterations;

    let mut rng = StdRng::seed_from_u64(16);
    for i in 0..100 {
        let (w, h) = (rng.gen_range(8..40), rng.gen_range(8..40));
        let img = random_image(&mut rng, w, h, 3);
        let mut mask = random_mask(&mut rng, w, h);
        if mask.count() == w * h {
            mask.set(0, 0, false);
        }
        let res = harmonic_inpaint(&img, &mask, &spec).map_err(|e| format!("fixture {i}: {e}"))?;
        check(res.converged(), format!("fixture {i} did not converge"))?;
        max_iters = max_iters.max(res.iterations);
        for comp in components(&mask) {
            for c in 0..3 {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &p in &comp {
                    let (x, y) = (p % w, p / w);
                    let nbs = [
                        (x > 0).then(|| p - 1),
                        (x + 1 < w).then(|| p + 1),
                        (y > 0).then(|| p - w),
                        (y + 1 < h).then(|| p + w),
                    ];
                    for q in nbs.into_iter().flatten().filter(|&q| !mask.at(q)) {
                        lo = lo.min(img.pixel(q)[c]);
                        hi = hi.max(img.pixel(q)[c]);
                    }
                }
                for &p in &comp {
                    let v = res.image.pixel(p)[c];
                    check(v >= lo && v <= hi, format!("fixture {i}: {v} outside [{lo}, {hi}]"))?;
                }
            }
        }
        for p in 0..w * h {
            if !mask.at(p) {
                check(res.image.pixel(p) == img.pixel(p), format!("fixture {i}: known pixel changed"))?;
            }
        }
    }
    check(max_iters < 10000, format!("needed {max_iters} iterations"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "ramp error {err:.1e}, max principle on 100 fixtures, max {max_iters} iterations, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn metric_closed_forms() -> Outcome {
    let x = Image::filled(32, 24, 3, 100.0 / 255.0).unwrap();
    let y = Image::filled(32, 24, 3, 116.0 / 255.0).unwrap();
    let db = psnr(&x, &y).unwrap().finite().ok_or("psnr infinite")?;
    check((db - 24.0486).abs() <= 1e-3, format!("psnr {db}"))?;

    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..20 {
        let img = random_image(&mut rng, 40, 30, 3);
        let s = ssim(&img, &img).unwrap();
        check(s == 1.0, format!("ssim(x,x) = {s}"))?;
    }
    check(psnr(&x, &x).unwrap() == Psnr::Infinite, "psnr(x,x) not infinite")?;

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = random_image(&mut rng, 24, 20, 3);
        let b = random_image(&mut rng, 24, 20, 3);
        let m = mse(&a, &b).unwrap();
        let p = psnr(&a, &b).unwrap().finite().ok_or("unexpected infinite psnr")?;
        worst = worst.max((p - 10.0 * (1.0 / m).log10()).abs());
        worst = worst.max((10f64.powf(-p / 10.0) - m).abs());
    }
    check(worst <= 1e-9, format!("psnr/mse identity error {worst:e}"))?;
    Ok(format!("psnr {db:.4} dB, ssim(x,x) = 1, identity error {worst:.1e}"))
}

fn bundled_fixture(dir: &std::path::Path) -> Result<PipelineConfig, String> {
    let path = write_fixture(dir, Resolution::new(192, 256), Resolution::new(96, 128)).map_err(|e| e.to_string())?;
    PipelineConfig::from_file(&path).map_err(|e| e.to_string())
}

fn pipeline_preservation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = bundled_fixture(dir.path())?;
    cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    let read = |name: &str| std::fs::read(cfg.output_path(name)).map_err(|e| e.to_string());
    let preserved = load_image(cfg.output_path("preserved.png")).map_err(|e| e.to_string())?;
    let tryon = load_image(cfg.output_path("tryon.png")).map_err(|e| e.to_string())?;
    let mask = load_mask(cfg.output_path("inpaint_mask.png")).map_err(|e| e.to_string())?;
    let (pb, ob) = (preserved.to_u8(), tryon.to_u8());
    let ch = preserved.channels();
    let mut kept = 0;
    for p in 0..mask.width() * mask.height() {
        if !mask.at(p) {
            check(pb[p * ch..(p + 1) * ch] == ob[p * ch..(p + 1) * ch], format!("pixel {p} changed outside M"))?;
            kept += 1;
        }
    }
    let first = read("tryon.png")?;
    cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    check(read("tryon.png")? == first, "rerun output differs")?;
    Ok(format!("{kept} unmasked pixels bit-exact, rerun bit-identical"))
}

fn ablation_harness() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = bundled_fixture(dir.path())?;
    let manifest = cmd_ablate_band(&cfg, &[2, 5, 10], None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rows = manifest.ablation.ok_or("no ablation report")?.rows;
    check(rows.len() == 3, format!("{} rows", rows.len()))?;
    check(rows.iter().map(|r| r.n).eq([2, 5, 10]), "rows not ordered by n")?;
    let areas: Vec<usize> = rows.iter().map(|r| r.mask_area).collect();
    check(areas.windows(2).all(|a| a[0] <= a[1]), format!("mask areas {areas:?}"))?;
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("|M| = {areas:?}, {:.2}s", elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("morphology oracle equivalence", morphology_oracle),
        ("band partition identity", partition_identity),
        ("band width on rectangles", band_width_rectangles),
        ("warp shift oracle", warp_shift_oracle),
        ("flow upsampling", upsampling),
        ("assembly partition", assembly_partition),
        ("harmonic solver", harmonic_solver),
        ("metric closed forms", metric_closed_forms),
        ("pipeline preservation", pipeline_preservation),
        ("ablation harness", ablation_harness),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
