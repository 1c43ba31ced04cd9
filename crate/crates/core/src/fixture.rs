//! Deterministic synthetic try-on scene: a person wearing a three-part
//! garment, the matching flat garment, and their parsing maps.

use crate::raster::{Image, Label, ParsingMap};

#[derive(Clone, Debug)]
pub struct Scene {
    pub person: Image,
    pub parsing: ParsingMap,
    pub garment: Image,
    pub garment_parsing: ParsingMap,
}

struct Layout {
    w: usize,
    h: usize,
}

impl Layout {
    fn x(&self, f: f64) -> usize {
        ((f * self.w as f64).round() as usize).min(self.w)
    }

    fn y(&self, f: f64) -> usize {
        ((f * self.h as f64).round() as usize).min(self.h)
    }

    fn rect(&self, map: &mut ParsingMap, x0: f64, y0: f64, x1: f64, y1: f64, label: Label) {
        map.fill_rect(self.x(x0), self.y(y0), self.x(x1), self.y(y1), label);
    }
}

fn person_parsing(l: &Layout) -> ParsingMap {
    let mut map = ParsingMap::filled(l.w, l.h, Label::Background);
    let (cx, cy, r) = (0.5 * l.w as f64, 0.13 * l.h as f64, 0.085 * l.h as f64);
    for y in 0..l.h {
        for x in 0..l.w {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            if dx * dx + dy * dy <= r * r {
                map.set(x, y, Label::HeadHair);
            }
        }
    }
    l.rect(&mut map, 0.43, 0.2, 0.57, 0.26, Label::Neck);
    l.rect(&mut map, 0.3, 0.26, 0.7, 0.7, Label::TorsoGarment);
    l.rect(&mut map, 0.07, 0.26, 0.3, 0.56, Label::LeftGarment);
    l.rect(&mut map, 0.7, 0.26, 0.93, 0.56, Label::RightGarment);
    l.rect(&mut map, 0.1, 0.56, 0.27, 0.63, Label::LeftHand);
    l.rect(&mut map, 0.73, 0.56, 0.9, 0.63, Label::RightHand);
    l.rect(&mut map, 0.3, 0.7, 0.7, 1.0, Label::LowerBody);
    map
}

/// Garment texture: stripes plus a blocky "logo" on the torso.
fn garment_color(x: usize, y: usize, label: Label, l: &Layout) -> [f64; 3] {
    let stripe = ((x + 2 * y) / 3).is_multiple_of(2);
    let base = match label {
        Label::LeftGarment => [0.75, 0.2, 0.2],
        Label::RightGarment => [0.2, 0.6, 0.25],
        _ => [0.2, 0.3, 0.8],
    };
    let (lx0, ly0, lx1, ly1) = (l.x(0.42), l.y(0.36), l.x(0.58), l.y(0.46));
    if label == Label::TorsoGarment && (lx0..lx1).contains(&x) && (ly0..ly1).contains(&y) {
        let on = ((x - lx0) / 2 + (y - ly0) / 2).is_multiple_of(2);
        return if on { [1.0, 0.95, 0.1] } else { [0.05, 0.05, 0.05] };
    }
    let k = if stripe { 1.0 } else { 0.8 };
    [base[0] * k, base[1] * k, base[2] * k]
}

/// Builds the scene at `w x h`. Parts are large enough for 10-pixel bands
/// from roughly 192x256 upward.
pub fn synthetic_scene(w: usize, h: usize) -> Scene {
    let l = Layout { w, h };
    let parsing = person_parsing(&l);
    let mut person = Image::filled(w, h, 3, 0.0).unwrap();
    let mut garment = Image::filled(w, h, 3, 1.0).unwrap();
    let mut garment_parsing = ParsingMap::filled(w, h, Label::Background);
    for y in 0..h {
        for x in 0..w {
            let label = parsing.get(x, y);
            let color = match label {
                Label::Background => {
                    let t = y as f64 / h as f64;
                    [0.85 - 0.2 * t, 0.85 - 0.1 * t, 0.9]
                }
                Label::HeadHair => {
                    if y < l.y(0.1) {
                        [0.15, 0.1, 0.05]
                    } else {
                        [0.93, 0.76, 0.64]
                    }
                }
                Label::Neck | Label::LeftHand | Label::RightHand => [0.9, 0.72, 0.6],
                Label::LowerBody => [0.1, 0.12, 0.3],
                Label::LeftGarment | Label::RightGarment | Label::TorsoGarment => {
                    let c = garment_color(x, y, label, &l);
                    garment_parsing.set(x, y, label);
                    for (ch, v) in c.iter().enumerate() {
                        garment.set(x, y, ch, *v);
                    }
                    c
                }
            };
            for (ch, v) in color.iter().enumerate() {
                person.set(x, y, ch, *v);
            }
        }
    }
    Scene {
        person,
        parsing,
        garment,
        garment_parsing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::GarmentPart;
    use crate::morph::{band_width, narrow_band, BandSpec};
    use crate::raster::mask_from_labels;

    #[test]
    fn parts_support_requested_band_widths() {
        for (w, h, max_n) in [(48, 64, 5), (192, 256, 10)] {
            let scene = synthetic_scene(w, h);
            for part in GarmentPart::ALL {
                let m = mask_from_labels(&scene.parsing, &[part.label()]);
                for n in 1..=max_n {
                    let band = narrow_band(&m, &BandSpec::new(3, n).unwrap()).unwrap();
                    assert_eq!(band_width(&band, &m), n, "{w}x{h} {part:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn garment_matches_worn_garment() {
        let scene = synthetic_scene(48, 64);
        for i in 0..48 * 64 {
            if scene.garment_parsing.labels()[i] != Label::Background {
                assert_eq!(scene.garment.pixel(i), scene.person.pixel(i));
            }
        }
    }
}
