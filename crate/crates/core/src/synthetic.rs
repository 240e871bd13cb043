//! Procedurally rendered digit images for smoke runs and tests that must not
//! depend on an external dataset.
//!
//! Each class is a seven-segment style glyph (with a diagonal for 1, 4 and
//! 7) drawn with antialiased strokes under a random affine jitter, random
//! stroke width, endpoint wobble and additive noise.

use crate::dataio::{LabeledDataset, Provenance, SourceFormat, CLASSES, IMAGE_PIXELS, IMAGE_SIDE};
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::Tensor;

type Segment = ((f64, f64), (f64, f64));

// Glyph box coordinates in [-1, 1]^2, y pointing down.
const TOP: Segment = ((-0.5, -0.8), (0.5, -0.8));
const MID: Segment = ((-0.5, 0.0), (0.5, 0.0));
const BOT: Segment = ((-0.5, 0.8), (0.5, 0.8));
const UL: Segment = ((-0.5, -0.8), (-0.5, 0.0));
const UR: Segment = ((0.5, -0.8), (0.5, 0.0));
const LL: Segment = ((-0.5, 0.0), (-0.5, 0.8));
const LR: Segment = ((0.5, 0.0), (0.5, 0.8));

fn glyph(class: usize) -> Vec<Segment> {
    match class {
        0 => vec![TOP, BOT, UL, UR, LL, LR],
        1 => vec![UR, LR, ((0.1, -0.5), (0.5, -0.8))],
        2 => vec![TOP, UR, MID, LL, BOT],
        3 => vec![TOP, UR, MID, LR, BOT],
        4 => vec![UL, MID, UR, LR, ((-0.5, 0.0), (0.2, -0.8))],
        5 => vec![TOP, UL, MID, LR, BOT],
        6 => vec![TOP, UL, MID, LL, LR, BOT],
        7 => vec![TOP, ((0.5, -0.8), (-0.1, 0.8))],
        8 => vec![TOP, MID, BOT, UL, UR, LL, LR],
        _ => vec![TOP, UL, UR, MID, LR, BOT],
    }
}

fn dist_to_segment(p: (f64, f64), s: Segment) -> f64 {
    let ((x0, y0), (x1, y1)) = s;
    let (dx, dy) = (x1 - x0, y1 - y0);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - x0) * dx + (p.1 - y0) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (x0 + t * dx, y0 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Renders one jittered sample of `class` as 32x32 values in `[0, 1]`.
pub fn render_digit(class: usize, rng: &mut Rng) -> Vec<f32> {
    let mut jitter = |scale: f64| (rng.uniform() * 2.0 - 1.0) * scale;
    let angle = jitter(0.25);
    let shear = jitter(0.25);
    let sx = 9.0 * (1.0 + jitter(0.15));
    let sy = 11.0 * (1.0 + jitter(0.15));
    let (cx, cy) = (15.5 + jitter(2.5), 15.5 + jitter(2.5));
    let width = 1.1 + jitter(0.5).abs() * 1.6;
    let segments: Vec<Segment> = glyph(class)
        .into_iter()
        .map(|((x0, y0), (x1, y1))| {
            (
                (x0 + jitter(0.12), y0 + jitter(0.12)),
                (x1 + jitter(0.12), y1 + jitter(0.12)),
            )
        })
        .collect();
    let noise: Vec<f64> = (0..IMAGE_PIXELS).map(|_| jitter(0.12)).collect();

    let (sa, ca) = angle.sin_cos();
    let to_pixel = |(x, y): (f64, f64)| {
        let x = x + shear * y;
        let (xr, yr) = (x * ca - y * sa, x * sa + y * ca);
        (cx + xr * sx, cy + yr * sy)
    };
    let strokes: Vec<Segment> = segments.into_iter().map(|(a, b)| (to_pixel(a), to_pixel(b))).collect();

    let mut img = Vec::with_capacity(IMAGE_PIXELS);
    for r in 0..IMAGE_SIDE {
        for c in 0..IMAGE_SIDE {
            let p = (c as f64, r as f64);
            let d = strokes.iter().map(|&s| dist_to_segment(p, s)).fold(f64::INFINITY, f64::min);
            let ink = (width + 0.5 - d).clamp(0.0, 1.0);
            let v = (ink + noise[r * IMAGE_SIDE + c] * (1.0 - ink)).clamp(0.0, 1.0);
            img.push(v as f32);
        }
    }
    img
}

/// `per_class` samples of every digit, interleaved by class (`0, 1, ..., 9,
/// 0, 1, ...`), deterministic in `seed`.
pub fn synthetic_digits(per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let n = per_class * CLASSES;
    let mut data = Vec::with_capacity(n * IMAGE_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % CLASSES;
        let mut rng = Rng::indexed(seed, "synthetic", &[i as u64]);
        data.extend(render_digit(class, &mut rng));
        labels.push(class as u8);
    }
    LabeledDataset::new(
        Tensor::from_vec(&[n, 1, IMAGE_SIDE, IMAGE_SIDE], data)?,
        labels,
        Provenance {
            path: "synthetic".into(),
            format: SourceFormat::Synthetic,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_digits(3, 1).unwrap();
        let b = synthetic_digits(3, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.class_counts(), [3; CLASSES]);
        assert!(a.images.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let c = synthetic_digits(3, 2).unwrap();
        assert_ne!(a.images, c.images);
    }

    #[test]
    fn glyphs_have_ink() {
        let ds = synthetic_digits(1, 0).unwrap();
        for i in 0..CLASSES {
            let ink = ds.image(i).iter().filter(|&&v| v > 0.9).count();
            assert!(ink > 20, "class {i} has {ink} inked pixels");
        }
    }
}
