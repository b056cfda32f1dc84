use ndarray::Array3;
use rand::Rng;
use ssdg_data::ImageArray;

use crate::StrongPolicy;

/// Fill value for pixels exposed by geometric transforms and for cutout.
const FILL: f32 = 0.5;
/// Histogram resolution used by equalize/posterize/solarize on [0,1] data.
const LEVELS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrongOp {
    Identity,
    AutoContrast,
    Equalize,
    Posterize,
    Solarize,
    Rotate,
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    Brightness,
    Contrast,
    ColorBalance,
    Sharpness,
}

/// The operation pool sampled uniformly by [`t_strong`].
pub const STRONG_OPS: [StrongOp; 14] = [
    StrongOp::Identity,
    StrongOp::AutoContrast,
    StrongOp::Equalize,
    StrongOp::Posterize,
    StrongOp::Solarize,
    StrongOp::Rotate,
    StrongOp::ShearX,
    StrongOp::ShearY,
    StrongOp::TranslateX,
    StrongOp::TranslateY,
    StrongOp::Brightness,
    StrongOp::Contrast,
    StrongOp::ColorBalance,
    StrongOp::Sharpness,
];

/// Strong augmentation: `num_ops` operations drawn uniformly from
/// [`STRONG_OPS`] at the configured magnitude, followed by a cutout square
/// filled with mid-gray at a random location.
pub fn t_strong<R: Rng>(image: &ImageArray, policy: &StrongPolicy, rng: &mut R) -> ImageArray {
    let mut pixels = image.pixels().clone();
    for _ in 0..policy.num_ops {
        let op = STRONG_OPS[rng.gen_range(0..STRONG_OPS.len())];
        pixels = apply_op(&pixels, op, policy.magnitude, rng);
    }
    cutout(&mut pixels, policy.cutout_fraction, rng);
    ImageArray::new_clipped(pixels)
}

/// Applies a single operation at magnitude `m` on the 0..=30 scale.
/// Exposed for tests.
pub(crate) fn apply_op<R: Rng>(
    img: &Array3<f32>,
    op: StrongOp,
    m: u32,
    rng: &mut R,
) -> Array3<f32> {
    let level = m as f32 / 30.0;
    let signed = |rng: &mut R, v: f32| if rng.gen::<bool>() { v } else { -v };
    let (h, w, _) = img.dim();
    match op {
        StrongOp::Identity => img.clone(),
        StrongOp::AutoContrast => autocontrast(img),
        StrongOp::Equalize => equalize(img),
        StrongOp::Posterize => {
            // 8 bits at m=0 down to 4 bits at m=30
            let bits = 8 - (level * 4.0).round() as u32;
            posterize(img, bits)
        }
        StrongOp::Solarize => solarize(img, 1.0 - level),
        StrongOp::Rotate => {
            let angle = signed(rng, level * 30.0f32.to_radians());
            let (s, c) = angle.sin_cos();
            affine(img, [c, -s, 0.0, s, c, 0.0])
        }
        StrongOp::ShearX => {
            let shear = signed(rng, level * 0.3);
            affine(img, [1.0, shear, 0.0, 0.0, 1.0, 0.0])
        }
        StrongOp::ShearY => {
            let shear = signed(rng, level * 0.3);
            affine(img, [1.0, 0.0, 0.0, shear, 1.0, 0.0])
        }
        StrongOp::TranslateX => {
            let t = signed(rng, level * 0.3 * w as f32);
            affine(img, [1.0, 0.0, t, 0.0, 1.0, 0.0])
        }
        StrongOp::TranslateY => {
            let t = signed(rng, level * 0.3 * h as f32);
            affine(img, [1.0, 0.0, 0.0, 0.0, 1.0, t])
        }
        StrongOp::Brightness => blend(img, &Array3::zeros(img.dim()), enhance_factor(rng, level)),
        StrongOp::Contrast => {
            let mean = img.mean().unwrap_or(0.5);
            let gray = Array3::from_elem(img.dim(), mean);
            blend(img, &gray, enhance_factor(rng, level))
        }
        StrongOp::ColorBalance => {
            let gray = grayscale(img);
            blend(img, &gray, enhance_factor(rng, level))
        }
        StrongOp::Sharpness => {
            let blurred = smooth(img);
            blend(img, &blurred, enhance_factor(rng, level))
        }
    }
}

/// PIL-style enhancement factor: 1.0 is identity, the magnitude moves the
/// factor away from 1.0 in a random direction, down to 0.1 or up to 1.9.
fn enhance_factor<R: Rng>(rng: &mut R, level: f32) -> f32 {
    let delta = level * 0.9;
    if rng.gen::<bool>() {
        1.0 + delta
    } else {
        1.0 - delta
    }
}

/// out = other + factor * (img - other), clipped.
fn blend(img: &Array3<f32>, other: &Array3<f32>, factor: f32) -> Array3<f32> {
    let mut out = img.clone();
    ndarray::Zip::from(&mut out).and(other).for_each(|o, &b| {
        *o = (b + factor * (*o - b)).clamp(0.0, 1.0);
    });
    out
}

fn grayscale(img: &Array3<f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = Array3::<f32>::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ch in 0..c {
                acc += img[[y, x, ch]];
            }
            let g = acc / c as f32;
            for ch in 0..c {
                out[[y, x, ch]] = g;
            }
        }
    }
    out
}

fn smooth(img: &Array3<f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = Array3::<f32>::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let yy = y as i64 + dy;
                        let xx = x as i64 + dx;
                        if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                            // center weight 5, like PIL's SMOOTH kernel
                            let wgt = if dy == 0 && dx == 0 { 5.0 } else { 1.0 };
                            acc += img[[yy as usize, xx as usize, ch]] * wgt;
                            n += wgt;
                        }
                    }
                }
                out[[y, x, ch]] = acc / n;
            }
        }
    }
    out
}

fn autocontrast(img: &Array3<f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = img.clone();
    for ch in 0..c {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for y in 0..h {
            for x in 0..w {
                lo = lo.min(img[[y, x, ch]]);
                hi = hi.max(img[[y, x, ch]]);
            }
        }
        if hi > lo {
            let scale = 1.0 / (hi - lo);
            for y in 0..h {
                for x in 0..w {
                    out[[y, x, ch]] = (img[[y, x, ch]] - lo) * scale;
                }
            }
        }
    }
    out
}

fn equalize(img: &Array3<f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = img.clone();
    let n = (h * w) as f32;
    for ch in 0..c {
        let mut hist = [0u32; LEVELS];
        for y in 0..h {
            for x in 0..w {
                hist[quantize(img[[y, x, ch]])] += 1;
            }
        }
        // cumulative distribution mapped back to [0,1]
        let mut cdf = [0.0f32; LEVELS];
        let mut acc = 0u32;
        for (i, &count) in hist.iter().enumerate() {
            acc += count;
            cdf[i] = acc as f32 / n;
        }
        for y in 0..h {
            for x in 0..w {
                out[[y, x, ch]] = cdf[quantize(img[[y, x, ch]])];
            }
        }
    }
    out
}

fn quantize(v: f32) -> usize {
    ((v * (LEVELS - 1) as f32).round() as usize).min(LEVELS - 1)
}

fn posterize(img: &Array3<f32>, bits: u32) -> Array3<f32> {
    let keep = LEVELS as u32 >> (8 - bits.clamp(1, 8));
    let mut out = img.clone();
    out.mapv_inplace(|v| {
        let q = (v * (keep - 1) as f32).round() / (keep - 1).max(1) as f32;
        q.clamp(0.0, 1.0)
    });
    out
}

fn solarize(img: &Array3<f32>, threshold: f32) -> Array3<f32> {
    let mut out = img.clone();
    out.mapv_inplace(|v| if v >= threshold { 1.0 - v } else { v });
    out
}

/// Inverse-maps output pixels through the affine [a b tx; c d ty] centered
/// on the image, sampling bilinearly with mid-gray fill.
fn affine(img: &Array3<f32>, m: [f32; 6]) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let cx = w as f32 / 2.0 - 0.5;
    let cy = h as f32 / 2.0 - 0.5;
    let mut out = Array3::<f32>::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            let dx = x as f32 - cx;
            let dy = y as f32 - cy;
            let sx = m[0] * dx + m[1] * dy + m[2] + cx;
            let sy = m[3] * dx + m[4] * dy + m[5] + cy;
            for ch in 0..c {
                out[[y, x, ch]] = sample_bilinear(img, sx, sy, ch);
            }
        }
    }
    out
}

fn sample_bilinear(img: &Array3<f32>, x: f32, y: f32, ch: usize) -> f32 {
    let (h, w, _) = img.dim();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let mut acc = 0.0;
    for (dy, wy) in [(0i64, 1.0 - fy), (1, fy)] {
        for (dx, wx) in [(0i64, 1.0 - fx), (1, fx)] {
            let yy = y0 as i64 + dy;
            let xx = x0 as i64 + dx;
            let v = if yy >= 0 && yy < h as i64 && xx >= 0 && xx < w as i64 {
                img[[yy as usize, xx as usize, ch]]
            } else {
                FILL
            };
            acc += v * wx * wy;
        }
    }
    acc
}

/// Fills a random square (side = fraction of the image side) with mid-gray.
fn cutout<R: Rng>(img: &mut Array3<f32>, fraction: f32, rng: &mut R) {
    let (h, w, c) = img.dim();
    let side = ((h.min(w) as f32 * fraction).round() as usize).max(1);
    let cy = rng.gen_range(0..h) as i64;
    let cx = rng.gen_range(0..w) as i64;
    let half = side as i64 / 2;
    for y in (cy - half).max(0)..(cy - half + side as i64).min(h as i64) {
        for x in (cx - half).max(0)..(cx - half + side as i64).min(w as i64) {
            for ch in 0..c {
                img[[y as usize, x as usize, ch]] = FILL;
            }
        }
    }
}
