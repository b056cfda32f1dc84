use ndarray::Array3;
use rand::Rng;
use ssdg_data::ImageArray;

use crate::WeakPolicy;

/// Weak augmentation: reflect-pad then random crop back to the original
/// size, plus a horizontal flip with probability `flip_prob`.
pub fn t_weak<R: Rng>(image: &ImageArray, policy: &WeakPolicy, rng: &mut R) -> ImageArray {
    let (h, w, c) = (image.height(), image.width(), image.channels());
    let p = policy.crop_padding;
    let src = image.pixels();

    let mut out = if p == 0 {
        src.clone()
    } else {
        let dy = rng.gen_range(0..=2 * p) as i64 - p as i64;
        let dx = rng.gen_range(0..=2 * p) as i64 - p as i64;
        let mut shifted = Array3::<f32>::zeros((h, w, c));
        for y in 0..h {
            for x in 0..w {
                let sy = reflect(y as i64 + dy, h);
                let sx = reflect(x as i64 + dx, w);
                for ch in 0..c {
                    shifted[[y, x, ch]] = src[[sy, sx, ch]];
                }
            }
        }
        shifted
    };

    if rng.gen::<f32>() < policy.flip_prob {
        out = flip_horizontal(&out);
    }
    ImageArray::new_clipped(out)
}

fn flip_horizontal(img: &Array3<f32>) -> Array3<f32> {
    let (h, w, c) = img.dim();
    let mut out = Array3::<f32>::zeros((h, w, c));
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out[[y, x, ch]] = img[[y, w - 1 - x, ch]];
            }
        }
    }
    out
}

/// Reflect an out-of-range coordinate back into [0, len).
fn reflect(v: i64, len: usize) -> usize {
    let len = len as i64;
    let mut v = v;
    while v < 0 || v >= len {
        if v < 0 {
            v = -v - 1;
        }
        if v >= len {
            v = 2 * len - v - 1;
        }
    }
    v as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gradient_image() -> ImageArray {
        let px = Array3::from_shape_fn((8, 8, 3), |(y, x, c)| {
            (y * 8 + x) as f32 / 64.0 + c as f32 * 0.001
        });
        ImageArray::new_clipped(px)
    }

    #[test]
    fn identity_configuration_is_identity() {
        let img = gradient_image();
        let policy = WeakPolicy {
            crop_padding: 0,
            flip_prob: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = t_weak(&img, &policy, &mut rng);
        assert_eq!(out.pixels(), img.pixels());
    }

    #[test]
    fn forced_flip_is_an_involution() {
        let img = gradient_image();
        let policy = WeakPolicy {
            crop_padding: 0,
            flip_prob: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let once = t_weak(&img, &policy, &mut rng);
        assert_ne!(once.pixels(), img.pixels());
        let twice = t_weak(&once, &policy, &mut rng);
        assert_eq!(twice.pixels(), img.pixels());
    }

    #[test]
    fn shape_and_range_preserved() {
        let img = gradient_image();
        let policy = WeakPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let out = t_weak(&img, &policy, &mut rng);
            assert_eq!(out.pixels().dim(), img.pixels().dim());
            assert!(out.pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
