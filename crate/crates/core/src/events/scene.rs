use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng;

/// Texture families; class c uses family `c % FAMILIES` at scale variant
/// `c / FAMILIES`.
pub const FAMILIES: usize = 4;

/// Grayscale image in [0, 1], `size × size`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub class: usize,
    pub seed: u64,
    pub size: usize,
    pub pixels: Vec<f64>,
}

/// Deterministic procedural texture for `class`:
/// 0 square-wave stripes across the motion axis, 1 checkerboard,
/// 2 Gaussian blob field, 3 concentric square-wave rings.
pub fn generate_scene(class: usize, classes: usize, seed: u64, size: usize) -> Result<Scene> {
    if class >= classes {
        return Err(invalid(format!(
            "class {class} out of range for {classes} classes"
        )));
    }
    if size == 0 {
        return Err(invalid("scene size must be positive"));
    }
    let mut r = rng::stream(rng::derive_indexed(seed, "scene", class as u64));
    let scale = 1.0 + 0.5 * (class / FAMILIES) as f64;
    let n = size as f64;
    let mut pixels = vec![0.0; size * size];
    match class % FAMILIES {
        0 => {
            let period = scale * r.random_range(6.0..10.0);
            let tilt = r.random_range(-0.3..0.3f64);
            let phase = r.random_range(0.0..period);
            let (lo, hi) = (r.random_range(0.0..0.1), r.random_range(0.9..1.0));
            for (i, p) in pixels.iter_mut().enumerate() {
                let (y, x) = ((i / size) as f64, (i % size) as f64);
                let u = x * tilt.cos() + y * tilt.sin() + phase;
                *p = if u.rem_euclid(period) < period / 2.0 {
                    hi
                } else {
                    lo
                };
            }
        }
        1 => {
            let cell = scale * r.random_range(4.0..7.0);
            let (oy, ox) = (r.random_range(0.0..cell), r.random_range(0.0..cell));
            let (lo, hi) = (r.random_range(0.2..0.3), r.random_range(0.6..0.7));
            for (i, p) in pixels.iter_mut().enumerate() {
                let (y, x) = ((i / size) as f64, (i % size) as f64);
                let parity = ((y + oy) / cell).floor() as i64 + ((x + ox) / cell).floor() as i64;
                *p = if parity.rem_euclid(2) == 0 { hi } else { lo };
            }
        }
        2 => {
            let count = r.random_range(10..18);
            let blobs: Vec<(f64, f64, f64, f64)> = (0..count)
                .map(|_| {
                    (
                        r.random_range(0.0..n),
                        r.random_range(0.0..n),
                        scale * r.random_range(2.0..4.0),
                        r.random_range(0.6..1.0),
                    )
                })
                .collect();
            for (i, p) in pixels.iter_mut().enumerate() {
                let (y, x) = ((i / size) as f64, (i % size) as f64);
                let v: f64 = blobs
                    .iter()
                    .map(|&(cy, cx, rad, amp)| {
                        amp * (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * rad * rad)).exp()
                    })
                    .sum();
                *p = v.min(1.0);
            }
        }
        _ => {
            let period = scale * r.random_range(7.0..11.0);
            let (cy, cx) = (
                r.random_range(0.25 * n..0.75 * n),
                r.random_range(0.25 * n..0.75 * n),
            );
            let (lo, hi) = (r.random_range(0.35..0.45), r.random_range(0.8..0.9));
            for (i, p) in pixels.iter_mut().enumerate() {
                let (y, x) = ((i / size) as f64, (i % size) as f64);
                let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
                *p = if d.rem_euclid(period) < period / 2.0 {
                    hi
                } else {
                    lo
                };
            }
        }
    }
    Ok(Scene {
        class,
        seed,
        size,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn histogram(s: &Scene, bins: usize) -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for &p in &s.pixels {
            h[((p * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        h
    }

    /// Symmetric χ² distance between two histograms of equal mass.
    fn chi2(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .filter(|(x, y)| **x + **y > 0.0)
            .map(|(x, y)| (x - y).powi(2) / (x + y))
            .sum()
    }

    #[test]
    fn deterministic_and_in_range() {
        for c in 0..8 {
            let a = generate_scene(c, 8, 42, 48).unwrap();
            assert_eq!(a, generate_scene(c, 8, 42, 48).unwrap());
            assert!(a.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        assert!(generate_scene(4, 4, 0, 48).is_err());
    }

    #[test]
    fn class_histograms_differ() {
        let scenes: Vec<Scene> = (0..4)
            .map(|c| generate_scene(c, 4, 7, 64).unwrap())
            .collect();
        let hists: Vec<Vec<f64>> = scenes.iter().map(|s| histogram(s, 16)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                let d = chi2(&hists[i], &hists[j]);
                assert!(d > 200.0, "classes {i} and {j}: chi2 {d}");
            }
        }
    }
}
