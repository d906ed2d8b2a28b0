use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::math;
use crate::rng::{Purpose, Rng, Stream};
use crate::tensor::Tensor;

pub const NUM_CATEGORIES: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Constant along columns, periodic along each row.
    Vertical,
    /// Constant along rows, periodic along each column.
    Horizontal,
    /// Periodic along both rows and columns.
    Diagonal,
}

/// Texture family with its per-category parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Stripes { period: usize, duty: usize, orientation: Orientation },
    Checker { cell: usize },
    Blobs { count: (usize, usize), radius: (f64, f64) },
    Cells { count: (usize, usize), border: f64 },
    Gradient { waves: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Stripes { .. } => "stripes",
            Family::Checker { .. } => "checker",
            Family::Blobs { .. } => "blobs",
            Family::Cells { .. } => "cells",
            Family::Gradient { .. } => "gradient",
        }
    }
}

/// One synthetic "normal" category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySpec {
    pub category_id: u32,
    pub family: Family,
    /// Colors blended by the pattern value (`0 -> palette[0]`, `1 -> palette[1]`).
    pub palette: [[f64; 3]; 2],
    /// Standard deviation of per-element Gaussian noise.
    pub noise: f64,
    pub image_size: usize,
}

impl CategorySpec {
    /// The ten built-in categories, two per family.
    pub fn builtin(category_id: u32) -> Result<Self> {
        use Family::*;
        let (family, palette) = match category_id {
            0 => (
                Stripes { period: 8, duty: 4, orientation: Orientation::Vertical },
                [[0.10, 0.15, 0.35], [0.85, 0.80, 0.45]],
            ),
            1 => (
                Stripes { period: 12, duty: 5, orientation: Orientation::Diagonal },
                [[0.55, 0.20, 0.20], [0.70, 0.70, 0.70]],
            ),
            2 => (Checker { cell: 8 }, [[0.05, 0.05, 0.05], [0.60, 0.60, 0.55]]),
            3 => (Checker { cell: 6 }, [[0.30, 0.45, 0.15], [0.55, 0.35, 0.20]]),
            4 => (Blobs { count: (4, 8), radius: (3.0, 7.0) }, [[0.90, 0.85, 0.70], [0.45, 0.20, 0.55]]),
            5 => (Blobs { count: (6, 12), radius: (2.0, 5.0) }, [[0.05, 0.25, 0.30], [0.95, 0.55, 0.10]]),
            6 => (Cells { count: (8, 14), border: 1.5 }, [[0.20, 0.10, 0.05], [0.75, 0.60, 0.40]]),
            7 => (Cells { count: (16, 24), border: 1.0 }, [[0.95, 0.95, 0.90], [0.35, 0.40, 0.50]]),
            8 => (Gradient { waves: 0.0 }, [[0.15, 0.30, 0.15], [0.60, 0.85, 0.55]]),
            9 => (Gradient { waves: 0.15 }, [[0.40, 0.05, 0.30], [0.95, 0.80, 0.85]]),
            other => return Err(invalid!("category_id must be in [0, {}], got {}", NUM_CATEGORIES - 1, other)),
        };
        Ok(Self { category_id, family, palette, noise: 0.03, image_size: 64 })
    }

    pub fn name(&self) -> alloc::string::String {
        alloc::format!("c{:02}-{}", self.category_id, self.family.name())
    }
}

fn pattern(family: &Family, size: usize, s: &mut Stream) -> Vec<f64> {
    let n = size;
    let mut t = alloc::vec![0.0; n * n];
    match *family {
        Family::Stripes { period, duty, orientation } => {
            let phase = s.index(period);
            for y in 0..n {
                for x in 0..n {
                    let coord = match orientation {
                        Orientation::Vertical => x,
                        Orientation::Horizontal => y,
                        Orientation::Diagonal => x + y,
                    };
                    t[y * n + x] = if (coord + phase) % period < duty { 1.0 } else { 0.0 };
                }
            }
        }
        Family::Checker { cell } => {
            let (ox, oy) = (s.index(2 * cell), s.index(2 * cell));
            for y in 0..n {
                for x in 0..n {
                    t[y * n + x] = (((x + ox) / cell + (y + oy) / cell) % 2) as f64;
                }
            }
        }
        Family::Blobs { count, radius } => {
            let k = s.int_in(count.0 as i64, count.1 as i64) as usize;
            let blobs: Vec<(f64, f64, f64)> = (0..k)
                .map(|_| (s.uniform_in(0.0, n as f64), s.uniform_in(0.0, n as f64), s.uniform_in(radius.0, radius.1)))
                .collect();
            for y in 0..n {
                for x in 0..n {
                    let v: f64 = blobs
                        .iter()
                        .map(|&(cx, cy, r)| {
                            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                            let d2 = dx * dx + dy * dy;
                            math::exp(-d2 / (2.0 * r * r))
                        })
                        .sum();
                    t[y * n + x] = v.min(1.0);
                }
            }
        }
        Family::Cells { count, border } => {
            let k = s.int_in(count.0 as i64, count.1 as i64) as usize;
            let seeds: Vec<(f64, f64)> =
                (0..k).map(|_| (s.uniform_in(0.0, n as f64), s.uniform_in(0.0, n as f64))).collect();
            for y in 0..n {
                for x in 0..n {
                    let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
                    for &(cx, cy) in &seeds {
                        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                        let d = math::sqrt(dx * dx + dy * dy);
                        if d < d1 {
                            d2 = d1;
                            d1 = d;
                        } else if d < d2 {
                            d2 = d;
                        }
                    }
                    t[y * n + x] = if d2 - d1 < border { 0.0 } else { 1.0 };
                }
            }
        }
        Family::Gradient { waves } => {
            let angle = s.uniform_in(0.0, core::f64::consts::TAU);
            let (c, sn) = (libm::cos(angle), libm::sin(angle));
            let freq = s.uniform_in(2.0, 4.0);
            let phase = s.uniform_in(0.0, core::f64::consts::TAU);
            let half = n as f64 / 2.0;
            for y in 0..n {
                for x in 0..n {
                    let u = ((x as f64 - half) * c + (y as f64 - half) * sn) / n as f64;
                    let v = ((y as f64 - half) * c - (x as f64 - half) * sn) / n as f64;
                    let wave = waves * libm::sin(core::f64::consts::TAU * freq * v + phase);
                    t[y * n + x] = (0.5 + u + wave).clamp(0.0, 1.0);
                }
            }
        }
    }
    t
}

/// Renders normal image `index` of a category. Pure in `(spec, rng, index)`.
pub fn gen_normal_image(spec: &CategorySpec, rng: &Rng, index: u64) -> Tensor {
    let n = spec.image_size;
    let mut s = rng.stream(Purpose::NormalImage, spec.category_id as u64, index);
    let t = pattern(&spec.family, n, &mut s);
    let [c0, c1] = spec.palette;
    let mut img = Tensor::zeros(&[3, n, n]);
    let data = img.data_mut();
    for ch in 0..3 {
        for (p, &v) in t.iter().enumerate() {
            let base = c0[ch] * (1.0 - v) + c1[ch] * v;
            let noise = if spec.noise > 0.0 { spec.noise * s.normal() } else { 0.0 };
            data[ch * n * n + p] = (base + noise).clamp(0.0, 1.0);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = CategorySpec::builtin(4).unwrap();
        let rng = Rng::new(17);
        assert_eq!(gen_normal_image(&spec, &rng, 3), gen_normal_image(&spec, &rng, 3));
        assert_ne!(gen_normal_image(&spec, &rng, 3), gen_normal_image(&spec, &rng, 4));
    }

    #[test]
    fn values_in_unit_interval() {
        let rng = Rng::new(1);
        for id in 0..NUM_CATEGORIES {
            let spec = CategorySpec::builtin(id).unwrap();
            let img = gen_normal_image(&spec, &rng, 0);
            assert_eq!(img.shape(), &[3, 64, 64]);
            assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(CategorySpec::builtin(10).is_err());
    }

    #[test]
    fn noiseless_stripes_are_periodic() {
        for orientation in [Orientation::Vertical, Orientation::Diagonal] {
            let spec = CategorySpec {
                family: Family::Stripes { period: 8, duty: 3, orientation },
                noise: 0.0,
                ..CategorySpec::builtin(0).unwrap()
            };
            let img = gen_normal_image(&spec, &Rng::new(5), 2);
            let n = spec.image_size;
            for c in 0..3 {
                for y in 0..n {
                    for x in 0..n - 8 {
                        let at = |x: usize| img.data()[(c * n + y) * n + x];
                        assert_eq!(at(x), at(x + 8));
                    }
                }
            }
        }
    }
}
