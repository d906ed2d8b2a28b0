use super::image_dims;
use crate::error::{invalid, Result};
use crate::math;
use crate::rng::Stream;
use crate::tensor::Tensor;

/// Confetti noise: `count` squares with side in `size`, both inclusive ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfettiConfig {
    pub count: (usize, usize),
    pub size: (usize, usize),
}

impl ConfettiConfig {
    /// One to four squares with side between 2 and a quarter of the image.
    pub fn for_size(image_size: usize) -> Self {
        Self { count: (1, 4), size: (2, (image_size / 4).max(2)) }
    }
}

/// Paints an axis-aligned square (clipped to the image) and marks it in `mask`.
pub fn paint_square(image: &mut Tensor, mask: &mut Tensor, x0: i64, y0: i64, side: usize, color: [f64; 3]) {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let ys = y0.max(0)..(y0 + side as i64).min(h as i64);
    let xs = x0.max(0)..(x0 + side as i64).min(w as i64);
    for y in ys {
        for x in xs.clone() {
            let p = y as usize * w + x as usize;
            for ch in 0..c {
                image.data_mut()[ch * h * w + p] = color[ch % 3];
            }
            mask.data_mut()[p] = 1.0;
        }
    }
}

/// Superposes randomly sized, placed and colored squares (no border smoothing).
///
/// Squares may overlap and are clipped at the image border; the mask is 1
/// exactly on the painted pixels.
pub fn confetti_apply(image: &Tensor, rng: &mut Stream, cfg: &ConfettiConfig) -> Result<(Tensor, Tensor)> {
    let (_, h, w) = image_dims(image)?;
    if cfg.count.0 > cfg.count.1 || cfg.size.0 > cfg.size.1 || cfg.size.0 == 0 {
        return Err(invalid!("confetti ranges must be non-empty and ordered: {:?}", cfg));
    }
    if cfg.size.1 > h.min(w) {
        return Err(invalid!("confetti side up to {} exceeds the image extent {}x{}", cfg.size.1, h, w));
    }
    let mut out = image.clone();
    let mut mask = Tensor::zeros(&[1, h, w]);
    let k = rng.int_in(cfg.count.0 as i64, cfg.count.1 as i64);
    for _ in 0..k {
        let side = rng.int_in(cfg.size.0 as i64, cfg.size.1 as i64);
        let x0 = rng.int_in(1 - side, w as i64 - 1);
        let y0 = rng.int_in(1 - side, h as i64 - 1);
        let color = [rng.uniform(), rng.uniform(), rng.uniform()];
        paint_square(&mut out, &mut mask, x0, y0, side as usize, color);
    }
    Ok((out, mask))
}

/// Test-time anomaly shapes; never axis-aligned squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    Ellipse,
    Stroke,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 2] = [AnomalyKind::Ellipse, AnomalyKind::Stroke];

    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::Ellipse => "ellipse",
            AnomalyKind::Stroke => "stroke",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampConfig {
    pub count: (usize, usize),
    pub semi_axis: (f64, f64),
    pub thickness: (f64, f64),
    pub length: (f64, f64),
    /// Magnitude range of the per-channel additive color shift.
    pub shift: (f64, f64),
}

impl StampConfig {
    pub fn for_size(image_size: usize) -> Self {
        let n = image_size as f64;
        Self {
            count: (1, 2),
            semi_axis: (4.0, (n / 6.0).max(4.0)),
            thickness: (4.0, 7.0),
            length: (n / 6.0, n / 2.5),
            shift: (0.25, 0.5),
        }
    }
}

fn shift_pixel(image: &mut Tensor, mask: &mut Tensor, p: usize, shift: [f64; 3]) {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    for ch in 0..c {
        let v = &mut image.data_mut()[ch * h * w + p];
        *v = (*v + shift[ch % 3]).clamp(0.0, 1.0);
    }
    mask.data_mut()[p] = 1.0;
}

/// Adds `shift` inside a rotated ellipse (pixel centers at integer coordinates).
#[allow(clippy::too_many_arguments)]
pub fn paint_ellipse(
    image: &mut Tensor,
    mask: &mut Tensor,
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    shift: [f64; 3],
) {
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let (cs, sn) = (libm::cos(angle), libm::sin(angle));
    let r = a.max(b);
    let y_lo = math::floor(cy - r).max(0.0) as usize;
    let y_hi = (math::floor(cy + r) as i64).min(h as i64 - 1);
    let x_lo = math::floor(cx - r).max(0.0) as usize;
    let x_hi = (math::floor(cx + r) as i64).min(w as i64 - 1);
    for y in y_lo as i64..=y_hi {
        for x in x_lo as i64..=x_hi {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = (dx * cs + dy * sn) / a;
            let v = (-dx * sn + dy * cs) / b;
            if u * u + v * v <= 1.0 {
                shift_pixel(image, mask, y as usize * w + x as usize, shift);
            }
        }
    }
}

/// Adds `shift` to every pixel within `thickness / 2` of the segment `p0-p1`.
pub fn paint_stroke(
    image: &mut Tensor,
    mask: &mut Tensor,
    p0: (f64, f64),
    p1: (f64, f64),
    thickness: f64,
    shift: [f64; 3],
) {
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let r = thickness / 2.0;
    let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
    let len2 = dx * dx + dy * dy;
    let x_lo = math::floor(p0.0.min(p1.0) - r).max(0.0) as i64;
    let x_hi = (math::floor(p0.0.max(p1.0) + r) as i64).min(w as i64 - 1);
    let y_lo = math::floor(p0.1.min(p1.1) - r).max(0.0) as i64;
    let y_hi = (math::floor(p0.1.max(p1.1) + r) as i64).min(h as i64 - 1);
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (px, py) = (x as f64 - p0.0, y as f64 - p0.1);
            let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= r * r {
                shift_pixel(image, mask, y as usize * w + x as usize, shift);
            }
        }
    }
}

fn random_shift(rng: &mut Stream, range: (f64, f64)) -> [f64; 3] {
    core::array::from_fn(|_| {
        let m = rng.uniform_in(range.0, range.1);
        if rng.bernoulli(0.5) {
            m
        } else {
            -m
        }
    })
}

/// Stamps ellipses or thick strokes with an additive color shift.
///
/// Shapes are kept fully inside the image so clipping can never turn them
/// into rectangles.
pub fn stamp_test_anomaly(
    image: &Tensor,
    rng: &mut Stream,
    kind: AnomalyKind,
    cfg: &StampConfig,
) -> Result<(Tensor, Tensor)> {
    let (_, h, w) = image_dims(image)?;
    if cfg.count.0 > cfg.count.1 {
        return Err(invalid!("stamp count range is empty: {:?}", cfg.count));
    }
    let extent = h.min(w) as f64;
    let reach = match kind {
        AnomalyKind::Ellipse => cfg.semi_axis.1,
        AnomalyKind::Stroke => cfg.length.1 / 2.0 + cfg.thickness.1 / 2.0,
    };
    if 2.0 * reach + 2.0 > extent {
        return Err(invalid!("{} stamps reaching {} px do not fit a {}x{} image", kind.name(), reach, h, w));
    }
    let mut out = image.clone();
    let mut mask = Tensor::zeros(&[1, h, w]);
    let k = rng.int_in(cfg.count.0 as i64, cfg.count.1 as i64);
    for _ in 0..k {
        let shift = random_shift(rng, cfg.shift);
        let angle = rng.uniform_in(0.0, core::f64::consts::PI);
        match kind {
            AnomalyKind::Ellipse => {
                let a = rng.uniform_in(cfg.semi_axis.0, cfg.semi_axis.1);
                let b = rng.uniform_in(cfg.semi_axis.0, cfg.semi_axis.1);
                let r = a.max(b) + 1.0;
                let cx = rng.uniform_in(r, w as f64 - 1.0 - r);
                let cy = rng.uniform_in(r, h as f64 - 1.0 - r);
                paint_ellipse(&mut out, &mut mask, cx, cy, a, b, angle, shift);
            }
            AnomalyKind::Stroke => {
                let len = rng.uniform_in(cfg.length.0, cfg.length.1);
                let thick = rng.uniform_in(cfg.thickness.0, cfg.thickness.1);
                let half = len / 2.0;
                let r = half + thick / 2.0 + 1.0;
                let cx = rng.uniform_in(r, w as f64 - 1.0 - r);
                let cy = rng.uniform_in(r, h as f64 - 1.0 - r);
                let (dx, dy) = (half * libm::cos(angle), half * libm::sin(angle));
                paint_stroke(&mut out, &mut mask, (cx - dx, cy - dy), (cx + dx, cy + dy), thick, shift);
            }
        }
    }
    Ok((out, mask))
}
