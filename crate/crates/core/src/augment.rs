//! Camera-photo augmentation: thin-plate-spline warp, perspective warp,
//! multi-scale noise, color jitter and blur, applied in that order, with the
//! ground truth carried through the geometric stages.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{self, Homography, PixelBox, Point2};
use crate::linalg;
use crate::raster::RasterImage;
use crate::seeds;
use crate::synthgen::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorRanges {
    /// Per-channel gain drawn from `1 ± brightness`.
    pub brightness: f64,
    /// Per-channel contrast about the channel mean, `1 ± contrast`.
    pub contrast: f64,
    /// Saturation scale `1 ± saturation`.
    pub saturation: f64,
    /// Hue rotation in degrees, `± hue_deg`.
    pub hue_deg: f64,
}

impl Default for ColorRanges {
    fn default() -> Self {
        Self { brightness: 0.25, contrast: 0.25, saturation: 0.3, hue_deg: 15.0 }
    }
}

impl ColorRanges {
    pub fn is_identity(&self) -> bool {
        self.brightness == 0.0 && self.contrast == 0.0 && self.saturation == 0.0 && self.hue_deg == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlurConfig {
    pub gaussian_sigma: (f64, f64),
    /// Inclusive range of motion kernel lengths in pixels.
    pub motion_length: (usize, usize),
    pub motion_angle_deg: (f64, f64),
    /// Probability of picking motion blur over Gaussian blur.
    pub motion_prob: f64,
}

impl Default for BlurConfig {
    fn default() -> Self {
        Self { gaussian_sigma: (0.5, 1.5), motion_length: (3, 9), motion_angle_deg: (0.0, 180.0), motion_prob: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub tps: bool,
    pub perspective: bool,
    pub noise: bool,
    pub color: bool,
    pub blur: bool,
    /// Control points per side.
    pub tps_grid: usize,
    /// Maximum displacement as a fraction of the image dimension.
    pub tps_magnitude: f64,
    pub perspective_distortion: f64,
    /// `(scale divisor, σ)` pairs; divisor 4 means a field at 1/4 resolution.
    pub noise_sigmas: Vec<(f64, f64)>,
    pub color_ranges: ColorRanges,
    pub blur_params: BlurConfig,
    /// Gray level range for regions warped in from outside the frame.
    pub background_tone: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            tps: true,
            perspective: true,
            noise: true,
            color: true,
            blur: true,
            tps_grid: 4,
            tps_magnitude: 0.02,
            perspective_distortion: 0.5,
            noise_sigmas: vec![(1.0, 6.0), (4.0, 10.0), (16.0, 14.0)],
            color_ranges: ColorRanges::default(),
            blur_params: BlurConfig::default(),
            background_tone: (200.0, 245.0),
            seed: 0,
        }
    }
}

pub use crate::config::ConfigError;

impl AugmentConfig {
    /// Every stage disabled.
    pub fn none() -> Self {
        Self { tps: false, perspective: false, noise: false, color: false, blur: false, ..Self::default() }
    }

    pub fn perspective_only(distortion: f64) -> Self {
        Self { perspective: true, perspective_distortion: distortion, ..Self::none() }
    }

    pub fn any_enabled(&self) -> bool {
        self.tps || self.perspective || self.noise || self.color || self.blur
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(0.0..1.0).contains(&self.perspective_distortion) {
            return bad(format!("perspective_distortion {} not in [0, 1)", self.perspective_distortion));
        }
        if !(self.tps_magnitude >= 0.0) {
            return bad(format!("tps_magnitude {} is negative", self.tps_magnitude));
        }
        if self.tps && self.tps_grid < 2 {
            return bad(format!("tps_grid {} needs at least 2 points per side", self.tps_grid));
        }
        if self.noise_sigmas.iter().any(|&(d, s)| !(d >= 1.0) || !(s >= 0.0)) {
            return bad("noise scales must be ≥ 1 and sigmas ≥ 0".into());
        }
        let (lo, hi) = self.blur_params.gaussian_sigma;
        if !(lo >= 0.0 && hi >= lo) {
            return bad(format!("gaussian sigma range ({lo}, {hi}) is invalid"));
        }
        Ok(())
    }

    /// Reads a config from TOML (`.toml`) or JSON (anything else). Missing
    /// fields take their defaults.
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = crate::config::read_config(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Thin-plate spline displacement `d(p) = A·[1, x, y] + Σ wᵢ U(|p − cᵢ|)`
/// with `U(r) = r² ln r`, in coordinates normalized by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct TpsModel {
    controls: Vec<Point2>,
    weights: Vec<[f64; 2]>,
    affine: [[f64; 2]; 3],
    scale: f64,
}

fn tps_kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

impl TpsModel {
    /// Interpolating spline with `displacements[i]` at `controls[i]` (pixels).
    pub fn fit(controls: &[Point2], displacements: &[Point2], scale: f64) -> Option<Self> {
        let n = controls.len();
        let c: Vec<Point2> = controls.iter().map(|p| Point2::new(p.x / scale, p.y / scale)).collect();
        let size = n + 3;
        let mut a = vec![vec![0.0; size]; size];
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = (c[i].x - c[j].x, c[i].y - c[j].y);
                a[i][j] = tps_kernel(dx * dx + dy * dy);
            }
            let row = [1.0, c[i].x, c[i].y];
            for k in 0..3 {
                a[i][n + k] = row[k];
                a[n + k][i] = row[k];
            }
        }
        let mut coef = [vec![], vec![]];
        for (axis, out) in coef.iter_mut().enumerate() {
            let mut b = vec![0.0; size];
            for i in 0..n {
                b[i] = if axis == 0 { displacements[i].x } else { displacements[i].y } / scale;
            }
            *out = linalg::solve(a.clone(), b)?;
        }
        let weights = (0..n).map(|i| [coef[0][i], coef[1][i]]).collect();
        let affine = [0, 1, 2].map(|k| [coef[0][n + k], coef[1][n + k]]);
        Some(Self { controls: c, weights, affine, scale })
    }

    pub fn displacement(&self, p: Point2) -> Point2 {
        let (x, y) = (p.x / self.scale, p.y / self.scale);
        let mut d = [0.0; 2];
        for k in 0..2 {
            d[k] = self.affine[0][k] + self.affine[1][k] * x + self.affine[2][k] * y;
        }
        for (c, w) in self.controls.iter().zip(&self.weights) {
            let (dx, dy) = (x - c.x, y - c.y);
            let u = tps_kernel(dx * dx + dy * dy);
            d[0] += w[0] * u;
            d[1] += w[1] * u;
        }
        Point2::new(d[0] * self.scale, d[1] * self.scale)
    }

    fn scaled(&self, f: f64) -> Self {
        let mut m = self.clone();
        m.weights.iter_mut().for_each(|w| *w = [w[0] * f, w[1] * f]);
        m.affine.iter_mut().for_each(|a| *a = [a[0] * f, a[1] * f]);
        m
    }
}

/// Dense backward map of a warp plus its analytic forward map.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    pub width: usize,
    pub height: usize,
    /// Source coordinate `(x, y)` of every output pixel, row-major.
    pub source: Vec<[f64; 2]>,
    model: Option<TpsModel>,
}

impl WarpField {
    pub fn identity(width: usize, height: usize) -> Self {
        let source = (0..height).flat_map(|y| (0..width).map(move |x| [x as f64, y as f64])).collect();
        Self { width, height, source, model: None }
    }

    pub fn source_of(&self, x: usize, y: usize) -> Point2 {
        let [sx, sy] = self.source[y * self.width + x];
        Point2::new(sx, sy)
    }

    /// Where a point of the input image lands in the warped image.
    pub fn forward(&self, p: Point2) -> Point2 {
        match &self.model {
            Some(m) => {
                let d = m.displacement(p);
                Point2::new(p.x + d.x, p.y + d.y)
            }
            None => p,
        }
    }

    /// Displacement at `p` (zero for the identity field).
    pub fn displacement(&self, p: Point2) -> Point2 {
        self.model.as_ref().map_or(Point2::new(0.0, 0.0), |m| m.displacement(p))
    }
}

fn fill_tone(cfg: &AugmentConfig) -> f64 {
    let (lo, hi) = cfg.background_tone;
    let mut rng = seeds::stage_rng(cfg.seed, 0, "fill");
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn resample<F: Fn(usize, usize) -> Option<Point2> + Sync>(image: &RasterImage, fill: f64, src: F) -> RasterImage {
    use rayon::prelude::*;
    let (w, h) = (image.width, image.height);
    let tone = fill.round().clamp(0.0, 255.0) as u8;
    let mut out = RasterImage::new(w, h, [tone; 3]);
    out.pixels.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            if let Some(v) = src(x, y).and_then(|p| image.sample(p.x, p.y)) {
                for k in 0..3 {
                    row[x * 3 + k] = v[k].round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    });
    out
}

const TPS_COARSE_STEP: usize = 4;
const TPS_INVERSE_ITERS: usize = 12;

/// Thin-plate-spline warp of a randomly displaced control grid.
///
/// Control displacements are uniform in `±tps_magnitude · max(w, h)` per
/// axis; the field is then scaled so its maximum over all pixels stays
/// within that bound.
pub fn apply_tps(image: &RasterImage, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> (RasterImage, WarpField) {
    let (w, h) = (image.width, image.height);
    let dim = w.max(h) as f64;
    let limit = cfg.tps_magnitude * dim;
    if limit == 0.0 || cfg.tps_grid < 2 {
        return (image.clone(), WarpField::identity(w, h));
    }
    let g = cfg.tps_grid;
    let mut controls = Vec::with_capacity(g * g);
    let mut disp = Vec::with_capacity(g * g);
    for j in 0..g {
        for i in 0..g {
            controls.push(Point2::new((w - 1) as f64 * i as f64 / (g - 1) as f64, (h - 1) as f64 * j as f64 / (g - 1) as f64));
            disp.push(Point2::new(rng.random_range(-limit..=limit), rng.random_range(-limit..=limit)));
        }
    }
    let Some(mut model) = TpsModel::fit(&controls, &disp, dim) else {
        return (image.clone(), WarpField::identity(w, h));
    };

    // Displacement on a coarse lattice covering the frame.
    let (cw, ch) = ((w - 1) / TPS_COARSE_STEP + 2, (h - 1) / TPS_COARSE_STEP + 2);
    let max_disp = (0..h)
        .step_by(2)
        .flat_map(|y| (0..w).step_by(2).map(move |x| (x, y)))
        .map(|(x, y)| {
            let d = model.displacement(Point2::new(x as f64, y as f64));
            d.x.abs().max(d.y.abs())
        })
        .fold(0.0, f64::max)
        .max(disp.iter().map(|d| d.x.abs().max(d.y.abs())).fold(0.0, f64::max));
    if max_disp > limit {
        model = model.scaled(limit / max_disp * 0.999);
    }

    // Backward map q ↦ p with p + d(p) = q by fixed-point iteration on the
    // coarse lattice, then bilinear interpolation to every pixel.
    let coarse_src: Vec<Point2> = (0..cw * ch)
        .map(|k| {
            let q = Point2::new(((k % cw) * TPS_COARSE_STEP) as f64, ((k / cw) * TPS_COARSE_STEP) as f64);
            let mut p = q;
            for _ in 0..TPS_INVERSE_ITERS {
                let d = model.displacement(p);
                p = Point2::new(q.x - d.x, q.y - d.y);
            }
            p
        })
        .collect();
    let mut source = Vec::with_capacity(w * h);
    for y in 0..h {
        let (j, fy) = (y / TPS_COARSE_STEP, (y % TPS_COARSE_STEP) as f64 / TPS_COARSE_STEP as f64);
        for x in 0..w {
            let (i, fx) = (x / TPS_COARSE_STEP, (x % TPS_COARSE_STEP) as f64 / TPS_COARSE_STEP as f64);
            let at = |i: usize, j: usize| coarse_src[j * cw + i];
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            let lerp = |u: f64, v: f64, t: f64| u + (v - u) * t;
            source.push([lerp(lerp(a.x, b.x, fx), lerp(c.x, d.x, fx), fy), lerp(lerp(a.y, b.y, fx), lerp(c.y, d.y, fx), fy)]);
        }
    }
    let field = WarpField { width: w, height: h, source, model: Some(model) };
    let out = resample(image, fill_tone(cfg), |x, y| Some(field.source_of(x, y)));
    (out, field)
}

/// Perspective warp: each image corner moves inward by independent uniform
/// offsets of up to `distortion / 2` of the corresponding dimension. Returns
/// the homography taking input pixel coordinates to output coordinates.
pub fn apply_perspective(image: &RasterImage, distortion: f64, fill: f64, rng: &mut ChaCha8Rng) -> (RasterImage, Homography) {
    let (w, h) = ((image.width - 1) as f64, (image.height - 1) as f64);
    if distortion <= 0.0 {
        return (image.clone(), Homography::IDENTITY);
    }
    let src = [Point2::new(0.0, 0.0), Point2::new(0.0, h), Point2::new(w, h), Point2::new(w, 0.0)];
    let (mx, my) = (distortion / 2.0 * w, distortion / 2.0 * h);
    let (hom, inv) = loop {
        let mut off = || (rng.random_range(0.0..=mx), rng.random_range(0.0..=my));
        let (a, b, c, d) = (off(), off(), off(), off());
        let dst = [Point2::new(a.0, a.1), Point2::new(b.0, h - b.1), Point2::new(w - c.0, h - c.1), Point2::new(w - d.0, d.1)];
        if let Ok(hom) = geometry::solve_from_corners(&src, &dst) {
            if let Ok(inv) = geometry::invert(&hom) {
                break (hom, inv);
            }
        }
    };
    let out = resample(image, fill, |x, y| geometry::apply(&inv, Point2::new(x as f64, y as f64)).ok());
    (out, hom)
}

/// Adds Gaussian fields generated at `1/divisor` resolution and bilinearly
/// upsampled, independently per channel.
pub fn apply_noise(image: &RasterImage, sigmas: &[(f64, f64)], rng: &mut ChaCha8Rng) -> RasterImage {
    let (w, h) = (image.width, image.height);
    let mut acc = vec![0.0f64; w * h * 3];
    let mut touched = false;
    for &(div, sigma) in sigmas {
        if sigma <= 0.0 {
            continue;
        }
        touched = true;
        let normal = Normal::new(0.0, sigma).expect("sigma > 0");
        let (gw, gh) = ((w as f64 / div).ceil() as usize + 2, (h as f64 / div).ceil() as usize + 2);
        let grid: Vec<f64> = (0..gw * gh * 3).map(|_| normal.sample(rng)).collect();
        for y in 0..h {
            let gy = y as f64 / div;
            let (j, fy) = (gy.floor() as usize, gy.fract());
            for x in 0..w {
                let gx = x as f64 / div;
                let (i, fx) = (gx.floor() as usize, gx.fract());
                for k in 0..3 {
                    let at = |i: usize, j: usize| grid[(j * gw + i) * 3 + k];
                    let top = at(i, j) * (1.0 - fx) + at(i + 1, j) * fx;
                    let bot = at(i, j + 1) * (1.0 - fx) + at(i + 1, j + 1) * fx;
                    acc[(y * w + x) * 3 + k] += top * (1.0 - fy) + bot * fy;
                }
            }
        }
    }
    if !touched {
        return image.clone();
    }
    let mut out = image.clone();
    for (p, n) in out.pixels.iter_mut().zip(&acc) {
        *p = (*p as f64 + n).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn rgb_to_hsv(c: [f64; 3]) -> [f64; 3] {
    let max = c[0].max(c[1]).max(c[2]);
    let min = c[0].min(c[1]).min(c[2]);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == c[0] {
        60.0 * ((c[1] - c[2]) / d).rem_euclid(6.0)
    } else if max == c[1] {
        60.0 * ((c[2] - c[0]) / d + 2.0)
    } else {
        60.0 * ((c[0] - c[1]) / d + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    let c = v * s;
    let hp = h.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Hue rotation and saturation scaling in HSV, then per-channel contrast
/// about the channel mean and per-channel brightness gain.
pub fn apply_color(image: &RasterImage, ranges: &ColorRanges, rng: &mut ChaCha8Rng) -> RasterImage {
    if ranges.is_identity() {
        return image.clone();
    }
    let mut sym = |r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    let hue = sym(ranges.hue_deg);
    let sat = 1.0 + sym(ranges.saturation);
    let contrast = [0; 3].map(|_| 1.0 + sym(ranges.contrast));
    let gain = [0; 3].map(|_| 1.0 + sym(ranges.brightness));

    let n = image.width * image.height;
    let mut px: Vec<[f64; 3]> = image
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let [h, s, v] = rgb_to_hsv([p[0] as f64, p[1] as f64, p[2] as f64]);
            hsv_to_rgb([h + hue, (s * sat).clamp(0.0, 1.0), v])
        })
        .collect();
    let mut mean = [0.0; 3];
    for p in &px {
        for k in 0..3 {
            mean[k] += p[k] / n as f64;
        }
    }
    let mut out = image.clone();
    for (dst, p) in out.pixels.chunks_exact_mut(3).zip(px.iter_mut()) {
        for k in 0..3 {
            let v = ((p[k] - mean[k]) * contrast[k] + mean[k]) * gain[k];
            dst[k] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn convolve_separable(image: &RasterImage, kernel: &[f64]) -> RasterImage {
    let (w, h) = (image.width as isize, image.height as isize);
    let r = (kernel.len() / 2) as isize;
    let src: Vec<f64> = image.pixels.iter().map(|&v| v as f64).collect();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for k in 0..3 {
                let mut s = 0.0;
                for (t, &kv) in kernel.iter().enumerate() {
                    let xx = (x + t as isize - r).clamp(0, w - 1);
                    s += kv * src[((y * w + xx) * 3) as usize + k];
                }
                tmp[((y * w + x) * 3) as usize + k] = s;
            }
        }
    }
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            for k in 0..3 {
                let mut s = 0.0;
                for (t, &kv) in kernel.iter().enumerate() {
                    let yy = (y + t as isize - r).clamp(0, h - 1);
                    s += kv * tmp[((yy * w + x) * 3) as usize + k];
                }
                out.pixels[((y * w + x) * 3) as usize + k] = s.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    out
}

/// Gaussian blur with border replication; σ = 0 is the identity.
pub fn gaussian_blur(image: &RasterImage, sigma: f64) -> RasterImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= total);
    convolve_separable(image, &kernel)
}

/// Line kernel of `length` unit-spaced samples along `angle_deg`, each
/// splatted bilinearly; a horizontal odd-length kernel is an exact box.
pub fn motion_kernel(length: usize, angle_deg: f64) -> (Vec<f64>, usize) {
    let half = length as f64 / 2.0;
    let r = half.ceil() as usize + 1;
    let size = 2 * r + 1;
    let mut k = vec![0.0; size * size];
    let (dx, dy) = (angle_deg.to_radians().cos(), -angle_deg.to_radians().sin());
    for s in 0..length {
        let t = s as f64 - (length as f64 - 1.0) / 2.0;
        let (x, y) = (r as f64 + t * dx, r as f64 + t * dy);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        for (ox, oy, wgt) in [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)] {
            let (xi, yi) = (x0 as usize + ox, y0 as usize + oy);
            if wgt > 0.0 && xi < size && yi < size {
                k[yi * size + xi] += wgt;
            }
        }
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    (k, size)
}

/// Motion blur along a line of `length` pixels; lengths ≤ 1 are the identity.
pub fn motion_blur(image: &RasterImage, length: usize, angle_deg: f64) -> RasterImage {
    if length <= 1 {
        return image.clone();
    }
    let (kernel, size) = motion_kernel(length, angle_deg);
    let r = (size / 2) as isize;
    let taps: Vec<(isize, isize, f64)> =
        kernel.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| ((i % size) as isize - r, (i / size) as isize - r, v)).collect();
    let (w, h) = (image.width as isize, image.height as isize);
    let mut out = image.clone();
    for y in 0..h {
        for x in 0..w {
            let mut s = [0.0; 3];
            for &(ox, oy, v) in &taps {
                let xx = (x + ox).clamp(0, w - 1) as usize;
                let yy = (y + oy).clamp(0, h - 1) as usize;
                let p = image.get(xx, yy);
                for k in 0..3 {
                    s[k] += v * p[k] as f64;
                }
            }
            out.put(x as usize, y as usize, s.map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    out
}

/// Gaussian or motion blur, chosen at random.
pub fn apply_blur(image: &RasterImage, cfg: &BlurConfig, rng: &mut ChaCha8Rng) -> RasterImage {
    if cfg.motion_prob > 0.0 && rng.random_bool(cfg.motion_prob.min(1.0)) {
        let (lo, hi) = cfg.motion_length;
        let len = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let (alo, ahi) = cfg.motion_angle_deg;
        let angle = if ahi > alo { rng.random_range(alo..ahi) } else { alo };
        motion_blur(image, len, angle)
    } else {
        let (lo, hi) = cfg.gaussian_sigma;
        let sigma = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        gaussian_blur(image, sigma)
    }
}

fn map_box(b: &PixelBox, f: &dyn Fn(Point2) -> Point2) -> PixelBox {
    let c = f(b.center());
    let pts = b.corners().map(f);
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in &pts[1..] {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    PixelBox::centered(c, (hi.x - lo.x) / 2.0, (hi.y - lo.y) / 2.0)
}

/// Full chain: TPS → perspective → noise → color → blur. Each stage draws
/// from its own stream derived from `cfg.seed`, so disabling one stage never
/// changes what another produces.
pub fn augment(image: &RasterImage, gt: &GroundTruth, cfg: &AugmentConfig) -> (RasterImage, GroundTruth) {
    if !cfg.any_enabled() {
        return (image.clone(), gt.clone());
    }
    let stage = |name: &str| seeds::stage_rng(cfg.seed, 0, name);
    let fill = fill_tone(cfg);
    let mut img = image.clone();

    let field = if cfg.tps {
        let (out, field) = apply_tps(&img, cfg, &mut stage("tps"));
        img = out;
        Some(field)
    } else {
        None
    };
    let hom = if cfg.perspective {
        let (out, h) = apply_perspective(&img, cfg.perspective_distortion, fill, &mut stage("perspective"));
        img = out;
        Some(h)
    } else {
        None
    };
    if cfg.noise {
        img = apply_noise(&img, &cfg.noise_sigmas, &mut stage("noise"));
    }
    if cfg.color {
        img = apply_color(&img, &cfg.color_ranges, &mut stage("color"));
    }
    if cfg.blur {
        img = apply_blur(&img, &cfg.blur_params, &mut stage("blur"));
    }

    let forward = |p: Point2| -> Point2 {
        let p = field.as_ref().map_or(p, |f| f.forward(p));
        hom.as_ref().map_or(p, |h| geometry::apply(h, p).unwrap_or(p))
    };
    let mut out = gt.clone();
    for l in &mut out.label_annotations {
        l.bbox = map_box(&l.bbox, &forward);
    }
    for m in &mut out.mark_annotations {
        m.bbox = map_box(&m.bbox, &forward);
    }
    out.corners = gt.corners.map(forward);
    if hom.is_some() {
        out.applied_homography = hom;
    }
    (img, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::WHITE;

    #[test]
    fn tps_interpolates_controls() {
        let controls =
            [Point2::new(0.0, 0.0), Point2::new(100.0, 0.0), Point2::new(0.0, 100.0), Point2::new(100.0, 100.0), Point2::new(50.0, 50.0)];
        let disp = [Point2::new(1.0, 0.0), Point2::new(0.0, 2.0), Point2::new(-1.0, 0.5), Point2::new(0.0, 0.0), Point2::new(3.0, -2.0)];
        let m = TpsModel::fit(&controls, &disp, 100.0).unwrap();
        for (c, d) in controls.iter().zip(&disp) {
            let got = m.displacement(*c);
            assert!((got.x - d.x).abs() < 1e-9 && (got.y - d.y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_distortion_is_identity() {
        let img = RasterImage::new(10, 10, WHITE);
        let (out, h) = apply_perspective(&img, 0.0, 220.0, &mut seeds::rng(1));
        assert_eq!(out, img);
        assert_eq!(h, Homography::IDENTITY);
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig { perspective_distortion: 1.0, ..AugmentConfig::default() }.validate().is_err());
        assert!(AugmentConfig { tps_magnitude: -0.1, ..AugmentConfig::default() }.validate().is_err());
    }

    #[test]
    fn hsv_roundtrip() {
        for c in [[10.0, 200.0, 30.0], [255.0, 0.0, 0.0], [12.0, 12.0, 12.0], [40.0, 90.0, 250.0]] {
            let back = hsv_to_rgb(rgb_to_hsv(c));
            for k in 0..3 {
                assert!((back[k] - c[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn motion_kernel_horizontal_box() {
        let (k, size) = motion_kernel(5, 0.0);
        let r = size / 2;
        let row: Vec<f64> = (0..size).map(|x| k[r * size + x]).collect();
        assert_eq!(row.iter().filter(|&&v| (v - 0.2).abs() < 1e-12).count(), 5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
