//! Randomized line-chart specifications and their rasterization with exact
//! ground truth.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::font;
use crate::geometry::{Homography, PixelBox, Point2};
use crate::raster::{RasterImage, Rgb, BLACK, WHITE};
use crate::seeds;

pub const IMAGE_SIZE: usize = 720;
pub const MARK_RADIUS: f64 = 6.0;
pub const LINE_WIDTH: f64 = 2.0;
pub const GRID_COLOR: Rgb = [210, 215, 225];

/// Axes rectangle margins in pixels at 720×720.
pub const MARGIN_LEFT: f64 = 90.0;
pub const MARGIN_RIGHT: f64 = 30.0;
pub const MARGIN_TOP: f64 = 30.0;
pub const MARGIN_BOTTOM: f64 = 70.0;
/// Fraction of the axes extent left empty before the first and after the
/// last tick.
pub const TICK_PADDING: f64 = 0.05;

const FONT_SCALE: f64 = 2.0;
const FONT_STROKE: f64 = 1.5;
const TICK_LENGTH: f64 = 5.0;
const LABEL_GAP: f64 = 4.0;
const Y_LABEL_GAP: f64 = 10.0;

const INTERVALS: [(f64, f64); 5] = [(0.0, 1.0), (0.0, 100.0), (0.0, 10.0), (1000.0, 10000.0), (-50.0, 50.0)];
const STRIDES: [f64; 10] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 100.0, 1000.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainProfile {
    #[default]
    General,
    /// Log-frequency x axis (125 Hz … 8 kHz), hearing level in dB on y.
    Audiogram,
}

impl std::str::FromStr for DomainProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Self::General),
            "audiogram" => Ok(Self::Audiogram),
            _ => Err(format!("unknown profile {s:?} (expected general or audiogram)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFormat {
    Plain,
    Percent,
    KSuffix,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("format {format:?} is not admissible for value {value}")]
    Inadmissible { value: f64, format: LabelFormat },
    #[error("value {0} is not finite")]
    NonFinite(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub start_value: f64,
    /// Additive step, or the ratio between neighbouring ticks on a log axis.
    pub stride: f64,
    pub label_format: LabelFormat,
    /// Decimal places needed to write every tick value exactly.
    pub decimals: u32,
}

impl AxisSpec {
    /// Tick values, computed in integer units of `10^-decimals` and rounded
    /// once through their decimal representation.
    pub fn tick_values(&self, n: usize, log: bool) -> Vec<f64> {
        if log {
            return (0..n).map(|k| self.start_value * self.stride.powi(k as i32)).collect();
        }
        let unit = 10f64.powi(self.decimals as i32);
        let start = (self.start_value * unit).round() as i64;
        let step = (self.stride * unit).round() as i64;
        (0..n as i64).map(|k| units_to_value(start + k * step, self.decimals)).collect()
    }
}

fn units_to_value(units: i64, decimals: u32) -> f64 {
    let digits = crate::decimal::shift_point(&units.unsigned_abs().to_string(), -(decimals as i32)).expect("integer literal");
    let sign = if units < 0 { "-" } else { "" };
    format!("{sign}{digits}").parse().expect("decimal literal")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkStyle {
    Circle,
    Triangle,
    Cross,
    Diamond,
    Square,
    Plus,
    Star,
}

pub const MARK_STYLES: [MarkStyle; 7] =
    [MarkStyle::Circle, MarkStyle::Triangle, MarkStyle::Cross, MarkStyle::Diamond, MarkStyle::Square, MarkStyle::Plus, MarkStyle::Star];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineStyle {
    Solid,
    Dot,
    Dash,
    DashDot,
}

pub const LINE_STYLES: [LineStyle; 4] = [LineStyle::Solid, LineStyle::Dot, LineStyle::Dash, LineStyle::DashDot];

impl LineStyle {
    /// Alternating on/off lengths in pixels; empty for solid.
    pub fn pattern(self) -> &'static [f64] {
        match self {
            LineStyle::Solid => &[],
            LineStyle::Dot => &[2.0, 4.0],
            LineStyle::Dash => &[10.0, 6.0],
            LineStyle::DashDot => &[10.0, 4.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub mark_style: MarkStyle,
    pub line_style: LineStyle,
    pub color: Rgb,
    /// `(tick_index, y_value)`, one per x tick.
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub aspect_ratio: f64,
    pub num_ticks_x: usize,
    pub num_ticks_y: usize,
    pub x_axis: AxisSpec,
    pub y_axis: AxisSpec,
    pub grid: bool,
    pub series: Vec<SeriesSpec>,
    pub log_x: bool,
}

impl ChartSpec {
    pub fn x_ticks(&self) -> Vec<f64> {
        self.x_axis.tick_values(self.num_ticks_x, self.log_x)
    }

    pub fn y_ticks(&self) -> Vec<f64> {
        self.y_axis.tick_values(self.num_ticks_y, false)
    }

    pub fn layout(&self) -> ChartLayout {
        let (w, h) = (self.width as f64, self.height as f64);
        let axes_w = w - MARGIN_LEFT - MARGIN_RIGHT;
        let axes_h = self.aspect_ratio * axes_w;
        let top = MARGIN_TOP + ((h - MARGIN_TOP - MARGIN_BOTTOM) - axes_h) / 2.0;
        ChartLayout { left: MARGIN_LEFT, right: MARGIN_LEFT + axes_w, top, bottom: top + axes_h }
    }
}

/// Axes rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartLayout {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

impl ChartLayout {
    /// Pixel x of the `k`-th of `n` evenly placed ticks.
    pub fn tick_x(&self, k: usize, n: usize) -> f64 {
        self.left + (self.right - self.left) * tick_fraction(k, n)
    }

    /// Pixel y of the `k`-th of `n` ticks, counted upwards from the bottom.
    pub fn tick_y(&self, k: usize, n: usize) -> f64 {
        self.bottom - (self.bottom - self.top) * tick_fraction(k, n)
    }

    /// Corners in top-left, bottom-left, bottom-right, top-right order.
    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.left, self.top),
            Point2::new(self.left, self.bottom),
            Point2::new(self.right, self.bottom),
            Point2::new(self.right, self.top),
        ]
    }
}

fn tick_fraction(k: usize, n: usize) -> f64 {
    TICK_PADDING + (1.0 - 2.0 * TICK_PADDING) * k as f64 / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAnnotation {
    pub bbox: PixelBox,
    pub text: String,
    pub value: f64,
    pub axis: AxisKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkAnnotation {
    pub bbox: PixelBox,
    pub series_id: usize,
    pub data_point: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub log_x: bool,
    pub raw_series: Vec<Vec<(f64, f64)>>,
    pub label_annotations: Vec<LabelAnnotation>,
    pub mark_annotations: Vec<MarkAnnotation>,
    /// Axes-rectangle corners: top-left, bottom-left, bottom-right, top-right.
    pub corners: [Point2; 4],
    pub applied_homography: Option<Homography>,
}

/// Writes `value` in the given notation so that parsing the text yields
/// exactly `value` again.
pub fn format_tick_label(value: f64, format: LabelFormat) -> Result<String, FormatError> {
    if !value.is_finite() {
        return Err(FormatError::NonFinite(value));
    }
    let inadmissible = || FormatError::Inadmissible { value, format };
    // Display prints the shortest string that reads back to the same f64.
    let plain = if value == 0.0 { "0".to_string() } else { format!("{value}") };
    let (sign, digits) = match plain.strip_prefix('-') {
        Some(d) => ("-", d),
        None => ("", plain.as_str()),
    };
    match format {
        LabelFormat::Plain => Ok(plain.clone()),
        LabelFormat::Percent if value < 1.0 => Ok(format!("{sign}{}%", crate::decimal::shift_point(digits, 2).ok_or_else(inadmissible)?)),
        LabelFormat::KSuffix if value >= 1000.0 => {
            Ok(format!("{sign}{}k", crate::decimal::shift_point(digits, -3).ok_or_else(inadmissible)?))
        }
        _ => Err(inadmissible()),
    }
}

fn sample_linear_axis<R: Rng>(rng: &mut R) -> (AxisSpec, usize) {
    let (lo, hi) = INTERVALS[rng.random_range(0..INTERVALS.len())];
    let span = hi - lo;
    let strides: Vec<f64> = STRIDES.iter().copied().filter(|&s| 4.0 * s <= span && 9.0 * s >= span / 4.0).collect();
    let stride = strides[rng.random_range(0..strides.len())];
    let decimals = if stride < 1.0 { 1 } else { 0 };
    let unit = 10f64.powi(decimals);
    let (lo_u, hi_u, s_u) = ((lo * unit).round() as i64, (hi * unit).round() as i64, (stride * unit).round() as i64);
    let first_m = lo_u.div_euclid(s_u) + i64::from(lo_u.rem_euclid(s_u) != 0);
    let max_n = ((hi_u.div_euclid(s_u) - first_m + 1) as usize).min(10);
    let n = rng.random_range(5..=max_n);
    let last_m = (hi_u - (n as i64 - 1) * s_u).div_euclid(s_u);
    let m = rng.random_range(first_m..=last_m);
    let start_value = units_to_value(m * s_u, decimals as u32);
    let mut axis = AxisSpec { start_value, stride, label_format: LabelFormat::Plain, decimals: decimals as u32 };
    let ticks = axis.tick_values(n, false);
    if ticks.iter().all(|&v| v < 1.0) && rng.random_bool(0.5) {
        axis.label_format = LabelFormat::Percent;
    } else if ticks.iter().all(|&v| v >= 1000.0) && rng.random_bool(0.5) {
        axis.label_format = LabelFormat::KSuffix;
    }
    (axis, n)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> Rgb {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

/// Deterministic chart recipe for `(master_seed, index, profile)`.
pub fn sample_spec(master_seed: u64, index: u64, profile: DomainProfile) -> ChartSpec {
    let seed = seeds::derive_seed(master_seed, index, "spec");
    let mut rng = seeds::rng(seed);
    let aspect_ratio = rng.random_range(0.25..=1.0);

    let (x_axis, num_ticks_x, y_axis, num_ticks_y, log_x) = match profile {
        DomainProfile::General => {
            let (x, nx) = sample_linear_axis(&mut rng);
            let (y, ny) = sample_linear_axis(&mut rng);
            (x, nx, y, ny, false)
        }
        DomainProfile::Audiogram => {
            let start = if rng.random_bool(0.5) { 125.0 } else { 250.0 };
            let max_n = if start == 125.0 { 7 } else { 6 };
            let nx = rng.random_range(5..=max_n);
            let x = AxisSpec { start_value: start, stride: 2.0, label_format: LabelFormat::Plain, decimals: 0 };
            let stride = if rng.random_bool(0.5) { 10.0 } else { 20.0 };
            let max_ny = (130.0 / stride) as usize + 1;
            let ny = rng.random_range(5..=max_ny.min(10));
            let last_m = ((120.0 - (ny as f64 - 1.0) * stride) / stride).floor() as i64;
            let m = rng.random_range(-1..=last_m.max(-1));
            let y = AxisSpec { start_value: (m as f64 * stride).max(-10.0), stride, label_format: LabelFormat::Plain, decimals: 0 };
            (x, nx, y, ny, true)
        }
    };
    let y_ticks = y_axis.tick_values(num_ticks_y, false);
    let (y_lo, y_hi) = (y_ticks[0], y_ticks[num_ticks_y - 1]);
    let step = Normal::new(0.0, 0.15 * (y_hi - y_lo)).expect("positive sigma");

    let num_series = match profile {
        DomainProfile::General => rng.random_range(1..=3),
        DomainProfile::Audiogram => rng.random_range(1..=2),
    };
    let hue0 = rng.random_range(0.0..360.0);
    let series = (0..num_series)
        .map(|k| {
            let mut y = rng.random_range(y_lo..=y_hi);
            let points = (0..num_ticks_x)
                .map(|i| {
                    if i > 0 {
                        y = (y + step.sample(&mut rng)).clamp(y_lo, y_hi);
                    }
                    (i, y)
                })
                .collect();
            SeriesSpec {
                mark_style: MARK_STYLES[rng.random_range(0..MARK_STYLES.len())],
                line_style: LINE_STYLES[rng.random_range(0..LINE_STYLES.len())],
                color: hsv_to_rgb(hue0 + 360.0 * k as f64 / num_series as f64, 0.85, 0.75),
                points,
            }
        })
        .collect();

    ChartSpec {
        seed,
        width: IMAGE_SIZE,
        height: IMAGE_SIZE,
        aspect_ratio,
        num_ticks_x,
        num_ticks_y,
        x_axis,
        y_axis,
        grid: rng.random_bool(0.5),
        series,
        log_x,
    }
}

/// Draws one mark of the given style centered at `c`.
pub fn draw_mark(img: &mut RasterImage, style: MarkStyle, c: Point2, radius: f64, color: Rgb) {
    let at = |dx: f64, dy: f64| Point2::new(c.x + dx, c.y + dy);
    let ring = |count: usize, radii: &[f64], phase: f64| -> Vec<Point2> {
        (0..count)
            .map(|i| {
                let t = phase + std::f64::consts::TAU * i as f64 / count as f64;
                let r = radii[i % radii.len()];
                at(r * t.cos(), r * t.sin())
            })
            .collect()
    };
    let bar = radius * 0.4;
    match style {
        MarkStyle::Circle => img.fill_circle(c, radius, color),
        MarkStyle::Square => {
            let s = radius * 0.85;
            img.fill_polygon(&[at(-s, -s), at(-s, s), at(s, s), at(s, -s)], color)
        }
        MarkStyle::Diamond => img.fill_polygon(&ring(4, &[radius], -std::f64::consts::FRAC_PI_2), color),
        MarkStyle::Triangle => img.fill_polygon(&ring(3, &[radius], -std::f64::consts::FRAC_PI_2), color),
        MarkStyle::Star => img.fill_polygon(&ring(10, &[radius, radius * 0.45], -std::f64::consts::FRAC_PI_2), color),
        MarkStyle::Cross => {
            let d = radius * std::f64::consts::FRAC_1_SQRT_2;
            img.draw_segment(at(-d, -d), at(d, d), bar, color);
            img.draw_segment(at(-d, d), at(d, -d), bar, color);
        }
        MarkStyle::Plus => {
            img.draw_segment(at(-radius, 0.0), at(radius, 0.0), bar, color);
            img.draw_segment(at(0.0, -radius), at(0.0, radius), bar, color);
        }
    }
}

/// Draws a polyline with an on/off dash pattern measured along its length.
pub fn draw_styled_polyline(img: &mut RasterImage, pts: &[Point2], style: LineStyle, width: f64, color: Rgb) {
    let pattern = style.pattern();
    if pattern.is_empty() {
        img.draw_polyline(pts, width, color);
        return;
    }
    let period: f64 = pattern.iter().sum();
    let mut phase = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        let mut t = 0.0;
        while t < len {
            let mut acc = 0.0;
            let mut idx = 0;
            while acc + pattern[idx] <= phase {
                acc += pattern[idx];
                idx += 1;
            }
            let run = (acc + pattern[idx] - phase).min(len - t);
            if idx % 2 == 0 {
                let p = |s: f64| Point2::new(a.x + (b.x - a.x) * s / len, a.y + (b.y - a.y) * s / len);
                img.draw_segment(p(t), p(t + run), width, color);
            }
            t += run;
            phase = (phase + run) % period;
        }
    }
}

/// Rasterizes a chart on a white canvas and records its ground truth.
pub fn render_chart(spec: &ChartSpec) -> (RasterImage, GroundTruth) {
    let mut img = RasterImage::new(spec.width, spec.height, WHITE);
    let lay = spec.layout();
    let (nx, ny) = (spec.num_ticks_x, spec.num_ticks_y);
    let (x_ticks, y_ticks) = (spec.x_ticks(), spec.y_ticks());

    if spec.grid {
        for k in 0..nx {
            let x = lay.tick_x(k, nx);
            img.draw_segment(Point2::new(x, lay.top), Point2::new(x, lay.bottom), 1.0, GRID_COLOR);
        }
        for k in 0..ny {
            let y = lay.tick_y(k, ny);
            img.draw_segment(Point2::new(lay.left, y), Point2::new(lay.right, y), 1.0, GRID_COLOR);
        }
    }
    let c = lay.corners();
    img.draw_polyline(&[c[0], c[1], c[2], c[3], c[0]], 2.0, BLACK);

    let mut labels = Vec::with_capacity(nx + ny);
    let mut put_label = |img: &mut RasterImage, value: f64, format: LabelFormat, axis: AxisKind, anchor: Point2| {
        let text = format_tick_label(value, format).expect("generator formats are admissible");
        let t = font::layout(&text, FONT_SCALE, FONT_STROKE);
        let (hw, hh) = (t.bbox.width() / 2.0, t.bbox.height() / 2.0);
        let center = match axis {
            AxisKind::X => Point2::new(anchor.x, anchor.y + TICK_LENGTH + LABEL_GAP + hh),
            AxisKind::Y => Point2::new(anchor.x - Y_LABEL_GAP - hw, anchor.y),
        };
        let from = t.bbox.center();
        t.translated(center.x - from.x, center.y - from.y).draw(img, BLACK);
        labels.push(LabelAnnotation { bbox: PixelBox::centered(center, hw, hh), text, value, axis });
    };
    for (k, &v) in x_ticks.iter().enumerate() {
        let x = lay.tick_x(k, nx);
        img.draw_segment(Point2::new(x, lay.bottom), Point2::new(x, lay.bottom + TICK_LENGTH), 1.5, BLACK);
        put_label(&mut img, v, spec.x_axis.label_format, AxisKind::X, Point2::new(x, lay.bottom));
    }
    for (k, &v) in y_ticks.iter().enumerate() {
        let y = lay.tick_y(k, ny);
        img.draw_segment(Point2::new(lay.left - TICK_LENGTH, y), Point2::new(lay.left, y), 1.5, BLACK);
        put_label(&mut img, v, spec.y_axis.label_format, AxisKind::Y, Point2::new(lay.left, y));
    }

    let (y_lo, y_hi) = (y_ticks[0], y_ticks[ny - 1]);
    let y_pixel = |v: f64| lay.bottom - (lay.bottom - lay.top) * (TICK_PADDING + (1.0 - 2.0 * TICK_PADDING) * (v - y_lo) / (y_hi - y_lo));
    let mut raw_series = Vec::with_capacity(spec.series.len());
    let mut marks = Vec::new();
    let centers: Vec<Vec<Point2>> =
        spec.series.iter().map(|s| s.points.iter().map(|&(i, v)| Point2::new(lay.tick_x(i, nx), y_pixel(v))).collect()).collect();
    for (s, pts) in spec.series.iter().zip(&centers) {
        draw_styled_polyline(&mut img, pts, s.line_style, LINE_WIDTH, s.color);
    }
    for (sid, (s, pts)) in spec.series.iter().zip(&centers).enumerate() {
        let mut raw = Vec::with_capacity(s.points.len());
        for (&(i, v), &p) in s.points.iter().zip(pts) {
            draw_mark(&mut img, s.mark_style, p, MARK_RADIUS, s.color);
            raw.push((x_ticks[i], v));
            marks.push(MarkAnnotation {
                bbox: PixelBox::centered(p, MARK_RADIUS, MARK_RADIUS),
                series_id: sid,
                data_point: (x_ticks[i], v),
            });
        }
        raw_series.push(raw);
    }

    let gt = GroundTruth {
        width: spec.width,
        height: spec.height,
        log_x: spec.log_x,
        raw_series,
        label_annotations: labels,
        mark_annotations: marks,
        corners: lay.corners(),
        applied_homography: None,
    };
    (img, gt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(format_tick_label(5000.0, LabelFormat::KSuffix).unwrap(), "5k");
        assert_eq!(format_tick_label(0.5, LabelFormat::Percent).unwrap(), "50%");
        assert_eq!(format_tick_label(0.2, LabelFormat::Plain).unwrap(), "0.2");
        assert_eq!(format_tick_label(-0.0, LabelFormat::Plain).unwrap(), "0");
        assert_eq!(format_tick_label(1500.0, LabelFormat::KSuffix).unwrap(), "1.5k");
        assert_eq!(format_tick_label(0.0, LabelFormat::Percent).unwrap(), "0%");
        assert!(format_tick_label(1.0, LabelFormat::Percent).is_err());
        assert!(format_tick_label(999.0, LabelFormat::KSuffix).is_err());
    }

    #[test]
    fn tick_values_are_exact_decimals() {
        let a = AxisSpec { start_value: 0.3, stride: 0.1, label_format: LabelFormat::Plain, decimals: 1 };
        assert_eq!(a.tick_values(4, false), vec![0.3, 0.4, 0.5, 0.6]);
        let a = AxisSpec { start_value: 125.0, stride: 2.0, label_format: LabelFormat::Plain, decimals: 0 };
        assert_eq!(a.tick_values(3, true), vec![125.0, 250.0, 500.0]);
    }

    #[test]
    fn ranges_hold() {
        for i in 0..200 {
            let s = sample_spec(7, i, DomainProfile::General);
            assert!((5..=10).contains(&s.num_ticks_x) && (5..=10).contains(&s.num_ticks_y));
            assert!((1..=3).contains(&s.series.len()));
            assert!((0.25..=1.0).contains(&s.aspect_ratio));
            let xt = s.x_ticks();
            let (lo, hi) = (s.y_ticks()[0], *s.y_ticks().last().unwrap());
            for series in &s.series {
                assert_eq!(series.points.len(), xt.len());
                assert!(series.points.iter().all(|&(_, v)| (lo..=hi).contains(&v)));
            }
        }
    }

    #[test]
    fn audiogram_is_log_x() {
        let s = sample_spec(7, 0, DomainProfile::Audiogram);
        assert!(s.log_x);
        let xt = s.x_ticks();
        assert!(*xt.last().unwrap() <= 8000.0 && xt.len() >= 5);
        assert!(s.y_ticks()[0] >= -10.0 && *s.y_ticks().last().unwrap() <= 120.0);
    }

    #[test]
    fn deterministic() {
        assert_eq!(sample_spec(7, 3, DomainProfile::General), sample_spec(7, 3, DomainProfile::General));
        assert_ne!(sample_spec(7, 3, DomainProfile::General), sample_spec(7, 4, DomainProfile::General));
    }

    #[test]
    fn dash_pattern_leaves_gaps() {
        let mut img = RasterImage::new(60, 9, WHITE);
        draw_styled_polyline(&mut img, &[Point2::new(2.0, 4.0), Point2::new(58.0, 4.0)], LineStyle::Dash, 2.0, BLACK);
        let row: Vec<bool> = (0..60).map(|x| img.get(x, 4)[0] < 128).collect();
        assert!(row[5] && !row[14] && row[20]);
    }
}
