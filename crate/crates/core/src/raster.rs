//! RGB raster buffer with anti-aliased drawing primitives and PNG I/O.

use std::path::Path;

use crate::geometry::Point2;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];

#[derive(Debug, thiserror::Error)]
#[error("image I/O: {0}")]
pub struct ImageIoError(String);

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Self { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    /// Alpha-blends `c` over pixel `(x, y)`.
    pub fn blend(&mut self, x: usize, y: usize, c: Rgb, alpha: f64) {
        if alpha <= 0.0 {
            return;
        }
        let a = alpha.min(1.0);
        let i = (y * self.width + x) * 3;
        for k in 0..3 {
            let v = self.pixels[i + k] as f64 * (1.0 - a) + c[k] as f64 * a;
            self.pixels[i + k] = v.round().clamp(0.0, 255.0) as u8;
        }
    }

    /// Bilinear sample at real coordinates (pixel centers on integers);
    /// `None` outside the pixel-center hull.
    pub fn sample(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        if !(x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64) {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (a, b, c, d) = (self.get(x0, y0), self.get(x1, y0), self.get(x0, y1), self.get(x1, y1));
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            out[k] = top * (1.0 - fy) + bot * fy;
        }
        Some(out)
    }

    /// Paints pixels within the given box using a per-pixel coverage function.
    fn paint<F: Fn(Point2) -> f64>(&mut self, min: Point2, max: Point2, c: Rgb, coverage: F) {
        let x0 = min.x.floor().max(0.0) as usize;
        let y0 = min.y.floor().max(0.0) as usize;
        let x1 = (max.x.ceil() as isize).min(self.width as isize - 1);
        let y1 = (max.y.ceil() as isize).min(self.height as isize - 1);
        if x1 < 0 || y1 < 0 {
            return;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let a = coverage(Point2::new(x as f64, y as f64));
                if a > 0.0 {
                    self.blend(x, y, c, a);
                }
            }
        }
    }

    pub fn draw_segment(&mut self, a: Point2, b: Point2, width: f64, c: Rgb) {
        let pad = width / 2.0 + 1.0;
        let min = Point2::new(a.x.min(b.x) - pad, a.y.min(b.y) - pad);
        let max = Point2::new(a.x.max(b.x) + pad, a.y.max(b.y) + pad);
        self.paint(min, max, c, |p| (width / 2.0 + 0.5 - crate::quadfit::point_segment_distance(p, a, b)).clamp(0.0, 1.0));
    }

    pub fn fill_circle(&mut self, center: Point2, radius: f64, c: Rgb) {
        let pad = radius + 1.0;
        let min = Point2::new(center.x - pad, center.y - pad);
        let max = Point2::new(center.x + pad, center.y + pad);
        self.paint(min, max, c, |p| (radius + 0.5 - p.distance(center)).clamp(0.0, 1.0));
    }

    /// Even–odd filled polygon with a one-pixel anti-aliased rim.
    pub fn fill_polygon(&mut self, vertices: &[Point2], c: Rgb) {
        if vertices.len() < 3 {
            return;
        }
        let (mut min, mut max) = (vertices[0], vertices[0]);
        for v in vertices {
            min = Point2::new(min.x.min(v.x), min.y.min(v.y));
            max = Point2::new(max.x.max(v.x), max.y.max(v.y));
        }
        let min = Point2::new(min.x - 1.0, min.y - 1.0);
        let max = Point2::new(max.x + 1.0, max.y + 1.0);
        self.paint(min, max, c, |p| {
            let n = vertices.len();
            let mut inside = false;
            let mut dist = f64::INFINITY;
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y) {
                    inside = !inside;
                }
                dist = dist.min(crate::quadfit::point_segment_distance(p, a, b));
            }
            let signed = if inside { dist } else { -dist };
            (signed + 0.5).clamp(0.0, 1.0)
        });
    }

    pub fn draw_polyline(&mut self, pts: &[Point2], width: f64, c: Rgb) {
        for w in pts.windows(2) {
            self.draw_segment(w[0], w[1], width, c);
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageIoError> {
        image::save_buffer(path, &self.pixels, self.width as u32, self.height as u32, image::ExtendedColorType::Rgb8)
            .map_err(|e| ImageIoError(e.to_string()))
    }

    pub fn load_png(path: &Path) -> Result<Self, ImageIoError> {
        let img = image::open(path).map_err(|e| ImageIoError(e.to_string()))?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w as usize, height: h as usize, pixels: img.into_raw() })
    }

    /// Mean over all channels and pixels.
    pub fn mean_intensity(&self) -> f64 {
        self.pixels.iter().map(|&v| v as f64).sum::<f64>() / self.pixels.len().max(1) as f64
    }
}
