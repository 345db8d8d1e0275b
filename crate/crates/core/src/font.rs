//! Minimal stroke font for tick labels.
//!
//! Glyphs are polylines on a 4×6 unit cell (y down, baseline at 6). Only the
//! characters the label formatter can produce are covered.

use crate::geometry::{PixelBox, Point2};
use crate::raster::{RasterImage, Rgb};

/// Characters that can appear in generated tick labels.
pub const ALPHABET: &str = "0123456789.-%k,";

const ADVANCE: f64 = 6.0;

type Stroke = &'static [(f64, f64)];

fn glyph(c: char) -> Option<&'static [Stroke]> {
    let g: &'static [Stroke] = match c {
        '0' => &[&[(0.0, 0.0), (4.0, 0.0), (4.0, 6.0), (0.0, 6.0), (0.0, 0.0)], &[(0.0, 6.0), (4.0, 0.0)]],
        '1' => &[&[(1.0, 1.0), (2.0, 0.0), (2.0, 6.0)], &[(1.0, 6.0), (3.0, 6.0)]],
        '2' => &[&[(0.0, 1.0), (1.0, 0.0), (3.0, 0.0), (4.0, 1.0), (4.0, 2.0), (0.0, 6.0), (4.0, 6.0)]],
        '3' => &[&[(0.0, 0.0), (4.0, 0.0), (4.0, 6.0), (0.0, 6.0)], &[(1.0, 3.0), (4.0, 3.0)]],
        '4' => &[&[(3.0, 6.0), (3.0, 0.0), (0.0, 4.0), (4.0, 4.0)]],
        '5' => &[&[(4.0, 0.0), (0.0, 0.0), (0.0, 3.0), (4.0, 3.0), (4.0, 6.0), (0.0, 6.0)]],
        '6' => &[&[(4.0, 0.0), (0.0, 0.0), (0.0, 6.0), (4.0, 6.0), (4.0, 3.0), (0.0, 3.0)]],
        '7' => &[&[(0.0, 0.0), (4.0, 0.0), (1.5, 6.0)]],
        '8' => &[&[(0.0, 0.0), (4.0, 0.0), (4.0, 6.0), (0.0, 6.0), (0.0, 0.0)], &[(0.0, 3.0), (4.0, 3.0)]],
        '9' => &[&[(4.0, 3.0), (0.0, 3.0), (0.0, 0.0), (4.0, 0.0), (4.0, 6.0), (0.0, 6.0)]],
        '.' => &[&[(2.0, 5.6), (2.0, 6.0)]],
        '-' => &[&[(0.5, 3.0), (3.5, 3.0)]],
        '%' => &[
            &[(0.0, 6.0), (4.0, 0.0)],
            &[(0.0, 0.0), (1.2, 0.0), (1.2, 1.2), (0.0, 1.2), (0.0, 0.0)],
            &[(2.8, 4.8), (4.0, 4.8), (4.0, 6.0), (2.8, 6.0), (2.8, 4.8)],
        ],
        'k' => &[&[(0.0, 0.0), (0.0, 6.0)], &[(4.0, 2.0), (0.0, 4.5)], &[(1.5, 3.6), (4.0, 6.0)]],
        ',' => &[&[(2.0, 5.2), (1.4, 7.0)]],
        _ => return None,
    };
    Some(g)
}

/// Text laid out as pixel-space strokes.
#[derive(Debug, Clone)]
pub struct TextLayout {
    pub strokes: Vec<Vec<Point2>>,
    pub stroke_width: f64,
    /// Geometric extent of the strokes including half the stroke width.
    pub bbox: PixelBox,
}

impl TextLayout {
    pub fn translated(&self, dx: f64, dy: f64) -> TextLayout {
        TextLayout {
            strokes: self.strokes.iter().map(|s| s.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect()).collect(),
            stroke_width: self.stroke_width,
            bbox: self.bbox.translated(dx, dy),
        }
    }

    pub fn draw(&self, img: &mut RasterImage, color: Rgb) {
        for s in &self.strokes {
            img.draw_polyline(s, self.stroke_width, color);
        }
    }
}

/// Lays out `text` with the cell origin at `(0,0)` and `scale` pixels per
/// font unit. Unknown characters are skipped.
pub fn layout(text: &str, scale: f64, stroke_width: f64) -> TextLayout {
    let mut strokes = Vec::new();
    let mut pen = 0.0;
    for c in text.chars() {
        if let Some(g) = glyph(c) {
            for s in g {
                strokes.push(s.iter().map(|&(x, y)| Point2::new((pen + x) * scale, y * scale)).collect::<Vec<_>>());
            }
        }
        pen += ADVANCE;
    }
    let hw = stroke_width / 2.0;
    let mut bbox = PixelBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in strokes.iter().flatten() {
        bbox.x0 = bbox.x0.min(p.x - hw);
        bbox.y0 = bbox.y0.min(p.y - hw);
        bbox.x1 = bbox.x1.max(p.x + hw);
        bbox.y1 = bbox.y1.max(p.y + hw);
    }
    if strokes.is_empty() {
        bbox = PixelBox::new(0.0, 0.0, 0.0, 0.0);
    }
    TextLayout { strokes, stroke_width, bbox }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_is_covered() {
        assert!(ALPHABET.chars().all(|c| glyph(c).is_some()));
    }

    #[test]
    fn bbox_spans_strokes() {
        let t = layout("10", 2.0, 1.0);
        assert_eq!(t.bbox, PixelBox::new(1.5, -0.5, 20.5, 12.5));
    }
}
