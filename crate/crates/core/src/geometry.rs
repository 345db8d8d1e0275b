//! Planar projective geometry.
//!
//! A [`Homography`] maps image pixels to other image pixels or to the
//! canonical chart frame, where the axes rectangle occupies the unit square
//! with corners top-left `(0,0)`, bottom-left `(0,1)`, bottom-right `(1,1)`
//! and top-right `(1,0)`. Coordinates follow the image convention: `x` to the
//! right, `y` downward, pixel centers on integer coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical positions of the chart corners, in corner order
/// (top-left, bottom-left, bottom-right, top-right).
pub const CANONICAL_CORNERS: [Point2; 4] =
    [Point2 { x: 0.0, y: 0.0 }, Point2 { x: 0.0, y: 1.0 }, Point2 { x: 1.0, y: 1.0 }, Point2 { x: 1.0, y: 0.0 }];

const COLLINEAR_REL_AREA: f64 = 1e-9;
const AT_INFINITY_W: f64 = 1e-12;
const SINGULAR_DET: f64 = 1e-12;
const UNIT_BOTTOM_RIGHT_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("degenerate corner configuration (three points collinear)")]
    DegenerateCorners,
    #[error("point maps to infinity under the homography")]
    PointAtInfinity,
    #[error("homography matrix is singular")]
    SingularMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

/// Axis-aligned pixel rectangle with real-valued bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn centered(c: Point2, half_w: f64, half_h: f64) -> Self {
        Self::new(c.x - half_w, c.y - half_h, c.x + half_w, c.y + half_h)
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn corners(&self) -> [Point2; 4] {
        [Point2::new(self.x0, self.y0), Point2::new(self.x0, self.y1), Point2::new(self.x1, self.y1), Point2::new(self.x1, self.y0)]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }
}

/// 3×3 projective transform acting on homogeneous `(x, y, 1)` column vectors.
///
/// Always stored normalized: bottom-right entry 1 when it is not vanishingly
/// small, unit Frobenius norm otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Wraps and normalizes a raw matrix. Fails for singular matrices.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::SingularMatrix);
        }
        let h = Homography { m: normalize(m).ok_or(GeometryError::SingularMatrix)? };
        if h.normalized_det().abs() <= SINGULAR_DET {
            return Err(GeometryError::SingularMatrix);
        }
        Ok(h)
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Homography { m: [[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]] }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    /// Determinant over the product of column norms; in `[-1, 1]` and
    /// unaffected by rescaling the image plane.
    fn normalized_det(&self) -> f64 {
        let norm = |c: usize| (0..3).map(|r| self.m[r][c] * self.m[r][c]).sum::<f64>().sqrt();
        det3(&self.m) / (norm(0) * norm(1) * norm(2))
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Homography) -> Result<Homography, GeometryError> {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[r][k] * other.m[k][c]).sum();
            }
        }
        Homography::from_matrix(out)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Homography::IDENTITY
    }
}

fn frobenius(m: &[[f64; 3]; 3]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn normalize(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let f = frobenius(&m);
    if f == 0.0 || !f.is_finite() {
        return None;
    }
    let s = if (m[2][2] / f).abs() > UNIT_BOTTOM_RIGHT_MIN { m[2][2] } else { f };
    let mut out = m;
    out.iter_mut().flatten().for_each(|v| *v /= s);
    Some(out)
}

/// Applies `h` to `p`.
pub fn apply(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    let m = &h.m;
    let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if w.abs() <= AT_INFINITY_W {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok(Point2::new((m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w, (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w))
}

/// Inverse transform via the adjugate.
pub fn invert(h: &Homography) -> Result<Homography, GeometryError> {
    if h.normalized_det().abs() <= SINGULAR_DET {
        return Err(GeometryError::SingularMatrix);
    }
    let m = &h.m;
    let d = det3(m);
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut inv = adj;
    inv.iter_mut().flatten().for_each(|v| *v /= d);
    Homography::from_matrix(inv)
}

/// Twice the signed triangle area.
pub(crate) fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn has_collinear_triple(pts: &[Point2; 4]) -> bool {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let bbox_area = (x1 - x0) * (y1 - y0);
    if !(bbox_area > 0.0) || !bbox_area.is_finite() {
        return true;
    }
    const TRIPLES: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    TRIPLES.iter().any(|t| {
        let area = 0.5 * cross(pts[t[0]], pts[t[1]], pts[t[2]]).abs();
        area < COLLINEAR_REL_AREA * bbox_area
    })
}

/// Similarity transform moving the centroid to the origin and the mean
/// distance to √2, returned as `(scale, cx, cy)`.
fn conditioning(pts: &[Point2; 4]) -> (f64, f64, f64) {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    (std::f64::consts::SQRT_2 / mean, cx, cy)
}

/// Solves the homography taking `src[i]` to `dst[i]` for all four pairs.
///
/// Direct linear transform on conditioned coordinates: with one matrix entry
/// pinned to 1 the four correspondences give an exact 8×8 system. The bottom
/// right entry is pinned first; if that system is singular the entry with the
/// best-conditioned system is used instead.
pub fn solve_from_corners(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography, GeometryError> {
    if src.iter().chain(dst).any(|p| !p.is_finite()) || has_collinear_triple(src) || has_collinear_triple(dst) {
        return Err(GeometryError::DegenerateCorners);
    }
    let (ss, sx, sy) = conditioning(src);
    let (ds, dx, dy) = conditioning(dst);
    let s: Vec<Point2> = src.iter().map(|p| Point2::new((p.x - sx) * ss, (p.y - sy) * ss)).collect();
    let d: Vec<Point2> = dst.iter().map(|p| Point2::new((p.x - dx) * ds, (p.y - dy) * ds)).collect();

    // Rows of the homogeneous system A·h = 0, h = (h00..h22) row-major.
    let mut rows = Vec::with_capacity(8);
    for (p, q) in s.iter().zip(&d) {
        rows.push([p.x, p.y, 1.0, 0.0, 0.0, 0.0, -q.x * p.x, -q.x * p.y, -q.x]);
        rows.push([0.0, 0.0, 0.0, p.x, p.y, 1.0, -q.y * p.x, -q.y * p.y, -q.y]);
    }

    let solve_pinned = |pin: usize| -> Option<([f64; 9], f64)> {
        let mut a = vec![vec![0.0; 8]; 8];
        let mut b = vec![0.0; 8];
        for (r, row) in rows.iter().enumerate() {
            let mut c = 0;
            for (k, v) in row.iter().enumerate() {
                if k == pin {
                    b[r] = -v;
                } else {
                    a[r][c] = *v;
                    c += 1;
                }
            }
        }
        let (x, min_pivot) = crate::linalg::solve_with_pivot(a, b)?;
        let mut h = [0.0; 9];
        let mut c = 0;
        for (k, v) in h.iter_mut().enumerate() {
            if k == pin {
                *v = 1.0;
            } else {
                *v = x[c];
                c += 1;
            }
        }
        Some((h, min_pivot))
    };

    const PIVOT_FLOOR: f64 = 1e-10;
    let h = match solve_pinned(8) {
        Some((h, piv)) if piv > PIVOT_FLOOR => h,
        _ => (0..8).filter_map(solve_pinned).max_by(|a, b| a.1.total_cmp(&b.1)).map(|(h, _)| h).ok_or(GeometryError::DegenerateCorners)?,
    };
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];

    // Undo conditioning: H = Td⁻¹ · Hn · Ts.
    let ts = [[ss, 0.0, -ss * sx], [0.0, ss, -ss * sy], [0.0, 0.0, 1.0]];
    let td_inv = [[1.0 / ds, 0.0, dx], [0.0, 1.0 / ds, dy], [0.0, 0.0, 1.0]];
    let full = mat_mul(&td_inv, &mat_mul(&hn, &ts));
    Homography::from_matrix(full).map_err(|_| GeometryError::DegenerateCorners)
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            out[r][c] = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Homography taking ordered chart corners (TL, BL, BR, TR) to the canonical
/// unit square.
pub fn canonicalize(corners: &[Point2; 4]) -> Result<Homography, GeometryError> {
    solve_from_corners(corners, &CANONICAL_CORNERS)
}
