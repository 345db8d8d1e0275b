//! Chart-region quadrilateral recovery from a binary mask.
//!
//! Contours are traced with Suzuki–Abe border following, the largest one is
//! simplified with Douglas–Peucker at a tolerance of 0.5% of its convex hull
//! perimeter, and the four dominant edges of the simplified outline are
//! intersected. Corners therefore come from line intersections rather than
//! from contour vertices, so a clipped or rounded mask corner still yields
//! the true extrapolated corner. The four sides are then refit to sub-pixel
//! accuracy against the contour pixels that support them.
//!
//! Polygon orientation is counterclockwise as seen on screen (y down), which
//! is a negative signed area in raw image coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cross, Point2};

/// Douglas–Peucker tolerance as a fraction of the hull perimeter.
pub const DP_PERIMETER_FRACTION: f64 = 0.005;
/// Edges closer in direction than this are candidates for merging.
pub const CLOSE_ANGLE_DEG: f64 = 20.0;
/// Proximity threshold as a fraction of the smaller image dimension.
pub const CLOSE_DISTANCE_DIVISOR: f64 = 28.0;
/// Intersections may fall this far outside the frame (fraction of each dimension).
pub const BOUNDS_MARGIN: f64 = 0.05;
/// Supporting lines closer to parallel than this never produce a corner.
pub const PARALLEL_ANGLE_DEG: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuadError {
    #[error("no contours to choose from")]
    EmptyInput,
    #[error("polygon is degenerate (all vertices collinear)")]
    DegenerateInput,
    #[error("fewer than four separable edges")]
    InsufficientEdges,
    #[error("expected 4 corner intersections inside the image, found {0}")]
    BadIntersections(usize),
    #[error("mask image: {0}")]
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MaskRle", into = "MaskRle")]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

/// Row-major run-length encoding; `counts` alternate background/foreground
/// runs, starting with a (possibly empty) background run.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaskRle {
    width: usize,
    height: usize,
    counts: Vec<usize>,
}

impl From<BinaryMask> for MaskRle {
    fn from(m: BinaryMask) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0;
        for &b in &m.bits {
            if b == current {
                run += 1;
            } else {
                counts.push(run);
                current = b;
                run = 1;
            }
        }
        counts.push(run);
        MaskRle { width: m.width, height: m.height, counts }
    }
}

impl TryFrom<MaskRle> for BinaryMask {
    type Error = String;

    fn try_from(r: MaskRle) -> Result<Self, Self::Error> {
        let total: usize = r.counts.iter().sum();
        if total != r.width * r.height {
            return Err(format!("run lengths sum to {total}, expected {}", r.width * r.height));
        }
        let mut bits = Vec::with_capacity(total);
        for (i, &c) in r.counts.iter().enumerate() {
            bits.extend(std::iter::repeat_n(i % 2 == 1, c));
        }
        Ok(BinaryMask { width: r.width, height: r.height, bits })
    }
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Fills an inclusive pixel rectangle.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize) {
        for y in y0..=y1.min(self.height - 1) {
            for x in x0..=x1.min(self.width - 1) {
                self.set(x, y, true);
            }
        }
    }

    /// Rasterizes a simple polygon: a pixel is set when its center lies
    /// inside (even–odd rule, half-open in y).
    pub fn from_polygon(width: usize, height: usize, vertices: &[Point2]) -> Self {
        let mut mask = BinaryMask::new(width, height);
        let n = vertices.len();
        if n < 3 {
            return mask;
        }
        let mut xs = Vec::new();
        for row in 0..height {
            let y = row as f64;
            xs.clear();
            for i in 0..n {
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                if (a.y <= y && y < b.y) || (b.y <= y && y < a.y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(f64::total_cmp);
            for span in xs.chunks_exact(2) {
                let lo = span[0].ceil().max(0.0);
                let hi = span[1].floor().min(width as f64 - 1.0);
                if lo > hi {
                    continue;
                }
                for col in lo as usize..=hi as usize {
                    mask.set(col, row, true);
                }
            }
        }
        mask
    }

    pub fn load_png(path: &Path) -> Result<Self, QuadError> {
        let img = image::open(path).map_err(|e| QuadError::Image(e.to_string()))?.to_luma8();
        let (w, h) = img.dimensions();
        let bits = img.pixels().map(|p| p.0[0] > 127).collect();
        Ok(BinaryMask { width: w as usize, height: h as usize, bits })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), QuadError> {
        let buf: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::save_buffer(path, &buf, self.width as u32, self.height as u32, image::ExtendedColorType::L8)
            .map_err(|e| QuadError::Image(e.to_string()))
    }
}

/// Closed polygon; the closing edge from last to first vertex is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Self {
        Self { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace signed area in raw image coordinates.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let s: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum();
        0.5 * s
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n).map(|i| self.vertices[i].distance(self.vertices[(i + 1) % n])).sum()
    }

    pub fn edges(&self) -> Vec<Edge> {
        let n = self.vertices.len();
        (0..n).filter_map(|i| Edge::new(self.vertices[i], self.vertices[(i + 1) % n])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: Point2,
    pub b: Point2,
    pub length: f64,
}

impl Edge {
    /// `None` for zero-length segments.
    pub fn new(a: Point2, b: Point2) -> Option<Self> {
        let length = a.distance(b);
        (length > 0.0).then_some(Edge { a, b, length })
    }

    pub fn midpoint(&self) -> Point2 {
        self.a.midpoint(self.b)
    }

    /// Acute angle between the supporting lines, in degrees.
    pub fn angle_to(&self, other: &Edge) -> f64 {
        let (ux, uy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let (vx, vy) = (other.b.x - other.a.x, other.b.y - other.a.y);
        let c = ((ux * vx + uy * vy).abs() / (self.length * other.length)).min(1.0);
        c.acos().to_degrees()
    }

    /// Intersection of the two supporting lines.
    pub fn line_intersection(&self, other: &Edge) -> Option<Point2> {
        let (ux, uy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let (vx, vy) = (other.b.x - other.a.x, other.b.y - other.a.y);
        let den = ux * vy - uy * vx;
        if den == 0.0 {
            return None;
        }
        let t = ((other.a.x - self.a.x) * vy - (other.a.y - self.a.y) * vx) / den;
        Some(Point2::new(self.a.x + t * ux, self.a.y + t * uy))
    }
}

pub(crate) fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * dx, a.y + t * dy))
}

// Neighbor offsets (dx, dy) in clockwise order on screen, starting east.
const NEIGHBORS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn neighbor_index(dx: isize, dy: isize) -> usize {
    NEIGHBORS.iter().position(|&d| d == (dx, dy)).expect("unit offset")
}

/// Outer borders of all 8-connected foreground components.
///
/// Suzuki–Abe border following over a zero-padded label image; hole borders
/// are followed (to keep the labeling consistent) but not reported. Each
/// returned contour lists boundary pixel centers counterclockwise on screen,
/// starting at the component's first pixel in raster order.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Polygon> {
    let (w, h) = (mask.width as isize + 2, mask.height as isize + 2);
    let mut f = vec![0i32; (w * h) as usize];
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                f[(y as isize + 1) as usize * w as usize + x + 1] = 1;
            }
        }
    }
    let at = |x: isize, y: isize| (y * w + x) as usize;
    let mut nbd = 1;
    let mut out = Vec::new();

    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = f[at(x, y)];
            let (outer, from) = if v == 1 && f[at(x - 1, y)] == 0 {
                (true, (x - 1, y))
            } else if v >= 1 && f[at(x + 1, y)] == 0 {
                (false, (x + 1, y))
            } else {
                continue;
            };
            nbd += 1;
            let mut points = vec![(x, y)];

            // 3.1: clockwise search from `from` for any nonzero neighbor.
            let start_dir = neighbor_index(from.0 - x, from.1 - y);
            let first =
                (0..8).map(|k| NEIGHBORS[(start_dir + k) % 8]).map(|(dx, dy)| (x + dx, y + dy)).find(|&(px, py)| f[at(px, py)] != 0);
            let Some(p1) = first else {
                f[at(x, y)] = -nbd;
                if outer {
                    out.push(points);
                }
                continue;
            };

            let (mut p2, mut p3) = (p1, (x, y));
            loop {
                // 3.3: counterclockwise search around p3 starting after p2.
                let d2 = neighbor_index(p2.0 - p3.0, p2.1 - p3.1);
                let mut east_zero_examined = false;
                let mut p4 = p3;
                for k in 1..=8 {
                    let dir = (d2 + 8 - k) % 8;
                    let (dx, dy) = NEIGHBORS[dir];
                    let q = (p3.0 + dx, p3.1 + dy);
                    if f[at(q.0, q.1)] != 0 {
                        p4 = q;
                        break;
                    }
                    if dir == 0 {
                        east_zero_examined = true;
                    }
                }
                // 3.4
                let idx = at(p3.0, p3.1);
                if east_zero_examined {
                    f[idx] = -nbd;
                } else if f[idx] == 1 {
                    f[idx] = nbd;
                }
                // 3.5
                if p4 == (x, y) && p3 == p1 {
                    break;
                }
                p2 = p3;
                p3 = p4;
                points.push(p3);
            }
            if outer {
                out.push(points);
            }
        }
    }

    out.into_iter()
        .map(|pts| {
            let mut vertices: Vec<Point2> = pts.into_iter().map(|(x, y)| Point2::new((x - 1) as f64, (y - 1) as f64)).collect();
            vertices.dedup();
            Polygon::new(vertices)
        })
        .collect()
}

/// Contour with the largest absolute shoelace area; first one wins ties.
pub fn largest_contour_by_area(contours: &[Polygon]) -> Result<&Polygon, QuadError> {
    let mut best: Option<(&Polygon, f64)> = None;
    for c in contours {
        let a = c.area();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((c, a));
        }
    }
    best.map(|(c, _)| c).ok_or(QuadError::EmptyInput)
}

/// Convex hull (Andrew's monotone chain) without collinear vertices,
/// counterclockwise on screen.
pub fn convex_hull(polygon: &Polygon) -> Result<Polygon, QuadError> {
    let mut pts = polygon.vertices.clone();
    if pts.len() < 3 {
        return Err(QuadError::DegenerateInput);
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(QuadError::DegenerateInput);
    }
    // Monotone chain yields positive raw area; flip to screen-counterclockwise.
    lower.reverse();
    Ok(Polygon::new(lower))
}

/// Closed-polygon Douglas–Peucker. The two anchors are the vertex farthest
/// from vertex 0 and the vertex farthest from that one, so the result does
/// not depend on where the contour happens to start. Each chain between the
/// anchors is simplified recursively and a vertex is kept when its distance
/// to the current chord exceeds `epsilon`. The result is always a subset of
/// the input vertices, in input order.
pub fn douglas_peucker(polygon: &Polygon, epsilon: f64) -> Polygon {
    let mut v = polygon.vertices.clone();
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
    if epsilon <= 0.0 || v.len() < 3 {
        return Polygon::new(v);
    }
    let n = v.len();
    let farthest = |from: usize| (0..n).max_by(|&i, &j| v[from].distance(v[i]).total_cmp(&v[from].distance(v[j]))).unwrap_or(from);
    let a0 = farthest(0);
    let a1 = farthest(a0);
    let (first, far) = (a0.min(a1), a0.max(a1));
    if first == far {
        return Polygon::new(vec![v[first]]);
    }
    let mut keep = vec![false; n];
    keep[first] = true;
    keep[far] = true;

    // Chains as index ranges into the doubled sequence so the wrap is contiguous.
    let idx = |k: usize| k % n;
    let mut stack = vec![(first, far), (far, n + first)];
    while let Some((s, e)) = stack.pop() {
        if e <= s + 1 {
            continue;
        }
        let (a, b) = (v[idx(s)], v[idx(e)]);
        let (mut dmax, mut kmax) = (-1.0, s);
        for k in s + 1..e {
            let d = point_segment_distance(v[idx(k)], a, b);
            if d > dmax {
                dmax = d;
                kmax = k;
            }
        }
        if dmax > epsilon {
            keep[idx(kmax)] = true;
            stack.push((s, kmax));
            stack.push((kmax, e));
        }
    }
    Polygon::new(v.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect())
}

/// Whether two edges are near-duplicates of the same side: similar direction
/// and one edge's endpoints or midpoint lying close to the other segment.
pub fn edges_too_close(e1: &Edge, e2: &Edge, dims: (usize, usize)) -> bool {
    if e1.angle_to(e2) >= CLOSE_ANGLE_DEG {
        return false;
    }
    let limit = dims.0.min(dims.1) as f64 / CLOSE_DISTANCE_DIVISOR;
    let probe = |from: &Edge, to: &Edge| {
        [from.a, from.b, from.midpoint()].into_iter().map(|p| point_segment_distance(p, to.a, to.b)).fold(f64::INFINITY, f64::min)
    };
    probe(e1, e2).min(probe(e2, e1)) < limit
}

/// Greedy longest-first selection of four mutually separated edges.
pub fn select_four_edges(polygon: &Polygon, dims: (usize, usize)) -> Result<[Edge; 4], QuadError> {
    let mut remaining = polygon.edges();
    // Stable sort keeps polygon order among equal lengths.
    remaining.sort_by(|a, b| b.length.total_cmp(&a.length));
    let mut chosen = Vec::with_capacity(4);
    while chosen.len() < 4 {
        if remaining.is_empty() {
            return Err(QuadError::InsufficientEdges);
        }
        let e = remaining.remove(0);
        remaining.retain(|o| !edges_too_close(&e, o, dims));
        chosen.push(e);
    }
    Ok([chosen[0], chosen[1], chosen[2], chosen[3]])
}

/// Orders four points counterclockwise on screen around their centroid,
/// starting from the one with the smallest `x + y`.
pub fn order_corners(points: &[Point2; 4]) -> [Point2; 4] {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut v = points.to_vec();
    v.sort_by(|a, b| {
        let ta = (-(a.y - cy)).atan2(a.x - cx);
        let tb = (-(b.y - cy)).atan2(b.x - cx);
        ta.total_cmp(&tb)
    });
    let start = (0..4).min_by(|&i, &j| (v[i].x + v[i].y).total_cmp(&(v[j].x + v[j].y))).unwrap_or(0);
    v.rotate_left(start);
    [v[0], v[1], v[2], v[3]]
}

/// Full mask → ordered corners procedure (TL, BL, BR, TR).
pub fn mask_to_quad(mask: &BinaryMask, dims: (usize, usize)) -> Result<[Point2; 4], QuadError> {
    let contours = trace_contours(mask);
    let contour = largest_contour_by_area(&contours)?;
    let hull = convex_hull(contour)?;
    let epsilon = DP_PERIMETER_FRACTION * hull.perimeter();
    let approx = douglas_peucker(contour, epsilon);
    let edges = select_four_edges(&approx, dims)?;

    let (w, h) = (dims.0 as f64, dims.1 as f64);
    let (mx, my) = (BOUNDS_MARGIN * w, BOUNDS_MARGIN * h);
    let mut corners = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            if edges[i].angle_to(&edges[j]) < PARALLEL_ANGLE_DEG {
                continue;
            }
            if let Some(p) = edges[i].line_intersection(&edges[j]) {
                if p.x >= -mx && p.x <= w - 1.0 + mx && p.y >= -my && p.y <= h - 1.0 + my {
                    corners.push(p);
                }
            }
        }
    }
    if corners.len() != 4 {
        return Err(QuadError::BadIntersections(corners.len()));
    }
    let coarse = order_corners(&[corners[0], corners[1], corners[2], corners[3]]);
    Ok(refine_corners(contour, &coarse).unwrap_or(coarse))
}

/// Least-squares support points per side must number at least this many.
const REFINE_MIN_POINTS: usize = 8;
/// Contour pixels farther than this from a coarse side do not support it.
const REFINE_BAND_PX: f64 = 2.0;
/// Fraction of each side, at either end, left out of the refit.
const REFINE_END_TRIM: f64 = 0.05;

/// Sub-pixel refinement of ordered corners: each side is refit by total
/// least squares to the contour pixels along its middle, then moved outward
/// by the mean inset of pixel centers inside a line with that normal.
/// `None` when a side has too little support or adjacent sides turn parallel.
pub fn refine_corners(contour: &Polygon, corners: &[Point2; 4]) -> Option<[Point2; 4]> {
    let cx = corners.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = corners.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut lines = Vec::with_capacity(4);
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return None;
        }
        let support: Vec<Point2> = contour
            .vertices
            .iter()
            .copied()
            .filter(|p| {
                let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
                (REFINE_END_TRIM..=1.0 - REFINE_END_TRIM).contains(&t) && point_segment_distance(*p, a, b) <= REFINE_BAND_PX
            })
            .collect();
        if support.len() < REFINE_MIN_POINTS {
            return None;
        }
        let m = support.len() as f64;
        let mx = support.iter().map(|p| p.x).sum::<f64>() / m;
        let my = support.iter().map(|p| p.y).sum::<f64>() / m;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for p in &support {
            sxx += (p.x - mx) * (p.x - mx);
            sxy += (p.x - mx) * (p.y - my);
            syy += (p.y - my) * (p.y - my);
        }
        // Principal direction of the scatter.
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let (ux, uy) = (theta.cos(), theta.sin());
        let (mut nx, mut ny) = (-uy, ux);
        if nx * (mx - cx) + ny * (my - cy) < 0.0 {
            nx = -nx;
            ny = -ny;
        }
        let shift = 0.5 * nx.abs().max(ny.abs());
        let origin = Point2::new(mx + shift * nx, my + shift * ny);
        lines.push(Edge::new(origin, Point2::new(origin.x + ux, origin.y + uy))?);
    }
    let mut out = [Point2::new(0.0, 0.0); 4];
    for (i, corner) in out.iter_mut().enumerate() {
        let (prev, next) = (&lines[(i + 3) % 4], &lines[i]);
        if prev.angle_to(next) < PARALLEL_ANGLE_DEG {
            return None;
        }
        *corner = prev.line_intersection(next)?;
    }
    Some(out)
}
