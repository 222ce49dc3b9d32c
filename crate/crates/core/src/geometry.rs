//! Oriented grasp rectangles and the rectangle success metric.
//!
//! A grasp is the 5-D tuple `{x, y, theta, w, h}`: centre, orientation of the
//! gripper opening axis relative to the image x-axis, opening width and plate
//! height. A parallel-plate gripper is symmetric under a half turn, so
//! orientations are kept in `[-pi/2, pi/2)`.
//!
//! Corner convention used everywhere in the crate: edge `c0 -> c1` runs along
//! the width (opening) axis and defines `theta`, edge `c1 -> c2` runs along the
//! height (plate) axis.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on `c0 + c2 == c1 + c3` when reading corner labels.
pub const PARALLELOGRAM_TOLERANCE: f64 = 1.0;
/// Edges shorter than this are treated as collapsed.
pub const MIN_EDGE: f64 = 1e-6;
/// Intersection polygons with a smaller area count as empty.
pub const SLIVER_AREA: f64 = 1e-12;

/// Default orientation tolerance of the rectangle metric (30 degrees).
pub const DEFAULT_ANGLE_TOL: f64 = FRAC_PI_6;
/// Default Jaccard threshold of the rectangle metric.
pub const DEFAULT_JACCARD_MIN: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates about `pivot` by `angle` radians (x towards y).
    pub fn rotate_about(self, pivot: Point, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        let d = self - pivot;
        Point::new(pivot.x + c * d.x - s * d.y, pivot.y + s * d.x + c * d.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Maps any angle onto `[-pi/2, pi/2)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let mut t = theta - PI * ((theta + FRAC_PI_2) / PI).floor();
    if t >= FRAC_PI_2 {
        t -= PI;
    }
    if t < -FRAC_PI_2 {
        t += PI;
    }
    t
}

/// The 5-D grasp rectangle. Construct through [`GraspRect::new`], which
/// enforces positive finite extents and canonicalizes the angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRect {
    x: f64,
    y: f64,
    theta: f64,
    w: f64,
    h: f64,
}

impl GraspRect {
    pub fn new(x: f64, y: f64, theta: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidRect(format!(
                "non-finite pose ({x}, {y}, {theta})"
            )));
        }
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(Error::InvalidRect(format!(
                "extents must be positive, got w={w}, h={h}"
            )));
        }
        Ok(Self {
            x,
            y,
            theta: canonical_angle(theta),
            w,
            h,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_corners(&self) -> CornerRect {
        rect_to_corners(self)
    }

    pub fn to_target(&self) -> TargetVec {
        TargetVec::from(*self)
    }

    /// Whether `p` lies inside the rectangle (boundary included).
    pub fn contains(&self, p: Point) -> bool {
        let (s, c) = self.theta.sin_cos();
        let d = p - self.center();
        let along = d.x * c + d.y * s;
        let across = -d.x * s + d.y * c;
        along.abs() <= self.w / 2.0 && across.abs() <= self.h / 2.0
    }

    fn total_cmp(&self, other: &GraspRect) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.theta.total_cmp(&other.theta))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
    }
}

/// Four ordered corners of a (labelled) grasp rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerRect {
    pub corners: [Point; 4],
}

impl CornerRect {
    pub fn new(corners: [Point; 4]) -> Self {
        Self { corners }
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> CornerRect {
        CornerRect::new(self.corners.map(f))
    }
}

/// Raw 6-D network target: the angle is carried as a (sin, cos) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetVec {
    pub x: f64,
    pub y: f64,
    pub sin_theta: f64,
    pub cos_theta: f64,
    pub w: f64,
    pub h: f64,
}

impl From<GraspRect> for TargetVec {
    fn from(r: GraspRect) -> Self {
        let (s, c) = r.theta.sin_cos();
        Self {
            x: r.x,
            y: r.y,
            sin_theta: s,
            cos_theta: c,
            w: r.w,
            h: r.h,
        }
    }
}

impl TargetVec {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.x,
            self.y,
            self.sin_theta,
            self.cos_theta,
            self.w,
            self.h,
        ]
    }
}

pub fn rect_to_corners(r: &GraspRect) -> CornerRect {
    let (s, c) = r.theta.sin_cos();
    let center = r.center();
    let half_w = Point::new(c, s) * (r.w / 2.0);
    let half_h = Point::new(-s, c) * (r.h / 2.0);
    CornerRect::new([
        center - half_w - half_h,
        center + half_w - half_h,
        center + half_w + half_h,
        center - half_w + half_h,
    ])
}

pub fn corners_to_rect(c: &CornerRect) -> Result<GraspRect> {
    let [c0, c1, c2, c3] = c.corners;
    if !c.corners.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFiniteCorner);
    }
    let gap = ((c0 + c2) - (c1 + c3)).norm();
    if gap > PARALLELOGRAM_TOLERANCE {
        return Err(Error::NotAParallelogram { gap });
    }
    let width_edge = c1 - c0;
    let w = width_edge.norm();
    let h = (c2 - c1).norm();
    if w < MIN_EDGE || h < MIN_EDGE {
        return Err(Error::DegenerateRect {
            width: w,
            height: h,
        });
    }
    let center = (c0 + c1 + c2 + c3) * 0.25;
    GraspRect::new(
        center.x,
        center.y,
        width_edge.y.atan2(width_edge.x),
        w,
        h,
    )
}

/// Shoelace signed area; positive for counter-clockwise in x-right/y-up axes.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let n = poly.len();
    let twice: f64 = (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum();
    twice / 2.0
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

fn oriented_ccw(corners: [Point; 4]) -> [Point; 4] {
    if signed_area(&corners) < 0.0 {
        [corners[3], corners[2], corners[1], corners[0]]
    } else {
        corners
    }
}

/// Clips `subject` against the left half-plane of the directed edge `a -> b`.
fn clip_half_plane(subject: &[Point], a: Point, b: Point) -> Vec<Point> {
    let edge = b - a;
    let side = |p: Point| edge.cross(p - a);
    let n = subject.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = subject[i];
        let next = subject[(i + 1) % n];
        let sc = side(cur);
        let sn = side(next);
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc >= 0.0) != (sn >= 0.0) {
            let t = sc / (sc - sn);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

/// Sutherland-Hodgman clip of convex `subject` by convex `clip` (both CCW).
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut poly = subject.to_vec();
    for i in 0..clip.len() {
        if poly.len() < 3 {
            return Vec::new();
        }
        poly = clip_half_plane(&poly, clip[i], clip[(i + 1) % clip.len()]);
    }
    if poly.len() < 3 {
        Vec::new()
    } else {
        poly
    }
}

/// Intersection region of two grasp rectangles as a CCW polygon (empty if
/// the overlap is a sliver). Argument order does not affect the result.
pub fn intersection_polygon(a: &GraspRect, b: &GraspRect) -> Vec<Point> {
    let (first, second) = if a.total_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let subject = oriented_ccw(first.to_corners().corners);
    let clip = oriented_ccw(second.to_corners().corners);
    let poly = clip_convex(&subject, &clip);
    if polygon_area(&poly) < SLIVER_AREA {
        Vec::new()
    } else {
        poly
    }
}

/// Intersection over union of two rotated rectangles.
pub fn jaccard(a: &GraspRect, b: &GraspRect) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = polygon_area(&intersection_polygon(a, b));
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Smallest orientation difference modulo pi, in `[0, pi/2]`.
pub fn angle_diff(a: &GraspRect, b: &GraspRect) -> f64 {
    // both angles are canonical, so |a - b| < pi already
    let d = (a.theta - b.theta).abs();
    d.min(PI - d)
}

/// Thresholds of the rectangle metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessCriteria {
    /// Strict upper bound on [`angle_diff`], radians.
    pub angle_tol: f64,
    /// Strict lower bound on [`jaccard`].
    pub jaccard_min: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self {
            angle_tol: DEFAULT_ANGLE_TOL,
            jaccard_min: DEFAULT_JACCARD_MIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
    /// Truth with the highest Jaccard among those meeting both conditions.
    pub best_index: Option<usize>,
    pub best_jaccard: f64,
    /// Angle difference to `best_index`, or to the highest-Jaccard truth on failure.
    pub angle_diff: f64,
}

/// Rectangle metric against every ground truth of an image.
pub fn is_success(
    pred: &GraspRect,
    truths: &[GraspRect],
    criteria: SuccessCriteria,
) -> Result<Verdict> {
    if truths.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    let mut fallback = (0.0f64, f64::INFINITY);
    for (i, truth) in truths.iter().enumerate() {
        let j = jaccard(pred, truth);
        let ad = angle_diff(pred, truth);
        if j > fallback.0 || (j == fallback.0 && ad < fallback.1) {
            fallback = (j, ad);
        }
        if ad < criteria.angle_tol
            && j > criteria.jaccard_min
            && best.is_none_or(|(_, bj, _)| j > bj)
        {
            best = Some((i, j, ad));
        }
    }
    Ok(match best {
        Some((i, j, ad)) => Verdict {
            success: true,
            best_index: Some(i),
            best_jaccard: j,
            angle_diff: ad,
        },
        None => Verdict {
            success: false,
            best_index: None,
            best_jaccard: fallback.0,
            angle_diff: fallback.1,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn rect(x: f64, y: f64, t: f64, w: f64, h: f64) -> GraspRect {
        GraspRect::new(x, y, t, w, h).unwrap()
    }

    fn assert_point(p: Point, x: f64, y: f64) {
        assert!(
            (p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12,
            "{p:?} != ({x}, {y})"
        );
    }

    #[test]
    fn canonical_angle_range() {
        assert_eq!(canonical_angle(0.0), 0.0);
        assert!((canonical_angle(FRAC_PI_2) + FRAC_PI_2).abs() < 1e-15);
        assert!((canonical_angle(PI - 0.1) + 0.1).abs() < 1e-12);
        for k in -20..20 {
            let t = canonical_angle(k as f64 * 0.37);
            assert!((-FRAC_PI_2..FRAC_PI_2).contains(&t));
        }
    }

    #[test]
    fn rejects_non_positive_extents() {
        assert!(GraspRect::new(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(GraspRect::new(0.0, 0.0, 0.0, 1.0, -1.0).is_err());
        assert!(GraspRect::new(f64::NAN, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn corners_axis_aligned() {
        let c = rect_to_corners(&rect(0.0, 0.0, 0.0, 2.0, 2.0)).corners;
        assert_point(c[0], -1.0, -1.0);
        assert_point(c[1], 1.0, -1.0);
        assert_point(c[2], 1.0, 1.0);
        assert_point(c[3], -1.0, 1.0);
    }

    #[test]
    fn corners_quarter_turn_swaps_extents() {
        let r = rect(112.0, 112.0, FRAC_PI_2 - PI, 2.0, 4.0);
        assert!((r.theta() + FRAC_PI_2).abs() < 1e-15);
        let c = rect_to_corners(&r).corners;
        let xs: Vec<f64> = c.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = c.iter().map(|p| p.y).collect();
        let span = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        };
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        assert!((x0 - 110.0).abs() < 1e-12 && (x1 - 114.0).abs() < 1e-12);
        assert!((y0 - 111.0).abs() < 1e-12 && (y1 - 113.0).abs() < 1e-12);
    }

    #[test]
    fn corners_diagonal() {
        let c = rect_to_corners(&rect(10.0, 20.0, FRAC_PI_4, 2.0 * SQRT_2, 2.0 * SQRT_2)).corners;
        assert_point(c[0], 10.0, 18.0);
        assert_point(c[1], 12.0, 20.0);
        assert_point(c[2], 10.0, 22.0);
        assert_point(c[3], 8.0, 20.0);
    }

    #[test]
    fn corners_back_to_rect() {
        let c = CornerRect::new([
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(1.0, 1.0),
            Point::new(-1.0, 1.0),
        ]);
        let r = corners_to_rect(&c).unwrap();
        assert_eq!(r, rect(0.0, 0.0, 0.0, 2.0, 2.0));
    }

    #[test]
    fn corners_errors() {
        let bowtie = CornerRect::new([
            Point::new(-1.0, -1.0),
            Point::new(1.0, -1.0),
            Point::new(-1.0, 1.0),
            Point::new(1.0, 1.0),
        ]);
        assert!(matches!(
            corners_to_rect(&bowtie),
            Err(Error::NotAParallelogram { .. })
        ));
        let flat = CornerRect::new([Point::new(3.0, 3.0); 4]);
        assert!(matches!(
            corners_to_rect(&flat),
            Err(Error::DegenerateRect { .. })
        ));
        let mut nan = rect_to_corners(&rect(5.0, 5.0, 0.2, 3.0, 2.0));
        nan.corners[2].x = f64::NAN;
        assert!(matches!(corners_to_rect(&nan), Err(Error::NonFiniteCorner)));
    }

    #[test]
    fn jaccard_examples() {
        let a = rect(0.0, 0.0, 0.0, 2.0, 2.0);
        let b = rect(1.0, 0.0, 0.0, 2.0, 2.0);
        assert!((jaccard(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard(&a, &a), 1.0);
        let far = rect(1000.0, 0.0, 0.3, 10.0, 10.0);
        assert_eq!(jaccard(&a, &far), 0.0);
        // touching edges only
        let touching = rect(2.0, 0.0, 0.0, 2.0, 2.0);
        assert_eq!(jaccard(&a, &touching), 0.0);
    }

    #[test]
    fn jaccard_nested() {
        let outer = rect(5.0, 5.0, 0.4, 10.0, 8.0);
        let inner = rect(5.0, 5.0, 0.4, 5.0, 4.0);
        assert!((jaccard(&outer, &inner) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn angle_diff_examples() {
        let a = rect(0.0, 0.0, 0.0, 1.0, 1.0);
        assert_eq!(angle_diff(&a, &a), 0.0);
        let b = rect(0.0, 0.0, PI - 0.1, 1.0, 1.0);
        assert!((angle_diff(&a, &b) - 0.1).abs() < 1e-12);
        let c = rect(0.0, 0.0, FRAC_PI_4, 1.0, 1.0);
        let d = rect(0.0, 0.0, -FRAC_PI_4, 1.0, 1.0);
        assert!((angle_diff(&c, &d) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn success_examples() {
        let crit = SuccessCriteria::default();
        let truths = [rect(50.0, 50.0, 0.1, 30.0, 10.0), rect(80.0, 40.0, -0.7, 20.0, 12.0)];
        let v = is_success(&truths[1], &truths, crit).unwrap();
        assert!(v.success);
        assert_eq!(v.best_index, Some(1));

        let far = rect(200.0, 200.0, 0.1, 5.0, 5.0);
        assert!(!is_success(&far, &truths, crit).unwrap().success);

        let turned = rect(50.0, 50.0, 0.1 + FRAC_PI_4, 30.0, 10.0);
        let v = is_success(&turned, &truths[..1], crit).unwrap();
        assert!(!v.success);

        assert!(matches!(
            is_success(&far, &[], crit),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn success_prefers_highest_jaccard() {
        let pred = rect(50.0, 50.0, 0.0, 20.0, 10.0);
        let truths = [
            rect(53.0, 50.0, 0.0, 20.0, 10.0),
            rect(51.0, 50.0, 0.0, 20.0, 10.0),
            rect(50.0, 50.0, 1.2, 20.0, 10.0),
        ];
        let v = is_success(&pred, &truths, SuccessCriteria::default()).unwrap();
        assert_eq!(v.best_index, Some(1));
    }

    #[test]
    fn angle_bound_is_strict() {
        let truth = rect(50.0, 50.0, 0.0, 20.0, 10.0);
        let pred = rect(50.0, 50.0, 0.3, 20.0, 10.0);
        let at_bound = SuccessCriteria {
            angle_tol: angle_diff(&pred, &truth),
            jaccard_min: 0.0,
        };
        assert!(!is_success(&pred, &[truth], at_bound).unwrap().success);
    }
}
