//! Circular area invariant of closed planar polylines.
//!
//! `A_r(p) = |Ω ∩ D_r(p)|` is evaluated at polyline vertices from the contour
//! integral
//!
//! ```text
//! A = (1/2) ∫_{C ∩ D_r(p)} (1 - r²/|x-p|²)(x-p)·ν ds + π r² Γ(p)
//! ```
//!
//! with every edge piece integrated in closed form. The arc construction in
//! [`circular_area_by_angles`] computes the same area from the circle's
//! crossings with the curve and serves as an independent check.

use std::f64::consts::PI;

use thiserror::Error;

use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("a closed curve needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} repeats its predecessor")]
    RepeatedPoint(usize),
    #[error("point {0} is not finite")]
    NonFinitePoint(usize),
    #[error("curve encloses zero area")]
    ZeroArea,
    #[error("query point is not a vertex of the curve")]
    PointNotOnCurve,
    #[error("radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
}

/// Closed polyline with an implicit edge from the last point to the first.
/// The domain lies to the left of the traversal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    points: Vec<Vec2>,
}

impl PlanarCurve {
    /// Builds a counterclockwise curve; clockwise input is reversed.
    pub fn new(points: Vec<Vec2>) -> Result<Self, CurveError> {
        let mut curve = Self::unchecked(points)?;
        let area = curve.signed_area();
        if area == 0.0 {
            return Err(CurveError::ZeroArea);
        }
        if area < 0.0 {
            curve.points.reverse();
        }
        Ok(curve)
    }

    fn unchecked(points: Vec<Vec2>) -> Result<Self, CurveError> {
        if points.len() < 3 {
            return Err(CurveError::TooFewPoints(points.len()));
        }
        if let Some(i) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(CurveError::NonFinitePoint(i));
        }
        let n = points.len();
        if let Some(i) = (0..n).find(|&i| points[i] == points[(i + n - 1) % n]) {
            return Err(CurveError::RepeatedPoint(i));
        }
        Ok(PlanarCurve { points })
    }

    /// The same polyline traversed backwards: its domain is the unbounded
    /// complement of this curve's domain.
    pub fn complement(&self) -> PlanarCurve {
        let mut points = self.points.clone();
        points.reverse();
        PlanarCurve { points }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether the domain is the bounded region (counterclockwise traversal).
    pub fn is_bounded(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Edge direction rotated by `-π/2`.
    pub fn outward_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        let d = (b - a).normalize();
        Vec2::new(d.y, -d.x)
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.x * b.y - a.y * b.x
            })
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        (0..self.len()).map(|i| self.edge_length(i)).sum()
    }

    /// Index of the vertex at `q`, within `1e-12` of the curve's extent.
    pub fn vertex_index(&self, q: &Vec2) -> Result<usize, CurveError> {
        let extent = self
            .points
            .iter()
            .fold(0.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()))
            .max(1.0);
        self.points
            .iter()
            .position(|p| (p - q).norm() <= 1e-12 * extent)
            .ok_or(CurveError::PointNotOnCurve)
    }

    /// Applies the rigid motion `x ↦ R(angle) x + shift`.
    pub fn transformed(&self, angle: f64, shift: Vec2) -> PlanarCurve {
        let rot = nalgebra::Rotation2::new(angle);
        PlanarCurve {
            points: self.points.iter().map(|p| rot * p + shift).collect(),
        }
    }

    /// Winding number of the polyline around `x`.
    pub fn winding_number(&self, x: &Vec2) -> i32 {
        let n = self.points.len();
        let mut w = 0;
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            let side = (b.x - a.x) * (x.y - a.y) - (x.x - a.x) * (b.y - a.y);
            if a.y <= x.y {
                if b.y > x.y && side > 0.0 {
                    w += 1;
                }
            } else if b.y <= x.y && side < 0.0 {
                w -= 1;
            }
        }
        w
    }

    /// Whether `x` lies in the curve's domain.
    pub fn contains(&self, x: &Vec2) -> bool {
        let w = self.winding_number(x);
        if self.is_bounded() {
            w != 0
        } else {
            w == 0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularAreaResult {
    pub value: f64,
    /// Interior angle at the vertex over `2π`.
    pub gamma: f64,
    /// The contour-integral part.
    pub kernel_term: f64,
}

fn check_radius(r: f64) -> Result<(), CurveError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(CurveError::NonPositiveRadius(r))
    }
}

/// In-disk parameter range `[lo, hi] ⊂ [0, L]` of edge `(a, b)` for the disk of
/// radius `r` around `p`, with the signed offset `c = (a-p)·ν`, the foot
/// parameter `t0` and the line distance `q = |c|`.
struct EdgePiece {
    c: f64,
    t0: f64,
    q: f64,
    lo: f64,
    hi: f64,
}

const SNAP: f64 = 1e-12;

fn edge_piece(a: &Vec2, b: &Vec2, p: &Vec2, r: f64) -> Option<EdgePiece> {
    let len = (b - a).norm();
    let u = (b - a) / len;
    let nu = Vec2::new(u.y, -u.x);
    let c = (a - p).dot(&nu);
    let t0 = (p - a).dot(&u);
    let q = c.abs();
    if q >= r {
        return None;
    }
    let w = ((r - q) * (r + q)).sqrt();
    let snap = |t: f64| {
        if t.abs() <= SNAP * len {
            0.0
        } else if (t - len).abs() <= SNAP * len {
            len
        } else {
            t
        }
    };
    let lo = snap(t0 - w).max(0.0);
    let hi = snap(t0 + w).min(len);
    (hi > lo).then_some(EdgePiece { c, t0, q, lo, hi })
}

/// Interior angle at vertex `i`, in `[0, 2π)`.
fn interior_angle(curve: &PlanarCurve, i: usize) -> f64 {
    let n = curve.len();
    let p = curve.points[i];
    let prev = curve.points[(i + n - 1) % n] - p;
    let next = curve.points[(i + 1) % n] - p;
    let cross = next.x * prev.y - next.y * prev.x;
    cross.atan2(next.dot(&prev)).rem_euclid(2.0 * PI)
}

/// Circular area invariant at vertex `p` of the curve.
pub fn circular_area_invariant(curve: &PlanarCurve, p: usize, r: f64) -> Result<CircularAreaResult, CurveError> {
    check_radius(r)?;
    if p >= curve.len() {
        return Err(CurveError::PointNotOnCurve);
    }
    let n = curve.len();
    let center = curve.points[p];
    let mut kernel = 0.0;
    for i in 0..n {
        // Incident edges have (x-p)·ν = 0.
        if i == p || (i + 1) % n == p {
            continue;
        }
        let (a, b) = curve.edge(i);
        let Some(piece) = edge_piece(&a, &b, &center, r) else {
            continue;
        };
        if piece.c == 0.0 {
            continue;
        }
        let angle = ((piece.hi - piece.t0) / piece.q).atan() - ((piece.lo - piece.t0) / piece.q).atan();
        kernel += piece.c * (piece.hi - piece.lo) - r * r * piece.c.signum() * angle;
    }
    let kernel_term = 0.5 * kernel;
    let gamma = interior_angle(curve, p) / (2.0 * PI);
    Ok(CircularAreaResult {
        value: kernel_term + PI * r * r * gamma,
        gamma,
        kernel_term,
    })
}

/// Area from the flux of `(x-p)/2` through the in-disk curve pieces plus the
/// circular arcs of `∂D_r(p)` lying in the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleFormulaResult {
    pub value: f64,
    /// Edges touching the circle tangentially; their contact points are ignored.
    pub tangential_skipped: usize,
}

pub fn circular_area_by_angles(curve: &PlanarCurve, p: usize, r: f64) -> Result<AngleFormulaResult, CurveError> {
    check_radius(r)?;
    if p >= curve.len() {
        return Err(CurveError::PointNotOnCurve);
    }
    let center = curve.points[p];
    let mut flux = 0.0;
    let mut angles = Vec::new();
    let mut tangential = 0;
    for i in 0..curve.len() {
        let (a, b) = curve.edge(i);
        let len = (b - a).norm();
        let u = (b - a) / len;
        let nu = Vec2::new(u.y, -u.x);
        let c = (a - center).dot(&nu);
        if (c.abs() - r).abs() <= SNAP * r {
            tangential += 1;
            continue;
        }
        let Some(piece) = edge_piece(&a, &b, &center, r) else {
            continue;
        };
        flux += 0.5 * c * (piece.hi - piece.lo);
        let w = ((r - piece.q) * (r + piece.q)).sqrt();
        for t in [piece.t0 - w, piece.t0 + w] {
            if t >= -SNAP * len && t <= len * (1.0 + SNAP) {
                let x = a + u * t - center;
                angles.push(x.y.atan2(x.x).rem_euclid(2.0 * PI));
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    if angles.len() > 1 && (angles[0] + 2.0 * PI - angles[angles.len() - 1]) <= 1e-12 {
        angles.pop();
    }
    let on_circle = |phi: f64| center + Vec2::new(phi.cos(), phi.sin()) * r;
    let arc = if angles.is_empty() {
        if curve.contains(&on_circle(0.0)) {
            2.0 * PI
        } else {
            0.0
        }
    } else {
        let m = angles.len();
        (0..m)
            .map(|j| {
                let start = angles[j];
                let end = if j + 1 < m { angles[j + 1] } else { angles[0] + 2.0 * PI };
                // Off-centre sample, so a tangential contact at the arc
                // midpoint cannot be hit.
                if curve.contains(&on_circle(start + 0.381_966 * (end - start))) {
                    end - start
                } else {
                    0.0
                }
            })
            .sum()
    };
    Ok(AngleFormulaResult {
        value: flux + 0.5 * r * r * arc,
        tangential_skipped: tangential,
    })
}

/// `κ ≈ 3(π r²/2 - A) / r³`.
pub fn curvature_from_area(value: f64, r: f64) -> f64 {
    3.0 * (0.5 * PI * r * r - value) / r.powi(3)
}

/// Invariant at every vertex.
pub fn circular_area_field(curve: &PlanarCurve, r: f64) -> Result<Vec<CircularAreaResult>, CurveError> {
    (0..curve.len()).map(|i| circular_area_invariant(curve, i, r)).collect()
}

/// Average of the vertex invariants weighted by half the adjacent edge lengths.
pub fn global_area_invariant(curve: &PlanarCurve, r: f64) -> Result<f64, CurveError> {
    let values = circular_area_field(curve, r)?;
    let n = curve.len();
    let (mut sum, mut weight) = (0.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        let w = 0.5 * (curve.edge_length((i + n - 1) % n) + curve.edge_length(i));
        sum += w * v.value;
        weight += w;
    }
    Ok(sum / weight)
}
