//! Per-triangle integrals of the invariant kernels.
//!
//! Triangles inside the ball are integrated exactly: the `|x|^{-3}` kernel by
//! the edge-frame formula below and the polynomial moment kernels by vertex
//! stencils. Triangles crossing the ball boundary are split by longest-edge
//! bisection and finished with the centroid rule once short enough.
//!
//! All routines take absolute coordinates plus the query point `p` and work
//! internally in coordinates relative to `p`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::ops::AddAssign;

use thiserror::Error;

use crate::mesh::distance_bounds;
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegralError {
    #[error("query point lies on the closed triangle; the hypersingular integral diverges")]
    PointOnTriangle,
    #[error("triangle reaches distance {r2} from the query point, outside the ball of radius {radius}")]
    TriangleNotInBall { r2: f64, radius: f64 },
    #[error("bisection tolerance must be positive, got {0}")]
    NonPositiveEpsilon(f64),
}

/// Where the foot of the perpendicular from the query point falls relative
/// to the triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionClass {
    Outside,
    /// On the open edge from vertex `i` to vertex `i + 1`.
    OnEdge(usize),
    Inside,
    /// Coincides with vertex `i`.
    AtVertex(usize),
}

/// Edge-frame description of a triangle seen from the query point (the origin).
#[derive(Debug, Clone)]
pub struct TriangleFrame {
    /// Vertices relative to the query point, positively oriented about `normal`.
    pub vertices: [Vec3; 3],
    pub normal: Vec3,
    /// Signed plane offset `x¹·ν`.
    pub eta: f64,
    /// Orthogonal projection of the query point onto the plane.
    pub foot: Vec3,
    /// `[p_i^i, p_i^{i+1}]`: coordinates of the edge endpoints along edge `i`.
    pub along: [[f64; 2]; 3],
    /// Signed distance `q_i` of the edge line from the foot along `ν × e₁`.
    pub offset: [f64; 3],
    pub class: PositionClass,
    /// Per-edge angle terms `γ_i`.
    pub edge_angles: [f64; 3],
    pub area: f64,
}

/// Tolerance, relative to the longest edge, for the foot to count as lying on
/// an edge line.
const ON_LINE_REL: f64 = 1e-12;

impl TriangleFrame {
    /// `tri` in absolute coordinates, `p` the query point.
    pub fn new(tri: &[Vec3; 3], p: &Vec3) -> Self {
        let x = [tri[0] - p, tri[1] - p, tri[2] - p];
        let cr = (x[1] - x[0]).cross(&(x[2] - x[0]));
        let area = 0.5 * cr.norm();
        Self::with_normal(x, cr / (2.0 * area), area)
    }

    fn with_normal(x: [Vec3; 3], normal: Vec3, area: f64) -> Self {
        let eta = x[0].dot(&normal);
        let foot = normal * eta;
        let scale = (x[1] - x[0])
            .norm()
            .max((x[2] - x[1]).norm())
            .max((x[0] - x[2]).norm());
        let tol = ON_LINE_REL * scale;
        let mut along = [[0.0; 2]; 3];
        let mut offset = [0.0; 3];
        for i in 0..3 {
            let (a, b) = (x[i], x[(i + 1) % 3]);
            let e1 = (b - a).normalize();
            let e2 = normal.cross(&e1);
            along[i] = [(a - foot).dot(&e1), (b - foot).dot(&e1)];
            offset[i] = 0.5 * ((a - foot).dot(&e2) + (b - foot).dot(&e2));
        }
        let on_line = offset.map(|q| q.abs() <= tol);
        let n_on = on_line.iter().filter(|&&o| o).count();
        // For a positively oriented triangle the inward side of every edge has q < 0.
        let class = match n_on {
            0 if offset.iter().all(|&q| q < 0.0) => PositionClass::Inside,
            0 => PositionClass::Outside,
            1 => {
                let i = on_line.iter().position(|&o| o).unwrap();
                let others_inside = (0..3).filter(|&j| j != i).all(|j| offset[j] < 0.0);
                if others_inside {
                    PositionClass::OnEdge(i)
                } else {
                    PositionClass::Outside
                }
            }
            _ => {
                // Two edge lines meet only at their shared vertex.
                let i = (0..3)
                    .find(|&i| on_line[i] && on_line[(i + 2) % 3])
                    .unwrap_or(0);
                PositionClass::AtVertex(i)
            }
        };
        let mut edge_angles = [0.0; 3];
        for i in 0..3 {
            if on_line[i] {
                continue;
            }
            let q = offset[i];
            let term = |p: f64, xn: f64| {
                (-2.0 * p * q * eta * xn).atan2(q * q * xn * xn - p * p * eta * eta)
            };
            edge_angles[i] = term(along[i][0], x[i].norm()) - term(along[i][1], x[(i + 1) % 3].norm());
        }
        TriangleFrame {
            vertices: x,
            normal,
            eta,
            foot,
            along,
            offset,
            class,
            edge_angles,
            area,
        }
    }

    /// The position-class angle `θ`: 0 outside, π on an open edge, 2π inside,
    /// the interior angle when the foot sits on a vertex.
    pub fn class_angle(&self) -> f64 {
        match self.class {
            PositionClass::Outside => 0.0,
            PositionClass::OnEdge(_) => PI,
            PositionClass::Inside => 2.0 * PI,
            PositionClass::AtVertex(i) => {
                let v = self.vertices;
                let a = v[(i + 1) % 3] - v[i];
                let b = v[(i + 2) % 3] - v[i];
                a.cross(&b).norm().atan2(a.dot(&b))
            }
        }
    }

    /// `η ∫_T |x|^{-3} dS`, the signed solid angle subtended by the triangle.
    /// Finite (and zero in the limit) as `η → 0` with the foot outside.
    pub fn scaled_hypersingular(&self) -> f64 {
        let sum: f64 = self.edge_angles.iter().sum();
        let sign = if self.eta > 0.0 {
            1.0
        } else if self.eta < 0.0 {
            -1.0
        } else {
            0.0
        };
        0.5 * (sum + 2.0 * sign * self.class_angle())
    }

    /// True when the query point lies on the closed triangle.
    pub fn contains_query_point(&self) -> bool {
        let scale = (self.vertices[1] - self.vertices[0]).norm();
        self.class != PositionClass::Outside && self.eta.abs() <= ON_LINE_REL * scale
    }
}

/// `∫_T |x - p|^{-3} dS` in closed form.
pub fn hypersingular_integral(tri: &[Vec3; 3], p: &Vec3) -> Result<f64, IntegralError> {
    let frame = TriangleFrame::new(tri, p);
    if frame.contains_query_point() {
        return Err(IntegralError::PointOnTriangle);
    }
    if frame.eta == 0.0 {
        // In-plane limit of the edge sum: each γ_i/(2η) → Δ(p/|x|)/q_i.
        return Ok((0..3)
            .filter(|&i| frame.edge_angles[i] == 0.0 && frame.offset[i] != 0.0)
            .map(|i| {
                let [pa, pb] = frame.along[i];
                let na = frame.vertices[i].norm();
                let nb = frame.vertices[(i + 1) % 3].norm();
                (pb / nb - pa / na) / frame.offset[i]
            })
            .sum());
    }
    Ok(frame.scaled_hypersingular() / frame.eta)
}

/// `(1/3) ∫_T (1 - r³/|x-p|³)(x-p)·ν dS` for a triangle inside the closed ball.
pub fn svi_triangle_term(tri: &[Vec3; 3], p: &Vec3, r: f64) -> Result<f64, IntegralError> {
    let r2 = tri.iter().map(|v| (v - p).norm()).fold(0.0, f64::max);
    if r2 > r * (1.0 + 1e-12) {
        return Err(IntegralError::TriangleNotInBall { r2, radius: r });
    }
    Ok(svi_frame_term(&TriangleFrame::new(tri, p), r))
}

fn svi_frame_term(frame: &TriangleFrame, r: f64) -> f64 {
    if frame.contains_query_point() {
        return 0.0;
    }
    (frame.eta * frame.area - r.powi(3) * frame.scaled_hypersingular()) / 3.0
}

/// `∫_T x dS` by the three-point vertex stencil. Coordinates are taken as given.
pub fn linear_moment(tri: &[Vec3; 3]) -> Vec3 {
    let area = triangle_area(tri);
    (tri[0] + tri[1] + tri[2]) * (area / 3.0)
}

/// `∫_T x xᵀ dS`, exact for the affine parametrisation.
pub fn quadratic_moment(tri: &[Vec3; 3]) -> Mat3 {
    let area = triangle_area(tri);
    let s = tri[0] + tri[1] + tri[2];
    // Σ_{p,q} v_p v_qᵀ with the diagonal doubled equals s sᵀ + Σ_p v_p v_pᵀ.
    let diag: Mat3 = tri.iter().map(|v| v * v.transpose()).sum();
    (s * s.transpose() + diag) * (area / 12.0)
}

pub fn triangle_area(tri: &[Vec3; 3]) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
}

/// Which boundary kernel is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `(1/3)(1 - r³/|y|³)(y·ν)`.
    Svi,
    /// `(1/4)(y_i y - r² e_i)·ν`.
    FirstMoment,
    /// `(1/10)(2 y_i y_j y - r²(y_j e_i + y_i e_j))·ν`.
    SecondMoment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Scalar(f64),
    Vector(Vec3),
    Matrix(Mat3),
}

impl KernelValue {
    pub fn zero(kind: KernelKind) -> Self {
        match kind {
            KernelKind::Svi => KernelValue::Scalar(0.0),
            KernelKind::FirstMoment => KernelValue::Vector(Vec3::zeros()),
            KernelKind::SecondMoment => KernelValue::Matrix(Mat3::zeros()),
        }
    }

    pub fn scalar(&self) -> f64 {
        match self {
            KernelValue::Scalar(s) => *s,
            _ => panic!("kernel value is not a scalar"),
        }
    }

    pub fn vector(&self) -> Vec3 {
        match self {
            KernelValue::Vector(v) => *v,
            _ => panic!("kernel value is not a vector"),
        }
    }

    pub fn matrix(&self) -> Mat3 {
        match self {
            KernelValue::Matrix(m) => *m,
            _ => panic!("kernel value is not a matrix"),
        }
    }
}

impl AddAssign for KernelValue {
    fn add_assign(&mut self, rhs: Self) {
        match (self, rhs) {
            (KernelValue::Scalar(a), KernelValue::Scalar(b)) => *a += b,
            (KernelValue::Vector(a), KernelValue::Vector(b)) => *a += b,
            (KernelValue::Matrix(a), KernelValue::Matrix(b)) => *a += b,
            _ => panic!("mismatched kernel kinds"),
        }
    }
}

/// Bisection tolerance for boundary triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionConfig {
    /// Dimensionless error tolerance; the realised error scales as `ε r³`
    /// (volume) or `ε r⁴`, `ε r⁵` (moments) up to a mesh-dependent constant.
    pub epsilon: f64,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig { epsilon: 1.0 }
    }
}

impl BisectionConfig {
    pub fn new(epsilon: f64) -> Result<Self, IntegralError> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(BisectionConfig { epsilon })
        } else {
            Err(IntegralError::NonPositiveEpsilon(epsilon))
        }
    }

    /// Longest admissible side `ℓ` before the centroid rule is applied.
    ///
    /// For the volume kernel this is the root of `ℓ² = ε (r-ℓ)⁴ / r²` below `r`;
    /// taking square roots leaves a quadratic in `ℓ`, written here in a form
    /// without cancellation for small `ε`. The moment kernels use `min(εr, r)`.
    pub fn max_side(&self, kind: KernelKind, r: f64) -> f64 {
        match kind {
            KernelKind::Svi => {
                let s = self.epsilon.sqrt();
                r * 2.0 * s / ((2.0 * s + 1.0) + (4.0 * s + 1.0).sqrt())
            }
            KernelKind::FirstMoment | KernelKind::SecondMoment => (self.epsilon * r).min(r),
        }
    }
}

/// Refinement counters from one call to [`bisect_and_integrate_with_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BisectionStats {
    pub max_depth: usize,
    /// Sub-triangles at which the recursion stopped.
    pub leaves: usize,
    /// Leaves evaluated with the centroid rule.
    pub centroid_leaves: usize,
}

impl BisectionStats {
    pub fn merge(&mut self, other: &BisectionStats) {
        self.max_depth = self.max_depth.max(other.max_depth);
        self.leaves += other.leaves;
        self.centroid_leaves += other.centroid_leaves;
    }
}

fn lex(a: &Vec3, b: &Vec3) -> Ordering {
    a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Integrates `kind` over `tri ∩ B_r(p)` by recursive longest-edge bisection.
pub fn bisect_and_integrate(
    tri: &[Vec3; 3],
    p: &Vec3,
    r: f64,
    kind: KernelKind,
    cfg: &BisectionConfig,
) -> KernelValue {
    bisect_and_integrate_with_stats(tri, p, r, kind, cfg).0
}

pub fn bisect_and_integrate_with_stats(
    tri: &[Vec3; 3],
    p: &Vec3,
    r: f64,
    kind: KernelKind,
    cfg: &BisectionConfig,
) -> (KernelValue, BisectionStats) {
    let x = [tri[0] - p, tri[1] - p, tri[2] - p];
    let cr = (x[1] - x[0]).cross(&(x[2] - x[0]));
    let normal = cr.normalize();
    let bisector = Bisector {
        r,
        kind,
        normal,
        eta: x[0].dot(&normal),
        max_side: cfg.max_side(kind, r),
    };
    let mut acc = KernelValue::zero(kind);
    let mut stats = BisectionStats::default();
    bisector.recurse(x, 0, &mut acc, &mut stats);
    (acc, stats)
}

/// Beyond this depth the side length is below `2^-30` of the original.
const MAX_DEPTH: usize = 60;

struct Bisector {
    r: f64,
    kind: KernelKind,
    normal: Vec3,
    eta: f64,
    max_side: f64,
}

impl Bisector {
    fn recurse(&self, v: [Vec3; 3], depth: usize, acc: &mut KernelValue, stats: &mut BisectionStats) {
        stats.max_depth = stats.max_depth.max(depth);
        let origin = Vec3::zeros();
        let (r1, r2) = distance_bounds(&origin, &v[0], &v[1], &v[2]);
        if r1 > self.r {
            stats.leaves += 1;
            return;
        }
        if r2 <= self.r {
            stats.leaves += 1;
            *acc += self.analytic(v);
            return;
        }
        let sides = [
            (v[1] - v[0]).norm(),
            (v[2] - v[1]).norm(),
            (v[0] - v[2]).norm(),
        ];
        // Equal lengths are common after a few splits. Near-ties are broken
        // by the midpoint's distance to the query point, then by the endpoint
        // coordinates, so the subdivision does not depend on vertex order and
        // survives rigid motions up to round-off.
        let edge = |i: usize| {
            let (a, b) = (v[i], v[(i + 1) % 3]);
            if lex(&a, &b).is_le() { [a, b] } else { [b, a] }
        };
        let near = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs());
        let i = (0..3)
            .max_by(|&x, &y| {
                let (ex, ey) = (edge(x), edge(y));
                let (mx, my) = (((ex[0] + ex[1]) * 0.5).norm(), ((ey[0] + ey[1]) * 0.5).norm());
                if !near(sides[x], sides[y]) {
                    sides[x].total_cmp(&sides[y])
                } else if !near(mx, my) {
                    mx.total_cmp(&my)
                } else {
                    lex(&ex[0], &ey[0]).then(lex(&ex[1], &ey[1]))
                }
            })
            .unwrap();
        let longest = sides[i];
        if longest <= self.max_side || depth >= MAX_DEPTH {
            stats.leaves += 1;
            stats.centroid_leaves += 1;
            let area = triangle_area(&v);
            *acc += self.centroid_rule(&((v[0] + v[1] + v[2]) / 3.0), area);
            return;
        }
        let (a, b, c) = (v[i], v[(i + 1) % 3], v[(i + 2) % 3]);
        let m = (a + b) * 0.5;
        self.recurse([a, m, c], depth + 1, acc, stats);
        self.recurse([m, b, c], depth + 1, acc, stats);
    }

    fn analytic(&self, v: [Vec3; 3]) -> KernelValue {
        let r = self.r;
        match self.kind {
            KernelKind::Svi => {
                let frame = TriangleFrame::with_normal(v, self.normal, triangle_area(&v));
                KernelValue::Scalar(svi_frame_term(&frame, r))
            }
            KernelKind::FirstMoment => KernelValue::Vector(first_moment_exact(&v, &self.normal, self.eta, r)),
            KernelKind::SecondMoment => {
                KernelValue::Matrix(second_moment_exact(&v, &self.normal, self.eta, r))
            }
        }
    }

    fn centroid_rule(&self, y: &Vec3, area: f64) -> KernelValue {
        let r = self.r;
        let d = y.norm();
        let inside = d <= r;
        match self.kind {
            KernelKind::Svi => KernelValue::Scalar(if inside {
                area * (1.0 - (r / d).powi(3)) * self.eta / 3.0
            } else {
                0.0
            }),
            KernelKind::FirstMoment => KernelValue::Vector(if inside {
                (y * self.eta - self.normal * (r * r)) * (area / 4.0)
            } else {
                Vec3::zeros()
            }),
            KernelKind::SecondMoment => KernelValue::Matrix(if inside {
                let yn = self.normal * y.transpose();
                (y * y.transpose() * (2.0 * self.eta) - (yn + yn.transpose()) * (r * r)) * (area / 10.0)
            } else {
                Mat3::zeros()
            }),
        }
    }
}

/// `(1/4) ∫_T (y_i y - r² e_i)·ν dS` for `T` (relative coordinates) inside the ball.
pub(crate) fn first_moment_exact(v: &[Vec3; 3], normal: &Vec3, eta: f64, r: f64) -> Vec3 {
    let a = linear_moment(v);
    (a * eta - normal * (r * r * triangle_area(v))) / 4.0
}

/// `(1/10) ∫_T (2 y_i y_j y - r²(y_j e_i + y_i e_j))·ν dS` for `T` inside the ball.
pub(crate) fn second_moment_exact(v: &[Vec3; 3], normal: &Vec3, eta: f64, r: f64) -> Mat3 {
    let a = linear_moment(v);
    let b = quadratic_moment(v);
    let an = normal * a.transpose();
    (b * (2.0 * eta) - (an + an.transpose()) * (r * r)) / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    /// Adaptive quadrature oracle: recursive midpoint subdivision into four
    /// children with a 6-point symmetric Gauss rule on each leaf, refined until
    /// the parent and children estimates agree.
    pub(crate) fn quad_oracle(tri: &[Vec3; 3], f: &dyn Fn(&Vec3) -> f64, tol: f64) -> f64 {
        fn gauss6(t: &[Vec3; 3], f: &dyn Fn(&Vec3) -> f64) -> f64 {
            const W1: f64 = 0.223_381_589_678_011;
            const W2: f64 = 0.109_951_743_655_322;
            const A1: f64 = 0.445_948_490_915_965;
            const A2: f64 = 0.091_576_213_509_771;
            let pt = |a: f64, b: f64, c: f64| t[0] * a + t[1] * b + t[2] * c;
            let s1 = f(&pt(A1, A1, 1.0 - 2.0 * A1)) + f(&pt(A1, 1.0 - 2.0 * A1, A1)) + f(&pt(1.0 - 2.0 * A1, A1, A1));
            let s2 = f(&pt(A2, A2, 1.0 - 2.0 * A2)) + f(&pt(A2, 1.0 - 2.0 * A2, A2)) + f(&pt(1.0 - 2.0 * A2, A2, A2));
            triangle_area(t) * (W1 * s1 + W2 * s2)
        }
        fn rec(t: &[Vec3; 3], f: &dyn Fn(&Vec3) -> f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m01 = (t[0] + t[1]) * 0.5;
            let m12 = (t[1] + t[2]) * 0.5;
            let m20 = (t[2] + t[0]) * 0.5;
            let kids = [[t[0], m01, m20], [m01, t[1], m12], [m20, m12, t[2]], [m01, m12, m20]];
            let parts: Vec<f64> = kids.iter().map(|k| gauss6(k, f)).collect();
            let sum: f64 = parts.iter().sum();
            if (sum - whole).abs() <= tol || depth > 14 {
                // Richardson step for the degree-4 rule.
                return sum + (sum - whole) / 63.0;
            }
            kids.iter()
                .zip(parts)
                .map(|(k, w)| rec(k, f, w, tol / 2.0, depth + 1))
                .sum()
        }
        rec(tri, f, gauss6(tri, f), tol, 0)
    }

    fn hyper_oracle(tri: &[Vec3; 3], p: &Vec3, rel: f64) -> f64 {
        let f = |x: &Vec3| (x - p).norm().powi(-3);
        let rough = quad_oracle(tri, &f, 1e-3);
        quad_oracle(tri, &f, rel * rough.abs())
    }

    #[test]
    fn far_field_limit() {
        let tri = [v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)];
        let h = hypersingular_integral(&tri, &v(0., 0., 100.)).unwrap();
        assert_relative_eq!(h, 0.5 / 1e6, max_relative = 0.01);
    }

    #[test]
    fn offset_triangle_matches_quadrature() {
        let tri = [v(1., 0., 1.), v(2., 0., 1.), v(1., 1., 1.)];
        let p = Vec3::zeros();
        let h = hypersingular_integral(&tri, &p).unwrap();
        let oracle = hyper_oracle(&tri, &p, 1e-12);
        assert_relative_eq!(h, oracle, max_relative = 1e-9);
    }

    #[test]
    fn each_position_class_matches_quadrature() {
        // Triangle in z = 0.7; vary the foot of the perpendicular.
        let tri = [v(0., 0., 0.7), v(2., 0., 0.7), v(0.4, 1.5, 0.7)];
        let cases = [
            (v(0.5, 0.5, 0.0), PositionClass::Inside),
            (v(1.0, 0.0, 0.0), PositionClass::OnEdge(0)),
            (v(0.0, 0.0, 0.0), PositionClass::AtVertex(0)),
            (v(2.0, 0.0, 0.0), PositionClass::AtVertex(1)),
            (v(3.0, 2.0, 0.0), PositionClass::Outside),
            (v(3.0, 0.0, 0.0), PositionClass::Outside),
        ];
        for (p, class) in cases {
            let frame = TriangleFrame::new(&tri, &p);
            assert_eq!(frame.class, class, "at {p}");
            let h = hypersingular_integral(&tri, &p).unwrap();
            let oracle = hyper_oracle(&tri, &p, 1e-11);
            assert_relative_eq!(h, oracle, max_relative = 1e-8);
        }
    }

    #[test]
    fn point_on_triangle_is_rejected() {
        let tri = [v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)];
        assert_eq!(
            hypersingular_integral(&tri, &v(0.2, 0.2, 0.0)),
            Err(IntegralError::PointOnTriangle)
        );
        assert_eq!(hypersingular_integral(&tri, &v(0.0, 0.0, 0.0)), Err(IntegralError::PointOnTriangle));
    }

    #[test]
    fn coplanar_outside_point_uses_in_plane_limit() {
        let tri = [v(1., 0., 0.), v(2., 0., 0.), v(1., 1., 0.)];
        let p = Vec3::zeros();
        let h = hypersingular_integral(&tri, &p).unwrap();
        assert_relative_eq!(h, hyper_oracle(&tri, &p, 1e-12), max_relative = 1e-9);
        let near = hypersingular_integral(&tri, &v(0., 0., 1e-9)).unwrap();
        assert_relative_eq!(h, near, max_relative = 1e-6);
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut rv = || v(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let tri = [rv(), rv(), rv()];
            let p = rv() * 0.3;
            let axis = nalgebra::Unit::new_normalize(rv());
            let rot = nalgebra::Rotation3::from_axis_angle(&axis, 1.234);
            let rtri = tri.map(|x| rot * x);
            let a = hypersingular_integral(&tri, &p).unwrap();
            let b = hypersingular_integral(&rtri, &(rot * p)).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn continuity_across_classification_boundary() {
        let tri = [v(0., 0., 0.5), v(1., 0., 0.5), v(0., 1., 0.5)];
        let mut prev: Option<f64> = None;
        // Sweep the foot across edge 0 (y = 0) and then through vertex 1.
        for k in -200..=200 {
            let y = k as f64 * 1e-9;
            let h = hypersingular_integral(&tri, &v(0.3, y, 0.0)).unwrap();
            if let Some(p) = prev {
                assert!((h - p).abs() < 1e-6, "jump {} at y = {y}", h - p);
            }
            prev = Some(h);
        }
        let mut prev: Option<f64> = None;
        for k in -200..=200 {
            let s = k as f64 * 1e-9;
            let h = hypersingular_integral(&tri, &v(1.0 + s, s, 0.0)).unwrap();
            if let Some(p) = prev {
                assert!((h - p).abs() < 1e-6, "jump {} at s = {s}", h - p);
            }
            prev = Some(h);
        }
    }

    #[test]
    fn svi_term_examples() {
        let tri = [v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)];
        assert_eq!(svi_triangle_term(&tri, &v(0.5, -0.5, 0.0), 2.0).unwrap(), 0.0);
        assert_eq!(svi_triangle_term(&tri, &v(0.0, 0.0, 0.0), 2.0).unwrap(), 0.0);
        assert!(matches!(
            svi_triangle_term(&tri, &v(5.0, 0.0, 0.0), 1.0),
            Err(IntegralError::TriangleNotInBall { .. })
        ));

        let h = 0.3;
        let tri = [v(-0.2, -0.1, h), v(0.3, -0.1, h), v(0.0, 0.35, h)];
        let r = 0.9;
        let a = svi_triangle_term(&tri, &Vec3::zeros(), r).unwrap();
        let f = |x: &Vec3| (1.0 - r.powi(3) / x.norm().powi(3)) * x.z / 3.0;
        let oracle = quad_oracle(&tri, &f, 1e-13);
        assert_relative_eq!(a, oracle, max_relative = 1e-8);
        // Normal +z points away from p, every point is strictly inside the ball.
        assert!(a < 0.0);
    }

    #[test]
    fn svi_term_vertex_choice_is_irrelevant() {
        let tri = [v(0.1, 0.2, 0.3), v(0.4, -0.1, 0.2), v(-0.2, 0.1, 0.5)];
        let frame = TriangleFrame::new(&tri, &Vec3::zeros());
        for x in &frame.vertices {
            assert_relative_eq!(x.dot(&frame.normal), frame.eta, max_relative = 1e-13);
        }
    }

    #[test]
    fn svi_term_centroid_limit() {
        let c = v(0.3, 0.2, 0.4);
        let n = v(0.2, -0.3, 1.0).normalize();
        let (u, w) = crate::eigen::complement_basis(&n);
        let r = 1.0;
        let d = c.norm();
        for s in [1e-2, 1e-3] {
            let tri = [c + u * s, c + w * s, c - (u + w) * s];
            let area = triangle_area(&tri);
            let limit = c.dot(&n) * area * (1.0 - (r / d).powi(3)) / 3.0;
            let frame = TriangleFrame::new(&tri, &Vec3::zeros());
            let sign = frame.normal.dot(&n).signum();
            let a = svi_triangle_term(&tri, &Vec3::zeros(), r).unwrap() * sign;
            assert_relative_eq!(a, limit * sign * sign, max_relative = 2.0 * s);
        }
    }

    #[test]
    fn moment_stencils() {
        let tri = [v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)];
        let a = linear_moment(&tri);
        assert_relative_eq!(a, v(1.0 / 6.0, 1.0 / 6.0, 0.0), epsilon = 1e-15);
        let b = quadratic_moment(&tri);
        assert_relative_eq!(b[(0, 0)], 1.0 / 12.0, epsilon = 1e-15);
        assert_relative_eq!(b[(0, 1)], 1.0 / 24.0, epsilon = 1e-15);
        assert_eq!(b, b.transpose());

        let sym = [v(1., 0., 0.), v(-0.5, 0.75f64.sqrt(), 0.), v(-0.5, -(0.75f64.sqrt()), 0.)];
        assert!(linear_moment(&sym).norm() < 1e-15);
    }

    #[test]
    fn moment_stencils_match_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rv = || v(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let tri = [rv(), rv(), rv()];
        let area = triangle_area(&tri);
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s1 = Vec3::zeros();
        let mut s2 = Mat3::zeros();
        let mut sq1 = Vec3::zeros();
        for _ in 0..n {
            let (mut a, mut b): (f64, f64) = (rng.gen(), rng.gen());
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            let x = tri[0] + (tri[1] - tri[0]) * a + (tri[2] - tri[0]) * b;
            s1 += x;
            sq1 += x.component_mul(&x);
            s2 += x * x.transpose();
        }
        let nf = n as f64;
        let mean1 = s1 / nf;
        let lin = linear_moment(&tri);
        let quad = quadratic_moment(&tri);
        for i in 0..3 {
            let sigma = ((sq1[i] / nf - mean1[i].powi(2)) / nf).sqrt() * area;
            assert!((lin[i] - mean1[i] * area).abs() <= 3.0 * sigma + 1e-15);
            // Second moments: bound by 3 sigma using |x| <= 3 as a crude variance cap.
            for j in 0..3 {
                let mc = s2[(i, j)] / nf * area;
                assert!((quad[(i, j)] - mc).abs() <= 3.0 * 9.0 / nf.sqrt() * area);
            }
        }
    }

    #[test]
    fn max_side_solves_the_volume_condition() {
        for eps in [1e-4, 0.01, 0.5, 1.0, 4.0] {
            let cfg = BisectionConfig::new(eps).unwrap();
            let r = 0.7;
            let l = cfg.max_side(KernelKind::Svi, r);
            // Independent check: bisection on g(ℓ) = ℓ² r² - ε (r-ℓ)⁴, increasing on (0, r).
            let (mut lo, mut hi) = (0.0, r);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid * mid * r * r - eps * (r - mid).powi(4) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert_relative_eq!(l, lo, max_relative = 1e-12);
            assert!(l < r);
            assert_eq!(cfg.max_side(KernelKind::FirstMoment, r), (eps * r).min(r));
        }
        assert_relative_eq!(
            BisectionConfig::default().max_side(KernelKind::Svi, 1.0),
            (3.0 - 5f64.sqrt()) / 2.0,
            max_relative = 1e-14
        );
        assert!(BisectionConfig::new(0.0).is_err());
    }

    #[test]
    fn inside_triangle_is_not_subdivided() {
        let tri = [v(0.1, 0., 0.2), v(0.2, 0., 0.2), v(0.1, 0.1, 0.2)];
        let (val, stats) =
            bisect_and_integrate_with_stats(&tri, &Vec3::zeros(), 1.0, KernelKind::Svi, &BisectionConfig::default());
        assert_eq!(stats.leaves, 1);
        assert_eq!(stats.max_depth, 0);
        assert_eq!(val.scalar(), svi_triangle_term(&tri, &Vec3::zeros(), 1.0).unwrap());
    }

    #[test]
    fn bisection_converges_to_quadrature() {
        let tri = [v(-0.9, -0.6, 0.25), v(1.1, -0.3, 0.3), v(0.0, 1.2, 0.2)];
        let p = Vec3::zeros();
        let r = 1.0;
        let normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        let f = |x: &Vec3| {
            let d = x.norm();
            if d <= r {
                (1.0 - (r / d).powi(3)) * x.dot(&normal) / 3.0
            } else {
                0.0
            }
        };
        let oracle = quad_oracle(&tri, &f, 1e-10);
        let mut errors = Vec::new();
        for eps in [1.0, 0.1, 0.01, 0.001] {
            let cfg = BisectionConfig::new(eps).unwrap();
            let val = bisect_and_integrate(&tri, &p, r, KernelKind::Svi, &cfg).scalar();
            let l = cfg.max_side(KernelKind::Svi, r);
            let delta = r.powi(4) * l / (r - l).powi(4);
            assert!((val - oracle).abs() <= 2.0 * PI * r * l * delta, "eps {eps}");
            errors.push((val - oracle).abs());
        }
        assert!(errors[3] < errors[0]);
    }

    #[test]
    fn moment_bisection_converges_to_quadrature() {
        let tri = [v(-0.9, -0.6, 0.25), v(1.1, -0.3, 0.3), v(0.0, 1.2, 0.2)];
        let r = 1.0;
        let normal = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        let eta = tri[0].dot(&normal);
        let inside = |x: &Vec3| x.norm() <= r;
        let f0 = |x: &Vec3| if inside(x) { (x.x * eta - r * r * normal.x) / 4.0 } else { 0.0 };
        let f12 = |x: &Vec3| {
            if inside(x) {
                (2.0 * x.y * x.z * eta - r * r * (x.z * normal.y + x.y * normal.z)) / 10.0
            } else {
                0.0
            }
        };
        let o0 = quad_oracle(&tri, &f0, 1e-7);
        let o12 = quad_oracle(&tri, &f12, 1e-7);
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.1, 0.01] {
            let cfg = BisectionConfig::new(eps).unwrap();
            let m1 = bisect_and_integrate(&tri, &Vec3::zeros(), r, KernelKind::FirstMoment, &cfg).vector();
            let m2 = bisect_and_integrate(&tri, &Vec3::zeros(), r, KernelKind::SecondMoment, &cfg).matrix();
            let err = (m1.x - o0).abs() + (m2[(1, 2)] - o12).abs();
            assert!(err <= eps * r.powi(4) * 2.0 * PI * 2.0);
            assert!(err < prev || err < 1e-6);
            prev = err;
            assert_relative_eq!(m2, m2.transpose(), epsilon = 1e-15);
        }
    }

    #[test]
    fn bisection_preserves_area() {
        let tri = [v(-0.9, -0.6, 0.25), v(1.1, -0.3, 0.3), v(0.0, 1.2, 0.2)];
        // With r huge and every leaf inside, the zero-kernel... use the first
        // moment e_z-term at r = 0: the sum of -r² ν|T_s| reproduces |T|.
        let cfg = BisectionConfig::new(0.01).unwrap();
        let b = Bisector {
            r: 1.0,
            kind: KernelKind::Svi,
            normal: Vec3::z(),
            eta: 0.0,
            max_side: cfg.max_side(KernelKind::Svi, 1.0),
        };
        let mut leaves = Vec::new();
        fn collect(b: &Bisector, v: [Vec3; 3], out: &mut Vec<[Vec3; 3]>) {
            let sides = [(v[1] - v[0]).norm(), (v[2] - v[1]).norm(), (v[0] - v[2]).norm()];
            let (i, l) = sides.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            if l <= b.max_side {
                out.push(v);
                return;
            }
            let m = (v[i] + v[(i + 1) % 3]) * 0.5;
            collect(b, [v[i], m, v[(i + 2) % 3]], out);
            collect(b, [m, v[(i + 1) % 3], v[(i + 2) % 3]], out);
        }
        collect(&b, tri, &mut leaves);
        let total: f64 = leaves.iter().map(triangle_area).sum();
        assert_relative_eq!(total, triangle_area(&tri), max_relative = 1e-12);
    }
}
