//! The solid-angle fraction `Γ(p)` at a mesh vertex.
//!
//! The star of `p` is rotated so that the vertex normal becomes `(0, 0, -1)`;
//! each incident triangle then covers an azimuth interval and contributes a
//! closed-form arcsine term. Stars violating the downward-normal assumption
//! ("bizarre" stars) are handled by [`VertexStar::gamma_numeric`], which
//! integrates the inside indicator of the radially extended star over the
//! unit sphere by adaptive spherical-triangle subdivision.

use std::f64::consts::PI;

use thiserror::Error;

use crate::eigen::{complement_basis, symmetric_eigen};
use crate::mesh::{MeshError, TriMesh};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GammaError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("vertex star is degenerate; no normal can be estimated")]
    DegenerateStar,
    #[error("vertex star is bizarre ({0:?}); use the numeric fallback")]
    BizarreVertex(BizarreReason),
}

/// Why the closed-form formula does not apply to a star.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BizarreReason {
    /// A rotated triangle normal has a non-negative vertical component.
    FacingAway,
    /// A vertex edge is parallel to the vertex normal, so its azimuth is undefined.
    PolarEdge,
    /// The azimuth intervals do not tile the circle exactly once
    /// (boundary vertex, or a star that wraps around more than once).
    BrokenFan,
}

/// Vertex-normal estimate used to orient the star.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NormalMethod {
    /// Normalised unweighted mean of the incident face normals.
    #[default]
    Average,
    AreaWeighted,
    /// Normal of the least-squares plane through the adjacent vertices,
    /// sign-aligned with [`NormalMethod::Average`].
    LsqPlane,
}

const DEGENERATE_NORM: f64 = 1e-12;

pub fn estimate_vertex_normal(mesh: &TriMesh, v: usize, method: NormalMethod) -> Result<Vec3, GammaError> {
    mesh.check_vertex(v)?;
    let tris = mesh.incident_triangles(v);
    let average: Vec3 = tris.iter().map(|&t| mesh.normal(t)).sum();
    if average.norm() < DEGENERATE_NORM {
        return Err(GammaError::DegenerateStar);
    }
    let average = average.normalize();
    match method {
        NormalMethod::Average => Ok(average),
        NormalMethod::AreaWeighted => {
            let n: Vec3 = tris.iter().map(|&t| mesh.normal(t) * mesh.area(t)).sum();
            if n.norm() < DEGENERATE_NORM {
                return Err(GammaError::DegenerateStar);
            }
            Ok(n.normalize())
        }
        NormalMethod::LsqPlane => {
            let mut neighbours: Vec<usize> = tris
                .iter()
                .flat_map(|&t| mesh.triangles()[t])
                .filter(|&u| u != v)
                .collect();
            neighbours.sort_unstable();
            neighbours.dedup();
            let pts: Vec<Vec3> = neighbours.iter().map(|&u| mesh.vertices()[u]).collect();
            let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
            let cov: Mat3 = pts
                .iter()
                .map(|x| (x - centroid) * (x - centroid).transpose())
                .sum();
            let eig = symmetric_eigen(&cov);
            // A plane is determined only if the second-smallest spread is non-zero.
            if eig.values[1] <= 1e-24 * eig.values[0].max(f64::MIN_POSITIVE) {
                return Err(GammaError::DegenerateStar);
            }
            let n = eig.vectors[2];
            Ok(if n.dot(&average) < 0.0 { -n } else { n })
        }
    }
}

/// The triangles incident to a vertex, expressed as unit directions in the
/// rotated frame where the vertex normal is `(0, 0, -1)`.
#[derive(Debug, Clone)]
pub struct VertexStar {
    pub center: Vec3,
    /// Outward unit normal at the vertex, in original coordinates.
    pub vertex_normal: Vec3,
    /// Rotation taking original directions to the rotated frame.
    pub rotation: Mat3,
    /// Per triangle `(p, a, b)`, the rotated unit directions of `a - p` and
    /// `b - p`, in the triangle's outward winding order.
    pub fan: Vec<[Vec3; 2]>,
    /// Rotated outward unit normal `ν^i` of each triangle in `fan`.
    pub normals: Vec<Vec3>,
    /// Triangles ordered by the start of their azimuth interval.
    pub order: Vec<usize>,
    /// Start azimuths `θ_1 < … < θ_k` in `[0, 2π)`, in `order`.
    pub azimuths: Vec<f64>,
    /// Azimuth interval widths, in `order`.
    pub spans: Vec<f64>,
    pub bizarre: Option<BizarreReason>,
}

const FACING_TOL: f64 = 1e-12;
const CHAIN_TOL: f64 = 1e-9;

impl VertexStar {
    pub fn from_mesh(mesh: &TriMesh, v: usize, normal: &Vec3) -> Result<Self, GammaError> {
        mesh.check_vertex(v)?;
        let p = mesh.vertices()[v];
        let fan: Vec<(Vec3, Vec3)> = mesh
            .incident_triangles(v)
            .iter()
            .map(|&t| {
                let tri = mesh.triangles()[t];
                let k = tri.iter().position(|&u| u == v).expect("incidence is consistent");
                let a = mesh.vertices()[tri[(k + 1) % 3]];
                let b = mesh.vertices()[tri[(k + 2) % 3]];
                (a, b)
            })
            .collect();
        Self::from_fan(p, normal, &fan)
    }

    /// `fan` lists, per incident triangle `(center, a, b)`, the two other
    /// corners in outward winding order.
    pub fn from_fan(center: Vec3, normal: &Vec3, fan: &[(Vec3, Vec3)]) -> Result<Self, GammaError> {
        if fan.is_empty() || normal.norm() < DEGENERATE_NORM {
            return Err(GammaError::DegenerateStar);
        }
        let n = normal.normalize();
        let (u, w) = complement_basis(&n);
        // Rows (w, u, -n): right-handed because w × u = -n.
        let rotation = Mat3::from_rows(&[w.transpose(), u.transpose(), (-n).transpose()]);
        let mut dirs = Vec::with_capacity(fan.len());
        let mut normals = Vec::with_capacity(fan.len());
        for (a, b) in fan {
            let da = a - center;
            let db = b - center;
            let cr = da.cross(&db);
            if cr.norm() == 0.0 || da.norm() == 0.0 || db.norm() == 0.0 {
                return Err(GammaError::DegenerateStar);
            }
            dirs.push([rotation * da.normalize(), rotation * db.normalize()]);
            normals.push(rotation * cr.normalize());
        }
        let mut star = VertexStar {
            center,
            vertex_normal: n,
            rotation,
            fan: dirs,
            normals,
            order: Vec::new(),
            azimuths: Vec::new(),
            spans: Vec::new(),
            bizarre: None,
        };
        star.bizarre = star.arrange().err();
        Ok(star)
    }

    /// Orders the triangles by azimuth and checks the closed-form preconditions.
    fn arrange(&mut self) -> Result<(), BizarreReason> {
        if self.normals.iter().any(|nu| nu.z >= -FACING_TOL) {
            return Err(BizarreReason::FacingAway);
        }
        if self.fan.iter().flatten().any(|d| d.x.hypot(d.y) < FACING_TOL) {
            return Err(BizarreReason::PolarEdge);
        }
        let azimuth = |d: &Vec3| d.y.atan2(d.x).rem_euclid(2.0 * PI);
        // With ν₃ < 0 the triangle (p, a, b) runs clockwise seen from above,
        // so its azimuth interval goes from b to a.
        let intervals: Vec<(f64, f64)> = self
            .fan
            .iter()
            .map(|[a, b]| {
                let start = azimuth(b);
                (start, (azimuth(a) - start).rem_euclid(2.0 * PI))
            })
            .collect();
        let mut order: Vec<usize> = (0..intervals.len()).collect();
        order.sort_by(|&i, &j| intervals[i].0.total_cmp(&intervals[j].0));
        let total: f64 = intervals.iter().map(|iv| iv.1).sum();
        if (total - 2.0 * PI).abs() > CHAIN_TOL {
            return Err(BizarreReason::BrokenFan);
        }
        for k in 0..order.len() {
            let (s, w) = intervals[order[k]];
            let next = intervals[order[(k + 1) % order.len()]].0;
            let gap = (next - (s + w)).rem_euclid(2.0 * PI);
            if gap > CHAIN_TOL && 2.0 * PI - gap > CHAIN_TOL {
                return Err(BizarreReason::BrokenFan);
            }
        }
        self.azimuths = order.iter().map(|&i| intervals[i].0).collect();
        self.spans = order.iter().map(|&i| intervals[i].1).collect();
        self.order = order;
        Ok(())
    }

    pub fn is_bizarre(&self) -> bool {
        self.bizarre.is_some()
    }

    /// The same star with the inside and outside exchanged.
    pub fn flipped(&self) -> VertexStar {
        let fan: Vec<(Vec3, Vec3)> = self
            .fan
            .iter()
            .map(|[a, b]| {
                let back = self.rotation.transpose();
                (self.center + back * b, self.center + back * a)
            })
            .collect();
        Self::from_fan(self.center, &-self.vertex_normal, &fan).expect("flipping preserves validity")
    }

    /// Closed-form `Γ`, clamped to `[0, 1]`.
    pub fn gamma(&self) -> Result<f64, GammaError> {
        if let Some(reason) = self.bizarre {
            return Err(GammaError::BizarreVertex(reason));
        }
        let mut sum = 0.0;
        for (k, &t) in self.order.iter().enumerate() {
            let nu = self.normals[t];
            let d = nu.x.hypot(nu.y);
            let delta = nu.y.atan2(nu.x).rem_euclid(2.0 * PI);
            let start = self.azimuths[k];
            let end = start + self.spans[k];
            let term = |theta: f64| (d * (theta - delta).sin()).clamp(-1.0, 1.0).asin();
            sum += term(end) - term(start);
        }
        Ok((0.5 - sum / (4.0 * PI)).clamp(0.0, 1.0))
    }

    /// `Γ` by adaptive subdivision of the sphere, valid for any star whose
    /// triangles close up around the vertex. Absolute error is below `1e-6`.
    pub fn gamma_numeric(&self) -> f64 {
        let integrator = SphereIntegrator { fan: &self.fan };
        // A generic tilt keeps cell edges off the coordinate planes, where
        // flat and axis-aligned stars put their arcs.
        let tilt = nalgebra::Rotation3::from_euler_angles(0.377, 0.611, 0.919);
        let oct = [Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::x(), -Vec3::y(), -Vec3::z()].map(|d| tilt * d);
        let cells = [
            [0, 1, 2],
            [1, 3, 2],
            [3, 4, 2],
            [4, 0, 2],
            [1, 0, 5],
            [3, 1, 5],
            [4, 3, 5],
            [0, 4, 5],
        ];
        let inside: f64 = cells
            .iter()
            .map(|c| integrator.cell([oct[c[0]], oct[c[1]], oct[c[2]]], 0))
            .sum();
        (inside / (4.0 * PI)).clamp(0.0, 1.0)
    }

    /// Closed form when available, otherwise the numeric fallback. The flag
    /// reports whether the fallback was used.
    pub fn gamma_or_numeric(&self) -> (f64, bool) {
        match self.gamma() {
            Ok(g) => (g, false),
            Err(_) => (self.gamma_numeric(), true),
        }
    }
}

/// Signed area of the spherical triangle `(a, b, c)` of unit vectors.
pub(crate) fn spherical_triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    2.0 * a.dot(&b.cross(c)).atan2(1.0 + a.dot(b) + b.dot(c) + c.dot(a))
}

const MAX_CELL_DEPTH: usize = 18;

struct SphereIntegrator<'a> {
    fan: &'a [[Vec3; 2]],
}

impl SphereIntegrator<'_> {
    /// Inside indicator of direction `u`. Extending each triangle `(0, a, b)`
    /// to infinity, the solid angles `Ω(-u; a, b)` sum to `4π χ(u) - A` where
    /// `A ∈ (0, 4π)` is the solid angle of the inside cone; hence the sign.
    fn inside(&self, u: &Vec3) -> bool {
        let s: f64 = self.fan.iter().map(|[a, b]| spherical_triangle_area(&-u, a, b)).sum();
        s > 0.0
    }

    /// Inside area of the positively oriented spherical triangle `c`.
    fn cell(&self, c: [Vec3; 3], depth: usize) -> f64 {
        let area = spherical_triangle_area(&c[0], &c[1], &c[2]);
        let has_vertex = self
            .fan
            .iter()
            .flatten()
            .any(|d| in_cell(&c, d));
        let crossing: Vec<usize> = (0..self.fan.len())
            .filter(|&t| {
                let [a, b] = self.fan[t];
                (0..3).any(|i| arcs_intersect(&a, &b, &c[i], &c[(i + 1) % 3]))
            })
            .collect();
        if !has_vertex && crossing.is_empty() {
            let centroid = (c[0] + c[1] + c[2]).normalize();
            return if self.inside(&centroid) { area } else { 0.0 };
        }
        if !has_vertex && crossing.len() == 1 {
            let [a, b] = self.fan[crossing[0]];
            let n = a.cross(&b).normalize();
            let (pos, neg) = clip(&c, &n);
            let pos_area = polygon_area(&pos);
            let neg_area = area - pos_area;
            let classify = |poly: &[Vec3]| {
                poly.len() >= 3 && self.inside(&poly.iter().sum::<Vec3>().normalize())
            };
            return if classify(&pos) { pos_area } else { 0.0 } + if classify(&neg) { neg_area } else { 0.0 };
        }
        if depth >= MAX_CELL_DEPTH {
            let centroid = (c[0] + c[1] + c[2]).normalize();
            return if self.inside(&centroid) { area } else { 0.0 };
        }
        let m01 = (c[0] + c[1]).normalize();
        let m12 = (c[1] + c[2]).normalize();
        let m20 = (c[2] + c[0]).normalize();
        [
            [c[0], m01, m20],
            [m01, c[1], m12],
            [m20, m12, c[2]],
            [m01, m12, m20],
        ]
        .into_iter()
        .map(|k| self.cell(k, depth + 1))
        .sum()
    }
}

/// Closed spherical triangle membership, slightly inflated.
fn in_cell(c: &[Vec3; 3], x: &Vec3) -> bool {
    (0..3).all(|i| x.dot(&c[i].cross(&c[(i + 1) % 3])) >= -1e-14)
}

/// Conservative test for intersection of the minor arcs `p1p2` and `q1q2`.
fn arcs_intersect(p1: &Vec3, p2: &Vec3, q1: &Vec3, q2: &Vec3) -> bool {
    let n1 = p1.cross(p2);
    let n2 = q1.cross(q2);
    let d = n1.cross(&n2);
    let tol = 1e-14;
    if d.norm() <= tol * n1.norm() * n2.norm() {
        // Same great circle: report an intersection so the caller refines.
        return n1.dot(q1).abs() <= 1e-12 * n1.norm();
    }
    let on_arc = |x: &Vec3, a: &Vec3, b: &Vec3, n: &Vec3| {
        a.cross(x).dot(n) >= -tol && x.cross(b).dot(n) >= -tol
    };
    [d, -d]
        .iter()
        .any(|x| on_arc(x, p1, p2, &n1) && on_arc(x, q1, q2, &n2))
}

/// Splits a spherical triangle by the great circle with normal `n` into the
/// parts with `n·x ≥ 0` and `n·x ≤ 0`.
fn clip(c: &[Vec3; 3], n: &Vec3) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut pos = Vec::with_capacity(4);
    let mut neg = Vec::with_capacity(4);
    for i in 0..3 {
        let (x, y) = (c[i], c[(i + 1) % 3]);
        let (sx, sy) = (n.dot(&x), n.dot(&y));
        if sx >= 0.0 {
            pos.push(x);
        }
        if sx <= 0.0 {
            neg.push(x);
        }
        if (sx > 0.0 && sy < 0.0) || (sx < 0.0 && sy > 0.0) {
            let cut = ((y * sx - x * sy) * (sx - sy).signum()).normalize();
            pos.push(cut);
            neg.push(cut);
        }
    }
    (pos, neg)
}

fn polygon_area(poly: &[Vec3]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    (1..poly.len() - 1)
        .map(|i| spherical_triangle_area(&poly[0], &poly[i], &poly[i + 1]))
        .sum()
}
