//! Immutable indexed triangle mesh with edge adjacency, orientation repair,
//! point-to-triangle distance bounds and depth-first ball traversal.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::Vec3;

/// Errors raised while building or querying a [`TriMesh`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh must contain at least one vertex and one face")]
    EmptyMesh,
    #[error("face {face} references vertex {index}, but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("vertex {index} has a non-finite coordinate")]
    NonFiniteVertex { index: usize },
    #[error("orientation cannot be made consistent in the component containing face {face}")]
    UnrepairableOrientation { face: usize },
    #[error("all faces were degenerate")]
    AllFacesDegenerate,
    #[error("vertex {0} has no incident triangles")]
    IsolatedVertex(usize),
    #[error("vertex index {index} out of range ({vertex_count} vertices)")]
    VertexOutOfRange { index: usize, vertex_count: usize },
}

/// Diagnostics gathered by [`TriMesh::build`]. None of these are fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshReport {
    /// Faces whose winding was reversed to make orientation consistent.
    pub flipped_faces: Vec<usize>,
    /// Input faces dropped because they repeat an index or have zero area.
    pub dropped_faces: Vec<usize>,
    /// Edges shared by more than two triangles. Adjacency is not linked across them.
    pub non_manifold_edges: Vec<(usize, usize)>,
    /// Number of edges with exactly one incident triangle.
    pub boundary_edges: usize,
    /// Vertices not referenced by any surviving face.
    pub isolated_vertices: Vec<usize>,
    /// Number of edge-connected components.
    pub components: usize,
}

impl MeshReport {
    pub fn is_closed_manifold(&self) -> bool {
        self.boundary_edges == 0 && self.non_manifold_edges.is_empty()
    }
}

/// Indexed triangle surface with consistent orientation.
///
/// Edge `i` of triangle `t` runs from `triangles[t][i]` to `triangles[t][(i + 1) % 3]`,
/// and `neighbors[t][i]` is the triangle across it, if any.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    neighbors: Vec<[Option<usize>; 3]>,
    incidence: Vec<Vec<usize>>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    report: MeshReport,
}

/// Relative area threshold below which a face counts as degenerate.
const DEGENERATE_REL_AREA: f64 = 1e-14;

impl TriMesh {
    /// Validates the input, repairs orientation, and builds adjacency.
    pub fn build(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if positions.is_empty() || faces.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        if let Some(index) = positions
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFiniteVertex { index });
        }
        let n = positions.len();
        let mut report = MeshReport::default();
        let mut triangles = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    face: fi,
                    index,
                    vertex_count: n,
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                report.dropped_faces.push(fi);
                continue;
            }
            let (a, b, c) = (positions[f[0]], positions[f[1]], positions[f[2]]);
            let scale = (b - a)
                .norm_squared()
                .max((c - a).norm_squared())
                .max((c - b).norm_squared());
            if (b - a).cross(&(c - a)).norm() <= DEGENERATE_REL_AREA * scale {
                report.dropped_faces.push(fi);
                continue;
            }
            triangles.push(*f);
        }
        if triangles.is_empty() {
            return Err(MeshError::AllFacesDegenerate);
        }

        let (neighbors, same_direction, non_manifold) = link_edges(&triangles);
        report.non_manifold_edges = non_manifold;

        // Breadth-first orientation propagation over manifold edges, then a
        // per-component majority vote so the smaller half gets flipped.
        let m = triangles.len();
        let mut flip = vec![false; m];
        let mut component = vec![usize::MAX; m];
        let mut queue = VecDeque::new();
        let mut n_components = 0;
        for seed in 0..m {
            if component[seed] != usize::MAX {
                continue;
            }
            let id = n_components;
            n_components += 1;
            component[seed] = id;
            queue.push_back(seed);
            let mut members = vec![seed];
            while let Some(t) = queue.pop_front() {
                for e in 0..3 {
                    let Some(nb) = neighbors[t][e] else { continue };
                    let want = flip[t] ^ same_direction[t][e];
                    if component[nb] == usize::MAX {
                        component[nb] = id;
                        flip[nb] = want;
                        members.push(nb);
                        queue.push_back(nb);
                    } else if flip[nb] != want {
                        return Err(MeshError::UnrepairableOrientation { face: seed });
                    }
                }
            }
            let flipped = members.iter().filter(|&&t| flip[t]).count();
            if 2 * flipped > members.len() {
                for &t in &members {
                    flip[t] = !flip[t];
                }
            }
        }
        report.components = n_components;
        for (t, tri) in triangles.iter_mut().enumerate() {
            if flip[t] {
                tri.swap(1, 2);
                report.flipped_faces.push(t);
            }
        }
        let neighbors = if report.flipped_faces.is_empty() {
            neighbors
        } else {
            link_edges(&triangles).0
        };

        report.boundary_edges = count_boundary_edges(&triangles);

        let mut incidence = vec![Vec::new(); n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                incidence[v].push(t);
            }
        }
        report.isolated_vertices = (0..n).filter(|&v| incidence[v].is_empty()).collect();

        let (normals, areas) = triangles
            .iter()
            .map(|&[a, b, c]| {
                let cr = (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
                let len = cr.norm();
                (cr / len, 0.5 * len)
            })
            .unzip();

        Ok(TriMesh {
            vertices: positions,
            triangles,
            neighbors,
            incidence,
            normals,
            areas,
            report,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Edge neighbours of triangle `t`; `None` marks a boundary or non-manifold edge.
    pub fn neighbors(&self, t: usize) -> &[Option<usize>; 3] {
        &self.neighbors[t]
    }

    /// Triangles incident to vertex `v`, in increasing index order.
    pub fn incident_triangles(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    /// Outward unit normal of triangle `t` (right-hand rule on its winding).
    pub fn normal(&self, t: usize) -> Vec3 {
        self.normals[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn report(&self) -> &MeshReport {
        &self.report
    }

    pub fn triangle_vertices(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// True if any edge of `t` lacks a manifold neighbour.
    pub fn touches_boundary(&self, t: usize) -> bool {
        self.neighbors[t].iter().any(Option::is_none)
    }

    /// Total surface area.
    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Enclosed volume by the divergence theorem, `(1/3) Σ (x·ν)|T|`.
    /// Only meaningful for closed meshes; negative when oriented inward.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    /// Largest distance between any two vertices' bounding-box corners.
    pub fn bounding_diameter(&self) -> f64 {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (hi - lo).norm()
    }

    /// Returns a copy with every triangle's winding reversed, so that the
    /// interior becomes the complement.
    pub fn flipped(&self) -> TriMesh {
        let faces = self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect();
        TriMesh::build(self.vertices.clone(), faces).expect("flipping a valid mesh cannot fail")
    }

    /// Applies `f` to every vertex position, keeping the connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriMesh, MeshError> {
        TriMesh::build(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    /// `(r1, r2)`: the minimum and maximum of `|x - p|` over the closed triangle `t`.
    pub fn triangle_distance_bounds(&self, p: &Vec3, t: usize) -> (f64, f64) {
        let [a, b, c] = self.triangle_vertices(t);
        distance_bounds(p, &a, &b, &c)
    }

    /// Vertex-star area weight: one third of the incident triangle areas.
    pub fn vertex_area(&self, v: usize) -> f64 {
        self.incidence[v].iter().map(|&t| self.areas[t]).sum::<f64>() / 3.0
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), MeshError> {
        if v >= self.vertices.len() {
            return Err(MeshError::VertexOutOfRange {
                index: v,
                vertex_count: self.vertices.len(),
            });
        }
        if self.incidence[v].is_empty() {
            return Err(MeshError::IsolatedVertex(v));
        }
        Ok(())
    }

    /// The connected component of `S ∩ B_r(p)` containing vertex `p`.
    pub fn collect_ball_region(&self, p: usize, r: f64) -> Result<BallRegion, MeshError> {
        let mut scratch = RegionScratch::new(self);
        self.collect_ball_region_with(p, r, &mut scratch)
    }

    /// Same as [`collect_ball_region`](Self::collect_ball_region) but reuses traversal
    /// buffers across queries.
    pub fn collect_ball_region_with(
        &self,
        p: usize,
        r: f64,
        scratch: &mut RegionScratch,
    ) -> Result<BallRegion, MeshError> {
        self.check_vertex(p)?;
        let center = self.vertices[p];
        scratch.next_generation(self.triangles.len());
        let gen = scratch.generation;
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut touches_mesh_boundary = false;
        scratch.stack.clear();
        for &t in &self.incidence[p] {
            scratch.stamp[t] = gen;
            scratch.stack.push(t);
        }
        while let Some(t) = scratch.stack.pop() {
            let (r1, r2) = self.triangle_distance_bounds(&center, t);
            if r1 > r {
                continue;
            }
            if r2 <= r {
                interior.push(t);
            } else {
                boundary.push(BoundaryTriangle {
                    triangle: t,
                    r1,
                    r2,
                });
            }
            for nb in self.neighbors[t] {
                match nb {
                    Some(nb) if scratch.stamp[nb] != gen => {
                        scratch.stamp[nb] = gen;
                        scratch.stack.push(nb);
                    }
                    Some(_) => {}
                    None => touches_mesh_boundary = true,
                }
            }
        }
        interior.sort_unstable();
        boundary.sort_unstable_by_key(|b| b.triangle);
        Ok(BallRegion {
            center_vertex: p,
            radius: r,
            interior,
            boundary,
            touches_mesh_boundary,
        })
    }
}

/// Reusable traversal state for [`TriMesh::collect_ball_region_with`].
#[derive(Debug, Clone)]
pub struct RegionScratch {
    stamp: Vec<u32>,
    generation: u32,
    stack: Vec<usize>,
}

impl RegionScratch {
    pub fn new(mesh: &TriMesh) -> Self {
        RegionScratch {
            stamp: vec![0; mesh.triangle_count()],
            generation: 0,
            stack: Vec::new(),
        }
    }

    fn next_generation(&mut self, m: usize) {
        if self.stamp.len() != m {
            self.stamp = vec![0; m];
            self.generation = 0;
        }
        if self.generation == u32::MAX {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.generation = 0;
        }
        self.generation += 1;
    }
}

/// A triangle crossing the ball boundary, `r1 <= r < r2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTriangle {
    pub triangle: usize,
    pub r1: f64,
    pub r2: f64,
}

/// Triangles of the connected component of `S ∩ B_r(p)` that contains `p`,
/// each list sorted by triangle index.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    pub center_vertex: usize,
    pub radius: f64,
    /// Triangles with `r2 <= r`.
    pub interior: Vec<usize>,
    /// Triangles with `r1 <= r < r2`.
    pub boundary: Vec<BoundaryTriangle>,
    /// The traversal reached an edge with no manifold neighbour.
    pub touches_mesh_boundary: bool,
}

impl BallRegion {
    pub fn len(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All triangle indices in the region, sorted.
    pub fn triangles(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .interior
            .iter()
            .copied()
            .chain(self.boundary.iter().map(|b| b.triangle))
            .collect();
        all.sort_unstable();
        all
    }
}

/// Closed-form `(min, max)` of `|x - p|` over the closed triangle `abc`.
///
/// The minimum projects `p` onto the supporting plane; if the foot lies
/// outside the triangle, the in-plane closest boundary point is combined with
/// the plane distance by Pythagoras.
pub fn distance_bounds(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (f64, f64) {
    let r2 = (a - p).norm().max((b - p).norm()).max((c - p).norm());
    let n = (b - a).cross(&(c - a));
    let nn = n.norm_squared();
    let h = (p - a).dot(&n) / nn;
    let foot = p - n * h;
    let plane_sq = h * h * nn;
    let inside = (b - a).cross(&(foot - a)).dot(&n) >= 0.0
        && (c - b).cross(&(foot - b)).dot(&n) >= 0.0
        && (a - c).cross(&(foot - c)).dot(&n) >= 0.0;
    let r1 = if inside {
        plane_sq.sqrt()
    } else {
        let d = segment_distance_sq(&foot, a, b)
            .min(segment_distance_sq(&foot, b, c))
            .min(segment_distance_sq(&foot, c, a));
        (d + plane_sq).sqrt()
    };
    (r1.min(r2), r2)
}

fn segment_distance_sq(x: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - x).norm_squared()
}

type Links = (Vec<[Option<usize>; 3]>, Vec<[bool; 3]>, Vec<(usize, usize)>);

/// Links triangles across edges shared by exactly two faces. Also reports,
/// per linked edge, whether both faces traverse it in the same direction.
fn link_edges(triangles: &[[usize; 3]]) -> Links {
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> =
        HashMap::with_capacity(triangles.len() * 3 / 2);
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            let (u, v) = (tri[e], tri[(e + 1) % 3]);
            edges.entry((u.min(v), u.max(v))).or_default().push((t, e));
        }
    }
    let mut neighbors = vec![[None; 3]; triangles.len()];
    let mut same = vec![[false; 3]; triangles.len()];
    let mut non_manifold = Vec::new();
    for (key, sides) in &edges {
        match sides.as_slice() {
            [(t0, e0), (t1, e1)] => {
                neighbors[*t0][*e0] = Some(*t1);
                neighbors[*t1][*e1] = Some(*t0);
                let s = triangles[*t0][*e0] == triangles[*t1][*e1];
                same[*t0][*e0] = s;
                same[*t1][*e1] = s;
            }
            [_] => {}
            _ => non_manifold.push(*key),
        }
    }
    non_manifold.sort_unstable();
    (neighbors, same, non_manifold)
}

fn count_boundary_edges(triangles: &[[usize; 3]]) -> usize {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in triangles {
        for e in 0..3 {
            let (u, v) = (tri[e], tri[(e + 1) % 3]);
            *count.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    count.values().filter(|&&c| c == 1).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn single_triangle() {
        let m = TriMesh::build(
            vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.report().boundary_edges, 3);
        assert!(m.report().non_manifold_edges.is_empty());
        assert!(!m.report().is_closed_manifold());
        assert_eq!(m.normal(0), v(0., 0., 1.));
    }

    #[test]
    fn octahedron_is_closed() {
        let m = shapes::octahedron();
        assert_eq!(m.vertex_count(), 6);
        assert_eq!(m.triangle_count(), 8);
        assert!(m.report().is_closed_manifold());
        assert!(m.report().flipped_faces.is_empty());
        for t in 0..8 {
            assert!(m.neighbors(t).iter().all(Option::is_some));
        }
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn orientation_repair_flips_one_face() {
        let pos = vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(1., 1., 0.)];
        // Both faces traverse edge 1->2 in the same direction.
        let m = TriMesh::build(pos, vec![[0, 1, 2], [1, 2, 3]]).unwrap();
        assert_eq!(m.report().flipped_faces.len(), 1);
        assert_eq!(m.report().boundary_edges, 4);
        let n0 = m.normal(0);
        let n1 = m.normal(1);
        assert!((n0 - n1).norm() < 1e-15);
    }

    #[test]
    fn majority_vote_keeps_most_faces() {
        let mesh = shapes::icosphere(1.0, 1).unwrap();
        let mut faces = mesh.triangles().to_vec();
        faces[3].swap(1, 2);
        let m = TriMesh::build(mesh.vertices().to_vec(), faces).unwrap();
        assert_eq!(m.report().flipped_faces, vec![3]);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn moebius_is_unrepairable() {
        // Triangulated Moebius strip with 5 quads.
        let n = 5;
        let mut pos = Vec::new();
        for i in 0..n {
            let a = std::f64::consts::PI * 2.0 * i as f64 / n as f64;
            let tw = a / 2.0;
            for s in [-0.3, 0.3] {
                let rr = 1.0 + s * tw.cos();
                pos.push(v(rr * a.cos(), rr * a.sin(), s * tw.sin()));
            }
        }
        let mut faces = Vec::new();
        for i in 0..n {
            let (a, b) = (2 * i, 2 * i + 1);
            let (c, d) = if i + 1 < n {
                (2 * i + 2, 2 * i + 3)
            } else {
                (1, 0)
            };
            faces.push([a, c, b]);
            faces.push([b, c, d]);
        }
        assert!(matches!(
            TriMesh::build(pos, faces),
            Err(MeshError::UnrepairableOrientation { .. })
        ));
    }

    #[test]
    fn non_manifold_edge_is_reported() {
        let pos = vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(0., 1., 0.),
            v(0., -1., 0.),
            v(0., 0., 1.),
        ];
        let m = TriMesh::build(pos, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap();
        assert_eq!(m.report().non_manifold_edges, vec![(0, 1)]);
        assert!(m.neighbors(0)[0].is_none());
    }

    #[test]
    fn degenerate_faces_dropped_and_isolated_vertices_flagged() {
        let pos = vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(0., 1., 0.),
            v(2., 0., 0.),
            v(5., 5., 5.),
        ];
        let m = TriMesh::build(pos, vec![[0, 1, 2], [0, 1, 3], [0, 0, 2]]).unwrap();
        assert_eq!(m.report().dropped_faces, vec![1, 2]);
        assert_eq!(m.report().isolated_vertices, vec![3, 4]);
        assert_eq!(m.collect_ball_region(4, 1.0), Err(MeshError::IsolatedVertex(4)));
    }

    #[test]
    fn errors() {
        assert_eq!(TriMesh::build(vec![], vec![]).unwrap_err(), MeshError::EmptyMesh);
        assert!(matches!(
            TriMesh::build(vec![v(0., 0., 0.)], vec![[0, 1, 2]]),
            Err(MeshError::IndexOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn distance_bounds_examples() {
        let (a, b, c) = (v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.));
        let (r1, r2) = distance_bounds(&v(0., 0., 1.), &v(-1., -1., 0.), &v(2., -1., 0.), &v(-1., 2., 0.));
        assert!((r1 - 1.0).abs() < 1e-15);
        assert!(r2 > 1.0);
        let (r1, r2) = distance_bounds(&a, &a, &b, &c);
        assert_eq!(r1, 0.0);
        assert_eq!(r2, 1.0);
        let (r1, r2) = distance_bounds(&v(3., 0., 0.), &a, &b, &c);
        assert!((r1 - 2.0).abs() < 1e-15);
        assert!((r2 - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_bounds_agree_with_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut rv = || v(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (a, b, c, p) = (rv(), rv(), rv(), rv());
            let (r1, r2) = distance_bounds(&p, &a, &b, &c);
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            let n = 120;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
                    let x = a + (b - a) * s + (c - a) * t;
                    let d = (x - p).norm();
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            assert!(lo >= r1 - 1e-12 && hi <= r2 + 1e-12);
            // The lattice resolves the true extremum to about the grid size.
            assert!(lo - r1 < 0.05, "r1 {r1} sampled {lo}");
            assert!((hi - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn region_on_grid_with_small_radius_is_the_star() {
        let mesh = shapes::flat_grid(10, 10, 1.0).unwrap();
        let center = 5 * 11 + 5;
        let region = mesh.collect_ball_region(center, 0.5).unwrap();
        assert_eq!(region.triangles(), mesh.incident_triangles(center).to_vec());
        assert!(region.interior.is_empty());
        let region = mesh.collect_ball_region(center, 1.5).unwrap();
        for t in mesh.incident_triangles(center) {
            assert!(region.interior.contains(t));
        }
    }

    #[test]
    fn region_excludes_other_components() {
        let s1 = shapes::icosphere(1.0, 2).unwrap();
        let s2 = s1.map_vertices(|p| p + v(2.5, 0., 0.)).unwrap();
        let mut pos = s1.vertices().to_vec();
        let off = pos.len();
        pos.extend_from_slice(s2.vertices());
        let mut faces = s1.triangles().to_vec();
        faces.extend(s2.triangles().iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        let both = TriMesh::build(pos, faces).unwrap();
        assert_eq!(both.report().components, 2);
        let p = (0..off).max_by(|&a, &b| both.vertices()[a].x.total_cmp(&both.vertices()[b].x)).unwrap();
        let region = both.collect_ball_region(p, 2.0).unwrap();
        assert!(region.triangles().iter().all(|&t| t < s1.triangle_count()));
        assert!(!region.touches_mesh_boundary);
    }

    #[test]
    fn whole_surface_region() {
        let mesh = shapes::icosphere(1.0, 2).unwrap();
        let region = mesh.collect_ball_region(0, 2.5).unwrap();
        assert_eq!(region.interior.len(), mesh.triangle_count());
        assert!(region.boundary.is_empty());
    }

    #[test]
    fn region_is_monotone_in_radius() {
        let mesh = shapes::icosphere(1.0, 3).unwrap();
        let mut prev: Vec<usize> = Vec::new();
        for k in 1..12 {
            let cur = mesh.collect_ball_region(17, 0.1 * k as f64).unwrap().triangles();
            assert!(prev.iter().all(|t| cur.binary_search(t).is_ok()));
            prev = cur;
        }
    }

    #[test]
    fn region_independent_of_visit_order() {
        let mesh = shapes::icosphere(1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Shuffle face order; region must map to the same face set.
        let mut perm: Vec<usize> = (0..mesh.triangle_count()).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let faces = perm.iter().map(|&t| mesh.triangles()[t]).collect();
        let shuffled = TriMesh::build(mesh.vertices().to_vec(), faces).unwrap();
        let a = mesh.collect_ball_region(5, 0.7).unwrap();
        let b = shuffled.collect_ball_region(5, 0.7).unwrap();
        let mut mapped: Vec<usize> = b.triangles().iter().map(|&t| perm[t]).collect();
        mapped.sort_unstable();
        assert_eq!(a.triangles(), mapped);
    }
}
