//! Spherical volume invariant, moments of `Ω ∩ B_r(p)`, PCA curvature, and
//! the per-vertex field driver.
//!
//! For a vertex `p` with ball region `R`,
//!
//! ```text
//! V = Σ_{T ∈ R} (1/3) ∫_T (1 - r³/|x-p|³)(x-p)·ν dS + (4/3) π r³ Γ(p)
//! ```
//!
//! and the moments use the polynomial kernels of [`crate::integrals`].
//! Per-vertex sums run in triangle-index order so results do not depend on
//! scheduling.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::eigen::symmetric_eigen;
use crate::features::{Quantity, ScalarField, VertexFlags};
use crate::gamma::{estimate_vertex_normal, GammaError, NormalMethod, VertexStar};
use crate::integrals::{
    bisect_and_integrate_with_stats, first_moment_exact, second_moment_exact, svi_triangle_term,
    BisectionConfig, BisectionStats, KernelKind,
};
use crate::mesh::{MeshError, RegionScratch, TriMesh};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvariantError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error("radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("ball region has zero volume; covariance undefined")]
    ZeroVolume,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantConfig {
    pub bisection: BisectionConfig,
    pub normal: NormalMethod,
}

/// Spherical volume invariant at one vertex, with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SviResult {
    pub value: f64,
    /// The surface-integral part.
    pub kernel: f64,
    pub gamma: f64,
    pub flags: VertexFlags,
    /// Triangles in the ball region.
    pub region_triangles: usize,
    pub stats: BisectionStats,
}

/// Volume and first two moments of `Ω ∩ B_r(p)` relative to `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub volume: f64,
    pub m: Vec3,
    pub c: Mat3,
    /// `x̄ - p = m / V`.
    pub centroid_offset: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalIntegrals {
    pub svi: SviResult,
    pub moments: Option<MomentSet>,
    /// Vertex normal used for `Γ`.
    pub vertex_normal: Vec3,
}

fn check_radius(r: f64) -> Result<(), InvariantError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(InvariantError::NonPositiveRadius(r))
    }
}

pub fn spherical_volume_invariant(
    mesh: &TriMesh,
    p: usize,
    r: f64,
    cfg: &InvariantConfig,
) -> Result<SviResult, InvariantError> {
    let mut scratch = RegionScratch::new(mesh);
    Ok(local_integrals(mesh, p, r, cfg, false, &mut scratch)?.svi)
}

pub fn moment_set(mesh: &TriMesh, p: usize, r: f64, cfg: &InvariantConfig) -> Result<MomentSet, InvariantError> {
    let mut scratch = RegionScratch::new(mesh);
    Ok(local_integrals(mesh, p, r, cfg, true, &mut scratch)?
        .moments
        .expect("moments requested"))
}

/// Volume invariant and, if `with_moments`, the moment set, from one traversal.
pub fn local_integrals(
    mesh: &TriMesh,
    p: usize,
    r: f64,
    cfg: &InvariantConfig,
    with_moments: bool,
    scratch: &mut RegionScratch,
) -> Result<LocalIntegrals, InvariantError> {
    check_radius(r)?;
    let region = mesh.collect_ball_region_with(p, r, scratch)?;
    let center = mesh.vertices()[p];

    let mut order: Vec<(usize, bool)> = region
        .interior
        .iter()
        .map(|&t| (t, false))
        .chain(region.boundary.iter().map(|b| (b.triangle, true)))
        .collect();
    order.sort_unstable();

    let mut kernel = 0.0;
    let mut m = Vec3::zeros();
    let mut c = Mat3::zeros();
    let mut stats = BisectionStats::default();
    let bis = &cfg.bisection;
    for &(t, crossing) in &order {
        let tri = mesh.triangle_vertices(t);
        if crossing {
            let (v, s) = bisect_and_integrate_with_stats(&tri, &center, r, KernelKind::Svi, bis);
            kernel += v.scalar();
            stats.merge(&s);
            if with_moments {
                let (v, s) = bisect_and_integrate_with_stats(&tri, &center, r, KernelKind::FirstMoment, bis);
                m += v.vector();
                stats.merge(&s);
                let (v, s) = bisect_and_integrate_with_stats(&tri, &center, r, KernelKind::SecondMoment, bis);
                c += v.matrix();
                stats.merge(&s);
            }
        } else {
            kernel += svi_triangle_term(&tri, &center, r).expect("interior triangle lies in the ball");
            stats.leaves += 1;
            if with_moments {
                let rel = tri.map(|x| x - center);
                let n = mesh.normal(t);
                let eta = rel[0].dot(&n);
                m += first_moment_exact(&rel, &n, eta, r);
                c += second_moment_exact(&rel, &n, eta, r);
            }
        }
    }

    let normal = estimate_vertex_normal(mesh, p, cfg.normal)?;
    let star = VertexStar::from_mesh(mesh, p, &normal)?;
    let (gamma, fallback) = star.gamma_or_numeric();
    let value = kernel + 4.0 / 3.0 * PI * r.powi(3) * gamma;
    let flags = VertexFlags {
        bizarre: fallback,
        boundary: region.touches_mesh_boundary,
        failed: false,
    };
    let svi = SviResult {
        value,
        kernel,
        gamma,
        flags,
        region_triangles: region.len(),
        stats,
    };
    let moments = with_moments.then(|| {
        let c = c + Mat3::identity() * (r * r / 5.0 * value);
        let c = (c + c.transpose()) * 0.5;
        MomentSet {
            volume: value,
            m,
            c,
            centroid_offset: if value > 0.0 { m / value } else { Vec3::zeros() },
        }
    });
    Ok(LocalIntegrals {
        svi,
        moments,
        vertex_normal: normal,
    })
}

/// `H ≈ 4((2/3)π r³ - V) / (π r⁴)`.
pub fn mean_curvature_from_svi(volume: f64, r: f64) -> f64 {
    4.0 * (2.0 / 3.0 * PI * r.powi(3) - volume) / (PI * r.powi(4))
}

/// Central second moment `M = c - m mᵀ / V` of `Ω ∩ B_r(p)`.
pub fn covariance_matrix(ms: &MomentSet) -> Result<Mat3, InvariantError> {
    if !(ms.volume > 0.0) {
        return Err(InvariantError::ZeroVolume);
    }
    let m = ms.c - ms.m * ms.m.transpose() / ms.volume;
    Ok((m + m.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureEstimate {
    /// Eigenvalues of `M`, descending.
    pub lambda: [f64; 3],
    pub kappa1: f64,
    pub kappa2: f64,
    pub mean: f64,
    pub gauss: f64,
    /// Principal direction of `kappa1`.
    pub dir1: Vec3,
    /// Principal direction of `kappa2`.
    pub dir2: Vec3,
    pub normal_est: Vec3,
    /// `|λ1 - λ2| < 1e-3 r⁵`: the principal directions are unreliable.
    pub near_umbilic: bool,
}

/// Inverts the leading-order eigenvalue expansions of `M` for the principal
/// curvatures. `reference_normal` fixes the sign of `normal_est`.
///
/// The larger of the two tangential eigenvalues belongs to the direction of
/// smaller curvature, so the estimates are sorted with `kappa1 >= kappa2`
/// and each direction follows its curvature.
pub fn curvature_estimate(m: &Mat3, r: f64, reference_normal: Option<&Vec3>) -> CurvatureEstimate {
    let eig = symmetric_eigen(m);
    let [l1, l2, _] = eig.values;
    let base = 2.0 * PI * r.powi(5) / 15.0;
    let scale = 48.0 / (PI * r.powi(6));
    // 3κa + κb = A, κa + 3κb = B with κa along v1 and κb along v2.
    let a = scale * (base - l1);
    let b = scale * (base - l2);
    let ka = (3.0 * a - b) / 8.0;
    let kb = (3.0 * b - a) / 8.0;
    let (kappa1, kappa2, dir1, dir2) = if kb >= ka {
        (kb, ka, eig.vectors[1], eig.vectors[0])
    } else {
        (ka, kb, eig.vectors[0], eig.vectors[1])
    };
    let mut normal_est = eig.vectors[2];
    if let Some(n) = reference_normal {
        if normal_est.dot(n) < 0.0 {
            normal_est = -normal_est;
        }
    }
    CurvatureEstimate {
        lambda: eig.values,
        kappa1,
        kappa2,
        mean: 0.5 * (kappa1 + kappa2),
        gauss: kappa1 * kappa2,
        dir1,
        dir2,
        normal_est,
        near_umbilic: (l1 - l2).abs() < 1e-3 * r.powi(5),
    }
}

/// Curvature estimate at one vertex, with the volume-invariant diagnostics.
pub fn vertex_curvature(
    mesh: &TriMesh,
    p: usize,
    r: f64,
    cfg: &InvariantConfig,
) -> Result<(CurvatureEstimate, SviResult), InvariantError> {
    let mut scratch = RegionScratch::new(mesh);
    let li = local_integrals(mesh, p, r, cfg, true, &mut scratch)?;
    let ms = li.moments.expect("moments requested");
    let cov = covariance_matrix(&ms)?;
    Ok((curvature_estimate(&cov, r, Some(&li.vertex_normal)), li.svi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    pub quantity: Quantity,
    pub config: InvariantConfig,
    pub workers: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions {
            quantity: Quantity::Svi,
            config: InvariantConfig::default(),
            workers: 1,
        }
    }
}

/// Aggregate diagnostics of a field evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldStats {
    pub mean_triangles_per_ball: f64,
    pub max_bisection_depth: usize,
    pub bizarre_vertices: usize,
    pub boundary_vertices: usize,
    pub failed_vertices: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldResult {
    pub field: ScalarField,
    /// Vertex-area weighted average over vertices with finite values.
    pub global_average: f64,
    /// `(dir1, dir2)` per vertex for the moment-based quantities.
    pub directions: Option<Vec<[Vec3; 2]>>,
    pub stats: FieldStats,
}

struct VertexOutcome {
    value: f64,
    flags: VertexFlags,
    directions: [Vec3; 2],
    triangles: usize,
    depth: usize,
}

fn evaluate_vertex(mesh: &TriMesh, v: usize, r: f64, opts: &FieldOptions, scratch: &mut RegionScratch) -> VertexOutcome {
    let failed = VertexOutcome {
        value: f64::NAN,
        flags: VertexFlags {
            failed: true,
            ..Default::default()
        },
        directions: [Vec3::zeros(); 2],
        triangles: 0,
        depth: 0,
    };
    let needs_moments = opts.quantity.needs_moments();
    let Ok(li) = local_integrals(mesh, v, r, &opts.config, needs_moments, scratch) else {
        return failed;
    };
    let mut out = VertexOutcome {
        value: f64::NAN,
        flags: li.svi.flags,
        directions: [Vec3::zeros(); 2],
        triangles: li.svi.region_triangles,
        depth: li.svi.stats.max_depth,
    };
    out.value = match opts.quantity {
        Quantity::Svi => li.svi.value,
        Quantity::Mean => mean_curvature_from_svi(li.svi.value, r),
        Quantity::Gauss | Quantity::K1 | Quantity::K2 => {
            let Ok(cov) = covariance_matrix(&li.moments.expect("moments requested")) else {
                out.flags.failed = true;
                return out;
            };
            let est = curvature_estimate(&cov, r, Some(&li.vertex_normal));
            out.directions = [est.dir1, est.dir2];
            match opts.quantity {
                Quantity::Gauss => est.gauss,
                Quantity::K1 => est.kappa1,
                _ => est.kappa2,
            }
        }
    };
    out
}

/// Evaluates `opts.quantity` at every vertex on a pool of `opts.workers` threads.
/// Vertices that cannot be evaluated (isolated vertices, degenerate stars)
/// get a NaN value and the `failed` flag.
pub fn invariant_field(mesh: &TriMesh, r: f64, opts: &FieldOptions) -> Result<FieldResult, InvariantError> {
    check_radius(r)?;
    if opts.workers == 0 {
        return Err(InvariantError::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| InvariantError::Pool(e.to_string()))?;
    let outcomes: Vec<VertexOutcome> = pool.install(|| {
        (0..mesh.vertex_count())
            .into_par_iter()
            .map_init(|| RegionScratch::new(mesh), |scratch, v| evaluate_vertex(mesh, v, r, opts, scratch))
            .collect()
    });

    let mut stats = FieldStats::default();
    let mut tri_total = 0usize;
    let mut evaluated = 0usize;
    let (mut weighted, mut weight) = (0.0, 0.0);
    for (v, o) in outcomes.iter().enumerate() {
        stats.max_bisection_depth = stats.max_bisection_depth.max(o.depth);
        stats.bizarre_vertices += o.flags.bizarre as usize;
        stats.boundary_vertices += o.flags.boundary as usize;
        stats.failed_vertices += o.flags.failed as usize;
        if o.triangles > 0 {
            tri_total += o.triangles;
            evaluated += 1;
        }
        if o.value.is_finite() {
            let a = mesh.vertex_area(v);
            weighted += a * o.value;
            weight += a;
        }
    }
    stats.mean_triangles_per_ball = if evaluated > 0 {
        tri_total as f64 / evaluated as f64
    } else {
        0.0
    };
    let field = ScalarField {
        radius: r,
        quantity: opts.quantity,
        values: outcomes.iter().map(|o| o.value).collect(),
        flags: outcomes.iter().map(|o| o.flags).collect(),
    };
    let directions = opts
        .quantity
        .needs_moments()
        .then(|| outcomes.iter().map(|o| o.directions).collect());
    Ok(FieldResult {
        field,
        global_average: if weight > 0.0 { weighted / weight } else { f64::NAN },
        directions,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use approx::assert_relative_eq;

    #[test]
    fn flat_disk_volume_and_moments() {
        let mesh = shapes::flat_disk(3.0, 30).unwrap();
        let r = 1.0;
        let cfg = InvariantConfig::default();
        let v = spherical_volume_invariant(&mesh, 0, r, &cfg).unwrap();
        assert_eq!(v.gamma, 0.5);
        assert_relative_eq!(v.value, 2.0 * PI / 3.0, max_relative = 1e-12);
        assert!(!v.flags.boundary);

        let ms = moment_set(&mesh, 0, r, &InvariantConfig {
            bisection: BisectionConfig::new(0.05).unwrap(),
            ..Default::default()
        })
        .unwrap();
        assert!(ms.m.x.abs() < 1e-12 && ms.m.y.abs() < 1e-12);
        assert_relative_eq!(ms.m.z, -PI / 4.0, max_relative = 1e-2);
        assert_relative_eq!(ms.c[(0, 0)], 2.0 * PI / 15.0, max_relative = 1e-2);
        assert_relative_eq!(ms.c[(2, 2)], 2.0 * PI / 15.0, max_relative = 1e-2);
        let cov = covariance_matrix(&ms).unwrap();
        assert_relative_eq!(cov[(2, 2)], 19.0 * PI / 480.0, max_relative = 2e-2);
    }

    #[test]
    fn flat_curvature_is_zero() {
        let r5 = 0.5f64.powi(5);
        let m = Mat3::from_diagonal(&Vec3::new(2.0 * PI / 15.0, 2.0 * PI / 15.0, 19.0 * PI / 480.0)) * r5;
        let est = curvature_estimate(&m, 0.5, Some(&Vec3::z()));
        assert!(est.kappa1.abs() < 1e-12 && est.kappa2.abs() < 1e-12);
        assert!(est.near_umbilic);
        assert_eq!(est.mean, 0.5 * (est.kappa1 + est.kappa2));
        assert_relative_eq!(est.normal_est, Vec3::z(), epsilon = 1e-12);
    }

    #[test]
    fn curvature_ordering_follows_directions() {
        // Synthetic cylinder-like spectrum: larger spread along y.
        let r: f64 = 0.2;
        let base = 2.0 * PI * r.powi(5) / 15.0;
        let k = |k1: f64, k2: f64| PI / 48.0 * (3.0 * k1 + k2) * r.powi(6);
        let m = Mat3::from_diagonal(&Vec3::new(base - k(1.0, 0.0), base - k(0.0, 1.0), 0.01 * base));
        let est = curvature_estimate(&m, r, None);
        assert_relative_eq!(est.kappa1, 1.0, max_relative = 1e-9);
        assert!(est.kappa2.abs() < 1e-9);
        assert_relative_eq!(est.dir1.x.abs(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(est.dir2.y.abs(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn mean_curvature_inversion() {
        assert_eq!(mean_curvature_from_svi(2.0 * PI / 3.0, 1.0), 0.0);
        assert!(mean_curvature_from_svi(2.0, 1.0) > 0.0);
    }

    #[test]
    fn errors() {
        let mesh = shapes::octahedron();
        let cfg = InvariantConfig::default();
        assert!(matches!(
            spherical_volume_invariant(&mesh, 0, 0.0, &cfg),
            Err(InvariantError::NonPositiveRadius(_))
        ));
        assert!(matches!(
            spherical_volume_invariant(&mesh, 99, 1.0, &cfg),
            Err(InvariantError::Mesh(MeshError::VertexOutOfRange { .. }))
        ));
        let ms = MomentSet {
            volume: 0.0,
            m: Vec3::zeros(),
            c: Mat3::zeros(),
            centroid_offset: Vec3::zeros(),
        };
        assert_eq!(covariance_matrix(&ms), Err(InvariantError::ZeroVolume));
        assert_eq!(
            invariant_field(&mesh, 1.0, &FieldOptions { workers: 0, ..Default::default() }),
            Err(InvariantError::NoWorkers)
        );
    }

    #[test]
    fn field_on_octahedron() {
        let mesh = shapes::octahedron();
        let res = invariant_field(&mesh, 0.5, &FieldOptions::default()).unwrap();
        let v0 = res.field.values[0];
        assert!(res.field.values.iter().all(|&v| (v - v0).abs() < 1e-12));
        assert_relative_eq!(res.global_average, v0, max_relative = 1e-12);
        assert!(res.directions.is_none());
        assert_eq!(res.stats.failed_vertices, 0);
    }
}
