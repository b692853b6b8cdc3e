//! Integral invariants of triangulated surfaces and closed planar polylines.
//!
//! Every quantity is computed from boundary integrals alone: the spherical
//! volume invariant `V_r(p) = |Ω ∩ B_r(p)|`, the first and second moments of
//! `Ω ∩ B_r(p)` used for PCA curvature estimation, and the circular area
//! invariant of planar curves. Triangles fully inside the ball are integrated
//! in closed form; only triangles crossing the ball boundary are bisected.
//!
//! ```
//! use volint::{shapes, invariants::{spherical_volume_invariant, InvariantConfig}};
//!
//! let mesh = shapes::flat_disk(3.0, 30).unwrap();
//! let v = spherical_volume_invariant(&mesh, 0, 1.0, &InvariantConfig::default()).unwrap();
//! assert!((v.value - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-9);
//! ```

pub mod curve;
pub mod eigen;
pub mod features;
pub mod gamma;
pub mod integrals;
pub mod invariants;
pub mod io;
pub mod mesh;
pub mod shapes;

pub use curve::PlanarCurve;
pub use features::ScalarField;
pub use mesh::{BallRegion, TriMesh};

/// 3D vector type used throughout the crate.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2D vector type used by the planar-curve routines.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3x3 matrix type (moments, covariance).
pub type Mat3 = nalgebra::Matrix3<f64>;
