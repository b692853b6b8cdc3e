//! Closed-form eigendecomposition of symmetric 3x3 matrices.
//!
//! Eigenvalues come from the trigonometric solution of the characteristic
//! cubic. The eigenvector of the best-separated eigenvalue is taken from the
//! largest cross product of rows of `A - λI`; the remaining pair is solved as a
//! 2x2 problem in its orthogonal complement, which keeps the basis orthonormal
//! when two eigenvalues coincide.

use std::f64::consts::PI;

use crate::{Mat3, Vec3};

/// Eigenvalues sorted descending and the matching orthonormal eigenvectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3 {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

pub fn symmetric_eigen(a: &Mat3) -> SymmetricEigen3 {
    let a = (a + a.transpose()) * 0.5;
    let values = eigenvalues(&a);
    let (l1, l2, l3) = (values[0], values[1], values[2]);
    let mut vectors = [Vec3::zeros(); 3];
    // Solve the isolated eigenvalue first.
    let (first, rest) = if l1 - l2 >= l2 - l3 { (0, [1, 2]) } else { (2, [0, 1]) };
    let v = null_vector(&a, values[first]);
    vectors[first] = v;
    let (u, w) = complement_basis(&v);
    let (a11, a12, a22) = (
        u.dot(&(a * u)),
        u.dot(&(a * w)),
        w.dot(&(a * w)),
    );
    // 2x2 symmetric eigenproblem; rotation angle from the double-angle form.
    let phi = 0.5 * (2.0 * a12).atan2(a11 - a22);
    let (s, c) = phi.sin_cos();
    let e_major = u * c + w * s;
    let e_minor = -u * s + w * c;
    let major = e_major.dot(&(a * e_major));
    let minor = e_minor.dot(&(a * e_minor));
    let (hi, lo, vhi, vlo) = if major >= minor {
        (major, minor, e_major, e_minor)
    } else {
        (minor, major, e_minor, e_major)
    };
    let mut values = values;
    values[rest[0]] = hi;
    values[rest[1]] = lo;
    vectors[rest[0]] = vhi;
    vectors[rest[1]] = vlo;
    // The 2x2 refinement can reorder against the isolated value by rounding.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    SymmetricEigen3 {
        values: order.map(|i| values[i]),
        vectors: order.map(|i| vectors[i]),
    }
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn eigenvalues(a: &Mat3) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    if p2 == 0.0 {
        return [q; 3];
    }
    let p = (p2 / 6.0).sqrt();
    let b = (a - Mat3::identity() * q) / p;
    let half_det = (b.determinant() * 0.5).clamp(-1.0, 1.0);
    let phi = half_det.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut v = [e1, e2, e3];
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

fn null_vector(a: &Mat3, lambda: f64) -> Vec3 {
    let m = a - Mat3::identity() * lambda;
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
        .copied()
        .unwrap();
    let n = best.norm();
    if n > 0.0 {
        best / n
    } else {
        // All rows parallel or zero: any vector orthogonal to the row space works.
        let r = [r0, r1, r2]
            .into_iter()
            .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))
            .unwrap();
        if r.norm_squared() == 0.0 {
            Vec3::x()
        } else {
            complement_basis(&r.normalize()).0
        }
    }
}

/// Two unit vectors completing `v` to a right-handed orthonormal basis.
pub fn complement_basis(v: &Vec3) -> (Vec3, Vec3) {
    let helper = if v.x.abs() <= v.y.abs() && v.x.abs() <= v.z.abs() {
        Vec3::x()
    } else if v.y.abs() <= v.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = v.cross(&helper).normalize();
    let w = v.cross(&u);
    (u, w)
}
