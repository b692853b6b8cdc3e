//! Procedural test meshes: platonic solids, icospheres, flat patches,
//! cylinders and subdivided cubes. All are oriented with outward normals.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{MeshError, TriMesh};
use crate::Vec3;

pub fn tetrahedron() -> TriMesh {
    let pos = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::build(pos, faces).expect("tetrahedron is valid")
}

pub fn octahedron() -> TriMesh {
    let pos = vec![
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriMesh::build(pos, faces).expect("octahedron is valid")
}

/// Icosahedron subdivided `levels` times with vertices projected onto the
/// sphere of the given radius. Face count is `20 * 4^levels`.
pub fn icosphere(radius: f64, levels: u32) -> Result<TriMesh, MeshError> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pos: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, pos: &mut Vec<Vec3>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                pos.push(((pos[a] + pos[b]) * 0.5).normalize());
                pos.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut pos);
            let bc = midpoint(b, c, &mut pos);
            let ca = midpoint(c, a, &mut pos);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for p in &mut pos {
        *p *= radius;
    }
    TriMesh::build(pos, faces)
}

/// Regular grid in the plane `z = 0` with `(nx + 1) * (ny + 1)` vertices at
/// `(i h, j h)`; vertex `(i, j)` has index `j (nx + 1) + i`. Normal is `+z`.
pub fn flat_grid(nx: usize, ny: usize, h: f64) -> Result<TriMesh, MeshError> {
    let mut pos = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            pos.push(Vec3::new(i as f64 * h, j as f64 * h, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh::build(pos, faces)
}

/// Flat disk in `z = 0` made of `rings` concentric rings; ring `k` has `6k`
/// vertices at radius `k * radius / rings`. Vertex 0 is the centre and the
/// mesh has `6 rings^2` triangles. Normal is `+z`.
pub fn flat_disk(radius: f64, rings: usize) -> Result<TriMesh, MeshError> {
    disk_like(radius, rings, |_| 0.0)
}

/// Disk-topology patch over the plane with heights `z = f(x, y)`.
pub fn height_patch(
    radius: f64,
    rings: usize,
    f: impl Fn(&Vec3) -> f64,
) -> Result<TriMesh, MeshError> {
    disk_like(radius, rings, f)
}

fn disk_like(radius: f64, rings: usize, f: impl Fn(&Vec3) -> f64) -> Result<TriMesh, MeshError> {
    let h = radius / rings as f64;
    let mut pos = vec![Vec3::zeros()];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(pos.len());
        let n = 6 * k;
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            pos.push(Vec3::new(k as f64 * h * a.cos(), k as f64 * h * a.sin(), 0.0));
        }
    }
    for p in &mut pos {
        p.z = f(p);
    }
    let mut faces = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        faces.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let (n0, n1) = (6 * (k - 1), 6 * k);
        let (s0, s1) = (ring_start[k - 1], ring_start[k]);
        let inner = |i: usize| s0 + i % n0;
        let outer = |j: usize| s1 + j % n1;
        let (mut i, mut j) = (0, 0);
        while i < n0 || j < n1 {
            let next_inner = (i + 1) as f64 / n0 as f64;
            let next_outer = (j + 1) as f64 / n1 as f64;
            if j < n1 && (i == n0 || next_outer <= next_inner) {
                faces.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            } else {
                faces.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            }
        }
    }
    TriMesh::build(pos, faces)
}

/// Open cylindrical tube around the z-axis, `z ∈ [-length/2, length/2]`,
/// with `around` vertices per ring and `along` quad rows.
pub fn cylinder(
    radius: f64,
    length: f64,
    around: usize,
    along: usize,
) -> Result<TriMesh, MeshError> {
    let mut pos = Vec::with_capacity(around * (along + 1));
    for l in 0..=along {
        let z = -0.5 * length + length * l as f64 / along as f64;
        // Stagger alternate rings so the triangulation is closer to isotropic.
        let shift = if l % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..around {
            let a = 2.0 * PI * (j as f64 + shift) / around as f64;
            pos.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let id = |l: usize, j: usize| l * around + j % around;
    let mut faces = Vec::with_capacity(2 * around * along);
    for l in 0..along {
        for j in 0..around {
            if l % 2 == 0 {
                faces.push([id(l, j), id(l, j + 1), id(l + 1, j)]);
                faces.push([id(l, j + 1), id(l + 1, j + 1), id(l + 1, j)]);
            } else {
                faces.push([id(l, j), id(l, j + 1), id(l + 1, j + 1)]);
                faces.push([id(l, j), id(l + 1, j + 1), id(l + 1, j)]);
            }
        }
    }
    TriMesh::build(pos, faces)
}

/// Surface of the cube `[-half, half]^3` with an `n x n` quad grid per face.
/// Returns the mesh and, per vertex, its integer lattice coordinates in `0..=n`.
pub fn cube(half: f64, n: usize) -> Result<(TriMesh, Vec<[usize; 3]>), MeshError> {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut lattice = Vec::new();
    let mut pos = Vec::new();
    let mut vid = |l: [usize; 3], pos: &mut Vec<Vec3>| -> usize {
        *index.entry(l).or_insert_with(|| {
            lattice.push(l);
            let c = |i: usize| -half + 2.0 * half * i as f64 / n as f64;
            pos.push(Vec3::new(c(l[0]), c(l[1]), c(l[2])));
            pos.len() - 1
        })
    };
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, n] {
            for u in 0..n {
                for w in 0..n {
                    let corner = |du: usize, dw: usize| {
                        let mut l = [0; 3];
                        l[axis] = side;
                        l[b] = u + du;
                        l[c] = w + dw;
                        l
                    };
                    let q = [
                        vid(corner(0, 0), &mut pos),
                        vid(corner(1, 0), &mut pos),
                        vid(corner(1, 1), &mut pos),
                        vid(corner(0, 1), &mut pos),
                    ];
                    if side == n {
                        faces.push([q[0], q[1], q[2]]);
                        faces.push([q[0], q[2], q[3]]);
                    } else {
                        faces.push([q[0], q[2], q[1]]);
                        faces.push([q[0], q[3], q[2]]);
                    }
                }
            }
        }
    }
    Ok((TriMesh::build(pos, faces)?, lattice))
}
