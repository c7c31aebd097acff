//! Test and experiment geometries.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{midpoint, norm, scale, Polyline, TriMesh, P3};
use crate::error::{invalid, Result};

/// Icosahedron subdivided `level` times, vertices projected onto the sphere
/// of the given radius. Outward orientation.
pub fn icosphere(level: u32, radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<P3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    for p in v.iter_mut() {
        *p = scale(*p, 1.0 / norm(*p));
    }
    let mut f: Vec<[usize; 3]> = vec![
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
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<P3>| -> usize {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = midpoint(v[a], v[b]);
                v.push(scale(m, 1.0 / norm(m)));
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * f.len());
        for &[a, b, c] in &f {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    let v = v.into_iter().map(|p| scale(p, radius)).collect();
    TriMesh::new(v, f).expect("icosphere is a closed oriented mesh")
}

/// Regular polygon inscribed in the circle of given radius, counterclockwise
/// in the `xy` plane, as a curve in R^`dim`.
pub fn regular_polygon(vertices: usize, radius: f64, dim: usize) -> Result<Polyline> {
    if !(radius > 0.0) {
        return invalid("polygon radius must be positive");
    }
    let p = (0..vertices)
        .map(|i| {
            let (s, c) = (2.0 * PI * i as f64 / vertices as f64).sin_cos();
            [radius * c, radius * s, 0.0]
        })
        .collect();
    Polyline::new(dim, p)
}

/// Planar circle traversed twice (each pass offset by half a step so that no
/// vertex repeats).
pub fn circle_twice(per_turn: usize, radius: f64) -> Result<Polyline> {
    let n = 2 * per_turn;
    let p = (0..n)
        .map(|i| {
            let (s, c) = (2.0 * PI * (i as f64 + 0.5 * (i / per_turn) as f64) / per_turn as f64).sin_cos();
            [radius * c, radius * s, 0.0]
        })
        .collect();
    Polyline::new(2, p)
}

/// Torus of revolution about the z axis with `nu x nv` quads split into
/// triangles. Outward orientation.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let mut v = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let (su, cu) = (2.0 * PI * i as f64 / nu as f64).sin_cos();
        for j in 0..nv {
            let (sv, cv) = (2.0 * PI * j as f64 / nv as f64).sin_cos();
            v.push([(major + minor * cv) * cu, (major + minor * cv) * su, minor * sv]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + j % nv;
    let mut f = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    TriMesh::new(v, f).expect("torus is a closed oriented mesh")
}

/// A triangulated rectangle with a boundary; fails mesh validation.
pub fn open_strip_raw() -> (Vec<P3>, Vec<[usize; 3]>) {
    let n = 6;
    let mut v = Vec::new();
    for i in 0..n {
        v.push([i as f64, 0.0, 0.0]);
        v.push([i as f64, 1.0, 0.0]);
    }
    let mut f = Vec::new();
    for i in 0..n - 1 {
        let (a, b, c, d) = (2 * i, 2 * i + 2, 2 * i + 3, 2 * i + 1);
        f.push([a, b, c]);
        f.push([a, c, d]);
    }
    (v, f)
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron() -> TriMesh {
    let s = 1.0 / 3f64.sqrt();
    let v = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::new(v, f).expect("tetrahedron is a closed oriented mesh")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for level in 0..5 {
            let m = icosphere(level, 1.0);
            let f = 20 * 4usize.pow(level);
            assert_eq!(m.faces().len(), f);
            assert_eq!(m.vertices().len(), f / 2 + 2);
            assert!(m.signed_volume() > 0.0);
        }
        assert_eq!(icosphere(4, 1.0).vertices().len(), 2562);
    }

    #[test]
    fn torus_and_tetrahedron_are_outward() {
        assert!(torus(1.0, 0.3, 24, 12).signed_volume() > 0.0);
        assert!(tetrahedron().signed_volume() > 0.0);
    }
}
