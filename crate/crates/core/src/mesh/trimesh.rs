//! Closed, consistently oriented triangle meshes in R^3.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{cross, dot, norm, sub, LkReport, CONVENTION, P3};
use crate::error::{Error, Result};

/// Undirected edge `v[0] < v[1]`. `faces[0]` traverses it as `v[0] -> v[1]`,
/// `faces[1]` as `v[1] -> v[0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub v: [usize; 2],
    pub faces: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<P3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    genus: i64,
    components: usize,
}

impl TriMesh {
    /// Builds the edge table and checks that the mesh is a closed, oriented
    /// 2-manifold without unused or non-finite vertices.
    pub fn new(vertices: Vec<P3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if faces.is_empty() {
            return Err(Error::Validation("mesh has no faces".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Validation(format!("vertex {i} is not finite")));
            }
        }
        let mut used = vec![false; nv];
        for (f, t) in faces.iter().enumerate() {
            if t.iter().any(|&i| i >= nv) {
                return Err(Error::Validation(format!("face {f} references a vertex outside 0..{nv}")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Validation(format!("face {f} repeats a vertex")));
            }
            let n = cross(sub(vertices[t[1]], vertices[t[0]]), sub(vertices[t[2]], vertices[t[0]]));
            if norm(n) == 0.0 {
                return Err(Error::Validation(format!("face {f} has zero area")));
            }
            t.iter().for_each(|&i| used[i] = true);
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!("vertex {i} is not referenced by any face")));
        }

        // (min, max) -> (forward faces, backward faces)
        let mut table: HashMap<(usize, usize), (Vec<usize>, Vec<usize>)> = HashMap::new();
        for (f, t) in faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (t[c], t[(c + 1) % 3]);
                let e = table.entry((a.min(b), a.max(b))).or_default();
                if a < b {
                    e.0.push(f);
                } else {
                    e.1.push(f);
                }
            }
        }
        let mut keys: Vec<_> = table.keys().copied().collect();
        keys.sort_unstable();
        let mut edges = Vec::with_capacity(keys.len());
        for k in keys {
            let (fwd, bwd) = &table[&k];
            match fwd.len() + bwd.len() {
                1 => return Err(Error::Validation(format!("boundary edge ({}, {})", k.0, k.1))),
                2 => {}
                c => {
                    return Err(Error::Validation(format!(
                        "non-manifold edge ({}, {}) shared by {c} faces",
                        k.0, k.1
                    )))
                }
            }
            if fwd.len() != 1 {
                return Err(Error::Validation(format!(
                    "inconsistent orientation at edge ({}, {})",
                    k.0, k.1
                )));
            }
            edges.push(Edge { v: [k.0, k.1], faces: [fwd[0], bwd[0]] });
        }

        let mut parent: Vec<usize> = (0..faces.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &edges {
            let (a, b) = (find(&mut parent, e.faces[0]), find(&mut parent, e.faces[1]));
            parent[a.max(b)] = a.min(b);
        }
        let components = (0..faces.len()).filter(|&f| find(&mut parent, f) == f).count();
        let chi = nv as i64 - edges.len() as i64 + faces.len() as i64;
        let twice = 2 * components as i64 - chi;
        if twice % 2 != 0 || twice < 0 {
            return Err(Error::Validation(format!("Euler characteristic {chi} is not that of an oriented surface")));
        }
        Ok(TriMesh { vertices, faces, edges, genus: twice / 2, components })
    }

    pub fn vertices(&self) -> &[P3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Total genus (summed over connected components).
    pub fn genus(&self) -> i64 {
        self.genus
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Replace vertex positions, keeping the connectivity (advection).
    pub fn set_vertices(&mut self, vertices: Vec<P3>) {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        self.vertices = vertices;
    }

    pub fn triangle(&self, f: usize) -> [P3; 3] {
        let t = self.faces[f];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Area-weighted normal (twice the area in length).
    pub fn face_normal_raw(&self, f: usize) -> P3 {
        let [a, b, c] = self.triangle(f);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_normal(&self, f: usize) -> P3 {
        let n = self.face_normal_raw(f);
        super::scale(n, 1.0 / norm(n))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| 0.5 * norm(self.face_normal_raw(f))).sum()
    }

    /// Signed dihedral angle at an edge; positive where the surface is convex
    /// with respect to its orientation normal.
    pub fn dihedral(&self, e: &Edge) -> f64 {
        let n0 = self.face_normal(e.faces[0]);
        let n1 = self.face_normal(e.faces[1]);
        let d = sub(self.vertices[e.v[1]], self.vertices[e.v[0]]);
        dot(cross(n0, n1), d).atan2(dot(n0, n1) * norm(d))
    }

    /// `sum_e len(e) theta(e)`; tends to the integral of `k1 + k2`.
    pub fn integral_mean_curvature(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| norm(sub(self.vertices[e.v[1]], self.vertices[e.v[0]])) * self.dihedral(e))
            .sum()
    }

    /// Interior angles of face `f` at its three corners.
    pub fn corner_angles(&self, f: usize) -> [f64; 3] {
        let p = self.triangle(f);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let u = sub(p[(c + 1) % 3], p[c]);
            let v = sub(p[(c + 2) % 3], p[c]);
            out[c] = norm(cross(u, v)).atan2(dot(u, v));
        }
        out
    }

    /// Per-vertex angle defect `2 pi - sum of incident angles`.
    pub fn angle_defects(&self) -> Vec<f64> {
        let mut d = vec![2.0 * PI; self.vertices.len()];
        for (f, t) in self.faces.iter().enumerate() {
            let a = self.corner_angles(f);
            for c in 0..3 {
                d[t[c]] -= a[c];
            }
        }
        d
    }

    pub fn angle_defect_total(&self) -> f64 {
        self.angle_defects().iter().sum()
    }

    /// Signed enclosed volume; positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                dot(a, cross(b, c))
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn edge_length_range(&self) -> (f64, f64) {
        self.edges.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), e| {
            let l = norm(sub(self.vertices[e.v[1]], self.vertices[e.v[0]]));
            (lo.min(l), hi.max(l))
        })
    }

    /// Tube-normalized curvatures: `L_0` from the angle defect, the two-sided
    /// `L_1 = 0`, `L_2` the area.
    pub fn lk(&self) -> LkReport {
        let chi = self.angle_defect_total() / (2.0 * PI);
        LkReport {
            convention: CONVENTION,
            l: vec![chi, 0.0, self.area()],
            h_int: Some(self.integral_mean_curvature()),
            chi_combinatorial: Some(chi),
            genus: Some(self.genus),
            turning_number: None,
        }
    }

    pub fn transformed(&self, f: impl Fn(P3) -> P3) -> TriMesh {
        let mut m = self.clone();
        m.vertices = self.vertices.iter().map(|&p| f(p)).collect();
        m
    }
}
