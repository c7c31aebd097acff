//! Edge-length refinement by midpoint splitting.
//!
//! Faces whose three edges are too long are split four ways; a face with two
//! long edges has its third edge marked as well, and a face with exactly one
//! long edge is bisected through that edge's midpoint. Rounds repeat until no
//! edge exceeds the bound. Inserted vertices sit on flat faces, so the area is
//! unchanged, but they are interpolated points rather than material points of
//! any flow that produced the input.

use std::collections::{HashMap, HashSet};

use super::{midpoint, norm, sub, Polyline, TriMesh, P3};
use crate::error::{invalid, Error, Result};

const MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone)]
pub struct Refined<T> {
    pub geometry: T,
    /// True when any vertex was inserted.
    pub interpolated: bool,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn refine(m: &TriMesh, max_edge_length: f64) -> Result<Refined<TriMesh>> {
    if !(max_edge_length > 0.0) {
        return invalid("max_edge_length must be positive");
    }
    let mut v: Vec<P3> = m.vertices().to_vec();
    let mut f: Vec<[usize; 3]> = m.faces().to_vec();
    let mut inserted = false;
    for _ in 0..MAX_ROUNDS {
        let mut marked: HashSet<(usize, usize)> = HashSet::new();
        for t in &f {
            for c in 0..3 {
                let (a, b) = (t[c], t[(c + 1) % 3]);
                if norm(sub(v[a], v[b])) > max_edge_length {
                    marked.insert(key(a, b));
                }
            }
        }
        if marked.is_empty() {
            return Ok(Refined { geometry: TriMesh::new(v, f)?, interpolated: inserted });
        }
        inserted = true;
        loop {
            let mut changed = false;
            for t in &f {
                let e = [key(t[0], t[1]), key(t[1], t[2]), key(t[2], t[0])];
                if e.iter().filter(|k| marked.contains(k)).count() == 2 {
                    e.iter().for_each(|k| {
                        marked.insert(*k);
                    });
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<P3>| -> usize {
            *mids.entry(key(a, b)).or_insert_with(|| {
                v.push(midpoint(v[a], v[b]));
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(f.len() * 2);
        for &t in &f {
            let hit: Vec<usize> = (0..3).filter(|&c| marked.contains(&key(t[c], t[(c + 1) % 3]))).collect();
            match hit.len() {
                0 => next.push(t),
                1 => {
                    let c = hit[0];
                    let (a, b, o) = (t[c], t[(c + 1) % 3], t[(c + 2) % 3]);
                    let m = mid(a, b, &mut v);
                    next.push([a, m, o]);
                    next.push([m, b, o]);
                }
                3 => {
                    let [a, b, c] = t;
                    let (ab, bc, ca) = (mid(a, b, &mut v), mid(b, c, &mut v), mid(c, a, &mut v));
                    next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
                }
                _ => unreachable!("closure leaves 0, 1 or 3 marked edges per face"),
            }
        }
        f = next;
    }
    Err(Error::Internal(format!("refinement did not converge in {MAX_ROUNDS} rounds")))
}

/// Splits every segment longer than the bound into equal pieces.
pub fn refine_polyline(c: &Polyline, max_edge_length: f64) -> Result<Refined<Polyline>> {
    if !(max_edge_length > 0.0) {
        return invalid("max_edge_length must be positive");
    }
    let mut out = Vec::with_capacity(c.len());
    let mut inserted = false;
    for i in 0..c.len() {
        let (a, b) = c.segment(i);
        let pieces = (norm(sub(b, a)) / max_edge_length).ceil().max(1.0) as usize;
        out.push(a);
        for s in 1..pieces {
            let t = s as f64 / pieces as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
            inserted = true;
        }
    }
    Ok(Refined { geometry: Polyline::new(c.dim(), out)?, interpolated: inserted })
}
