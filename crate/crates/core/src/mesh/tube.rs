//! Monte Carlo tube volumes and Weyl-coefficient fits.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::bvh::{closest_on_segment, closest_on_triangle, point_segment_dist2, point_triangle_dist2, Bvh};
use super::{cross, dot, norm, sub, Geometry, P3};
use crate::error::{invalid, Error, Result};
use crate::rng;

const BLOCK_SAMPLES: u64 = 1 << 16;
/// Cells per axis in one coarse block of the stratified grid.
const COARSE: usize = 8;

/// Volume of the unit ball in R^m.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(m - 2) * 2.0 * PI / m as f64,
    }
}

/// Exact Euclidean distance to a mesh or polyline.
#[derive(Debug, Clone)]
pub struct DistanceField {
    dim: usize,
    segments: bool,
    prims: Vec<[P3; 3]>,
    bvh: Bvh,
}

impl DistanceField {
    pub fn new(g: &Geometry) -> DistanceField {
        let (dim, segments, prims): (usize, bool, Vec<[P3; 3]>) = match g {
            Geometry::Mesh(m) => (3, false, (0..m.faces().len()).map(|f| m.triangle(f)).collect()),
            Geometry::Curve(c) => (
                c.dim(),
                true,
                (0..c.len())
                    .map(|i| {
                        let (a, b) = c.segment(i);
                        [a, b, b]
                    })
                    .collect(),
            ),
        };
        let boxes: Vec<(P3, P3)> = prims
            .iter()
            .map(|t| {
                let mut lo = t[0];
                let mut hi = t[0];
                for p in &t[1..] {
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            })
            .collect();
        DistanceField { dim, segments, bvh: Bvh::build(&boxes), prims }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn prim_dist2(&self, i: usize, p: P3) -> f64 {
        let t = &self.prims[i];
        if self.segments {
            point_segment_dist2(p, t[0], t[1])
        } else {
            point_triangle_dist2(p, t[0], t[1], t[2])
        }
    }

    /// Distance to the geometry, or `f64::INFINITY` when it exceeds `cap`.
    pub fn distance(&self, p: P3, cap: f64) -> f64 {
        match self.bvh.nearest(p, cap * cap, |i| Some(self.prim_dist2(i, p))) {
            Some((_, d2)) => d2.sqrt(),
            None => f64::INFINITY,
        }
    }

    /// Distance and closest point, or `None` beyond `cap`.
    pub fn closest(&self, p: P3, cap: f64) -> Option<(f64, P3)> {
        let (i, d2) = self.bvh.nearest(p, cap * cap, |i| Some(self.prim_dist2(i, p)))?;
        let t = &self.prims[i];
        let q = if self.segments { closest_on_segment(p, t[0], t[1]) } else { closest_on_triangle(p, t[0], t[1], t[2]) };
        Some((d2.sqrt(), q))
    }

    /// Whether the distance is at most `r`.
    pub fn within(&self, p: P3, r: f64) -> bool {
        self.bvh.any_within(p, r * r, |i| self.prim_dist2(i, p))
    }

    /// Bounding box, with unused coordinates collapsed for planar curves.
    pub fn bounds(&self) -> (P3, P3) {
        self.bvh.bounds()
    }
}

/// Minimal cosine between a vertex normal and the direction to a face that
/// counts as an opposing sheet.
const OPPOSING_COS: f64 = 0.9;

/// Reach estimate: the smaller of the minimal discrete curvature radius and
/// half the smallest distance between sheets of the geometry that face each
/// other. Sheet separations beyond `cap` are not searched, so the result is
/// at most `cap / 2`.
pub fn reach_estimate(g: &Geometry, cap: f64) -> f64 {
    let field = DistanceField::new(g);
    match g {
        Geometry::Mesh(m) => {
            let fnorm: Vec<P3> = (0..m.faces().len()).map(|f| m.face_normal(f)).collect();
            let mut vn = vec![[0.0; 3]; m.vertices().len()];
            for (f, t) in m.faces().iter().enumerate() {
                let n = m.face_normal_raw(f);
                for &v in t {
                    vn[v] = super::add(vn[v], n);
                }
            }
            // osculating sphere through each edge neighbor, tangent to the
            // vertex normal plane
            let mut kappa = 0.0_f64;
            for e in m.edges() {
                let (a, b) = (e.v[0], e.v[1]);
                let d = sub(m.vertices()[b], m.vertices()[a]);
                let l2 = dot(d, d);
                for (v, s) in [(a, 1.0), (b, -1.0)] {
                    let n = vn[v];
                    kappa = kappa.max(2.0 * (s * dot(n, d)).abs() / (norm(n) * l2));
                }
            }
            let r_curv = 1.0 / kappa;
            let stride = (m.vertices().len() / 2000).max(1);
            let mut sep = cap;
            for v in (0..m.vertices().len()).step_by(stride) {
                let p = m.vertices()[v];
                let nv = vn[v];
                let nl = norm(nv);
                let hit = field.bvh.nearest(p, sep * sep, |f| {
                    let [a, b, c] = m.triangle(f);
                    let to = sub([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0, (a[2] + b[2] + c[2]) / 3.0], p);
                    let facing = dot(fnorm[f], nv) < 0.0 && dot(to, nv).abs() >= OPPOSING_COS * norm(to) * nl;
                    facing.then(|| field.prim_dist2(f, p))
                });
                if let Some((_, d2)) = hit {
                    sep = d2.sqrt();
                }
            }
            r_curv.min(0.5 * sep)
        }
        Geometry::Curve(c) => {
            let n = c.len();
            let pts = c.points();
            let seg_len: Vec<f64> = (0..n).map(|i| norm(sub(pts[(i + 1) % n], pts[i]))).collect();
            let mut r_curv = f64::INFINITY;
            for i in 0..n {
                let a = sub(pts[i], pts[(i + n - 1) % n]);
                let b = sub(pts[(i + 1) % n], pts[i]);
                let phi = norm(cross(a, b)).atan2(dot(a, b));
                if phi > 0.0 {
                    r_curv = r_curv.min(0.5 * (seg_len[(i + n - 1) % n] + seg_len[i]) / phi);
                }
            }
            let mut arc = vec![0.0; n + 1];
            for i in 0..n {
                arc[i + 1] = arc[i] + seg_len[i];
            }
            let total = arc[n];
            let window = (PI * r_curv).min(0.5 * total);
            let stride = (n / 1024).max(1);
            let mut sep = cap;
            for v in (0..n).step_by(stride) {
                let p = pts[v];
                let hit = field.bvh.nearest(p, sep * sep, |s| {
                    let mid = 0.5 * (arc[s] + arc[s + 1]);
                    let gap = (mid - arc[v]).abs();
                    let gap = gap.min(total - gap) - 0.5 * seg_len[s];
                    (gap > window).then(|| field.prim_dist2(s, p))
                });
                if let Some((_, d2)) = hit {
                    sep = d2.sqrt();
                }
            }
            r_curv.min(0.5 * sep)
        }
    }
}

/// Rejects radii above half the estimated reach.
pub fn check_reach(g: &Geometry, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return invalid("tube radius must be positive");
    }
    let reach = reach_estimate(g, 4.0 * rho);
    if rho > 0.5 * reach {
        return invalid(format!("tube radius {rho} exceeds half the estimated reach {reach:.4}"));
    }
    Ok(reach)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub samples: u64,
}

fn sampling_box(field: &DistanceField, pad: f64) -> (P3, P3) {
    let (mut lo, mut hi) = field.bounds();
    for k in 0..field.dim {
        lo[k] -= pad;
        hi[k] += pad;
    }
    (lo, hi)
}

/// Tube volume by uniform rejection sampling of the bounding box of the
/// inflated geometry. Deterministic for a given seed, independent of the
/// thread count.
pub fn tube_volume_mc(g: &Geometry, rho: f64, samples: u64, seed: u64) -> Result<TubeEstimate> {
    check_reach(g, rho)?;
    if samples < 2 {
        return invalid("need at least two samples");
    }
    let field = DistanceField::new(g);
    let (lo, hi) = sampling_box(&field, rho);
    let dim = field.dim;
    let box_vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
    let blocks = samples.div_ceil(BLOCK_SAMPLES);
    let counts = rng::map_replicas(blocks as usize, |b| {
        let mut r = rng::stream(seed, b);
        let len = BLOCK_SAMPLES.min(samples - b * BLOCK_SAMPLES);
        let mut hits = 0u64;
        for _ in 0..len {
            let mut p = [0.0; 3];
            for k in 0..dim {
                p[k] = lo[k] + (hi[k] - lo[k]) * r.random::<f64>();
            }
            hits += field.within(p, rho) as u64;
        }
        hits
    });
    let hits: u64 = counts.iter().sum();
    let p = hits as f64 / samples as f64;
    Ok(TubeEstimate {
        volume: box_vol * p,
        std_error: box_vol * (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
    })
}

/// Stratified estimates of tube volumes at several radii and the fitted
/// tube-formula coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeFit {
    pub rhos: Vec<f64>,
    pub volumes: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Coefficients of `rho^1 ..= rho^n`.
    pub coefficients: Vec<f64>,
    pub coefficient_se: Vec<f64>,
    /// `L_0 ..= L_(n-1)`.
    pub l: Vec<f64>,
    pub l_se: Vec<f64>,
    pub replicates: usize,
    pub evaluations: u64,
    pub cell: f64,
}

/// Gradient components below this are replaced by zero inside
/// [`cube_fraction`], which keeps its inclusion-exclusion well conditioned.
/// The induced error in the fraction is of order `(g_k h)^2` times the
/// density derivative, far below sampling noise.
const MIN_GRADIENT: f64 = 1e-3;

/// Fraction of the cube `[-h/2, h/2]^d` where `<g, y> <= t`.
pub fn cube_fraction(g: &[f64], h: f64, t: f64) -> f64 {
    let a: Vec<f64> = g.iter().filter(|x| x.abs() >= MIN_GRADIENT).map(|x| x.abs() * h).collect();
    let big_t = t + 0.5 * a.iter().sum::<f64>();
    let total: f64 = a.iter().sum();
    if big_t <= 0.0 {
        return 0.0;
    }
    if big_t >= total {
        return 1.0;
    }
    let k = a.len();
    let mut s = 0.0;
    for mask in 0..1usize << k {
        let shift: f64 = (0..k).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).sum();
        let r = big_t - shift;
        if r > 0.0 {
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * r.powi(k as i32);
        }
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    (s / (fact * a.iter().product::<f64>())).clamp(0.0, 1.0)
}

/// Volumes of the tubes `{d <= rho}` for all `rhos` on one randomly shifted
/// grid of cubic cells of side `cell`. Cells that cannot meet the largest tube
/// are skipped; every other cell gets an antithetic pair of uniform points and
/// the linearized distance at the cell center as a control variate.
fn stratified_volumes(field: &DistanceField, rhos: &[f64], cell: f64, seed: u64, rep: u64) -> (Vec<f64>, u64) {
    let dim = field.dim;
    let rmax = rhos.iter().cloned().fold(0.0, f64::max);
    let mut shift_rng = rng::substream(seed, rep, 0xFFFF);
    let (mut lo, hi) = sampling_box(field, rmax + cell);
    for k in 0..dim {
        lo[k] -= cell * shift_rng.random::<f64>();
    }
    let mut cells = [1usize; 3];
    for k in 0..dim {
        cells[k] = ((hi[k] - lo[k]) / cell).ceil() as usize;
    }
    let mut blocks = [1usize; 3];
    for k in 0..dim {
        blocks[k] = cells[k].div_ceil(COARSE);
    }
    let half_cell = 0.5 * cell * (dim as f64).sqrt();
    let half_block = COARSE as f64 * half_cell;
    let per_slab = rng::map_replicas(blocks[0], |bx| {
        let mut r = rng::substream(seed, rep, bx);
        let bx = bx as usize;
        let mut acc = vec![0.0; rhos.len()];
        let mut evals = 0u64;
        for by in 0..blocks[1] {
            for bz in 0..blocks[2] {
                let b = [bx, by, bz];
                let mut c = [0.0; 3];
                for k in 0..dim {
                    c[k] = lo[k] + (b[k] * COARSE) as f64 * cell + 0.5 * COARSE as f64 * cell;
                }
                evals += 1;
                if field.distance(c, rmax + half_block) > rmax + half_block {
                    continue;
                }
                let span = |k: usize| if k < dim { COARSE } else { 1 };
                for i in 0..span(0) {
                    for j in 0..span(1) {
                        for l in 0..span(2) {
                            let idx = [b[0] * COARSE + i, b[1] * COARSE + j, b[2] * COARSE + l];
                            let mut cc = [0.0; 3];
                            for k in 0..dim {
                                cc[k] = lo[k] + (idx[k] as f64 + 0.5) * cell;
                            }
                            evals += 1;
                            let Some((dc, qc)) = field.closest(cc, rmax + half_cell) else {
                                continue;
                            };
                            // linearized distance d(c) + <g, x - c>, with small
                            // gradient components dropped; its exact cell
                            // fraction makes it a control variate
                            let mut g = [0.0; 3];
                            if dc > 0.0 {
                                for k in 0..dim {
                                    let x = (cc[k] - qc[k]) / dc;
                                    g[k] = x;
                                }
                            }
                            let mut u = [0.0; 3];
                            let mut p = [0.0; 3];
                            let mut q = [0.0; 3];
                            for k in 0..dim {
                                u[k] = (r.random::<f64>() - 0.5) * cell;
                                p[k] = cc[k] + u[k];
                                q[k] = cc[k] - u[k];
                            }
                            let gu = dot(g, u);
                            let dp = field.distance(p, rmax);
                            let dq = field.distance(q, rmax);
                            evals += 2;
                            for (a, &rho) in acc.iter_mut().zip(rhos) {
                                let t = rho - dc;
                                let hits = (dp <= rho) as i32 + (dq <= rho) as i32;
                                let lin = (gu <= t) as i32 + (-gu <= t) as i32;
                                *a += cube_fraction(&g[..dim], cell, t) + 0.5 * (hits - lin) as f64;
                            }
                        }
                    }
                }
            }
        }
        (acc, evals)
    });
    let vol = cell.powi(dim as i32);
    let mut total = vec![0.0; rhos.len()];
    let mut evals = 0;
    for (a, e) in per_slab {
        for (t, x) in total.iter_mut().zip(a) {
            *t += x * vol;
        }
        evals += e;
    }
    (total, evals)
}

/// Fits `vol(rho) = sum_m c_m rho^m`, `m = 1..=n`, to stratified tube volumes
/// over `replicates` independent grid shifts. `L_(n-m) = c_m / omega_m`.
pub fn tube_fit(g: &Geometry, rhos: &[f64], cell: f64, replicates: usize, seed: u64) -> Result<TubeFit> {
    if rhos.len() < 3 || rhos.iter().any(|r| !(*r > 0.0)) {
        return invalid("need at least three positive radii");
    }
    if replicates < 2 || !(cell > 0.0) {
        return invalid("need at least two replicates and a positive cell size");
    }
    let rmax = rhos.iter().cloned().fold(0.0, f64::max);
    check_reach(g, rmax)?;
    let field = DistanceField::new(g);
    let n = field.dim;
    if rhos.len() < n {
        return invalid(format!("need at least {n} radii to fit {n} coefficients"));
    }
    let mut reps = Vec::with_capacity(replicates);
    let mut evaluations = 0;
    for r in 0..replicates {
        let (v, e) = stratified_volumes(&field, rhos, cell, seed, r as u64);
        reps.push(v);
        evaluations += e;
    }
    let k = rhos.len();
    let kf = replicates as f64;
    let mean: Vec<f64> = (0..k).map(|i| reps.iter().map(|v| v[i]).sum::<f64>() / kf).collect();
    let se: Vec<f64> = (0..k)
        .map(|i| (reps.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / (kf - 1.0) / kf).sqrt())
        .collect();
    let w: Vec<f64> = if se.iter().all(|s| *s > 0.0) { se.iter().map(|s| s.powi(-2)).collect() } else { vec![1.0; k] };
    // design in scaled radius for conditioning
    let x = DMatrix::from_fn(k, n, |i, j| (rhos[i] / rmax).powi(j as i32 + 1));
    let wx = DMatrix::from_fn(k, n, |i, j| w[i] * x[(i, j)]);
    let normal = x.transpose() * &wx;
    let solver = normal
        .cholesky()
        .ok_or_else(|| Error::Statistical("tube fit normal equations are singular".into()))?;
    let fit = |y: &[f64]| -> Vec<f64> {
        let b = solver.solve(&(wx.transpose() * DVector::from_column_slice(y)));
        (0..n).map(|j| b[j] / rmax.powi(j as i32 + 1)).collect()
    };
    let coefficients = fit(&mean);
    let per: Vec<Vec<f64>> = reps.iter().map(|v| fit(v)).collect();
    let coefficient_se: Vec<f64> = (0..n)
        .map(|j| (per.iter().map(|c| (c[j] - coefficients[j]).powi(2)).sum::<f64>() / (kf - 1.0) / kf).sqrt())
        .collect();
    let mut l = vec![0.0; n];
    let mut l_se = vec![0.0; n];
    for m in 1..=n {
        l[n - m] = coefficients[m - 1] / unit_ball_volume(m);
        l_se[n - m] = coefficient_se[m - 1] / unit_ball_volume(m);
    }
    Ok(TubeFit {
        rhos: rhos.to_vec(),
        volumes: mean,
        std_errors: se,
        coefficients,
        coefficient_se,
        l,
        l_se,
        replicates,
        evaluations,
        cell,
    })
}
