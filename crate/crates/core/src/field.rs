//! Track B noise: random-Fourier-feature realization of the divergence-free
//! Brownian velocity field.
//!
//! With directions `t_m` uniform on the sphere and frequencies `ρ_m ~ F/μ₀`,
//!
//! `ΔU(x) = σ Σ_m [Δa_m cos(ρ_m⟨t_m,x⟩) + Δb_m sin(ρ_m⟨t_m,x⟩)]`,
//!
//! where `Δa_m, Δb_m` are Brownian increments in `t_m⊥` and `σ = √(μ₀/M)`.
//! Each feature owns its own random stream, so the first `M` features of a
//! realization with `2M` features coincide with the `M`-feature realization.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg;
use crate::rng::{self, Stream};
use crate::spectral::{sphere_point, SpectralMeasure};

/// Frozen feature set of one flow realization plus its Brownian coefficients.
#[derive(Debug, Clone)]
pub struct FourierField {
    pub n: usize,
    pub features: usize,
    pub dirs: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    /// Orthonormal basis of `t_m⊥` (n-1 vectors per feature).
    pub basis: Vec<Vec<Vec<f64>>>,
    pub sigma: f64,
    /// Accumulated coefficients in the basis of `t_m⊥`.
    pub coeff_a: Vec<Vec<f64>>,
    pub coeff_b: Vec<Vec<f64>>,
    /// Wavevectors `ρ_m t_m`, flattened.
    pub wave: Vec<f64>,
    streams: Vec<Stream>,
}

/// Coefficient increments of one step, mapped to ambient coordinates:
/// `a[m n + i] = σ (E_m Δα_m)_i`, likewise `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldIncrement {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FourierField {
    pub fn sample(n: usize, features: usize, spectral: &SpectralMeasure, seed: u64) -> Result<Self> {
        if n < 2 {
            return invalid("field dimension must be at least 2");
        }
        if features == 0 {
            return invalid("at least one feature is required");
        }
        spectral.validate()?;
        let mu0 = spectral.mu0();
        let mut dirs = Vec::with_capacity(features);
        let mut rho = Vec::with_capacity(features);
        let mut basis = Vec::with_capacity(features);
        let mut streams = Vec::with_capacity(features);
        for m in 0..features {
            let mut s = rng::stream(seed, m as u64);
            let t = sphere_point(n, &mut s);
            let r = if mu0 > 0.0 { spectral.sample_rho(&mut s) } else { 0.0 };
            basis.push(linalg::orthonormal_complement(&t));
            dirs.push(t);
            rho.push(r);
            streams.push(s);
        }
        let wave = dirs.iter().zip(&rho).flat_map(|(t, r)| t.iter().map(move |x| x * r)).collect();
        Ok(FourierField {
            n,
            features,
            sigma: (mu0 / features as f64).sqrt(),
            coeff_a: vec![vec![0.0; n - 1]; features],
            coeff_b: vec![vec![0.0; n - 1]; features],
            dirs,
            rho,
            basis,
            wave,
            streams,
        })
    }

    /// Draw one set of coefficient increments over `dt` from the per-feature
    /// streams and add them to the accumulated coefficients.
    pub fn draw(&mut self, dt: f64) -> FieldIncrement {
        let n = self.n;
        let mut inc = FieldIncrement { n, a: vec![0.0; self.features * n], b: vec![0.0; self.features * n] };
        let s = dt.max(0.0).sqrt();
        for m in 0..self.features {
            let st = &mut self.streams[m];
            for c in 0..n - 1 {
                let da: f64 = st.sample::<f64, _>(StandardNormal) * s;
                let db: f64 = st.sample::<f64, _>(StandardNormal) * s;
                self.coeff_a[m][c] += da;
                self.coeff_b[m][c] += db;
                let e = &self.basis[m][c];
                for i in 0..n {
                    inc.a[m * n + i] += self.sigma * da * e[i];
                    inc.b[m * n + i] += self.sigma * db * e[i];
                }
            }
        }
        inc
    }

    /// One shared increment evaluated at every point.
    pub fn field_increment(&mut self, points: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
        let inc = self.draw(dt);
        points.iter().map(|x| inc.eval(self, x)).collect()
    }

    /// Stratonovich-Heun step of every point with one shared increment,
    /// evaluating sines and cosines directly.
    pub fn advect_heun(&mut self, points: &mut [Vec<f64>], dt: f64) {
        let inc = self.draw(dt);
        for x in points.iter_mut() {
            inc.heun_update(self, x);
        }
    }

    /// Phase `ρ_m ⟨t_m, x⟩`.
    #[inline]
    pub fn phase(&self, m: usize, x: &[f64]) -> f64 {
        linalg::dot(&self.wave[m * self.n..(m + 1) * self.n], x)
    }
}

impl FieldIncrement {
    /// `ΔU(x)`.
    pub fn eval(&self, f: &FourierField, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut u = vec![0.0; n];
        for m in 0..f.features {
            let (s, c) = f.phase(m, x).sin_cos();
            for i in 0..n {
                u[i] += c * self.a[m * n + i] + s * self.b[m * n + i];
            }
        }
        u
    }

    /// Jacobian `∂ΔU^i/∂x^j`, row-major.
    pub fn gradient(&self, f: &FourierField, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for m in 0..f.features {
            let (s, c) = f.phase(m, x).sin_cos();
            let k = &f.wave[m * n..(m + 1) * n];
            for i in 0..n {
                let amp = -s * self.a[m * n + i] + c * self.b[m * n + i];
                for j in 0..n {
                    g[i * n + j] += amp * k[j];
                }
            }
        }
        g
    }

    pub fn divergence(&self, f: &FourierField, x: &[f64]) -> f64 {
        let g = self.gradient(f, x);
        (0..self.n).map(|i| g[i * self.n + i]).sum()
    }

    /// `x <- x + ½ (ΔU(x) + ΔU(x + ΔU(x)))`.
    pub fn heun_update(&self, f: &FourierField, x: &mut [f64]) {
        let u1 = self.eval(f, x);
        let pred: Vec<f64> = x.iter().zip(&u1).map(|(a, b)| a + b).collect();
        let u2 = self.eval(f, &pred);
        for i in 0..self.n {
            x[i] += 0.5 * (u1[i] + u2[i]);
        }
    }
}

const TILE: usize = 32;
/// Steps between exact recomputation of the stored phasors.
const RESYNC: usize = 50;
/// Largest rotation angle for which the series below are accurate to ~1e-13.
const MAX_SERIES_ANGLE: f64 = 0.5;

/// `(cos δ, sin δ)` by truncated Taylor series, for small `δ`.
#[inline(always)]
fn small_rotation(d: f64) -> (f64, f64) {
    let d2 = d * d;
    let c = 1.0
        - d2 * (1.0 / 2.0 - d2 * (1.0 / 24.0 - d2 * (1.0 / 720.0 - d2 * (1.0 / 40320.0 - d2 * (1.0 / 3628800.0 - d2 * (1.0 / 479001600.0))))));
    let s = d
        * (1.0
            - d2 * (1.0 / 6.0 - d2 * (1.0 / 120.0 - d2 * (1.0 / 5040.0 - d2 * (1.0 / 362880.0 - d2 * (1.0 / 39916800.0))))));
    (c, s)
}

#[derive(Debug, Clone)]
struct Tile<const N: usize> {
    len: usize,
    x: [[f64; TILE]; N],
    /// `cos` and `sin` of every feature phase, feature-major.
    c: Vec<f64>,
    s: Vec<f64>,
}

/// Advects a fixed point set through a field, carrying `cos`/`sin` of every
/// phase and updating them by angle-addition instead of re-evaluating
/// trigonometric functions. Results match [`FourierField::advect_heun`]
/// to rounding.
#[derive(Debug, Clone)]
pub struct Advector<const N: usize> {
    tiles: Vec<Tile<N>>,
    steps: usize,
    exact: bool,
}

impl<const N: usize> Advector<N> {
    pub fn new(field: &FourierField, points: &[[f64; N]]) -> Self {
        assert_eq!(field.n, N, "field dimension mismatch");
        let m = field.features;
        let tiles = points
            .chunks(TILE)
            .map(|chunk| {
                let mut x = [[0.0; TILE]; N];
                for (p, pt) in chunk.iter().enumerate() {
                    for d in 0..N {
                        x[d][p] = pt[d];
                    }
                }
                let mut t = Tile { len: chunk.len(), x, c: vec![0.0; m * TILE], s: vec![0.0; m * TILE] };
                resync(field, &mut t);
                t
            })
            .collect();
        Advector { tiles, steps: 0, exact: false }
    }

    /// Force direct trigonometric evaluation on every step.
    pub fn exact(mut self) -> Self {
        self.exact = true;
        self
    }

    pub fn positions(&self) -> Vec<[f64; N]> {
        let mut out = Vec::new();
        for t in &self.tiles {
            for p in 0..t.len {
                let mut q = [0.0; N];
                for d in 0..N {
                    q[d] = t.x[d][p];
                }
                out.push(q);
            }
        }
        out
    }

    /// Draw one increment from `field` and take a Stratonovich-Heun step.
    pub fn step(&mut self, field: &mut FourierField, dt: f64) {
        let inc = field.draw(dt);
        // a displacement beyond ~10 standard deviations would leave the series range
        let rho_max = field.rho.iter().cloned().fold(0.0, f64::max);
        let typical = rho_max * field.sigma * (field.features as f64 * dt).sqrt();
        let exact = self.exact || 10.0 * typical > MAX_SERIES_ANGLE;
        self.steps += 1;
        let resync_now = exact || self.steps % RESYNC == 0;
        for t in self.tiles.iter_mut() {
            step_tile(field, &inc, t, exact);
            if resync_now {
                resync(field, t);
            }
        }
    }
}

fn resync<const N: usize>(field: &FourierField, t: &mut Tile<N>) {
    for m in 0..field.features {
        let k = &field.wave[m * N..(m + 1) * N];
        for p in 0..TILE {
            let mut ph = 0.0;
            for d in 0..N {
                ph += k[d] * t.x[d][p];
            }
            let (s, c) = ph.sin_cos();
            t.c[m * TILE + p] = c;
            t.s[m * TILE + p] = s;
        }
    }
}

fn step_tile<const N: usize>(field: &FourierField, inc: &FieldIncrement, t: &mut Tile<N>, exact: bool) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        unsafe { step_tile_avx2(field, inc, t, exact) };
        return;
    }
    step_tile_body(field, inc, t, exact);
}

/// Same code compiled with wider vectors. No fused multiply-adds are formed
/// implicitly, so results are bitwise identical to the portable build.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn step_tile_avx2<const N: usize>(field: &FourierField, inc: &FieldIncrement, t: &mut Tile<N>, exact: bool) {
    step_tile_body(field, inc, t, exact);
}

#[inline(always)]
fn step_tile_body<const N: usize>(field: &FourierField, inc: &FieldIncrement, t: &mut Tile<N>, exact: bool) {
    let mf = field.features;
    let mut u1 = [[0.0; TILE]; N];
    for m in 0..mf {
        let a = &inc.a[m * N..(m + 1) * N];
        let b = &inc.b[m * N..(m + 1) * N];
        let c: &[f64; TILE] = t.c[m * TILE..(m + 1) * TILE].try_into().unwrap();
        let s: &[f64; TILE] = t.s[m * TILE..(m + 1) * TILE].try_into().unwrap();
        for d in 0..N {
            let (ad, bd) = (a[d], b[d]);
            for ((u, &cp), &sp) in u1[d].iter_mut().zip(c).zip(s) {
                *u += cp * ad + sp * bd;
            }
        }
    }
    let mut u2 = [[0.0; TILE]; N];
    let mut delta = [0.0; TILE];
    let mut cd = [0.0; TILE];
    let mut sd = [0.0; TILE];
    for m in 0..mf {
        let a = &inc.a[m * N..(m + 1) * N];
        let b = &inc.b[m * N..(m + 1) * N];
        let k = &field.wave[m * N..(m + 1) * N];
        let c: &[f64; TILE] = t.c[m * TILE..(m + 1) * TILE].try_into().unwrap();
        let s: &[f64; TILE] = t.s[m * TILE..(m + 1) * TILE].try_into().unwrap();
        project(k, &u1, &mut delta);
        rotations(&delta, &mut cd, &mut sd, exact);
        for d in 0..N {
            let (ad, bd) = (a[d], b[d]);
            for p in 0..TILE {
                let cp = c[p] * cd[p] - s[p] * sd[p];
                let sp = s[p] * cd[p] + c[p] * sd[p];
                u2[d][p] += cp * ad + sp * bd;
            }
        }
    }
    let mut dx = [[0.0; TILE]; N];
    for d in 0..N {
        for p in 0..TILE {
            dx[d][p] = 0.5 * (u1[d][p] + u2[d][p]);
            t.x[d][p] += dx[d][p];
        }
    }
    if exact {
        return;
    }
    for m in 0..mf {
        let k = &field.wave[m * N..(m + 1) * N];
        project(k, &dx, &mut delta);
        rotations(&delta, &mut cd, &mut sd, false);
        let c: &mut [f64; TILE] = (&mut t.c[m * TILE..(m + 1) * TILE]).try_into().unwrap();
        let s: &mut [f64; TILE] = (&mut t.s[m * TILE..(m + 1) * TILE]).try_into().unwrap();
        for p in 0..TILE {
            let (c0, s0) = (c[p], s[p]);
            c[p] = c0 * cd[p] - s0 * sd[p];
            s[p] = s0 * cd[p] + c0 * sd[p];
        }
    }
}

#[inline(always)]
fn project<const N: usize>(k: &[f64], u: &[[f64; TILE]; N], out: &mut [f64; TILE]) {
    *out = [0.0; TILE];
    for d in 0..N {
        let kd = k[d];
        for (o, &x) in out.iter_mut().zip(&u[d]) {
            *o += kd * x;
        }
    }
}

#[inline(always)]
fn rotations(delta: &[f64; TILE], c: &mut [f64; TILE], s: &mut [f64; TILE], exact: bool) {
    if exact {
        for p in 0..TILE {
            let (sp, cp) = delta[p].sin_cos();
            c[p] = cp;
            s[p] = sp;
        }
    } else {
        for p in 0..TILE {
            let (cp, sp) = small_rotation(delta[p]);
            c[p] = cp;
            s[p] = sp;
        }
    }
}
