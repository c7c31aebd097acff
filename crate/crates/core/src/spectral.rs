//! Spectral measure of the flow and the covariance of its derivative noise.
//!
//! The driving field has covariance
//! `C(z) = ∫∫ cos(ρ<t,z>) (I - t tᵀ) σ(dt) F(dρ)` with `σ` the uniform
//! probability measure on the unit sphere. Differentiating at `z = 0` gives
//! constant covariance rates for the gradient noise `W` and the Hessian noise
//! `B`, which depend on `F` only through the moments `μ₂` and `μ₄`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Radial spectral measure `F` on `[0, ∞)`. Stored unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralMeasure {
    /// `mass · δ_rho`.
    PointMass { rho: f64, mass: f64 },
    /// Sum of weighted atoms `(weight, rho)`.
    FiniteMixture(Vec<(f64, f64)>),
    /// Piecewise-linear density through `values` at equally spaced nodes
    /// `0, h, 2h, ..., rho_max`.
    TruncatedDensity { rho_max: f64, values: Vec<f64> },
}

impl SpectralMeasure {
    pub fn point(rho: f64) -> Self {
        SpectralMeasure::PointMass { rho, mass: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            SpectralMeasure::PointMass { rho, mass } => {
                if !ok(*rho) || !ok(*mass) {
                    return invalid("point mass needs finite rho >= 0 and mass >= 0");
                }
            }
            SpectralMeasure::FiniteMixture(atoms) => {
                if atoms.is_empty() {
                    return invalid("mixture needs at least one atom");
                }
                if atoms.iter().any(|&(w, r)| !ok(w) || !ok(r)) {
                    return invalid("mixture weights and frequencies must be finite and >= 0");
                }
            }
            SpectralMeasure::TruncatedDensity { rho_max, values } => {
                if !(rho_max.is_finite() && *rho_max > 0.0) {
                    return invalid("density needs rho_max > 0");
                }
                if values.len() < 2 {
                    return invalid("density needs at least two tabulated values");
                }
                if values.iter().any(|&v| !ok(v)) {
                    return invalid("density values must be finite and >= 0");
                }
            }
        }
        Ok(())
    }

    /// `μ_m = ∫ ρ^m F(dρ)` for `m ∈ {0, 2, 4}`.
    ///
    /// Exact for atoms. The tabulated density is read as piecewise linear and
    /// integrated in closed form per segment, so the only error is rounding.
    pub fn moment(&self, m: u32) -> Result<f64> {
        if !matches!(m, 0 | 2 | 4) {
            return invalid(format!("moment order {m} unsupported (use 0, 2 or 4)"));
        }
        let p = m as i32;
        Ok(match self {
            SpectralMeasure::PointMass { rho, mass } => mass * rho.powi(p),
            SpectralMeasure::FiniteMixture(atoms) => atoms.iter().map(|&(w, r)| w * r.powi(p)).sum(),
            SpectralMeasure::TruncatedDensity { rho_max, values } => {
                let h = rho_max / (values.len() - 1) as f64;
                let pw = |x: f64, e: i32| x.powi(e) / e as f64;
                let mut total = 0.0;
                for (s, w) in values.windows(2).enumerate() {
                    let a = s as f64 * h;
                    let b = a + h;
                    let slope = (w[1] - w[0]) / h;
                    let i0 = pw(b, p + 1) - pw(a, p + 1);
                    let i1 = pw(b, p + 2) - pw(a, p + 2) - a * i0;
                    total += w[0] * i0 + slope * i1;
                }
                total
            }
        })
    }

    pub fn mu0(&self) -> f64 {
        self.moment(0).unwrap()
    }
    pub fn mu2(&self) -> f64 {
        self.moment(2).unwrap()
    }
    pub fn mu4(&self) -> f64 {
        self.moment(4).unwrap()
    }

    /// Draw a radial frequency from the normalized measure `F / μ₀`.
    pub fn sample_rho<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SpectralMeasure::PointMass { rho, .. } => *rho,
            SpectralMeasure::FiniteMixture(atoms) => {
                let total: f64 = atoms.iter().map(|a| a.0).sum();
                let mut u = rng.random::<f64>() * total;
                for &(w, r) in atoms {
                    if u < w {
                        return r;
                    }
                    u -= w;
                }
                atoms.last().unwrap().1
            }
            SpectralMeasure::TruncatedDensity { rho_max, values } => {
                let h = rho_max / (values.len() - 1) as f64;
                let masses: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).collect();
                let total: f64 = masses.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut seg = masses.len() - 1;
                for (s, &m) in masses.iter().enumerate() {
                    if u < m {
                        seg = s;
                        break;
                    }
                    u -= m;
                }
                let fa = values[seg];
                let slope = (values[seg + 1] - fa) / h;
                let target = u.min(masses[seg]);
                // invert fa x + slope x²/2 = target on [0, h]
                let disc = (fa * fa + 2.0 * slope * target).max(0.0);
                let denom = fa + disc.sqrt();
                let x = if denom > 0.0 { 2.0 * target / denom } else { 0.0 };
                seg as f64 * h + x.clamp(0.0, h)
            }
        }
    }
}

/// Number of perfect matchings of `idx` whose pairs carry equal labels,
/// i.e. the sum over all pairings of products of Kronecker deltas.
pub fn pairing_sum(idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    for m in 1..idx.len() {
        if idx[m] == first {
            let rest: Vec<usize> = idx[1..]
                .iter()
                .enumerate()
                .filter(|&(o, _)| o + 1 != m)
                .map(|(_, &v)| v)
                .collect();
            total += pairing_sum(&rest);
        }
    }
    total
}

fn kd(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Covariance rate of the gradient noise, `E[dW^i_j dW^k_l] / dt`.
pub fn w_rate(n: usize, mu2: f64, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let nf = n as f64;
    mu2 / (nf * (nf + 2.0)) * ((nf + 1.0) * kd(i, k) * kd(j, l) - kd(i, j) * kd(k, l) - kd(i, l) * kd(k, j))
}

/// Covariance rate of the Hessian noise, `E[dB^i_{jk} dB^p_{qr}] / dt`.
pub fn b_rate(n: usize, mu4: f64, (i, j, k): (usize, usize, usize), (p, q, r): (usize, usize, usize)) -> f64 {
    let nf = n as f64;
    mu4 * (kd(i, p) * pairing_sum(&[j, k, q, r]) / (nf * (nf + 2.0))
        - pairing_sum(&[i, p, j, k, q, r]) / (nf * (nf + 2.0) * (nf + 4.0)))
}

/// Constant covariance of the gradient noise `W`, flattened as `(i, j) -> i n + j`.
#[derive(Debug, Clone)]
pub struct WCovariance {
    pub n: usize,
    pub mu2: f64,
    pub rate: DMatrix<f64>,
    pub chol: DMatrix<f64>,
}

/// Constant covariance of the Hessian noise `B` over the reduced index set
/// `(i; j <= k)`, flattened by [`BCovariance::reduced_index`].
#[derive(Debug, Clone)]
pub struct BCovariance {
    pub n: usize,
    pub mu4: f64,
    pub rate: DMatrix<f64>,
    pub chol: DMatrix<f64>,
    /// `(i, j, k)` for each reduced slot.
    pub slots: Vec<(usize, usize, usize)>,
}

pub fn w_covariance(n: usize, mu2: f64) -> Result<WCovariance> {
    if n < 2 {
        return invalid("flow dimension must be at least 2");
    }
    if !(mu2.is_finite() && mu2 > 0.0) {
        return invalid("mu2 must be positive");
    }
    let d = n * n;
    let rate = DMatrix::from_fn(d, d, |a, b| w_rate(n, mu2, a / n, a % n, b / n, b % n));
    let chol = linalg::pivoted_cholesky(&rate, 1e-14 * rate.trace())?;
    Ok(WCovariance { n, mu2, rate, chol })
}

pub fn b_covariance(n: usize, mu4: f64) -> Result<BCovariance> {
    if n < 2 {
        return invalid("flow dimension must be at least 2");
    }
    if !(mu4.is_finite() && mu4 > 0.0) {
        return invalid("mu4 must be positive");
    }
    let mut slots = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                slots.push((i, j, k));
            }
        }
    }
    let d = slots.len();
    let rate = DMatrix::from_fn(d, d, |a, b| b_rate(n, mu4, slots[a], slots[b]));
    let chol = linalg::pivoted_cholesky(&rate, 1e-14 * rate.trace())
        .map_err(|e| Error::Internal(format!("B covariance factorization failed: {e}")))?;
    Ok(BCovariance { n, mu4, rate, chol, slots })
}

impl WCovariance {
    pub fn rate_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.rate[(i * self.n + j, k * self.n + l)]
    }

    /// Fill `out` (row-major `n x n`) with an increment over `dt`.
    /// The trace is projected to zero afterwards, removing rounding residue
    /// along the null direction of the covariance.
    pub fn sample_into<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        out[..n * n].fill(0.0);
        if dt == 0.0 {
            return;
        }
        let s = dt.sqrt();
        let d = n * n;
        let l = self.chol.as_slice();
        for c in 0..self.chol.ncols() {
            let z: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            let col = &l[c * d..(c + 1) * d];
            for (o, &v) in out.iter_mut().zip(col) {
                *o += v * z;
            }
        }
        let tr = (0..n).map(|i| out[i * n + i]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[i * n + i] -= tr;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        self.sample_into(dt, rng, &mut out);
        out
    }
}

impl BCovariance {
    pub fn reduced_index(&self, i: usize, j: usize, k: usize) -> usize {
        let (j, k) = if j <= k { (j, k) } else { (k, j) };
        let n = self.n;
        let pairs = n * (n + 1) / 2;
        // slots with a smaller second index precede: sum_{a<j} (n - a)
        i * pairs + j * (2 * n - j + 1) / 2 + (k - j)
    }

    pub fn rate_at(&self, a: (usize, usize, usize), b: (usize, usize, usize)) -> f64 {
        self.rate[(self.reduced_index(a.0, a.1, a.2), self.reduced_index(b.0, b.1, b.2))]
    }

    /// Fill `out` (`n³`, index `i n² + j n + k`) with a symmetric increment over `dt`.
    pub fn sample_into<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        out[..n * n * n].fill(0.0);
        if dt == 0.0 {
            return;
        }
        let s = dt.sqrt();
        let d = self.slots.len();
        let l = self.chol.as_slice();
        let mut stack = [0.0; 128];
        let mut heap = Vec::new();
        let red: &mut [f64] = if d <= stack.len() {
            &mut stack[..d]
        } else {
            heap.resize(d, 0.0);
            &mut heap
        };
        for c in 0..self.chol.ncols() {
            let z: f64 = rng.sample::<f64, _>(StandardNormal) * s;
            let col = &l[c * d..(c + 1) * d];
            for (o, &v) in red.iter_mut().zip(col) {
                *o += v * z;
            }
        }
        for (&(i, j, k), &x) in self.slots.iter().zip(red.iter()) {
            out[i * n * n + j * n + k] = x;
            out[i * n * n + k * n + j] = x;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n * self.n];
        self.sample_into(dt, rng, &mut out);
        out
    }

    /// Variance rate of `<dB(u,u), v>` computed from the stored tensor.
    pub fn contraction_rate(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut total = 0.0;
        for (a, &(i, j, k)) in self.slots.iter().enumerate() {
            let ca = v[i] * u[j] * u[k] * if j == k { 1.0 } else { 2.0 };
            if ca == 0.0 {
                continue;
            }
            for (b, &(p, q, r)) in self.slots.iter().enumerate() {
                let cb = v[p] * u[q] * u[r] * if q == r { 1.0 } else { 2.0 };
                total += ca * cb * self.rate[(a, b)];
            }
        }
        total
    }
}

/// Closed form of the contraction variance rate for unit `u`, `v`.
pub fn contraction_rate_closed_form(n: usize, mu4: f64, u: &[f64], v: &[f64]) -> f64 {
    let nf = n as f64;
    let uu = linalg::dot(u, u);
    let uv = linalg::dot(u, v);
    let vv = linalg::dot(v, v);
    3.0 * mu4 / (nf * (nf + 2.0) * (nf + 4.0)) * ((nf + 3.0) * uu * uu * vv - 4.0 * uv * uv * uu)
}

/// `<B(u, u), v>` for a full tensor in the layout of [`BCovariance::sample_into`].
pub fn contract_b(b: &[f64], n: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                s += b[i * n * n + j * n + k] * v[i] * u[j] * u[k];
            }
        }
    }
    s
}

/// Quadrature value of `C(z)` with its standard-error estimate.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub value: DMatrix<f64>,
    /// Entrywise standard error (max over entries).
    pub std_error: f64,
}

/// Evaluate `C(z)` by Monte Carlo over randomly rotated cross-polytope
/// designs on the sphere.
///
/// Each block contributes the `2n` points `±G e_i` for a Haar-random `G`,
/// which integrates all polynomials up to degree 3 exactly. Atoms of `F` are
/// summed exactly; a tabulated density contributes one sampled frequency per block.
/// The error estimate is the standard error over blocks.
pub fn covariance_function(
    f: &SpectralMeasure,
    z: &[f64],
    quadrature_nodes: usize,
    seed: u64,
) -> Result<CovarianceEstimate> {
    f.validate()?;
    let n = z.len();
    if n < 2 {
        return invalid("dimension must be at least 2");
    }
    if quadrature_nodes < 1000 {
        return invalid("at least 1000 quadrature nodes are required");
    }
    let blocks = (quadrature_nodes / (2 * n)).max(2);
    let mut rng = crate::rng::stream(seed, 0);
    let atoms: Option<Vec<(f64, f64)>> = match f {
        SpectralMeasure::PointMass { rho, mass } => Some(vec![(*mass, *rho)]),
        SpectralMeasure::FiniteMixture(a) => Some(a.clone()),
        SpectralMeasure::TruncatedDensity { .. } => None,
    };
    let mu0 = f.mu0();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sumsq = DMatrix::<f64>::zeros(n, n);
    let mut t = vec![0.0; n];
    for b in 0..blocks {
        let g = linalg::random_orthogonal(n, &mut rng);
        let mut block = DMatrix::<f64>::zeros(n, n);
        let radial: Vec<(f64, f64)> = match &atoms {
            Some(a) => a.clone(),
            None => {
                let mut sub = crate::rng::substream(seed, 1, b as u64);
                vec![(mu0, f.sample_rho(&mut sub))]
            }
        };
        for c in 0..n {
            for (i, ti) in t.iter_mut().enumerate() {
                *ti = g[(i, c)];
            }
            let phase: f64 = linalg::dot(&t, z);
            // ±t give the same cosine and the same projector
            let w: f64 = radial.iter().map(|&(m, r)| m * (r * phase).cos()).sum::<f64>() / n as f64;
            for k in 0..n {
                for l in 0..n {
                    block[(k, l)] += w * (kd(k, l) - t[k] * t[l]);
                }
            }
        }
        sumsq += block.component_mul(&block);
        sum += block;
    }
    let nb = blocks as f64;
    let mean = &sum / nb;
    let var = (&sumsq / nb - mean.component_mul(&mean)) * (nb / (nb - 1.0));
    let se = var.iter().fold(0.0_f64, |m, &v| m.max(v.max(0.0))).sqrt() / nb.sqrt();
    Ok(CovarianceEstimate { value: mean, std_error: se })
}

/// Uniform point on the unit sphere in `R^n`.
pub fn sphere_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r = linalg::norm(&g);
        if r > 1e-12 {
            return g.into_iter().map(|x| x / r).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn moments_of_atoms() {
        assert_eq!(SpectralMeasure::point(1.0).moment(2).unwrap(), 1.0);
        assert_eq!(SpectralMeasure::point(2.0).moment(4).unwrap(), 16.0);
        let mix = SpectralMeasure::FiniteMixture(vec![(0.5, 1.0), (0.5, 3.0)]);
        assert_eq!(mix.moment(2).unwrap(), 5.0);
        assert!(mix.moment(3).is_err());
        assert!(mix.moment(6).is_err());
    }

    #[test]
    fn density_moments_are_exact_for_linear_pieces() {
        // f(ρ) = ρ on [0, 2]: μ0 = 2, μ2 = 4, μ4 = 64/6
        let f = SpectralMeasure::TruncatedDensity { rho_max: 2.0, values: vec![0.0, 0.5, 1.0, 1.5, 2.0] };
        assert!((f.mu0() - 2.0).abs() < 1e-12);
        assert!((f.mu2() - 4.0).abs() < 1e-12);
        assert!((f.mu4() - 64.0 / 6.0).abs() < 1e-12);
        let mu = [f.mu0(), f.mu2(), f.mu4()];
        assert!(mu[1] * mu[1] <= mu[0] * mu[2]);
    }

    #[test]
    fn density_sampler_matches_moment() {
        let f = SpectralMeasure::TruncatedDensity { rho_max: 2.0, values: vec![0.0, 1.0, 0.25] };
        let mut r = rng::stream(3, 0);
        let m = 200_000;
        let s2: f64 = (0..m).map(|_| f.sample_rho(&mut r).powi(2)).sum::<f64>() / m as f64;
        assert!((s2 - f.mu2() / f.mu0()).abs() < 0.01);
    }

    #[test]
    fn pairing_sums() {
        assert_eq!(pairing_sum(&[0, 0, 0, 0]), 3.0);
        assert_eq!(pairing_sum(&[0, 0, 1, 1]), 1.0);
        assert_eq!(pairing_sum(&[0, 1, 0, 1]), 1.0);
        assert_eq!(pairing_sum(&[0, 0, 0, 0, 0, 0]), 15.0);
        assert_eq!(pairing_sum(&[0, 0, 0, 0, 1, 1]), 3.0);
        assert_eq!(pairing_sum(&[0, 1, 2, 0, 1, 2]), 1.0);
        assert_eq!(pairing_sum(&[0, 0, 1]), 0.0);
    }

    #[test]
    fn w_covariance_entries() {
        let c = w_covariance(3, 1.0).unwrap();
        assert!((c.rate_at(0, 0, 0, 0) - 2.0 / 15.0).abs() < 1e-15);
        let full: f64 = (0..3).flat_map(|i| (0..3).map(move |k| (i, k))).map(|(i, k)| c.rate_at(i, i, k, k)).sum();
        assert_eq!(full, 0.0);
        let part: f64 = (0..2).flat_map(|i| (0..2).map(move |k| (i, k))).map(|(i, k)| c.rate_at(i, i, k, k)).sum();
        assert!((part - 2.0 / 15.0).abs() < 1e-15);
        assert!(w_covariance(1, 1.0).is_err());
        assert!(w_covariance(3, 0.0).is_err());
    }

    #[test]
    fn w_factor_reproduces_rate() {
        for n in 2..=5 {
            let c = w_covariance(n, 1.3).unwrap();
            assert_eq!(c.chol.ncols(), n * n - 1);
            let err = (&c.chol * c.chol.transpose() - &c.rate).norm();
            assert!(err <= 1e-12 * c.rate.norm());
            // full-trace direction is null
            let mut e = nalgebra::DVector::zeros(n * n);
            for i in 0..n {
                e[i * n + i] = 1.0;
            }
            assert_eq!((&c.rate * e).norm(), 0.0);
        }
    }

    #[test]
    fn w_covariance_is_orthogonally_invariant() {
        let mut r = rng::stream(11, 0);
        for n in [2, 3, 4] {
            let c = w_covariance(n, 1.0).unwrap();
            for _ in 0..100 {
                let g = linalg::random_orthogonal(n, &mut r);
                // rate of G W Gᵀ: sum over entries of G ⊗ G acting on both sides
                let mut gg = DMatrix::<f64>::zeros(n * n, n * n);
                for i in 0..n {
                    for j in 0..n {
                        for a in 0..n {
                            for b in 0..n {
                                gg[(i * n + j, a * n + b)] = g[(i, a)] * g[(j, b)];
                            }
                        }
                    }
                }
                let conj = &gg * &c.rate * gg.transpose();
                assert!((conj - &c.rate).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn w_samples_have_zero_trace_and_expected_variance() {
        let c = w_covariance(3, 1.0).unwrap();
        let mut r = rng::stream(5, 0);
        assert!(c.sample(0.0, &mut r).iter().all(|&x| x == 0.0));
        let m = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..m {
            let w = c.sample(1.0, &mut r);
            assert!((w[0] + w[4] + w[8]).abs() <= 1e-12);
            s += w[1];
            s2 += w[1] * w[1];
        }
        let mean = s / m as f64;
        let var = s2 / m as f64 - mean * mean;
        // Var of a sample variance of a Gaussian is 2σ⁴/m
        let target = 4.0 / 15.0;
        let sd = (2.0_f64).sqrt() * target / (m as f64).sqrt();
        assert!((var - target).abs() < 3.0 * sd, "var {var}");
    }

    #[test]
    fn reduced_index_matches_slot_order() {
        for n in 2..=5 {
            let c = b_covariance(n, 1.0).unwrap();
            for (a, &(i, j, k)) in c.slots.iter().enumerate() {
                assert_eq!(c.reduced_index(i, j, k), a);
                assert_eq!(c.reduced_index(i, k, j), a);
            }
        }
    }

    #[test]
    fn b_contraction_matches_closed_form() {
        let mut r = rng::stream(9, 0);
        for n in 2..=5 {
            let c = b_covariance(n, 2.0).unwrap();
            let err = (&c.chol * c.chol.transpose() - &c.rate).norm();
            assert!(err <= 1e-12 * c.rate.norm());
            let u = sphere_point(n, &mut r);
            let v = sphere_point(n, &mut r);
            let got = c.contraction_rate(&u, &v);
            let want = contraction_rate_closed_form(n, 2.0, &u, &v);
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
            let nf = n as f64;
            let e = |i: usize| (0..n).map(|a| kd(a, i)).collect::<Vec<_>>();
            let orth = c.contraction_rate(&e(0), &e(1));
            assert!((orth - 6.0 * (nf + 3.0) / (nf * (nf + 2.0) * (nf + 4.0))).abs() < 1e-12);
            let along = c.contraction_rate(&e(0), &e(0));
            assert!((along - 6.0 * (nf - 1.0) / (nf * (nf + 2.0) * (nf + 4.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn b_samples_are_symmetric_and_contract_correctly() {
        let c = b_covariance(3, 1.0).unwrap();
        let mut r = rng::stream(13, 0);
        assert!(c.sample(0.0, &mut r).iter().all(|&x| x == 0.0));
        let u = [1.0, 0.0, 0.0];
        let v = [0.0, 1.0, 0.0];
        let m = 100_000;
        let mut s2 = 0.0;
        for _ in 0..m {
            let b = c.sample(1.0, &mut r);
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        assert_eq!(b[i * 9 + j * 3 + k], b[i * 9 + k * 3 + j]);
                    }
                }
            }
            let x = contract_b(&b, 3, &u, &v);
            s2 += x * x;
        }
        let var = s2 / m as f64;
        let target = 6.0 / 35.0;
        let sd = (2.0_f64).sqrt() * target / (m as f64).sqrt();
        assert!((var - target).abs() < 3.0 * sd, "var {var}");
    }

    #[test]
    fn covariance_function_at_origin_and_far_away() {
        let f = SpectralMeasure::FiniteMixture(vec![(0.7, 1.0), (0.3, 2.5)]);
        let c = covariance_function(&f, &[0.0, 0.0, 0.0], 3000, 1).unwrap();
        let want = DMatrix::<f64>::identity(3, 3) * (1.0 * (1.0 - 1.0 / 3.0));
        // the cross-polytope design integrates t tᵀ exactly
        assert!((&c.value - want).amax() < 1e-12);
        let p = SpectralMeasure::point(1.0);
        let far = covariance_function(&p, &[1e6, 0.0, 0.0], 60_000, 2).unwrap();
        assert!(far.value.amax() < 5.0 * far.std_error + 1e-12, "{} vs {}", far.value.amax(), far.std_error);
        assert!(far.value.amax() < 0.02);
    }

    #[test]
    fn covariance_function_is_isotropic() {
        let f = SpectralMeasure::point(1.0);
        let mut r = rng::stream(21, 0);
        let z = [0.4, -0.8, 1.1];
        let base = covariance_function(&f, &z, 20_000, 4).unwrap();
        for s in 0..5 {
            let g = linalg::random_orthogonal(3, &mut r);
            let gz = &g * nalgebra::DVector::from_row_slice(&z);
            let rot = covariance_function(&f, gz.as_slice(), 20_000, 100 + s).unwrap();
            let back = g.transpose() * &rot.value * &g;
            let tol = 5.0 * (base.std_error.powi(2) + rot.std_error.powi(2)).sqrt();
            assert!((back - &base.value).amax() < tol);
        }
    }
}
