//! Noise audit: checks the sampled and tabulated noise against independent
//! oracles.
//!
//! The Hessian covariance is compared with a sphere-quadrature oracle of
//! `mu4 * E[t_j t_k t_q t_r (delta_ip - t_i t_p)]`. Every sample `t` is
//! averaged over the hyperoctahedral group (coordinate permutations and sign
//! flips), which the uniform measure on the sphere is invariant under. Odd
//! monomials then vanish exactly and each even monomial is estimated by the
//! symmetrized mean of its exponent pattern, so the oracle entries are linear
//! combinations of five per-sample statistics with a joint sample covariance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::linalg;
use crate::rng;
use crate::spectral::{self, SpectralMeasure};

#[derive(Debug, Clone, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    /// Observed discrepancy in the units of `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct AuditParams {
    pub spectral: SpectralMeasure,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub trace_samples: usize,
    pub oracle_samples: usize,
    pub contraction_samples: usize,
    pub independence_samples: usize,
    pub isotropy_rotations: usize,
    pub quadrature_nodes: usize,
}

impl AuditParams {
    pub fn new(spectral: SpectralMeasure, seed: u64) -> Self {
        AuditParams {
            spectral,
            dims: vec![2, 3, 4],
            seed,
            trace_samples: 100_000,
            oracle_samples: 1_000_000,
            contraction_samples: 100_000,
            independence_samples: 100_000,
            isotropy_rotations: 20,
            quadrature_nodes: 20_000,
        }
    }
}

fn check(name: impl Into<String>, value: f64, tolerance: f64, detail: String) -> AuditCheck {
    AuditCheck { name: name.into(), passed: value <= tolerance, value, tolerance, detail }
}

/// Exact algebraic null direction of the gradient covariance.
pub fn w_trace_null(n: usize, mu2: f64) -> Result<AuditCheck> {
    let w = spectral::w_covariance(n, mu2)?;
    let mut tr = DVector::zeros(n * n);
    for i in 0..n {
        tr[i * n + i] = 1.0;
    }
    let image = &w.rate * &tr;
    let worst = image.amax();
    Ok(check(
        format!("w_trace_null n={n}"),
        worst,
        1e-15 * mu2,
        format!("max |rate . trace| = {worst:.3e}"),
    ))
}

/// Largest `|trace(dW)|` over sampled increments.
pub fn w_sampled_trace(n: usize, mu2: f64, samples: usize, seed: u64) -> Result<AuditCheck> {
    let w = spectral::w_covariance(n, mu2)?;
    let mut r = rng::stream(seed, 0x7AC3);
    let mut out = vec![0.0; n * n];
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        w.sample_into(1.0, &mut r, &mut out);
        worst = worst.max((0..n).map(|i| out[i * n + i]).sum::<f64>().abs());
    }
    Ok(check(format!("w_sampled_trace n={n}"), worst, 1e-12, format!("max |trace| over {samples} draws = {worst:.3e}")))
}

/// Exponent patterns tracked by the oracle: (4), (2,2), (6), (4,2), (2,2,2).
const PATTERNS: usize = 5;

fn pattern_index(exponents: &[u32]) -> Option<usize> {
    let mut e: Vec<u32> = exponents.iter().copied().filter(|&x| x > 0).collect();
    if e.iter().any(|x| x % 2 == 1) {
        return None;
    }
    e.sort_unstable_by(|a, b| b.cmp(a));
    match e.as_slice() {
        [4] => Some(0),
        [2, 2] => Some(1),
        [6] => Some(2),
        [4, 2] => Some(3),
        [2, 2, 2] => Some(4),
        _ => unreachable!("degree 4 or 6 monomial"),
    }
}

/// Symmetrized pattern means of one sphere point.
fn pattern_means(t: &[f64]) -> [f64; PATTERNS] {
    let n = t.len() as f64;
    let s2: Vec<f64> = t.iter().map(|x| x * x).collect();
    let p1: f64 = s2.iter().sum();
    let p2: f64 = s2.iter().map(|x| x * x).sum();
    let p3: f64 = s2.iter().map(|x| x * x * x).sum();
    // power sums of the squares give the symmetric monomial sums
    let m22 = p1 * p1 - p2;
    let m42 = p2 * p1 - p3;
    let m222 = p1 * p1 * p1 - 3.0 * p2 * p1 + 2.0 * p3;
    [
        p2 / n,
        m22 / (n * (n - 1.0)),
        p3 / n,
        m42 / (n * (n - 1.0)),
        if n >= 3.0 { m222 / (n * (n - 1.0) * (n - 2.0)) } else { 0.0 },
    ]
}

/// `E[prod t_idx]` as a coefficient vector over the pattern means.
fn moment_coefficients(n: usize, idx: &[usize]) -> [f64; PATTERNS] {
    let mut e = vec![0u32; n];
    for &i in idx {
        e[i] += 1;
    }
    let mut c = [0.0; PATTERNS];
    if let Some(p) = pattern_index(&e) {
        c[p] = 1.0;
    }
    c
}

/// Sphere-quadrature oracle of the full reduced B covariance.
pub fn b_oracle(n: usize, mu4: f64, samples: usize, seed: u64) -> Result<AuditCheck> {
    let b = spectral::b_covariance(n, mu4)?;
    Ok(oracle_check(n, mu4, &b.slots, |a, c| b.rate[(a, c)], samples, seed))
}

/// Compares `rate(a, c)` over reduced slots with the quadrature oracle.
fn oracle_check(
    n: usize,
    mu4: f64,
    slots: &[(usize, usize, usize)],
    rate: impl Fn(usize, usize) -> f64,
    samples: usize,
    seed: u64,
) -> AuditCheck {
    let mut r = rng::stream(seed, 0x0BAC);
    let mut mean = [0.0; PATTERNS];
    let mut m2 = [[0.0; PATTERNS]; PATTERNS];
    for s in 0..samples {
        let t = spectral::sphere_point(n, &mut r);
        let x = pattern_means(&t);
        // Welford update of mean and co-moment
        let k = (s + 1) as f64;
        let mut d = [0.0; PATTERNS];
        for a in 0..PATTERNS {
            d[a] = x[a] - mean[a];
            mean[a] += d[a] / k;
        }
        for a in 0..PATTERNS {
            for c in 0..PATTERNS {
                m2[a][c] += d[a] * (x[c] - mean[c]);
            }
        }
    }
    let nf = samples as f64;
    let cov = DMatrix::from_fn(PATTERNS, PATTERNS, |a, c| m2[a][c] / (nf - 1.0) / nf);
    let mut worst_z = 0.0_f64;
    let mut worst_exact = 0.0_f64;
    let mut entries = 0;
    for (a, &(i, j, k)) in slots.iter().enumerate() {
        for (c, &(p, q, rr)) in slots.iter().enumerate().skip(a) {
            let c4 = moment_coefficients(n, &[j, k, q, rr]);
            let c6 = moment_coefficients(n, &[i, p, j, k, q, rr]);
            let mut coef = DVector::zeros(PATTERNS);
            for m in 0..PATTERNS {
                coef[m] = mu4 * (if i == p { c4[m] } else { 0.0 } - c6[m]);
            }
            let oracle: f64 = (0..PATTERNS).map(|m| coef[m] * mean[m]).sum();
            let sd = (coef.transpose() * &cov * &coef)[(0, 0)].max(0.0).sqrt();
            let diff = (rate(a, c) - oracle).abs();
            if sd == 0.0 {
                worst_exact = worst_exact.max(diff);
            } else {
                worst_z = worst_z.max(diff / sd);
            }
            entries += 1;
        }
    }
    let exact_ok = worst_exact <= 1e-15 * mu4;
    let mut c = check(
        format!("b_oracle n={n}"),
        worst_z,
        3.0,
        format!(
            "{entries} entries, {samples} sphere samples: max |diff|/sigma = {worst_z:.3}, \
             max |diff| on symmetry-zero entries = {worst_exact:.3e}"
        ),
    );
    c.passed &= exact_ok;
    c
}

/// Empirical variance of `<dB(u,u), v>` against the closed form, for an
/// orthonormal pair and an aligned pair. Relative error.
pub fn b_contraction(n: usize, mu4: f64, samples: usize, seed: u64) -> Result<Vec<AuditCheck>> {
    let b = spectral::b_covariance(n, mu4)?;
    let mut r = rng::stream(seed, 0xC0B7);
    let q = linalg::random_orthogonal(n, &mut r);
    let u: Vec<f64> = q.column(0).iter().copied().collect();
    let v: Vec<f64> = q.column(1).iter().copied().collect();
    let mut out = Vec::new();
    for (label, vv) in [("orthogonal", &v), ("aligned", &u)] {
        let want = spectral::contraction_rate_closed_form(n, mu4, &u, vv);
        let mut buf = vec![0.0; n * n * n];
        let mut acc = 0.0;
        for _ in 0..samples {
            b.sample_into(1.0, &mut r, &mut buf);
            let x = spectral::contract_b(&buf, n, &u, vv);
            acc += x * x;
        }
        let got = acc / samples as f64;
        let rel = (got / want - 1.0).abs();
        out.push(check(
            format!("b_contraction_{label} n={n}"),
            rel,
            0.05,
            format!("variance {got:.5} vs closed form {want:.5} ({samples} draws)"),
        ));
    }
    Ok(out)
}

/// Joint draws of dW and dB: entrywise sample covariances, summarized by a
/// chi-square statistic over all `n^2 x n(n)(n+1)/2` pairs.
pub fn bw_independence(n: usize, mu2: f64, mu4: f64, samples: usize, seed: u64) -> Result<AuditCheck> {
    let w = spectral::w_covariance(n, mu2)?;
    let b = spectral::b_covariance(n, mu4)?;
    let mut rw = rng::substream(seed, 0x1D, 0);
    let mut rb = rng::substream(seed, 0x1D, 1);
    let nw = n * n;
    let nb = b.slots.len();
    let mut sxy = vec![0.0; nw * nb];
    let mut sxx = vec![0.0; nw];
    let mut syy = vec![0.0; nb];
    let mut dw = vec![0.0; nw];
    let mut db = vec![0.0; n * n * n];
    for _ in 0..samples {
        w.sample_into(1.0, &mut rw, &mut dw);
        b.sample_into(1.0, &mut rb, &mut db);
        for (c, &(i, j, k)) in b.slots.iter().enumerate() {
            let y = db[i * n * n + j * n + k];
            syy[c] += y * y;
            for a in 0..nw {
                sxy[a * nb + c] += dw[a] * y;
            }
        }
        for a in 0..nw {
            sxx[a] += dw[a] * dw[a];
        }
    }
    let nf = samples as f64;
    let mut chi2 = 0.0;
    let mut df = 0;
    let mut worst = 0.0_f64;
    for a in 0..nw {
        for c in 0..nb {
            let var = sxx[a] * syy[c] / (nf * nf);
            if var <= 0.0 {
                continue;
            }
            // zero-mean product: its variance is E[x^2] E[y^2] under independence
            let z = (sxy[a * nb + c] / nf) / (var / nf).sqrt();
            chi2 += z * z;
            worst = worst.max(z.abs());
            df += 1;
        }
    }
    // entries of dW are linearly dependent through the trace constraint, so
    // the statistic is conservative only approximately; use the p-value
    let p = 1.0 - ChiSquared::new(df as f64).expect("positive df").cdf(chi2);
    let mut c = check(
        format!("bw_independence n={n}"),
        -p.log10(),
        3.0,
        format!("chi2 = {chi2:.1} on {df} pairs, p = {p:.3}, max |z| = {worst:.2}"),
    );
    c.passed = p >= 1e-3;
    Ok(c)
}

/// `C(z) = G^T C(G z) G` for random orthogonal `G`, each side evaluated by an
/// independent quadrature.
pub fn isotropy(f: &SpectralMeasure, n: usize, rotations: usize, nodes: usize, seed: u64) -> Result<AuditCheck> {
    let mut r = rng::stream(seed, 0x150);
    let mut worst = 0.0_f64;
    for k in 0..rotations {
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-1.5..1.5)).collect();
        let g = linalg::random_orthogonal(n, &mut r);
        let gz: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * z[j]).sum()).collect();
        let a = spectral::covariance_function(f, &z, nodes, rng::substream(seed, 0x151, k as u64).random())?;
        let b = spectral::covariance_function(f, &gz, nodes, rng::substream(seed, 0x152, k as u64).random())?;
        let back = g.transpose() * &b.value * &g;
        let diff = (&a.value - back).amax();
        let tol = a.std_error.hypot(b.std_error);
        worst = worst.max(if tol > 0.0 { diff / tol } else if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(check(
        format!("isotropy n={n}"),
        worst,
        6.0,
        format!("{rotations} rotations: max entrywise |C(z) - G^T C(Gz) G| / combined quadrature error = {worst:.2}"),
    ))
}

/// The full battery for every configured dimension.
pub fn run(p: &AuditParams) -> Result<AuditReport> {
    p.spectral.validate()?;
    if p.dims.iter().any(|&n| n < 2) {
        return invalid("audit dimensions must be at least 2");
    }
    let (mu2, mu4) = (p.spectral.mu2(), p.spectral.mu4());
    let mut checks = Vec::new();
    for &n in &p.dims {
        checks.push(w_trace_null(n, mu2)?);
        checks.push(w_sampled_trace(n, mu2, p.trace_samples, p.seed)?);
        checks.push(b_oracle(n, mu4, p.oracle_samples, p.seed)?);
        checks.extend(b_contraction(n, mu4, p.contraction_samples, p.seed)?);
        checks.push(bw_independence(n, mu2, mu4, p.independence_samples, p.seed)?);
        checks.push(isotropy(&p.spectral, n, p.isotropy_rotations, p.quadrature_nodes, p.seed)?);
    }
    Ok(AuditReport { checks })
}
