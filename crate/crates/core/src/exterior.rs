//! Exterior-algebra kernels on pushed tangent frames.
//!
//! A hypersurface frame is `m = n - 1` vectors `u_1..u_m` in `R^n`, with
//! `α = u_1 ∧ ... ∧ u_m`. The scalar second fundamental form `h` is taken in
//! the same (generally non-orthonormal) basis, so the shape operator is
//! `G⁻¹ h` with `G` the Gram matrix of the frame.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Gram condition number above which a frame is treated as degenerate.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Ordered list of `n - 1` vectors in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub n: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let m = vectors.len();
        let n = m + 1;
        if m == 0 {
            return invalid("frame needs at least one vector");
        }
        if vectors.iter().any(|v| v.len() != n) {
            return invalid(format!("frame of {m} vectors must live in R^{n}"));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return invalid("frame has non-finite entries");
        }
        Ok(Frame { n, vectors })
    }

    pub fn orthonormal(n: usize) -> Self {
        let vectors = (0..n - 1)
            .map(|a| (0..n).map(|i| if i == a { 1.0 } else { 0.0 }).collect())
            .collect();
        Frame { n, vectors }
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.vectors.len();
        DMatrix::from_fn(m, m, |a, b| linalg::dot(&self.vectors[a], &self.vectors[b]))
    }

    /// Vectors as a column-major `n x (n-1)` slice, the layout of [`linalg::cofactor_normal`].
    pub fn columns(&self) -> Vec<f64> {
        self.vectors.concat()
    }
}

/// Symmetric second fundamental form in the frame basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeForm {
    pub h: DMatrix<f64>,
}

impl ShapeForm {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return invalid("shape form must be square");
        }
        if h != h.transpose() {
            return invalid("shape form must be exactly symmetric");
        }
        Ok(ShapeForm { h })
    }

    pub fn diagonal(kappa: &[f64]) -> Self {
        ShapeForm { h: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(kappa)) }
    }
}

/// Inner product of the simple k-vectors `a_1 ∧ ... ∧ a_k` and `b_1 ∧ ... ∧ b_k`.
pub fn kvector_inner(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "k-vectors of different grade");
    let k = a.len();
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = linalg::dot(&a[i], &b[j]);
        }
    }
    linalg::det(&g, k)
}

/// `‖α‖ = √det G`, the `(n-1)`-volume of the frame parallelepiped.
pub fn alpha_norm(f: &Frame) -> Result<f64> {
    if f.vectors.iter().flatten().any(|x| !x.is_finite()) {
        return invalid("frame has non-finite entries");
    }
    Ok(kvector_inner(&f.vectors, &f.vectors).max(0.0).sqrt())
}

fn check_grade(f: &Frame, s: &ShapeForm, k: usize) -> Result<()> {
    let m = f.vectors.len();
    if s.h.nrows() != m {
        return invalid(format!("shape form is {}x{} but frame has {m} vectors", s.h.nrows(), s.h.nrows()));
    }
    if k > m {
        return invalid(format!("grade {k} exceeds hypersurface dimension {m}"));
    }
    Ok(())
}

fn check_condition(g: &DMatrix<f64>) -> Result<()> {
    let c = linalg::spd_condition(g);
    if !(c <= MAX_GRAM_CONDITION) {
        return Err(Error::DegenerateFrame { condition: c });
    }
    Ok(())
}

/// All `Tr S⁽ᵏ⁾` for `k = 0..=n-1`: elementary symmetric polynomials of the
/// eigenvalues of the pencil `(h, G)`.
pub fn trace_all_eigen(f: &Frame, s: &ShapeForm) -> Result<Vec<f64>> {
    check_grade(f, s, 0)?;
    let g = f.gram();
    check_condition(&g)?;
    let ev = linalg::generalized_sym_eigenvalues(&g, &s.h)?;
    Ok(linalg::elementary_symmetric(ev.as_slice()))
}

/// `Tr S⁽ᵏ⁾ = e_k(G⁻¹ h)`, with `Tr S⁽⁰⁾ = 1`.
pub fn trace_sk_eigen(f: &Frame, s: &ShapeForm, k: usize) -> Result<f64> {
    check_grade(f, s, k)?;
    if k == 0 {
        return Ok(1.0);
    }
    Ok(trace_all_eigen(f, s)?[k])
}

/// Strictly increasing `k`-tuples from `0..m`.
pub fn multi_indices(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            if m - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// All permutations of `0..k` with their signs.
fn permutations(k: usize) -> Vec<(Vec<usize>, f64)> {
    if k == 0 {
        return vec![(Vec::new(), 1.0)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(k - 1) {
        // insert k-1 at each position; moving it left past j elements flips sign j times
        for pos in 0..k {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            let flips = k - 1 - pos;
            out.push((q, if flips % 2 == 0 { s } else { -s }));
        }
    }
    out
}

/// `S⁽ᵏ⁾(α_l̄, α_m̄) = Σ_σ sgn σ Π_j h(u_{l_σ(j)}, u_{m_j})`.
fn s_k(h: &DMatrix<f64>, l: &[usize], m: &[usize], perms: &[(Vec<usize>, f64)]) -> f64 {
    perms
        .iter()
        .map(|(p, sg)| sg * p.iter().enumerate().map(|(j, &pj)| h[(l[pj], m[j])]).product::<f64>())
        .sum()
}

fn complement(m: usize, idx: &[usize]) -> Vec<usize> {
    (0..m).filter(|i| !idx.contains(i)).collect()
}

fn parity_sign(idx: &[usize]) -> f64 {
    if idx.iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Frame vectors picked by `idx`.
fn pick(f: &Frame, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| f.vectors[i].clone()).collect()
}

/// Dual pairing `⟨α^l̄, α^m̄⟩` (not yet divided by `‖α‖²`): the inner product
/// of the complementary, hat-deleted `(m-k)`-vectors with parity signs.
fn dual_pairing(f: &Frame, l: &[usize], mm: &[usize]) -> f64 {
    let m = f.vectors.len();
    let lc = complement(m, l);
    let mc = complement(m, mm);
    parity_sign(l) * parity_sign(mm) * kvector_inner(&pick(f, &lc), &pick(f, &mc))
}

/// Reference `Tr S⁽ᵏ⁾` by the literal multi-index contraction
/// `Σ_{l̄,m̄} S⁽ᵏ⁾(α_l̄, α_m̄) ⟨α^l̄, α^m̄⟩ / ‖α‖²`.
///
/// Factorial cost; limited to `n <= 6`.
pub fn trace_sk_minorsum(f: &Frame, s: &ShapeForm, k: usize) -> Result<f64> {
    check_grade(f, s, k)?;
    if f.n > 6 {
        return invalid("reference minor-sum path supports n <= 6 only");
    }
    if k == 0 {
        return Ok(1.0);
    }
    let g = f.gram();
    check_condition(&g)?;
    let m = f.vectors.len();
    let norm_sq = kvector_inner(&f.vectors, &f.vectors);
    let perms = permutations(k);
    let tuples = multi_indices(m, k);
    let mut total = 0.0;
    for l in &tuples {
        for mm in &tuples {
            let sk = s_k(&s.h, l, mm, &perms);
            if sk != 0.0 {
                total += sk * dual_pairing(f, l, mm);
            }
        }
    }
    Ok(total / norm_sq)
}

/// One term of a k-vector expansion: `coef · v_1 ∧ ... ∧ v_k`.
pub type SimpleTerm = (f64, Vec<Vec<f64>>);

/// `τ^j_l ξ = e_j ∧ Σ_i (-1)^{i+1} ⟨ξ_i, e_l⟩ ξ_1 ∧ ... ξ̂_i ... ∧ ξ_k`.
///
/// This is the derivative of `ξ` under the frame perturbation
/// `u -> u + ε e_j ⟨u, e_l⟩`. Indices are 0-based.
pub fn tau_apply(n: usize, j: usize, l: usize, xi: &[Vec<f64>]) -> Vec<SimpleTerm> {
    let mut ej = vec![0.0; n];
    ej[j] = 1.0;
    let mut out = Vec::new();
    for (i, v) in xi.iter().enumerate() {
        let c = v[l];
        if c == 0.0 {
            continue;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut vecs = Vec::with_capacity(xi.len());
        vecs.push(ej.clone());
        vecs.extend(xi.iter().enumerate().filter(|&(q, _)| q != i).map(|(_, w)| w.clone()));
        out.push((sign * c, vecs));
    }
    out
}

/// Inner product of a k-vector expansion with a simple k-vector.
pub fn expansion_inner(terms: &[SimpleTerm], b: &[Vec<f64>]) -> f64 {
    terms.iter().map(|(c, v)| c * kvector_inner(v, b)).sum()
}

/// Coefficients of the Itô differential of `Tr S⁽ᵏ⁾` along the jet dynamics
/// `dV = dW V`, `dZ_ab = dW Z_ab + dB(V_a, V_b)`.
///
/// The martingale part is
/// `Σ_ab b_loading[a][b] ⟨dB(u_a,u_b), ν⟩
///  + w_diag (k ⟨ν, dW ν⟩ - 2 tr(P_T dW))
///  + Σ_jl tau[j][l] dW^j_l`
/// and the drift is `drift · dt`.
#[derive(Debug, Clone)]
pub struct TraceSdeTerms {
    pub k: usize,
    pub trace: f64,
    pub b_loading: DMatrix<f64>,
    pub w_diag: f64,
    pub tau: DMatrix<f64>,
    pub drift: f64,
}

impl TraceSdeTerms {
    /// First-order change of `Tr S⁽ᵏ⁾` for the increments `dw` (row-major
    /// `n x n`) and `db` (`n³`, layout of the B sampler).
    pub fn contract(&self, f: &Frame, nu: &[f64], dw: &[f64], db: &[f64]) -> f64 {
        let n = f.n;
        let m = n - 1;
        let mut total = 0.0;
        for a in 0..m {
            for b in 0..m {
                let mut bn = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for q in 0..n {
                            bn += db[i * n * n + j * n + q] * nu[i] * f.vectors[a][j] * f.vectors[b][q];
                        }
                    }
                }
                total += self.b_loading[(a, b)] * bn;
            }
        }
        let mut nwn = 0.0;
        for i in 0..n {
            for j in 0..n {
                nwn += nu[i] * dw[i * n + j] * nu[j];
            }
        }
        let trw: f64 = (0..n).map(|i| dw[i * n + i]).sum();
        // tr(P_T dW) = tr(dW) - ⟨ν, dW ν⟩
        total += self.w_diag * (self.k as f64 * nwn - 2.0 * (trw - nwn));
        for j in 0..n {
            for l in 0..n {
                total += self.tau[(j, l)] * dw[j * n + l];
            }
        }
        total
    }
}

/// Assemble the coefficient bundle of `d Tr S⁽ᵏ⁾` from the multi-index
/// expansion. `nu` is the unit normal; reference path, `n <= 6`.
pub fn trace_sde_terms(f: &Frame, s: &ShapeForm, nu: &[f64], k: usize, mu2: f64) -> Result<TraceSdeTerms> {
    check_grade(f, s, k)?;
    if k == 0 {
        return invalid("the trace differential needs k >= 1");
    }
    if f.n > 6 {
        return invalid("coefficient bundle supports n <= 6 only");
    }
    if nu.len() != f.n {
        return invalid("normal has wrong dimension");
    }
    let n = f.n;
    let m = n - 1;
    let trace = trace_sk_minorsum(f, s, k)?;
    let norm_sq = kvector_inner(&f.vectors, &f.vectors);
    let tuples = multi_indices(m, k);
    let perms_k = permutations(k);
    let perms_km1 = permutations(k - 1);
    let mut b_loading = DMatrix::<f64>::zeros(m, m);
    let mut tau = DMatrix::<f64>::zeros(n, n);
    for l in &tuples {
        for mm in &tuples {
            let pairing = dual_pairing(f, l, mm) / norm_sq;
            // B loading: expand S⁽ᵏ⁾ along the deleted slot pair (l_p, m_i)
            for p in 0..k {
                for i in 0..k {
                    let lp: Vec<usize> = l.iter().enumerate().filter(|&(q, _)| q != p).map(|(_, &x)| x).collect();
                    let mi: Vec<usize> = mm.iter().enumerate().filter(|&(q, _)| q != i).map(|(_, &x)| x).collect();
                    let sign = if (p + i) % 2 == 0 { 1.0 } else { -1.0 };
                    b_loading[(l[p], mm[i])] += sign * s_k(&s.h, &lp, &mi, &perms_km1) * pairing;
                }
            }
            if k == m {
                continue;
            }
            let sk = s_k(&s.h, l, mm, &perms_k);
            if sk == 0.0 {
                continue;
            }
            let sign = parity_sign(l) * parity_sign(mm);
            let lc = pick(f, &complement(m, l));
            let mc = pick(f, &complement(m, mm));
            for j in 0..n {
                for q in 0..n {
                    let d = expansion_inner(&tau_apply(n, j, q, &lc), &mc)
                        + expansion_inner(&tau_apply(n, j, q, &mc), &lc);
                    tau[(j, q)] += sk * sign * d / norm_sq;
                }
            }
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let drift = (nf + 1.0) * kf * (nf - kf) * mu2 / (2.0 * nf * (nf + 2.0)) * trace;
    Ok(TraceSdeTerms { k, trace, b_loading, w_diag: trace, tau, drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn e(n: usize, i: usize) -> Vec<f64> {
        (0..n).map(|a| if a == i { 1.0 } else { 0.0 }).collect()
    }

    fn random_frame<R: Rng>(n: usize, r: &mut R) -> Frame {
        // perturbed identity keeps conditioning moderate
        let vectors = (0..n - 1)
            .map(|a| (0..n).map(|i| if i == a { 1.0 } else { 0.0 } + 0.4 * r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Frame::new(vectors).unwrap()
    }

    fn random_shape<R: Rng>(m: usize, r: &mut R) -> ShapeForm {
        let a = DMatrix::<f64>::from_fn(m, m, |_, _| r.sample(StandardNormal));
        ShapeForm::new((&a + a.transpose()) * 0.5).unwrap()
    }

    #[test]
    fn kvector_inner_examples() {
        assert_eq!(kvector_inner(&[e(3, 0), e(3, 1)], &[e(3, 0), e(3, 1)]), 1.0);
        assert_eq!(kvector_inner(&[e(3, 0)], &[e(3, 1)]), 0.0);
        let a = vec![vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0]];
        assert_eq!(kvector_inner(&a, &a), 36.0);
    }

    #[test]
    fn alpha_norm_examples() {
        assert_eq!(alpha_norm(&Frame::orthonormal(4)).unwrap(), 1.0);
        let c = 1.7;
        let scaled = Frame::new(vec![vec![c, 0.0, 0.0], vec![0.0, c, 0.0]]).unwrap();
        assert!((alpha_norm(&scaled).unwrap() - c * c).abs() < 1e-14);
        let sheared = Frame::new(vec![vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(alpha_norm(&sheared).unwrap(), 1.0);
        assert!(alpha_norm(&Frame { n: 3, vectors: vec![vec![f64::NAN, 0.0, 0.0], vec![0.0, 1.0, 0.0]] }).is_err());
    }

    #[test]
    fn trace_examples() {
        let f = Frame::orthonormal(4);
        let s = ShapeForm::diagonal(&[1.0, 1.0, 1.0]);
        assert_eq!(trace_sk_eigen(&f, &s, 0).unwrap(), 1.0);
        assert!((trace_sk_eigen(&f, &s, 2).unwrap() - 3.0).abs() < 1e-12);
        let f3 = Frame::orthonormal(3);
        let s23 = ShapeForm::diagonal(&[2.0, 3.0]);
        assert!((trace_sk_eigen(&f3, &s23, 2).unwrap() - 6.0).abs() < 1e-12);
        assert!((trace_sk_minorsum(&f3, &s23, 2).unwrap() - 6.0).abs() < 1e-12);
        assert!((trace_sk_minorsum(&f3, &s23, 1).unwrap() - 5.0).abs() < 1e-12);
        assert!(trace_sk_eigen(&f3, &s23, 3).is_err());
    }

    #[test]
    fn diagonal_minorsum_is_elementary_symmetric() {
        let kappa = [0.5, -1.5, 2.0, 3.0];
        let f = Frame::orthonormal(5);
        let s = ShapeForm::diagonal(&kappa);
        let e = linalg::elementary_symmetric(&kappa);
        for k in 0..=4 {
            assert!((trace_sk_minorsum(&f, &s, k).unwrap() - e[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn minorsum_agrees_with_eigen_on_random_frames() {
        let mut r = rng::stream(17, 0);
        for n in 3..=5 {
            for _ in 0..200 {
                let f = random_frame(n, &mut r);
                let s = random_shape(n - 1, &mut r);
                let all = trace_all_eigen(&f, &s).unwrap();
                for k in 1..n {
                    let a = trace_sk_minorsum(&f, &s, k).unwrap();
                    assert!((a - all[k]).abs() <= 1e-9 * a.abs().max(1.0), "n={n} k={k}: {a} vs {}", all[k]);
                }
            }
        }
    }

    #[test]
    fn degenerate_frame_is_rejected() {
        let f = Frame::new(vec![vec![1.0, 0.0, 0.0], vec![1.0, 1e-9, 0.0]]).unwrap();
        let s = ShapeForm::diagonal(&[1.0, 1.0]);
        assert!(matches!(trace_sk_eigen(&f, &s, 1), Err(Error::DegenerateFrame { .. })));
    }

    #[test]
    fn tau_examples() {
        let t = tau_apply(3, 0, 0, &[e(3, 0)]);
        assert_eq!(t, vec![(1.0, vec![e(3, 0)])]);
        let t = tau_apply(3, 1, 0, &[e(3, 0)]);
        assert_eq!(t, vec![(1.0, vec![e(3, 1)])]);
    }

    #[test]
    fn tau_is_the_directional_derivative_of_the_pairing() {
        let mut r = rng::stream(19, 0);
        let n = 4;
        for k in 1..=3 {
            let xi: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()).collect();
            let psi: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.sample(StandardNormal)).collect()).collect();
            for j in 0..n {
                for l in 0..n {
                    let eps = 1e-7;
                    let push = |vs: &[Vec<f64>], s: f64| -> Vec<Vec<f64>> {
                        vs.iter()
                            .map(|u| {
                                let mut w = u.clone();
                                w[j] += s * u[l];
                                w
                            })
                            .collect()
                    };
                    let fd = (kvector_inner(&push(&xi, eps), &push(&psi, eps))
                        - kvector_inner(&push(&xi, -eps), &push(&psi, -eps)))
                        / (2.0 * eps);
                    let an = expansion_inner(&tau_apply(n, j, l, &xi), &psi) + expansion_inner(&tau_apply(n, j, l, &psi), &xi);
                    assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "k={k} j={j} l={l}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn drift_coefficient_and_flat_loading() {
        let f = Frame::orthonormal(3);
        let s = ShapeForm::diagonal(&[1.5, 0.5]);
        let nu = [0.0, 0.0, 1.0];
        let t = trace_sde_terms(&f, &s, &nu, 1, 1.0).unwrap();
        assert!((t.drift - 4.0 / 15.0 * 2.0).abs() < 1e-14);
        let flat = ShapeForm::diagonal(&[0.0, 0.0]);
        let t1 = trace_sde_terms(&f, &flat, &nu, 1, 1.0).unwrap();
        assert!((&t1.b_loading - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        let t2 = trace_sde_terms(&f, &flat, &nu, 2, 1.0).unwrap();
        assert_eq!(t2.b_loading.amax(), 0.0);
    }

    #[test]
    fn bundle_matches_first_order_variation() {
        // V -> V + ε dW V and Z -> Z + ε (dW Z + dB(V, V)); h = ⟨Z, ν(V)⟩.
        let mut r = rng::stream(23, 0);
        for n in 3..=5 {
            let m = n - 1;
            for _ in 0..5 {
                let f = random_frame(n, &mut r);
                let nu0 = linalg::cofactor_normal(&f.columns(), n);
                let nn = linalg::norm(&nu0);
                let nu: Vec<f64> = nu0.iter().map(|x| x / nn).collect();
                // Z with both normal and tangential parts
                let mut z = vec![vec![vec![0.0; n]; m]; m];
                for a in 0..m {
                    for b in a..m {
                        let v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
                        z[a][b] = v.clone();
                        z[b][a] = v;
                    }
                }
                let dw: Vec<f64> = (0..n * n).map(|_| r.sample(StandardNormal)).collect();
                let mut db = vec![0.0; n * n * n];
                for i in 0..n {
                    for j in 0..n {
                        for q in j..n {
                            let x: f64 = r.sample(StandardNormal);
                            db[i * n * n + j * n + q] = x;
                            db[i * n * n + q * n + j] = x;
                        }
                    }
                }
                let eval = |eps: f64, k: usize| -> f64 {
                    let vs: Vec<Vec<f64>> = f
                        .vectors
                        .iter()
                        .map(|u| (0..n).map(|i| u[i] + eps * (0..n).map(|j| dw[i * n + j] * u[j]).sum::<f64>()).collect())
                        .collect();
                    let fe = Frame::new(vs).unwrap();
                    let mut nv = linalg::cofactor_normal(&fe.columns(), n);
                    let s = linalg::norm(&nv);
                    nv.iter_mut().for_each(|x| *x /= s);
                    let h = DMatrix::from_fn(m, m, |a, b| {
                        (0..n)
                            .map(|i| {
                                let wz: f64 = (0..n).map(|j| dw[i * n + j] * z[a][b][j]).sum();
                                let bvv: f64 = (0..n)
                                    .flat_map(|j| (0..n).map(move |q| (j, q)))
                                    .map(|(j, q)| db[i * n * n + j * n + q] * f.vectors[a][j] * f.vectors[b][q])
                                    .sum();
                                (z[a][b][i] + eps * (wz + bvv)) * nv[i]
                            })
                            .sum()
                    });
                    let h = (&h + h.transpose()) * 0.5;
                    trace_sk_eigen(&fe, &ShapeForm { h }, k).unwrap()
                };
                let h0 = DMatrix::from_fn(m, m, |a, b| linalg::dot(&z[a][b], &nu));
                let s0 = ShapeForm::new((&h0 + h0.transpose()) * 0.5).unwrap();
                for k in 1..n {
                    let terms = trace_sde_terms(&f, &s0, &nu, k, 1.0).unwrap();
                    let eps = 1e-6;
                    let fd = (eval(eps, k) - eval(-eps, k)) / (2.0 * eps);
                    let an = terms.contract(&f, &nu, &dw, &db);
                    assert!((fd - an).abs() < 1e-5 * an.abs().max(1.0), "n={n} k={k}: {fd} vs {an}");
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn normal_flip_changes_sign_by_parity(seed in 0u64..10_000, n in 3usize..=5) {
                let mut r = rng::stream(seed, 1);
                let f = random_frame(n, &mut r);
                let s = random_shape(n - 1, &mut r);
                let neg = ShapeForm { h: -&s.h };
                let a = trace_all_eigen(&f, &s).unwrap();
                let b = trace_all_eigen(&f, &neg).unwrap();
                for k in 0..n {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    prop_assert!((b[k] - sign * a[k]).abs() <= 1e-9 * a[k].abs().max(1.0));
                }
            }

            #[test]
            fn change_of_tangent_basis_leaves_traces_unchanged(seed in 0u64..10_000, n in 3usize..=5) {
                let mut r = rng::stream(seed, 2);
                let m = n - 1;
                let f = random_frame(n, &mut r);
                let s = random_shape(m, &mut r);
                let a = DMatrix::<f64>::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * r.sample::<f64, _>(StandardNormal));
                prop_assume!(a.determinant().abs() > 0.1);
                let vs: Vec<Vec<f64>> = (0..m)
                    .map(|b| (0..n).map(|i| (0..m).map(|c| f.vectors[c][i] * a[(c, b)]).sum()).collect())
                    .collect();
                let h2 = a.transpose() * &s.h * &a;
                let h2 = (&h2 + h2.transpose()) * 0.5;
                let t1 = trace_all_eigen(&f, &s).unwrap();
                let t2 = trace_all_eigen(&Frame::new(vs).unwrap(), &ShapeForm { h: h2 }).unwrap();
                for k in 0..n {
                    prop_assert!((t1[k] - t2[k]).abs() <= 1e-9 * t1[k].abs().max(1.0));
                }
            }

            #[test]
            fn alpha_norm_squared_is_self_inner(seed in 0u64..10_000, n in 2usize..=6) {
                let mut r = rng::stream(seed, 3);
                let f = random_frame(n, &mut r);
                let a = alpha_norm(&f).unwrap();
                let ii = kvector_inner(&f.vectors, &f.vectors);
                prop_assert!((a * a - ii).abs() <= 1e-12 * ii.max(1.0));
            }
        }
    }
}
