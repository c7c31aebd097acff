//! Small dense linear-algebra helpers.
//!
//! Matrices handed around as flat slices are row-major unless a function says
//! otherwise. Heavier routines (symmetric eigenproblems) go through nalgebra.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Determinant of a row-major `k x k` matrix by LU with partial pivoting.
/// The empty matrix has determinant 1.
pub fn det(a: &[f64], k: usize) -> f64 {
    debug_assert_eq!(a.len(), k * k);
    match k {
        0 => return 1.0,
        1 => return a[0],
        2 => return a[0] * a[3] - a[1] * a[2],
        3 => {
            return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => {}
    }
    let mut m = a.to_vec();
    let mut d = 1.0;
    for c in 0..k {
        let mut piv = c;
        for r in c + 1..k {
            if m[r * k + c].abs() > m[piv * k + c].abs() {
                piv = r;
            }
        }
        if m[piv * k + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..k {
                m.swap(c * k + j, piv * k + j);
            }
            d = -d;
        }
        let p = m[c * k + c];
        d *= p;
        for r in c + 1..k {
            let f = m[r * k + c] / p;
            if f != 0.0 {
                for j in c + 1..k {
                    m[r * k + j] -= f * m[c * k + j];
                }
            }
        }
    }
    d
}

/// Normal vector `N` to the `n-1` columns of `v` (column-major, `n x (n-1)`),
/// built from signed cofactors so that `det[v | N] = |N|^2 > 0`.
///
/// `|N|` equals the `(n-1)`-volume spanned by the columns.
pub fn cofactor_normal(v: &[f64], n: usize) -> Vec<f64> {
    let m = n - 1;
    debug_assert_eq!(v.len(), n * m);
    let mut out = vec![0.0; n];
    let mut minor = vec![0.0; m * m];
    for (skip, slot) in out.iter_mut().enumerate() {
        let mut r = 0;
        for i in 0..n {
            if i == skip {
                continue;
            }
            for a in 0..m {
                minor[r * m + a] = v[a * n + i];
            }
            r += 1;
        }
        let sign = if (skip + m) % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * det(&minor, m);
    }
    out
}

/// Orthonormal basis (as `n-1` vectors) of the complement of the unit vector `t`.
///
/// Uses a Householder reflection mapping `e_j` onto `t`, where `j` is the
/// coordinate of largest magnitude, so the construction is stable.
pub fn orthonormal_complement(t: &[f64]) -> Vec<Vec<f64>> {
    let n = t.len();
    let j = (0..n)
        .max_by(|&a, &b| t[a].abs().total_cmp(&t[b].abs()))
        .unwrap_or(0);
    // H = I - 2 w w^T / (w^T w) with w = t - s e_j, s = -sign(t_j); H e_j = t up to sign.
    let s = if t[j] >= 0.0 { -1.0 } else { 1.0 };
    let mut w = t.to_vec();
    w[j] -= s;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    let mut basis = Vec::with_capacity(n - 1);
    for e in (0..n).filter(|&e| e != j) {
        // column e of H
        let mut col: Vec<f64> = (0..n).map(|i| -2.0 * w[i] * w[e] / ww).collect();
        col[e] += 1.0;
        basis.push(col);
    }
    basis
}

/// Haar-distributed random orthogonal `n x n` matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            for i in 0..n {
                q[(i, c)] = -q[(i, c)];
            }
        }
    }
    q
}

/// Diagonally pivoted Cholesky of a symmetric positive semidefinite matrix.
///
/// Returns `L` (`n x r`) with `L L^T = a` up to the discarded trailing pivots,
/// where `r` is the numerical rank. Pivots below `ridge` are treated as zero.
/// Errors if a pivot is significantly negative, i.e. `a` is not PSD.
pub fn pivoted_cholesky(a: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        // choose largest remaining diagonal
        let (piv, &dmax) = perm[k..]
            .iter()
            .enumerate()
            .map(|(o, &p)| (k + o, &work[(p, p)]))
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        if dmax <= ridge {
            let min_diag = perm[k..]
                .iter()
                .map(|&p| work[(p, p)])
                .fold(f64::INFINITY, f64::min);
            if min_diag < -1e3 * ridge.max(f64::EPSILON) {
                return Err(Error::Internal(format!(
                    "covariance is not positive semidefinite (pivot {min_diag:.3e})"
                )));
            }
            break;
        }
        perm.swap(k, piv);
        let p = perm[k];
        let root = dmax.sqrt();
        l[(p, k)] = root;
        for &q in &perm[k + 1..] {
            l[(q, k)] = work[(q, p)] / root;
        }
        for &q in &perm[k + 1..] {
            for &s in &perm[k + 1..] {
                work[(q, s)] -= l[(q, k)] * l[(s, k)];
            }
        }
        rank += 1;
    }
    Ok(l.columns(0, rank).into_owned())
}

/// Eigenvalues of the symmetric-definite pencil `h x = lambda g x`.
///
/// Reduces with the Cholesky factor of `g` instead of forming `g^{-1} h`.
pub fn generalized_sym_eigenvalues(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} h L^{-T}
    let y = l
        .solve_lower_triangular(h)
        .ok_or_else(|| Error::InvalidArgument("singular Gram factor".into()))?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::InvalidArgument("singular Gram factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigenvalues())
}

/// Spectral condition number of a symmetric positive definite matrix.
pub fn spd_condition(g: &DMatrix<f64>) -> f64 {
    let ev = g.clone().symmetric_eigenvalues();
    let max = ev.max();
    let min = ev.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Elementary symmetric polynomials `e_0..=e_m` of `vals`, by expanding
/// `prod (1 + lambda_i x)` one factor at a time.
pub fn elementary_symmetric(vals: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; vals.len() + 1];
    e[0] = 1.0;
    for (i, &lam) in vals.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += lam * e[k - 1];
        }
    }
    e
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn det_matches_closed_forms() {
        assert_eq!(det(&[], 0), 1.0);
        assert_eq!(det(&[2.0, 0.0, 0.0, 3.0], 2), 6.0);
        let a = [2.0, 1.0, 0.0, 3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 8.0, 9.0];
        // cofactor expansion by hand along the first row
        let m = |r: [usize; 3], c: [usize; 3]| {
            let mut s = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    s[i * 3 + j] = a[r[i] * 4 + c[j]];
                }
            }
            det(&s, 3)
        };
        let rows = [1, 2, 3];
        let expect = 2.0 * m(rows, [1, 2, 3]) - 1.0 * m(rows, [0, 2, 3]) + 0.0 - 3.0 * m(rows, [0, 1, 2]);
        assert!((det(&a, 4) - expect).abs() < 1e-9);
    }

    #[test]
    fn cofactor_normal_is_orthogonal_and_positively_oriented() {
        let mut r = rng::stream(7, 0);
        for n in 2..=5 {
            let v: Vec<f64> = (0..n * (n - 1)).map(|_| r.sample(StandardNormal)).collect();
            let nn = cofactor_normal(&v, n);
            for a in 0..n - 1 {
                assert!(dot(&v[a * n..(a + 1) * n], &nn).abs() < 1e-12);
            }
            let mut full = vec![0.0; n * n];
            for i in 0..n {
                for a in 0..n - 1 {
                    full[i * n + a] = v[a * n + i];
                }
                full[i * n + n - 1] = nn[i];
            }
            assert!((det(&full, n) - dot(&nn, &nn)).abs() < 1e-9 * dot(&nn, &nn));
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let t = [0.3, -0.5, 0.2, 0.7];
        let nt = norm(&t);
        let t: Vec<f64> = t.iter().map(|x| x / nt).collect();
        let b = orthonormal_complement(&t);
        assert_eq!(b.len(), 3);
        for (i, u) in b.iter().enumerate() {
            assert!(dot(u, &t).abs() < 1e-14);
            for (j, w) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, w) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pivoted_cholesky_handles_rank_deficiency() {
        // rank-2 PSD matrix in 3 dims
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let a = &b * b.transpose();
        let l = pivoted_cholesky(&a, 1e-14 * a.trace()).unwrap();
        assert_eq!(l.ncols(), 2);
        assert!((&l * l.transpose() - &a).norm() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(pivoted_cholesky(&bad, 1e-14).is_err());
    }

    #[test]
    fn elementary_symmetric_small_cases() {
        assert_eq!(elementary_symmetric(&[2.0, 3.0]), vec![1.0, 5.0, 6.0]);
        assert_eq!(elementary_symmetric(&[1.0, 1.0, 1.0]), vec![1.0, 3.0, 3.0, 1.0]);
    }
}
