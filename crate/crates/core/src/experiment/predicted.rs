//! Closed-form expected growth rates, evaluated in exact rational arithmetic.

use num_rational::Ratio;

use crate::error::{invalid, Result};

pub type Q = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// `E[Tr S⁽ᵏ⁾ ‖α‖]`, i.e. the Lipschitz-Killing curvature `𝓛_{n-1-k}`.
    Lk { n: usize, k: usize },
    /// `E‖α‖`.
    Alpha { n: usize },
    /// `E‖α‖²`.
    AlphaSq { n: usize },
    /// `E⟨ξ, ψ⟩` for pushed k-vectors.
    KFrame { n: usize, k: usize },
    /// `m`-dimensional content of a codimension `n - m` submanifold.
    Codim { n: usize, m: usize },
}

fn q(x: usize) -> Q {
    Q::from_integer(x as i64)
}

/// Rate per unit `μ₂` as an exact rational.
pub fn predicted_rational(kind: RateKind) -> Result<Q> {
    let check_n = |n: usize| if n < 2 { invalid("dimension must be at least 2") } else { Ok(()) };
    Ok(match kind {
        RateKind::Lk { n, k } => {
            check_n(n)?;
            if k > n - 1 {
                return invalid(format!("k = {k} outside 0..={}", n - 1));
            }
            q(n - k - 1) * q(n + 1) * q(k + 1) / (q(2) * q(n) * q(n + 2))
        }
        RateKind::Alpha { n } => {
            check_n(n)?;
            q(n - 1) * q(n + 1) / (q(2) * q(n) * q(n + 2))
        }
        RateKind::AlphaSq { n } => {
            check_n(n)?;
            q(n - 1) / q(n)
        }
        RateKind::KFrame { n, k } => {
            check_n(n)?;
            if k == 0 || k > n - 1 {
                return invalid(format!("k = {k} outside 1..={}", n - 1));
            }
            q(k) * q(n - k) / q(n)
        }
        RateKind::Codim { n, m } => {
            check_n(n)?;
            if m == 0 || m > n - 1 {
                return invalid(format!("m = {m} outside 1..={}", n - 1));
            }
            q(m) * q(n - m) * q(n + 1) / (q(2) * q(n) * q(n + 2))
        }
    })
}

pub fn predicted_rate(kind: RateKind, mu2: f64) -> Result<f64> {
    let r = predicted_rational(kind)?;
    Ok(*r.numer() as f64 / *r.denom() as f64 * mu2)
}

/// The three drift contributions to `d(Tr S⁽ᵏ⁾ ‖α‖)` per unit `μ₂`: the area
/// element, the trace itself, and their cross-variation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriftDecomposition {
    pub area: Q,
    pub trace: Q,
    pub cross: Q,
}

impl DriftDecomposition {
    pub fn total(&self) -> Q {
        self.area + self.trace + self.cross
    }
}

pub fn drift_decomposition(n: usize, k: usize) -> Result<DriftDecomposition> {
    if n < 2 || k > n - 1 {
        return invalid("need n >= 2 and k <= n - 1");
    }
    let nn = q(n) * q(n + 2);
    let area = predicted_rational(RateKind::Alpha { n })?;
    let trace = q(n + 1) * q(k) * q(n - k) / (q(2) * nn);
    let cross = (q(2) * q(n - k - 1) - q(n - 1) * q(k + 2)) / nn;
    Ok(DriftDecomposition { area, trace, cross })
}
