//! Discrete curves and surfaces, their Lipschitz-Killing curvatures and a
//! Monte Carlo tube-volume oracle.
//!
//! Curvature values are normalized so that Weyl's tube formula
//! `vol(Tube(M, r)) = sum_j r^(n-j) omega_(n-j) L_j(M)` holds; in particular
//! `L_0` is the Euler characteristic (2 for a sphere) and the two-sided `L_1`
//! of a closed surface in R^3 vanishes. The one-sided integral mean curvature
//! `H_int = sum_e len(e) theta(e)` is reported separately.

pub mod bvh;
pub mod fixtures;
pub mod io;
pub mod polyline;
pub mod refine;
pub mod trimesh;
pub mod tube;

use serde::Serialize;

pub use polyline::Polyline;
pub use trimesh::TriMesh;

/// Convention tag carried by every [`LkReport`].
pub const CONVENTION: &str = "tube-normalized";

/// Either kind of discrete manifold.
#[derive(Debug, Clone)]
pub enum Geometry {
    Mesh(TriMesh),
    Curve(Polyline),
}

/// Lipschitz-Killing curvatures of a discrete manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LkReport {
    pub convention: &'static str,
    /// `L_0 ..= L_dim`.
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    /// One-sided integral mean curvature (surfaces only).
    #[serde(rename = "H_int", skip_serializing_if = "Option::is_none")]
    pub h_int: Option<f64>,
    /// Angle-defect total over `2 pi` (surfaces only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_combinatorial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genus: Option<i64>,
    /// Turning number (planar curves only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turning_number: Option<f64>,
}

pub(crate) type P3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
pub(crate) fn add(a: P3, b: P3) -> P3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
#[inline]
pub(crate) fn scale(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
#[inline]
pub(crate) fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
pub(crate) fn cross(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
#[inline]
pub(crate) fn norm(a: P3) -> f64 {
    dot(a, a).sqrt()
}
#[inline]
pub(crate) fn midpoint(a: P3, b: P3) -> P3 {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
}
