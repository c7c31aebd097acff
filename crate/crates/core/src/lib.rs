//! Monte Carlo laboratory for isotropic, volume-preserving Brownian flows.
//!
//! The crate simulates two complementary pictures of the same flow:
//!
//! - **Track A** ([`jet`]): the second-order jet of the flow at a single
//!   material point, driven by the constant-covariance derivative noise of
//!   [`spectral`]. Used to estimate expected growth rates of the area element,
//!   k-frame norms and curvature traces.
//! - **Track B** ([`field`], [`mesh`]): a random-Fourier-feature realization of
//!   the whole velocity field that advects discrete curves and surfaces, whose
//!   Lipschitz-Killing curvatures are then measured.
//!
//! [`exterior`] holds the exterior-algebra kernels shared by both tracks and
//! [`experiment`] binds everything into named, reproducible experiments.

pub mod audit;
pub mod error;
pub mod experiment;
pub mod exterior;
pub mod field;
pub mod jet;
pub mod linalg;
pub mod mesh;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
