//! Projected Riemannian gradient descent on the manifold of fixed-rank
//! matrices, with the diagnostics used to study its escape from spurious
//! critical points.
//!
//! The crate is organised around a handful of modules:
//!
//! - [`manifold`]: factored points, tangent projections and the retraction.
//! - [`init`]: seeded Stiefel and random-spectrum initializations.
//! - [`losses`]: `F1`, `F2` and the empirical sensing loss.
//! - [`optimizer`]: the PGD loop and its trajectory record.
//! - [`diagnostics`]: spurious points, angle spectra, stage labels.
//! - [`ode`]: scalar population dynamics and their discrete maps.
//! - [`cli`]: the experiment harness behind the `lmr` binary.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod init;
pub mod linalg;
pub mod losses;
pub mod manifold;
pub mod ode;
pub mod optimizer;

pub use error::{Error, Result};
pub use manifold::{
    pgd_step, retract, tangent_cone_project, tangent_project, FactoredPoint, GroundTruth,
    LowRankSum, MatrixAction, TangentVector, ORTHO_TOL, RANK_TOL_REL,
};
