//! Numerical laboratory for conformally invariant curvature energies of
//! four-dimensional immersions `Φ: Ω⁴ → ℝᵐ`.

pub mod error;
pub mod jets;
pub mod forms;
pub mod geometry;
pub mod immersions;
pub mod quadrature;
pub mod energies;
pub mod variational;
pub mod intrinsic;
pub mod analysis;
pub mod flow;

pub use error::{Error, Result};
