//! Numerical toolkit for the Kronig–Penney operator `H = −d²/dx² + V Σ_j δ(x − j)`.
//!
//! The crate covers the discriminant and transfer matrix, band edges and band
//! functions, edge and band-centre asymptotics, Bloch waves, the
//! band-projected propagator kernel and the drivers that measure its decay.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bands;
pub mod bloch;
pub mod discriminant;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod propagator;
pub mod quad;
pub mod roots;

pub use bands::{build_band, Band, ThetaSample};
pub use discriminant::PotentialStrength;
pub use error::{Error, Result};
