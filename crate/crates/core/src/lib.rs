//! Numerical toolkit for error exponents of classical-quantum channels:
//! Renyi divergences, sphere-packing exponents, saddle points, converse
//! hypothesis-testing bounds with polynomial prefactors, and an exact
//! Neyman-Pearson oracle for certifying them at small scale.

pub mod config;
pub mod bounds;
pub mod channel;
pub mod divergence;
pub mod error;
pub mod extreal;
pub mod ns;
pub mod oracle;
pub mod operator;
pub mod solver;
pub mod verify;

pub use channel::{CQChannel, Prior};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use extreal::ExtReal;
pub use operator::{CMat, DensityOperator, HermitianMatrix, Projector, C64};
