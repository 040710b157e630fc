//! Exact verification of finite summation formulas for multivariable
//! Kampé de Fériet series.
//!
//! Series are expanded as truncated multivariate power series with exact
//! rational coefficients, and both sides of every formula in the catalog are
//! compared coefficient by coefficient.

pub mod batch;
pub mod cli;
pub mod error;
pub mod exact_arith;
pub mod identities;
pub mod kdf_core;
pub mod mseries;
pub mod numeval;
pub mod reductions;

pub use error::{Error, Result};
pub use exact_arith::Rational;
pub use identities::{IdentityId, IdentityInstance, Reading, Status, VerificationReport};
pub use kdf_core::{KdfSpec, SlotBinding};
pub use mseries::{MultiIndex, TruncatedSeries};
