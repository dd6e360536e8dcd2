//! Statistical interconnectedness of large stock panels.
//!
//! The pipeline runs in stages:
//!
//! 1. [`market`] loads price panels, applies calendar and liquidity screens and
//!    produces daily and weekly log returns.
//! 2. [`garch`] fits a GARCH(1,1) per asset and divides returns by the fitted
//!    conditional volatility.
//! 3. [`pairwise`] regresses every pair of filtered series with Student-t
//!    errors and corrects daily p-values for non-synchronous trading.
//! 4. [`network`] turns p-values into weighted dependency networks and
//!    measures their group structure.
//! 5. [`rolling`] repeats the whole chain on overlapping windows.
//!
//! [`synthetic`] generates panels with known dynamics for testing every stage.

pub mod error;
pub mod exec;
pub mod garch;
pub mod market;
pub mod network;
pub mod pairwise;
pub mod rolling;
pub mod stats;
pub mod synthetic;
pub mod tfit;
pub mod vocab;

pub use error::{Error, Result};
pub use exec::Execution;
pub use vocab::{Country, Sector};
