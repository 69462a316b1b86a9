//! Time-varying market-efficiency estimation for monthly stock-price indices.
//!
//! The crate covers the full workflow: loading price tables and computing log
//! returns, ADF-GLS unit-root tests, a time-invariant AR baseline with HAC
//! errors and a parameter-constancy test, the GLS time-varying AR model with
//! its efficiency degree, and residual-bootstrap bands under the
//! efficient-market null. [`pipeline`] ties these together for the CLI.

pub mod ar;
pub mod bootstrap;
pub mod error;
mod ols;
pub mod pipeline;
pub mod series;
pub mod tvar;
pub mod unit_root;

pub use error::{Error, Result};
