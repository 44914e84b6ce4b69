//! HTTP service and command-line front end for the metricscope engine.
//!
//! Both fronts accept the same request shapes ([`wire`]) and report
//! failures as [`ApiError`].

pub mod cli;
pub mod error;
pub mod http;
pub mod wire;

pub use error::{ApiError, ApiResult, ErrorCode};
pub use http::{router, AppState};
