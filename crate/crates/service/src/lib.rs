//! Annotation service and batch command line for the `vocalcode` pipeline.
//!
//! [`api::router`] serves coder sessions over HTTP on top of a [`store::Store`]
//! that persists every accepted play and label to an append-only log.
//! [`cli`] holds the batch entry points behind the `vocalcode` binary.

pub mod api;
pub mod audio;
pub mod cli;
pub mod error;
pub mod reports;
pub mod session;
pub mod store;

pub use error::ServiceError;
