//! Invertible neural networks for MR fingerprinting reconstruction.
//!
//! The crate covers the whole experiment pipeline: a two-pool signal
//! simulator ([`sim`]), dictionary generation and storage ([`dictionary`]),
//! a small dense network substrate with Adam and gradient checking ([`nn`]),
//! the invertible coupling network and the fully-connected baseline
//! ([`inn`]), bidirectional training ([`training`]) and the evaluation
//! experiments ([`evaluation`]).

pub mod checkpoint;
pub mod dictionary;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod inn;
pub mod nn;
pub mod report;
pub mod seed;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
