//! Hybrid quantum-classical image classification.
//!
//! A dense statevector simulator ([`qsim`]) underpins angle-encoded QNN
//! circuits ([`circuits`]) differentiated with parameter-shift rules
//! ([`qgrad`]). On top sit a sliding-window quantum filter layer
//! ([`quanv`]), a small classical network kernel ([`nn`]), CAE and PCA
//! feature extractors ([`features`]), MNIST-style dataset handling
//! ([`datasets`]) and the end-to-end trainers ([`hybrid`]).

pub mod binio;
pub mod circuits;
pub mod cli;
pub mod datasets;
pub mod features;
pub mod hybrid;
mod error;
pub mod nn;
pub mod qgrad;
pub mod qsim;
pub mod quanv;
pub mod rng;

pub use error::{Error, Result};
