//! Physics-informed network training on periodic 1-D time-dependent PDEs with
//! causally weighted residual losses and adaptive causal collocation sampling.
//!
//! The crate is `no_std` (with `alloc`); file formats, configuration and the
//! command-line harness live in the companion `acsm-cli` crate.
//!
//! Module map:
//! - [`diffnet`]: tanh MLP, input-derivative jets, parameter gradients, Adam.
//! - [`embed`]: Fourier feature encoding of the spatial coordinate.
//! - [`pde`]: problem definitions, residuals, composite loss.
//! - [`causal`]: time partition, per-slice losses, causal weights.
//! - [`sampler`]: LHS and the fixed / dynamic / adaptive / adaptive-causal strategies.
//! - [`trainer`]: the training loop and relative-L2 evaluation.
//! - [`refsolver`]: Fourier pseudospectral ETDRK4 reference solver.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod causal;
pub mod diffnet;
pub mod embed;
mod error;
mod math;
pub mod pde;
pub mod refsolver;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
