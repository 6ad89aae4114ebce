//! Adaptive friction compensation without velocity measurement.
//!
//! The crate couples an immersion-and-invariance velocity observer with a
//! certainty-equivalent tracking controller, and provides the tooling to
//! validate both numerically:
//!
//! - [`models`]: plant vector fields (tanh friction, hydro-mechanical, LuGre),
//! - [`observer`]: the adaptive observer, its Lyapunov functions and the
//!   hydro-mechanical gain certificate,
//! - [`controller`]: tracking law and reference generators,
//! - [`excitation`]: regressor Gram-matrix analysis,
//! - [`engine`]: fixed-step RK4 closed-loop simulation and metrics,
//! - [`cli`]: scenario files, batch runs, manifests and plot scripts.

// Range checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod controller;
pub mod engine;
pub mod error;
pub mod excitation;
pub mod models;
pub mod observer;

pub use error::{Error, Result};
