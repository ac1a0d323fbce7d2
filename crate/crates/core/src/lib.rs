//! Monte-Carlo laboratory for Hölder flows of `X_t = x + W_t + ∫_0^t b(s, X_s) ds`,
//! dyadic chaining estimates, two-point moment bounds and defect-function
//! uniqueness experiments.

pub mod brownian;
pub mod chaining;
pub mod cli;
pub mod drift;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod moments;
pub mod rng;
pub mod stats;
pub mod uniqueness;

pub use brownian::DyadicBrownianPath;
pub use drift::{DriftSpec, Exponent, ExponentBundle};
pub use dyadic::DyadicTime;
pub use error::{Error, Result};
