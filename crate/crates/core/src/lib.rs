//! Stationary integrable polymers, O'Connell–Yor type diffusions and Monte Carlo
//! checks of their exact exponential-moment identities and tail bounds.

pub mod diffusion;
pub mod error;
pub mod harness;
pub mod identity;
pub mod law;
pub mod mellin;
pub mod polymer;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod tails;

pub use error::{Error, Result};
