//! Q-learning experts on small pixel games, compressed into max-pooled
//! student networks by policy distillation, with heatmap export from the
//! pre-pool activation maps.

pub mod cli;
pub mod distill;
pub mod env;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod kernel;
pub mod localize;
pub mod net;
pub mod netpbm;
pub mod rng;
pub mod tensor;
pub mod train;

pub use cli::cli_main;
pub use error::{Error, Result};
pub use tensor::Tensor;
