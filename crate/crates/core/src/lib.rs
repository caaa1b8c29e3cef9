pub mod baselines;
pub mod cli;
pub mod crt;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod simulate;
pub mod vb;

pub use error::{LgnbError, Result};
