pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod contrastive;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod optim;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
