pub mod config;
pub mod correlator;
pub mod error;
pub mod faddeeva;
pub mod fit;
pub mod hyper;
pub mod linalg;
pub mod mle;
pub mod model;
pub mod pipeline;
pub mod poincare;
pub mod sim;
pub mod state;
pub mod tagfile;
pub mod tomography;

pub use error::{Error, Result};
