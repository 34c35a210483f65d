pub mod clt;
pub mod elliptical;
pub mod error;
pub mod harness;
pub mod mp_law;
pub mod normal;
pub mod pipeline;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod sphericity;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
