pub mod checks;
pub mod density;
pub mod effects;
pub mod error;
pub mod experiment;
pub mod fbm;
pub mod hurst;
pub mod mle;
pub mod oracle;
pub mod quad;
pub mod report;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod theory;
pub mod tri;

pub use error::{Error, Result};
pub use hurst::{HurstModel, TimeGrid};
