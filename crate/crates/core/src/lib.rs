pub mod benchmark;
pub mod channel;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod stb_jmf;
pub mod stb_om;
pub mod stb_smf;

pub use error::{Error, Result};
