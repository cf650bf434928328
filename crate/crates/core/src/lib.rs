pub mod error;
pub mod evidence;
pub mod harness;
pub mod pipeline;
pub mod potts;
pub mod prototype;
pub mod seed;
pub mod triage;

pub use error::{Error, Result};
