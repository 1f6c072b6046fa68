pub mod auth;
pub mod error;
pub mod features;
pub mod httest;
pub mod learn;
pub mod library;
pub mod mfdfa;
pub mod signal;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
