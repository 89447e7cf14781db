pub mod camera;
pub mod cli;
pub mod error;
pub mod io;
pub mod medium;
pub mod patterns;
pub mod recovery_set;
pub mod report;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
