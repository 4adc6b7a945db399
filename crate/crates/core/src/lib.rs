pub mod analysis;
pub mod error;
pub mod io;
pub mod kpa;
pub mod pipeline;
pub mod reproduce;
pub mod ridge;
pub mod signals;
pub mod synthesis;
pub mod tfa;

pub use error::{Error, Result};
