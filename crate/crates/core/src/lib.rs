//! Passive acoustic ranging of broadband sources from cepstrogram features.

pub mod acoustics;
pub mod augment;
pub mod baseline;
mod binio;
pub mod config;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod fft;
pub mod nn;
pub mod pipeline;
pub mod series;

pub use error::{Error, Result};
