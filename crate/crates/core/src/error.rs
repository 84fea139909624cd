use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("signal too short: need {needed} samples, have {available}")]
    SignalTooShort { needed: usize, available: usize },

    #[error("source/track duration mismatch: track needs {needed} source samples, source has {available}")]
    DurationMismatch { needed: usize, available: usize },

    #[error("zero signal power: {0}")]
    ZeroPower(String),

    #[error("TDOA {tau:.6e} s is outside the geometry bound (0, {tau_max:.6e}] s")]
    OutOfGeometry { tau: f64, tau_max: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("average precision needs both classes, got only {0}")]
    SingleClass(&'static str),

    #[error("missing range label for presence-positive example {0}")]
    MissingRange(usize),

    #[error("file format error: {0}")]
    Format(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
