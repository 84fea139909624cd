//! Power spectra, power cepstra, liftering and cepstrogram features.

mod cepstrum;
mod normalize;
mod spectrum;

pub use cepstrum::{
    cepstrogram, cepstrum, lifter, liftered_cepstrum, Cepstrum, CepstrogramFeature, LifterWindow,
    suppress_lines, LineSuppression, SpectralParams, LIFTER_HIGH_TIME, LIFTER_LOW_TIME,
};
pub use normalize::{apply_normalization, fit_normalization, NormStats, NORM_EPSILON};
pub use spectrum::{power_spectrum, PowerSpectrum};
