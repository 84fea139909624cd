//! Synthetic shallow-water transit recordings with image-source multipath.

mod environment;
mod propagate;
mod source;
mod track;

pub use environment::{path_arrivals, two_path_difference, Arrival, Environment};
pub use propagate::{
    mix_at_snr, output_len, propagate, required_preroll, required_source_len, snr_gain, CROSSFADE,
};
pub use source::{
    ambient_psd, source_signal, source_signal_samples, ShapingFilter, SourceKind, KIND_B_TONALS,
    KIND_B_TONAL_DB,
};
pub use track::{make_transit_track, ScenarioConfig, TransitTrack};
