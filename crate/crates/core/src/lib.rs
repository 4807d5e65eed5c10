//! IRS-assisted ultrawideband downlink model.
//!
//! An access point with a planar array illuminates an intelligent reflecting
//! surface, which redirects the signal to a single-antenna user. With a wide
//! band and fixed (central) AP steering, different frequencies land on
//! different parts of the IRS (beam split). This crate models that channel
//! and provides six IRS phase configuration techniques:
//!
//! * `UB`: per-frequency phase alignment, an unattainable upper bound;
//! * `NB` / `NBF`: narrowband alignment at the spectrum barycenter, exact
//!   and far-field (linear phase) variants;
//! * `ED`: phase of the principal eigenvector of the received-power kernel;
//! * `SLO` / `ALO`: local optimization, tuning each IRS point to the
//!   frequency that reaches it most strongly and fitting a phase map to the
//!   resulting Snell gradients by least squares.
//!
//! [`metrics`] evaluates received power, spectral distortion and their
//! normalized forms; [`harness`] runs declarative scenarios and writes CSV
//! and JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod configurators;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod spectrum;
pub mod wavefield;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub use configurators::{
    configure, configure_alo, configure_ed, configure_nb, configure_nbf, configure_slo,
    fit_phase_lsq, freq_alo, freq_slo, snell_gradient, upper_bound_envelope, EdOptions, EdOutcome,
    FrequencyMap, GradientField, LsqOptions, Technique,
};
pub use error::{Error, Result};
pub use geometry::{build_scene, rotation_matrix, ApArraySpec, IrsGridSpec, SceneGeometry};
pub use metrics::MetricReport;
pub use spectrum::{make_spectrum, BandSet, SignalSpectrum, SpectrumShape};
pub use wavefield::{
    incident_field, scattered_component, transfer_function, BeamMode, BeamformerSpec,
    IncidentField, IrsResponse, PhaseMap, Precision, TransferFunction, UncontrollableResponse,
};
