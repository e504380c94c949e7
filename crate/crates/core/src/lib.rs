//! Coupled-mode simulation of optomechanical light storage and
//! optomechanically induced transparency (OMIT) in a whispering-gallery
//! resonator.
//!
//! Rates are angular, in rad/us; times are in us. Use [`mhz`] and
//! [`to_mhz`] to convert from and to ordinary frequencies.

pub mod analytic;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod numeric;
pub mod scenarios;
pub mod sequence;

pub use num_complex::Complex64;

pub use analytic::{
    adiabatic_retrieval_rate, mechanical_free_decay, omit_dip_width, omit_spectrum, omit_steady_state,
    optical_damping, OmitResponse, RetrievalRate,
};
pub use detection::{
    estimate_beat, gated_power, gated_power_scan, synthesize_beat, BeatEstimate, BeatRecord, FilterShape,
    GateConfig, GatedScan,
};
pub use dynamics::{integrate, Grid, ModeState, Trajectory};
pub use error::{Error, Result};
pub use model::{
    coupling_rate_from_power, cooperativity, mhz, to_mhz, validate_params, CouplingCalibration,
    MechanicalMode, OpticalMode, SystemParams, ValidationReport, PRESET_NAMES,
};
pub use scenarios::{
    fit_cooperativity, run_light_storage, run_omit_sweep, run_readout_series, run_storage_sweep,
    storage_energy_vs_delay, FitReport, Spectrum, SpectrumKind, StorageResult,
};
pub use sequence::{standard_sequence, PulseEnvelope, PulseSequence, SequenceKind, SequenceOverrides};
