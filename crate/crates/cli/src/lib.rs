//! Library side of the `optostore` command: configuration, scenario
//! execution and output handling.

pub mod config;
pub mod run;

use std::fmt::Write as _;

use optostore::{to_mhz, SequenceKind, SystemParams, PRESET_NAMES};

/// Exit status for configuration and validation errors.
pub const EXIT_CONFIG: u8 = 1;
/// Exit status for simulation failures and I/O errors.
pub const EXIT_RUNTIME: u8 = 2;

/// Exit status for an error raised anywhere in a run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use optostore::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter { .. }
                | E::InvalidSequence(_)
                | E::UnknownPreset(_)
                | E::StepTooCoarse { .. }
                | E::Undersampled(_)
                | E::EmptyGate { .. } => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() || cause.downcast_ref::<run::ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
    }
    EXIT_RUNTIME
}

/// Text for `list-presets`.
pub fn presets_text() -> String {
    let mut out = String::from("samples (omega_m, gamma_m, kappa)/2pi:\n");
    for name in PRESET_NAMES {
        let p = SystemParams::preset(name).expect("listed preset");
        let fmt = |x: f64| format!("{}", (to_mhz(x) * 1e6).round() / 1e6);
        let _ = writeln!(
            out,
            "  {name}: ({}, {}, {}) MHz",
            fmt(p.omega_m()),
            fmt(p.gamma_m()),
            fmt(p.kappa())
        );
    }
    let names: Vec<&str> = SequenceKind::ALL.iter().map(|k| k.name()).collect();
    let _ = writeln!(out, "scenarios: {}", names.join(", "));
    out
}
