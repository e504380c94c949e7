//! Run configuration, read from TOML.
//!
//! Frequencies are in MHz (ordinary, not angular), times in us and powers
//! in mW. Every key is optional; unknown keys are rejected.
//!
//! ```toml
//! sample = "sample-b"
//! scenario = "fig5-omit"
//!
//! [params]
//! kappa_mhz = 20.0
//!
//! [sequence]
//! writing_coupling_mhz = 0.38
//!
//! [detection]
//! rbw_mhz = 1.0
//! ```

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

use optostore::dynamics::{default_step, Grid};
use optostore::{
    mhz, CouplingCalibration, FilterShape, MechanicalMode, OpticalMode, PulseSequence, SequenceKind,
    SequenceOverrides, SystemParams,
};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Device preset, `sample-a` (default) or `sample-b`.
    pub sample: Option<String>,
    /// `fig3` (default), `fig4`, `fig5-omit` or `fig5-storage`.
    pub scenario: Option<String>,
    #[serde(default)]
    pub params: ParamsConfig,
    pub calibration: Option<CalibrationConfig>,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// Overrides of the preset's device parameters.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub omega_m_mhz: Option<f64>,
    pub gamma_m_mhz: Option<f64>,
    pub kappa_mhz: Option<f64>,
    /// Defaults to half of `kappa_mhz` (critical coupling).
    pub kappa_ext_mhz: Option<f64>,
}

/// One reference point of the power-to-coupling calibration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub power_mw: f64,
    pub coupling_mhz: f64,
}

/// Pulse-timeline overrides; unset keys keep the scenario's values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub writing_coupling_mhz: Option<f64>,
    pub readout_coupling_mhz: Option<f64>,
    pub writing_power_mw: Option<f64>,
    pub readout_power_mw: Option<f64>,
    pub write_duration_us: Option<f64>,
    pub readout_duration_us: Option<f64>,
    pub delay_us: Option<f64>,
    /// Default 0.1 mW.
    pub signal_power_mw: Option<f64>,
    /// Default 800 nm.
    pub wavelength_nm: Option<f64>,
    /// Signal detuning from the cavity; default 0.
    pub signal_detuning_mhz: Option<f64>,
    pub signal_phase_rad: Option<f64>,
    /// Rise/fall time of every pulse; default 0.02 us.
    pub edge_time_us: Option<f64>,
    /// Drive detuning from the cavity; default `-omega_m`.
    pub drive_detuning_mhz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Integration step; default `min(0.02/kappa, edge/4, 0.05/fastest rate)`.
    pub dt_us: Option<f64>,
    /// Simulation horizon; default 1 us after the last pulse.
    pub t_end_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Default 0.1 us for time traces, 1 us for spectra.
    pub gate_length_us: Option<f64>,
    /// Default 30 MHz for time traces, 1 MHz for spectra.
    pub rbw_mhz: Option<f64>,
    /// Spacing of gated time traces; default 0.01 us.
    pub scan_step_us: Option<f64>,
    /// `single-pole` (default) or `gaussian`.
    pub filter: Option<FilterShape>,
    /// OMIT gate start after the control switches on; default 6.5 us.
    pub gate_offset_us: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit signal detunings from the cavity. Without them the spectra
    /// use 201 points over +-3 kappa plus 41 over +-3 (1 + C) gamma_m.
    pub detunings_mhz: Option<Vec<f64>>,
    /// fig3: also tabulate retrieved energy against these delays.
    pub delays_us: Option<Vec<f64>>,
    /// fig4: readout couplings; default [0.2, 0.45, 0.6].
    pub readout_couplings_mhz: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn scenario(&self) -> anyhow::Result<SequenceKind> {
        Ok(self.scenario.as_deref().unwrap_or("fig3").parse()?)
    }

    pub fn system_params(&self) -> anyhow::Result<SystemParams> {
        let mut p = SystemParams::preset(self.sample.as_deref().unwrap_or("sample-a"))?;
        let q = &self.params;
        if q.kappa_mhz.is_some() || q.kappa_ext_mhz.is_some() {
            let kappa = q.kappa_mhz.map_or(p.kappa(), mhz);
            let kappa_ext = q.kappa_ext_mhz.map_or(kappa / 2.0, mhz);
            p.optical = OpticalMode::new(kappa, kappa_ext).context("params")?;
        }
        if q.omega_m_mhz.is_some() || q.gamma_m_mhz.is_some() {
            p.mechanical = MechanicalMode::new(
                q.omega_m_mhz.map_or(p.omega_m(), mhz),
                q.gamma_m_mhz.map_or(p.gamma_m(), mhz),
            )
            .context("params")?;
        }
        if let Some(c) = &self.calibration {
            p.calibration =
                CouplingCalibration::reference(c.power_mw, mhz(c.coupling_mhz)).context("calibration")?;
        }
        if self.sample.is_some() || self.params.omega_m_mhz.is_some() {
            p.label = self.sample.clone().unwrap_or_else(|| "custom".into());
        }
        Ok(p)
    }

    pub fn overrides(&self) -> SequenceOverrides {
        let s = &self.sequence;
        SequenceOverrides {
            writing_coupling: s.writing_coupling_mhz.map(mhz),
            readout_coupling: s.readout_coupling_mhz.map(mhz),
            writing_power_mw: s.writing_power_mw,
            readout_power_mw: s.readout_power_mw,
            write_duration: s.write_duration_us,
            readout_duration: s.readout_duration_us,
            delay: s.delay_us,
            signal_power_mw: s.signal_power_mw,
            wavelength_nm: s.wavelength_nm,
            signal_detuning: s.signal_detuning_mhz.map(mhz),
            signal_phase: s.signal_phase_rad,
            edge_time: s.edge_time_us,
            drive_detuning: s.drive_detuning_mhz.map(mhz),
        }
    }

    pub fn grid(&self, s: &PulseSequence, p: &SystemParams) -> anyhow::Result<Grid> {
        let g = Grid::new(
            self.grid.t_end_us.unwrap_or_else(|| s.suggested_end()),
            self.grid.dt_us.unwrap_or_else(|| default_step(s, p)),
        );
        if !(g.t_end > 0.0 && g.dt > 0.0) {
            bail!("grid: t_end_us and dt_us must be positive");
        }
        Ok(g)
    }

    /// Signal detunings (rad/us) for the spectra, if given explicitly.
    pub fn detunings(&self) -> anyhow::Result<Option<Vec<f64>>> {
        match &self.sweep.detunings_mhz {
            None => Ok(None),
            Some(d) => {
                if d.is_empty() || d.windows(2).any(|w| !(w[1] > w[0])) {
                    bail!("sweep.detunings_mhz must be non-empty and strictly increasing");
                }
                Ok(Some(d.iter().map(|v| mhz(*v)).collect()))
            }
        }
    }
}
