//! Pulse envelopes and experiment timelines.
//!
//! A [`PulseSequence`] maps any time to the instantaneous drive coupling,
//! drive detuning and complex input-signal amplitude that enter the
//! coupled-mode equations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{coupling_rate_from_power, mhz, SystemParams};

/// Default cosine edge width (us).
pub const DEFAULT_EDGE_TIME: f64 = 0.02;
/// Time between t = 0 and the start of the writing pulse in the presets (us).
pub const LEAD_IN: f64 = 0.5;
/// Laser wavelength used to convert signal power into photon flux (nm).
pub const DEFAULT_WAVELENGTH_NM: f64 = 800.0;

const PLANCK: f64 = 6.626_070_15e-34;
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Amplitude `sqrt(photons/us)` of a signal with the given power.
pub fn photon_flux_amplitude(power_mw: f64, wavelength_nm: f64) -> f64 {
    let photon_energy = PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9);
    let photons_per_us = power_mw * 1e-3 / photon_energy * 1e-6;
    photons_per_us.max(0.0).sqrt()
}

/// Rectangular pulse whose edges are replaced by half-cosine ramps of width
/// `edge_time` centred on the nominal edges, so the pulse area stays
/// `peak * duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseEnvelope {
    pub t_start: f64,
    pub duration: f64,
    pub peak: f64,
    pub edge_time: f64,
}

impl PulseEnvelope {
    pub fn new(t_start: f64, duration: f64, peak: f64, edge_time: f64) -> Result<Self> {
        let e = Self {
            t_start,
            duration,
            peak,
            edge_time,
        };
        e.check()?;
        Ok(e)
    }

    fn check(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration", "pulse duration must be positive"));
        }
        if !(self.edge_time >= 0.0 && self.edge_time <= self.duration) {
            return Err(Error::invalid(
                "edge_time",
                format!(
                    "edge time must lie in [0, duration = {}], got {}",
                    self.duration, self.edge_time
                ),
            ));
        }
        if !(self.peak >= 0.0 && self.peak.is_finite()) {
            return Err(Error::invalid("peak", "pulse peak must be non-negative"));
        }
        if !self.t_start.is_finite() {
            return Err(Error::invalid("t_start", "must be finite"));
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration
    }

    /// Interval outside of which the envelope vanishes.
    pub fn support(&self) -> (f64, f64) {
        let half = self.edge_time / 2.0;
        (self.t_start - half, self.t_end() + half)
    }

    /// Envelope shape normalised to a unit flat top.
    pub fn unit_value(&self, t: f64) -> f64 {
        let e = self.edge_time;
        if e == 0.0 {
            return if t >= self.t_start && t < self.t_end() {
                1.0
            } else {
                0.0
            };
        }
        let (a, d) = self.support();
        if t < a || t >= d {
            0.0
        } else if t < a + e {
            0.5 * (1.0 - (PI * (t - a) / e).cos())
        } else if t < d - e {
            1.0
        } else {
            0.5 * (1.0 + (PI * (t - (d - e)) / e).cos())
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.peak * self.unit_value(t)
    }

    fn moved_to(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }
}

/// Convenience wrapper for [`PulseEnvelope::value`].
pub fn envelope_value(e: &PulseEnvelope, t: f64) -> f64 {
    e.value(t)
}

/// Weak signal injected into the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalInput {
    /// Peak amplitude in sqrt(photons/us).
    pub envelope: PulseEnvelope,
    /// Signal frequency minus cavity resonance (rad/us).
    pub detuning: f64,
    pub phase: f64,
}

/// Red-sideband drive. The envelope peak is the coupling rate `G` (rad/us).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveTone {
    pub envelope: PulseEnvelope,
    /// Drive frequency minus cavity resonance (rad/us).
    pub detuning: f64,
}

/// Instantaneous inputs of the mode equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveState {
    /// Coupling rate G (rad/us).
    pub coupling: f64,
    /// Drive detuning from the cavity (rad/us).
    pub detuning: f64,
    /// Input signal amplitude, sqrt(photons/us).
    pub signal: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSequence {
    pub writing: DriveTone,
    pub signal: SignalInput,
    pub readout: Option<DriveTone>,
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

impl PulseSequence {
    pub fn new(writing: DriveTone, signal: SignalInput, readout: Option<DriveTone>) -> Result<Self> {
        let s = Self {
            writing,
            signal,
            readout,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        self.writing.envelope.check()?;
        self.signal.envelope.check()?;
        if let Some(r) = &self.readout {
            r.envelope.check()?;
            if r.detuning != self.writing.detuning
                && overlaps(r.envelope.support(), self.writing.envelope.support())
            {
                return Err(Error::InvalidSequence(
                    "writing and readout overlap with different detunings".into(),
                ));
            }
        }
        Ok(())
    }

    /// Gap between the nominal end of writing and the start of readout (us).
    pub fn delay(&self) -> Option<f64> {
        self.readout
            .map(|r| r.envelope.t_start - self.writing.envelope.t_end())
    }

    /// Moves the readout pulse so it starts `delay` us after writing ends.
    pub fn with_delay(mut self, delay: f64) -> Result<Self> {
        if let Some(r) = self.readout.as_mut() {
            r.envelope = r.envelope.moved_to(self.writing.envelope.t_end() + delay);
        }
        self.check()?;
        Ok(self)
    }

    pub fn with_signal_detuning(mut self, detuning: f64) -> Self {
        self.signal.detuning = detuning;
        self
    }

    pub fn with_signal_phase(mut self, phase: f64) -> Self {
        self.signal.phase = phase;
        self
    }

    /// Last instant at which any pulse is non-zero.
    pub fn last_pulse_end(&self) -> f64 {
        let mut end = self.writing.envelope.support().1.max(self.signal.envelope.support().1);
        if let Some(r) = &self.readout {
            end = end.max(r.envelope.support().1);
        }
        end
    }

    /// Default simulation horizon: 1 us after the last pulse.
    pub fn suggested_end(&self) -> f64 {
        self.last_pulse_end() + 1.0
    }

    /// Largest coupling rate reached by any drive pulse.
    pub fn max_coupling(&self) -> f64 {
        let r = self.readout.map_or(0.0, |r| r.envelope.peak);
        self.writing.envelope.peak + r
    }

    /// Normalised drive (local-oscillator) shape at `t`, in [0, 1].
    pub fn drive_shape(&self, t: f64) -> f64 {
        let w = self.writing.envelope.unit_value(t);
        let r = self.readout.map_or(0.0, |r| r.envelope.unit_value(t));
        (w + r).min(1.0)
    }

    /// Detuning of the drive tone that is, or was most recently, active.
    pub fn drive_detuning_at(&self, t: f64) -> f64 {
        match &self.readout {
            Some(r) if t >= r.envelope.support().0 => r.detuning,
            _ => self.writing.detuning,
        }
    }

    pub fn at(&self, t: f64) -> Result<DriveState> {
        let w = self.writing.envelope.value(t);
        let (r, detuning) = match &self.readout {
            Some(r) => {
                let rv = r.envelope.value(t);
                if rv > 0.0 && w > 0.0 && r.detuning != self.writing.detuning {
                    return Err(Error::InvalidSequence(format!(
                        "writing and readout overlap at t = {t} us with different detunings"
                    )));
                }
                (rv, self.drive_detuning_at(t))
            }
            None => (0.0, self.writing.detuning),
        };
        let a = self.signal.envelope.value(t);
        Ok(DriveState {
            coupling: w + r,
            detuning,
            signal: Complex64::from_polar(a, self.signal.phase),
        })
    }
}

/// Drive coupling, drive detuning and signal amplitude at time `t`.
pub fn sequence_at(s: &PulseSequence, t: f64) -> Result<DriveState> {
    s.at(t)
}

/// Experiment timelines reproduced by the presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SequenceKind {
    /// 1 us write + signal, 8 us delay, 1 us readout.
    Fig3,
    /// 1 us write + signal, 6 us readout.
    Fig4,
    /// 8 us control with the signal on, no readout.
    Fig5Omit,
    /// 8 us write + signal followed by a 3 us readout at 1 mW.
    Fig5Storage,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 4] = [
        SequenceKind::Fig3,
        SequenceKind::Fig4,
        SequenceKind::Fig5Omit,
        SequenceKind::Fig5Storage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Fig3 => "fig3",
            SequenceKind::Fig4 => "fig4",
            SequenceKind::Fig5Omit => "fig5-omit",
            SequenceKind::Fig5Storage => "fig5-storage",
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SequenceKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Optional replacements for preset values. Rates are in rad/us, times in
/// us, powers in mW. A coupling takes precedence over the matching power.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SequenceOverrides {
    pub writing_coupling: Option<f64>,
    pub readout_coupling: Option<f64>,
    pub writing_power_mw: Option<f64>,
    pub readout_power_mw: Option<f64>,
    pub write_duration: Option<f64>,
    pub readout_duration: Option<f64>,
    pub delay: Option<f64>,
    pub signal_power_mw: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub signal_detuning: Option<f64>,
    pub signal_phase: Option<f64>,
    pub edge_time: Option<f64>,
    /// Drive detuning; defaults to the red sideband, -omega_m.
    pub drive_detuning: Option<f64>,
}

struct Timing {
    write_g: f64,
    write_duration: f64,
    readout: Option<(f64, f64, f64)>,
}

/// Builds the timeline of one of the reproduced experiments.
pub fn standard_sequence(
    kind: SequenceKind,
    p: &SystemParams,
    o: &SequenceOverrides,
) -> Result<PulseSequence> {
    let cal = &p.calibration;
    let readout_from_power = |mw: f64| coupling_rate_from_power(mw, cal);
    let base = match kind {
        SequenceKind::Fig3 => Timing {
            write_g: mhz(0.77),
            write_duration: 1.0,
            readout: Some((mhz(0.77), 1.0, 8.0)),
        },
        SequenceKind::Fig4 => Timing {
            write_g: mhz(0.45),
            write_duration: 1.0,
            readout: Some((mhz(0.45), 6.0, 1.0)),
        },
        SequenceKind::Fig5Omit => Timing {
            write_g: mhz(0.38),
            write_duration: 8.0,
            readout: None,
        },
        SequenceKind::Fig5Storage => Timing {
            write_g: mhz(0.38),
            write_duration: 8.0,
            readout: Some((readout_from_power(1.0)?, 3.0, 0.0)),
        },
    };

    let write_g = match (o.writing_coupling, o.writing_power_mw) {
        (Some(g), _) => g,
        (None, Some(mw)) => coupling_rate_from_power(mw, cal)?,
        (None, None) => base.write_g,
    };
    let write_duration = o.write_duration.unwrap_or(base.write_duration);
    let edge = o.edge_time.unwrap_or(DEFAULT_EDGE_TIME);
    let drive_detuning = o.drive_detuning.unwrap_or(-p.omega_m());
    let wavelength = o.wavelength_nm.unwrap_or(DEFAULT_WAVELENGTH_NM);
    let signal_amp = photon_flux_amplitude(o.signal_power_mw.unwrap_or(0.1), wavelength);

    let writing = DriveTone {
        envelope: PulseEnvelope::new(LEAD_IN, write_duration, write_g, edge)?,
        detuning: drive_detuning,
    };
    let signal = SignalInput {
        envelope: PulseEnvelope::new(LEAD_IN, write_duration, signal_amp, edge)?,
        detuning: o.signal_detuning.unwrap_or(0.0),
        phase: o.signal_phase.unwrap_or(0.0),
    };

    let readout = match base.readout {
        None => None,
        Some((g, duration, delay)) => {
            let g = match (o.readout_coupling, o.readout_power_mw) {
                (Some(g), _) => g,
                (None, Some(mw)) => readout_from_power(mw)?,
                (None, None) => g,
            };
            let duration = o.readout_duration.unwrap_or(duration);
            let delay = o.delay.unwrap_or(delay);
            if delay < 0.0 {
                return Err(Error::invalid("delay", "must be non-negative"));
            }
            Some(DriveTone {
                envelope: PulseEnvelope::new(LEAD_IN + write_duration + delay, duration, g, edge)?,
                detuning: drive_detuning,
            })
        }
    };
    PulseSequence::new(writing, signal, readout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::to_mhz;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pulse() -> PulseEnvelope {
        PulseEnvelope::new(1.0, 1.0, 1.0, 0.02).unwrap()
    }

    #[test]
    fn envelope_support_and_flat_top() {
        let e = pulse();
        assert_eq!(e.value(1.0 - 0.02 - 1e-9), 0.0);
        assert_eq!(e.value(0.5), 0.0);
        assert_eq!(e.value(1.5), 1.0);
        assert_relative_eq!(e.value(1.0), 0.5, epsilon = 1e-12);
        assert_eq!(e.value(2.2), 0.0);
    }

    #[test]
    fn zero_edge_is_exact_rectangle() {
        let e = PulseEnvelope::new(1.0, 1.0, 3.0, 0.0).unwrap();
        assert_eq!(e.value(1.0), 3.0);
        assert_eq!(e.value(1.999_999), 3.0);
        assert_eq!(e.value(2.0), 0.0);
        assert_eq!(e.value(0.999_999), 0.0);
    }

    #[test]
    fn envelope_rejects_bad_shapes() {
        assert!(PulseEnvelope::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(PulseEnvelope::new(0.0, 1.0, 1.0, 2.0).is_err());
        assert!(PulseEnvelope::new(0.0, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn dark_interval_has_no_drive() {
        let p = SystemParams::sample_a();
        let s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
        let d = s.at(LEAD_IN + 1.0 + 4.0).unwrap();
        assert_eq!(d.coupling, 0.0);
        assert_eq!(d.signal, Complex64::new(0.0, 0.0));
        assert_eq!(d.detuning, -p.omega_m());
    }

    #[test]
    fn fig3_preset_values() {
        let p = SystemParams::sample_a();
        let s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
        assert_relative_eq!(s.delay().unwrap(), 8.0, epsilon = 1e-12);
        assert_eq!(s.writing.envelope.duration, 1.0);
        let d = s.at(LEAD_IN + 0.5).unwrap();
        assert_relative_eq!(to_mhz(d.coupling), 0.77, max_relative = 1e-12);
        // 0.1 mW at 800 nm is about 4.0e8 photons/us.
        assert_relative_eq!(d.signal.norm_sqr(), photon_flux_amplitude(0.1, 800.0).powi(2));
        assert_relative_eq!(d.signal.norm_sqr(), 4.027e8, max_relative = 1e-3);
        let r = s.at(LEAD_IN + 1.0 + 8.0 + 0.5).unwrap();
        assert_relative_eq!(to_mhz(r.coupling), 0.77, max_relative = 1e-12);
        assert_eq!(r.signal.norm(), 0.0);
    }

    #[test]
    fn fig4_readout_couplings() {
        let p = SystemParams::sample_b();
        for g in [0.2, 0.45, 0.6] {
            let o = SequenceOverrides {
                readout_coupling: Some(mhz(g)),
                ..Default::default()
            };
            let s = standard_sequence(SequenceKind::Fig4, &p, &o).unwrap();
            let r = s.readout.unwrap();
            assert_eq!(r.envelope.duration, 6.0);
            let d = s.at(r.envelope.t_start + 3.0).unwrap();
            assert_relative_eq!(to_mhz(d.coupling), g, max_relative = 1e-12);
        }
    }

    #[test]
    fn fig5_presets() {
        let p = SystemParams::sample_b();
        let omit = standard_sequence(SequenceKind::Fig5Omit, &p, &Default::default()).unwrap();
        assert_eq!(omit.writing.envelope.duration, 8.0);
        assert!(omit.readout.is_none());
        let storage =
            standard_sequence(SequenceKind::Fig5Storage, &p, &Default::default()).unwrap();
        let r = storage.readout.unwrap();
        assert_eq!(r.envelope.duration, 3.0);
        assert_relative_eq!(to_mhz(r.envelope.peak), 0.45 * (1.0f64 / 1.6).sqrt());
    }

    #[test]
    fn kinds_parse_and_reject_unknown() {
        for k in SequenceKind::ALL {
            assert_eq!(k.name().parse::<SequenceKind>().unwrap(), k);
        }
        assert!("fig6".parse::<SequenceKind>().is_err());
    }

    #[test]
    fn overlapping_tones_with_different_detunings_are_rejected() {
        let p = SystemParams::sample_a();
        let mut s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
        let mut r = s.readout.unwrap();
        r.detuning += 1.0;
        assert!(PulseSequence::new(s.writing, s.signal, Some(r)).is_ok());
        r.envelope.t_start = s.writing.envelope.t_start + 0.5;
        assert!(matches!(
            PulseSequence::new(s.writing, s.signal, Some(r)),
            Err(Error::InvalidSequence(_))
        ));
        s.readout = Some(r);
        assert!(s.at(s.writing.envelope.t_start + 0.75).is_err());
    }

    #[test]
    fn writing_area_matches_peak_times_duration() {
        let p = SystemParams::sample_b();
        for kind in SequenceKind::ALL {
            let s = standard_sequence(kind, &p, &Default::default()).unwrap();
            let e = s.writing.envelope;
            let (a, b) = e.support();
            let n = 200_000;
            let h = (b - a) / n as f64;
            let area: f64 = (0..=n)
                .map(|k| {
                    let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                    w * e.value(a + k as f64 * h)
                })
                .sum::<f64>()
                * h;
            assert!((area - e.peak * e.duration).abs() <= 0.01 * e.peak * e.duration);
        }
    }

    proptest! {
        #[test]
        fn envelope_bounded(t in -2.0f64..5.0, edge in 0.0f64..0.5, peak in 0.0f64..10.0) {
            let e = PulseEnvelope::new(0.5, 1.0, peak, edge).unwrap();
            let v = e.value(t);
            prop_assert!(v >= 0.0 && v <= peak);
            let (a, b) = e.support();
            if t < a || t > b {
                prop_assert_eq!(v, 0.0);
            }
        }

        #[test]
        fn sequence_is_pure(t in 0.0f64..12.0) {
            let p = SystemParams::sample_a();
            let s = standard_sequence(SequenceKind::Fig3, &p, &Default::default()).unwrap();
            prop_assert_eq!(s.at(t).unwrap(), s.at(t).unwrap());
        }
    }
}
