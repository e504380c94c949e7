//! Experiment runners built from the sequence, dynamics and detection
//! layers: light storage, storage lifetime, readout-power series, OMIT and
//! storage spectra, and the cooperativity fit.
//!
//! Spectra are indexed by the signal-minus-control frequency in MHz. With
//! the control on the red sideband the two-photon resonance sits at
//! `omega_m / 2 pi`.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::omit_steady_state;
use crate::detection::{
    gated_power, gated_power_scan, synthesize_beat, BeatRecord, FilterShape, GateConfig, GatedScan,
};
use crate::dynamics::{integrate, Grid, ModeState, Trajectory};
use crate::error::{Error, Result};
use crate::model::{cooperativity, mhz, to_mhz, SystemParams};
use crate::numeric::{crossing, exponential_fit, golden_section, median};
use crate::sequence::{standard_sequence, PulseSequence, SequenceKind, SequenceOverrides};

/// Runs the integrator on the sequence's default grid from rest.
pub fn simulate(p: &SystemParams, s: &PulseSequence) -> Result<Trajectory> {
    integrate(s, p, Grid::for_sequence(s, p), ModeState::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Omit,
    Storage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Signal minus control frequency (MHz), strictly increasing.
    pub detunings_mhz: Vec<f64>,
    pub powers: Vec<f64>,
    pub kind: SpectrumKind,
    /// Control detuning from the cavity (rad/us).
    pub drive_detuning: f64,
    /// Set when the gate may not sample the steady state.
    pub steady_state_warning: bool,
}

impl Spectrum {
    /// Signal detuning from the cavity (rad/us) of point `i`.
    pub fn signal_detuning(&self, i: usize) -> f64 {
        mhz(self.detunings_mhz[i]) + self.drive_detuning
    }

    /// Writes `detuning_mhz,power`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["detuning_mhz", "power"])?;
        for (d, p) in self.detunings_mhz.iter().zip(&self.powers) {
            out.write_record(&[d.to_string(), p.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StorageResult {
    pub trajectory: Trajectory,
    pub beat: BeatRecord,
    pub scan: GatedScan,
    /// Photons emitted over the readout pulse.
    pub retrieved_energy: f64,
    /// `|beta|^2` where the writing pulse has fully ended.
    pub written_phonons: f64,
    /// `|beta|^2` where the readout pulse begins.
    pub stored_phonons: f64,
}

fn readout_of(s: &PulseSequence) -> Result<(f64, f64)> {
    s.readout
        .map(|r| r.envelope.support())
        .ok_or_else(|| Error::InvalidSequence("sequence has no readout pulse".into()))
}

/// Photons emitted during the readout pulse of `traj`.
pub fn retrieved_energy(traj: &Trajectory) -> Result<f64> {
    let (r0, r1) = readout_of(&traj.sequence)?;
    Ok(traj.emitted_energy(r0, r1.min(traj.t_end())))
}

/// Integrate, synthesise the beat and scan the gate over the whole record
/// starting at `gate.gate_start` with spacing `step`.
pub fn run_light_storage(
    p: &SystemParams,
    s: &PulseSequence,
    gate: &GateConfig,
    step: f64,
) -> Result<StorageResult> {
    readout_of(s)?;
    storage_from_trajectory(simulate(p, s)?, gate, step)
}

/// The detection half of [`run_light_storage`] for an existing trajectory.
pub fn storage_from_trajectory(
    trajectory: Trajectory,
    gate: &GateConfig,
    step: f64,
) -> Result<StorageResult> {
    let s = &trajectory.sequence;
    let (r0, _) = readout_of(s)?;
    let beat = synthesize_beat(&trajectory, &trajectory.params, 1.0)?;
    let scan = gated_power_scan(&beat, gate, step)?;
    let w1 = s.writing.envelope.support().1.max(s.signal.envelope.support().1);
    Ok(StorageResult {
        retrieved_energy: retrieved_energy(&trajectory)?,
        written_phonons: trajectory.state_at(w1).beta.norm_sqr(),
        stored_phonons: trajectory.state_at(r0).beta.norm_sqr(),
        trajectory,
        beat,
        scan,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySeries {
    pub delays: Vec<f64>,
    pub energies: Vec<f64>,
    /// Energy decay rate of a single-exponential fit (rad/us).
    pub fitted_rate: Option<f64>,
}

/// Retrieved energy for each readout delay.
pub fn storage_energy_vs_delay(
    p: &SystemParams,
    base: &PulseSequence,
    delays: &[f64],
) -> Result<DelaySeries> {
    readout_of(base)?;
    if let Some(d) = delays.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::invalid("delay", format!("{d} is negative")));
    }
    let energies = delays
        .par_iter()
        .map(|d| {
            let s = base.clone().with_delay(*d)?;
            retrieved_energy(&simulate(p, &s)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_rate = if delays.len() >= 2 {
        exponential_fit(delays, &energies).map(|(_, r)| r)
    } else {
        None
    };
    Ok(DelaySeries {
        delays: delays.to_vec(),
        energies,
        fitted_rate,
    })
}

#[derive(Debug, Clone)]
pub struct ReadoutTrace {
    pub coupling: f64,
    pub beat: BeatRecord,
    /// Grid times inside the readout pulse.
    pub times: Vec<f64>,
    /// Emitted amplitude `sqrt(kappa_ext) |alpha|` at `times`.
    pub envelope: Vec<f64>,
    pub retrieved_energy: f64,
    /// Amplitude decay rate of `envelope` (rad/us); `None` without readout
    /// coupling.
    pub fitted_rate: Option<f64>,
}

/// Time excluded from the envelope fit after the readout switches on, in
/// units of the cavity lifetime `1 / kappa`.
const FIT_SETTLE_LIFETIMES: f64 = 20.0;

/// The fig4 experiment repeated for each readout coupling (rad/us).
pub fn run_readout_series(
    p: &SystemParams,
    couplings: &[f64],
    overrides: &SequenceOverrides,
) -> Result<Vec<ReadoutTrace>> {
    couplings
        .par_iter()
        .map(|&g| {
            let o = SequenceOverrides {
                readout_coupling: Some(g),
                ..overrides.clone()
            };
            let s = standard_sequence(SequenceKind::Fig4, p, &o)?;
            let traj = simulate(p, &s)?;
            let beat = synthesize_beat(&traj, p, 1.0)?;
            let r = s.readout.expect("fig4 has a readout pulse").envelope;
            let (r0, r1) = r.support();
            let sqrt_ke = p.kappa_ext().sqrt();
            let (times, envelope): (Vec<f64>, Vec<f64>) = traj
                .times
                .iter()
                .zip(&traj.alpha)
                .filter(|(t, _)| **t >= r0 && **t <= r1)
                .map(|(t, a)| (*t, sqrt_ke * a.norm()))
                .unzip();
            let fit_from = r.t_start + r.edge_time + FIT_SETTLE_LIFETIMES / p.kappa();
            let fit_to = r.t_end() - r.edge_time;
            let (ft, fe): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&envelope)
                .filter(|(t, _)| **t >= fit_from && **t <= fit_to)
                .map(|(t, e)| (*t, *e))
                .unzip();
            let fitted_rate = if g > 0.0 {
                exponential_fit(&ft, &fe).map(|(_, r)| r)
            } else {
                None
            };
            Ok(ReadoutTrace {
                coupling: g,
                retrieved_energy: retrieved_energy(&traj)?,
                beat,
                times,
                envelope,
                fitted_rate,
            })
        })
        .collect()
}

/// Default signal-detuning grid (rad/us): 201 points over `+-3 kappa` and 41
/// points over `+-3 (1 + C) gamma_m`, merged.
pub fn default_detuning_grid(p: &SystemParams, coupling: f64) -> Vec<f64> {
    let c = cooperativity(coupling, p.gamma_m(), p.kappa()).unwrap_or(0.0);
    let wide = 3.0 * p.kappa();
    let narrow = 3.0 * (1.0 + c) * p.gamma_m();
    let mut grid: Vec<f64> = (0..201)
        .map(|k| -wide + 2.0 * wide * k as f64 / 200.0)
        .chain((0..41).map(|k| -narrow + 2.0 * narrow * k as f64 / 40.0))
        .collect();
    grid.sort_by(f64::total_cmp);
    let tol = 1e-9 * wide.max(narrow);
    grid.dedup_by(|a, b| (*a - *b).abs() <= tol);
    grid
}

fn check_grid(detunings: &[f64]) -> Result<()> {
    if detunings.is_empty() {
        return Err(Error::invalid("detunings", "empty grid"));
    }
    if detunings.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("detunings", "must be strictly increasing"));
    }
    Ok(())
}

/// Control pulse and detection gate of an OMIT sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct OmitOptions {
    /// Control (and signal) duration, us.
    pub control_duration: f64,
    /// Gate start measured from the start of the control, us.
    pub gate_offset: f64,
    pub gate_length: f64,
    /// MHz.
    pub rbw: f64,
    pub filter: FilterShape,
    pub overrides: SequenceOverrides,
}

impl Default for OmitOptions {
    fn default() -> Self {
        Self {
            control_duration: 8.0,
            gate_offset: 6.5,
            gate_length: 1.0,
            rbw: 1.0,
            filter: FilterShape::SinglePole,
            overrides: SequenceOverrides::default(),
        }
    }
}

/// Gated transmission of the signal through the driven cavity, one run per
/// signal detuning (rad/us).
pub fn run_omit_sweep(
    p: &SystemParams,
    coupling: f64,
    detunings: &[f64],
    opts: &OmitOptions,
) -> Result<Spectrum> {
    check_grid(detunings)?;
    let gate_end = opts.gate_offset + opts.gate_length;
    if opts.gate_offset < 0.0 || gate_end > opts.control_duration + 1e-9 {
        return Err(Error::invalid("gate", "must lie inside the control pulse"));
    }
    let base = SequenceOverrides {
        writing_coupling: Some(coupling),
        write_duration: Some(opts.control_duration),
        ..opts.overrides.clone()
    };
    let template = standard_sequence(SequenceKind::Fig5Omit, p, &base)?;
    let drive_detuning = template.writing.detuning;
    let gate_start = template.writing.envelope.t_start + opts.gate_offset;
    let powers = detunings
        .par_iter()
        .map(|&d| {
            let s = template.clone().with_signal_detuning(d);
            let traj = simulate(p, &s)?;
            let beat = synthesize_beat(&traj, p, 1.0)?;
            let center = to_mhz(d - drive_detuning).abs();
            let g = GateConfig::new(gate_start, opts.gate_length, opts.rbw, center)?
                .with_filter(opts.filter);
            gated_power(&beat, &g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        detunings_mhz: detunings.iter().map(|d| to_mhz(d - drive_detuning)).collect(),
        powers,
        kind: SpectrumKind::Omit,
        drive_detuning,
        steady_state_warning: opts.gate_offset < omit_settling_time(p, coupling)?,
    })
}

/// Five amplitude lifetimes of the dressed mechanical mode,
/// `5 / ((1 + C) gamma_m / 2)`: the control time an OMIT gate should wait.
pub fn omit_settling_time(p: &SystemParams, coupling: f64) -> Result<f64> {
    let c = cooperativity(coupling, p.gamma_m(), p.kappa())?;
    Ok(10.0 / ((1.0 + c) * p.gamma_m()))
}

/// Detection gate for a storage sweep, centred on the readout pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSweepOptions {
    pub gate_length: f64,
    pub rbw: f64,
    pub filter: FilterShape,
}

impl Default for StorageSweepOptions {
    fn default() -> Self {
        Self {
            gate_length: 1.0,
            rbw: 1.0,
            filter: FilterShape::SinglePole,
        }
    }
}

/// Gated power of the retrieved pulse versus signal detuning (rad/us).
pub fn run_storage_sweep(
    p: &SystemParams,
    base: &PulseSequence,
    detunings: &[f64],
    opts: &StorageSweepOptions,
) -> Result<Spectrum> {
    check_grid(detunings)?;
    let readout = base
        .readout
        .ok_or_else(|| Error::InvalidSequence("storage sweep needs a readout pulse".into()))?;
    let r = readout.envelope;
    let gate_start = r.t_start + 0.5 * (r.duration - opts.gate_length);
    // retrieved light leaves at the cavity resonance
    let center = to_mhz(readout.detuning.abs());
    let gate = GateConfig::new(gate_start, opts.gate_length, opts.rbw, center)?.with_filter(opts.filter);
    let drive_detuning = base.writing.detuning;
    let powers = detunings
        .par_iter()
        .map(|&d| {
            let s = base.clone().with_signal_detuning(d);
            let beat = synthesize_beat(&simulate(p, &s)?, p, 1.0)?;
            gated_power(&beat, &gate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        detunings_mhz: detunings.iter().map(|d| to_mhz(d - drive_detuning)).collect(),
        powers,
        kind: SpectrumKind::Storage,
        drive_detuning,
        steady_state_warning: false,
    })
}

/// Power divided by the bare cavity Lorentzian `1 / (kappa^2/4 + delta^2)`.
fn normalized(spec: &Spectrum, p: &SystemParams) -> Vec<f64> {
    let k2 = p.kappa() * p.kappa() / 4.0;
    spec.powers
        .iter()
        .enumerate()
        .map(|(i, v)| v * (k2 + spec.signal_detuning(i).powi(2)))
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Detuning (MHz) of the transparency dip, after removing the cavity line.
pub fn dip_position(spec: &Spectrum, p: &SystemParams) -> f64 {
    spec.detunings_mhz[argmin(&normalized(spec, p))]
}

/// Detuning (MHz) of the largest power.
pub fn peak_position(spec: &Spectrum) -> f64 {
    let i = spec
        .powers
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    spec.detunings_mhz[i]
}

/// Indices on the outer half of the detuning range, where the control
/// barely changes the cavity response.
fn outer_points(spec: &Spectrum) -> Vec<usize> {
    let n = spec.powers.len();
    let span = (0..n).map(|i| spec.signal_detuning(i).abs()).fold(0.0, f64::max);
    (0..n)
        .filter(|&i| span > 0.0 && spec.signal_detuning(i).abs() >= 0.5 * span)
        .collect()
}

/// Full width at half depth (MHz) of the dip, with the depth measured
/// from the off-dip median of the cavity-normalised spectrum.
pub fn dip_width(spec: &Spectrum, p: &SystemParams) -> Result<f64> {
    let n = normalized(spec, p);
    let outer: Vec<f64> = outer_points(spec).iter().map(|&i| n[i]).collect();
    let base = median(&outer).ok_or_else(|| Error::InsufficientSignal("no off-dip points".into()))?;
    let i0 = argmin(&n);
    let level = 0.5 * (base + n[i0]);
    if !(n[i0] < base * (1.0 - 1e-6)) {
        return Err(Error::InsufficientSignal("no dip below the envelope".into()));
    }
    let x = &spec.detunings_mhz;
    let left = (1..=i0)
        .rev()
        .find(|&i| n[i - 1] >= level)
        .map(|i| crossing(x[i - 1], n[i - 1], x[i], n[i], level));
    let right = (i0..n.len() - 1)
        .find(|&i| n[i + 1] >= level)
        .map(|i| crossing(x[i], n[i], x[i + 1], n[i + 1], level));
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::InsufficientSignal("dip is not resolved on the grid".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub cooperativity: f64,
    /// Implied control coupling, MHz.
    pub coupling_mhz: f64,
    /// Amplitude factor between data and the unit-input model.
    pub scale: f64,
    /// Residual norm relative to the data norm.
    pub residual: f64,
    pub iterations: usize,
}

const FIT_C_MAX: f64 = 1e3;

/// One-parameter least-squares fit of the closed-form OMIT response to an
/// OMIT spectrum. The amplitude is fixed by the median data/model ratio on
/// the outer half of the detuning range.
pub fn fit_cooperativity(spec: &Spectrum, p: &SystemParams) -> Result<(f64, FitReport)> {
    check_grid(&spec.detunings_mhz)?;
    let deltas: Vec<f64> = (0..spec.powers.len()).map(|i| spec.signal_detuning(i)).collect();
    let outer = outer_points(spec);
    if outer.is_empty() {
        return Err(Error::InsufficientSignal("spectrum has no off-dip points".into()));
    }
    let norm: f64 = spec.powers.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::InsufficientSignal("spectrum is zero".into()));
    }
    let gk = p.gamma_m() * p.kappa() / 4.0;
    let one = Complex64::new(1.0, 0.0);

    let evaluate = |c: f64| -> Option<(f64, f64)> {
        let g = (c.max(0.0) * gk).sqrt();
        let model: Vec<f64> = deltas
            .iter()
            .map(|d| omit_steady_state(*d, g, p, one).map(|r| r.emitted_power))
            .collect::<Result<_>>()
            .ok()?;
        let ratios: Vec<f64> = outer.iter().map(|&i| spec.powers[i] / model[i]).collect();
        let scale = median(&ratios)?;
        let sse: f64 = spec
            .powers
            .iter()
            .zip(&model)
            .map(|(y, m)| (y - scale * m).powi(2))
            .sum();
        Some((sse.sqrt() / norm, scale))
    };
    let cost = |c: f64| evaluate(c).map_or(f64::INFINITY, |(r, _)| r);

    let mut candidates = vec![0.0];
    candidates.extend((0..=140).map(|k| 10f64.powf(-4.0 + 7.0 * k as f64 / 140.0)));
    let costs: Vec<f64> = candidates.iter().map(|c| cost(*c)).collect();
    let best = argmin(&costs);
    if !costs[best].is_finite() {
        return Err(Error::NoConvergence("model undefined on the whole bracket".into()));
    }
    if best == candidates.len() - 1 {
        return Err(Error::NoConvergence(format!(
            "best cooperativity at the bracket edge {FIT_C_MAX}"
        )));
    }
    let lo = candidates[best.saturating_sub(1)];
    let hi = candidates[best + 1];
    let (c, _, iterations) = golden_section(cost, lo, hi, 1e-6 * candidates[best].max(1e-6), 500);
    let (residual, scale) =
        evaluate(c).ok_or_else(|| Error::NoConvergence("model undefined at the optimum".into()))?;
    Ok((
        c,
        FitReport {
            cooperativity: c,
            coupling_mhz: to_mhz((c * gk).sqrt()),
            scale,
            residual,
            iterations,
        },
    ))
}

/// Closed-form OMIT spectrum on `detunings` (rad/us), for synthetic input
/// to [`fit_cooperativity`].
pub fn analytic_spectrum(p: &SystemParams, coupling: f64, detunings: &[f64]) -> Result<Spectrum> {
    check_grid(detunings)?;
    let drive_detuning = -p.omega_m();
    let powers = crate::analytic::omit_spectrum(detunings, coupling, p)?;
    Ok(Spectrum {
        detunings_mhz: detunings.iter().map(|d| to_mhz(d - drive_detuning)).collect(),
        powers,
        kind: SpectrumKind::Omit,
        drive_detuning,
        steady_state_warning: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_grid_contains_resonance_and_is_sorted() {
        let p = SystemParams::sample_b();
        let g = default_detuning_grid(&p, mhz(0.38));
        assert!(g.contains(&0.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.len(), 201 + 41 - 1);
        assert_relative_eq!(g[0], -3.0 * p.kappa());
    }

    #[test]
    fn fit_round_trip_on_closed_form() {
        let p = SystemParams::sample_b();
        for c in [0.0, 0.301, 10.0] {
            let g = (c * p.gamma_m() * p.kappa() / 4.0).sqrt();
            let spec = analytic_spectrum(&p, g, &default_detuning_grid(&p, g)).unwrap();
            let (fit, report) = fit_cooperativity(&spec, &p).unwrap();
            if c == 0.0 {
                assert!(fit < 1e-3);
            } else {
                assert_relative_eq!(fit, c, max_relative = 1e-3);
            }
            assert!(report.residual < 1e-4);
        }
    }

    #[test]
    fn closed_form_dip_width() {
        let p = SystemParams::sample_b();
        let g = mhz(0.38);
        let mut grid = default_detuning_grid(&p, g);
        grid.extend((0..401).map(|k| -2.0 + 4.0 * k as f64 / 400.0));
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let spec = analytic_spectrum(&p, g, &grid).unwrap();
        let c = cooperativity(g, p.gamma_m(), p.kappa()).unwrap();
        let want = to_mhz((1.0 + c) * p.gamma_m());
        assert_relative_eq!(dip_width(&spec, &p).unwrap(), want, max_relative = 0.05);
        assert_relative_eq!(dip_position(&spec, &p), to_mhz(p.omega_m()), epsilon = 1e-9);
    }

    #[test]
    fn flat_spectrum_has_no_dip() {
        let p = SystemParams::sample_b();
        let spec = analytic_spectrum(&p, 0.0, &default_detuning_grid(&p, 0.0)).unwrap();
        assert!(dip_width(&spec, &p).is_err());
    }

    #[test]
    fn grid_must_increase() {
        let p = SystemParams::sample_b();
        assert!(analytic_spectrum(&p, 0.0, &[1.0, 0.0]).is_err());
        assert!(analytic_spectrum(&p, 0.0, &[]).is_err());
    }
}
