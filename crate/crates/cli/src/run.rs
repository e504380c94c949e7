//! Scenario execution. Everything is computed in memory first; files are
//! written only once the whole run has succeeded.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Map, Value};

use optostore::dynamics::{integrate, ModeState};
use optostore::scenarios::{
    default_detuning_grid, dip_position, dip_width, peak_position, run_omit_sweep, run_storage_sweep,
    storage_from_trajectory, OmitOptions, StorageSweepOptions,
};
use optostore::{
    adiabatic_retrieval_rate, cooperativity, estimate_beat, fit_cooperativity, mhz, omit_dip_width,
    optical_damping, run_readout_series, standard_sequence, storage_energy_vs_delay, synthesize_beat,
    to_mhz, validate_params, GateConfig, SequenceKind, SystemParams,
};

use crate::config::RunConfig;

/// A configuration that parses but cannot be run.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Named output files held in memory.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn csv<F>(&mut self, name: &str, write: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> optostore::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every file into `dir`. Existing files are an error unless
    /// `force` is set; in that case nothing is written.
    pub fn write_to(&self, dir: &Path, force: bool) -> anyhow::Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = self.files.iter().map(|(n, _)| dir.join(n)).collect();
        if !force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(ConfigError(format!(
                    "{} exists; pass --force to overwrite",
                    p.display()
                ))
                .into());
            }
        }
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (path, (_, bytes)) in paths.iter().zip(&self.files) {
            fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(paths)
    }
}

/// Parameter checks of `validate`, as printable lines. Fails on errors.
pub fn validate(cfg: &RunConfig) -> anyhow::Result<Vec<String>> {
    let p = cfg.system_params()?;
    let kind = cfg.scenario()?;
    let s = standard_sequence(kind, &p, &cfg.overrides())?;
    cfg.grid(&s, &p)?;
    cfg.detunings()?;
    let report = validate_params(&p);
    let mut lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| {
            let tag = if c.passed { "ok" } else { "FAILED" };
            format!("{tag:>6} {:?} {}: {}", c.severity, c.name, c.detail)
        })
        .collect();
    lines.push(format!("scenario {kind} on {}", p.label));
    if report.has_errors() {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        return Err(ConfigError(format!("parameter checks failed: {}", names.join(", "))).into());
    }
    Ok(lines)
}

fn params_summary(p: &SystemParams) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("sample".into(), json!(p.label));
    m.insert("omega_m_mhz".into(), json!(to_mhz(p.omega_m())));
    m.insert("gamma_m_mhz".into(), json!(to_mhz(p.gamma_m())));
    m.insert("kappa_mhz".into(), json!(to_mhz(p.kappa())));
    m.insert("kappa_ext_mhz".into(), json!(to_mhz(p.kappa_ext())));
    m
}

fn coupling_summary(m: &mut Map<String, Value>, prefix: &str, g: f64, p: &SystemParams) -> anyhow::Result<()> {
    m.insert(format!("{prefix}_coupling_mhz"), json!(to_mhz(g)));
    m.insert(
        format!("{prefix}_cooperativity_dimensionless"),
        json!(cooperativity(g, p.gamma_m(), p.kappa())?),
    );
    m.insert(
        format!("{prefix}_optical_damping_mhz"),
        json!(to_mhz(optical_damping(g, p.kappa()))),
    );
    Ok(())
}

/// Runs the configured scenario. `gnuplot` adds a `plot.gp` stub.
pub fn execute(cfg: &RunConfig, gnuplot: bool) -> anyhow::Result<Artifacts> {
    validate(cfg)?;
    let p = cfg.system_params()?;
    let kind = cfg.scenario()?;
    let mut out = Artifacts::default();
    let mut summary = params_summary(&p);
    summary.insert("scenario".into(), json!(kind.name()));
    match kind {
        SequenceKind::Fig3 => storage_trace(cfg, &p, &mut out, &mut summary)?,
        SequenceKind::Fig4 => readout_series(cfg, &p, &mut out, &mut summary)?,
        SequenceKind::Fig5Omit => omit_spectrum(cfg, &p, &mut out, &mut summary)?,
        SequenceKind::Fig5Storage => storage_spectrum(cfg, &p, &mut out, &mut summary)?,
    }
    out.json("summary.json", &Value::Object(summary))?;
    if gnuplot {
        out.add("plot.gp", gnuplot_stub(kind).into_bytes());
    }
    Ok(out)
}

fn filter(cfg: &RunConfig) -> optostore::FilterShape {
    cfg.detection.filter.unwrap_or_default()
}

fn storage_trace(
    cfg: &RunConfig,
    p: &SystemParams,
    out: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> anyhow::Result<()> {
    let s = standard_sequence(SequenceKind::Fig3, p, &cfg.overrides())?;
    let readout = s.readout.expect("fig3 has a readout pulse");
    let grid = cfg.grid(&s, p)?;
    let traj = integrate(&s, p, grid, ModeState::default())?;
    let d = &cfg.detection;
    let gate = GateConfig::new(
        0.0,
        d.gate_length_us.unwrap_or(0.1),
        d.rbw_mhz.unwrap_or(30.0),
        to_mhz(readout.detuning.abs()),
    )?
    .with_filter(filter(cfg));
    let r = storage_from_trajectory(traj, &gate, d.scan_step_us.unwrap_or(0.01))?;
    out.csv("trajectory.csv", |w| r.trajectory.write_csv(w))?;
    out.csv("gated_scan.csv", |w| r.scan.write_csv(w))?;
    out.csv("beat.csv", |w| r.beat.write_csv(w))?;

    let delay = s.delay().unwrap_or(0.0);
    coupling_summary(summary, "writing", s.writing.envelope.peak, p)?;
    coupling_summary(summary, "readout", readout.envelope.peak, p)?;
    summary.insert("delay_us".into(), json!(delay));
    summary.insert("dt_us".into(), json!(r.trajectory.dt));
    summary.insert("retrieved_energy_photons".into(), json!(r.retrieved_energy));
    summary.insert("written_phonons".into(), json!(r.written_phonons));
    summary.insert("stored_phonons".into(), json!(r.stored_phonons));
    let ratio = if r.written_phonons > 0.0 {
        r.stored_phonons / r.written_phonons
    } else {
        0.0
    };
    summary.insert("storage_ratio_dimensionless".into(), json!(ratio));

    if let Some(delays) = &cfg.sweep.delays_us {
        let series = storage_energy_vs_delay(p, &s, delays)?;
        let mut buf = String::from("delay_us,retrieved_energy_photons\n");
        for (d, e) in series.delays.iter().zip(&series.energies) {
            buf.push_str(&format!("{d},{e}\n"));
        }
        out.add("delay_series.csv", buf.into_bytes());
        if let Some(rate) = series.fitted_rate {
            summary.insert("fitted_energy_decay_rate_mhz".into(), json!(to_mhz(rate)));
        }
    }
    Ok(())
}

fn readout_series(
    cfg: &RunConfig,
    p: &SystemParams,
    out: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> anyhow::Result<()> {
    let o = cfg.overrides();
    let s = standard_sequence(SequenceKind::Fig4, p, &o)?;
    let readout = s.readout.expect("fig4 has a readout pulse").envelope;
    let traj = integrate(&s, p, cfg.grid(&s, p)?, ModeState::default())?;
    let beat = synthesize_beat(&traj, p, 1.0)?;
    out.csv("trajectory.csv", |w| traj.write_csv(w))?;
    out.csv("beat.csv", |w| beat.write_csv(w))?;
    coupling_summary(summary, "writing", s.writing.envelope.peak, p)?;
    let window = (
        readout.t_start + 0.1,
        readout.t_start + readout.duration.min(2.0),
    );
    match estimate_beat(&beat, window) {
        Ok(est) => {
            summary.insert("beat_frequency_mhz".into(), json!(est.frequency_mhz));
            summary.insert("beat_phase_rad".into(), json!(est.phase));
        }
        Err(optostore::Error::InsufficientSignal(_)) => {}
        Err(e) => return Err(e.into()),
    }

    let couplings: Vec<f64> = cfg
        .sweep
        .readout_couplings_mhz
        .clone()
        .unwrap_or_else(|| vec![0.2, 0.45, 0.6])
        .into_iter()
        .map(mhz)
        .collect();
    let traces = run_readout_series(p, &couplings, &o)?;
    let mut csv = String::from("readout_coupling_mhz,t_us,envelope\n");
    let mut rows = Vec::new();
    for t in &traces {
        let g = to_mhz(t.coupling);
        for (time, e) in t.times.iter().zip(&t.envelope) {
            csv.push_str(&format!("{g},{time},{e}\n"));
        }
        let analytic = adiabatic_retrieval_rate(t.coupling, p);
        let mut row = Map::new();
        row.insert("readout_coupling_mhz".into(), json!(g));
        row.insert("adiabatic_rate_mhz".into(), json!(to_mhz(analytic.rate)));
        row.insert("retrieved_energy_photons".into(), json!(t.retrieved_energy));
        if let Some(rate) = t.fitted_rate {
            row.insert("fitted_rate_mhz".into(), json!(to_mhz(rate)));
            row.insert("decay_time_us".into(), json!(1.0 / rate));
        }
        rows.push(Value::Object(row));
    }
    out.add("readout_envelopes.csv", csv.into_bytes());
    summary.insert("readout".into(), Value::Array(rows));
    Ok(())
}

fn omit_spectrum(
    cfg: &RunConfig,
    p: &SystemParams,
    out: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> anyhow::Result<()> {
    let o = cfg.overrides();
    let s = standard_sequence(SequenceKind::Fig5Omit, p, &o)?;
    let g = s.writing.envelope.peak;
    let detunings = match cfg.detunings()? {
        Some(d) => d,
        None => default_detuning_grid(p, g),
    };
    let d = &cfg.detection;
    let opts = OmitOptions {
        control_duration: s.writing.envelope.duration,
        gate_offset: d.gate_offset_us.unwrap_or(6.5),
        gate_length: d.gate_length_us.unwrap_or(1.0),
        rbw: d.rbw_mhz.unwrap_or(1.0),
        filter: filter(cfg),
        overrides: o,
    };
    let spec = run_omit_sweep(p, g, &detunings, &opts)?;
    out.csv("spectrum.csv", |w| spec.write_csv(w))?;
    coupling_summary(summary, "control", g, p)?;
    summary.insert("dip_position_mhz".into(), json!(dip_position(&spec, p)));
    if let Ok(w) = dip_width(&spec, p) {
        summary.insert("dip_width_measured_mhz".into(), json!(w));
    }
    summary.insert("steady_state_warning".into(), json!(spec.steady_state_warning));
    let (c, report) = fit_cooperativity(&spec, p)?;
    out.json("fit.json", &serde_json::to_value(&report)?)?;
    summary.insert("fitted_cooperativity_dimensionless".into(), json!(c));
    summary.insert(
        "dip_width_mhz".into(),
        json!(to_mhz(omit_dip_width(c, p.gamma_m()))),
    );
    summary.insert("fit_residual_dimensionless".into(), json!(report.residual));
    Ok(())
}

fn storage_spectrum(
    cfg: &RunConfig,
    p: &SystemParams,
    out: &mut Artifacts,
    summary: &mut Map<String, Value>,
) -> anyhow::Result<()> {
    let s = standard_sequence(SequenceKind::Fig5Storage, p, &cfg.overrides())?;
    let g = s.writing.envelope.peak;
    let detunings = match cfg.detunings()? {
        Some(d) => d,
        None => default_detuning_grid(p, g),
    };
    let d = &cfg.detection;
    let opts = StorageSweepOptions {
        gate_length: d.gate_length_us.unwrap_or(1.0),
        rbw: d.rbw_mhz.unwrap_or(1.0),
        filter: filter(cfg),
    };
    let spec = run_storage_sweep(p, &s, &detunings, &opts)?;
    out.csv("spectrum.csv", |w| spec.write_csv(w))?;
    coupling_summary(summary, "writing", g, p)?;
    if let Some(r) = s.readout {
        coupling_summary(summary, "readout", r.envelope.peak, p)?;
    }
    summary.insert("peak_position_mhz".into(), json!(peak_position(&spec)));
    summary.insert(
        "two_photon_resonance_mhz".into(),
        json!(to_mhz(-s.writing.detuning)),
    );
    Ok(())
}

fn gnuplot_stub(kind: SequenceKind) -> String {
    let body = match kind {
        SequenceKind::Fig3 => {
            "set xlabel 't (us)'\nset ylabel 'power (arb. units)'\n\
             plot 'trajectory.csv' using 1:6 with lines title 'emitted', \\\n     \
             'gated_scan.csv' using 1:2 with lines title 'gated'\n"
        }
        SequenceKind::Fig4 => {
            "set xlabel 't (us)'\nset ylabel 'beat (arb. units)'\n\
             plot 'beat.csv' using 1:2 with lines title 'beat'\n"
        }
        SequenceKind::Fig5Omit | SequenceKind::Fig5Storage => {
            "set xlabel 'signal - control (MHz)'\nset ylabel 'power (arb. units)'\n\
             plot 'spectrum.csv' using 1:2 with linespoints title 'spectrum'\n"
        }
    };
    format!("set datafile separator ','\nset key autotitle columnhead\n{body}")
}
