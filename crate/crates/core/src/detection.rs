//! Emulated measurement chain: heterodyne beat synthesis, a time-gated
//! spectrum analyzer, and least-squares beat estimation.
//!
//! The cavity emission beats against the drive that serves as local
//! oscillator. A component of `alpha` that is constant in the signal frame
//! beats at `Omega = delta - Delta`; light re-emitted at the cavity
//! resonance beats at `-Delta`, i.e. exactly `omega_m` on the red sideband.
//! The beat is `|alpha| cos(Omega t - arg alpha)`, so its phase follows the
//! phase of the intracavity field.
//!
//! The analyzer mixes the beat record down with a complex reference at the
//! centre frequency, averages over one centre-frequency period (which
//! cancels the image at twice the centre frequency) and then applies the
//! resolution-bandwidth filter. The gated power is the mean of `|y|^2`
//! over the gate.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{to_mhz, SystemParams};

/// Minimum number of samples per beat period.
pub const MIN_SAMPLES_PER_PERIOD: usize = 8;

/// Largest upsampling factor allowed when building the beat grid from a
/// trajectory; beyond it the interpolated field would not be trustworthy.
const MAX_UPSAMPLING: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BeatRecord {
    /// Uniform time grid (us).
    pub times: Vec<f64>,
    pub dt: f64,
    /// Beat voltage (arbitrary units).
    pub voltage: Vec<f64>,
    /// Local-oscillator amplitude at each sample; it follows the envelope of
    /// whichever drive (writing or readout) is on.
    pub lo: Vec<f64>,
    /// Highest beat frequency in the record (MHz).
    pub carrier_mhz: f64,
}

impl BeatRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => (0.0, 0.0),
        }
    }

    /// Builds a record from uniformly sampled voltages.
    pub fn from_samples(t0: f64, dt: f64, voltage: Vec<f64>, carrier_mhz: f64) -> Self {
        let times = (0..voltage.len()).map(|k| t0 + k as f64 * dt).collect();
        let lo = vec![1.0; voltage.len()];
        Self {
            times,
            dt,
            voltage,
            lo,
            carrier_mhz,
        }
    }

    /// Copy of the record with every time shifted by `shift` us.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut r = self.clone();
        r.times.iter_mut().for_each(|t| *t += shift);
        r
    }

    /// Writes `t_us,voltage`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_us", "voltage"])?;
        for (t, v) in self.times.iter().zip(&self.voltage) {
            out.write_record(&[t.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn beat_frequency_mhz(traj: &Trajectory) -> f64 {
    let s = &traj.sequence;
    let delta = s.signal.detuning;
    let mut omega = (delta - s.writing.detuning).abs().max(s.writing.detuning.abs());
    if let Some(r) = &s.readout {
        omega = omega.max((delta - r.detuning).abs()).max(r.detuning.abs());
    }
    to_mhz(omega)
}

fn interpolate(traj: &Trajectory, t: f64) -> Complex64 {
    let x = t / traj.dt;
    let k = (x.floor().max(0.0) as usize).min(traj.len() - 1);
    if k + 1 >= traj.len() {
        return traj.alpha[traj.len() - 1];
    }
    let f = x - k as f64;
    traj.alpha[k] * (1.0 - f) + traj.alpha[k + 1] * f
}

/// Beat voltage `2 lo(t) sqrt(kappa_ext) Re[alpha(t) exp(-i Omega t)]` on a
/// grid with an integer number (at least eight) of samples per beat period.
pub fn synthesize_beat(traj: &Trajectory, p: &SystemParams, lo_amp: f64) -> Result<BeatRecord> {
    if traj.len() < 2 {
        return Err(Error::Undersampled("trajectory has fewer than two samples".into()));
    }
    let f = beat_frequency_mhz(traj);
    let dt = if f > 0.0 {
        let per_period = (1.0 / (f * traj.dt)).ceil().max(MIN_SAMPLES_PER_PERIOD as f64);
        1.0 / (f * per_period)
    } else {
        traj.dt
    };
    synthesize_beat_on_grid(traj, p, lo_amp, dt)
}

/// Like [`synthesize_beat`] with an explicit sample spacing.
pub fn synthesize_beat_on_grid(
    traj: &Trajectory,
    p: &SystemParams,
    lo_amp: f64,
    dt: f64,
) -> Result<BeatRecord> {
    if traj.len() < 2 {
        return Err(Error::Undersampled("trajectory has fewer than two samples".into()));
    }
    let f = beat_frequency_mhz(traj);
    if f > 0.0 && dt * f > 1.0 / MIN_SAMPLES_PER_PERIOD as f64 * (1.0 + 1e-9) {
        return Err(Error::Undersampled(format!(
            "{:.2} samples per beat period at {f} MHz, need {MIN_SAMPLES_PER_PERIOD}",
            1.0 / (dt * f)
        )));
    }
    if traj.dt / dt > MAX_UPSAMPLING {
        return Err(Error::Undersampled(format!(
            "trajectory step {} us is too coarse to interpolate onto {dt} us",
            traj.dt
        )));
    }
    let s = &traj.sequence;
    let sqrt_ke = p.optical.kappa_ext.sqrt();
    let delta = s.signal.detuning;
    let n = (traj.t_end() / dt).floor() as usize + 1;
    let mut times = Vec::with_capacity(n);
    let mut voltage = Vec::with_capacity(n);
    let mut lo = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let omega = delta - s.drive_detuning_at(t);
        let l = lo_amp * s.drive_shape(t);
        let alpha = interpolate(traj, t);
        let v = 2.0 * l * sqrt_ke * (alpha * Complex64::from_polar(1.0, -omega * t)).re;
        times.push(t);
        voltage.push(v);
        lo.push(l);
    }
    Ok(BeatRecord {
        times,
        dt,
        voltage,
        lo,
        carrier_mhz: f,
    })
}

/// Resolution-bandwidth filter response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterShape {
    /// Causal one-pole low-pass.
    #[default]
    SinglePole,
    /// Zero-phase Gaussian.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateConfig {
    pub gate_start: f64,
    pub gate_length: f64,
    /// Resolution bandwidth, full -3 dB width (MHz).
    pub rbw: f64,
    pub center_frequency: f64,
    pub filter: FilterShape,
}

impl GateConfig {
    pub fn new(gate_start: f64, gate_length: f64, rbw: f64, center_frequency: f64) -> Result<Self> {
        let g = Self {
            gate_start,
            gate_length,
            rbw,
            center_frequency,
            filter: FilterShape::SinglePole,
        };
        g.check()?;
        Ok(g)
    }

    pub fn with_filter(mut self, filter: FilterShape) -> Self {
        self.filter = filter;
        self
    }

    pub fn at(mut self, gate_start: f64) -> Self {
        self.gate_start = gate_start;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.gate_length > 0.0) {
            return Err(Error::invalid("gate_length", "must be positive"));
        }
        if !(self.rbw > 0.0) {
            return Err(Error::invalid("rbw", "must be positive"));
        }
        if !(self.center_frequency > 0.0) {
            return Err(Error::invalid("center_frequency", "must be positive"));
        }
        Ok(())
    }
}

/// Centred moving average over one period of `n_period` samples. Each
/// sample covers half a step either side; the two outermost samples are
/// weighted by how much of them falls inside the window.
fn period_average(z: &[Complex64], n_period: f64) -> Vec<Complex64> {
    let n = z.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for v in z {
        let last = *prefix.last().unwrap();
        prefix.push(last + v);
    }
    let half = n_period / 2.0;
    let full = (half - 0.5).floor() as isize;
    let edge = half - 0.5 - full as f64;
    let get = |i: isize| {
        if i < 0 || i as usize >= n {
            Complex64::new(0.0, 0.0)
        } else {
            z[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| {
            let a = (i - full).clamp(0, n as isize) as usize;
            let b = (i + full + 1).clamp(0, n as isize) as usize;
            let inner = prefix[b] - prefix[a];
            let outer = (get(i - full - 1) + get(i + full + 1)) * edge;
            (inner + outer) / n_period
        })
        .collect()
}

fn single_pole(x: &[Complex64], dt: f64, rbw: f64) -> Vec<Complex64> {
    let tau = 1.0 / (PI * rbw);
    let a = 1.0 - (-dt / tau).exp();
    let mut y = Complex64::new(0.0, 0.0);
    x.iter()
        .map(|v| {
            y += (v - y) * a;
            y
        })
        .collect()
}

fn gaussian(x: &[Complex64], dt: f64, rbw: f64) -> Vec<Complex64> {
    let sigma = 2f64.ln().sqrt() / (PI * rbw) / dt;
    let half = (4.0 * sigma).ceil() as isize;
    if half == 0 {
        return x.to_vec();
    }
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, w) in (-half..=half).zip(&kernel) {
                let idx = i + j;
                if idx >= 0 && idx < n {
                    acc += x[idx as usize] * *w;
                }
            }
            acc / norm
        })
        .collect()
}

/// Complex analyzer output (demodulated, image-rejected, RBW-filtered).
pub fn analyzer_output(rec: &BeatRecord, center_mhz: f64, rbw: f64, shape: FilterShape) -> Vec<Complex64> {
    let w = TAU * center_mhz;
    let z: Vec<Complex64> = rec
        .times
        .iter()
        .zip(&rec.voltage)
        .map(|(t, v)| *v * Complex64::from_polar(1.0, -w * t))
        .collect();
    let n_period = 1.0 / (center_mhz * rec.dt);
    let z = if n_period >= 1.0 {
        period_average(&z, n_period)
    } else {
        z
    };
    match shape {
        FilterShape::SinglePole => single_pole(&z, rec.dt, rbw),
        FilterShape::Gaussian => gaussian(&z, rec.dt, rbw),
    }
}

/// Gated power readings on a sequence of gates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatedScan {
    pub gate_starts: Vec<f64>,
    pub powers: Vec<f64>,
    pub gate_length: f64,
}

impl GatedScan {
    /// Gate centre times.
    pub fn centers(&self) -> Vec<f64> {
        self.gate_starts
            .iter()
            .map(|t| t + self.gate_length / 2.0)
            .collect()
    }

    /// Writes `gate_start_us,power`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["gate_start_us", "power"])?;
        for (t, p) in self.gate_starts.iter().zip(&self.powers) {
            out.write_record(&[t.to_string(), p.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct PowerTrace {
    t0: f64,
    dt: f64,
    power: Vec<f64>,
    prefix: Vec<f64>,
}

impl PowerTrace {
    fn new(rec: &BeatRecord, g: &GateConfig) -> Self {
        let y = analyzer_output(rec, g.center_frequency, g.rbw, g.filter);
        let power: Vec<f64> = y.iter().map(|v| v.norm_sqr()).collect();
        let mut prefix = Vec::with_capacity(power.len() + 1);
        prefix.push(0.0);
        for p in &power {
            prefix.push(prefix.last().unwrap() + p);
        }
        Self {
            t0: rec.span().0,
            dt: rec.dt,
            power,
            prefix,
        }
    }

    fn t_end(&self) -> f64 {
        self.t0 + (self.power.len().saturating_sub(1)) as f64 * self.dt
    }

    fn gated(&self, start: f64, length: f64) -> Result<f64> {
        let end = start + length;
        let (t0, t1) = (self.t0, self.t_end());
        if self.power.is_empty() || end < t0 || start > t1 {
            return Err(Error::EmptyGate { start, end });
        }
        let lo = ((start.max(t0) - t0) / self.dt - 1e-9).ceil().max(0.0) as usize;
        let hi = (((end.min(t1) - t0) / self.dt + 1e-9).floor() as usize).min(self.power.len() - 1);
        if hi >= lo {
            return Ok((self.prefix[hi + 1] - self.prefix[lo]) / (hi - lo + 1) as f64);
        }
        // Gate shorter than one sample: interpolate at the gate centre.
        let x = ((start + end) / 2.0 - t0) / self.dt;
        let k = (x.floor() as usize).min(self.power.len() - 1);
        let f = x - k as f64;
        let next = self.power[(k + 1).min(self.power.len() - 1)];
        Ok(self.power[k] * (1.0 - f) + next * f)
    }
}

/// Mean analyzer power over one gate.
pub fn gated_power(rec: &BeatRecord, g: &GateConfig) -> Result<f64> {
    g.check()?;
    PowerTrace::new(rec, g).gated(g.gate_start, g.gate_length)
}

/// Gated power for gates starting at `gate_start + k * step` that fit in
/// the record.
pub fn gated_power_scan(rec: &BeatRecord, g: &GateConfig, step: f64) -> Result<GatedScan> {
    g.check()?;
    if !(step > 0.0) {
        return Err(Error::invalid("step", "scan step must be positive"));
    }
    let trace = PowerTrace::new(rec, g);
    let t_last = trace.t_end();
    let mut gate_starts = Vec::new();
    let mut powers = Vec::new();
    let mut k = 0usize;
    loop {
        let start = g.gate_start + k as f64 * step;
        if start + g.gate_length > t_last + 1e-9 {
            break;
        }
        powers.push(trace.gated(start, g.gate_length)?);
        gate_starts.push(start);
        k += 1;
    }
    Ok(GatedScan {
        gate_starts,
        powers,
        gate_length: g.gate_length,
    })
}

/// Sinusoid `amplitude * cos(2 pi f t - phase) + offset` describing a
/// record window, phase referred to t = 0. Frequency and phase come from
/// the Hann-windowed spectral peak; amplitude and offset from a linear
/// least-squares fit at that frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeatEstimate {
    pub frequency_mhz: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Root-mean-square fit residual.
    pub residual_rms: f64,
}

struct SineFit {
    a: f64,
    b: f64,
    c: f64,
    sse: f64,
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = r[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Three-parameter fit at fixed angular frequency `w`, time origin `tc`.
fn fit_at(ts: &[f64], vs: &[f64], w: f64, tc: f64) -> Option<SineFit> {
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for (t, v) in ts.iter().zip(vs) {
        let (s, c) = (w * (t - tc)).sin_cos();
        let basis = [c, s, 1.0];
        for i in 0..3 {
            r[i] += basis[i] * v;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let [a, b, c] = solve3(m, r)?;
    let sse = ts
        .iter()
        .zip(vs)
        .map(|(t, v)| {
            let (s, co) = (w * (t - tc)).sin_cos();
            let e = v - (a * co + b * s + c);
            e * e
        })
        .sum();
    Some(SineFit { a, b, c, sse })
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Fits a single sinusoid to the record inside `window = (t0, t1)`.
pub fn estimate_beat(rec: &BeatRecord, window: (f64, f64)) -> Result<BeatEstimate> {
    let (t0, t1) = window;
    let (ts, vs): (Vec<f64>, Vec<f64>) = rec
        .times
        .iter()
        .zip(&rec.voltage)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if ts.len() < 16 {
        return Err(Error::InsufficientSignal(format!(
            "only {} samples in window",
            ts.len()
        )));
    }
    let peak = vs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 1e-200) || !peak.is_finite() {
        return Err(Error::InsufficientSignal("record is zero in the window".into()));
    }

    // Coarse frequency from the zero-padded periodogram.
    let n_fft = (4 * ts.len()).next_power_of_two();
    let mean = vs.iter().sum::<f64>() / vs.len() as f64;
    let mut buf: Vec<Complex64> = vs.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(n_fft, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let (k_peak, _) = buf[1..n_fft / 2]
        .iter()
        .enumerate()
        .map(|(k, v)| (k + 1, v.norm_sqr()))
        .fold((1, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let bin = 1.0 / (n_fft as f64 * rec.dt);
    let f_coarse = k_peak as f64 * bin;

    // Refine on the Hann-windowed spectrum. For a real envelope its
    // magnitude is symmetric about the carrier, so the peak does not move
    // with the beat phase.
    let tc = 0.5 * (ts[0] + ts[ts.len() - 1]);
    let half_span = 0.5 * (ts[ts.len() - 1] - ts[0]);
    let hann: Vec<f64> = ts
        .iter()
        .map(|t| 0.5 * (1.0 + (PI * (t - tc) / half_span).cos()))
        .collect();
    let windowed = |f: f64| -> Complex64 {
        ts.iter()
            .zip(&vs)
            .zip(&hann)
            .map(|((t, v), w)| (v - mean) * w * Complex64::from_polar(1.0, -TAU * f * (t - tc)))
            .sum()
    };
    let (f, _, _) = crate::numeric::golden_section(
        |f| -windowed(f).norm_sqr(),
        (f_coarse - bin).max(bin * 0.5),
        f_coarse + bin,
        1e-13 * f_coarse.max(1.0),
        200,
    );
    let periods = (t1.min(ts[ts.len() - 1]) - t0.max(ts[0])) * f;
    if periods < 5.0 {
        return Err(Error::InsufficientSignal(format!(
            "window holds {periods:.2} beat periods, need at least 5"
        )));
    }
    let fit = fit_at(&ts, &vs, TAU * f, tc)
        .ok_or_else(|| Error::InsufficientSignal("singular least-squares system".into()))?;
    let amplitude = fit.a.hypot(fit.b);
    if amplitude < 1e-12 * peak {
        return Err(Error::InsufficientSignal("no oscillation found".into()));
    }
    // A cos(w (t - tc) - phase_c) has windowed transform ~ (A/2) exp(-i phase_c)
    let phase_c = -windowed(f).arg();
    Ok(BeatEstimate {
        frequency_mhz: f,
        phase: wrap_phase(phase_c + TAU * f * tc),
        amplitude,
        offset: fit.c,
        residual_rms: (fit.sse / ts.len() as f64).sqrt(),
    })
}
