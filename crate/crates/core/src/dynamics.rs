//! Time-domain integration of the coupled optical/mechanical mode equations.
//!
//! The equations are solved in the rotating frame of the signal, where at a
//! red-sideband drive (`Delta = -omega_m`) and a resonant signal both modes
//! evolve only at the slow rates `kappa`, `gamma_m` and `G`:
//!
//! ```text
//! d alpha/dt = (i delta - kappa/2) alpha - i G beta + sqrt(kappa_ext) A_in
//! d beta/dt  = (i (delta - Delta - omega_m) - gamma_m/2) beta - i G alpha
//! ```
//!
//! with `delta` the signal detuning from the cavity. A classical fourth-order
//! Runge-Kutta scheme on a fixed grid keeps results bitwise reproducible.

use std::io::Write;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::numeric::trapezoid;
use crate::sequence::{DriveState, PulseSequence};

/// Amplitudes above this are treated as a blow-up (misconfigured units).
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Upper bound on `dt * rate` for the fastest rate in the problem.
pub const MAX_STEP_RATE_PRODUCT: f64 = 0.05;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Intracavity signal amplitude (sqrt photons) and mechanical amplitude
/// (sqrt phonons).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl ModeState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        Self { alpha, beta }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite()
    }

    /// Total excitation number `|alpha|^2 + |beta|^2`.
    pub fn excitation(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }
}

impl Add for ModeState {
    type Output = ModeState;

    fn add(self, rhs: ModeState) -> ModeState {
        ModeState::new(self.alpha + rhs.alpha, self.beta + rhs.beta)
    }
}

impl Mul<f64> for ModeState {
    type Output = ModeState;

    fn mul(self, k: f64) -> ModeState {
        ModeState::new(self.alpha * k, self.beta * k)
    }
}

/// Right-hand side of the mode equations.
pub fn eom_derivative(
    state: &ModeState,
    drive: &DriveState,
    p: &SystemParams,
    signal_detuning: f64,
) -> ModeState {
    let kappa = p.optical.kappa_total;
    let g = drive.coupling;
    let mech_detuning = signal_detuning - drive.detuning - p.mechanical.omega_m;
    let dalpha = Complex64::new(-kappa / 2.0, signal_detuning) * state.alpha
        - I * g * state.beta
        + p.optical.kappa_ext.sqrt() * drive.signal;
    let dbeta = Complex64::new(-p.mechanical.gamma_m / 2.0, mech_detuning) * state.beta
        - I * g * state.alpha;
    ModeState::new(dalpha, dbeta)
}

/// Field leaving the cavity into the output channel, `A_in - sqrt(kappa_ext) alpha`.
pub fn output_field(alpha: Complex64, a_in: Complex64, kappa_ext: f64) -> Complex64 {
    a_in - kappa_ext.sqrt() * alpha
}

/// Emitted photon flux `kappa_ext |alpha|^2` (photons/us).
pub fn emitted_power(alpha: Complex64, kappa_ext: f64) -> f64 {
    kappa_ext * alpha.norm_sqr()
}

/// Uniform simulation grid starting at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t_end: f64,
    /// Requested step. The grid uses the largest step not above it that
    /// divides `t_end` evenly.
    pub dt: f64,
}

impl Grid {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt }
    }

    /// Grid ending at the sequence's suggested horizon with the default step.
    pub fn for_sequence(s: &PulseSequence, p: &SystemParams) -> Self {
        Self::new(s.suggested_end(), default_step(s, p))
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn step(&self) -> f64 {
        self.t_end / self.steps() as f64
    }
}

/// Fastest rate (rad/us) the integrator has to resolve for this sequence.
pub fn fastest_rate(s: &PulseSequence, p: &SystemParams) -> f64 {
    let delta = s.signal.detuning;
    let mut rates = vec![
        p.optical.kappa_total,
        p.mechanical.gamma_m,
        s.max_coupling(),
        delta.abs(),
        (delta - s.writing.detuning - p.mechanical.omega_m).abs(),
    ];
    if let Some(r) = &s.readout {
        rates.push((delta - r.detuning - p.mechanical.omega_m).abs());
    }
    rates.into_iter().fold(0.0, f64::max)
}

/// `min(0.02 / kappa, edge_time / 4, 0.05 / fastest rate)`.
pub fn default_step(s: &PulseSequence, p: &SystemParams) -> f64 {
    let mut dt = f64::INFINITY;
    if p.optical.kappa_total > 0.0 {
        dt = dt.min(0.02 / p.optical.kappa_total);
    }
    let edge = s.writing.envelope.edge_time;
    if edge > 0.0 {
        dt = dt.min(edge / 4.0);
    }
    let fastest = fastest_rate(s, p);
    if fastest > 0.0 {
        dt = dt.min(MAX_STEP_RATE_PRODUCT / fastest);
    }
    if dt.is_finite() {
        dt
    } else {
        0.01
    }
}

/// Sampled solution of the mode equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// Output-channel field at each grid point.
    pub a_out: Vec<Complex64>,
    pub params: SystemParams,
    pub sequence: PulseSequence,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Grid index closest to `t`, clamped to the record.
    pub fn index_at(&self, t: f64) -> usize {
        let k = (t / self.dt).round();
        (k.max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    pub fn state_at(&self, t: f64) -> ModeState {
        let k = self.index_at(t);
        ModeState::new(self.alpha[k], self.beta[k])
    }

    pub fn emitted_power(&self) -> Vec<f64> {
        let ke = self.params.optical.kappa_ext;
        self.alpha.iter().map(|a| emitted_power(*a, ke)).collect()
    }

    /// Emitted photons between `t0` and `t1`, trapezoidal on the grid.
    pub fn emitted_energy(&self, t0: f64, t1: f64) -> f64 {
        let (i0, i1) = (self.index_at(t0), self.index_at(t1));
        if i1 <= i0 {
            return 0.0;
        }
        let ke = self.params.optical.kappa_ext;
        let p: Vec<f64> = self.alpha[i0..=i1]
            .iter()
            .map(|a| emitted_power(*a, ke))
            .collect();
        trapezoid(&p, self.dt)
    }

    /// Writes `t_us,re_alpha,im_alpha,re_beta,im_beta,emitted_power`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "t_us",
            "re_alpha",
            "im_alpha",
            "re_beta",
            "im_beta",
            "emitted_power",
        ])?;
        let ke = self.params.optical.kappa_ext;
        for k in 0..self.len() {
            let (a, b) = (self.alpha[k], self.beta[k]);
            out.write_record(&[
                self.times[k].to_string(),
                a.re.to_string(),
                a.im.to_string(),
                b.re.to_string(),
                b.im.to_string(),
                emitted_power(a, ke).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_state(state: &ModeState, t: f64) -> Result<()> {
    if !state.is_finite() || state.alpha.norm() > DIVERGENCE_LIMIT || state.beta.norm() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { time: t });
    }
    Ok(())
}

/// Integrates the mode equations over `grid` with classical RK4.
pub fn integrate(
    s: &PulseSequence,
    p: &SystemParams,
    grid: Grid,
    initial: ModeState,
) -> Result<Trajectory> {
    if !(grid.t_end > 0.0 && grid.dt > 0.0) {
        return Err(Error::invalid("grid", "t_end and dt must be positive"));
    }
    let limit = MAX_STEP_RATE_PRODUCT / fastest_rate(s, p);
    if grid.dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse {
            dt: grid.dt,
            limit,
        });
    }
    check_state(&initial, 0.0)?;

    let n = grid.steps();
    let dt = grid.step();
    let delta = s.signal.detuning;
    let kappa_ext = p.optical.kappa_ext;

    let mut times = Vec::with_capacity(n + 1);
    let mut alpha = Vec::with_capacity(n + 1);
    let mut beta = Vec::with_capacity(n + 1);
    let mut a_out = Vec::with_capacity(n + 1);

    let mut y = initial;
    let mut drive = s.at(0.0)?;
    times.push(0.0);
    alpha.push(y.alpha);
    beta.push(y.beta);
    a_out.push(output_field(y.alpha, drive.signal, kappa_ext));

    for k in 0..n {
        let t = k as f64 * dt;
        let t_next = (k + 1) as f64 * dt;
        let mid = s.at(t + 0.5 * dt)?;
        let next = s.at(t_next)?;

        let k1 = eom_derivative(&y, &drive, p, delta);
        let k2 = eom_derivative(&(y + k1 * (0.5 * dt)), &mid, p, delta);
        let k3 = eom_derivative(&(y + k2 * (0.5 * dt)), &mid, p, delta);
        let k4 = eom_derivative(&(y + k3 * dt), &next, p, delta);
        y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        check_state(&y, t_next)?;

        drive = next;
        times.push(t_next);
        alpha.push(y.alpha);
        beta.push(y.beta);
        a_out.push(output_field(y.alpha, drive.signal, kappa_ext));
    }

    Ok(Trajectory {
        times,
        alpha,
        beta,
        a_out,
        params: p.clone(),
        sequence: s.clone(),
        dt,
    })
}
