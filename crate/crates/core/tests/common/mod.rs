#![allow(dead_code)]

use std::f64::consts::TAU;

use optostore::dynamics::{integrate, Grid, ModeState, Trajectory};
use optostore::numeric::trapezoid;
use optostore::sequence::{DriveTone, PulseEnvelope, PulseSequence, SignalInput};
use optostore::{
    mhz, BeatRecord, Complex64, CouplingCalibration, MechanicalMode, OpticalMode, SystemParams,
};

pub fn params(kappa: f64, kappa_ext: f64, omega_m: f64, gamma_m: f64) -> SystemParams {
    SystemParams {
        label: "custom".into(),
        optical: OpticalMode {
            kappa_total: kappa,
            kappa_ext,
        },
        mechanical: MechanicalMode { omega_m, gamma_m },
        calibration: CouplingCalibration::Reference {
            power_mw: 1.0,
            coupling: mhz(0.45),
        },
    }
}

/// Control at `coupling` and a signal of amplitude `signal` at detuning
/// `delta`, both switched on at t = 0.5 for `duration` us.
pub fn constant_drive(
    p: &SystemParams,
    coupling: f64,
    signal: f64,
    delta: f64,
    duration: f64,
) -> PulseSequence {
    let writing = DriveTone {
        envelope: PulseEnvelope::new(0.5, duration, coupling, 0.02).unwrap(),
        detuning: -p.omega_m(),
    };
    let signal = SignalInput {
        envelope: PulseEnvelope::new(0.5, duration, signal, 0.02).unwrap(),
        detuning: delta,
        phase: 0.0,
    };
    PulseSequence::new(writing, signal, None).unwrap()
}

/// Lossless beam splitter: `kappa = gamma_m = 0`, constant `coupling` from
/// t = 0, one photon in the cavity initially.
pub fn lossless_swap(coupling: f64, t_end: f64, dt: f64) -> Trajectory {
    let p = params(0.0, 0.0, mhz(160.0), 0.0);
    let writing = DriveTone {
        envelope: PulseEnvelope::new(0.0, t_end + 1.0, coupling, 0.0).unwrap(),
        detuning: -p.omega_m(),
    };
    let signal = SignalInput {
        envelope: PulseEnvelope::new(0.0, 1.0, 0.0, 0.0).unwrap(),
        detuning: 0.0,
        phase: 0.0,
    };
    let s = PulseSequence::new(writing, signal, None).unwrap();
    let initial = ModeState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    integrate(&s, &p, Grid::new(t_end, dt), initial).unwrap()
}

/// `(change of |alpha|^2 + |beta|^2, integrated |A_in|^2 - |A_out|^2,
/// integrated |A_in|^2)` over the whole trajectory.
pub fn photon_balance(traj: &Trajectory) -> (f64, f64, f64) {
    let input: Vec<f64> = traj
        .times
        .iter()
        .map(|t| traj.sequence.at(*t).unwrap().signal.norm_sqr())
        .collect();
    let net: Vec<f64> = input
        .iter()
        .zip(&traj.a_out)
        .map(|(i, o)| i - o.norm_sqr())
        .collect();
    let n = traj.len() - 1;
    let stored = traj.alpha[n].norm_sqr() + traj.beta[n].norm_sqr()
        - traj.alpha[0].norm_sqr()
        - traj.beta[0].norm_sqr();
    (stored, trapezoid(&net, traj.dt), trapezoid(&input, traj.dt))
}

/// Raised-cosine edge: 0 before `a`, 1 after `a + rise`.
fn edge(t: f64, a: f64, rise: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= a + rise {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * (t - a) / rise).cos())
    }
}

/// Smooth 1 us burst with 200 ns edges on a 160 MHz carrier, constant LO.
/// Returns the record and its instantaneous envelope power `amp(t)^2`.
pub fn synthetic_burst() -> (BeatRecord, Vec<f64>) {
    let f = 160.0;
    let dt = 1.0 / (f * 16.0);
    let n = (3.0 / dt) as usize;
    let amp: Vec<f64> = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            edge(t, 0.8, 0.2) * (1.0 - edge(t, 1.8, 0.2))
        })
        .collect();
    let v = amp
        .iter()
        .enumerate()
        .map(|(k, a)| 2.0 * a * (TAU * f * k as f64 * dt - 0.3).cos())
        .collect();
    let power = amp.iter().map(|a| a * a).collect();
    (BeatRecord::from_samples(0.0, dt, v, f), power)
}

/// Linear interpolation of `y` sampled at spacing `dt` from t = 0.
pub fn sample(y: &[f64], dt: f64, t: f64) -> f64 {
    let x = t / dt;
    let k = (x.floor().max(0.0) as usize).min(y.len() - 1);
    if k + 1 >= y.len() {
        return y[y.len() - 1];
    }
    let f = x - k as f64;
    y[k] * (1.0 - f) + y[k + 1] * f
}
