//! Closed-form results of the mode equations, used as oracles for the
//! integrator. All of them assume a drive exactly on the red sideband, so
//! the two-photon detuning equals the signal detuning `delta`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Stationary intracavity response to a constant signal and control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmitResponse {
    /// Signal detuning from the cavity (rad/us).
    pub detuning: f64,
    #[serde(skip)]
    pub alpha_ss: Complex64,
    /// `|alpha_ss|^2` (photons).
    pub intracavity_power: f64,
    /// `kappa_ext |alpha_ss|^2` (photons/us).
    pub emitted_power: f64,
}

/// Stationary point of the mode equations:
/// `alpha = sqrt(kappa_ext) A / [kappa/2 - i delta + G^2 / (gamma_m/2 - i delta)]`.
pub fn omit_steady_state(
    detuning: f64,
    coupling: f64,
    p: &SystemParams,
    a_in: Complex64,
) -> Result<OmitResponse> {
    let mech = Complex64::new(p.gamma_m() / 2.0, -detuning);
    if mech.norm() == 0.0 && coupling != 0.0 {
        return Err(Error::Pole(format!(
            "gamma_m = 0 at two-photon resonance (delta = {detuning})"
        )));
    }
    let mut denom = Complex64::new(p.kappa() / 2.0, -detuning);
    if coupling != 0.0 {
        denom += coupling * coupling / mech;
    }
    if denom.norm() == 0.0 {
        return Err(Error::Pole(format!("vanishing response denominator at delta = {detuning}")));
    }
    let alpha_ss = p.kappa_ext().sqrt() * a_in / denom;
    let intracavity_power = alpha_ss.norm_sqr();
    Ok(OmitResponse {
        detuning,
        alpha_ss,
        intracavity_power,
        emitted_power: p.kappa_ext() * intracavity_power,
    })
}

/// Full width of the transparency dip, `(1 + C) gamma_m`.
pub fn omit_dip_width(cooperativity: f64, gamma_m: f64) -> f64 {
    (1.0 + cooperativity) * gamma_m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalRate {
    /// Amplitude decay rate of the mechanical mode during readout (rad/us).
    pub rate: f64,
    /// Whether `4 G / kappa <= 0.2`, where adiabatic elimination holds.
    pub adiabatic: bool,
}

/// Amplitude decay rate of the stored excitation under a constant readout,
/// `gamma_m / 2 + 2 G^2 / kappa`.
pub fn adiabatic_retrieval_rate(coupling: f64, p: &SystemParams) -> RetrievalRate {
    let kappa = p.kappa();
    RetrievalRate {
        rate: p.gamma_m() / 2.0 + 2.0 * coupling * coupling / kappa,
        adiabatic: 4.0 * coupling.abs() <= 0.2 * kappa,
    }
}

/// Optomechanical damping `4 G^2 / kappa` (rad/us).
pub fn optical_damping(coupling: f64, kappa: f64) -> f64 {
    4.0 * coupling * coupling / kappa
}

/// Mechanical amplitude after `tau` us without drive.
pub fn mechanical_free_decay(beta0: Complex64, tau: f64, gamma_m: f64) -> Complex64 {
    beta0 * (-gamma_m * tau / 2.0).exp()
}

/// Closed-form emitted power on a set of detunings, unit input amplitude.
pub fn omit_spectrum(detunings: &[f64], coupling: f64, p: &SystemParams) -> Result<Vec<f64>> {
    detunings
        .iter()
        .map(|&d| omit_steady_state(d, coupling, p, Complex64::new(1.0, 0.0)).map(|r| r.emitted_power))
        .collect()
}
