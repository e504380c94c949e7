//! Physical parameters of the optomechanical system.
//!
//! Rates are stored as angular frequencies in rad/us and times are in us.
//! Configuration and reporting use linear frequency in MHz; [`mhz`] and
//! [`to_mhz`] convert between the two.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};

/// Converts a linear frequency in MHz to an angular rate in rad/us.
pub fn mhz(nu: f64) -> f64 {
    TAU * nu
}

/// Converts an angular rate in rad/us to a linear frequency in MHz.
pub fn to_mhz(omega: f64) -> f64 {
    omega / TAU
}

/// Optical whispering-gallery mode. Its resonance is the frequency origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalMode {
    /// Total energy decay rate (rad/us).
    pub kappa_total: f64,
    /// External (output) coupling rate of the signal field (rad/us).
    pub kappa_ext: f64,
}

impl OpticalMode {
    pub fn new(kappa_total: f64, kappa_ext: f64) -> Result<Self> {
        if !(kappa_total > 0.0 && kappa_total.is_finite()) {
            return Err(Error::invalid("kappa_total", "must be positive and finite"));
        }
        if !(kappa_ext > 0.0 && kappa_ext <= kappa_total) {
            return Err(Error::invalid(
                "kappa_ext",
                format!("must satisfy 0 < kappa_ext <= kappa_total ({kappa_total})"),
            ));
        }
        Ok(Self {
            kappa_total,
            kappa_ext,
        })
    }

    /// Critically coupled mode, `kappa_ext = kappa / 2`.
    pub fn critically_coupled(kappa_total: f64) -> Result<Self> {
        Self::new(kappa_total, kappa_total / 2.0)
    }
}

/// Mechanical breathing mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanicalMode {
    /// Resonance frequency (rad/us).
    pub omega_m: f64,
    /// Energy damping rate (rad/us).
    pub gamma_m: f64,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, gamma_m: f64) -> Result<Self> {
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::invalid("omega_m", "must be positive and finite"));
        }
        if !(gamma_m >= 0.0 && gamma_m.is_finite()) {
            return Err(Error::invalid("gamma_m", "must be non-negative and finite"));
        }
        Ok(Self { omega_m, gamma_m })
    }
}

/// Maps incident drive power to the effective coupling rate `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingCalibration {
    /// One measured point: `G(P) = coupling * sqrt(P / power_mw)`.
    Reference {
        power_mw: f64,
        /// Coupling rate at `power_mw` (rad/us).
        coupling: f64,
    },
    /// Microscopic form `G = g_om * x_zpf * sqrt(n_c)` with the intracavity
    /// drive photon number `n_c = photons_per_mw * P`.
    Microscopic {
        /// Frequency pull per unit displacement (rad/us per metre).
        g_om: f64,
        /// Zero-point displacement (m).
        x_zpf: f64,
        photons_per_mw: f64,
    },
}

impl CouplingCalibration {
    pub fn reference(power_mw: f64, coupling: f64) -> Result<Self> {
        if !(power_mw > 0.0 && power_mw.is_finite()) {
            return Err(Error::invalid("calibration.power_mw", "must be positive"));
        }
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::invalid("calibration.coupling", "must be positive"));
        }
        Ok(CouplingCalibration::Reference { power_mw, coupling })
    }
}

/// Complete description of one device.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub label: String,
    pub optical: OpticalMode,
    pub mechanical: MechanicalMode,
    pub calibration: CouplingCalibration,
}

/// Names accepted by [`SystemParams::preset`].
pub const PRESET_NAMES: [&str; 2] = ["sample-a", "sample-b"];

impl SystemParams {
    /// Sample A: (omega_m, gamma_m, kappa)/2pi = (160, 0.013, 6) MHz, with
    /// 6 mW of drive giving G/2pi = 0.77 MHz.
    pub fn sample_a() -> Self {
        Self {
            label: "sample-a".into(),
            optical: OpticalMode {
                kappa_total: mhz(6.0),
                kappa_ext: mhz(3.0),
            },
            mechanical: MechanicalMode {
                omega_m: mhz(160.0),
                gamma_m: mhz(0.013),
            },
            calibration: CouplingCalibration::Reference {
                power_mw: 6.0,
                coupling: mhz(0.77),
            },
        }
    }

    /// Sample B: (omega_m, gamma_m, kappa)/2pi = (160.9, 0.096, 20) MHz, with
    /// 1.6 mW of drive giving G/2pi = 0.45 MHz.
    pub fn sample_b() -> Self {
        Self {
            label: "sample-b".into(),
            optical: OpticalMode {
                kappa_total: mhz(20.0),
                kappa_ext: mhz(10.0),
            },
            mechanical: MechanicalMode {
                omega_m: mhz(160.9),
                gamma_m: mhz(0.096),
            },
            calibration: CouplingCalibration::Reference {
                power_mw: 1.6,
                coupling: mhz(0.45),
            },
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sample-a" => Ok(Self::sample_a()),
            "sample-b" => Ok(Self::sample_b()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.optical.kappa_total
    }

    pub fn kappa_ext(&self) -> f64 {
        self.optical.kappa_ext
    }

    pub fn omega_m(&self) -> f64 {
        self.mechanical.omega_m
    }

    pub fn gamma_m(&self) -> f64 {
        self.mechanical.gamma_m
    }

    /// Coupling rate that yields cooperativity `c` on this device.
    pub fn coupling_for_cooperativity(&self, c: f64) -> f64 {
        (c.max(0.0) * self.gamma_m() * self.kappa()).sqrt() / 2.0
    }
}

/// Optomechanical cooperativity `C = 4 G^2 / (gamma_m kappa)`.
pub fn cooperativity(coupling: f64, gamma_m: f64, kappa: f64) -> Result<f64> {
    if !(gamma_m > 0.0) {
        return Err(Error::invalid("gamma_m", "cooperativity needs gamma_m > 0"));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa", "cooperativity needs kappa > 0"));
    }
    Ok(4.0 * coupling * coupling / (gamma_m * kappa))
}

/// Effective coupling rate (rad/us) for an incident drive power in mW.
pub fn coupling_rate_from_power(power_mw: f64, cal: &CouplingCalibration) -> Result<f64> {
    if !(power_mw >= 0.0 && power_mw.is_finite()) {
        return Err(Error::invalid(
            "power_mw",
            format!("drive power must be non-negative, got {power_mw}"),
        ));
    }
    Ok(match *cal {
        CouplingCalibration::Reference {
            power_mw: p_ref,
            coupling,
        } => coupling * (power_mw / p_ref).sqrt(),
        CouplingCalibration::Microscopic {
            g_om,
            x_zpf,
            photons_per_mw,
        } => g_om * x_zpf * (photons_per_mw * power_mw).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Blocks a run.
    Error,
    /// Advisory only.
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    /// omega_m / kappa.
    pub sideband_ratio: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// True when a positivity check failed.
    pub fn has_errors(&self) -> bool {
        self.checks
            .iter()
            .any(|c| !c.passed && c.severity == Severity::Error)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks positivity, the over-coupling bound and the resolved-sideband
/// condition. Only positivity failures are errors.
pub fn validate_params(p: &SystemParams) -> ValidationReport {
    let kappa = p.optical.kappa_total;
    let kappa_ext = p.optical.kappa_ext;
    let omega_m = p.mechanical.omega_m;
    let gamma_m = p.mechanical.gamma_m;
    let finite = [kappa, kappa_ext, omega_m, gamma_m]
        .iter()
        .all(|v| v.is_finite());
    let positive = finite && kappa > 0.0 && kappa_ext > 0.0 && omega_m > 0.0 && gamma_m >= 0.0;
    let calibration_ok = match p.calibration {
        CouplingCalibration::Reference { power_mw, coupling } => power_mw > 0.0 && coupling >= 0.0,
        CouplingCalibration::Microscopic {
            g_om,
            x_zpf,
            photons_per_mw,
        } => g_om >= 0.0 && x_zpf >= 0.0 && photons_per_mw >= 0.0,
    };
    let sideband_ratio = omega_m / kappa;

    let checks = vec![
        Check {
            name: "positivity",
            passed: positive,
            severity: Severity::Error,
            detail: format!(
                "kappa={kappa}, kappa_ext={kappa_ext}, omega_m={omega_m}, gamma_m={gamma_m} rad/us"
            ),
        },
        Check {
            name: "calibration",
            passed: calibration_ok,
            severity: Severity::Error,
            detail: format!("{:?}", p.calibration),
        },
        Check {
            name: "overcoupling_bound",
            passed: kappa_ext <= kappa,
            severity: Severity::Warning,
            detail: format!("kappa_ext / kappa = {}", kappa_ext / kappa),
        },
        Check {
            name: "resolved_sideband",
            passed: sideband_ratio > 1.0,
            severity: Severity::Warning,
            detail: format!("omega_m / kappa = {sideband_ratio}"),
        },
    ];
    ValidationReport {
        checks,
        sideband_ratio,
    }
}
