//! Parametric CZ gates under flux crosstalk.
//!
//! The gate is modelled as a resonant exchange between `|11>` and a
//! non-computational state `|Q>` (`|02>` or `|20>`, ordered
//! `|fixed, tunable>`):
//!
//! ```text
//! H = -δΔ̄ |Q><Q| + (g_eff + δg) (|11><Q| + |Q><11|)
//! ```
//!
//! so `δΔ̄` is the drop of `|Q>` relative to `|11>`. Crosstalk also leaves an
//! uncorrected frame phase `δω̄₀₁τ` on the tunable qubit. Rates are angular
//! (rad/µs) unless a name ends in `_mhz`, which means cyclic MHz.

mod perturb;
mod ptm;
mod resilience;

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceError;
use crate::dynamics::DynamicsError;

pub use perturb::{
    calibrate_gate, crosstalk_to_perturbations, shift_for_amplitude_change, worst_case_shift,
    Adversary, GEffModel, GateAmplitude, GateCalibration, GateSpec, PerturbationPath,
    Perturbations,
};
pub use ptm::{
    optimize_rz_correction, pauli_basis, pauli_labels, process_fidelity, ptm_of_unitary,
    simulate_qpt, ProcessTomogram, Ptm, QptOptions, RzCorrection, TomogramDocument,
    CONDITION_LIMIT,
};
pub use resilience::{resilience_sweep, ResilienceRow, ResilienceSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("tomography inversion is ill conditioned (condition number {cond:.3e})")]
    ReconstructionIllConditioned { cond: f64 },
    #[error("invalid gate input: {0}")]
    InvalidInput(String),
}

impl GateError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Device(e) => e.name(),
            Self::Dynamics(e) => e.name(),
            Self::ReconstructionIllConditioned { .. } => "ReconstructionIllConditioned",
            Self::InvalidInput(_) => "InvalidInput",
        }
    }
}

/// Which doubly excited state the `|11>` population visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// `|11> ↔ |02>`, the tunable qubit doubly excited.
    Cz02,
    /// `|11> ↔ |20>`, the fixed qubit doubly excited.
    Cz20,
}

impl GateKind {
    /// Ratio `δΔ̄ / δω̄₀₁` for a shift of the tunable qubit's mean frequency.
    pub fn shift_ratio(self) -> f64 {
        match self {
            Self::Cz02 => -1.0,
            Self::Cz20 => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cz02 => "cz02",
            Self::Cz20 => "cz20",
        }
    }
}

/// A calibrated CZ with the perturbations crosstalk adds to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CZModel {
    pub kind: GateKind,
    /// Exchange rate without crosstalk, cyclic MHz.
    pub g_eff_mhz: f64,
    /// Gate time; `π / g_eff` (angular) when calibrated.
    pub tau_ns: f64,
    /// Modulation frequency, MHz.
    pub f_m_mhz: f64,
    /// `δΔ̄`, rad/µs.
    pub delta_mean_shift: f64,
    /// `δω̄₀₁`, rad/µs.
    pub delta_omega01: f64,
    /// `δg_eff`, rad/µs.
    pub delta_g: f64,
}

impl CZModel {
    /// Gate with `τ = π/g_eff` and no perturbations.
    pub fn calibrated(kind: GateKind, g_eff_mhz: f64, f_m_mhz: f64) -> Result<Self, GateError> {
        if !(g_eff_mhz > 0.0 && g_eff_mhz.is_finite()) {
            return Err(GateError::InvalidInput(format!(
                "g_eff must be positive, got {g_eff_mhz} MHz"
            )));
        }
        Ok(Self {
            kind,
            g_eff_mhz,
            tau_ns: 1e3 / (2.0 * g_eff_mhz),
            f_m_mhz,
            delta_mean_shift: 0.0,
            delta_omega01: 0.0,
            delta_g: 0.0,
        })
    }

    /// Angular exchange rate, rad/µs.
    pub fn g_eff(&self) -> f64 {
        2.0 * PI * self.g_eff_mhz
    }

    pub fn tau_us(&self) -> f64 {
        self.tau_ns * 1e-3
    }

    /// Perturbations from a mean-frequency shift `δf̄₀₁` and coupling change,
    /// both in MHz, with `δΔ̄` following the gate kind.
    pub fn with_frequency_shift(mut self, delta_f01_mhz: f64, delta_g_mhz: f64) -> Self {
        self.delta_omega01 = 2.0 * PI * delta_f01_mhz;
        self.delta_mean_shift = self.kind.shift_ratio() * self.delta_omega01;
        self.delta_g = 2.0 * PI * delta_g_mhz;
        self
    }
}

/// `diag(1, 1, 1, -1)`.
pub fn cz_ideal() -> Matrix4<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(one, one, one, -one))
}

/// The `|11>` amplitude after time `τ` of the perturbed exchange:
/// `-[cos(δGτ) - i(δΔ̄/2G) sin(δGτ)] e^{iδΔ̄τ/2}` with
/// `G = sqrt((g+δg)² + δΔ̄²/4)` and `δG = G - g`.
pub fn u11(model: &CZModel) -> Complex64 {
    let g = model.g_eff();
    let d = model.delta_mean_shift;
    let tau = model.tau_us();
    let big_g = ((g + model.delta_g).powi(2) + 0.25 * d * d).sqrt();
    let dg = big_g - g;
    let ratio = if big_g > 0.0 { d / (2.0 * big_g) } else { 0.0 };
    let inner = Complex64::new((dg * tau).cos(), -ratio * (dg * tau).sin());
    -inner * Complex64::from_polar(1.0, 0.5 * d * tau)
}

/// Logical-subspace propagator `diag(1, e^{-iδω̄τ}, 1, e^{-iδω̄τ} U₁₁)` in the
/// basis `|00>, |01>, |10>, |11>` (fixed, tunable). Sub-unitary when
/// population is left in `|Q>`.
pub fn cz_unitary(model: &CZModel) -> Matrix4<Complex64> {
    let phase = Complex64::from_polar(1.0, -model.delta_omega01 * model.tau_us());
    let one = Complex64::new(1.0, 0.0);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(one, phase, one, phase * u11(model)))
}

/// `r = (d² - |tr(U_ideal† U)|²) / (d² + d)` with `d = 4`.
pub fn average_infidelity(actual: &Matrix4<Complex64>, ideal: &Matrix4<Complex64>) -> f64 {
    let tr = (ideal.adjoint() * actual).trace();
    ((16.0 - tr.norm_sqr()) / 20.0).max(0.0)
}

/// Second-order infidelity expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeadingOrder {
    /// General form in `δω̄τ`, `δΔ̄τ` and `δgτ`.
    pub general: f64,
    /// With `δΔ̄ = -δω̄` (CZ02).
    pub r02: f64,
    /// With `δΔ̄ = +δω̄` (CZ20).
    pub r20: f64,
}

pub fn leading_order_infidelity(model: &CZModel) -> LeadingOrder {
    let tau = model.tau_us();
    let w = model.delta_omega01 * tau;
    let d = model.delta_mean_shift * tau;
    let g = model.delta_g * tau;
    LeadingOrder {
        general: (w - 0.25 * d).powi(2) / 5.0 + d * d / 40.0 + g * g / 5.0,
        r02: 27.0 / 80.0 * w * w + g * g / 5.0,
        r20: 11.0 / 80.0 * w * w + g * g / 5.0,
    }
}

/// CZ02 infidelity from a cyclic mean-frequency shift: `(27π²/20)(δf̄ τ)²`.
pub fn shift_infidelity(delta_f01_mhz: f64, tau_ns: f64) -> f64 {
    let ft = delta_f01_mhz * tau_ns * 1e-3;
    27.0 * PI * PI / 20.0 * ft * ft
}
