use serde::{Deserialize, Serialize};

use super::{CZModel, GateError, GateKind};
use crate::device::{
    Device, DeviceError, FluxProgram, FluxUnit, Table, Tone, TONE_FREQ_MAX_MHZ, TONE_FREQ_MIN_MHZ,
};
use crate::dynamics::{ModulationResponse, DEFAULT_SWEET_SPOT_LIMIT};

/// Exchange rate as a function of modulation amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GEffModel {
    Constant {
        g_mhz: f64,
    },
    /// Linear interpolation of `g_mhz` on an `amp_phi0` grid.
    Table {
        amp_phi0: Vec<f64>,
        g_mhz: Vec<f64>,
    },
}

impl GEffModel {
    pub fn g_mhz(&self, amp_phi0: f64) -> Result<f64, GateError> {
        match self {
            Self::Constant { g_mhz } => Ok(*g_mhz),
            Self::Table { amp_phi0: x, g_mhz } => Table::new(x.clone(), g_mhz.clone())?
                .eval(amp_phi0)
                .ok_or_else(|| {
                    GateError::InvalidInput(format!(
                        "amplitude {amp_phi0} Φ0 is outside the g_eff table"
                    ))
                }),
        }
    }
}

/// Modulation amplitude of a gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateAmplitude {
    /// The amplitude of maximal mean shift.
    SweetSpot,
    Phi0(f64),
}

/// Configured CZ between a tunable and a fixed-frequency qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    pub tunable: usize,
    pub fixed: usize,
    pub kind: GateKind,
    pub g_eff: GEffModel,
    pub amplitude: GateAmplitude,
}

/// A gate calibrated at one amplitude: resonance, time and frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateCalibration {
    pub tunable: usize,
    pub fixed: usize,
    pub amp_phi0: f64,
    /// Tunable qubit's mean frequency during the gate, GHz.
    pub mean_f01: f64,
    pub model: CZModel,
    #[serde(skip)]
    pub g_eff: GEffModel,
}

/// Resolves the amplitude, places the modulation on resonance and sets
/// `τ = π/g_eff`.
///
/// With `Δ = f_fixed - f̄_tunable`, the modulation frequency is
/// `|Δ - η_T|/2` for CZ02 and `|Δ + η_F|/2` for CZ20.
pub fn calibrate_gate(device: &Device, spec: &GateSpec) -> Result<GateCalibration, GateError> {
    let idx = device.index_of(spec.tunable)?;
    let fixed = device.fixed_qubit(spec.fixed)?;
    let response = device.response(idx);
    let amp = match spec.amplitude {
        GateAmplitude::SweetSpot => response.find_sweet_spot(DEFAULT_SWEET_SPOT_LIMIT)?,
        GateAmplitude::Phi0(a) if a >= 0.0 && a.is_finite() => a,
        GateAmplitude::Phi0(a) => {
            return Err(GateError::InvalidInput(format!(
                "gate amplitude must be a non-negative number of Φ0, got {a}"
            )))
        }
    };
    let mean_f01 = response.mean_frequency(0.0, amp);
    let delta = fixed.f01 - mean_f01;
    let f_m_ghz = match spec.kind {
        GateKind::Cz02 => (delta - device.transmon(idx).anharmonicity()).abs() / 2.0,
        GateKind::Cz20 => (delta + fixed.anharmonicity).abs() / 2.0,
    };
    let f_m_mhz = f_m_ghz * 1e3;
    if !(TONE_FREQ_MIN_MHZ..=TONE_FREQ_MAX_MHZ).contains(&f_m_mhz) {
        return Err(DeviceError::FrequencyOutOfRange { freq_mhz: f_m_mhz }.into());
    }
    let model = CZModel::calibrated(spec.kind, spec.g_eff.g_mhz(amp)?, f_m_mhz)?;
    Ok(GateCalibration {
        tunable: spec.tunable,
        fixed: spec.fixed,
        amp_phi0: amp,
        mean_f01,
        model,
        g_eff: spec.g_eff.clone(),
    })
}

/// A tone on another line at the gate's modulation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adversary {
    /// Qubit id of the driven line.
    pub line: usize,
    pub amp_v: f64,
    /// Phase relative to the gate tone at the controller, rad.
    #[serde(default)]
    pub phase_rad: f64,
}

/// How an amplitude change becomes a frequency shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationPath {
    /// Difference of mean detunings at the two amplitudes.
    #[default]
    Exact,
    /// Slope and curvature at the calibrated amplitude.
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbations {
    pub effective_amp_phi0: f64,
    pub delta_amp_phi0: f64,
    pub delta_f01_mhz: f64,
    pub delta_g_mhz: f64,
}

impl Perturbations {
    /// The calibrated gate with these perturbations applied.
    pub fn apply(&self, model: &CZModel) -> CZModel {
        model.with_frequency_shift(self.delta_f01_mhz, self.delta_g_mhz)
    }
}

/// Mean-frequency shift (MHz) when the amplitude moves from `amp` by `delta`.
pub fn shift_for_amplitude_change(
    response: &ModulationResponse,
    amp: f64,
    delta: f64,
    path: PerturbationPath,
) -> f64 {
    let ghz = match path {
        PerturbationPath::Exact => {
            response.mean_detuning(amp + delta) - response.mean_detuning(amp)
        }
        PerturbationPath::Taylor => {
            let sc = response.slope_and_curvature(amp);
            sc.slope * delta + 0.5 * sc.curvature * delta * delta
        }
    };
    ghz * 1e3
}

fn perturbations_at(
    device: &Device,
    cal: &GateCalibration,
    effective_amp: f64,
    path: PerturbationPath,
) -> Result<Perturbations, GateError> {
    let idx = device.index_of(cal.tunable)?;
    let delta = effective_amp - cal.amp_phi0;
    let delta_f01_mhz = shift_for_amplitude_change(device.response(idx), cal.amp_phi0, delta, path);
    let delta_g_mhz = cal.g_eff.g_mhz(effective_amp)? - cal.g_eff.g_mhz(cal.amp_phi0)?;
    Ok(Perturbations {
        effective_amp_phi0: effective_amp,
        delta_amp_phi0: delta,
        delta_f01_mhz,
        delta_g_mhz,
    })
}

fn check_adversary(cal: &GateCalibration, adversary: &Adversary) -> Result<(), GateError> {
    if adversary.line == cal.tunable {
        return Err(GateError::InvalidInput(
            "adversary must drive a different line than the gate".into(),
        ));
    }
    Ok(())
}

/// Perturbations of a calibrated gate while `adversary` plays on another
/// line. Tones combine through the device's AC crosstalk at the gate
/// frequency, including each line's electrical phase offset.
pub fn crosstalk_to_perturbations(
    device: &Device,
    cal: &GateCalibration,
    adversary: &Adversary,
    path: PerturbationPath,
) -> Result<Perturbations, GateError> {
    check_adversary(cal, adversary)?;
    let idx = device.index_of(cal.tunable)?;
    let f_m = cal.model.f_m_mhz;
    let conv = device.line(idx).ac_volts_per_phi0_at(f_m)?;
    let tone = |amplitude, phase_rad| Tone {
        amplitude,
        freq_mhz: f_m,
        phase_rad,
        duration_ns: cal.model.tau_ns,
    };
    let program = FluxProgram::new(FluxUnit::Volts)
        .with_tone(cal.tunable, tone(cal.amp_phi0 * conv, 0.0))
        .with_tone(adversary.line, tone(adversary.amp_v, adversary.phase_rad));
    let flux = device.effective_flux(&program, idx)?;
    // the program holds a single frequency, so at most one tone survives
    let amp = flux.tones.first().map_or(0.0, |t| t.amp);
    perturbations_at(device, cal, amp, path)
}

/// The larger-shift perturbation over all adversary phases: the tones
/// either add or subtract collinearly.
pub fn worst_case_shift(
    device: &Device,
    cal: &GateCalibration,
    adversary: &Adversary,
    path: PerturbationPath,
) -> Result<Perturbations, GateError> {
    check_adversary(cal, adversary)?;
    let a = device.index_of(cal.tunable)?;
    let b = device.index_of(adversary.line)?;
    let f_m = cal.model.f_m_mhz;
    let adv_conv = device.line(b).ac_volts_per_phi0_at(f_m)?;
    let leak = (device.network().ac(a, b, f_m)? * adversary.amp_v / adv_conv).abs();
    let base = cal.amp_phi0;
    let up = perturbations_at(device, cal, base + leak, path)?;
    let down = perturbations_at(device, cal, (base - leak).abs(), path)?;
    Ok(if up.delta_f01_mhz.abs() >= down.delta_f01_mhz.abs() {
        up
    } else {
        down
    })
}
