use serde::{Deserialize, Serialize};

use super::perturb::{calibrate_gate, crosstalk_to_perturbations, worst_case_shift};
use super::{
    average_infidelity, cz_ideal, cz_unitary, shift_infidelity, Adversary, GateAmplitude,
    GateError, GateSpec, PerturbationPath,
};
use crate::device::Device;

/// Gate amplitudes to recalibrate at and adversary drives to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceSettings {
    /// Qubit id of the adversary's line.
    pub adversary_line: usize,
    pub adversary_amps_v: Vec<f64>,
    pub gate_amp_grid_phi0: Vec<f64>,
    /// Controller phase of the adversary relative to the gate tone, rad.
    #[serde(default)]
    pub adversary_phase_rad: f64,
    #[serde(default)]
    pub path: PerturbationPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceRow {
    pub gate_amp_phi0: f64,
    pub adversary_amp_v: f64,
    pub f_m_mhz: f64,
    pub tau_ns: f64,
    /// Shift at the configured adversary phase, MHz.
    pub delta_f01_mhz: f64,
    /// Largest shift over adversary phases, MHz.
    pub worst_delta_f01_mhz: f64,
    pub baseline_fidelity: f64,
    pub adversarial_fidelity: f64,
    /// From the shift-only infidelity at the worst-case shift.
    pub predicted_fidelity: f64,
}

/// Recalibrates the gate (resonance and time) at every amplitude of the
/// grid and evaluates it against each adversary amplitude.
pub fn resilience_sweep(
    device: &Device,
    gate: &GateSpec,
    settings: &ResilienceSettings,
) -> Result<Vec<ResilienceRow>, GateError> {
    let ideal = cz_ideal();
    let mut rows = Vec::new();
    for &amp in &settings.gate_amp_grid_phi0 {
        let spec = GateSpec {
            amplitude: GateAmplitude::Phi0(amp),
            ..gate.clone()
        };
        let cal = calibrate_gate(device, &spec)?;
        let baseline = 1.0 - average_infidelity(&cz_unitary(&cal.model), &ideal);
        for &amp_v in &settings.adversary_amps_v {
            let adv = Adversary {
                line: settings.adversary_line,
                amp_v,
                phase_rad: settings.adversary_phase_rad,
            };
            let actual = crosstalk_to_perturbations(device, &cal, &adv, settings.path)?;
            let worst = worst_case_shift(device, &cal, &adv, settings.path)?;
            let model = actual.apply(&cal.model);
            rows.push(ResilienceRow {
                gate_amp_phi0: amp,
                adversary_amp_v: amp_v,
                f_m_mhz: cal.model.f_m_mhz,
                tau_ns: cal.model.tau_ns,
                delta_f01_mhz: actual.delta_f01_mhz,
                worst_delta_f01_mhz: worst.delta_f01_mhz,
                baseline_fidelity: baseline,
                adversarial_fidelity: 1.0 - average_infidelity(&cz_unitary(&model), &ideal),
                predicted_fidelity: 1.0 - shift_infidelity(worst.delta_f01_mhz, cal.model.tau_ns),
            });
        }
    }
    Ok(rows)
}
