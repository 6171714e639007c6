//! Simulated experiments on a [`Device`]: readout-resonator flux scans,
//! Ramsey frequency measurements (static or under modulation), amplitude
//! calibration scans and the two-line phase-interference sequence.
//!
//! Every experiment draws from the caller's RNG in a fixed order, so a
//! seeded generator reproduces the record bit for bit.

mod ramsey;
mod record;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{Device, DeviceError, FluxProgram, FluxUnit, Tone};
use crate::fit::FitError;

pub use ramsey::{fit_fringe, fringe_probability, sample_fringe, FringeFit, RamseySettings};
pub use record::{ExperimentRecord, RecordMeta};

/// Length assigned to modulation tones in generated programs, ns.
pub const TONE_DURATION_NS: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("Ramsey fringe fit failed: {0}")]
    FitFailure(#[from] FitError),
    #[error("invalid experiment settings: {0}")]
    InvalidSettings(String),
}

impl LabError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Device(e) => e.name(),
            Self::FitFailure(_) => "FitFailure",
            Self::InvalidSettings(_) => "InvalidSettings",
        }
    }
}

/// Analytic Gaussian noise (fast) or shot-sampled Ramsey fringes (full).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realism {
    #[default]
    Fast,
    Full,
}

/// Shot budget and fixed overhead of one record of a measurement method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub shots_per_point: u32,
    pub shot_rate_khz: f64,
    /// Per-record overhead (setup, instrument latency), s.
    pub latency_s: f64,
}

impl MethodTiming {
    pub fn elapsed_s(&self, points: usize) -> f64 {
        points as f64 * self.shots_per_point as f64 / (self.shot_rate_khz * 1e3) + self.latency_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Ramsey frequency σ without modulation, MHz.
    pub ramsey_freq_sigma_static: f64,
    /// Ramsey frequency σ under modulation, MHz.
    pub ramsey_freq_sigma_mod: f64,
    /// Per-point σ of a resonator-frequency measurement, MHz.
    pub resonator_fit_sigma: f64,
    pub resonator_timing: MethodTiming,
    pub qubit_timing: MethodTiming,
    pub ac_timing: MethodTiming,
    pub ramsey: RamseySettings,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            ramsey_freq_sigma_static: 0.01,
            ramsey_freq_sigma_mod: 0.05,
            resonator_fit_sigma: 0.00256,
            resonator_timing: MethodTiming {
                shots_per_point: 200,
                shot_rate_khz: 50.0,
                latency_s: 26.4227,
            },
            qubit_timing: MethodTiming {
                shots_per_point: 300,
                shot_rate_khz: 10.0,
                latency_s: 117.41,
            },
            ac_timing: MethodTiming {
                shots_per_point: 500,
                shot_rate_khz: 10.0,
                latency_s: 384.2,
            },
            ramsey: RamseySettings::default(),
            rng_seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), LabError> {
        let sigmas = [
            self.ramsey_freq_sigma_static,
            self.ramsey_freq_sigma_mod,
            self.resonator_fit_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(LabError::InvalidSettings(
                "noise σ values must be ≥ 0".into(),
            ));
        }
        for t in [self.resonator_timing, self.qubit_timing, self.ac_timing] {
            if t.shots_per_point == 0 || !(t.shot_rate_khz > 0.0) || !(t.latency_s >= 0.0) {
                return Err(LabError::InvalidSettings(
                    "timing needs shots > 0, rate > 0 and latency ≥ 0".into(),
                ));
            }
        }
        if self.ramsey.points < 8 || !(self.ramsey.max_delay_us > 0.0) {
            return Err(LabError::InvalidSettings(
                "Ramsey fringe needs ≥ 8 delays and a positive span".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one Ramsey measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyEstimate {
    /// Estimated (mean) qubit frequency, GHz.
    pub f01_est: f64,
    /// 1σ uncertainty, MHz.
    pub sigma: f64,
}

/// Noise floor used when a configured σ is zero, so records keep σ > 0.
const SIGMA_FLOOR_MHZ: f64 = 1e-9;

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite σ").sample(rng)
    } else {
        0.0
    }
}

/// Experiment runner bound to one device and noise configuration.
#[derive(Debug, Clone)]
pub struct Lab<'a> {
    pub device: &'a Device,
    pub noise: NoiseModel,
    pub realism: Realism,
}

impl<'a> Lab<'a> {
    pub fn new(device: &'a Device, noise: NoiseModel, realism: Realism) -> Self {
        Self {
            device,
            noise,
            realism,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn meta(
        &self,
        method: &str,
        target: usize,
        source: Option<usize>,
        timing: MethodTiming,
        points: usize,
        units: (&str, &str),
        params: BTreeMap<String, f64>,
    ) -> RecordMeta {
        RecordMeta {
            method: method.into(),
            target,
            source,
            shots: timing.shots_per_point,
            elapsed_s: timing.elapsed_s(points),
            x_unit: units.0.into(),
            y_unit: units.1.into(),
            params,
        }
    }

    /// Readout-resonator frequency (MHz) against the target's own DC line
    /// voltage while the adversary line holds `adversary_bias` Φ₀.
    pub fn resonator_scan<R: Rng + ?Sized>(
        &self,
        target: usize,
        adversary: usize,
        adversary_bias: f64,
        bias_grid: &[f64],
        rng: &mut R,
    ) -> Result<ExperimentRecord, LabError> {
        let ti = self.device.index_of(target)?;
        let ai = self.device.index_of(adversary)?;
        let adv_volts = adversary_bias * self.device.line(ai).dc_volts_per_phi0;
        let sigma = self.noise.resonator_fit_sigma;
        let mut y = Vec::with_capacity(bias_grid.len());
        for &v in bias_grid {
            let program = FluxProgram::new(FluxUnit::Volts)
                .with_dc(target, v)
                .with_dc(adversary, adv_volts);
            let phi = self.device.effective_flux(&program, ti)?.dc;
            let f = self.device.dressed_resonator_freq(ti, phi)? * 1e3;
            y.push(f + gaussian(rng, sigma));
        }
        let params = BTreeMap::from([("adversary_bias_phi0".to_string(), adversary_bias)]);
        Ok(ExperimentRecord {
            x: bias_grid.to_vec(),
            y_sigma: vec![sigma.max(SIGMA_FLOOR_MHZ); bias_grid.len()],
            y,
            meta: self.meta(
                "resonator_scan",
                target,
                Some(adversary),
                self.noise.resonator_timing,
                bias_grid.len(),
                ("V", "MHz"),
                params,
            ),
        })
    }

    /// Ramsey measurement of the (time-averaged) qubit frequency.
    pub fn ramsey_frequency<R: Rng + ?Sized>(
        &self,
        target: usize,
        program: &FluxProgram,
        rng: &mut R,
    ) -> Result<RamseyEstimate, LabError> {
        let ti = self.device.index_of(target)?;
        let truth = self.device.mean_f01(program, ti)?;
        match self.realism {
            Realism::Fast => {
                let sigma = if program.is_static() {
                    self.noise.ramsey_freq_sigma_static
                } else {
                    self.noise.ramsey_freq_sigma_mod
                };
                Ok(RamseyEstimate {
                    f01_est: truth + gaussian(rng, sigma) * 1e-3,
                    sigma: sigma.max(SIGMA_FLOOR_MHZ),
                })
            }
            Realism::Full => {
                // drive placed a fixed detuning below the expected frequency
                let settings = &self.noise.ramsey;
                let drive = truth - settings.detuning_mhz * 1e-3;
                let t2 = self.device.transmon(ti).t2_us;
                let delays = settings.delays();
                let shots = self.noise.qubit_timing.shots_per_point;
                let fractions = sample_fringe(settings.detuning_mhz, t2, &delays, shots, rng);
                let fit = fit_fringe(&delays, &fractions, shots, settings.detuning_mhz, t2)?;
                Ok(RamseyEstimate {
                    f01_est: drive + fit.detuning_mhz * 1e-3,
                    sigma: fit.sigma_mhz.max(SIGMA_FLOOR_MHZ),
                })
            }
        }
    }

    /// Qubit frequency (MHz) while one line is stepped through `values` Φ₀.
    ///
    /// The target line holds `target_bias`; when `swept` is the target itself
    /// the values are absolute target biases.
    pub fn qubit_bias_scan<R: Rng + ?Sized>(
        &self,
        target: usize,
        target_bias: f64,
        swept: usize,
        values: &[f64],
        rng: &mut R,
    ) -> Result<ExperimentRecord, LabError> {
        self.device.index_of(swept)?;
        let mut y = Vec::with_capacity(values.len());
        let mut s = Vec::with_capacity(values.len());
        for &v in values {
            let program = if swept == target {
                FluxProgram::new(FluxUnit::Phi0).with_dc(target, v)
            } else {
                FluxProgram::new(FluxUnit::Phi0)
                    .with_dc(target, target_bias)
                    .with_dc(swept, v)
            };
            let est = self.ramsey_frequency(target, &program, rng)?;
            y.push(est.f01_est * 1e3);
            s.push(est.sigma);
        }
        let params = BTreeMap::from([("target_bias_phi0".to_string(), target_bias)]);
        Ok(ExperimentRecord {
            x: values.to_vec(),
            y,
            y_sigma: s,
            meta: self.meta(
                "qubit_bias_scan",
                target,
                (swept != target).then_some(swept),
                self.noise.qubit_timing,
                values.len(),
                ("phi0", "MHz"),
                params,
            ),
        })
    }

    /// Mean frequency shift (MHz, relative to the zero-flux frequency) under
    /// a tone of each amplitude (V) on the target's own line.
    pub fn amplitude_scan<R: Rng + ?Sized>(
        &self,
        target: usize,
        freq_mhz: f64,
        amps: &[f64],
        rng: &mut R,
    ) -> Result<ExperimentRecord, LabError> {
        let ti = self.device.index_of(target)?;
        let park = self.device.transmon(ti).f01(0.0);
        let mut y = Vec::with_capacity(amps.len());
        let mut s = Vec::with_capacity(amps.len());
        for &a in amps {
            let program = FluxProgram::new(FluxUnit::Volts).with_tone(
                target,
                Tone {
                    amplitude: a,
                    freq_mhz,
                    phase_rad: 0.0,
                    duration_ns: TONE_DURATION_NS,
                },
            );
            let est = self.ramsey_frequency(target, &program, rng)?;
            y.push((est.f01_est - park) * 1e3);
            s.push(est.sigma);
        }
        let params = BTreeMap::from([("freq_mhz".to_string(), freq_mhz)]);
        Ok(ExperimentRecord {
            x: amps.to_vec(),
            y,
            y_sigma: s,
            meta: self.meta(
                "amplitude_scan",
                target,
                None,
                self.noise.ac_timing,
                amps.len(),
                ("V", "MHz"),
                params,
            ),
        })
    }

    /// Mean frequency shift of `qa` (MHz) with same-frequency tones on the
    /// lines of `qa` and `qb`, against the relative phase of the `qb` tone.
    #[allow(clippy::too_many_arguments)]
    pub fn phase_interference_scan<R: Rng + ?Sized>(
        &self,
        qa: usize,
        qb: usize,
        amp_a: f64,
        amp_b: f64,
        freq_mhz: f64,
        phase_grid: &[f64],
        rng: &mut R,
    ) -> Result<ExperimentRecord, LabError> {
        if qa == qb {
            return Err(LabError::InvalidSettings(
                "phase interference needs two distinct lines".into(),
            ));
        }
        let ai = self.device.index_of(qa)?;
        let park = self.device.transmon(ai).f01(0.0);
        let mut y = Vec::with_capacity(phase_grid.len());
        let mut s = Vec::with_capacity(phase_grid.len());
        for &theta in phase_grid {
            let program = FluxProgram::new(FluxUnit::Volts)
                .with_tone(
                    qa,
                    Tone {
                        amplitude: amp_a,
                        freq_mhz,
                        phase_rad: 0.0,
                        duration_ns: TONE_DURATION_NS,
                    },
                )
                .with_tone(
                    qb,
                    Tone {
                        amplitude: amp_b,
                        freq_mhz,
                        phase_rad: theta,
                        duration_ns: TONE_DURATION_NS,
                    },
                );
            let est = self.ramsey_frequency(qa, &program, rng)?;
            y.push((est.f01_est - park) * 1e3);
            s.push(est.sigma);
        }
        let params = BTreeMap::from([
            ("amp_a_v".to_string(), amp_a),
            ("amp_b_v".to_string(), amp_b),
            ("freq_mhz".to_string(), freq_mhz),
        ]);
        Ok(ExperimentRecord {
            x: phase_grid.to_vec(),
            y,
            y_sigma: s,
            meta: self.meta(
                "phase_interference_scan",
                qa,
                Some(qb),
                self.noise.ac_timing,
                phase_grid.len(),
                ("rad", "MHz"),
                params,
            ),
        })
    }
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// `n` phases evenly covering one period, starting at 0.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect()
}
