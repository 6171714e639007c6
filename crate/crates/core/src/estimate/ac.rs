use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CrosstalkEstimate, EstimateError, Method};
use crate::device::{f01_from_shape, Device};
use crate::dynamics::{ModulationResponse, DEFAULT_HARMONICS, DEFAULT_SWEET_SPOT_LIMIT};
use crate::fit::{fit_least_squares, fit_sinusoid, LmOptions};
use crate::lab::{linspace, phase_grid, ExperimentRecord, Lab};

/// Starting point for an amplitude calibration; `ec` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeGuess {
    pub volts_per_phi0: f64,
    pub f01_max: f64,
    pub asymmetry: f64,
    pub ec: f64,
}

impl AmplitudeGuess {
    /// Nominal values from the device description at tone frequency `freq_mhz`.
    pub fn from_device(
        device: &Device,
        target: usize,
        freq_mhz: f64,
    ) -> Result<Self, EstimateError> {
        let i = device.index_of(target)?;
        let q = device.transmon(i);
        Ok(Self {
            volts_per_phi0: device.line(i).ac_volts_per_phi0_at(freq_mhz)?,
            f01_max: q.f01_max(),
            asymmetry: q.asymmetry(),
            ec: q.ec,
        })
    }
}

fn response_for(f01_max: f64, asymmetry: f64, ec: f64) -> ModulationResponse {
    ModulationResponse::from_spectrum(
        |phi| f01_from_shape(f01_max, ec, asymmetry, phi),
        DEFAULT_HARMONICS,
    )
    .expect("default harmonic count is valid")
}

/// Fitted line conversion and modulation response at one tone frequency.
#[derive(Debug, Clone)]
pub struct AmplitudeCalibration {
    pub target: usize,
    pub freq_mhz: f64,
    pub volts_per_phi0: f64,
    pub f01_max: f64,
    pub asymmetry: f64,
    pub ec: f64,
    /// Covariance of `[V/Φ₀, f01_max, d]`.
    pub covariance: DMatrix<f64>,
    pub response: ModulationResponse,
    pub chi2: f64,
}

impl AmplitudeCalibration {
    pub fn sigma_volts_per_phi0(&self) -> f64 {
        self.covariance[(0, 0)].max(0.0).sqrt()
    }

    pub fn amplitude_phi0(&self, volts: f64) -> f64 {
        volts / self.volts_per_phi0
    }

    /// d f̄01 / dΦ̃ at a drive of `volts`, GHz/Φ₀.
    pub fn slope_at_volts(&self, volts: f64) -> f64 {
        self.response.slope(self.amplitude_phi0(volts))
    }

    /// 1σ of [`Self::slope_at_volts`] from the parameter covariance.
    pub fn slope_sigma_at_volts(&self, volts: f64) -> f64 {
        let p = [self.volts_per_phi0, self.f01_max, self.asymmetry];
        let slope = |q: &[f64]| response_for(q[1], q[2], self.ec).slope(volts / q[0]);
        let mut grad = [0.0; 3];
        for j in 0..3 {
            let h = 1e-6 * p[j].abs().max(1e-3);
            let (mut up, mut dn) = (p, p);
            up[j] += h;
            dn[j] -= h;
            grad[j] = (slope(&up) - slope(&dn)) / (2.0 * h);
        }
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += grad[i] * self.covariance[(i, j)] * grad[j];
            }
        }
        var.max(0.0).sqrt()
    }

    pub fn sweet_spot_volts(&self) -> Option<f64> {
        self.response
            .sweet_spot_amp()
            .map(|a| a * self.volts_per_phi0)
    }

    /// Drive (V) of steepest mean-frequency response below the sweet spot.
    pub fn max_slope_volts(&self) -> Option<f64> {
        self.response
            .max_slope_amp()
            .map(|a| a * self.volts_per_phi0)
    }
}

/// Fits the mean frequency shift against drive voltage with free
/// conversion, sweet-spot frequency and junction asymmetry.
pub fn fit_amplitude_calibration(
    record: &ExperimentRecord,
    guess: &AmplitudeGuess,
) -> Result<AmplitudeCalibration, EstimateError> {
    if record.meta.method != "amplitude_scan" || record.len() < 4 {
        return Err(EstimateError::InvalidInput(
            "amplitude calibration needs an amplitude scan with ≥ 4 points".into(),
        ));
    }
    let n = record.len();
    let ec = guess.ec;
    let residuals = |p: &[f64], r: &mut [f64]| {
        let resp = response_for(p[1], p[2], ec);
        for (i, ri) in r.iter_mut().enumerate().take(n) {
            let model = resp.mean_detuning(record.x[i] / p[0]) * 1e3;
            *ri = (record.y[i] - model) / record.y_sigma[i];
        }
    };
    let p0 = [guess.volts_per_phi0, guess.f01_max, guess.asymmetry];
    let opts = LmOptions {
        jacobian_steps: vec![1e-5 * guess.volts_per_phi0, 1e-5, 1e-5],
        ..LmOptions::default()
    };
    let fit = fit_least_squares(
        residuals,
        &p0,
        n,
        &[0.05 * guess.volts_per_phi0, 0.05, 0.05],
        &opts,
    )?;
    let (conv, f01_max, asymmetry) = (fit.params[0], fit.params[1], fit.params[2].abs());
    let response = response_for(f01_max, asymmetry, ec);
    let max_amp = record.x.iter().cloned().fold(f64::MIN, f64::max);
    let ss = response
        .sweet_spot_amp()
        .unwrap_or(DEFAULT_SWEET_SPOT_LIMIT)
        * conv;
    if max_amp < 0.8 * ss {
        return Err(EstimateError::InsufficientSpan {
            max_amp,
            sweet_spot: ss,
        });
    }
    Ok(AmplitudeCalibration {
        target: record.meta.target,
        freq_mhz: record.param("freq_mhz").unwrap_or(f64::NAN),
        volts_per_phi0: conv,
        f01_max,
        asymmetry,
        ec,
        covariance: fit.covariance,
        response,
        chi2: fit.chi2,
    })
}

/// How the sign of the interference response is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PhaseReference {
    /// Fitted amplitude, signed by the side of `reference_rad` on which the
    /// fitted phase falls; ambiguous when the amplitude is below 2σ.
    Free { reference_rad: f64 },
    /// Signed projection onto `reference_rad`; never ambiguous.
    Projected { reference_rad: f64 },
}

impl Default for PhaseReference {
    fn default() -> Self {
        Self::Free { reference_rad: 0.0 }
    }
}

/// AC crosstalk from a phase-interference record and the two lines'
/// calibrations at the same tone frequency.
pub fn fit_ac_crosstalk(
    record: &ExperimentRecord,
    calib_a: &AmplitudeCalibration,
    calib_b: &AmplitudeCalibration,
    reference: PhaseReference,
) -> Result<CrosstalkEstimate, EstimateError> {
    let (Some(amp_a), Some(amp_b)) = (record.param("amp_a_v"), record.param("amp_b_v")) else {
        return Err(EstimateError::InvalidInput(
            "phase record lacks its drive amplitudes".into(),
        ));
    };
    let from = record
        .meta
        .source
        .ok_or_else(|| EstimateError::InvalidInput("phase record lacks its source line".into()))?;
    let sf = fit_sinusoid(&record.x, &record.y, &record.y_sigma)?;
    let (response, sigma_response) = match reference {
        PhaseReference::Free { reference_rad } => {
            if sf.amplitude < 2.0 * sf.sigma_amplitude {
                return Err(EstimateError::AmbiguousPhase {
                    amplitude: sf.amplitude,
                    sigma: sf.sigma_amplitude,
                });
            }
            let sign = if (sf.phase - reference_rad).cos() >= 0.0 {
                1.0
            } else {
                -1.0
            };
            (sign * sf.amplitude, sf.sigma_amplitude)
        }
        PhaseReference::Projected { reference_rad } => sf.projection(reference_rad),
    };
    // response in MHz; slope in MHz/Φ₀
    let slope = calib_a.slope_at_volts(amp_a) * 1e3;
    let sigma_slope = calib_a.slope_sigma_at_volts(amp_a) * 1e3;
    let phi_b = calib_b.amplitude_phi0(amp_b);
    let rel_b = calib_b.sigma_volts_per_phi0() / calib_b.volts_per_phi0;
    let value = response / (slope * phi_b);
    let sigma = ((sigma_response / (slope * phi_b)).powi(2)
        + value * value * ((sigma_slope / slope).powi(2) + rel_b * rel_b))
        .sqrt();
    Ok(CrosstalkEstimate {
        from_qubit: from,
        to_qubit: record.meta.target,
        value,
        sigma,
        method: Method::Ac,
        freq_mhz: record.param("freq_mhz"),
    })
}

/// Drive settings for AC crosstalk measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcSettings {
    /// Calibration amplitudes span `[0, calib_max_phi0]` in nominal Φ₀.
    pub calib_max_phi0: f64,
    pub calib_points: usize,
    /// Adversary tone amplitude in calibrated Φ₀.
    pub adversary_amp_phi0: f64,
    pub phase_points: usize,
    pub reference: PhaseReference,
}

impl Default for AcSettings {
    fn default() -> Self {
        Self {
            calib_max_phi0: 0.72,
            calib_points: 25,
            adversary_amp_phi0: 0.5,
            phase_points: 16,
            reference: PhaseReference::default(),
        }
    }
}

/// Amplitude scan plus fit for one line.
pub(crate) fn calibrate<R: Rng + ?Sized>(
    lab: &Lab,
    target: usize,
    freq_mhz: f64,
    settings: &AcSettings,
    rng: &mut R,
) -> Result<AmplitudeCalibration, EstimateError> {
    let guess = AmplitudeGuess::from_device(lab.device, target, freq_mhz)?;
    let amps = linspace(
        0.0,
        settings.calib_max_phi0 * guess.volts_per_phi0,
        settings.calib_points,
    );
    let rec = lab.amplitude_scan(target, freq_mhz, &amps, rng)?;
    fit_amplitude_calibration(&rec, &guess)
}

/// Interference measurement of `from → to` given both calibrations.
pub(crate) fn measure_pair<R: Rng + ?Sized>(
    lab: &Lab,
    calib_to: &AmplitudeCalibration,
    calib_from: &AmplitudeCalibration,
    settings: &AcSettings,
    rng: &mut R,
) -> Result<(ExperimentRecord, CrosstalkEstimate), EstimateError> {
    let amp_a = calib_to
        .max_slope_volts()
        .ok_or_else(|| EstimateError::FitFailure("calibrated response has no sweet spot".into()))?;
    let amp_b = settings.adversary_amp_phi0 * calib_from.volts_per_phi0;
    let rec = lab.phase_interference_scan(
        calib_to.target,
        calib_from.target,
        amp_a,
        amp_b,
        calib_to.freq_mhz,
        &phase_grid(settings.phase_points),
        rng,
    )?;
    let est = fit_ac_crosstalk(&rec, calib_to, calib_from, settings.reference)?;
    Ok((rec, est))
}

/// AC crosstalk `from → to` at each tone frequency, recalibrating both
/// lines at every frequency.
pub fn ac_crosstalk_spectrum<R: Rng + ?Sized>(
    lab: &Lab,
    to: usize,
    from: usize,
    freqs_mhz: &[f64],
    settings: &AcSettings,
    rng: &mut R,
) -> Result<Vec<CrosstalkEstimate>, EstimateError> {
    freqs_mhz
        .iter()
        .map(|&f| {
            let ca = calibrate(lab, to, f, settings, rng)?;
            let cb = calibrate(lab, from, f, settings, rng)?;
            Ok(measure_pair(lab, &ca, &cb, settings, rng)?.1)
        })
        .collect()
}
