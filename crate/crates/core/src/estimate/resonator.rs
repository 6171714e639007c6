use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CrosstalkEstimate, EstimateError, Method};
use crate::device::{dressed_frequency, f01_from_shape, Device};
use crate::fit::{generalized_least_squares, levenberg_marquardt, LmOptions};
use crate::lab::ExperimentRecord;

/// Shared parameters fitted across traces, in parameter-vector order.
const SHARED: usize = 4;
const OFFSET_SCAN_STEPS: usize = 256;
const MAX_RESTARTS: usize = 5;
/// Reduced χ² above which a converged fit is treated as a wrong basin.
const CHI2_RESTART: f64 = 2.0;

/// Prior knowledge of the readout model. `f01_max` and `ec` come from qubit
/// spectroscopy and stay fixed; the rest seed the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorGuess {
    pub volts_per_phi0: f64,
    pub f_bare: f64,
    pub g: f64,
    pub asymmetry: f64,
    pub f01_max: f64,
    pub ec: f64,
}

impl ResonatorGuess {
    /// Nominal values from the device description.
    pub fn from_device(device: &Device, target: usize) -> Result<Self, EstimateError> {
        let i = device.index_of(target)?;
        let q = device.transmon(i);
        let r = device.resonator(i);
        Ok(Self {
            volts_per_phi0: device.line(i).dc_volts_per_phi0,
            f_bare: r.f_bare,
            g: r.g,
            asymmetry: q.asymmetry(),
            f01_max: q.f01_max(),
            ec: q.ec,
        })
    }

    fn shared(&self) -> [f64; SHARED] {
        [self.volts_per_phi0, self.f_bare, self.g, self.asymmetry]
    }
}

/// Joint fit of several resonator traces sharing every parameter except a
/// per-trace flux offset.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPeriodicFit {
    pub volts_per_phi0: f64,
    pub f_bare: f64,
    pub g: f64,
    pub asymmetry: f64,
    /// Per-trace offsets in Φ₀, wrapped to (-0.5, 0.5].
    pub offsets: Vec<f64>,
    /// Offsets unwrapped relative to the first trace (continuous in bias).
    pub offsets_unwrapped: Vec<f64>,
    /// Covariance of `[V/Φ₀, f_bare, g, d, offsets…]`.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub n_points: usize,
}

impl GlobalPeriodicFit {
    pub fn offset_sigma(&self, k: usize) -> f64 {
        self.covariance[(SHARED + k, SHARED + k)].max(0.0).sqrt()
    }

    pub fn offset_covariance(&self) -> DMatrix<f64> {
        let k = self.offsets.len();
        self.covariance.view((SHARED, SHARED), (k, k)).into_owned()
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / (self.n_points - SHARED - self.offsets.len()).max(1) as f64
    }
}

/// Wraps to (-0.5, 0.5].
fn wrap(x: f64) -> f64 {
    let w = x - x.round();
    if w <= -0.5 {
        w + 1.0
    } else {
        w
    }
}

/// Dressed resonator frequency in MHz for shared params `p`, offset `o`.
fn model(p: &[f64], guess: &ResonatorGuess, v: f64, o: f64) -> f64 {
    let phi = v / p[0] + o;
    let f01 = f01_from_shape(guess.f01_max, guess.ec, p[3], phi);
    dressed_frequency(p[1], p[2], f01, -guess.ec) * 1e3
}

fn scan_offset(rec: &ExperimentRecord, shared: &[f64], guess: &ResonatorGuess) -> f64 {
    let mut best = (0.0, f64::INFINITY);
    for s in 0..OFFSET_SCAN_STEPS {
        let o = -0.5 + s as f64 / OFFSET_SCAN_STEPS as f64;
        let sse: f64 = (0..rec.len())
            .map(|i| ((rec.y[i] - model(shared, guess, rec.x[i], o)) / rec.y_sigma[i]).powi(2))
            .sum();
        if sse < best.1 {
            best = (o, sse);
        }
    }
    best.0
}

fn validate(records: &[ExperimentRecord]) -> Result<(), EstimateError> {
    if records.len() < 2 {
        return Err(EstimateError::InvalidInput(
            "at least two resonator traces are required".into(),
        ));
    }
    let first = &records[0].meta;
    for r in records {
        if r.meta.method != "resonator_scan"
            || r.meta.target != first.target
            || r.meta.source != first.source
            || r.param("adversary_bias_phi0").is_none()
            || r.x.len() != r.y.len()
            || r.y.len() != r.y_sigma.len()
            || r.len() < 8
        {
            return Err(EstimateError::InvalidInput(
                "traces must be resonator scans of one target/adversary pair with ≥ 8 points"
                    .into(),
            ));
        }
    }
    // pooled spread no larger than the noise itself: no usable flux signal
    let ys: Vec<f64> = records.iter().flat_map(|r| r.y.iter().copied()).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sd = (ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64).sqrt();
    let mut sig: Vec<f64> = records
        .iter()
        .flat_map(|r| r.y_sigma.iter().copied())
        .collect();
    sig.sort_by(f64::total_cmp);
    if sd < 1.25 * sig[sig.len() / 2] {
        return Err(EstimateError::DegenerateTraces);
    }
    Ok(())
}

/// Fits all traces jointly with multi-start Levenberg-Marquardt.
pub fn fit_global_periodic(
    records: &[ExperimentRecord],
    guess: &ResonatorGuess,
) -> Result<GlobalPeriodicFit, EstimateError> {
    validate(records)?;
    let k = records.len();
    let n: usize = records.iter().map(|r| r.len()).sum();
    let residuals = |p: &[f64], r: &mut [f64]| {
        let mut idx = 0;
        for (t, rec) in records.iter().enumerate() {
            for i in 0..rec.len() {
                r[idx] = (rec.y[i] - model(p, guess, rec.x[i], p[SHARED + t])) / rec.y_sigma[i];
                idx += 1;
            }
        }
    };
    let opts = LmOptions::default();
    let mut best: Option<crate::fit::NonlinearFit> = None;
    let mut last_err = None;
    for attempt in 0..=MAX_RESTARTS {
        // deterministic perturbations of the shape prior on restarts
        let scale = [0.0, 0.02, -0.02, 0.05, -0.05, 0.1][attempt];
        let mut shared = guess.shared();
        shared[0] *= 1.0 + scale;
        shared[3] = (shared[3] * (1.0 + 3.0 * scale)).clamp(0.01, 0.99);
        let mut p0 = shared.to_vec();
        p0.extend(records.iter().map(|rec| scan_offset(rec, &shared, guess)));
        match levenberg_marquardt(residuals, &p0, n, &opts) {
            Ok(fit) => {
                let good = fit.chi2 / (n - SHARED - k).max(1) as f64 <= CHI2_RESTART;
                if best.as_ref().is_none_or(|b| fit.chi2 < b.chi2) {
                    best = Some(fit);
                }
                if good {
                    break;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let fit = best.ok_or_else(|| {
        EstimateError::FitFailure(format!(
            "global resonator fit did not converge after {MAX_RESTARTS} restarts: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))
    })?;
    let raw = &fit.params[SHARED..];
    let offsets_unwrapped: Vec<f64> = raw.iter().map(|o| raw[0] + wrap(o - raw[0])).collect();
    Ok(GlobalPeriodicFit {
        volts_per_phi0: fit.params[0],
        f_bare: fit.params[1],
        g: fit.params[2],
        asymmetry: fit.params[3],
        offsets: raw.iter().map(|&o| wrap(o)).collect(),
        offsets_unwrapped,
        covariance: fit.covariance,
        chi2: fit.chi2,
        n_points: n,
    })
}

/// Resonator method: global fit, then a generalized least-squares line
/// through the offsets against adversary flux. The slope is the crosstalk.
pub fn fit_dc_resonator(
    records: &[ExperimentRecord],
    guess: &ResonatorGuess,
) -> Result<CrosstalkEstimate, EstimateError> {
    let fit = fit_global_periodic(records, guess)?;
    let biases: Vec<f64> = records
        .iter()
        .map(|r| r.param("adversary_bias_phi0").expect("validated"))
        .collect();
    let design = DMatrix::from_fn(biases.len(), 2, |i, j| if j == 0 { 1.0 } else { biases[i] });
    let line =
        generalized_least_squares(&design, &fit.offsets_unwrapped, &fit.offset_covariance())?;
    let meta = &records[0].meta;
    Ok(CrosstalkEstimate {
        from_qubit: meta.source.unwrap_or(meta.target),
        to_qubit: meta.target,
        value: line.coef[1],
        sigma: line.sigma(1),
        method: Method::DcResonator,
        freq_mhz: None,
    })
}
