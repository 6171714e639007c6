//! Crosstalk estimators: the resonator and qubit-frequency DC methods, AC
//! amplitude calibration and phase-interference fits, matrix assembly and
//! the cross-method consistency histogram.

mod ac;
mod matrix;
mod qubit;
mod resonator;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::DeviceError;
use crate::fit::FitError;
use crate::lab::LabError;

pub use ac::{
    ac_crosstalk_spectrum, fit_ac_crosstalk, fit_amplitude_calibration, AcSettings,
    AmplitudeCalibration, AmplitudeGuess, PhaseReference,
};
pub use matrix::{ac_matrix, dc_matrix, dc_qubit_pair, dc_resonator_pair, pair_seed, DcSettings};
pub use qubit::{fit_dc_qubit, QubitMapping};
pub use resonator::{fit_dc_resonator, fit_global_periodic, GlobalPeriodicFit, ResonatorGuess};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("resonator traces show no flux dependence above the noise")]
    DegenerateTraces,
    #[error("target slope {slope:.4e} is below 10σ ({sigma:.3e})")]
    ZeroDenominator { slope: f64, sigma: f64 },
    #[error(
        "amplitude scan reaches {max_amp:.4} V, below 0.8 of the sweet spot at {sweet_spot:.4} V"
    )]
    InsufficientSpan { max_amp: f64, sweet_spot: f64 },
    #[error("interference amplitude {amplitude:.3e} is below 2σ ({sigma:.3e}); phase undefined")]
    AmbiguousPhase { amplitude: f64, sigma: f64 },
    #[error("estimate sets do not cover the same ordered pairs")]
    PairMismatch,
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl From<FitError> for EstimateError {
    fn from(e: FitError) -> Self {
        Self::FitFailure(e.to_string())
    }
}

impl From<DeviceError> for EstimateError {
    fn from(e: DeviceError) -> Self {
        Self::Lab(LabError::Device(e))
    }
}

impl EstimateError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FitFailure(_) => "FitFailure",
            Self::DegenerateTraces => "DegenerateTraces",
            Self::ZeroDenominator { .. } => "ZeroDenominator",
            Self::InsufficientSpan { .. } => "InsufficientSpan",
            Self::AmbiguousPhase { .. } => "AmbiguousPhase",
            Self::PairMismatch => "PairMismatch",
            Self::InvalidInput(_) => "InvalidInput",
            Self::Lab(e) => e.name(),
        }
    }

    /// True for failures of the numerical fitting itself.
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            Self::FitFailure(_) | Self::Lab(LabError::FitFailure(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DcResonator,
    DcQubit,
    Ac,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DcResonator => "dc_resonator",
            Self::DcQubit => "dc_qubit",
            Self::Ac => "ac",
        }
    }
}

/// Crosstalk `dΦ_to / dΦ_from` with its 1σ error (dimensionless).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkEstimate {
    pub from_qubit: usize,
    pub to_qubit: usize,
    pub value: f64,
    pub sigma: f64,
    pub method: Method,
    /// Tone frequency, present for AC estimates only.
    pub freq_mhz: Option<f64>,
}

impl CrosstalkEstimate {
    pub fn value_pct(&self) -> f64 {
        100.0 * self.value
    }

    pub fn sigma_pct(&self) -> f64 {
        100.0 * self.sigma
    }

    /// (value - truth)/σ.
    pub fn pull(&self, truth: f64) -> f64 {
        (self.value - truth) / self.sigma
    }
}

/// Normalized differences between two estimate sets over the same pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparison {
    /// `(from, to, (a - b)/sqrt(σa² + σb²))`.
    pub normalized: Vec<(usize, usize, f64)>,
    pub mean: f64,
    pub rms: f64,
}

impl MethodComparison {
    /// Counts of normalized differences in `bins` equal bins over `[lo, hi)`;
    /// values outside are clamped into the end bins.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &(_, _, z) in &self.normalized {
            let k = ((z - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
            .collect()
    }
}

/// Pairs `a` and `b` by (from, to) and normalizes their differences.
pub fn compare_methods(
    a: &[CrosstalkEstimate],
    b: &[CrosstalkEstimate],
) -> Result<MethodComparison, EstimateError> {
    let key = |e: &CrosstalkEstimate| (e.from_qubit, e.to_qubit);
    let mut ka: Vec<_> = a.iter().map(key).collect();
    let mut kb: Vec<_> = b.iter().map(key).collect();
    ka.sort_unstable();
    kb.sort_unstable();
    if ka != kb || ka.windows(2).any(|w| w[0] == w[1]) {
        return Err(EstimateError::PairMismatch);
    }
    let mut normalized: Vec<(usize, usize, f64)> = a
        .iter()
        .map(|ea| {
            let eb = b
                .iter()
                .find(|e| key(e) == key(ea))
                .expect("pair sets match");
            let s = (ea.sigma * ea.sigma + eb.sigma * eb.sigma).sqrt();
            let z = if s > 0.0 {
                (ea.value - eb.value) / s
            } else {
                0.0
            };
            (ea.from_qubit, ea.to_qubit, z)
        })
        .collect();
    normalized.sort_by_key(|&(f, t, _)| (f, t));
    let n = normalized.len().max(1) as f64;
    let mean = normalized.iter().map(|v| v.2).sum::<f64>() / n;
    let rms = (normalized.iter().map(|v| v.2 * v.2).sum::<f64>() / n).sqrt();
    Ok(MethodComparison {
        normalized,
        mean,
        rms,
    })
}

/// Long-format CSV: `from,to,method,freq_mhz,value_pct,sigma_pct`.
pub fn write_estimates_csv<W: Write>(out: W, estimates: &[CrosstalkEstimate]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "method", "freq_mhz", "value_pct", "sigma_pct"])?;
    for e in estimates {
        w.write_record([
            e.from_qubit.to_string(),
            e.to_qubit.to_string(),
            e.method.as_str().to_string(),
            e.freq_mhz.map(|f| format!("{f}")).unwrap_or_default(),
            format!("{:.8e}", e.value_pct()),
            format!("{:.8e}", e.sigma_pct()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Square matrix view of estimates; rows are `to`, columns `from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub method: Method,
    pub freq_mhz: Option<f64>,
    pub qubits: Vec<usize>,
    pub value_pct: Vec<Vec<Option<f64>>>,
    pub sigma_pct: Vec<Vec<Option<f64>>>,
}

impl MatrixDocument {
    pub fn from_estimates(
        method: Method,
        freq_mhz: Option<f64>,
        qubits: &[usize],
        estimates: &[CrosstalkEstimate],
    ) -> Self {
        let n = qubits.len();
        let mut value_pct = vec![vec![None; n]; n];
        let mut sigma_pct = vec![vec![None; n]; n];
        for e in estimates.iter().filter(|e| e.method == method) {
            let (Some(i), Some(j)) = (
                qubits.iter().position(|&q| q == e.to_qubit),
                qubits.iter().position(|&q| q == e.from_qubit),
            ) else {
                continue;
            };
            value_pct[i][j] = Some(e.value_pct());
            sigma_pct[i][j] = Some(e.sigma_pct());
        }
        Self {
            method,
            freq_mhz,
            qubits: qubits.to_vec(),
            value_pct,
            sigma_pct,
        }
    }
}
