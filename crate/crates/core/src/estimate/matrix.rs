use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ac::{calibrate, measure_pair, AcSettings};
use super::{
    fit_dc_qubit, fit_dc_resonator, CrosstalkEstimate, EstimateError, Method, QubitMapping,
    ResonatorGuess,
};
use crate::lab::{linspace, ExperimentRecord, Lab};

/// Acquisition settings for both DC methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcSettings {
    /// Resonator scans cover `±resonator_span_phi0` of the target line.
    pub resonator_span_phi0: f64,
    pub resonator_points: usize,
    /// Source-line biases, Φ₀.
    pub adversary_biases: Vec<f64>,
    /// Target parking bias for the qubit method, Φ₀.
    pub qubit_bias_phi0: f64,
    /// Target bias step either side of the parking bias, Φ₀.
    pub qubit_step_phi0: f64,
    /// Map frequencies to flux through the target spectrum before fitting.
    pub qubit_mapping_correction: bool,
}

impl Default for DcSettings {
    fn default() -> Self {
        Self {
            resonator_span_phi0: 0.6,
            resonator_points: 61,
            adversary_biases: vec![-1.0, 0.0, 1.0],
            qubit_bias_phi0: 0.25,
            qubit_step_phi0: 0.02,
            qubit_mapping_correction: false,
        }
    }
}

/// Generator for one independent stream of a seeded run.
pub fn pair_seed(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn stream_id(tag: u64, index: usize) -> u64 {
    (tag << 32) | index as u64
}

/// Three resonator traces and the resulting estimate for `from → to`.
pub fn dc_resonator_pair(
    lab: &Lab,
    to: usize,
    from: usize,
    settings: &DcSettings,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<ExperimentRecord>, CrosstalkEstimate), EstimateError> {
    let guess = ResonatorGuess::from_device(lab.device, to)?;
    let span = settings.resonator_span_phi0 * guess.volts_per_phi0;
    let grid = linspace(-span, span, settings.resonator_points);
    let records = settings
        .adversary_biases
        .iter()
        .map(|&b| lab.resonator_scan(to, from, b, &grid, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let est = fit_dc_resonator(&records, &guess)?;
    Ok((records, est))
}

/// Target and source slope scans and the resulting estimate for `from → to`.
pub fn dc_qubit_pair(
    lab: &Lab,
    to: usize,
    from: usize,
    settings: &DcSettings,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<ExperimentRecord>, CrosstalkEstimate), EstimateError> {
    let c = settings.qubit_bias_phi0;
    let h = settings.qubit_step_phi0;
    let a = lab.qubit_bias_scan(to, c, to, &[c - h, c, c + h], rng)?;
    let b = lab.qubit_bias_scan(to, c, from, &settings.adversary_biases, rng)?;
    let mapping = if settings.qubit_mapping_correction {
        QubitMapping::Spectrum(lab.device.transmon(lab.device.index_of(to)?).clone())
    } else {
        QubitMapping::Linear
    };
    let est = fit_dc_qubit(&a, &b, &mapping)?;
    Ok((vec![a, b], est))
}

/// All ordered `(to, from)` pairs of device positions, row-major.
fn ordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

/// DC crosstalk matrix with one method. Each ordered pair draws from its
/// own stream of `seed`, so results do not depend on scheduling.
pub fn dc_matrix(
    lab: &Lab,
    method: Method,
    settings: &DcSettings,
    seed: u64,
) -> Result<Vec<CrosstalkEstimate>, EstimateError> {
    let ids = lab.device.qubit_ids();
    let n = ids.len();
    let tag = match method {
        Method::DcResonator => 1,
        Method::DcQubit => 2,
        Method::Ac => {
            return Err(EstimateError::InvalidInput(
                "use ac_matrix for AC crosstalk".into(),
            ))
        }
    };
    ordered_pairs(n)
        .into_par_iter()
        .map(|(i, j)| {
            let mut rng = pair_seed(seed, stream_id(tag, i * n + j));
            let out = if method == Method::DcResonator {
                dc_resonator_pair(lab, ids[i], ids[j], settings, &mut rng)
            } else {
                dc_qubit_pair(lab, ids[i], ids[j], settings, &mut rng)
            };
            out.map(|r| r.1)
        })
        .collect()
}

/// AC crosstalk matrix at one tone frequency: one calibration per line,
/// then an interference scan per ordered pair.
pub fn ac_matrix(
    lab: &Lab,
    freq_mhz: f64,
    settings: &AcSettings,
    seed: u64,
) -> Result<Vec<CrosstalkEstimate>, EstimateError> {
    let ids = lab.device.qubit_ids();
    let n = ids.len();
    let calibs = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = pair_seed(seed, stream_id(3, i));
            calibrate(lab, ids[i], freq_mhz, settings, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ordered_pairs(n)
        .into_par_iter()
        .map(|(i, j)| {
            let mut rng = pair_seed(seed, stream_id(4, i * n + j));
            measure_pair(lab, &calibs[i], &calibs[j], settings, &mut rng).map(|r| r.1)
        })
        .collect()
}
