//! Scenario documents and the study runner behind the `fluxtalk run` command.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, DeviceConfig, LoadedDevice, DEFAULT_DEVICE_JSON};
use crate::device::{Device, DeviceError, TONE_FREQ_MAX_MHZ, TONE_FREQ_MIN_MHZ};
use crate::estimate::{
    ac_crosstalk_spectrum, ac_matrix, compare_methods, dc_matrix, dc_qubit_pair, dc_resonator_pair,
    pair_seed, write_estimates_csv, AcSettings, CrosstalkEstimate, DcSettings, EstimateError,
    MatrixDocument, Method,
};
use crate::gate::{
    calibrate_gate, crosstalk_to_perturbations, optimize_rz_correction, resilience_sweep,
    simulate_qpt, Adversary, GateError, PerturbationPath, QptOptions, ResilienceSettings,
};
use crate::lab::{ExperimentRecord, Lab, Realism};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Device document, relative to the scenario file; the built-in default
    /// device when absent.
    #[serde(default)]
    pub device_config: Option<PathBuf>,
    pub study: Study,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Relative to the scenario file.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub realism: Option<Realism>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self {
            lo: -4.0,
            hi: 4.0,
            bins: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Study {
    DcResonator {
        to: usize,
        from: usize,
        #[serde(default)]
        settings: DcSettings,
    },
    DcQubit {
        to: usize,
        from: usize,
        #[serde(default)]
        settings: DcSettings,
    },
    DcMatrix {
        method: Method,
        #[serde(default)]
        settings: DcSettings,
    },
    AcMatrix {
        freq_mhz: f64,
        #[serde(default)]
        settings: AcSettings,
    },
    AcSpectrum {
        to: usize,
        from: usize,
        freqs_mhz: Vec<f64>,
        #[serde(default)]
        settings: AcSettings,
    },
    MethodCompare {
        #[serde(default)]
        settings: DcSettings,
        #[serde(default)]
        histogram: HistogramSpec,
    },
    Resilience {
        gate: String,
        settings: ResilienceSettings,
    },
    Qpt {
        gate: String,
        #[serde(default)]
        adversary: Option<Adversary>,
        #[serde(default)]
        path: PerturbationPath,
        #[serde(default)]
        options: QptOptions,
    },
}

impl Study {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DcResonator { .. } => "dc_resonator",
            Self::DcQubit { .. } => "dc_qubit",
            Self::DcMatrix { .. } => "dc_matrix",
            Self::AcMatrix { .. } => "ac_matrix",
            Self::AcSpectrum { .. } => "ac_spectrum",
            Self::MethodCompare { .. } => "method_compare",
            Self::Resilience { .. } => "resilience",
            Self::Qpt { .. } => "qpt",
        }
    }

    /// Checks parameters against the device before anything runs.
    pub fn validate(&self, loaded: &LoadedDevice) -> Result<(), ScenarioError> {
        let dev = &loaded.device;
        let pair = |to: usize, from: usize| -> Result<(), ScenarioError> {
            dev.index_of(to)?;
            dev.index_of(from)?;
            if to == from {
                return invalid(format!("target and source are both qubit {to}"));
            }
            Ok(())
        };
        let tone = |f: f64| -> Result<(), ScenarioError> {
            if !(TONE_FREQ_MIN_MHZ..=TONE_FREQ_MAX_MHZ).contains(&f) {
                return Err(DeviceError::FrequencyOutOfRange { freq_mhz: f }.into());
            }
            Ok(())
        };
        match self {
            Self::DcResonator { to, from, settings } | Self::DcQubit { to, from, settings } => {
                pair(*to, *from)?;
                validate_dc(settings)
            }
            Self::DcMatrix { method, settings } => {
                if *method == Method::Ac {
                    return invalid("dc_matrix takes dc_resonator or dc_qubit".into());
                }
                validate_dc(settings)
            }
            Self::MethodCompare {
                settings,
                histogram,
            } => {
                if !(histogram.bins > 0 && histogram.lo < histogram.hi) {
                    return invalid("histogram needs bins > 0 and lo < hi".into());
                }
                validate_dc(settings)
            }
            Self::AcMatrix { freq_mhz, settings } => {
                tone(*freq_mhz)?;
                validate_ac(settings)
            }
            Self::AcSpectrum {
                to,
                from,
                freqs_mhz,
                settings,
            } => {
                pair(*to, *from)?;
                if freqs_mhz.is_empty() {
                    return invalid("freqs_mhz is empty".into());
                }
                freqs_mhz.iter().try_for_each(|&f| tone(f))?;
                validate_ac(settings)
            }
            Self::Resilience { gate, settings } => {
                let spec = loaded.gate(gate)?;
                dev.index_of(settings.adversary_line)?;
                if settings.adversary_line == spec.tunable {
                    return invalid("adversary line is the gate's own line".into());
                }
                if settings.gate_amp_grid_phi0.is_empty() || settings.adversary_amps_v.is_empty() {
                    return invalid("resilience grids must be non-empty".into());
                }
                Ok(())
            }
            Self::Qpt {
                gate, adversary, ..
            } => {
                let spec = loaded.gate(gate)?;
                if let Some(a) = adversary {
                    dev.index_of(a.line)?;
                    if a.line == spec.tunable {
                        return invalid("adversary line is the gate's own line".into());
                    }
                }
                Ok(())
            }
        }
    }
}

fn invalid<T>(msg: String) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg))
}

fn validate_dc(s: &DcSettings) -> Result<(), ScenarioError> {
    if s.adversary_biases.len() < 2 || s.resonator_points < 8 || s.resonator_span_phi0 <= 0.0 {
        return invalid(
            "dc settings need ≥ 2 adversary biases, ≥ 8 resonator points and a positive span"
                .into(),
        );
    }
    if !(s.qubit_step_phi0 > 0.0 && s.qubit_step_phi0 < s.qubit_bias_phi0) {
        return invalid("qubit_step_phi0 must be positive and below qubit_bias_phi0".into());
    }
    Ok(())
}

fn validate_ac(s: &AcSettings) -> Result<(), ScenarioError> {
    if s.calib_points < 4 || s.phase_points < 4 || s.adversary_amp_phi0 <= 0.0 {
        return invalid("ac settings need ≥ 4 calibration and phase points".into());
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("cannot write artifacts: {0}")]
    Write(String),
}

impl ScenarioError {
    /// Error name qualified by the module that raised it.
    pub fn qualified_name(&self) -> String {
        match self {
            Self::Read { .. } => "scenario::Read".into(),
            Self::Parse(_) => "scenario::Parse".into(),
            Self::Invalid(_) => "scenario::Invalid".into(),
            Self::Config(e) => format!("config::{}", e.name()),
            Self::Device(e) => format!("device::{}", e.name()),
            Self::Estimate(e) => format!("estimate::{}", e.name()),
            Self::Gate(e) => format!("gate::{}", e.name()),
            Self::Write(_) => "scenario::Write".into(),
        }
    }

    /// 2 for rejected inputs, 3 when a measurement cannot be fitted or
    /// reconstructed, 1 for I/O trouble.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Read { .. } | Self::Write(_) => 1,
            Self::Estimate(e) => match e {
                EstimateError::InvalidInput(_) | EstimateError::PairMismatch => 2,
                EstimateError::Lab(crate::lab::LabError::Device(_))
                | EstimateError::Lab(crate::lab::LabError::InvalidSettings(_)) => 2,
                _ => 3,
            },
            Self::Gate(GateError::ReconstructionIllConditioned { .. }) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        Self::Write(e.to_string())
    }
}

/// Command-line overrides of scenario fields.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub realism: Option<Realism>,
    /// Worker threads; all available cores when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub study: String,
    pub seed: u64,
    pub realism: Realism,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<ArtifactDigest>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Artifacts are gathered in memory and written by one writer at the end.
#[derive(Default)]
struct Artifacts(BTreeMap<String, Vec<u8>>);

impl Artifacts {
    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ScenarioError> {
        let mut text =
            serde_json::to_vec_pretty(value).map_err(|e| ScenarioError::Write(e.to_string()))?;
        text.push(b'\n');
        self.0.insert(name.into(), text);
        Ok(())
    }

    fn csv_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    ) -> Result<(), ScenarioError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| ScenarioError::Write(e.to_string()))?;
        self.0.insert(name.into(), buf);
        Ok(())
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), ScenarioError> {
        self.csv_with(name, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
            Ok(())
        })
    }

    fn estimates(&mut self, name: &str, est: &[CrosstalkEstimate]) -> Result<(), ScenarioError> {
        self.csv_with(name, |buf| write_estimates_csv(buf, est))
    }

    fn records(&mut self, stem: &str, recs: &[ExperimentRecord]) -> Result<(), ScenarioError> {
        for (k, r) in recs.iter().enumerate() {
            self.csv_with(&format!("{stem}_{k}.csv"), |buf| r.write_csv(buf))?;
            self.json(&format!("{stem}_{k}.json"), &r.meta)?;
        }
        Ok(())
    }

    fn matrix(&mut self, doc: &MatrixDocument) -> Result<(), ScenarioError> {
        self.csv_with("matrix.csv", |buf| {
            write_matrix_csv(buf, &doc.qubits, &doc.value_pct)
        })?;
        self.csv_with("matrix_sigma.csv", |buf| {
            write_matrix_csv(buf, &doc.qubits, &doc.sigma_pct)
        })?;
        self.json("matrix.json", doc)
    }
}

/// Square CSV in percent; rows are targets, columns sources, the diagonal
/// is left empty.
pub fn write_matrix_csv<W: Write>(
    out: W,
    qubits: &[usize],
    cells: &[Vec<Option<f64>>],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["to\\from".to_string()];
    header.extend(qubits.iter().map(|q| q.to_string()));
    w.write_record(&header)?;
    for (q, row) in qubits.iter().zip(cells) {
        let mut rec = vec![q.to_string()];
        rec.extend(
            row.iter()
                .map(|c| c.map(|v| format!("{v:.8e}")).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ComparisonRow {
    from: usize,
    to: usize,
    normalized_diff: f64,
}

#[derive(Serialize)]
struct HistogramRow {
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Serialize)]
struct ComparisonSummary {
    pairs: usize,
    mean: f64,
    rms: f64,
}

#[derive(Serialize)]
struct QptSummary<'a> {
    gate: &'a str,
    f_m_mhz: f64,
    tau_ns: f64,
    amp_phi0: f64,
    adversary: Option<&'a Adversary>,
    delta_f01_mhz: f64,
    delta_g_mhz: f64,
    baseline_avg_fidelity: f64,
    perturbed_avg_fidelity: f64,
    rz_alpha_rad: f64,
    rz_beta_rad: f64,
    rz_corrected_avg_fidelity: f64,
}

/// Independent stream per single-pair study.
const SINGLE_STREAM: u64 = 0;

fn execute(
    loaded: &LoadedDevice,
    study: &Study,
    realism: Realism,
    seed: u64,
) -> Result<Artifacts, ScenarioError> {
    let dev: &Device = &loaded.device;
    let lab = Lab::new(dev, loaded.noise.clone(), realism);
    let mut art = Artifacts::default();
    match study {
        Study::DcResonator { to, from, settings } => {
            let mut rng = pair_seed(seed, SINGLE_STREAM);
            let (recs, est) = dc_resonator_pair(&lab, *to, *from, settings, &mut rng)?;
            art.records("trace", &recs)?;
            art.estimates("estimates.csv", std::slice::from_ref(&est))?;
        }
        Study::DcQubit { to, from, settings } => {
            let mut rng = pair_seed(seed, SINGLE_STREAM);
            let (recs, est) = dc_qubit_pair(&lab, *to, *from, settings, &mut rng)?;
            art.records("trace", &recs)?;
            art.estimates("estimates.csv", std::slice::from_ref(&est))?;
        }
        Study::DcMatrix { method, settings } => {
            let est = dc_matrix(&lab, *method, settings, seed)?;
            art.estimates("estimates.csv", &est)?;
            art.matrix(&MatrixDocument::from_estimates(
                *method,
                None,
                &dev.qubit_ids(),
                &est,
            ))?;
        }
        Study::AcMatrix { freq_mhz, settings } => {
            let est = ac_matrix(&lab, *freq_mhz, settings, seed)?;
            art.estimates("estimates.csv", &est)?;
            art.matrix(&MatrixDocument::from_estimates(
                Method::Ac,
                Some(*freq_mhz),
                &dev.qubit_ids(),
                &est,
            ))?;
        }
        Study::AcSpectrum {
            to,
            from,
            freqs_mhz,
            settings,
        } => {
            let mut rng = pair_seed(seed, SINGLE_STREAM);
            let est = ac_crosstalk_spectrum(&lab, *to, *from, freqs_mhz, settings, &mut rng)?;
            art.estimates("estimates.csv", &est)?;
        }
        Study::MethodCompare {
            settings,
            histogram,
        } => {
            let a = dc_matrix(&lab, Method::DcResonator, settings, seed)?;
            let b = dc_matrix(&lab, Method::DcQubit, settings, seed)?;
            let cmp = compare_methods(&a, &b)?;
            let all: Vec<CrosstalkEstimate> = a.iter().chain(&b).cloned().collect();
            art.estimates("estimates.csv", &all)?;
            let rows: Vec<ComparisonRow> = cmp
                .normalized
                .iter()
                .map(|&(from, to, z)| ComparisonRow {
                    from,
                    to,
                    normalized_diff: z,
                })
                .collect();
            art.rows("comparison.csv", &rows)?;
            let hist: Vec<HistogramRow> = cmp
                .histogram(histogram.lo, histogram.hi, histogram.bins)
                .into_iter()
                .map(|(lo, hi, count)| HistogramRow { lo, hi, count })
                .collect();
            art.rows("histogram.csv", &hist)?;
            art.json(
                "summary.json",
                &ComparisonSummary {
                    pairs: cmp.normalized.len(),
                    mean: cmp.mean,
                    rms: cmp.rms,
                },
            )?;
        }
        Study::Resilience { gate, settings } => {
            let rows = resilience_sweep(dev, loaded.gate(gate)?, settings)?;
            art.rows("resilience.csv", &rows)?;
        }
        Study::Qpt {
            gate,
            adversary,
            path,
            options,
        } => {
            let cal = calibrate_gate(dev, loaded.gate(gate)?)?;
            let perturbed = match adversary {
                Some(a) => crosstalk_to_perturbations(dev, &cal, a, *path)?.apply(&cal.model),
                None => cal.model,
            };
            // the scenario seed drives shot noise; the options' own seed is ignored
            let with_seed = |s: u64| QptOptions {
                seed: s,
                ..options.clone()
            };
            let base = simulate_qpt(&cal.model, &with_seed(seed))?;
            let tomo = simulate_qpt(&perturbed, &with_seed(seed.wrapping_add(1)))?;
            let rz = optimize_rz_correction(&tomo.ptm);
            art.json("baseline_tomogram.json", &base.document())?;
            art.json("tomogram.json", &tomo.document())?;
            art.json(
                "summary.json",
                &QptSummary {
                    gate,
                    f_m_mhz: cal.model.f_m_mhz,
                    tau_ns: cal.model.tau_ns,
                    amp_phi0: cal.amp_phi0,
                    adversary: adversary.as_ref(),
                    delta_f01_mhz: perturbed.delta_omega01 / (2.0 * std::f64::consts::PI),
                    delta_g_mhz: perturbed.delta_g / (2.0 * std::f64::consts::PI),
                    baseline_avg_fidelity: base.avg_fidelity,
                    perturbed_avg_fidelity: tomo.avg_fidelity,
                    rz_alpha_rad: rz.alpha,
                    rz_beta_rad: rz.beta,
                    rz_corrected_avg_fidelity: rz.corrected_fidelity,
                },
            )?;
        }
    }
    Ok(art)
}

/// Parses, validates and runs a scenario file, writing artifacts and the
/// manifest into the output directory.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunReport, ScenarioError> {
    let text = std::fs::read(path).map_err(|e| ScenarioError::Read {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let scenario: Scenario =
        serde_json::from_slice(&text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (device_json, device_name) = match &scenario.device_config {
        Some(p) => {
            let full = base.join(p);
            let t = std::fs::read_to_string(&full).map_err(|e| ConfigError::Io {
                path: full.display().to_string(),
                reason: e.to_string(),
            })?;
            (t, file_name(p))
        }
        None => (
            DEFAULT_DEVICE_JSON.to_string(),
            "builtin:default_device.json".into(),
        ),
    };
    let out_dir = match (&opts.out, &scenario.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from(&scenario.name),
    };
    let inputs = vec![
        InputDigest {
            role: "scenario".into(),
            name: file_name(path),
            sha256: sha256_hex(&text),
        },
        InputDigest {
            role: "device_config".into(),
            name: device_name,
            sha256: sha256_hex(device_json.as_bytes()),
        },
    ];
    run(&scenario, &device_json, inputs, &out_dir, opts)
}

/// Runs an already parsed scenario against a device document.
pub fn run(
    scenario: &Scenario,
    device_json: &str,
    inputs: Vec<InputDigest>,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunReport, ScenarioError> {
    let seed = opts
        .seed
        .or(scenario.seed)
        .ok_or_else(|| ScenarioError::Invalid("a seed is required (scenario or --seed)".into()))?;
    let realism = opts.realism.or(scenario.realism).unwrap_or_default();
    let loaded = DeviceConfig::from_json(device_json)?.build()?;
    scenario.study.validate(&loaded)?;
    if opts.jobs == Some(0) {
        return invalid("jobs must be at least 1".into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    let artifacts = pool.install(|| execute(&loaded, &scenario.study, realism, seed))?;

    std::fs::create_dir_all(out_dir)?;
    let mut digests = Vec::with_capacity(artifacts.0.len());
    for (name, bytes) in &artifacts.0 {
        std::fs::write(out_dir.join(name), bytes)?;
        digests.push(ArtifactDigest {
            file: name.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: scenario.name.clone(),
        study: scenario.study.kind().into(),
        seed,
        realism,
        inputs,
        artifacts: digests,
    };
    let mut text =
        serde_json::to_vec_pretty(&manifest).map_err(|e| ScenarioError::Write(e.to_string()))?;
    text.push(b'\n');
    std::fs::write(out_dir.join(MANIFEST_FILE), text)?;
    Ok(RunReport {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}
