//! JSON device configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{
    CrosstalkNetwork, Device, DeviceError, FixedQubit, FluxLine, Resonator, Table, TunableTransmon,
};
use crate::gate::GateSpec;
use crate::lab::{LabError, NoiseModel};

/// The shipped default device, embedded at build time.
pub const DEFAULT_DEVICE_JSON: &str = include_str!("../../../configs/default_device.json");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl ConfigError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Io { .. } => "ConfigIo",
            Self::Parse(_) => "ConfigParse",
            Self::Device(e) => e.name(),
            Self::Lab(e) => e.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransmonConfig {
    Spectrum {
        id: usize,
        f01_max_ghz: f64,
        anharmonicity_mhz: f64,
        asymmetry: f64,
        t1_us: f64,
        t2_us: f64,
    },
    Junctions {
        id: usize,
        ej1_ghz: f64,
        ej2_ghz: f64,
        ec_ghz: f64,
        t1_us: f64,
        t2_us: f64,
    },
}

impl TransmonConfig {
    fn id(&self) -> usize {
        match self {
            Self::Spectrum { id, .. } | Self::Junctions { id, .. } => *id,
        }
    }

    fn build(&self) -> Result<TunableTransmon, DeviceError> {
        match *self {
            Self::Spectrum {
                id,
                f01_max_ghz,
                anharmonicity_mhz,
                asymmetry,
                t1_us,
                t2_us,
            } => TunableTransmon::from_spectrum(
                id,
                f01_max_ghz,
                anharmonicity_mhz * 1e-3,
                asymmetry,
                t1_us,
                t2_us,
            ),
            Self::Junctions {
                id,
                ej1_ghz,
                ej2_ghz,
                ec_ghz,
                t1_us,
                t2_us,
            } => TunableTransmon::new(id, ej1_ghz, ej2_ghz, ec_ghz, t1_us, t2_us),
        }
    }
}

/// Either bare parameters, or the dressed readout frequency and dispersive
/// shift measured at zero flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResonatorConfig {
    Bare {
        qubit_id: usize,
        f_bare_ghz: f64,
        g_ghz: f64,
    },
    Measured {
        qubit_id: usize,
        readout_ghz: f64,
        chi_mhz: f64,
    },
}

impl ResonatorConfig {
    fn qubit_id(&self) -> usize {
        match self {
            Self::Bare { qubit_id, .. } | Self::Measured { qubit_id, .. } => *qubit_id,
        }
    }

    fn build(&self, qubit: &TunableTransmon) -> Result<Resonator, DeviceError> {
        match *self {
            Self::Bare {
                f_bare_ghz, g_ghz, ..
            } => Resonator::new(f_bare_ghz, g_ghz),
            Self::Measured {
                readout_ghz,
                chi_mhz,
                ..
            } => resonator_from_readout(readout_ghz, chi_mhz * 1e-3, qubit),
        }
    }
}

/// Bare resonator whose zero-flux dressed frequency is `readout` and whose
/// dispersive shift there is `chi` (both GHz), by fixed-point iteration on
/// the bare frequency.
pub fn resonator_from_readout(
    readout: f64,
    chi: f64,
    qubit: &TunableTransmon,
) -> Result<Resonator, DeviceError> {
    let mut f_bare = readout;
    for _ in 0..200 {
        let r = Resonator::from_chi(f_bare, chi, qubit)?;
        let miss = r.dressed_freq(qubit, 0.0)? - readout;
        if miss.abs() < 1e-13 {
            return Ok(r);
        }
        f_bare -= miss;
    }
    Err(DeviceError::InvalidConfig(format!(
        "no bare resonator reproduces readout {readout} GHz for qubit {}",
        qubit.id
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxLineConfig {
    pub qubit_id: usize,
    pub dc_volts_per_phi0: f64,
    pub ac_freq_mhz: Vec<f64>,
    pub ac_volts_per_phi0: Vec<f64>,
    #[serde(default)]
    pub phase_offset_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcCrosstalkConfig {
    pub from: usize,
    pub to: usize,
    pub freq_mhz: Vec<f64>,
    pub ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedQubitConfig {
    pub id: usize,
    pub f01_ghz: f64,
    pub anharmonicity_mhz: f64,
}

/// Whole-device document. Per-qubit sections may be listed in any order;
/// `crosstalk_dc` rows and columns follow the order of `transmons`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub transmons: Vec<TransmonConfig>,
    pub resonators: Vec<ResonatorConfig>,
    pub flux_lines: Vec<FluxLineConfig>,
    pub crosstalk_dc: Vec<Vec<f64>>,
    #[serde(default)]
    pub crosstalk_ac: Vec<AcCrosstalkConfig>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub fixed_qubits: Vec<FixedQubitConfig>,
    #[serde(default)]
    pub gates: Vec<GateSpec>,
}

/// A validated device with its noise model and gate definitions.
#[derive(Debug, Clone)]
pub struct LoadedDevice {
    pub device: Device,
    pub noise: NoiseModel,
    pub gates: Vec<GateSpec>,
}

impl LoadedDevice {
    pub fn gate(&self, name: &str) -> Result<&GateSpec, DeviceError> {
        self.gates
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| DeviceError::InvalidConfig(format!("no gate named {name:?}")))
    }
}

fn pick<'a, T>(
    items: &'a [T],
    id: usize,
    key: impl Fn(&T) -> usize,
    what: &str,
) -> Result<&'a T, DeviceError> {
    let mut hits = items.iter().filter(|x| key(x) == id);
    match (hits.next(), hits.next()) {
        (Some(x), None) => Ok(x),
        (None, _) => Err(DeviceError::InvalidConfig(format!(
            "no {what} for qubit {id}"
        ))),
        _ => Err(DeviceError::InvalidConfig(format!(
            "several {what}s for qubit {id}"
        ))),
    }
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn default_device() -> Self {
        Self::from_json(DEFAULT_DEVICE_JSON).expect("embedded default device parses")
    }

    pub fn build(&self) -> Result<LoadedDevice, ConfigError> {
        let transmons = self
            .transmons
            .iter()
            .map(TransmonConfig::build)
            .collect::<Result<Vec<_>, _>>()?;
        let n = transmons.len();
        if self.resonators.len() != n || self.flux_lines.len() != n {
            return Err(DeviceError::InvalidConfig(format!(
                "{n} transmons need {n} resonators and flux lines; got {} and {}",
                self.resonators.len(),
                self.flux_lines.len()
            ))
            .into());
        }
        let mut resonators = Vec::with_capacity(n);
        let mut lines = Vec::with_capacity(n);
        for q in &transmons {
            let r = pick(
                &self.resonators,
                q.id,
                ResonatorConfig::qubit_id,
                "resonator",
            )?;
            resonators.push(r.build(q)?);
            let l = pick(&self.flux_lines, q.id, |l| l.qubit_id, "flux line")?;
            lines.push(FluxLine {
                qubit_id: q.id,
                dc_volts_per_phi0: l.dc_volts_per_phi0,
                ac_volts_per_phi0: Table::new(l.ac_freq_mhz.clone(), l.ac_volts_per_phi0.clone())?,
                phase_offset_rad: l.phase_offset_rad,
            });
        }
        let position = |id: usize| {
            self.transmons
                .iter()
                .position(|t| t.id() == id)
                .ok_or(DeviceError::UnknownQubit(id))
        };
        let mut ac = BTreeMap::new();
        for e in &self.crosstalk_ac {
            let key = (position(e.to)?, position(e.from)?);
            if ac
                .insert(key, Table::new(e.freq_mhz.clone(), e.ratio.clone())?)
                .is_some()
            {
                return Err(DeviceError::InvalidConfig(format!(
                    "duplicate AC crosstalk entry {} -> {}",
                    e.from, e.to
                ))
                .into());
            }
        }
        let network = CrosstalkNetwork::new(self.crosstalk_dc.clone(), ac)?;
        let fixed = self
            .fixed_qubits
            .iter()
            .map(|f| {
                if !(f.f01_ghz > 0.0 && f.anharmonicity_mhz < 0.0) {
                    return Err(DeviceError::InvalidConfig(format!(
                        "fixed qubit {} needs a positive frequency and negative anharmonicity",
                        f.id
                    )));
                }
                Ok(FixedQubit {
                    id: f.id,
                    f01: f.f01_ghz,
                    anharmonicity: f.anharmonicity_mhz * 1e-3,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let device = Device::new(transmons, resonators, lines, network, fixed)?;
        self.noise.validate()?;
        for g in &self.gates {
            device.index_of(g.tunable)?;
            device.fixed_qubit(g.fixed)?;
        }
        Ok(LoadedDevice {
            device,
            noise: self.noise.clone(),
            gates: self.gates.clone(),
        })
    }
}
