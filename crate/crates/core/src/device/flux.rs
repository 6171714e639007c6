use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DeviceError, Table};

/// Tone frequencies accepted by the control chain (MHz).
pub const TONE_FREQ_MIN_MHZ: f64 = 50.0;
pub const TONE_FREQ_MAX_MHZ: f64 = 500.0;

/// Tones closer than this are treated as the same frequency.
const SAME_FREQ_TOL_MHZ: f64 = 1e-9;

/// Control line for one tunable qubit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxLine {
    pub qubit_id: usize,
    /// DC conversion, V/Φ₀.
    pub dc_volts_per_phi0: f64,
    /// AC conversion vs tone frequency (MHz → V/Φ₀).
    pub ac_volts_per_phi0: Table,
    /// Static electrical phase added to every tone on this line.
    #[serde(default)]
    pub phase_offset_rad: f64,
}

impl FluxLine {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.dc_volts_per_phi0 > 0.0) || self.ac_volts_per_phi0.y().iter().any(|&v| !(v > 0.0))
        {
            return Err(DeviceError::InvalidConfig(format!(
                "flux line {} has a non-positive conversion",
                self.qubit_id
            )));
        }
        if !self.phase_offset_rad.is_finite() {
            return Err(DeviceError::InvalidConfig(format!(
                "flux line {} has a non-finite phase offset",
                self.qubit_id
            )));
        }
        Ok(())
    }

    pub fn ac_volts_per_phi0_at(&self, freq_mhz: f64) -> Result<f64, DeviceError> {
        self.ac_volts_per_phi0
            .eval(freq_mhz)
            .ok_or(DeviceError::FrequencyOutOfRange { freq_mhz })
    }
}

/// DC crosstalk matrix plus frequency-dependent AC ratios.
///
/// Indices are device positions; entry `[to][from]` is the flux seen by
/// qubit `to` per unit flux on the line of qubit `from`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkNetwork {
    x_dc: Vec<Vec<f64>>,
    x_ac: BTreeMap<(usize, usize), Table>,
}

impl CrosstalkNetwork {
    pub fn new(
        x_dc: Vec<Vec<f64>>,
        x_ac: BTreeMap<(usize, usize), Table>,
    ) -> Result<Self, DeviceError> {
        let n = x_dc.len();
        if x_dc.iter().any(|row| row.len() != n) {
            return Err(DeviceError::InvalidConfig(
                "crosstalk_dc must be square".into(),
            ));
        }
        for (i, row) in x_dc.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i == j && v != 1.0 {
                    return Err(DeviceError::InvalidConfig(format!(
                        "crosstalk_dc diagonal must be exactly 1 (entry {i} is {v})"
                    )));
                }
                if i != j && !(v.abs() < 0.5) {
                    return Err(DeviceError::InvalidConfig(format!(
                        "crosstalk_dc[{i}][{j}] = {v} is not below 0.5 in magnitude"
                    )));
                }
            }
        }
        let mut net = Self {
            x_dc,
            x_ac: BTreeMap::new(),
        };
        for ((to, from), table) in x_ac {
            net.set_ac(to, from, table)?;
        }
        Ok(net)
    }

    /// No crosstalk between any of `n` lines.
    pub fn identity(n: usize) -> Self {
        let x_dc = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            x_dc,
            x_ac: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.x_dc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_dc.is_empty()
    }

    pub fn dc(&self, to: usize, from: usize) -> f64 {
        self.x_dc[to][from]
    }

    pub fn dc_matrix(&self) -> &[Vec<f64>] {
        &self.x_dc
    }

    pub fn set_dc(&mut self, to: usize, from: usize, value: f64) -> Result<(), DeviceError> {
        if to == from || !(value.abs() < 0.5) {
            return Err(DeviceError::InvalidConfig(format!(
                "cannot set crosstalk_dc[{to}][{from}] = {value}"
            )));
        }
        self.x_dc[to][from] = value;
        Ok(())
    }

    pub fn set_ac(&mut self, to: usize, from: usize, table: Table) -> Result<(), DeviceError> {
        let n = self.len();
        if to >= n || from >= n || to == from {
            return Err(DeviceError::InvalidConfig(format!(
                "crosstalk_ac pair ({to}, {from}) is not an off-diagonal pair"
            )));
        }
        if !table.covers(TONE_FREQ_MIN_MHZ, TONE_FREQ_MAX_MHZ) {
            return Err(DeviceError::InvalidConfig(format!(
                "crosstalk_ac table for ({to}, {from}) must cover [{TONE_FREQ_MIN_MHZ}, {TONE_FREQ_MAX_MHZ}] MHz"
            )));
        }
        self.x_ac.insert((to, from), table);
        Ok(())
    }

    pub fn ac_table(&self, to: usize, from: usize) -> Option<&Table> {
        self.x_ac.get(&(to, from))
    }

    /// AC crosstalk ratio at `freq_mhz`. Pairs without a table fall back to
    /// their DC value; the diagonal is 1.
    pub fn ac(&self, to: usize, from: usize, freq_mhz: f64) -> Result<f64, DeviceError> {
        if to == from {
            return Ok(1.0);
        }
        match self.x_ac.get(&(to, from)) {
            Some(t) => t
                .eval(freq_mhz)
                .ok_or(DeviceError::FrequencyOutOfRange { freq_mhz }),
            None if (TONE_FREQ_MIN_MHZ..=TONE_FREQ_MAX_MHZ).contains(&freq_mhz) => {
                Ok(self.x_dc[to][from])
            }
            None => Err(DeviceError::FrequencyOutOfRange { freq_mhz }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxUnit {
    Volts,
    Phi0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub amplitude: f64,
    pub freq_mhz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineDrive {
    pub qubit_id: usize,
    #[serde(default)]
    pub dc: f64,
    #[serde(default)]
    pub tones: Vec<Tone>,
}

/// DC biases and AC tones requested on each flux line, in one unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxProgram {
    pub unit: FluxUnit,
    #[serde(default)]
    pub lines: Vec<LineDrive>,
}

impl FluxProgram {
    pub fn new(unit: FluxUnit) -> Self {
        Self {
            unit,
            lines: Vec::new(),
        }
    }

    fn line_mut(&mut self, qubit_id: usize) -> &mut LineDrive {
        let pos = match self.lines.iter().position(|l| l.qubit_id == qubit_id) {
            Some(p) => p,
            None => {
                self.lines.push(LineDrive {
                    qubit_id,
                    dc: 0.0,
                    tones: Vec::new(),
                });
                self.lines.len() - 1
            }
        };
        &mut self.lines[pos]
    }

    /// Adds `value` to the DC request on a line.
    pub fn with_dc(mut self, qubit_id: usize, value: f64) -> Self {
        self.line_mut(qubit_id).dc += value;
        self
    }

    pub fn with_tone(mut self, qubit_id: usize, tone: Tone) -> Self {
        self.line_mut(qubit_id).tones.push(tone);
        self
    }

    pub fn is_static(&self) -> bool {
        self.lines.iter().all(|l| l.tones.is_empty())
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        for line in &self.lines {
            if !line.dc.is_finite() {
                return Err(DeviceError::InvalidProgram(format!(
                    "non-finite DC request on line {}",
                    line.qubit_id
                )));
            }
            for t in &line.tones {
                if !(TONE_FREQ_MIN_MHZ..=TONE_FREQ_MAX_MHZ).contains(&t.freq_mhz) {
                    return Err(DeviceError::FrequencyOutOfRange {
                        freq_mhz: t.freq_mhz,
                    });
                }
                if !(t.duration_ns > 0.0) {
                    return Err(DeviceError::InvalidProgram(format!(
                        "tone on line {} has non-positive duration",
                        line.qubit_id
                    )));
                }
                if !t.amplitude.is_finite() || !t.phase_rad.is_finite() {
                    return Err(DeviceError::InvalidProgram(format!(
                        "tone on line {} has non-finite amplitude or phase",
                        line.qubit_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A single tone as seen by one qubit, in Φ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTone {
    pub amp: f64,
    pub freq_mhz: f64,
    pub phase_rad: f64,
}

/// Total flux seen by one qubit: DC bias and one tone per distinct frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFlux {
    pub dc: f64,
    pub tones: Vec<EffectiveTone>,
}

impl EffectiveFlux {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.tones.iter().map(|t| t.amp).collect()
    }
}

/// Composes a program through the crosstalk network onto qubit `target`.
///
/// `lines[i]` must belong to device position `i`; `line_index` maps qubit
/// ids to positions. Same-frequency tones add as complex phasors.
pub fn effective_flux(
    network: &CrosstalkNetwork,
    lines: &[FluxLine],
    line_index: impl Fn(usize) -> Result<usize, DeviceError>,
    program: &FluxProgram,
    target: usize,
) -> Result<EffectiveFlux, DeviceError> {
    program.validate()?;
    let mut dc = 0.0;
    let mut phasors: Vec<(f64, Complex64)> = Vec::new();
    for drive in &program.lines {
        let j = line_index(drive.qubit_id)?;
        let line = &lines[j];
        let dc_phi = match program.unit {
            FluxUnit::Phi0 => drive.dc,
            FluxUnit::Volts => drive.dc / line.dc_volts_per_phi0,
        };
        dc += network.dc(target, j) * dc_phi;
        for tone in &drive.tones {
            let amp_phi = match program.unit {
                FluxUnit::Phi0 => tone.amplitude,
                FluxUnit::Volts => tone.amplitude / line.ac_volts_per_phi0_at(tone.freq_mhz)?,
            };
            let ratio = network.ac(target, j, tone.freq_mhz)?;
            let z = Complex64::from_polar(ratio * amp_phi, tone.phase_rad + line.phase_offset_rad);
            match phasors
                .iter_mut()
                .find(|(f, _)| (f - tone.freq_mhz).abs() < SAME_FREQ_TOL_MHZ)
            {
                Some((_, acc)) => *acc += z,
                None => phasors.push((tone.freq_mhz, z)),
            }
        }
    }
    phasors.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tones = phasors
        .into_iter()
        .map(|(freq_mhz, z)| EffectiveTone {
            amp: z.norm(),
            freq_mhz,
            phase_rad: z.arg(),
        })
        .collect();
    Ok(EffectiveFlux { dc, tones })
}
