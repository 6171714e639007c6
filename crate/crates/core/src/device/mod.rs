//! Static chip physics: transmon spectra, dressed readout resonators and
//! the flux crosstalk network.
//!
//! Units are fixed across the crate: flux in Φ₀, qubit and resonator
//! frequencies in GHz, tone frequencies in MHz, phases in radians, times in
//! ns (coherence times in µs).

mod flux;
mod resonator;
mod table;
mod transmon;

use thiserror::Error;

pub use flux::{
    effective_flux, CrosstalkNetwork, EffectiveFlux, EffectiveTone, FluxLine, FluxProgram,
    FluxUnit, LineDrive, Tone, TONE_FREQ_MAX_MHZ, TONE_FREQ_MIN_MHZ,
};
pub use resonator::{dispersive_shift, dressed_frequency, Resonator, DISPERSIVE_FACTOR};
pub use table::Table;
pub use transmon::{f01_from_shape, FixedQubit, TunableTransmon, MIN_EJ_EC_RATIO};

use crate::dynamics::{ModulationResponse, DEFAULT_HARMONICS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid transmon {id}: {reason}")]
    InvalidTransmon { id: usize, reason: String },
    #[error(
        "qubit {qubit} leaves the dispersive regime (detuning {detuning:.4} GHz, g {g:.4} GHz)"
    )]
    DispersiveViolation { qubit: usize, detuning: f64, g: f64 },
    #[error("tone frequency {freq_mhz} MHz is outside the tabulated range")]
    FrequencyOutOfRange { freq_mhz: f64 },
    #[error("unknown qubit {0}")]
    UnknownQubit(usize),
    #[error("invalid flux program: {0}")]
    InvalidProgram(String),
    #[error("invalid device configuration: {0}")]
    InvalidConfig(String),
}

impl DeviceError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::InvalidTransmon { .. } => "InvalidTransmon",
            Self::DispersiveViolation { .. } => "DispersiveViolation",
            Self::FrequencyOutOfRange { .. } => "FrequencyOutOfRange",
            Self::UnknownQubit(_) => "UnknownQubit",
            Self::InvalidProgram(_) => "InvalidProgram",
            Self::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

/// A multi-qubit chip with a planted crosstalk network.
///
/// Tunable transmons, their resonators and flux lines are stored in
/// parallel; position `i` in each belongs to the same qubit.
#[derive(Debug, Clone)]
pub struct Device {
    transmons: Vec<TunableTransmon>,
    resonators: Vec<Resonator>,
    lines: Vec<FluxLine>,
    network: CrosstalkNetwork,
    fixed: Vec<FixedQubit>,
    responses: Vec<ModulationResponse>,
}

impl Device {
    pub fn new(
        transmons: Vec<TunableTransmon>,
        resonators: Vec<Resonator>,
        lines: Vec<FluxLine>,
        network: CrosstalkNetwork,
        fixed: Vec<FixedQubit>,
    ) -> Result<Self, DeviceError> {
        let n = transmons.len();
        if n == 0 {
            return Err(DeviceError::InvalidConfig(
                "device has no tunable transmons".into(),
            ));
        }
        if resonators.len() != n || lines.len() != n || network.len() != n {
            return Err(DeviceError::InvalidConfig(format!(
                "expected {n} resonators, flux lines and crosstalk rows; got {}, {}, {}",
                resonators.len(),
                lines.len(),
                network.len()
            )));
        }
        let mut ids: Vec<usize> = transmons.iter().map(|q| q.id).collect();
        ids.extend(fixed.iter().map(|q| q.id));
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != ids.len() {
            return Err(DeviceError::InvalidConfig("duplicate qubit ids".into()));
        }
        for ((q, r), line) in transmons.iter().zip(&resonators).zip(&lines) {
            if line.qubit_id != q.id {
                return Err(DeviceError::InvalidConfig(format!(
                    "flux line for qubit {} is listed at the position of qubit {}",
                    line.qubit_id, q.id
                )));
            }
            line.validate()?;
            r.check_dispersive_all(q)?;
        }
        let responses = transmons
            .iter()
            .map(|q| ModulationResponse::for_transmon(q, DEFAULT_HARMONICS))
            .collect();
        Ok(Self {
            transmons,
            resonators,
            lines,
            network,
            fixed,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.transmons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transmons.is_empty()
    }

    pub fn index_of(&self, qubit_id: usize) -> Result<usize, DeviceError> {
        self.transmons
            .iter()
            .position(|q| q.id == qubit_id)
            .ok_or(DeviceError::UnknownQubit(qubit_id))
    }

    pub fn qubit_ids(&self) -> Vec<usize> {
        self.transmons.iter().map(|q| q.id).collect()
    }

    pub fn transmons(&self) -> &[TunableTransmon] {
        &self.transmons
    }

    pub fn transmon(&self, idx: usize) -> &TunableTransmon {
        &self.transmons[idx]
    }

    pub fn resonator(&self, idx: usize) -> &Resonator {
        &self.resonators[idx]
    }

    pub fn resonators(&self) -> &[Resonator] {
        &self.resonators
    }

    pub fn line(&self, idx: usize) -> &FluxLine {
        &self.lines[idx]
    }

    pub fn lines(&self) -> &[FluxLine] {
        &self.lines
    }

    pub fn network(&self) -> &CrosstalkNetwork {
        &self.network
    }

    /// Replaces the crosstalk network, e.g. to plant a test matrix.
    pub fn with_network(mut self, network: CrosstalkNetwork) -> Result<Self, DeviceError> {
        if network.len() != self.len() {
            return Err(DeviceError::InvalidConfig("network size mismatch".into()));
        }
        self.network = network;
        Ok(self)
    }

    pub fn fixed_qubits(&self) -> &[FixedQubit] {
        &self.fixed
    }

    pub fn fixed_qubit(&self, id: usize) -> Result<&FixedQubit, DeviceError> {
        self.fixed
            .iter()
            .find(|q| q.id == id)
            .ok_or(DeviceError::UnknownQubit(id))
    }

    pub fn response(&self, idx: usize) -> &ModulationResponse {
        &self.responses[idx]
    }

    /// Flux seen by the qubit at position `target` under `program`.
    pub fn effective_flux(
        &self,
        program: &FluxProgram,
        target: usize,
    ) -> Result<EffectiveFlux, DeviceError> {
        effective_flux(
            &self.network,
            &self.lines,
            |id| self.index_of(id),
            program,
            target,
        )
    }

    /// Time-averaged qubit frequency (GHz) under `program`.
    pub fn mean_f01(&self, program: &FluxProgram, target: usize) -> Result<f64, DeviceError> {
        let flux = self.effective_flux(program, target)?;
        if flux.tones.is_empty() {
            return Ok(self.transmons[target].f01(flux.dc));
        }
        Ok(self.responses[target].mean_frequency_multi(flux.dc, &flux.amplitudes()))
    }

    pub fn dressed_resonator_freq(&self, target: usize, phi: f64) -> Result<f64, DeviceError> {
        self.resonators[target].dressed_freq(&self.transmons[target], phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn line(id: usize, conv: f64) -> FluxLine {
        FluxLine {
            qubit_id: id,
            dc_volts_per_phi0: conv,
            ac_volts_per_phi0: Table::constant(50.0, 500.0, conv),
            phase_offset_rad: 0.0,
        }
    }

    fn three_qubit(x: [[f64; 3]; 3]) -> Device {
        let transmons = (0..3)
            .map(|i| {
                TunableTransmon::from_spectrum(i, 4.6 + 0.1 * i as f64, -0.19, 0.5, 30.0, 20.0)
                    .unwrap()
            })
            .collect::<Vec<_>>();
        let resonators = (0..3).map(|_| Resonator::new(6.0, 0.05).unwrap()).collect();
        let lines = (0..3).map(|i| line(i, 0.8 + 0.2 * i as f64)).collect();
        let net =
            CrosstalkNetwork::new(x.iter().map(|r| r.to_vec()).collect(), BTreeMap::new()).unwrap();
        Device::new(transmons, resonators, lines, net, vec![]).unwrap()
    }

    fn tone(amp: f64, phase: f64) -> Tone {
        Tone {
            amplitude: amp,
            freq_mhz: 200.0,
            phase_rad: phase,
            duration_ns: 1000.0,
        }
    }

    #[test]
    fn collinear_tones_add() {
        let dev = three_qubit([[1.0, 0.01, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let p = FluxProgram::new(FluxUnit::Phi0)
            .with_tone(0, tone(0.3, 0.0))
            .with_tone(1, tone(0.3, 0.0));
        let f = dev.effective_flux(&p, 0).unwrap();
        assert_eq!(f.tones.len(), 1);
        assert!((f.tones[0].amp - 0.303).abs() < 1e-15);
    }

    #[test]
    fn quadrature_tones_add_in_quadrature() {
        let dev = three_qubit([[1.0, 0.01, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let p = FluxProgram::new(FluxUnit::Phi0)
            .with_tone(0, tone(0.3, 0.0))
            .with_tone(1, tone(0.3, PI / 2.0));
        let f = dev.effective_flux(&p, 0).unwrap();
        assert!((f.tones[0].amp - (0.09_f64 + 0.003 * 0.003).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_tone_matches_closed_form() {
        let x = 0.04;
        let dev = three_qubit([[1.0, x, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        for k in 0..16 {
            let theta = k as f64 * PI / 8.0;
            let (a, b) = (0.31, 0.27);
            let p = FluxProgram::new(FluxUnit::Phi0)
                .with_tone(0, tone(a, 0.0))
                .with_tone(1, tone(b, theta));
            let f = dev.effective_flux(&p, 0).unwrap();
            let exact = (a * a + x * x * b * b + 2.0 * x * a * b * theta.cos()).sqrt();
            assert!((f.tones[0].amp - exact).abs() < 1e-14);
            // small-crosstalk expansion bound
            let approx = a + x * b * theta.cos();
            assert!((exact - approx).abs() <= x * x * b * b / (2.0 * a));
        }
    }

    #[test]
    fn three_lines_match_time_domain_fit() {
        // Oracle: sample Σ X_j a_j cos(ωt + θ_j) over one period and fit a
        // single sinusoid by linear least squares.
        let x = [[1.0, -0.023, 0.041], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let dev = three_qubit(x);
        let amps = [0.21, 0.35, 0.18];
        let phases = [0.4, -1.9, 2.7];
        let mut p = FluxProgram::new(FluxUnit::Phi0);
        for j in 0..3 {
            p = p.with_tone(j, tone(amps[j], phases[j]));
        }
        let f = dev.effective_flux(&p, 0).unwrap();
        let m = 512;
        let (mut cc, mut ss) = (0.0, 0.0);
        for k in 0..m {
            let wt = 2.0 * PI * k as f64 / m as f64;
            let s: f64 = (0..3)
                .map(|j| x[0][j] * amps[j] * (wt + phases[j]).cos())
                .sum();
            cc += s * wt.cos();
            ss += s * wt.sin();
        }
        let (a, b) = (2.0 * cc / m as f64, 2.0 * ss / m as f64);
        assert!((f.tones[0].amp - a.hypot(b)).abs() < 1e-12);
        assert!((f.tones[0].phase_rad - (-b).atan2(a)).abs() < 1e-12);
    }

    #[test]
    fn distinct_frequencies_stay_distinct_and_dc_composes() {
        let dev = three_qubit([[1.0, 0.02, -0.01], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let mut t2 = tone(0.2, 0.0);
        t2.freq_mhz = 300.0;
        let p = FluxProgram::new(FluxUnit::Volts)
            .with_dc(0, 0.8 * 0.1)
            .with_dc(1, 1.0 * 0.5)
            .with_dc(2, -1.2)
            .with_tone(0, tone(0.8 * 0.3, 0.0))
            .with_tone(1, t2);
        let f = dev.effective_flux(&p, 0).unwrap();
        assert!((f.dc - (0.1 + 0.02 * 0.5 + 0.01)).abs() < 1e-15);
        assert_eq!(f.tones.len(), 2);
        assert!((f.tones[0].amp - 0.3).abs() < 1e-15);
        assert!((f.tones[1].amp - 0.02 * 0.2).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_tone_is_rejected() {
        let mut dev = three_qubit([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let mut t = tone(0.1, 0.0);
        t.freq_mhz = 20.0;
        let p = FluxProgram::new(FluxUnit::Phi0).with_tone(1, t);
        assert!(matches!(
            dev.effective_flux(&p, 0),
            Err(DeviceError::FrequencyOutOfRange { .. })
        ));
        // table narrower than the request
        let mut net = dev.network().clone();
        assert!(net
            .set_ac(
                0,
                1,
                Table::new(vec![100.0, 200.0], vec![0.0, 0.0]).unwrap()
            )
            .is_err());
        net.set_ac(
            0,
            1,
            Table::new(vec![50.0, 500.0], vec![0.01, 0.03]).unwrap(),
        )
        .unwrap();
        dev = dev.with_network(net).unwrap();
        assert!((dev.network().ac(0, 1, 275.0).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn network_rejects_bad_matrices() {
        assert!(
            CrosstalkNetwork::new(vec![vec![1.0, 0.6], vec![0.0, 1.0]], BTreeMap::new()).is_err()
        );
        assert!(
            CrosstalkNetwork::new(vec![vec![0.9, 0.0], vec![0.0, 1.0]], BTreeMap::new()).is_err()
        );
        assert!(CrosstalkNetwork::new(vec![vec![1.0, 0.0]], BTreeMap::new()).is_err());
    }

    proptest! {
        #[test]
        fn phasor_sum_is_linear(
            a in proptest::collection::vec(-0.4f64..0.4, 3),
            b in proptest::collection::vec(-0.4f64..0.4, 3),
            ph in proptest::collection::vec(-3.0f64..3.0, 3),
            x01 in -0.1f64..0.1, x02 in -0.1f64..0.1,
        ) {
            let dev = three_qubit([[1.0, x01, x02], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
            let build = |amps: &[f64]| {
                let mut p = FluxProgram::new(FluxUnit::Phi0);
                for j in 0..3 { p = p.with_tone(j, tone(amps[j], ph[j])); }
                let t = dev.effective_flux(&p, 0).unwrap().tones[0];
                num_complex::Complex64::from_polar(t.amp, t.phase_rad)
            };
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = build(&sum);
            let rhs = build(&a) + build(&b);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }
    }
}
