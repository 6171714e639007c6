use serde::{Deserialize, Serialize};

use super::{DeviceError, TunableTransmon};

/// Minimum |qubit - resonator| detuning, in units of `g`.
pub const DISPERSIVE_FACTOR: f64 = 10.0;

/// Readout resonator dispersively coupled to one transmon. GHz throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonator {
    pub f_bare: f64,
    pub g: f64,
}

/// Dispersive shift `χ = 2g²η / (Δ(Δ+η))`.
pub fn dispersive_shift(g: f64, detuning: f64, anharmonicity: f64) -> f64 {
    2.0 * g * g * anharmonicity / (detuning * (detuning + anharmonicity))
}

/// Dressed frequency for the qubit in its ground state, given the bare
/// parameters and the qubit frequency. No regime checks.
pub fn dressed_frequency(f_bare: f64, g: f64, f01: f64, anharmonicity: f64) -> f64 {
    let delta = f01 - f_bare;
    f_bare + g * g / delta + 0.5 * dispersive_shift(g, delta, anharmonicity)
}

impl Resonator {
    pub fn new(f_bare: f64, g: f64) -> Result<Self, DeviceError> {
        if !(f_bare > 0.0) || !(g > 0.0) {
            return Err(DeviceError::InvalidConfig(format!(
                "resonator needs positive f_bare and g (got {f_bare}, {g})"
            )));
        }
        Ok(Self { f_bare, g })
    }

    /// Solves the χ formula for `g` given a χ measured at zero flux.
    pub fn from_chi(f_bare: f64, chi: f64, qubit: &TunableTransmon) -> Result<Self, DeviceError> {
        let delta = qubit.f01_max() - f_bare;
        let eta = qubit.anharmonicity();
        let g2 = chi * delta * (delta + eta) / (2.0 * eta);
        if !(g2 > 0.0) {
            return Err(DeviceError::InvalidConfig(format!(
                "chi = {chi} GHz is incompatible with detuning {delta} GHz for qubit {}",
                qubit.id
            )));
        }
        Self::new(f_bare, g2.sqrt())
    }

    pub fn detuning(&self, qubit: &TunableTransmon, phi: f64) -> f64 {
        qubit.f01(phi) - self.f_bare
    }

    pub fn chi(&self, qubit: &TunableTransmon, phi: f64) -> f64 {
        dispersive_shift(self.g, self.detuning(qubit, phi), qubit.anharmonicity())
    }

    pub fn check_dispersive(&self, qubit: &TunableTransmon, phi: f64) -> Result<(), DeviceError> {
        let delta = self.detuning(qubit, phi);
        if delta.abs() < DISPERSIVE_FACTOR * self.g {
            return Err(DeviceError::DispersiveViolation {
                qubit: qubit.id,
                detuning: delta,
                g: self.g,
            });
        }
        Ok(())
    }

    /// Checks the dispersive condition over the whole flux period.
    pub fn check_dispersive_all(&self, qubit: &TunableTransmon) -> Result<(), DeviceError> {
        // f01 is monotone on [0, 0.5], so the closest approach is at an end
        // or where the qubit crosses the resonator.
        let (lo, hi) = (qubit.f01_min(), qubit.f01_max());
        if self.f_bare >= lo && self.f_bare <= hi {
            return Err(DeviceError::DispersiveViolation {
                qubit: qubit.id,
                detuning: 0.0,
                g: self.g,
            });
        }
        self.check_dispersive(qubit, 0.0)?;
        self.check_dispersive(qubit, 0.5)
    }

    /// Ground-state dressed resonator frequency `f_bare + g²/Δ + χ/2`.
    pub fn dressed_freq(&self, qubit: &TunableTransmon, phi: f64) -> Result<f64, DeviceError> {
        self.check_dispersive(qubit, phi)?;
        Ok(dressed_frequency(
            self.f_bare,
            self.g,
            qubit.f01(phi),
            qubit.anharmonicity(),
        ))
    }
}
