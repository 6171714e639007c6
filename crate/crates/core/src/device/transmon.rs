use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Smallest `E_J/E_C` ratio accepted as a transmon.
pub const MIN_EJ_EC_RATIO: f64 = 20.0;

/// Same spectrum as [`TunableTransmon::f01`], parameterized by sweet-spot
/// frequency, charging energy and asymmetry. Used inside fits.
pub fn f01_from_shape(f01_max: f64, ec: f64, asymmetry: f64, phi: f64) -> f64 {
    let (s, c) = (PI * phi).sin_cos();
    (f01_max + ec) * (c * c + asymmetry * asymmetry * s * s).sqrt().sqrt() - ec
}

/// Flux-tunable transmon with an asymmetric SQUID.
///
/// Energies are in GHz (E/h), coherence times in µs. The spectrum uses the
/// leading-order transmon expression `f01 = sqrt(8 E_J(Φ) E_C) - E_C` with
/// `E_J(Φ) = (E_J1 + E_J2) sqrt(cos²(πΦ) + d² sin²(πΦ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunableTransmon {
    pub id: usize,
    pub ej1: f64,
    pub ej2: f64,
    pub ec: f64,
    pub t1_us: f64,
    pub t2_us: f64,
}

impl TunableTransmon {
    pub fn new(
        id: usize,
        ej1: f64,
        ej2: f64,
        ec: f64,
        t1_us: f64,
        t2_us: f64,
    ) -> Result<Self, DeviceError> {
        let q = Self {
            id,
            ej1,
            ej2,
            ec,
            t1_us,
            t2_us,
        };
        q.validate()?;
        Ok(q)
    }

    /// Builds a transmon from its sweet-spot frequency, anharmonicity and
    /// junction asymmetry `d = (E_J1 - E_J2)/(E_J1 + E_J2)`.
    ///
    /// Under the leading-order model the inversion is closed form:
    /// `E_C = -η` and `E_JΣ = (f_max + E_C)² / (8 E_C)`.
    pub fn from_spectrum(
        id: usize,
        f01_max: f64,
        anharmonicity: f64,
        asymmetry: f64,
        t1_us: f64,
        t2_us: f64,
    ) -> Result<Self, DeviceError> {
        if !(anharmonicity < 0.0) {
            return Err(DeviceError::InvalidTransmon {
                id,
                reason: format!("anharmonicity must be negative, got {anharmonicity}"),
            });
        }
        if !(0.0..1.0).contains(&asymmetry) {
            return Err(DeviceError::InvalidTransmon {
                id,
                reason: format!("asymmetry must lie in [0, 1), got {asymmetry}"),
            });
        }
        let ec = -anharmonicity;
        let ej_sum = (f01_max + ec).powi(2) / (8.0 * ec);
        Self::new(
            id,
            0.5 * ej_sum * (1.0 + asymmetry),
            0.5 * ej_sum * (1.0 - asymmetry),
            ec,
            t1_us,
            t2_us,
        )
    }

    fn validate(&self) -> Result<(), DeviceError> {
        let fail = |reason: String| {
            Err(DeviceError::InvalidTransmon {
                id: self.id,
                reason,
            })
        };
        if !(self.ej2 > 0.0) || !(self.ej1 >= self.ej2) {
            return fail(format!(
                "junction energies must satisfy ej1 >= ej2 > 0 (ej1={}, ej2={})",
                self.ej1, self.ej2
            ));
        }
        if !(self.ec > 0.0) {
            return fail(format!("charging energy must be positive, got {}", self.ec));
        }
        let ratio = self.ej_sum() / self.ec;
        if ratio < MIN_EJ_EC_RATIO {
            return fail(format!(
                "E_J/E_C = {ratio:.2} is outside the transmon regime (>= {MIN_EJ_EC_RATIO})"
            ));
        }
        if self.f01(0.5) <= 0.0 {
            return fail(format!(
                "spectrum reaches zero at half flux (asymmetry {:.4} too small)",
                self.asymmetry()
            ));
        }
        if !(self.t1_us > 0.0) || !(self.t2_us > 0.0) {
            return fail("coherence times must be positive".to_string());
        }
        Ok(())
    }

    pub fn ej_sum(&self) -> f64 {
        self.ej1 + self.ej2
    }

    pub fn asymmetry(&self) -> f64 {
        (self.ej1 - self.ej2) / (self.ej1 + self.ej2)
    }

    /// Effective Josephson energy at flux `phi` (Φ₀).
    pub fn ej(&self, phi: f64) -> f64 {
        let (s, c) = (PI * phi).sin_cos();
        let d = self.asymmetry();
        self.ej_sum() * (c * c + d * d * s * s).sqrt()
    }

    /// Qubit frequency (GHz) at flux `phi` (Φ₀).
    pub fn f01(&self, phi: f64) -> f64 {
        (8.0 * self.ej(phi) * self.ec).sqrt() - self.ec
    }

    /// Analytic `df01/dΦ` in GHz/Φ₀.
    pub fn df01_dphi(&self, phi: f64) -> f64 {
        let (s, c) = (PI * phi).sin_cos();
        let d = self.asymmetry();
        let u = c * c + d * d * s * s;
        let a = (8.0 * self.ec * self.ej_sum()).sqrt();
        -a * PI * (1.0 - d * d) * (2.0 * PI * phi).sin() / (4.0 * u.powf(0.75))
    }

    pub fn f01_max(&self) -> f64 {
        self.f01(0.0)
    }

    pub fn f01_min(&self) -> f64 {
        self.f01(0.5)
    }

    /// Anharmonicity η = f12 - f01 (GHz); flux independent at this order.
    pub fn anharmonicity(&self) -> f64 {
        -self.ec
    }

    /// Inverts the spectrum on the branch `Φ ∈ [0, 0.5]`.
    ///
    /// Returns `None` when `freq` is outside `[f01_min, f01_max]`.
    pub fn flux_for_frequency(&self, freq: f64) -> Option<f64> {
        let (hi, lo) = (self.f01_max(), self.f01_min());
        if !(freq <= hi && freq >= lo) {
            return None;
        }
        let (mut a, mut b) = (0.0_f64, 0.5_f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.f01(m) > freq {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        Some(0.5 * (a + b))
    }

    /// Copy of this transmon with a new sweet-spot frequency and asymmetry,
    /// keeping `E_C`.
    pub fn with_shape(&self, f01_max: f64, asymmetry: f64) -> Result<Self, DeviceError> {
        Self::from_spectrum(
            self.id,
            f01_max,
            self.anharmonicity(),
            asymmetry,
            self.t1_us,
            self.t2_us,
        )
    }
}

/// Fixed-frequency transmon partner for parametric gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedQubit {
    pub id: usize,
    /// GHz
    pub f01: f64,
    /// GHz, negative
    pub anharmonicity: f64,
}
