//! Time-averaged transmon response to sinusoidal flux modulation.
//!
//! The spectrum is expanded as `f01(Φ) = ν₀ + Σₙ νₙ cos(2πnΦ)`. Averaging
//! over a tone of amplitude Φ̃ about a DC bias Φ̄ keeps only the Bessel
//! weighted cosine part:
//!
//! ```text
//! f̄01(Φ̄, Φ̃) = ν₀ + Σₙ νₙ cos(2πnΦ̄) J₀(2πnΦ̃)
//! ```
//!
//! and at zero bias the mean shift from the parking frequency is
//! `Δ̄(Φ̃) = Σₙ [J₀(2πnΦ̃) - 1] νₙ`. Several incommensurate tones multiply
//! their J₀ factors.

pub mod bessel;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::device::TunableTransmon;
use bessel::{j0, j0_second_derivative, j1};

pub const DEFAULT_HARMONICS: usize = 50;
pub const MIN_HARMONICS: usize = 8;
/// Flux samples per period used for the cosine projection.
pub const PROJECTION_SAMPLES: usize = 4096;
/// Upper end of the default sweet-spot search (Φ₀).
pub const DEFAULT_SWEET_SPOT_LIMIT: f64 = 0.75;

const SCAN_POINTS: usize = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("at least {MIN_HARMONICS} harmonics are required, got {0}")]
    TooFewHarmonics(usize),
    #[error("mean frequency has no interior minimum on (0, {upper}] Φ0")]
    NoInteriorMinimum { upper: f64 },
}

impl DynamicsError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TooFewHarmonics(_) => "TooFewHarmonics",
            Self::NoInteriorMinimum { .. } => "NoInteriorMinimum",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeCurvature {
    /// d f̄01 / dΦ̃ in GHz/Φ₀.
    pub slope: f64,
    /// d² f̄01 / dΦ̃² in GHz/Φ₀².
    pub curvature: f64,
}

/// Fourier-cosine description of a qubit spectrum and its modulated mean.
#[derive(Debug, Clone, Serialize)]
pub struct ModulationResponse {
    nu0: f64,
    nu: Vec<f64>,
    #[serde(skip)]
    sweet_spot: OnceLock<Option<f64>>,
}

impl PartialEq for ModulationResponse {
    fn eq(&self, other: &Self) -> bool {
        self.nu0 == other.nu0 && self.nu == other.nu
    }
}

/// Cosine-projection coefficients of a transmon spectrum.
pub fn fourier_coefficients(
    transmon: &TunableTransmon,
    n_harmonics: usize,
) -> Result<ModulationResponse, DynamicsError> {
    ModulationResponse::from_spectrum(|phi| transmon.f01(phi), n_harmonics)
}

impl ModulationResponse {
    /// Projects an even, Φ₀-periodic spectrum onto `n_harmonics` cosines.
    pub fn from_spectrum(
        spectrum: impl Fn(f64) -> f64,
        n_harmonics: usize,
    ) -> Result<Self, DynamicsError> {
        if n_harmonics < MIN_HARMONICS {
            return Err(DynamicsError::TooFewHarmonics(n_harmonics));
        }
        let m = PROJECTION_SAMPLES;
        let samples: Vec<f64> = (0..m).map(|k| spectrum(k as f64 / m as f64)).collect();
        let cos_table: Vec<f64> = (0..m)
            .map(|k| (2.0 * PI * k as f64 / m as f64).cos())
            .collect();
        let nu0 = samples.iter().sum::<f64>() / m as f64;
        let nu = (1..=n_harmonics)
            .map(|n| {
                let s: f64 = samples
                    .iter()
                    .enumerate()
                    .map(|(k, f)| f * cos_table[(n * k) % m])
                    .sum();
                2.0 * s / m as f64
            })
            .collect();
        Ok(Self {
            nu0,
            nu,
            sweet_spot: OnceLock::new(),
        })
    }

    pub(crate) fn for_transmon(transmon: &TunableTransmon, n_harmonics: usize) -> Self {
        fourier_coefficients(transmon, n_harmonics.max(MIN_HARMONICS))
            .expect("harmonic count clamped above the minimum")
    }

    pub fn nu0(&self) -> f64 {
        self.nu0
    }

    /// ν₁..ν_N.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn n_harmonics(&self) -> usize {
        self.nu.len()
    }

    /// Frequency at zero flux, ν₀ + Σν.
    pub fn parking_frequency(&self) -> f64 {
        self.nu0 + self.nu.iter().sum::<f64>()
    }

    pub fn reconstruct(&self, phi: f64) -> f64 {
        self.nu0
            + self
                .nu
                .iter()
                .enumerate()
                .map(|(i, v)| v * (2.0 * PI * (i + 1) as f64 * phi).cos())
                .sum::<f64>()
    }

    /// Mean frequency under one tone of amplitude `amp` about `bias`.
    pub fn mean_frequency(&self, bias: f64, amp: f64) -> f64 {
        self.mean_frequency_multi(bias, &[amp])
    }

    /// Mean frequency under several tones at distinct frequencies.
    pub fn mean_frequency_multi(&self, bias: f64, amps: &[f64]) -> f64 {
        let mut f = self.nu0;
        for (i, v) in self.nu.iter().enumerate() {
            let n = (i + 1) as f64;
            let mut w = (2.0 * PI * n * bias).cos();
            for a in amps {
                w *= j0(2.0 * PI * n * a);
            }
            f += v * w;
        }
        f
    }

    /// Δ̄(Φ̃) = Σ [J₀(2πnΦ̃) - 1] νₙ, GHz.
    pub fn mean_detuning(&self, amp: f64) -> f64 {
        self.nu
            .iter()
            .enumerate()
            .map(|(i, v)| (j0(2.0 * PI * (i + 1) as f64 * amp) - 1.0) * v)
            .sum()
    }

    /// Mean frequency relative to the zero-flux parking frequency.
    pub fn mean_detuning_at(&self, bias: f64, amps: &[f64]) -> f64 {
        self.mean_frequency_multi(bias, amps) - self.parking_frequency()
    }

    /// Analytic derivatives of the zero-bias mean frequency in Φ̃.
    pub fn slope_and_curvature(&self, amp: f64) -> SlopeCurvature {
        let (mut slope, mut curvature) = (0.0, 0.0);
        for (i, v) in self.nu.iter().enumerate() {
            let k = 2.0 * PI * (i + 1) as f64;
            let x = k * amp;
            slope -= v * k * j1(x);
            curvature += v * k * k * j0_second_derivative(x);
        }
        SlopeCurvature { slope, curvature }
    }

    pub fn slope(&self, amp: f64) -> f64 {
        self.slope_and_curvature(amp).slope
    }

    /// AC sweet spot: interior minimum of f̄01 over `(0, upper]`.
    pub fn find_sweet_spot(&self, upper: f64) -> Result<f64, DynamicsError> {
        let err = DynamicsError::NoInteriorMinimum { upper };
        if !(upper > 0.0) {
            return Err(err);
        }
        let step = upper / SCAN_POINTS as f64;
        let mut best = (0usize, f64::INFINITY);
        for k in 1..=SCAN_POINTS {
            let v = self.mean_detuning(k as f64 * step);
            if v < best.1 {
                best = (k, v);
            }
        }
        let k = best.0;
        if k == SCAN_POINTS {
            return Err(err);
        }
        // slope < 0 left of the minimum, > 0 right of it
        let (mut a, mut b) = ((k - 1) as f64 * step, (k + 1) as f64 * step);
        if self.slope(a) > 0.0 || self.slope(b) < 0.0 {
            return Err(err);
        }
        while b - a > 1e-13 {
            let m = 0.5 * (a + b);
            if self.slope(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let x = 0.5 * (a + b);
        if x <= step * 0.5 {
            return Err(err);
        }
        Ok(x)
    }

    /// Sweet spot on the default search interval, computed once.
    pub fn sweet_spot_amp(&self) -> Option<f64> {
        *self
            .sweet_spot
            .get_or_init(|| self.find_sweet_spot(DEFAULT_SWEET_SPOT_LIMIT).ok())
    }

    /// Amplitude of steepest descent of f̄01 below the sweet spot.
    pub fn max_slope_amp(&self) -> Option<f64> {
        let ss = self.sweet_spot_amp()?;
        // golden-section on the (unimodal) slope over (0, ss)
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, ss);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while b - a > 1e-9 {
            if self.slope(c) < self.slope(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        Some(0.5 * (a + b))
    }
}

/// Flux sensitivity δΦ = δf / |df/dΦ| (both in the same frequency unit).
pub fn flux_sensitivity(freq_sigma: f64, slope: f64) -> f64 {
    freq_sigma / slope.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q0() -> TunableTransmon {
        TunableTransmon::from_spectrum(0, 4.678, -0.186, 0.5, 30.0, 20.0).unwrap()
    }

    /// (1/2π)∫ f01(Φ̄ + Φ̃ cos θ) dθ with the periodic trapezoid rule.
    fn time_average(q: &TunableTransmon, bias: f64, amp: f64, m: usize) -> f64 {
        (0..m)
            .map(|k| q.f01(bias + amp * (2.0 * PI * k as f64 / m as f64).cos()))
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn single_harmonic_surrogate() {
        let r = ModulationResponse::from_spectrum(|p| (2.0 * PI * p).cos(), 12).unwrap();
        assert!((r.nu()[0] - 1.0).abs() < 1e-12);
        assert!(r.nu()[1..].iter().all(|v| v.abs() < 1e-12));
        assert!(r.nu0().abs() < 1e-12);
        // first minimum of J0(2πΦ̃): 2πΦ̃ = 3.8317059702
        let ss = r.find_sweet_spot(0.75).unwrap();
        assert!((ss - 3.831_705_970_207_512 / (2.0 * PI)).abs() < 1e-9);
        assert!((ss - 0.6098).abs() < 1e-4);
        assert!(r.slope(ss).abs() < 1e-6);
        // the default interval of the transmon search misses it at 0.6
        assert!(r.find_sweet_spot(0.6).is_err());
    }

    #[test]
    fn too_few_harmonics() {
        assert_eq!(
            fourier_coefficients(&q0(), 4).unwrap_err(),
            DynamicsError::TooFewHarmonics(4)
        );
    }

    #[test]
    fn reconstruction_within_one_khz() {
        let r = fourier_coefficients(&q0(), 50).unwrap();
        for k in 0..2000 {
            let phi = k as f64 / 2000.0;
            assert!((r.reconstruct(phi) - q0().f01(phi)).abs() < 1e-6);
        }
        assert!((r.parking_frequency() - q0().f01(0.0)).abs() < 1e-9);
    }

    #[test]
    fn coefficients_decay_beyond_second_harmonic() {
        // direct projection oracle on an independent grid
        let q = q0();
        let r = fourier_coefficients(&q, 20).unwrap();
        let m = 10_000;
        for n in 1..=20 {
            let direct: f64 = (0..m)
                .map(|k| {
                    let p = k as f64 / m as f64;
                    q.f01(p) * (2.0 * PI * n as f64 * p).cos()
                })
                .sum::<f64>()
                * 2.0
                / m as f64;
            assert!((direct - r.nu()[n - 1]).abs() < 1e-12);
        }
        for n in 2..19 {
            assert!(r.nu()[n].abs() < r.nu()[n - 1].abs(), "n={n}");
        }
    }

    #[test]
    fn mean_detuning_matches_time_average() {
        let q = q0();
        let r = fourier_coefficients(&q, 50).unwrap();
        assert_eq!(r.mean_detuning(0.0), 0.0);
        for &amp in &[0.05, 0.2, 0.35, 0.5] {
            let oracle = time_average(&q, 0.0, amp, 10_000) - q.f01(0.0);
            let got = r.mean_detuning(amp);
            assert!((got - oracle).abs() <= 1e-6 * oracle.abs(), "amp {amp}");
            assert!(got <= 0.0);
        }
    }

    #[test]
    fn biased_mean_matches_time_average() {
        let q = q0();
        let r = fourier_coefficients(&q, 50).unwrap();
        for &(bias, amp) in &[(0.03, 0.3), (-0.1, 0.2), (0.25, 0.05)] {
            let oracle = time_average(&q, bias, amp, 10_000);
            assert!((r.mean_frequency(bias, amp) - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_and_curvature_match_finite_differences() {
        let r = fourier_coefficients(&q0(), 50).unwrap();
        assert_eq!(r.slope(0.0), 0.0);
        let f = |a: f64| r.mean_detuning(a);
        let h = 1e-4;
        for &amp in &[0.07, 0.21, 0.33, 0.47, 0.58] {
            let fd1 = (-f(amp + 2.0 * h) + 8.0 * f(amp + h) - 8.0 * f(amp - h) + f(amp - 2.0 * h))
                / (12.0 * h);
            let fd2 = (-f(amp + 2.0 * h) + 16.0 * f(amp + h) - 30.0 * f(amp) + 16.0 * f(amp - h)
                - f(amp - 2.0 * h))
                / (12.0 * h * h);
            let sc = r.slope_and_curvature(amp);
            assert!((sc.slope - fd1).abs() <= 1e-4 * sc.slope.abs().max(1e-3));
            assert!((sc.curvature - fd2).abs() <= 1e-4 * sc.curvature.abs().max(1.0));
        }
    }

    #[test]
    fn sweet_spot_matches_grid_scan() {
        let r = fourier_coefficients(&q0(), 50).unwrap();
        let ss = r.sweet_spot_amp().unwrap();
        let n = 100_000;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for k in 1..=n {
            let a = 0.75 * k as f64 / n as f64;
            let v = r.mean_detuning(a);
            if v < best {
                best = v;
                arg = a;
            }
        }
        assert!((ss - arg).abs() < 1e-5);
        assert!(r.slope(ss).abs() < 1e-6);
        assert!(ss < 0.6);
    }

    #[test]
    fn mean_detuning_shape_decreases_then_increases() {
        let r = fourier_coefficients(&q0(), 50).unwrap();
        let ss = r.sweet_spot_amp().unwrap();
        let grid: Vec<f64> = (0..=60).map(|k| 0.0125 * k as f64).collect();
        for w in grid.windows(2) {
            let (a, b) = (r.mean_detuning(w[0]), r.mean_detuning(w[1]));
            if w[1] < ss {
                assert!(b < a);
            } else if w[0] > ss {
                assert!(b > a);
            }
        }
    }

    #[test]
    fn truncation_error_shrinks_with_harmonics() {
        let q = TunableTransmon::from_spectrum(0, 4.8, -0.2, 0.3, 30.0, 20.0).unwrap();
        let amp = 0.41;
        let v = |n| fourier_coefficients(&q, n).unwrap().mean_detuning(amp);
        let mut prev = f64::INFINITY;
        for n in [8, 12, 16, 24] {
            let diff = (v(n) - v(2 * n)).abs();
            assert!(diff < prev, "n={n}");
            prev = diff;
        }
    }

    #[test]
    fn sensitivity_propagation() {
        assert!((flux_sensitivity(0.01, 2000.0) - 5e-6).abs() < 1e-18);
        assert!((flux_sensitivity(0.05, -900.0) - 5.5556e-5).abs() < 1e-8);
    }
}
