use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::fit::{fit_least_squares, FitError, LmOptions};

/// Delay grid and drive detuning for shot-sampled Ramsey fringes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseySettings {
    pub max_delay_us: f64,
    pub points: usize,
    /// Intentional drive detuning, MHz.
    pub detuning_mhz: f64,
}

impl Default for RamseySettings {
    fn default() -> Self {
        Self {
            max_delay_us: 1.0,
            points: 41,
            detuning_mhz: 4.0,
        }
    }
}

impl RamseySettings {
    pub fn delays(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|k| self.max_delay_us * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// `P(t) = ½(1 + cos(2πδt)·e^(-t/T2))`.
pub fn fringe_probability(detuning_mhz: f64, t2_us: f64, t_us: f64) -> f64 {
    0.5 * (1.0 + (2.0 * PI * detuning_mhz * t_us).cos() * (-t_us / t2_us).exp())
}

/// Excited-state fractions from `shots` binomial draws per delay.
pub fn sample_fringe<R: Rng + ?Sized>(
    detuning_mhz: f64,
    t2_us: f64,
    delays: &[f64],
    shots: u32,
    rng: &mut R,
) -> Vec<f64> {
    delays
        .iter()
        .map(|&t| {
            let p = fringe_probability(detuning_mhz, t2_us, t).clamp(0.0, 1.0);
            let k = Binomial::new(shots as u64, p)
                .expect("probability clamped to [0, 1]")
                .sample(rng);
            k as f64 / shots as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub detuning_mhz: f64,
    pub sigma_mhz: f64,
}

/// Fits `c + A·cos(2πδt)·e^(-γt)` to measured fractions. Weights come from
/// the binomial variance of a first unweighted pass.
pub fn fit_fringe(
    delays: &[f64],
    fractions: &[f64],
    shots: u32,
    guess_detuning_mhz: f64,
    guess_t2_us: f64,
) -> Result<FringeFit, FitError> {
    let n = delays.len();
    let model = |p: &[f64], t: f64| p[0] + p[1] * (2.0 * PI * p[2] * t).cos() * (-p[3] * t).exp();
    let floor = 0.25 / shots as f64;
    let run = |sigma: &[f64], p0: &[f64]| {
        fit_least_squares(
            |p: &[f64], r: &mut [f64]| {
                for i in 0..n {
                    r[i] = (fractions[i] - model(p, delays[i])) / sigma[i];
                }
            },
            p0,
            n,
            &[0.05, 0.05, 0.2 * guess_detuning_mhz.abs().max(0.1), 0.05],
            &LmOptions::default(),
        )
    };
    let p0 = [0.5, 0.5, guess_detuning_mhz, 1.0 / guess_t2_us];
    let first = run(&vec![(0.25 / shots as f64).sqrt(); n], &p0)?;
    let sigma: Vec<f64> = delays
        .iter()
        .map(|&t| {
            let p = model(&first.params, t).clamp(0.0, 1.0);
            (p * (1.0 - p) / shots as f64)
                .max(floor / shots as f64)
                .sqrt()
        })
        .collect();
    let fit = run(&sigma, &first.params)?;
    Ok(FringeFit {
        detuning_mhz: fit.params[2].abs(),
        sigma_mhz: fit.sigma(2),
    })
}
