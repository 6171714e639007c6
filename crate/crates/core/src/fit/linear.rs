use nalgebra::{DMatrix, DVector};

use super::FitError;

/// Result of a linear least-squares fit `y ≈ A·c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl LinearFit {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }
}

fn check_sigma(sigma: &[f64]) -> Result<(), FitError> {
    if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(FitError::BadSigma);
    }
    Ok(())
}

/// Cholesky factor that also rejects numerically rank-deficient matrices.
pub(crate) fn checked_cholesky(
    m: DMatrix<f64>,
) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, FitError> {
    let scale = m.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let chol = m.cholesky().ok_or(FitError::Singular)?;
    let l = chol.l_dirty();
    if (0..l.nrows()).any(|i| !(l[(i, i)] * l[(i, i)] > 1e-14 * scale)) {
        return Err(FitError::Singular);
    }
    Ok(chol)
}

fn solve_normal(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    inv_cov: &DMatrix<f64>,
) -> Result<LinearFit, FitError> {
    let (n, k) = design.shape();
    if n < k {
        return Err(FitError::InsufficientData { needed: k, got: n });
    }
    let at_w = design.transpose() * inv_cov;
    let normal = &at_w * design;
    let chol = checked_cholesky(normal)?;
    let coef = chol.solve(&(&at_w * y));
    let covariance = chol.inverse();
    let r = y - design * &coef;
    let chi2 = (r.transpose() * inv_cov * &r)[(0, 0)];
    Ok(LinearFit {
        coef: coef.iter().copied().collect(),
        covariance,
        chi2,
        dof: n - k,
    })
}

/// Independent Gaussian errors with standard deviations `sigma`.
pub fn weighted_least_squares(
    design: &DMatrix<f64>,
    y: &[f64],
    sigma: &[f64],
) -> Result<LinearFit, FitError> {
    check_sigma(sigma)?;
    let w = DMatrix::from_diagonal(&DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|s| 1.0 / (s * s)),
    ));
    solve_normal(design, &DVector::from_column_slice(y), &w)
}

/// Correlated Gaussian errors with full covariance `cov`.
pub fn generalized_least_squares(
    design: &DMatrix<f64>,
    y: &[f64],
    cov: &DMatrix<f64>,
) -> Result<LinearFit, FitError> {
    let inv = checked_cholesky(cov.clone())?.inverse();
    solve_normal(design, &DVector::from_column_slice(y), &inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub sigma_intercept: f64,
    pub sigma_slope: f64,
    pub cov_intercept_slope: f64,
    pub chi2: f64,
}

/// Weighted straight-line fit `y = intercept + slope·x`.
pub fn fit_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit, FitError> {
    if x.len() < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            got: x.len(),
        });
    }
    let a = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let f = weighted_least_squares(&a, y, sigma)?;
    Ok(LineFit {
        intercept: f.coef[0],
        slope: f.coef[1],
        sigma_intercept: f.sigma(0),
        sigma_slope: f.sigma(1),
        cov_intercept_slope: f.covariance[(0, 1)],
        chi2: f.chi2,
    })
}

/// `y = offset + amplitude·cos(θ - phase)` with amplitude ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub sigma_offset: f64,
    pub sigma_amplitude: f64,
    pub sigma_phase: f64,
    /// Linear coefficients `p` (cos θ) and `q` (sin θ) and their covariance.
    pub cos_coef: f64,
    pub sin_coef: f64,
    pub cov_cos_sin: [[f64; 2]; 2],
    pub chi2: f64,
}

impl SinusoidFit {
    /// Signed component along `cos(θ - reference)` with its 1σ error.
    pub fn projection(&self, reference: f64) -> (f64, f64) {
        let (s, c) = reference.sin_cos();
        let v = self.cov_cos_sin;
        let var = c * c * v[0][0] + s * s * v[1][1] + 2.0 * c * s * v[0][1];
        (c * self.cos_coef + s * self.sin_coef, var.max(0.0).sqrt())
    }
}

/// Fits a unit-period sinusoid in θ as the linear model `c + p cos θ + q sin θ`.
pub fn fit_sinusoid(theta: &[f64], y: &[f64], sigma: &[f64]) -> Result<SinusoidFit, FitError> {
    if theta.len() < 4 {
        return Err(FitError::InsufficientData {
            needed: 4,
            got: theta.len(),
        });
    }
    let a = DMatrix::from_fn(theta.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => theta[i].cos(),
        _ => theta[i].sin(),
    });
    let f = weighted_least_squares(&a, y, sigma)?;
    let (p, q) = (f.coef[1], f.coef[2]);
    let amplitude = p.hypot(q);
    let c = &f.covariance;
    let (vpp, vqq, vpq) = (c[(1, 1)], c[(2, 2)], c[(1, 2)]);
    let (sigma_amplitude, sigma_phase) = if amplitude > 0.0 {
        let a2 = amplitude * amplitude;
        (
            ((p * p * vpp + q * q * vqq + 2.0 * p * q * vpq) / a2)
                .max(0.0)
                .sqrt(),
            ((q * q * vpp + p * p * vqq - 2.0 * p * q * vpq) / (a2 * a2))
                .max(0.0)
                .sqrt(),
        )
    } else {
        (0.5 * (vpp + vqq).sqrt(), std::f64::consts::PI)
    };
    Ok(SinusoidFit {
        offset: f.coef[0],
        amplitude,
        phase: q.atan2(p),
        sigma_offset: f.sigma(0),
        sigma_amplitude,
        sigma_phase,
        cos_coef: p,
        sin_coef: q,
        cov_cos_sin: [[vpp, vpq], [vpq, vqq]],
        chi2: f.chi2,
    })
}
