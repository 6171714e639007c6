use nalgebra::{DMatrix, DVector};

use super::linear::checked_cholesky;
use super::FitError;

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative χ² decrease below which an accepted step counts as converged.
    pub ftol: f64,
    /// Relative parameter change below which an accepted step counts as converged.
    pub xtol: f64,
    /// Absolute finite-difference steps; empty selects `1e-6·max(|p|, 1e-3)`.
    pub jacobian_steps: Vec<f64>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-10,
            xtol: 1e-10,
            jacobian_steps: Vec::new(),
        }
    }
}

/// Result of minimizing Σ rᵢ(p)² for residuals already divided by their σ.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearFit {
    pub params: Vec<f64>,
    /// (JᵀJ)⁻¹ at the solution, i.e. absolute-σ parameter covariance.
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub n_residuals: usize,
    pub iterations: usize,
}

impl NonlinearFit {
    pub fn sigma(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }

    pub fn reduced_chi2(&self) -> f64 {
        let dof = self.n_residuals.saturating_sub(self.params.len()).max(1);
        self.chi2 / dof as f64
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, p: &[f64], n: usize, steps: &[f64], jac: &mut DMatrix<f64>)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut q = p.to_vec();
    let mut up = vec![0.0; n];
    let mut dn = vec![0.0; n];
    for j in 0..p.len() {
        let h = if steps.is_empty() {
            1e-6 * p[j].abs().max(1e-3)
        } else {
            steps[j]
        };
        q[j] = p[j] + h;
        f(&q, &mut up);
        q[j] = p[j] - h;
        f(&q, &mut dn);
        q[j] = p[j];
        for i in 0..n {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
}

fn covariance_at<F>(f: &F, p: &[f64], n: usize, steps: &[f64]) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut jac = DMatrix::zeros(n, p.len());
    jacobian(f, p, n, steps, &mut jac);
    let normal = jac.transpose() * &jac;
    checked_cholesky(normal).map(|c| c.inverse())
}

/// Levenberg-Marquardt with Marquardt diagonal scaling and central-difference
/// Jacobians. `f(p, r)` writes `n` weighted residuals into `r`.
pub fn levenberg_marquardt<F>(
    f: F,
    p0: &[f64],
    n: usize,
    opts: &LmOptions,
) -> Result<NonlinearFit, FitError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let k = p0.len();
    if n < k {
        return Err(FitError::InsufficientData { needed: k, got: n });
    }
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n];
    f(&p, &mut r);
    let mut chi2 = sum_sq(&r);
    if !chi2.is_finite() {
        return Err(FitError::NoConvergence(
            "non-finite residuals at start".into(),
        ));
    }
    let mut jac = DMatrix::zeros(n, k);
    let mut trial = vec![0.0; k];
    let mut r_trial = vec![0.0; n];
    let mut lambda = 1e-3;
    for iter in 1..=opts.max_iter {
        jacobian(&f, &p, n, &opts.jacobian_steps, &mut jac);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut m = a.clone();
            for j in 0..k {
                m[(j, j)] += lambda * a[(j, j)].max(1e-12);
            }
            let Some(step) = m.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            for j in 0..k {
                trial[j] = p[j] + step[j];
            }
            f(&trial, &mut r_trial);
            let chi2_trial = sum_sq(&r_trial);
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let rel_f = (chi2 - chi2_trial) / chi2.max(f64::MIN_POSITIVE);
                let rel_x = step
                    .iter()
                    .zip(&p)
                    .map(|(s, v)| s.abs() / (v.abs() + 1e-12))
                    .fold(0.0, f64::max);
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                chi2 = chi2_trial;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel_f < opts.ftol || rel_x < opts.xtol || chi2 == 0.0 {
                    let covariance = covariance_at(&f, &p, n, &opts.jacobian_steps)?;
                    return Ok(NonlinearFit {
                        params: p,
                        covariance,
                        chi2,
                        n_residuals: n,
                        iterations: iter,
                    });
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary point
            let covariance = covariance_at(&f, &p, n, &opts.jacobian_steps)?;
            return Ok(NonlinearFit {
                params: p,
                covariance,
                chi2,
                n_residuals: n,
                iterations: iter,
            });
        }
    }
    Err(FitError::NoConvergence(format!(
        "no convergence after {} iterations (chi2 = {chi2:.6e})",
        opts.max_iter
    )))
}

/// Nelder-Mead simplex minimizer. Returns the best vertex and its value.
pub fn nelder_mead<F>(f: F, p0: &[f64], steps: &[f64], max_iter: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let k = p0.len();
    let eval = |p: &[f64]| {
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((p0.to_vec(), eval(p0)));
    for j in 0..k {
        let mut v = p0.to_vec();
        v[j] += steps[j];
        let fv = eval(&v);
        simplex.push((v, fv));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[k].1);
        if (worst - best).abs() <= tol * (best.abs() + tol) {
            break;
        }
        let centroid: Vec<f64> = (0..k)
            .map(|j| simplex[..k].iter().map(|s| s.0[j]).sum::<f64>() / k as f64)
            .collect();
        let towards = |t: f64| -> Vec<f64> {
            (0..k)
                .map(|j| centroid[j] + t * (simplex[k].0[j] - centroid[j]))
                .collect()
        };
        let xr = towards(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = towards(-2.0);
            let fe = eval(&xe);
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
        } else {
            let xc = if fr < worst {
                towards(-0.5)
            } else {
                towards(0.5)
            };
            let fc = eval(&xc);
            if fc < fr.min(worst) {
                simplex[k] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for (v, b) in s.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    s.1 = eval(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Levenberg-Marquardt; on failure, a Nelder-Mead search on χ² followed by
/// a polishing Levenberg-Marquardt pass from the simplex optimum.
pub fn fit_least_squares<F>(
    f: F,
    p0: &[f64],
    n: usize,
    simplex_steps: &[f64],
    opts: &LmOptions,
) -> Result<NonlinearFit, FitError>
where
    F: Fn(&[f64], &mut [f64]),
{
    match levenberg_marquardt(&f, p0, n, opts) {
        Ok(fit) => Ok(fit),
        Err(FitError::InsufficientData { needed, got }) => {
            Err(FitError::InsufficientData { needed, got })
        }
        Err(_) => {
            let chi2 = |p: &[f64]| {
                let mut r = vec![0.0; n];
                f(p, &mut r);
                sum_sq(&r)
            };
            let (p, _) = nelder_mead(chi2, p0, simplex_steps, 4000 * p0.len(), 1e-14);
            levenberg_marquardt(&f, &p, n, opts)
        }
    }
}
