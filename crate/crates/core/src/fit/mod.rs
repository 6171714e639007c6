//! Least-squares fitting: damped Gauss-Newton with a simplex fallback for
//! nonlinear models, closed-form weighted and generalized linear fits.

mod linear;
mod nonlinear;

pub use linear::{
    fit_line, fit_sinusoid, generalized_least_squares, weighted_least_squares, LineFit, LinearFit,
    SinusoidFit,
};
pub use nonlinear::{fit_least_squares, levenberg_marquardt, nelder_mead, LmOptions, NonlinearFit};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("fit did not converge: {0}")]
    NoConvergence(String),
    #[error("normal matrix is singular")]
    Singular,
    #[error("need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-finite or non-positive uncertainty in input")]
    BadSigma,
}
