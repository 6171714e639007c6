use super::{CrosstalkEstimate, EstimateError, Method};
use crate::device::TunableTransmon;
use crate::fit::fit_line;
use crate::lab::ExperimentRecord;

/// How measured frequencies enter the two slope fits.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum QubitMapping {
    /// Fit frequency directly; the spectrum's curvature over the source
    /// span biases the ratio (a few percent relative at 5% crosstalk).
    #[default]
    Linear,
    /// Convert each frequency to flux through the given spectrum first,
    /// which removes the curvature bias.
    Spectrum(TunableTransmon),
}

fn mapped(
    rec: &ExperimentRecord,
    mapping: &QubitMapping,
) -> Result<(Vec<f64>, Vec<f64>), EstimateError> {
    match mapping {
        QubitMapping::Linear => Ok((rec.y.clone(), rec.y_sigma.clone())),
        QubitMapping::Spectrum(q) => {
            let mut y = Vec::with_capacity(rec.len());
            let mut s = Vec::with_capacity(rec.len());
            for (&f, &sf) in rec.y.iter().zip(&rec.y_sigma) {
                let phi = q.flux_for_frequency(f * 1e-3).ok_or_else(|| {
                    EstimateError::InvalidInput(format!(
                        "{f} MHz is outside the spectrum of qubit {}",
                        q.id
                    ))
                })?;
                y.push(phi);
                s.push(sf * 1e-3 / q.df01_dphi(phi).abs());
            }
            Ok((y, s))
        }
    }
}

/// Qubit-frequency method: ratio of the response slope to the source line
/// over the response slope to the target's own line.
///
/// `target_scan` steps the target's bias (typically about Φ₀/4);
/// `source_scan` steps the source line with the target parked.
pub fn fit_dc_qubit(
    target_scan: &ExperimentRecord,
    source_scan: &ExperimentRecord,
    mapping: &QubitMapping,
) -> Result<CrosstalkEstimate, EstimateError> {
    let to = target_scan.meta.target;
    let from = source_scan.meta.source.ok_or_else(|| {
        EstimateError::InvalidInput("source scan does not name its swept line".into())
    })?;
    if target_scan.meta.source.is_some() || source_scan.meta.target != to {
        return Err(EstimateError::InvalidInput(
            "scans must share one target; the target scan steps the target's own line".into(),
        ));
    }
    let (ya, sa) = mapped(target_scan, mapping)?;
    let (yb, sb) = mapped(source_scan, mapping)?;
    let den = fit_line(&target_scan.x, &ya, &sa)?;
    let num = fit_line(&source_scan.x, &yb, &sb)?;
    if den.slope.abs() < 10.0 * den.sigma_slope {
        return Err(EstimateError::ZeroDenominator {
            slope: den.slope,
            sigma: den.sigma_slope,
        });
    }
    let value = num.slope / den.slope;
    let sigma = ((num.sigma_slope / den.slope).powi(2)
        + (num.slope * den.sigma_slope / (den.slope * den.slope)).powi(2))
    .sqrt();
    Ok(CrosstalkEstimate {
        from_qubit: from,
        to_qubit: to,
        value,
        sigma,
        method: Method::DcQubit,
        freq_mhz: None,
    })
}
