use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, SMatrix};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{cz_ideal, cz_unitary, CZModel, GateError};
use crate::fit::nelder_mead;

pub type Ptm = SMatrix<f64, 16, 16>;

/// Largest accepted condition number of the preparation matrix.
pub const CONDITION_LIMIT: f64 = 1e8;

const LABELS: [&str; 4] = ["I", "X", "Y", "Z"];
const RZ_GRID: usize = 64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single_paulis() -> [Matrix2<Complex64>; 4] {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    [
        Matrix2::new(l, o, o, l),
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// Two-qubit Paulis `P_{4a+b} = σ_a ⊗ σ_b` in the order I, X, Y, Z.
pub fn pauli_basis() -> Vec<Matrix4<Complex64>> {
    let s = single_paulis();
    (0..16).map(|k| kron(&s[k / 4], &s[k % 4])).collect()
}

/// Pauli labels matching [`pauli_basis`], e.g. `"XZ"`.
pub fn pauli_labels() -> Vec<String> {
    (0..16)
        .map(|k| format!("{}{}", LABELS[k / 4], LABELS[k % 4]))
        .collect()
}

/// `R_ij = Tr(P_i U P_j U†) / 4`; `U` may be sub-unitary.
pub fn ptm_of_unitary(u: &Matrix4<Complex64>) -> Ptm {
    let basis = pauli_basis();
    let images: Vec<_> = basis.iter().map(|p| u * p * u.adjoint()).collect();
    Ptm::from_fn(|i, j| (basis[i] * images[j]).trace().re / 4.0)
}

/// `Tr(R_idealᵀ R) / 16`.
pub fn process_fidelity(ptm: &Ptm, ideal: &Ptm) -> f64 {
    ideal.component_mul(ptm).sum() / 16.0
}

fn average_fidelity(ptm: &Ptm, ideal: &Ptm) -> f64 {
    (4.0 * process_fidelity(ptm, ideal) + 1.0) / 5.0
}

/// Tomography settings. Both imperfections are off by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QptOptions {
    /// Depolarizing probability applied to each prepared qubit.
    pub prep_error: f64,
    /// Shots per expectation value; `None` gives exact expectations.
    pub shots: Option<u32>,
    pub seed: u64,
}

impl Default for QptOptions {
    fn default() -> Self {
        Self {
            prep_error: 0.0,
            shots: None,
            seed: 0,
        }
    }
}

/// Reconstructed two-qubit process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessTomogram {
    pub ptm: Ptm,
    /// Mean population lost from the logical subspace.
    pub leakage: f64,
    pub process_fidelity: f64,
    pub avg_fidelity: f64,
}

/// JSON form of a tomogram: row-major PTM plus summary numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomogramDocument {
    pub basis: Vec<String>,
    pub ptm: Vec<Vec<f64>>,
    pub leakage: f64,
    pub process_fidelity: f64,
    pub avg_fidelity: f64,
}

impl ProcessTomogram {
    fn from_ptm(ptm: Ptm) -> Self {
        let ideal = ptm_of_unitary(&cz_ideal());
        Self {
            leakage: 1.0 - ptm[(0, 0)],
            process_fidelity: process_fidelity(&ptm, &ideal),
            avg_fidelity: average_fidelity(&ptm, &ideal),
            ptm,
        }
    }

    pub fn document(&self) -> TomogramDocument {
        TomogramDocument {
            basis: pauli_labels(),
            ptm: (0..16)
                .map(|i| (0..16).map(|j| self.ptm[(i, j)]).collect())
                .collect(),
            leakage: self.leakage,
            process_fidelity: self.process_fidelity,
            avg_fidelity: self.avg_fidelity,
        }
    }
}

/// Pauli vectors `Tr(P_j ρ)` of the 16 product preparations drawn from
/// `|0>, |1>, |+>, |+i>`, one column each. `shrink` scales the Bloch part.
fn preparation_matrix(shrink: f64) -> Ptm {
    let bloch = [
        [1.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, -1.0],
        [1.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
    ];
    let v = |s: usize, a: usize| if a == 0 { 1.0 } else { shrink * bloch[s][a] };
    Ptm::from_fn(|j, k| v(k / 4, j / 4) * v(k % 4, j % 4))
}

fn condition_number(m: &Ptm) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Simulated process tomography of the logical-subspace propagator.
///
/// Expectations of all 16 Paulis are taken after each of the 16
/// preparations, optionally with depolarized preparation and shot noise,
/// and inverted linearly against the nominal preparations.
pub fn simulate_qpt(model: &CZModel, opts: &QptOptions) -> Result<ProcessTomogram, GateError> {
    if !(0.0..1.0).contains(&opts.prep_error) {
        return Err(GateError::InvalidInput(format!(
            "prep_error must lie in [0, 1), got {}",
            opts.prep_error
        )));
    }
    let truth = ptm_of_unitary(&cz_unitary(model));
    let nominal = preparation_matrix(1.0);
    let cond = condition_number(&nominal);
    if cond > CONDITION_LIMIT {
        return Err(GateError::ReconstructionIllConditioned { cond });
    }
    let mut measured = truth * preparation_matrix(1.0 - opts.prep_error);
    if let Some(shots) = opts.shots {
        if shots == 0 {
            return Err(GateError::InvalidInput("shots must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for k in 0..16 {
            for i in 1..16 {
                let m = measured[(i, k)];
                let sigma = ((1.0 - m * m).max(0.0) / shots as f64).sqrt();
                if sigma > 0.0 {
                    let noise = Normal::new(0.0, sigma).expect("finite σ");
                    measured[(i, k)] = m + noise.sample(&mut rng);
                }
            }
        }
    }
    let inverse = nominal
        .try_inverse()
        .ok_or(GateError::ReconstructionIllConditioned {
            cond: f64::INFINITY,
        })?;
    Ok(ProcessTomogram::from_ptm(measured * inverse))
}

fn rz_single(theta: f64) -> [[f64; 4]; 4] {
    let (s, co) = theta.sin_cos();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, co, -s, 0.0],
        [0.0, s, co, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// PTM of `RZ(α) ⊗ RZ(β)`.
fn rz_ptm(alpha: f64, beta: f64) -> Ptm {
    let (a, b) = (rz_single(alpha), rz_single(beta));
    Ptm::from_fn(|i, j| a[i / 4][j / 4] * b[i % 4][j % 4])
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Best local Z frame correction `RZ(α) ⊗ RZ(β)` applied after a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RzCorrection {
    /// Rotation on the fixed qubit, rad in (-π, π].
    pub alpha: f64,
    /// Rotation on the tunable qubit, rad in (-π, π].
    pub beta: f64,
    pub fidelity_before: f64,
    pub corrected_fidelity: f64,
}

/// Maximizes average CZ fidelity over post-rotations: a 64×64 grid, then a
/// simplex polish from the best grid point.
pub fn optimize_rz_correction(ptm: &Ptm) -> RzCorrection {
    let ideal = ptm_of_unitary(&cz_ideal());
    let target = ideal.transpose();
    // F(α, β) is linear in the rotated PTM, so fold the ideal in once
    let folded = ptm * target;
    let fid = |a: f64, b: f64| (4.0 * (rz_ptm(a, b) * folded).trace() / 16.0 + 1.0) / 5.0;
    let step = 2.0 * PI / RZ_GRID as f64;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..RZ_GRID {
        for j in 0..RZ_GRID {
            let (a, b) = (-PI + i as f64 * step, -PI + j as f64 * step);
            let f = fid(a, b);
            if f > best.2 {
                best = (a, b, f);
            }
        }
    }
    let (p, neg) = nelder_mead(
        |p| -fid(p[0], p[1]),
        &[best.0, best.1],
        &[0.5 * step, 0.5 * step],
        2000,
        1e-14,
    );
    let (alpha, beta, corrected) = if -neg >= best.2 {
        (p[0], p[1], -neg)
    } else {
        best
    };
    RzCorrection {
        alpha: wrap(alpha),
        beta: wrap(beta),
        fidelity_before: average_fidelity(ptm, &ideal),
        corrected_fidelity: corrected,
    }
}
