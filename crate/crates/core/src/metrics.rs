//! Coherence and entanglement diagnostics of two-mode density matrices.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::TwoModeDensityMatrix;
use crate::linalg::{self, CMatrix};

/// Eigenvalues of the partial transpose above `-NEGATIVITY_EPS_PER_DIM * dim`
/// are treated as solver noise.
pub const NEGATIVITY_EPS_PER_DIM: f64 = 1e-12;

/// Metrics of one density matrix at one propagation distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub x: f64,
    pub state_index: usize,
    pub coherence_power: f64,
    pub negativity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub purity: f64,
}

impl MetricRecord {
    pub fn evaluate(rho: &TwoModeDensityMatrix, x: f64, state_index: usize) -> Result<Self> {
        Ok(MetricRecord {
            x,
            state_index,
            coherence_power: coherence_power(rho),
            negativity: negativity(rho)?,
            trace_error: (rho.trace() - 1.0).norm(),
            min_eigenvalue: rho.min_eigenvalue()?,
            purity: purity(rho),
        })
    }
}

/// Sum of |rho_ij|^2 over all i != j in the flattened product basis.
pub fn coherence_power(rho: &TwoModeDensityMatrix) -> f64 {
    let m = rho.elements();
    let n = m.nrows();
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                total += m[(i, j)].norm_sqr();
            }
        }
    }
    total
}

/// Squared Frobenius norm, sum |rho_ij|^2.
pub fn frobenius_norm_sqr(rho: &TwoModeDensityMatrix) -> f64 {
    rho.elements().iter().map(|z| z.norm_sqr()).sum()
}

/// Transpose on subsystem `a`: element `(p, q; p', q')` of the result is
/// `rho(p', q; p, q')`.
pub fn partial_transpose_a(rho: &TwoModeDensityMatrix) -> CMatrix {
    let c = rho.cutoff();
    let dim = rho.dim();
    let m = rho.elements();
    CMatrix::from_fn(dim, dim, |row, col| {
        let (p, q) = c.unflatten(row);
        let (pp, qq) = c.unflatten(col);
        m[(c.flatten(pp, q), c.flatten(p, qq))]
    })
}

/// Sum of |lambda| over the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &TwoModeDensityMatrix) -> Result<f64> {
    let pt = partial_transpose_a(rho);
    let eps = NEGATIVITY_EPS_PER_DIM * rho.dim() as f64;
    let ev = linalg::hermitian_eigenvalues(&pt)?;
    Ok(ev.iter().filter(|&&l| l < -eps).fold(0.0, |acc, l| acc - l))
}

/// Eigenvalues of the partial transpose, ascending.
pub fn partial_transpose_spectrum(rho: &TwoModeDensityMatrix) -> Result<Vec<f64>> {
    linalg::hermitian_eigenvalues(&partial_transpose_a(rho))
}

/// tr(rho^2), computed as the squared Frobenius norm of the Hermitian matrix.
pub fn purity(rho: &TwoModeDensityMatrix) -> f64 {
    frobenius_norm_sqr(rho)
}
