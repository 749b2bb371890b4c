//! Small dense complex linear-algebra helpers shared by the density-matrix types.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const UNDERFLOW_GUARD: f64 = 1e-100;

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Only the lower triangle is read by the underlying solver, so callers should
/// pass a matrix that is Hermitian to working precision. Non-finite input or
/// output is reported as a solver failure.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    let dim = m.nrows();
    let failure = || Error::EigensolverFailure {
        dim,
        context: String::new(),
    };
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(failure());
    }
    if dim == 0 {
        return Ok(Vec::new());
    }
    // Entries near the underflow range make the solver's Householder norms
    // degenerate; they shift no eigenvalue by more than dim * floor.
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = scale * UNDERFLOW_GUARD;
    let mut work = m.clone();
    work.iter_mut()
        .filter(|z| z.norm() < floor)
        .for_each(|z| *z = Complex64::new(0.0, 0.0));
    let mut values: Vec<f64> = work.symmetric_eigenvalues().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(failure());
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// max |m - m^dagger| over all elements.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Replaces `m` by (m + m^dagger)/2 and returns the defect it had before.
pub fn symmetrize(m: &mut CMatrix) -> f64 {
    let defect = hermiticity_defect(m);
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    defect
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}
