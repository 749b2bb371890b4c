//! Fock-basis bookkeeping: photon cutoffs, pure input states, density-matrix
//! containers and the factorial/binomial tables used by the loss formulas.
//!
//! Two-mode operators live on the product basis |p>_a |q>_b, flattened with
//! mode `a` major: `flatten(p, q) = p * (N + 1) + q`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Largest supported photon number per mode.
pub const MAX_PHOTONS: usize = 30;

/// Tolerance on the norm of freshly constructed states.
pub const STATE_NORM_TOL: f64 = 1e-12;

/// Maximum photon number `N` carried by each mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct PhotonCutoff(usize);

impl PhotonCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max > MAX_PHOTONS {
            return Err(Error::CutoffExceeded {
                requested: n_max,
                max: MAX_PHOTONS,
            });
        }
        Ok(PhotonCutoff(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    /// Number of Fock levels per mode, N + 1.
    pub fn levels(self) -> usize {
        self.0 + 1
    }

    /// Dimension of the two-mode product space, (N + 1)^2.
    pub fn two_mode_dim(self) -> usize {
        self.levels() * self.levels()
    }

    #[inline]
    pub fn flatten(self, p: usize, q: usize) -> usize {
        debug_assert!(p <= self.0 && q <= self.0);
        p * self.levels() + q
    }

    #[inline]
    pub fn unflatten(self, index: usize) -> (usize, usize) {
        (index / self.levels(), index % self.levels())
    }
}

impl TryFrom<usize> for PhotonCutoff {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        PhotonCutoff::new(n)
    }
}

impl From<PhotonCutoff> for usize {
    fn from(c: PhotonCutoff) -> usize {
        c.0
    }
}

/// Pure two-mode input state sum_{l,m} alpha_{lm} |l>_a |m>_b.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    cutoff: PhotonCutoff,
    alpha: CMatrix,
    rescaled: bool,
}

impl TwoModeState {
    /// Builds a state from an (N+1)x(N+1) coefficient grid, scaling it to unit norm.
    pub fn new(cutoff: PhotonCutoff, alpha: CMatrix) -> Result<Self> {
        let levels = cutoff.levels();
        if alpha.nrows() != levels || alpha.ncols() != levels {
            return Err(Error::DimensionMismatch {
                expected: format!("{levels}x{levels}"),
                found: format!("{}x{}", alpha.nrows(), alpha.ncols()),
            });
        }
        let norm_sqr: f64 = alpha.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr == 0.0 || !norm_sqr.is_finite() {
            return Err(Error::AllZeroAmplitudes);
        }
        let rescaled = (norm_sqr - 1.0).abs() > STATE_NORM_TOL;
        let alpha = if rescaled {
            alpha / Complex64::new(norm_sqr.sqrt(), 0.0)
        } else {
            alpha
        };
        Ok(TwoModeState {
            cutoff,
            alpha,
            rescaled,
        })
    }

    /// The N00N state (|n,0> + |0,n>)/sqrt(2) with cutoff N = n.
    pub fn noon(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_PHOTONS {
            return Err(Error::CutoffExceeded {
                requested: n,
                max: MAX_PHOTONS,
            });
        }
        let cutoff = PhotonCutoff::new(n)?;
        let mut alpha = CMatrix::zeros(n + 1, n + 1);
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        alpha[(n, 0)] = h;
        alpha[(0, n)] = h;
        Self::new(cutoff, alpha)
    }

    /// Fock product state |l>_a |m>_b.
    pub fn fock(cutoff: PhotonCutoff, l: usize, m: usize) -> Result<Self> {
        check_level(cutoff, l)?;
        check_level(cutoff, m)?;
        let mut alpha = CMatrix::zeros(cutoff.levels(), cutoff.levels());
        alpha[(l, m)] = Complex64::new(1.0, 0.0);
        Self::new(cutoff, alpha)
    }

    /// Product of two single-mode states on the same cutoff.
    pub fn product(a: &SingleModeState, b: &SingleModeState) -> Result<Self> {
        if a.cutoff != b.cutoff {
            return Err(Error::DimensionMismatch {
                expected: format!("cutoff {}", a.cutoff.n_max()),
                found: format!("cutoff {}", b.cutoff.n_max()),
            });
        }
        let alpha = &a.amplitudes * b.amplitudes.transpose();
        Self::new(a.cutoff, alpha)
    }

    pub fn cutoff(&self) -> PhotonCutoff {
        self.cutoff
    }

    pub fn alpha(&self) -> &CMatrix {
        &self.alpha
    }

    #[inline]
    pub fn amplitude(&self, l: usize, m: usize) -> Complex64 {
        self.alpha[(l, m)]
    }

    /// Whether construction had to rescale the grid by more than the tolerance.
    pub fn was_rescaled(&self) -> bool {
        self.rescaled
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitudes in the flattened product basis.
    pub fn to_vector(&self) -> DVector<Complex64> {
        let c = self.cutoff;
        DVector::from_fn(c.two_mode_dim(), |i, _| {
            let (l, m) = c.unflatten(i);
            self.alpha[(l, m)]
        })
    }

    /// The rank-one projector |psi><psi|.
    pub fn density_matrix(&self) -> TwoModeDensityMatrix {
        let v = self.to_vector();
        TwoModeDensityMatrix {
            cutoff: self.cutoff,
            elements: &v * v.adjoint(),
            asymmetry: 0.0,
        }
    }
}

/// Single-mode pure state sum_n c_n |n>.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeState {
    cutoff: PhotonCutoff,
    amplitudes: DVector<Complex64>,
}

impl SingleModeState {
    pub fn new(cutoff: PhotonCutoff, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != cutoff.levels() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} amplitudes", cutoff.levels()),
                found: format!("{} amplitudes", amplitudes.len()),
            });
        }
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::AllZeroAmplitudes);
        }
        Ok(SingleModeState {
            cutoff,
            amplitudes: amplitudes / Complex64::new(norm, 0.0),
        })
    }

    pub fn fock(cutoff: PhotonCutoff, n: usize) -> Result<Self> {
        check_level(cutoff, n)?;
        let mut amps = DVector::zeros(cutoff.levels());
        amps[n] = Complex64::new(1.0, 0.0);
        Self::new(cutoff, amps)
    }

    pub fn cutoff(&self) -> PhotonCutoff {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn density_matrix(&self) -> SingleModeDensityMatrix {
        SingleModeDensityMatrix {
            cutoff: self.cutoff,
            elements: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

fn check_level(cutoff: PhotonCutoff, n: usize) -> Result<()> {
    if n > cutoff.n_max() {
        return Err(Error::CutoffExceeded {
            requested: n,
            max: cutoff.n_max(),
        });
    }
    Ok(())
}

/// Health of a density matrix against its defining invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    pub fn holds(&self, trace_tol: f64, herm_tol: f64, psd_tol: f64) -> bool {
        self.trace_error <= trace_tol
            && self.hermiticity_defect <= herm_tol
            && self.min_eigenvalue >= -psd_tol
    }
}

/// Dense density matrix on the two-mode product Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeDensityMatrix {
    cutoff: PhotonCutoff,
    elements: CMatrix,
    asymmetry: f64,
}

impl TwoModeDensityMatrix {
    /// Wraps a raw matrix. Only the shape is checked; see [`Self::invariants`].
    pub fn from_elements(cutoff: PhotonCutoff, elements: CMatrix) -> Result<Self> {
        let d = cutoff.two_mode_dim();
        if elements.nrows() != d || elements.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", elements.nrows(), elements.ncols()),
            });
        }
        Ok(TwoModeDensityMatrix {
            cutoff,
            elements,
            asymmetry: 0.0,
        })
    }

    /// Wraps an assembled matrix after forcing exact Hermiticity, keeping the
    /// pre-symmetrization defect as a diagnostic.
    pub(crate) fn from_assembled(cutoff: PhotonCutoff, mut elements: CMatrix) -> Self {
        let asymmetry = linalg::symmetrize(&mut elements);
        TwoModeDensityMatrix {
            cutoff,
            elements,
            asymmetry,
        }
    }

    pub fn cutoff(&self) -> PhotonCutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    /// Hermiticity defect measured before symmetrization (zero if never symmetrized).
    pub fn assembly_asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Element <p, q| rho |p', q'>.
    #[inline]
    pub fn get(&self, p: usize, q: usize, pp: usize, qq: usize) -> Complex64 {
        self.elements[(self.cutoff.flatten(p, q), self.cutoff.flatten(pp, qq))]
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.elements)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.elements)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(&self.elements)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn invariants(&self) -> Result<InvariantReport> {
        Ok(InvariantReport {
            trace_error: (self.trace() - 1.0).norm(),
            hermiticity_defect: self.hermiticity_defect(),
            min_eigenvalue: self.min_eigenvalue()?,
        })
    }

    /// Expected photon numbers (<n_a>, <n_b>).
    pub fn mean_photon_numbers(&self) -> (f64, f64) {
        let c = self.cutoff;
        let mut na = 0.0;
        let mut nb = 0.0;
        for i in 0..self.dim() {
            let (p, q) = c.unflatten(i);
            let pop = self.elements[(i, i)].re;
            na += p as f64 * pop;
            nb += q as f64 * pop;
        }
        (na, nb)
    }
}

/// Dense density matrix on one truncated Fock mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeDensityMatrix {
    cutoff: PhotonCutoff,
    elements: CMatrix,
}

impl SingleModeDensityMatrix {
    pub fn from_elements(cutoff: PhotonCutoff, elements: CMatrix) -> Result<Self> {
        let d = cutoff.levels();
        if elements.nrows() != d || elements.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                found: format!("{}x{}", elements.nrows(), elements.ncols()),
            });
        }
        Ok(SingleModeDensityMatrix { cutoff, elements })
    }

    pub fn diagonal(cutoff: PhotonCutoff, populations: &[f64]) -> Result<Self> {
        if populations.len() != cutoff.levels() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} populations", cutoff.levels()),
                found: format!("{} populations", populations.len()),
            });
        }
        let mut m = CMatrix::zeros(cutoff.levels(), cutoff.levels());
        for (n, &p) in populations.iter().enumerate() {
            m[(n, n)] = Complex64::new(p, 0.0);
        }
        Ok(SingleModeDensityMatrix {
            cutoff,
            elements: m,
        })
    }

    pub fn cutoff(&self) -> PhotonCutoff {
        self.cutoff
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.elements)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn invariants(&self) -> Result<InvariantReport> {
        let ev = linalg::hermitian_eigenvalues(&self.elements)?;
        Ok(InvariantReport {
            trace_error: (self.trace() - 1.0).norm(),
            hermiticity_defect: linalg::hermiticity_defect(&self.elements),
            min_eigenvalue: ev.first().copied().unwrap_or(0.0),
        })
    }
}

/// ln n! and exact binomials up to twice the photon cutoff.
#[derive(Clone, Debug)]
pub struct CombinatoricsTable {
    log_factorials: Vec<f64>,
    binomials: Vec<Vec<u64>>,
}

impl CombinatoricsTable {
    pub fn new(cutoff: PhotonCutoff) -> Self {
        let top = 2 * cutoff.n_max();
        // n! for n <= 60 is well inside f64 range, so the running product is
        // accurate to a few ulps before taking the log.
        let mut log_factorials = Vec::with_capacity(top + 1);
        let mut fact = 1.0_f64;
        for n in 0..=top {
            if n > 0 {
                fact *= n as f64;
            }
            log_factorials.push(fact.ln());
        }
        let mut binomials: Vec<Vec<u64>> = Vec::with_capacity(top + 1);
        for n in 0..=top {
            let mut row = vec![1u64; n + 1];
            for k in 1..n {
                row[k] = binomials[n - 1][k - 1] + binomials[n - 1][k];
            }
            binomials.push(row);
        }
        CombinatoricsTable {
            log_factorials,
            binomials,
        }
    }

    pub fn max_n(&self) -> usize {
        self.log_factorials.len() - 1
    }

    #[inline]
    pub fn log_factorial(&self, n: usize) -> f64 {
        self.log_factorials[n]
    }

    pub fn log_factorials(&self) -> &[f64] {
        &self.log_factorials
    }

    /// 1/n!, with the convention that a negative argument gives zero.
    #[inline]
    pub fn inv_factorial(&self, n: i64) -> f64 {
        if n < 0 {
            0.0
        } else {
            (-self.log_factorials[n as usize]).exp()
        }
    }

    /// Exact C(n, k); zero when k > n.
    pub fn binomial(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.binomials[n][k]
        }
    }
}
