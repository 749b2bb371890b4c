//! Discrete model of a lossy medium as a chain of `M` identical beam splitters.
//!
//! Each splitter transmits the signal mode with amplitude `T` and scatters it
//! into a fresh vacuum port with amplitude `L`. Tracing out the scatter ports
//! after every splitter gives a Kraus channel on the signal mode; iterating it
//! `M` times reproduces the finite chain. With `|L|^2 = mu x / M` and
//! `arg T = eta x / M` the chain approaches the continuum channel as `M` grows.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    CombinatoricsTable, PhotonCutoff, SingleModeDensityMatrix, TwoModeDensityMatrix, TwoModeState,
};
use crate::linalg::CMatrix;

const UNITARITY_TOL: f64 = 1e-12;

/// `M` identical splitters with transmission `T` and reflection `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitterChain {
    m_count: usize,
    transmission: Complex64,
    reflection: Complex64,
}

impl SplitterChain {
    /// Checks `|L|^2 + |T|^2 = 1` and `L conj(T) + T conj(L) = 0`.
    pub fn new(m_count: usize, transmission: Complex64, reflection: Complex64) -> Result<Self> {
        if m_count == 0 {
            return Err(Error::InvalidChain("need at least one splitter".into()));
        }
        let power = transmission.norm_sqr() + reflection.norm_sqr();
        if (power - 1.0).abs() > UNITARITY_TOL {
            return Err(Error::InvalidChain(format!(
                "|L|^2 + |T|^2 = {power}, expected 1"
            )));
        }
        let cross = reflection * transmission.conj() + transmission * reflection.conj();
        if cross.norm() > UNITARITY_TOL {
            return Err(Error::InvalidChain(format!(
                "L conj(T) + T conj(L) = {cross}, expected 0"
            )));
        }
        Ok(SplitterChain {
            m_count,
            transmission,
            reflection,
        })
    }

    /// Chain losing `loss_fraction` of the power at each splitter and rotating
    /// the signal phase by `phase`. Uses `T = |T| e^{i phase}`, `L = i |L| e^{i phase}`.
    pub fn with_loss(m: usize, loss_fraction: f64, phase: f64) -> Result<Self> {
        if !(loss_fraction > 0.0 && loss_fraction < 1.0) {
            return Err(Error::InvalidLossFraction(loss_fraction));
        }
        let t = Complex64::from_polar((1.0 - loss_fraction).sqrt(), phase);
        Self::new(m, t, reflection_for(t))
    }

    /// Chain discretizing a homogeneous medium of extinction `mu` and phase
    /// rotation `eta` over length `x`.
    pub fn for_medium(m: usize, mu: f64, eta: f64, x: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidChain("need at least one splitter".into()));
        }
        Self::with_loss(m, mu * x / m as f64, eta * x / m as f64)
    }

    pub fn m_count(&self) -> usize {
        self.m_count
    }

    pub fn transmission(&self) -> Complex64 {
        self.transmission
    }

    pub fn reflection(&self) -> Complex64 {
        self.reflection
    }

    /// Probability that one photon survives the whole chain, `|T|^{2M}`.
    pub fn survival(&self) -> f64 {
        (self.m_count as f64 * self.transmission.norm_sqr().ln()).exp()
    }

    /// 1 - |T|^{2M}, without cancellation at small loss.
    pub fn loss(&self) -> f64 {
        -(self.m_count as f64 * (-self.reflection.norm_sqr()).ln_1p()).exp_m1()
    }

    pub fn kraus(&self, cutoff: PhotonCutoff) -> KrausChannel {
        KrausChannel::single_splitter_with(cutoff, self.transmission, self.reflection)
    }
}

fn reflection_for(t: Complex64) -> Complex64 {
    let r = (1.0 - t.norm_sqr()).max(0.0).sqrt();
    let phase = if t.norm() > 0.0 { t.arg() } else { 0.0 };
    Complex64::new(0.0, 1.0) * Complex64::from_polar(r, phase)
}

/// Mode transformation of the whole chain: row 0 expresses the input creation
/// operator in terms of the output mode and the `M` scatter modes.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    u: CMatrix,
}

impl TransferMatrix {
    pub fn build(chain: &SplitterChain) -> Self {
        let m = chain.m_count;
        let t = chain.transmission;
        let l = chain.reflection;
        let tp = |k: usize| t.powi(k as i32);
        let mut u = CMatrix::zeros(m + 1, m + 1);
        u[(0, 0)] = tp(m);
        for j in 1..=m {
            u[(0, j)] = l * tp(j - 1);
        }
        for i in 1..=m {
            u[(i, 0)] = l * tp(m - i);
            u[(i, i)] = t;
            for j in (i + 1)..=m {
                u[(i, j)] = l * l * tp(j - i - 1);
            }
        }
        TransferMatrix { u }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    /// max |U^dagger U - I|.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.u.adjoint() * &self.u;
        let n = g.nrows();
        g.iter()
            .enumerate()
            .map(|(k, z)| {
                let (i, j) = (k % n, k / n);
                let target = if i == j { 1.0 } else { 0.0 };
                (z - target).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Operator-sum form of one splitter acting on a truncated mode, with the
/// scatter port traced out. `A_k` removes `k` photons.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    cutoff: PhotonCutoff,
    operators: Vec<CMatrix>,
}

impl KrausChannel {
    /// Splitter with transmission `t` (|t| <= 1) and reflection fixed by the
    /// chain's phase convention.
    pub fn single_splitter(cutoff: PhotonCutoff, t: Complex64) -> Result<Self> {
        if t.norm().is_nan() || t.norm() > 1.0 + UNITARITY_TOL {
            return Err(Error::InvalidChain(format!("|T| = {} exceeds 1", t.norm())));
        }
        Ok(Self::single_splitter_with(cutoff, t, reflection_for(t)))
    }

    fn single_splitter_with(cutoff: PhotonCutoff, t: Complex64, l: Complex64) -> Self {
        let table = CombinatoricsTable::new(cutoff);
        let levels = cutoff.levels();
        let operators = (0..levels)
            .map(|k| {
                let mut a = CMatrix::zeros(levels, levels);
                for n in k..levels {
                    let amp = (table.binomial(n, k) as f64).sqrt();
                    a[(n - k, n)] = t.powi((n - k) as i32) * l.powi(k as i32) * amp;
                }
                a
            })
            .collect();
        KrausChannel { cutoff, operators }
    }

    pub fn cutoff(&self) -> PhotonCutoff {
        self.cutoff
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// max |sum_k A_k^dagger A_k - I|.
    pub fn completeness_defect(&self) -> f64 {
        let levels = self.cutoff.levels();
        let mut sum = CMatrix::zeros(levels, levels);
        for a in &self.operators {
            sum += a.adjoint() * a;
        }
        (sum - DMatrix::<Complex64>::identity(levels, levels))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// rho -> sum_k A_k rho A_k^dagger
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let levels = self.cutoff.levels();
        let mut out = CMatrix::zeros(levels, levels);
        for a in &self.operators {
            out += a * rho * a.adjoint();
        }
        out
    }

    /// Applies the channel to mode `a` (`on_a = true`) or mode `b` of a
    /// two-mode matrix, i.e. with operators `A_k (x) I` or `I (x) A_k`.
    /// `A_k` only has entries `(n - k, n)`, so each output element gathers
    /// one input element per `k`.
    fn apply_two_mode(&self, rho: &CMatrix, on_a: bool) -> CMatrix {
        let c = self.cutoff;
        let levels = c.levels();
        let dim = c.two_mode_dim();
        let split = |i: usize| {
            let (p, q) = c.unflatten(i);
            if on_a {
                (p, q)
            } else {
                (q, p)
            }
        };
        let join = |acted: usize, spectator: usize| {
            if on_a {
                c.flatten(acted, spectator)
            } else {
                c.flatten(spectator, acted)
            }
        };
        CMatrix::from_fn(dim, dim, |row, col| {
            let (p, s) = split(row);
            let (pp, ss) = split(col);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, a) in self.operators.iter().enumerate() {
                let (r, rr) = (p + k, pp + k);
                if r >= levels || rr >= levels {
                    break;
                }
                acc += a[(p, r)] * rho[(join(r, s), join(rr, ss))] * a[(pp, rr)].conj();
            }
            acc
        })
    }
}

/// Applies `channel` to `rho` `times` times.
pub fn iterate_channel(
    rho: &SingleModeDensityMatrix,
    channel: &KrausChannel,
    times: usize,
) -> Result<SingleModeDensityMatrix> {
    if rho.cutoff() != channel.cutoff() {
        return Err(Error::DimensionMismatch {
            expected: format!("cutoff {}", channel.cutoff().n_max()),
            found: format!("cutoff {}", rho.cutoff().n_max()),
        });
    }
    let mut m = rho.elements().clone();
    for _ in 0..times {
        m = channel.apply(&m);
    }
    SingleModeDensityMatrix::from_elements(rho.cutoff(), m)
}

/// Output of the Fock input |n> after the finite chain, from the closed-form
/// population law: binomial thinning at survival `|T|^{2M}`.
pub fn finite_m_single_mode_output(
    cutoff: PhotonCutoff,
    n: usize,
    chain: &SplitterChain,
) -> Result<SingleModeDensityMatrix> {
    if n > cutoff.n_max() {
        return Err(Error::CutoffExceeded {
            requested: n,
            max: cutoff.n_max(),
        });
    }
    let table = CombinatoricsTable::new(cutoff);
    let kept = chain.survival();
    // |L|^2 sum_{i=1}^{M} |T|^{2(i-1)} = 1 - |T|^{2M}
    let scattered = chain.loss();
    let mut pops = vec![0.0; cutoff.levels()];
    for (k, pop) in pops.iter_mut().enumerate().take(n + 1) {
        *pop = table.binomial(n, k) as f64 * kept.powi(k as i32) * scattered.powi((n - k) as i32);
    }
    SingleModeDensityMatrix::diagonal(cutoff, &pops)
}

/// Largest photon number and chain length the literal enumeration accepts.
pub const ENUMERATION_MAX_PHOTONS: usize = 4;
pub const ENUMERATION_MAX_SPLITTERS: usize = 8;

/// Output populations of |n> by enumerating every way of distributing the `n`
/// photons over the output mode and the `M` scatter modes, each weighted by
/// its multinomial count and per-photon probabilities `|T|^{2M}` (output) or
/// `|L|^2 |T|^{2(i-1)}` (scatter port `i`).
pub fn enumerated_single_mode_populations(n: usize, chain: &SplitterChain) -> Result<Vec<f64>> {
    let m = chain.m_count;
    if n > ENUMERATION_MAX_PHOTONS || m > ENUMERATION_MAX_SPLITTERS {
        return Err(Error::InvalidChain(format!(
            "enumeration limited to n <= {ENUMERATION_MAX_PHOTONS}, M <= {ENUMERATION_MAX_SPLITTERS}"
        )));
    }
    let t2 = chain.transmission.norm_sqr();
    let l2 = chain.reflection.norm_sqr();
    let fact = |k: usize| (1..=k).product::<usize>() as f64;

    let mut pops = vec![0.0; n + 1];
    let mut counts = vec![0usize; m + 1];
    fn compositions(
        slot: usize,
        remaining: usize,
        counts: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if slot + 1 == counts.len() {
            counts[slot] = remaining;
            visit(counts);
            return;
        }
        for k in 0..=remaining {
            counts[slot] = k;
            compositions(slot + 1, remaining - k, counts, visit);
        }
    }
    compositions(0, n, &mut counts, &mut |c: &[usize]| {
        let n0 = c[0];
        let mut weight = fact(n) / c.iter().map(|&k| fact(k)).product::<f64>();
        weight *= t2.powi((n0 * m) as i32);
        let lag: usize = c[1..].iter().enumerate().map(|(i, &k)| i * k).sum();
        let scattered: usize = c[1..].iter().sum();
        weight *= t2.powi(lag as i32) * l2.powi(scattered as i32);
        pops[n0] += weight;
    });
    Ok(pops)
}

/// Two-mode output of the finite chains, each mode passing through its own
/// chain of splitters.
pub fn finite_m_two_mode_output(
    state: &TwoModeState,
    chain_a: &SplitterChain,
    chain_b: &SplitterChain,
) -> TwoModeDensityMatrix {
    let cutoff = state.cutoff();
    propagate_two_mode_kraus(
        state,
        (&chain_a.kraus(cutoff), chain_a.m_count),
        (&chain_b.kraus(cutoff), chain_b.m_count),
    )
}

/// Applies `channel_a` to mode `a` and `channel_b` to mode `b` the given
/// number of times each. Zero repetitions leave the input projector untouched.
pub fn propagate_two_mode_kraus(
    state: &TwoModeState,
    (channel_a, times_a): (&KrausChannel, usize),
    (channel_b, times_b): (&KrausChannel, usize),
) -> TwoModeDensityMatrix {
    let cutoff = state.cutoff();
    let mut rho = state.density_matrix().into_elements();
    for _ in 0..times_a {
        rho = channel_a.apply_two_mode(&rho, true);
    }
    for _ in 0..times_b {
        rho = channel_b.apply_two_mode(&rho, false);
    }
    TwoModeDensityMatrix::from_assembled(cutoff, rho)
}
