//! Continuum loss channel for one and two Fock-truncated modes.
//!
//! Each channel is characterized by its integrated optical depth `d` and
//! integrated phase `phi`. A photon survives with probability `s = exp(-d)`;
//! coherences between photon numbers `p` and `p'` pick up
//! `exp(-(p + p') d / 2) * exp(i (p - p') phi)`.

mod medium;

pub use medium::{
    ChannelDepths, ChannelPair, MediumProfile, PropagationPoint, Segment, TabulatedProfile,
    DEFAULT_PANELS_PER_KM,
};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    CombinatoricsTable, PhotonCutoff, SingleModeDensityMatrix, TwoModeDensityMatrix, TwoModeState,
};
use crate::linalg::CMatrix;

/// 1 - exp(-d), accurate for small depths.
#[inline]
pub fn loss_probability(depth: f64) -> f64 {
    -(-depth).exp_m1()
}

/// Binomial photon-number distribution of `n` photons thinned to survival `exp(-depth)`.
pub fn thinned_populations(n: usize, depth: f64) -> Vec<f64> {
    let s = (-depth).exp();
    let lost = loss_probability(depth);
    let mut binom = 1.0_f64;
    (0..=n)
        .map(|k| {
            if k > 0 {
                binom = binom * (n + 1 - k) as f64 / k as f64;
            }
            binom * s.powi(k as i32) * lost.powi((n - k) as i32)
        })
        .collect()
}

/// Output of a single mode prepared in the Fock state |n>, at distance `x`.
pub fn single_mode_output(
    cutoff: PhotonCutoff,
    n: usize,
    profile: &MediumProfile,
    x: f64,
) -> Result<SingleModeDensityMatrix> {
    if n > cutoff.n_max() {
        return Err(Error::CutoffExceeded {
            requested: n,
            max: cutoff.n_max(),
        });
    }
    let depth = profile.optical_depth(x)?;
    let mut pops = thinned_populations(n, depth);
    pops.resize(cutoff.levels(), 0.0);
    SingleModeDensityMatrix::diagonal(cutoff, &pops)
}

/// Closed-form output for the N00N input (|n,0> + |0,n>)/sqrt(2).
pub fn noon_output(
    n: usize,
    channels: &ChannelPair,
    point: PropagationPoint,
) -> Result<TwoModeDensityMatrix> {
    let depths = channels.depths(point)?;
    noon_output_at(n, &depths)
}

pub fn noon_output_at(n: usize, depths: &ChannelDepths) -> Result<TwoModeDensityMatrix> {
    if n == 0 || n > crate::fock::MAX_PHOTONS {
        return Err(Error::CutoffExceeded {
            requested: n,
            max: crate::fock::MAX_PHOTONS,
        });
    }
    let cutoff = PhotonCutoff::new(n)?;
    let d = cutoff.two_mode_dim();
    let mut rho = CMatrix::zeros(d, d);
    let pops_a = thinned_populations(n, depths.depth_a);
    let pops_b = thinned_populations(n, depths.depth_b);
    for k in 0..=n {
        let ia = cutoff.flatten(k, 0);
        let ib = cutoff.flatten(0, k);
        rho[(ia, ia)] += Complex64::new(0.5 * pops_a[k], 0.0);
        rho[(ib, ib)] += Complex64::new(0.5 * pops_b[k], 0.0);
    }
    let nf = n as f64;
    let coherence = Complex64::from_polar(
        0.5 * (-0.5 * nf * (depths.depth_a + depths.depth_b)).exp(),
        nf * (depths.phase_a - depths.phase_b),
    );
    let i = cutoff.flatten(n, 0);
    let j = cutoff.flatten(0, n);
    rho[(i, j)] = coherence;
    rho[(j, i)] = coherence.conj();
    Ok(TwoModeDensityMatrix::from_assembled(cutoff, rho))
}

/// Output density matrix for an arbitrary two-mode input.
///
/// Each element `(p, q; p', q')` is a single sum over the surviving-photon
/// origins `l >= p`, `m >= q`, so every output entry is written exactly once.
pub fn general_output(
    state: &TwoModeState,
    channels: &ChannelPair,
    point: PropagationPoint,
) -> Result<TwoModeDensityMatrix> {
    let depths = channels.depths(point)?;
    Ok(general_output_at(state, &depths))
}

pub fn general_output_at(state: &TwoModeState, depths: &ChannelDepths) -> TwoModeDensityMatrix {
    let cutoff = state.cutoff();
    let levels = cutoff.levels();
    let table = CombinatoricsTable::new(cutoff);
    let wa = ModeWeights::new(&table, levels, depths.depth_a, depths.phase_a);
    let wb = ModeWeights::new(&table, levels, depths.depth_b, depths.phase_b);
    let alpha = state.alpha();
    let dim = cutoff.two_mode_dim();

    let rows: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|row| {
            let (p, q) = cutoff.unflatten(row);
            let mut out = vec![Complex64::new(0.0, 0.0); dim];
            for (col, slot) in out.iter_mut().enumerate() {
                let (pp, qq) = cutoff.unflatten(col);
                let mut acc = Complex64::new(0.0, 0.0);
                for l in p..levels {
                    // l' = l + p' - p stays in range only while l + p' <= N + p
                    let Some(lp) = (l + pp).checked_sub(p).filter(|&v| v < levels) else {
                        break;
                    };
                    let fa = wa.weight(p, pp, l);
                    if fa == 0.0 {
                        continue;
                    }
                    let mut inner = Complex64::new(0.0, 0.0);
                    for m in q..levels {
                        let Some(mp) = (m + qq).checked_sub(q).filter(|&v| v < levels) else {
                            break;
                        };
                        let fb = wb.weight(q, qq, m);
                        inner += alpha[(l, m)] * alpha[(lp, mp)].conj() * fb;
                    }
                    acc += inner * fa;
                }
                *slot = acc * wa.prefactor(p, pp) * wb.prefactor(q, qq);
            }
            out
        })
        .collect();

    let mut rho = CMatrix::zeros(dim, dim);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            rho[(i, j)] = v;
        }
    }
    TwoModeDensityMatrix::from_assembled(cutoff, rho)
}

/// Per-mode factors of the output sum, tabulated once per depth.
struct ModeWeights {
    levels: usize,
    // [p][p'][l]: sqrt(l! l'! / (p! p'!)) / (l - p)! * (1 - e^-d)^(l - p)
    weights: Vec<f64>,
    // [p][p']: e^{-(p + p') d / 2} e^{i (p - p') phi}
    prefactors: Vec<Complex64>,
}

impl ModeWeights {
    fn new(table: &CombinatoricsTable, levels: usize, depth: f64, phase: f64) -> Self {
        let lost = loss_probability(depth);
        let lf = |n: usize| table.log_factorial(n);
        let mut weights = vec![0.0; levels * levels * levels];
        let mut prefactors = vec![Complex64::new(0.0, 0.0); levels * levels];
        for p in 0..levels {
            for pp in 0..levels {
                prefactors[p * levels + pp] = Complex64::from_polar(
                    (-0.5 * (p + pp) as f64 * depth).exp(),
                    (p as f64 - pp as f64) * phase,
                );
                for l in p..levels {
                    let lp = l + pp - p;
                    if lp >= levels {
                        break;
                    }
                    let k = l - p;
                    let log_w = 0.5 * (lf(l) + lf(lp) - lf(p) - lf(pp)) - lf(k);
                    weights[(p * levels + pp) * levels + l] = log_w.exp() * lost.powi(k as i32);
                }
            }
        }
        ModeWeights {
            levels,
            weights,
            prefactors,
        }
    }

    #[inline]
    fn weight(&self, p: usize, pp: usize, l: usize) -> f64 {
        self.weights[(p * self.levels + pp) * self.levels + l]
    }

    #[inline]
    fn prefactor(&self, p: usize, pp: usize) -> Complex64 {
        self.prefactors[p * self.levels + pp]
    }
}

/// One term `(l, m)` of the output element `(p, q; p', q')`, evaluated
/// literally. Terms that would need the factorial of a negative integer, or an
/// amplitude index outside the cutoff, are exactly zero.
#[allow(clippy::too_many_arguments)]
pub fn output_summand(
    table: &CombinatoricsTable,
    state: &TwoModeState,
    depths: &ChannelDepths,
    (p, q, pp, qq): (i64, i64, i64, i64),
    l: i64,
    m: i64,
) -> Complex64 {
    let n = state.cutoff().n_max() as i64;
    let lp = l + pp - p;
    let mp = m + qq - q;
    let in_range = |v: i64| (0..=n).contains(&v);
    if ![p, q, pp, qq, l, m, lp, mp].into_iter().all(in_range) {
        return Complex64::new(0.0, 0.0);
    }
    let inv = table.inv_factorial(l - p) * table.inv_factorial(m - q);
    if inv == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let lf = |v: i64| table.log_factorial(v as usize);
    let root = (0.5 * (lf(l) + lf(lp) + lf(m) + lf(mp) - lf(p) - lf(q) - lf(pp) - lf(qq))).exp();
    let decay =
        (-0.5 * ((p + pp) as f64 * depths.depth_a + (q + qq) as f64 * depths.depth_b)).exp();
    let phase = Complex64::from_polar(
        1.0,
        (p - pp) as f64 * depths.phase_a + (q - qq) as f64 * depths.phase_b,
    );
    let loss = loss_probability(depths.depth_a).powi((l - p) as i32)
        * loss_probability(depths.depth_b).powi((m - q) as i32);
    state.amplitude(l as usize, m as usize)
        * state.amplitude(lp as usize, mp as usize).conj()
        * (inv * root * decay * loss)
        * phase
}

/// Same object as [`general_output`], summed in input-pair order: for every
/// pair of input amplitudes `(l, m)`, `(l', m')`, distribute the photons lost
/// from each mode over all output levels `p <= l`, `q <= m`.
///
/// Independent of the production path; used to cross-check it.
pub fn general_output_form_a(
    state: &TwoModeState,
    channels: &ChannelPair,
    point: PropagationPoint,
) -> Result<TwoModeDensityMatrix> {
    let depths = channels.depths(point)?;
    Ok(general_output_form_a_at(state, &depths))
}

pub fn general_output_form_a_at(
    state: &TwoModeState,
    depths: &ChannelDepths,
) -> TwoModeDensityMatrix {
    let cutoff = state.cutoff();
    let n = cutoff.n_max() as i64;
    let table = CombinatoricsTable::new(cutoff);
    let lf = |v: i64| table.log_factorial(v as usize);
    let (da, db) = (depths.depth_a, depths.depth_b);
    let (ga, gb) = (loss_probability(da), loss_probability(db));
    let dim = cutoff.two_mode_dim();
    let mut rho = CMatrix::zeros(dim, dim);

    for l in 0..=n {
        for m in 0..=n {
            let a = state.amplitude(l as usize, m as usize);
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for l2 in 0..=n {
                for m2 in 0..=n {
                    let b = state.amplitude(l2 as usize, m2 as usize);
                    if b == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let coeff = a
                        * b.conj()
                        * Complex64::from_polar(
                            1.0,
                            (l - l2) as f64 * depths.phase_a + (m - m2) as f64 * depths.phase_b,
                        );
                    for p in 0..=l {
                        // output level p' = p + l' - l; negative means a negative factorial
                        let p2 = p + l2 - l;
                        if p2 < 0 {
                            continue;
                        }
                        for q in 0..=m {
                            let q2 = q + m2 - m;
                            if q2 < 0 {
                                continue;
                            }
                            let log_root = 0.5
                                * (lf(l) + lf(l2) + lf(m) + lf(m2)
                                    - lf(p)
                                    - lf(q)
                                    - lf(p2)
                                    - lf(q2));
                            // e^{-(l'-l) d/2} e^{-p d} combined so neither factor overflows
                            let log_decay = -(0.5 * (l2 - l) as f64 + p as f64) * da
                                - (0.5 * (m2 - m) as f64 + q as f64) * db;
                            let mag = (log_root + log_decay - lf(l - p) - lf(m - q)).exp()
                                * ga.powi((l - p) as i32)
                                * gb.powi((m - q) as i32);
                            let row = cutoff.flatten(p as usize, q as usize);
                            let col = cutoff.flatten(p2 as usize, q2 as usize);
                            rho[(row, col)] += coeff * mag;
                        }
                    }
                }
            }
        }
    }
    TwoModeDensityMatrix::from_assembled(cutoff, rho)
}
