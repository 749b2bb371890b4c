//! Random two-mode input ensembles and metric sweeps over propagation distance.
//!
//! Every state is drawn from its own ChaCha20 stream: the 64-bit seed keys the
//! generator and the state index selects the stream, so sample `k` does not
//! depend on how many other samples were drawn or in which order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{PhotonCutoff, TwoModeState};
use crate::linalg::CMatrix;
use crate::metrics::MetricRecord;
use crate::propagation::{general_output, ChannelPair, PropagationPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// Re and Im of every coefficient uniform on [-1, 1], then normalized.
    UniformBox,
    /// Re and Im of every coefficient standard normal, then normalized:
    /// uniform on the unit sphere of the coefficient space.
    SphereUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub distribution: Distribution,
    pub cutoff: PhotonCutoff,
    pub count: usize,
    pub seed: u64,
    /// Coefficients `(l, m)` allowed to be nonzero; `None` means all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<(usize, usize)>>,
}

impl EnsembleSpec {
    pub fn new(
        distribution: Distribution,
        cutoff: PhotonCutoff,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = EnsembleSpec {
            distribution,
            cutoff,
            count,
            seed,
            subspace: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_subspace(mut self, coefficients: Vec<(usize, usize)>) -> Result<Self> {
        self.subspace = Some(coefficients);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("ensemble count must be at least 1".into()));
        }
        if let Some(sub) = &self.subspace {
            if sub.is_empty() {
                return Err(Error::Config(
                    "subspace mask selects no coefficients".into(),
                ));
            }
            let n = self.cutoff.n_max();
            if let Some(&(l, m)) = sub.iter().find(|&&(l, m)| l > n || m > n) {
                return Err(Error::Config(format!(
                    "subspace coefficient ({l}, {m}) exceeds cutoff {n}"
                )));
            }
        }
        Ok(())
    }

    fn allowed(&self) -> Vec<(usize, usize)> {
        match &self.subspace {
            Some(sub) => {
                let mut s = sub.clone();
                s.sort_unstable();
                s.dedup();
                s
            }
            None => {
                let n = self.cutoff.n_max();
                (0..=n).flat_map(|l| (0..=n).map(move |m| (l, m))).collect()
            }
        }
    }

    /// Draws state `index`; identical for identical `(seed, index)`.
    pub fn sample_state(&self, index: usize) -> Result<TwoModeState> {
        self.validate()?;
        if index >= self.count {
            return Err(Error::IndexOutOfRange {
                index,
                count: self.count,
            });
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let levels = self.cutoff.levels();
        let mut alpha = CMatrix::zeros(levels, levels);
        // an all-zero draw has probability zero; redraw rather than fail
        loop {
            for &(l, m) in &self.allowed() {
                let (re, im) = match self.distribution {
                    Distribution::UniformBox => {
                        (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
                    }
                    Distribution::SphereUniform => {
                        (rng.sample(StandardNormal), rng.sample(StandardNormal))
                    }
                };
                alpha[(l, m)] = Complex64::new(re, im);
            }
            match TwoModeState::new(self.cutoff, alpha.clone()) {
                Err(Error::AllZeroAmplitudes) => continue,
                other => return other,
            }
        }
    }

    pub fn sample_all(&self) -> Result<Vec<TwoModeState>> {
        (0..self.count).map(|i| self.sample_state(i)).collect()
    }
}

/// Linear grid of propagation distances, the same on both channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub x_start: f64,
    pub x_stop: f64,
    pub steps: usize,
    pub channels: ChannelPair,
}

impl SweepSpec {
    pub fn new(x_start: f64, x_stop: f64, steps: usize, channels: ChannelPair) -> Result<Self> {
        let s = SweepSpec {
            x_start,
            x_stop,
            steps,
            channels,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_start >= 0.0 && self.x_stop > self.x_start && self.x_stop.is_finite()) {
            return Err(Error::Config(format!(
                "sweep needs 0 <= x_start < x_stop, got [{}, {}]",
                self.x_start, self.x_stop
            )));
        }
        if self.steps < 2 {
            return Err(Error::Config("sweep needs at least 2 steps".into()));
        }
        Ok(())
    }

    pub fn distances(&self) -> Vec<f64> {
        let h = (self.x_stop - self.x_start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.x_stop
                } else {
                    self.x_start + i as f64 * h
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        assert!(!values.is_empty(), "summary of an empty sample");
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Summary {
            mean: values.iter().sum::<f64>() / n as f64,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        }
    }
}

/// Ensemble statistics of every metric at one distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceAggregate {
    pub x: f64,
    pub coherence_power: Summary,
    pub negativity: Summary,
    pub trace_error: Summary,
    pub min_eigenvalue: Summary,
    pub purity: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by state index, then distance.
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<DistanceAggregate>,
}

impl SweepResult {
    pub fn state_count(&self) -> usize {
        self.records.len() / self.aggregates.len().max(1)
    }

    /// Records of one state, in distance order.
    pub fn series(&self, state_index: usize) -> &[MetricRecord] {
        let steps = self.aggregates.len();
        &self.records[state_index * steps..(state_index + 1) * steps]
    }

    pub fn median_coherence(&self) -> Vec<f64> {
        self.aggregates
            .iter()
            .map(|a| a.coherence_power.median)
            .collect()
    }

    pub fn median_negativity(&self) -> Vec<f64> {
        self.aggregates
            .iter()
            .map(|a| a.negativity.median)
            .collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.aggregates.iter().map(|a| a.x).collect()
    }
}

/// Samples the ensemble and sweeps every state over the distance grid.
pub fn run_sweep(ensemble: &EnsembleSpec, sweep: &SweepSpec) -> Result<SweepResult> {
    let states = ensemble.sample_all()?;
    run_sweep_states(&states, sweep)
}

/// Sweeps explicit input states. States are processed in parallel; the
/// output order depends only on state index.
pub fn run_sweep_states(states: &[TwoModeState], sweep: &SweepSpec) -> Result<SweepResult> {
    sweep.validate()?;
    if states.is_empty() {
        return Err(Error::Config("no states to sweep".into()));
    }
    let xs = sweep.distances();
    let per_state: Vec<Vec<MetricRecord>> = states
        .par_iter()
        .enumerate()
        .map(|(idx, state)| {
            xs.iter()
                .map(|&x| {
                    let point = PropagationPoint::uniform(x)?;
                    let rho = general_output(state, &sweep.channels, point)?;
                    MetricRecord::evaluate(&rho, x, idx)
                        .map_err(|e| e.with_context(format!("state {idx}, x = {x} km")))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregates = xs
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let column = |f: fn(&MetricRecord) -> f64| -> Summary {
                Summary::of(&per_state.iter().map(|s| f(&s[k])).collect::<Vec<_>>())
            };
            DistanceAggregate {
                x,
                coherence_power: column(|r| r.coherence_power),
                negativity: column(|r| r.negativity),
                trace_error: column(|r| r.trace_error),
                min_eigenvalue: column(|r| r.min_eigenvalue),
                purity: column(|r| r.purity),
            }
        })
        .collect();

    Ok(SweepResult {
        records: per_state.into_iter().flatten().collect(),
        aggregates,
    })
}
