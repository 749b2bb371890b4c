//! Extinction and phase-rotation profiles of a propagation channel.
//!
//! Distances are in km, coefficients in km^-1. What the loss formulas consume
//! is the integrated optical depth and the integrated phase along the path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default trapezoid resolution when sampling a profile from a function.
pub const DEFAULT_PANELS_PER_KM: usize = 1000;

/// One piece of a piecewise-constant medium, covering `[previous until_km, until_km)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub until_km: f64,
    pub mu: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediumProfile {
    Constant { mu: f64, eta: f64 },
    PiecewiseConstant { segments: Vec<Segment> },
    Tabulated(TabulatedProfile),
}

impl MediumProfile {
    pub fn constant(mu: f64, eta: f64) -> Result<Self> {
        let p = MediumProfile::Constant { mu, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn piecewise(segments: Vec<Segment>) -> Result<Self> {
        let p = MediumProfile::PiecewiseConstant { segments };
        p.validate()?;
        Ok(p)
    }

    /// Samples `mu` and `eta` on a uniform grid over `[0, x_max]` with
    /// `panels_per_km` trapezoid panels per km (at least one panel).
    pub fn sampled(
        mu: impl Fn(f64) -> f64,
        eta: impl Fn(f64) -> f64,
        x_max: f64,
        panels_per_km: usize,
    ) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) || panels_per_km == 0 {
            return Err(Error::InvalidProfile(format!(
                "cannot sample over [0, {x_max}] with {panels_per_km} panels/km"
            )));
        }
        let panels = ((x_max * panels_per_km as f64).ceil() as usize).max(1);
        let h = x_max / panels as f64;
        let positions: Vec<f64> = (0..=panels).map(|i| i as f64 * h).collect();
        let mus = positions.iter().map(|&x| mu(x)).collect();
        let etas = positions.iter().map(|&x| eta(x)).collect();
        Ok(MediumProfile::Tabulated(TabulatedProfile::new(
            positions, mus, etas,
        )?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MediumProfile::Constant { mu, eta } => check_coefficients(*mu, *eta),
            MediumProfile::PiecewiseConstant { segments } => {
                if segments.is_empty() {
                    return Err(Error::InvalidProfile("no segments".into()));
                }
                let mut prev = 0.0;
                for s in segments {
                    check_coefficients(s.mu, s.eta)?;
                    if !(s.until_km > prev && s.until_km.is_finite()) {
                        return Err(Error::InvalidProfile(format!(
                            "segment boundaries must increase from 0: {} after {prev}",
                            s.until_km
                        )));
                    }
                    prev = s.until_km;
                }
                Ok(())
            }
            // validated on construction
            MediumProfile::Tabulated(_) => Ok(()),
        }
    }

    /// Largest distance the profile is defined on.
    pub fn domain_end(&self) -> f64 {
        match self {
            MediumProfile::Constant { .. } => f64::INFINITY,
            MediumProfile::PiecewiseConstant { segments } => {
                segments.last().map_or(0.0, |s| s.until_km)
            }
            MediumProfile::Tabulated(t) => *t.positions.last().unwrap(),
        }
    }

    /// Integrated extinction from 0 to `x`.
    pub fn optical_depth(&self, x: f64) -> Result<f64> {
        self.integrate(x, Coefficient::Mu)
    }

    /// Integrated phase rotation from 0 to `x`.
    pub fn accumulated_phase(&self, x: f64) -> Result<f64> {
        self.integrate(x, Coefficient::Eta)
    }

    fn integrate(&self, x: f64, which: Coefficient) -> Result<f64> {
        self.validate()?;
        let end = self.domain_end();
        if !x.is_finite() || x < 0.0 || x > end {
            return Err(Error::OutOfDomain { x, max: end });
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            MediumProfile::Constant { mu, eta } => which.pick(*mu, *eta) * x,
            MediumProfile::PiecewiseConstant { segments } => {
                let mut total = 0.0;
                let mut start = 0.0;
                for s in segments {
                    let stop = s.until_km.min(x);
                    total += which.pick(s.mu, s.eta) * (stop - start);
                    if s.until_km >= x {
                        break;
                    }
                    start = s.until_km;
                }
                total
            }
            MediumProfile::Tabulated(t) => t.integrate(x, which),
        })
    }
}

#[derive(Clone, Copy)]
enum Coefficient {
    Mu,
    Eta,
}

impl Coefficient {
    fn pick(self, mu: f64, eta: f64) -> f64 {
        match self {
            Coefficient::Mu => mu,
            Coefficient::Eta => eta,
        }
    }
}

fn check_coefficients(mu: f64, eta: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidProfile(format!(
            "extinction must be finite and non-negative, got {mu}"
        )));
    }
    if !eta.is_finite() {
        return Err(Error::InvalidProfile(format!(
            "phase rotation must be finite, got {eta}"
        )));
    }
    Ok(())
}

/// Sampled profile integrated with the trapezoid rule, i.e. exactly for the
/// piecewise-linear interpolant of the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedSamples", into = "TabulatedSamples")]
pub struct TabulatedProfile {
    positions: Vec<f64>,
    mu: Vec<f64>,
    eta: Vec<f64>,
    cumulative_mu: Vec<f64>,
    cumulative_eta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TabulatedSamples {
    positions: Vec<f64>,
    mu: Vec<f64>,
    eta: Vec<f64>,
}

impl TryFrom<TabulatedSamples> for TabulatedProfile {
    type Error = Error;
    fn try_from(s: TabulatedSamples) -> Result<Self> {
        TabulatedProfile::new(s.positions, s.mu, s.eta)
    }
}

impl From<TabulatedProfile> for TabulatedSamples {
    fn from(t: TabulatedProfile) -> Self {
        TabulatedSamples {
            positions: t.positions,
            mu: t.mu,
            eta: t.eta,
        }
    }
}

impl TabulatedProfile {
    /// `positions` must start at 0 and strictly increase.
    pub fn new(positions: Vec<f64>, mu: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 || mu.len() != positions.len() || eta.len() != positions.len() {
            return Err(Error::InvalidProfile(format!(
                "need >= 2 samples with matching lengths (positions {}, mu {}, eta {})",
                positions.len(),
                mu.len(),
                eta.len()
            )));
        }
        if positions[0] != 0.0 {
            return Err(Error::InvalidProfile("samples must start at x = 0".into()));
        }
        for w in positions.windows(2) {
            if !(w[1] > w[0] && w[1].is_finite()) {
                return Err(Error::InvalidProfile(
                    "sample positions must strictly increase".into(),
                ));
            }
        }
        for (&m, &e) in mu.iter().zip(&eta) {
            check_coefficients(m, e)?;
        }
        let cumulative = |f: &[f64]| {
            let mut acc = Vec::with_capacity(f.len());
            acc.push(0.0);
            for i in 1..f.len() {
                let h = positions[i] - positions[i - 1];
                acc.push(acc[i - 1] + 0.5 * h * (f[i] + f[i - 1]));
            }
            acc
        };
        let cumulative_mu = cumulative(&mu);
        let cumulative_eta = cumulative(&eta);
        Ok(TabulatedProfile {
            positions,
            mu,
            eta,
            cumulative_mu,
            cumulative_eta,
        })
    }

    fn integrate(&self, x: f64, which: Coefficient) -> f64 {
        let (f, cum) = match which {
            Coefficient::Mu => (&self.mu, &self.cumulative_mu),
            Coefficient::Eta => (&self.eta, &self.cumulative_eta),
        };
        // index of the panel containing x
        let i = match self.positions.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => return cum[i],
            Err(i) => i - 1,
        };
        let x0 = self.positions[i];
        let x1 = self.positions[i + 1];
        let t = (x - x0) / (x1 - x0);
        let fx = f[i] + t * (f[i + 1] - f[i]);
        cum[i] + 0.5 * (x - x0) * (f[i] + fx)
    }
}

/// The two independent propagation channels `a` and `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub channel_a: MediumProfile,
    pub channel_b: MediumProfile,
}

impl ChannelPair {
    pub fn new(channel_a: MediumProfile, channel_b: MediumProfile) -> Result<Self> {
        channel_a.validate()?;
        channel_b.validate()?;
        Ok(ChannelPair {
            channel_a,
            channel_b,
        })
    }

    pub fn constant(mu_a: f64, eta_a: f64, mu_b: f64, eta_b: f64) -> Result<Self> {
        Self::new(
            MediumProfile::constant(mu_a, eta_a)?,
            MediumProfile::constant(mu_b, eta_b)?,
        )
    }

    /// Both channels share one profile.
    pub fn symmetric(profile: MediumProfile) -> Result<Self> {
        Self::new(profile.clone(), profile)
    }

    pub fn depths(&self, point: PropagationPoint) -> Result<ChannelDepths> {
        Ok(ChannelDepths {
            depth_a: self.channel_a.optical_depth(point.x_a)?,
            phase_a: self.channel_a.accumulated_phase(point.x_a)?,
            depth_b: self.channel_b.optical_depth(point.x_b)?,
            phase_b: self.channel_b.accumulated_phase(point.x_b)?,
        })
    }
}

/// Output position along each channel, in km.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationPoint {
    pub x_a: f64,
    pub x_b: f64,
}

impl PropagationPoint {
    pub fn new(x_a: f64, x_b: f64) -> Result<Self> {
        for x in [x_a, x_b] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::OutOfDomain {
                    x,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(PropagationPoint { x_a, x_b })
    }

    pub fn uniform(x: f64) -> Result<Self> {
        Self::new(x, x)
    }
}

/// Integrated optical depth and phase reached on each channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelDepths {
    pub depth_a: f64,
    pub phase_a: f64,
    pub depth_b: f64,
    pub phase_b: f64,
}

impl ChannelDepths {
    pub fn uniform(depth: f64, phase: f64) -> Self {
        ChannelDepths {
            depth_a: depth,
            phase_a: phase,
            depth_b: depth,
            phase_b: phase,
        }
    }
}
