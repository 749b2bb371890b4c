//! Experiment runner: configuration, execution and persistence of the
//! propagation experiments exposed by the command-line tool.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    run_sweep, run_sweep_states, DistanceAggregate, Distribution, EnsembleSpec, SweepSpec,
};
use crate::error::{Error, Result};
use crate::fock::{PhotonCutoff, TwoModeState};
use crate::linalg::max_abs_diff;
use crate::metrics::MetricRecord;
use crate::propagation::{
    general_output_at, single_mode_output, ChannelDepths, ChannelPair, MediumProfile, Segment,
};
use crate::splitter::{finite_m_single_mode_output, finite_m_two_mode_output, SplitterChain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NoonDecay,
    EnsembleCoherence,
    EnsembleNegativity,
    OracleConvergence,
    SingleMode,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NoonDecay => "noon-decay",
            ExperimentKind::EnsembleCoherence => "ensemble-coherence",
            ExperimentKind::EnsembleNegativity => "ensemble-negativity",
            ExperimentKind::OracleConvergence => "oracle-convergence",
            ExperimentKind::SingleMode => "single-mode",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Thresholds of the plateau detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauOptions {
    /// Points per sliding log-slope fit.
    pub window: usize,
    /// A plateau is reported when |mid slope| < ratio * |tail slope|.
    pub ratio: f64,
}

impl Default for PlateauOptions {
    fn default() -> Self {
        PlateauOptions {
            window: 5,
            ratio: 0.8,
        }
    }
}

/// Everything needed to re-run an experiment. Echoed into every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub mu_a: f64,
    pub mu_b: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    /// Piecewise-constant medium shared by both channels; overrides mu/eta.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<Segment>>,
    pub x_start: f64,
    pub x_max: f64,
    pub steps: usize,
    /// Single-mode only: evaluate at this one distance instead of a sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub count: usize,
    pub seed: u64,
    pub distribution: Distribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<Vec<(usize, usize)>>,
    /// Oracle only: optical depth at which finite chains are compared.
    pub depth: f64,
    /// Oracle only: chain lengths.
    pub m_values: Vec<usize>,
    pub plateau: PlateauOptions,
    pub output_format: OutputFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults: mu = 0.2 km^-1 and eta = 1 km^-1 on both channels, N = 10.
    pub fn new(experiment: ExperimentKind) -> Self {
        let (n, x_max, steps) = match experiment {
            ExperimentKind::NoonDecay => (10, 5.0, 101),
            ExperimentKind::EnsembleCoherence | ExperimentKind::EnsembleNegativity => {
                (10, 30.0, 31)
            }
            ExperimentKind::OracleConvergence => (4, 5.0, 2),
            ExperimentKind::SingleMode => (10, 5.0, 51),
        };
        ExperimentConfig {
            experiment,
            n,
            mu_a: 0.2,
            mu_b: 0.2,
            eta_a: 1.0,
            eta_b: 1.0,
            profile: None,
            x_start: 0.0,
            x_max,
            steps,
            x: None,
            count: 50,
            seed: 1,
            distribution: Distribution::SphereUniform,
            subspace: None,
            depth: 1.0,
            m_values: vec![10, 100, 1000, 10_000],
            plateau: PlateauOptions::default(),
            output_format: OutputFormat::Csv,
            output_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        PhotonCutoff::new(self.n).map_err(|e| Error::Config(e.to_string()))?;
        if self.n == 0 && self.experiment != ExperimentKind::SingleMode {
            return Err(Error::Config("photon number must be at least 1".into()));
        }
        for (name, v) in [
            ("mu-a", self.mu_a),
            ("mu-b", self.mu_b),
            ("eta-a", self.eta_a),
            ("eta-b", self.eta_b),
            ("x-start", self.x_start),
            ("x-max", self.x_max),
            ("depth", self.depth),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.mu_a < 0.0 || self.mu_b < 0.0 {
            return Err(Error::Config(
                "extinction coefficients must be non-negative".into(),
            ));
        }
        if !(self.plateau.window >= 2 && self.plateau.ratio > 0.0) {
            return Err(Error::Config(
                "plateau window must be >= 2 and ratio > 0".into(),
            ));
        }
        self.channels().map_err(config_error)?;
        match self.experiment {
            ExperimentKind::OracleConvergence => {
                if self.depth <= 0.0 || self.mu_a <= 0.0 {
                    return Err(Error::Config(
                        "oracle-convergence needs depth > 0 and mu-a > 0".into(),
                    ));
                }
                if self.m_values.is_empty() || self.m_values.contains(&0) {
                    return Err(Error::Config("chain lengths must be positive".into()));
                }
            }
            ExperimentKind::SingleMode if self.x.is_some() => {
                let x = self.x.unwrap();
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::Config(format!("distance must be >= 0, got {x}")));
                }
            }
            _ => {
                self.sweep().map_err(config_error)?;
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::EnsembleCoherence | ExperimentKind::EnsembleNegativity
        ) {
            self.ensemble().map_err(config_error)?;
        }
        Ok(())
    }

    pub fn channels(&self) -> Result<ChannelPair> {
        match &self.profile {
            Some(segments) => ChannelPair::symmetric(MediumProfile::piecewise(segments.clone())?),
            None => ChannelPair::constant(self.mu_a, self.eta_a, self.mu_b, self.eta_b),
        }
    }

    pub fn sweep(&self) -> Result<SweepSpec> {
        SweepSpec::new(self.x_start, self.x_max, self.steps, self.channels()?)
    }

    pub fn ensemble(&self) -> Result<EnsembleSpec> {
        let spec = EnsembleSpec::new(
            self.distribution,
            PhotonCutoff::new(self.n)?,
            self.count,
            self.seed,
        )?;
        match &self.subspace {
            Some(mask) => spec.with_subspace(mask.clone()),
            None => Ok(spec),
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub library: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub started_unix_ms: u64,
    pub elapsed_seconds: f64,
}

/// Photon-number population of the single-mode output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub x: f64,
    pub photon_number: usize,
    pub population: f64,
}

/// Max-element discrepancy of the finite chain against the continuum law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub m: usize,
    pub single_mode_max_error: f64,
    pub two_mode_max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "snake_case")]
pub enum Records {
    Metrics(Vec<MetricRecord>),
    Populations(Vec<PopulationRecord>),
    Convergence(Vec<ConvergenceRecord>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauReport {
    pub mid_slope: f64,
    pub tail_slope: f64,
    pub plateau_flag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSummary {
    NoonDecay {
        fitted_log_slope: f64,
        expected_log_slope: f64,
    },
    EnsembleCoherence {
        /// `None` when the median series cannot be fitted (e.g. zeros).
        plateau: Option<PlateauReport>,
    },
    EnsembleNegativity {
        median_start: f64,
        median_end: f64,
        entangled_fraction_end: f64,
    },
    OracleConvergence {
        single_mode_log_log_slope: f64,
        two_mode_log_log_slope: f64,
    },
    SingleMode {
        max_mean_photon_error: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub metadata: Metadata,
    pub records: Records,
    #[serde(default)]
    pub aggregates: Vec<DistanceAggregate>,
    pub summary: ExperimentSummary,
}

/// Runs the configured experiment. Nothing is written; see [`ExperimentOutput::write`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let clock = Instant::now();

    let (records, aggregates, summary) = match config.experiment {
        ExperimentKind::NoonDecay => {
            let state = TwoModeState::noon(config.n)?;
            let res = run_sweep_states(std::slice::from_ref(&state), &config.sweep()?)?;
            let xs = res.distances();
            let logs: Vec<f64> = res.records.iter().map(|r| r.coherence_power.ln()).collect();
            let (xs, logs): (Vec<f64>, Vec<f64>) = xs
                .into_iter()
                .zip(logs)
                .filter(|(_, l)| l.is_finite())
                .unzip();
            let fitted = if xs.len() >= 2 {
                fit_slope(&xs, &logs)
            } else {
                f64::NAN
            };
            let expected = -(config.n as f64) * (config.mu_a + config.mu_b);
            (
                Records::Metrics(res.records),
                res.aggregates,
                ExperimentSummary::NoonDecay {
                    fitted_log_slope: fitted,
                    expected_log_slope: expected,
                },
            )
        }
        ExperimentKind::EnsembleCoherence => {
            let res = run_sweep(&config.ensemble()?, &config.sweep()?)?;
            let plateau =
                detect_plateau(&res.distances(), &res.median_coherence(), config.plateau).ok();
            (
                Records::Metrics(res.records),
                res.aggregates,
                ExperimentSummary::EnsembleCoherence { plateau },
            )
        }
        ExperimentKind::EnsembleNegativity => {
            let res = run_sweep(&config.ensemble()?, &config.sweep()?)?;
            let med = res.median_negativity();
            let steps = res.aggregates.len();
            let last = (0..res.state_count())
                .filter(|&i| res.series(i)[steps - 1].negativity > 0.0)
                .count();
            let summary = ExperimentSummary::EnsembleNegativity {
                median_start: med[0],
                median_end: med[steps - 1],
                entangled_fraction_end: last as f64 / res.state_count() as f64,
            };
            (Records::Metrics(res.records), res.aggregates, summary)
        }
        ExperimentKind::OracleConvergence => {
            let rows = oracle_convergence(config)?;
            let ms: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
            let slope = |f: fn(&ConvergenceRecord) -> f64| {
                if rows.len() < 2 {
                    return f64::NAN;
                }
                let ys: Vec<f64> = rows.iter().map(|r| f(r).ln()).collect();
                fit_slope(&ms, &ys)
            };
            let summary = ExperimentSummary::OracleConvergence {
                single_mode_log_log_slope: slope(|r| r.single_mode_max_error),
                two_mode_log_log_slope: slope(|r| r.two_mode_max_error),
            };
            (Records::Convergence(rows), Vec::new(), summary)
        }
        ExperimentKind::SingleMode => {
            let cutoff = PhotonCutoff::new(config.n)?;
            let channels = config.channels()?;
            let xs = match config.x {
                Some(x) => vec![x],
                None => config.sweep()?.distances(),
            };
            let mut rows = Vec::with_capacity(xs.len() * cutoff.levels());
            let mut worst = 0.0_f64;
            for &x in &xs {
                let rho = single_mode_output(cutoff, config.n, &channels.channel_a, x)?;
                let depth = channels.channel_a.optical_depth(x)?;
                worst =
                    worst.max((rho.mean_photon_number() - config.n as f64 * (-depth).exp()).abs());
                rows.extend(rho.populations().into_iter().enumerate().map(|(k, p)| {
                    PopulationRecord {
                        x,
                        photon_number: k,
                        population: p,
                    }
                }));
            }
            (
                Records::Populations(rows),
                Vec::new(),
                ExperimentSummary::SingleMode {
                    max_mean_photon_error: worst,
                },
            )
        }
    };

    Ok(ExperimentOutput {
        metadata: Metadata {
            library: "beerloss".into(),
            version: crate::VERSION.into(),
            config: config.clone(),
            seed: config.seed,
            started_unix_ms: started,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
        },
        records,
        aggregates,
        summary,
    })
}

/// Finite chains of each length against the continuum channel at the
/// configured depth. The two-mode comparison uses a sphere-uniform state
/// drawn from the configured seed.
fn oracle_convergence(config: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let cutoff = PhotonCutoff::new(config.n)?;
    let x = config.depth / config.mu_a;
    let profile_a = MediumProfile::constant(config.mu_a, config.eta_a)?;
    let continuum_single = single_mode_output(cutoff, config.n, &profile_a, x)?;

    let state =
        EnsembleSpec::new(Distribution::SphereUniform, cutoff, 1, config.seed)?.sample_state(0)?;
    let depths = ChannelDepths {
        depth_a: config.mu_a * x,
        phase_a: config.eta_a * x,
        depth_b: config.mu_b * x,
        phase_b: config.eta_b * x,
    };
    let continuum_two = general_output_at(&state, &depths);

    config
        .m_values
        .iter()
        .map(|&m| {
            let chain_a =
                SplitterChain::for_medium(m, config.mu_a, config.eta_a, x).map_err(config_error)?;
            let chain_b =
                SplitterChain::for_medium(m, config.mu_b, config.eta_b, x).map_err(config_error)?;
            let single = finite_m_single_mode_output(cutoff, config.n, &chain_a)?;
            let two = finite_m_two_mode_output(&state, &chain_a, &chain_b);
            Ok(ConvergenceRecord {
                m,
                single_mode_max_error: max_abs_diff(single.elements(), continuum_single.elements()),
                two_mode_max_error: max_abs_diff(two.elements(), continuum_two.elements()),
            })
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Compares the decay rate of `values` over the middle third of the distance
/// range with the rate over the final third.
///
/// `mid_slope` is the windowed log-slope of smallest magnitude among windows
/// centred in the middle third; `tail_slope` is one fit over the final third.
pub fn detect_plateau(
    xs: &[f64],
    values: &[f64],
    options: PlateauOptions,
) -> Result<PlateauReport> {
    if xs.len() != values.len() {
        return Err(Error::InsufficientData(format!(
            "{} distances but {} values",
            xs.len(),
            values.len()
        )));
    }
    if xs.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 points, got {}",
            xs.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InsufficientData(format!(
            "log-slope undefined for value {v}"
        )));
    }
    let w = options.window;
    if w < 2 || w > xs.len() {
        return Err(Error::InsufficientData(format!("window {w} does not fit")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let x0 = xs[0];
    let span = xs[xs.len() - 1] - x0;
    let (lo, hi) = (x0 + span / 3.0, x0 + 2.0 * span / 3.0);

    let mid_slope = (0..=xs.len() - w)
        .filter_map(|i| {
            let wx = &xs[i..i + w];
            let centre = wx.iter().sum::<f64>() / w as f64;
            (centre >= lo && centre <= hi).then(|| fit_slope(wx, &logs[i..i + w]))
        })
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or_else(|| Error::InsufficientData("no window centred in the middle third".into()))?;

    let tail: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= hi).collect();
    if tail.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than 2 points in the final third".into(),
        ));
    }
    let tx: Vec<f64> = tail.iter().map(|&i| xs[i]).collect();
    let ty: Vec<f64> = tail.iter().map(|&i| logs[i]).collect();
    let tail_slope = fit_slope(&tx, &ty);

    Ok(PlateauReport {
        mid_slope,
        tail_slope,
        plateau_flag: mid_slope.abs() < options.ratio * tail_slope.abs(),
    })
}

pub const METRIC_COLUMNS: [&str; 7] = [
    "x",
    "state_index",
    "coherence_power",
    "negativity",
    "trace_error",
    "min_eigenvalue",
    "purity",
];

impl ExperimentOutput {
    pub fn write(&self, format: OutputFormat, out: impl Write) -> Result<()> {
        match format {
            OutputFormat::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
                Ok(())
            }
            OutputFormat::Csv => self.write_csv(out),
        }
    }

    pub fn write_to_path(&self, format: OutputFormat, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(file);
        self.write(format, &mut buf)?;
        buf.flush()?;
        Ok(())
    }

    /// Comment lines carry the metadata and summary as JSON; the body is a
    /// plain CSV table. Floats use shortest round-trip formatting.
    fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# metadata {}", serde_json::to_string(&self.metadata)?)?;
        writeln!(out, "# summary {}", serde_json::to_string(&self.summary)?)?;
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        match &self.records {
            Records::Metrics(rows) => {
                w.write_record(METRIC_COLUMNS).map_err(csv_err)?;
                for r in rows {
                    w.write_record([
                        fmt_f64(r.x),
                        r.state_index.to_string(),
                        fmt_f64(r.coherence_power),
                        fmt_f64(r.negativity),
                        fmt_f64(r.trace_error),
                        fmt_f64(r.min_eigenvalue),
                        fmt_f64(r.purity),
                    ])
                    .map_err(csv_err)?;
                }
            }
            Records::Populations(rows) => {
                w.write_record(["x", "photon_number", "population"])
                    .map_err(csv_err)?;
                for r in rows {
                    w.write_record([
                        fmt_f64(r.x),
                        r.photon_number.to_string(),
                        fmt_f64(r.population),
                    ])
                    .map_err(csv_err)?;
                }
            }
            Records::Convergence(rows) => {
                w.write_record(["m", "single_mode_max_error", "two_mode_max_error"])
                    .map_err(csv_err)?;
                for r in rows {
                    w.write_record([
                        r.m.to_string(),
                        fmt_f64(r.single_mode_max_error),
                        fmt_f64(r.two_mode_max_error),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value, with an
/// exponent for very large or small magnitudes.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Parses the metric table written by a metrics experiment in CSV form.
pub fn read_metrics_csv(input: impl BufRead) -> Result<Vec<MetricRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let bad = |e: String| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e));
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(METRIC_COLUMNS) {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", &rec[i])))
        };
        rows.push(MetricRecord {
            x: f(0)?,
            state_index: rec[1]
                .parse()
                .map_err(|e| bad(format!("{}: {e}", &rec[1])))?,
            coherence_power: f(2)?,
            negativity: f(3)?,
            trace_error: f(4)?,
            min_eigenvalue: f(5)?,
            purity: f(6)?,
        });
    }
    Ok(rows)
}
