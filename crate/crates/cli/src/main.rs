use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use beerloss::ensemble::Distribution;
use beerloss::experiment::{run_experiment, ExperimentConfig, ExperimentKind, OutputFormat};
use beerloss::propagation::Segment;
use beerloss::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "beerloss",
    version,
    about = "Lossy propagation of few-photon states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coherence of a N00N state versus distance.
    NoonDecay(Common),
    /// Coherence of a random state ensemble versus distance, with plateau detection.
    EnsembleCoherence(Common),
    /// Negativity of a random state ensemble versus distance.
    EnsembleNegativity(Common),
    /// Finite beam-splitter chains against the continuum channel.
    OracleConvergence(Common),
    /// Photon-number populations of a lossy Fock state.
    SingleMode(Common),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// Photon number (also the per-mode cutoff).
    #[arg(long)]
    n: Option<usize>,
    /// Extinction coefficient of both channels, km^-1.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    mu_a: Option<f64>,
    #[arg(long)]
    mu_b: Option<f64>,
    /// Phase coefficient of both channels, km^-1.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_a: Option<f64>,
    #[arg(long)]
    eta_b: Option<f64>,
    /// JSON list of {until_km, mu, eta}, applied to both channels.
    #[arg(long, value_name = "FILE")]
    profile: Option<PathBuf>,
    #[arg(long)]
    x_start: Option<f64>,
    #[arg(long)]
    x_max: Option<f64>,
    /// Single distance, km (single-mode only).
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    distribution: Option<DistributionArg>,
    /// Restrict sampling to coefficients "l:m,l:m,...".
    #[arg(long, value_parser = parse_pair)]
    #[arg(value_delimiter = ',')]
    subspace: Option<Vec<(usize, usize)>>,
    /// Optical depth for oracle-convergence.
    #[arg(long)]
    depth: Option<f64>,
    /// Chain lengths for oracle-convergence.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    plateau_window: Option<usize>,
    #[arg(long)]
    plateau_ratio: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistributionArg {
    Box,
    Sphere,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (l, m) = s
        .split_once(':')
        .ok_or_else(|| format!("expected l:m, got {s:?}"))?;
    let l = l.trim().parse().map_err(|e| format!("{l:?}: {e}"))?;
    let m = m.trim().parse().map_err(|e| format!("{m:?}: {e}"))?;
    Ok((l, m))
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn record(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Config(m) => ("config", m),
            Failure::Numerical(m) => ("numerical", m),
            Failure::Io(m) => ("io", m),
        };
        serde_json::json!({ "error": kind, "message": message, "exit_code": self.code() })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn build_config(kind: ExperimentKind, args: Common) -> Result<ExperimentConfig, Failure> {
    let mut c = ExperimentConfig::new(kind);
    if let Some(n) = args.n {
        c.n = n;
    }
    if let Some(mu) = args.mu {
        c.mu_a = mu;
        c.mu_b = mu;
    }
    if let Some(eta) = args.eta {
        c.eta_a = eta;
        c.eta_b = eta;
    }
    c.mu_a = args.mu_a.unwrap_or(c.mu_a);
    c.mu_b = args.mu_b.unwrap_or(c.mu_b);
    c.eta_a = args.eta_a.unwrap_or(c.eta_a);
    c.eta_b = args.eta_b.unwrap_or(c.eta_b);
    if let Some(path) = &args.profile {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let segments: Vec<Segment> = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        c.profile = Some(segments);
    }
    c.x_start = args.x_start.unwrap_or(c.x_start);
    c.x_max = args.x_max.unwrap_or(c.x_max);
    c.x = args.x;
    c.steps = args.steps.unwrap_or(c.steps);
    c.count = args.count.unwrap_or(c.count);
    c.seed = args.seed.unwrap_or(c.seed);
    if let Some(d) = args.distribution {
        c.distribution = match d {
            DistributionArg::Box => Distribution::UniformBox,
            DistributionArg::Sphere => Distribution::SphereUniform,
        };
    }
    c.subspace = args.subspace;
    c.depth = args.depth.unwrap_or(c.depth);
    if let Some(m) = args.m {
        c.m_values = m;
    }
    c.plateau.window = args.plateau_window.unwrap_or(c.plateau.window);
    c.plateau.ratio = args.plateau_ratio.unwrap_or(c.plateau.ratio);
    c.output_format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    c.output_path = args.out;
    if c.x.is_some() && kind != ExperimentKind::SingleMode {
        return Err(Failure::Config("--x is only valid for single-mode".into()));
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (kind, args) = match cli.command {
        Command::NoonDecay(a) => (ExperimentKind::NoonDecay, a),
        Command::EnsembleCoherence(a) => (ExperimentKind::EnsembleCoherence, a),
        Command::EnsembleNegativity(a) => (ExperimentKind::EnsembleNegativity, a),
        Command::OracleConvergence(a) => (ExperimentKind::OracleConvergence, a),
        Command::SingleMode(a) => (ExperimentKind::SingleMode, a),
    };
    let config = build_config(kind, args)?;
    log::info!(
        "running {} (n = {}, seed = {})",
        kind.name(),
        config.n,
        config.seed
    );

    let output = run_experiment(&config)?;
    log::info!("finished in {:.3} s", output.metadata.elapsed_seconds);

    match &config.output_path {
        Some(path) => output
            .write_to_path(config.output_format, path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output.write(config.output_format, &mut lock)?;
            lock.flush().map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default();
            let failure = Failure::Config(first.trim_start_matches("error: ").to_owned());
            eprintln!("{}", failure.record());
            return ExitCode::from(failure.code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{f:?}");
            eprintln!("{}", f.record());
            ExitCode::from(f.code())
        }
    }
}
