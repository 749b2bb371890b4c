//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use beerloss::ensemble::{run_sweep, run_sweep_states, Distribution, EnsembleSpec, SweepSpec};
use beerloss::experiment::{
    detect_plateau, fit_slope, read_metrics_csv, run_experiment, ExperimentConfig, ExperimentKind,
    OutputFormat, PlateauOptions, Records,
};
use beerloss::fock::{InvariantReport, PhotonCutoff, SingleModeState, TwoModeState};
use beerloss::linalg::max_abs_diff;
use beerloss::metrics::{coherence_power, negativity, partial_transpose_a};
use beerloss::propagation::{
    general_output_at, general_output_form_a_at, noon_output_at, single_mode_output, ChannelDepths,
    ChannelPair, MediumProfile,
};
use beerloss::splitter::{
    finite_m_single_mode_output, finite_m_two_mode_output, KrausChannel, SplitterChain,
    TransferMatrix,
};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const MU: f64 = 0.2;
const ETA: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Invariant reports of every density matrix produced by criteria 1 to 4.
#[derive(Default)]
struct Produced(Vec<InvariantReport>);

impl Produced {
    fn two(&mut self, rho: &beerloss::TwoModeDensityMatrix) {
        self.0.push(rho.invariants().expect("eigensolve"));
    }

    fn single(&mut self, rho: &beerloss::fock::SingleModeDensityMatrix) {
        self.0.push(rho.invariants().expect("eigensolve"));
    }
}

fn noon_decay(produced: &mut Produced) -> Outcome {
    let start = Instant::now();
    let n = 10;
    let xs: Vec<f64> = (0..101).map(|i| 5.0 * i as f64 / 100.0).collect();
    let mut logs = Vec::new();
    let mut outputs = Vec::new();
    for &x in &xs {
        let rho = noon_output_at(n, &ChannelDepths::uniform(MU * x, ETA * x)).unwrap();
        logs.push(coherence_power(&rho).ln());
        outputs.push(rho);
    }
    let slope = fit_slope(&xs, &logs);
    let elapsed = start.elapsed().as_secs_f64();
    outputs.iter().for_each(|rho| produced.two(rho));
    let err = (slope + 4.0).abs();
    Outcome::new(
        err <= 1e-6 && elapsed < 1.0,
        format!("slope {slope:.12} (|err| {err:.1e}), {elapsed:.3} s"),
    )
}

fn closed_form_consistency(produced: &mut Produced) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for n in [1, 2, 5, 10] {
        let state = TwoModeState::noon(n).unwrap();
        for (d, phi) in [(0.0, 0.0), (0.3, 1.1), (1.7, -2.5), (4.0, 0.4)] {
            let depths = ChannelDepths {
                depth_a: d,
                phase_a: phi,
                depth_b: 0.5 * d,
                phase_b: 0.3 * phi,
            };
            let general = general_output_at(&state, &depths);
            let closed = noon_output_at(n, &depths).unwrap();
            worst = worst.max(max_abs_diff(general.elements(), closed.elements()));
            produced.two(&general);
            produced.two(&closed);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-12 && elapsed < 10.0,
        format!("max diff {worst:.2e}, {elapsed:.2} s"),
    )
}

fn form_equality(produced: &mut Produced) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let n = rng.random_range(1..=6);
        let spec = EnsembleSpec::new(
            Distribution::SphereUniform,
            PhotonCutoff::new(n).unwrap(),
            1,
            1000 + i,
        )
        .unwrap();
        let state = spec.sample_state(0).unwrap();
        let depths = ChannelDepths {
            depth_a: rng.random_range(0.0..=3.0),
            phase_a: rng.random_range(-3.0..3.0),
            depth_b: rng.random_range(0.0..=3.0),
            phase_b: rng.random_range(-3.0..3.0),
        };
        let b = general_output_at(&state, &depths);
        let a = general_output_form_a_at(&state, &depths);
        worst = worst.max(max_abs_diff(a.elements(), b.elements()));
        produced.two(&a);
        produced.two(&b);
    }
    Outcome::new(
        worst <= 1e-12,
        format!("max diff {worst:.2e} over 100 states"),
    )
}

fn oracle_convergence(produced: &mut Produced) -> Outcome {
    let start = Instant::now();
    let n = 4;
    let cutoff = PhotonCutoff::new(n).unwrap();
    let x = 1.0 / MU;
    let profile = MediumProfile::constant(MU, ETA).unwrap();
    let continuum = single_mode_output(cutoff, n, &profile, x).unwrap();
    produced.single(&continuum);
    let ms = [10usize, 100, 1000, 10_000];
    let mut errors = Vec::new();
    for &m in &ms {
        let chain = SplitterChain::for_medium(m, MU, ETA, x).unwrap();
        let finite = finite_m_single_mode_output(cutoff, n, &chain).unwrap();
        errors.push(max_abs_diff(finite.elements(), continuum.elements()));
        produced.single(&finite);
    }
    let lx: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let listed: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    let slope = fit_slope(&lx, &ly);

    let spec = EnsembleSpec::new(
        Distribution::SphereUniform,
        PhotonCutoff::new(2).unwrap(),
        1,
        77,
    )
    .unwrap();
    let state = spec.sample_state(0).unwrap();
    let chain = SplitterChain::for_medium(5000, MU, ETA, x).unwrap();
    let kraus = finite_m_two_mode_output(&state, &chain, &chain);
    let exact = general_output_at(&state, &ChannelDepths::uniform(MU * x, ETA * x));
    let two_err = max_abs_diff(kraus.elements(), exact.elements());
    produced.two(&kraus);
    produced.two(&exact);
    let elapsed = start.elapsed().as_secs_f64();

    Outcome::new(
        (slope + 1.0).abs() <= 0.1 && two_err <= 5e-4 && elapsed < 60.0,
        format!(
            "log-log slope {slope:.4}, errors [{}], two-mode M=5000 err {two_err:.2e}, {elapsed:.2} s",
            listed.join(", ")
        ),
    )
}

fn channel_invariants(produced: &Produced) -> Outcome {
    let mut worst = InvariantReport {
        trace_error: 0.0,
        hermiticity_defect: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    for r in &produced.0 {
        worst.trace_error = worst.trace_error.max(r.trace_error);
        worst.hermiticity_defect = worst.hermiticity_defect.max(r.hermiticity_defect);
        worst.min_eigenvalue = worst.min_eigenvalue.min(r.min_eigenvalue);
    }
    Outcome::new(
        !produced.0.is_empty() && worst.holds(1e-10, 1e-12, 1e-10),
        format!(
            "{} matrices: max trace err {:.1e}, max herm defect {:.1e}, min eigenvalue {:.1e}",
            produced.0.len(),
            worst.trace_error,
            worst.hermiticity_defect,
            worst.min_eigenvalue
        ),
    )
}

fn classical_recovery() -> Outcome {
    let n = 10;
    let cutoff = PhotonCutoff::new(n).unwrap();
    let profile = MediumProfile::constant(MU, ETA).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let x = 30.0 * i as f64 / 49.0;
        let rho = single_mode_output(cutoff, n, &profile, x).unwrap();
        let want = n as f64 * (-MU * x).exp();
        worst = worst.max((rho.mean_photon_number() - want).abs());
    }
    Outcome::new(
        worst <= 1e-12,
        format!("max |<n> - N e^-mu x| = {worst:.2e}"),
    )
}

/// Cyclic Jacobi rotations on a real symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                let (upper, lower) = a.split_at_mut(q);
                for (apk, aqk) in upper[p].iter_mut().zip(lower[0].iter_mut()) {
                    let (x, y) = (*apk, *aqk);
                    *apk = c * x - s * y;
                    *aqk = s * x + c * y;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn negativity_benchmarks() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    for n in [1, 5, 10] {
        let neg = negativity(&TwoModeState::noon(n).unwrap().density_matrix()).unwrap();
        pass &= (neg - 0.5).abs() <= 1e-10;
        notes.push(format!("N={n}: {neg:.12}"));
    }

    let pt = partial_transpose_a(&TwoModeState::noon(1).unwrap().density_matrix());
    let imag = pt.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let real: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| pt[(i, j)].re).collect())
        .collect();
    let independent: f64 = jacobi_eigenvalues(real)
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum();
    pass &= imag == 0.0 && (independent - 0.5).abs() <= 1e-10;
    notes.push(format!("Jacobi N=1: {independent:.12}"));

    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let mut worst_product = 0.0_f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=4);
        let cut = PhotonCutoff::new(n).unwrap();
        let mut draw = || {
            DVector::from_fn(n + 1, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let a = SingleModeState::new(cut, draw()).unwrap();
        let b = SingleModeState::new(cut, draw()).unwrap();
        let rho = TwoModeState::product(&a, &b).unwrap().density_matrix();
        worst_product = worst_product.max(negativity(&rho).unwrap());
    }
    pass &= worst_product <= 1e-10;
    notes.push(format!("product max {worst_product:.1e}"));

    let mut worst_deep =
        negativity(&noon_output_at(10, &ChannelDepths::uniform(50.0, 1.0)).unwrap()).unwrap();
    let spec = EnsembleSpec::new(
        Distribution::SphereUniform,
        PhotonCutoff::new(6).unwrap(),
        5,
        3,
    )
    .unwrap();
    for state in spec.sample_all().unwrap() {
        let rho = general_output_at(&state, &ChannelDepths::uniform(50.0, 2.0));
        worst_deep = worst_deep.max(negativity(&rho).unwrap());
    }
    pass &= worst_deep <= 1e-8;
    notes.push(format!("depth 50 max {worst_deep:.1e}"));

    Outcome::new(pass, notes.join(", "))
}

fn plateau_property() -> Outcome {
    let start = Instant::now();
    let channels = ChannelPair::constant(MU, ETA, MU, ETA).unwrap();
    let sweep = SweepSpec::new(0.0, 30.0, 31, channels).unwrap();
    let spec = EnsembleSpec::new(
        Distribution::SphereUniform,
        PhotonCutoff::new(10).unwrap(),
        50,
        1,
    )
    .unwrap();
    let ensemble = run_sweep(&spec, &sweep).unwrap();
    let noon = run_sweep_states(&[TwoModeState::noon(10).unwrap()], &sweep).unwrap();
    let xs = ensemble.distances();
    let opts = PlateauOptions::default();
    let ens = detect_plateau(&xs, &ensemble.median_coherence(), opts).unwrap();
    let noon_series: Vec<f64> = noon.records.iter().map(|r| r.coherence_power).collect();
    let reference = detect_plateau(&xs, &noon_series, opts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    Outcome::new(
        ens.plateau_flag
            && !reference.plateau_flag
            && ens.tail_slope.is_finite()
            && ens.tail_slope.abs() <= reference.tail_slope.abs()
            && elapsed < 600.0,
        format!(
            "ensemble mid {:.4} tail {:.4} flag {}; N00N mid {:.4} tail {:.4} flag {}; {elapsed:.1} s",
            ens.mid_slope,
            ens.tail_slope,
            ens.plateau_flag,
            reference.mid_slope,
            reference.tail_slope,
            reference.plateau_flag
        ),
    )
}

fn relative_agreement(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn reproducibility() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut configs = Vec::new();
    for kind in [
        ExperimentKind::NoonDecay,
        ExperimentKind::EnsembleCoherence,
        ExperimentKind::EnsembleNegativity,
        ExperimentKind::OracleConvergence,
        ExperimentKind::SingleMode,
    ] {
        let mut c = ExperimentConfig::new(kind);
        c.n = c.n.min(4);
        c.count = 6;
        c.steps = c.steps.min(12);
        c.m_values = vec![10, 100, 1000];
        c.seed = 31;
        configs.push(c);
    }
    for config in configs {
        let first = run_experiment(&config).unwrap();
        // re-run from the echoed configuration, as a user would
        let echoed: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&first.metadata.config).unwrap()).unwrap();
        let second = run_experiment(&echoed).unwrap();
        let same = first.records == second.records
            && first.aggregates == second.aggregates
            && first.summary == second.summary;
        pass &= same;

        let mut csv = Vec::new();
        first.write(OutputFormat::Csv, &mut csv).unwrap();
        let mut csv_note = "";
        if let Records::Metrics(rows) = &first.records {
            let parsed = read_metrics_csv(csv.as_slice()).unwrap();
            let ok = parsed.len() == rows.len()
                && parsed.iter().zip(rows).all(|(p, r)| {
                    p.state_index == r.state_index
                        && relative_agreement(p.x, r.x)
                        && relative_agreement(p.coherence_power, r.coherence_power)
                        && relative_agreement(p.negativity, r.negativity)
                        && relative_agreement(p.trace_error, r.trace_error)
                        && relative_agreement(p.min_eigenvalue, r.min_eigenvalue)
                        && relative_agreement(p.purity, r.purity)
                });
            pass &= ok;
            csv_note = if ok { ", csv ok" } else { ", csv MISMATCH" };
        }
        let mut json = Vec::new();
        first.write(OutputFormat::Json, &mut json).unwrap();
        let back: beerloss::experiment::ExperimentOutput = serde_json::from_slice(&json).unwrap();
        let json_ok = back == first;
        pass &= json_ok;
        notes.push(format!(
            "{}: rerun {}, json {}{csv_note}",
            config.experiment.name(),
            if same { "identical" } else { "DIFFERS" },
            if json_ok { "exact" } else { "MISMATCH" }
        ));
    }
    Outcome::new(pass, notes.join(", "))
}

fn unitarity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut worst_u = 0.0_f64;
    for m in [1usize, 2, 3, 8, 32, 64] {
        for _ in 0..20 {
            let mag: f64 = rng.random_range(0.0..1.0);
            let phase: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let t = Complex64::from_polar(mag, phase);
            let l =
                Complex64::new(0.0, sign) * Complex64::from_polar((1.0 - mag * mag).sqrt(), phase);
            let chain = SplitterChain::new(m, t, l).unwrap();
            worst_u = worst_u.max(TransferMatrix::build(&chain).unitarity_defect());
        }
    }
    let mut worst_k = 0.0_f64;
    for n in 0..=10 {
        let cut = PhotonCutoff::new(n).unwrap();
        for _ in 0..10 {
            let t = Complex64::from_polar(rng.random_range(0.0..=1.0), rng.random_range(-3.0..3.0));
            worst_k = worst_k.max(
                KrausChannel::single_splitter(cut, t)
                    .unwrap()
                    .completeness_defect(),
            );
        }
    }
    Outcome::new(
        worst_u <= 1e-10 && worst_k <= 1e-12,
        format!("max |U^dag U - I| {worst_u:.1e}, max Kraus completeness defect {worst_k:.1e}"),
    )
}

fn main() -> ExitCode {
    let mut produced = Produced::default();
    let results = vec![
        (1, "N00N decay slope", noon_decay(&mut produced)),
        (
            2,
            "closed-form consistency",
            closed_form_consistency(&mut produced),
        ),
        (3, "form equality", form_equality(&mut produced)),
        (4, "oracle convergence", oracle_convergence(&mut produced)),
        (5, "channel invariants", channel_invariants(&produced)),
        (6, "classical recovery", classical_recovery()),
        (7, "negativity benchmarks", negativity_benchmarks()),
        (8, "plateau property", plateau_property()),
        (9, "reproducibility", reproducibility()),
        (10, "unitarity", unitarity()),
    ];

    let mut failed = 0;
    for (i, name, o) in &results {
        println!(
            "criterion {i:>2} {:<4} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
