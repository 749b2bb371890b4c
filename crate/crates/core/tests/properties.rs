use beerloss::ensemble::{Distribution, EnsembleSpec};
use beerloss::fock::{PhotonCutoff, SingleModeState, TwoModeDensityMatrix, TwoModeState};
use beerloss::linalg::{max_abs_diff, CMatrix};
use beerloss::metrics::{
    coherence_power, frobenius_norm_sqr, partial_transpose_a, partial_transpose_spectrum,
};
use beerloss::propagation::{
    general_output_at, general_output_form_a_at, noon_output_at, thinned_populations, ChannelDepths,
};
use beerloss::splitter::KrausChannel;
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn state(n: usize, seed: u64, sphere: bool) -> TwoModeState {
    let dist = if sphere {
        Distribution::SphereUniform
    } else {
        Distribution::UniformBox
    };
    EnsembleSpec::new(dist, PhotonCutoff::new(n).unwrap(), 1, seed)
        .unwrap()
        .sample_state(0)
        .unwrap()
}

fn depths() -> impl Strategy<Value = ChannelDepths> {
    (0.0..4.0f64, -6.0..6.0f64, 0.0..4.0f64, -6.0..6.0f64).prop_map(|(da, pa, db, pb)| {
        ChannelDepths {
            depth_a: da,
            phase_a: pa,
            depth_b: db,
            phase_b: pb,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_is_a_bijection(n in 0usize..=30) {
        let c = PhotonCutoff::new(n).unwrap();
        for i in 0..c.two_mode_dim() {
            let (p, q) = c.unflatten(i);
            prop_assert!(p <= n && q <= n);
            prop_assert_eq!(c.flatten(p, q), i);
        }
    }

    #[test]
    fn output_is_a_density_matrix(n in 1usize..=4, seed: u64, sphere: bool, d in depths()) {
        let rho = general_output_at(&state(n, seed, sphere), &d);
        let inv = rho.invariants().unwrap();
        prop_assert!(inv.holds(1e-12, 1e-12, 1e-12), "{:?}", inv);
    }

    #[test]
    fn both_summation_orders_agree(n in 1usize..=4, seed: u64, d in depths()) {
        let s = state(n, seed, true);
        let a = general_output_form_a_at(&s, &d);
        let b = general_output_at(&s, &d);
        prop_assert!(max_abs_diff(a.elements(), b.elements()) <= 1e-13);
    }

    #[test]
    fn phases_only_rotate_elements(n in 1usize..=4, seed: u64, d in depths(), pa in -6.0..6.0f64, pb in -6.0..6.0f64) {
        let s = state(n, seed, true);
        let x = general_output_at(&s, &d);
        let y = general_output_at(&s, &ChannelDepths { phase_a: pa, phase_b: pb, ..d });
        let c = x.cutoff();
        for i in 0..x.dim() {
            let (p, q) = c.unflatten(i);
            for j in 0..x.dim() {
                let (pp, qq) = c.unflatten(j);
                let rot = Complex64::from_polar(
                    1.0,
                    (p as f64 - pp as f64) * (pa - d.phase_a) + (q as f64 - qq as f64) * (pb - d.phase_b),
                );
                prop_assert!((x.elements()[(i, j)] * rot - y.elements()[(i, j)]).norm() <= 1e-13);
            }
            prop_assert!((x.elements()[(i, i)] - y.elements()[(i, i)]).norm() <= 1e-15);
        }
    }

    #[test]
    fn partial_transpose_identities(n in 1usize..=3, seed: u64, d in depths()) {
        let rho = general_output_at(&state(n, seed, false), &d);
        let pt = partial_transpose_a(&rho);
        let back = partial_transpose_a(&TwoModeDensityMatrix::from_elements(rho.cutoff(), pt).unwrap());
        prop_assert_eq!(&back, rho.elements());

        let diag: f64 = rho.elements().diagonal().iter().map(|z| z.norm_sqr()).sum();
        prop_assert!((coherence_power(&rho) + diag - frobenius_norm_sqr(&rho)).abs() <= 1e-14);

        let ev = partial_transpose_spectrum(&rho).unwrap();
        prop_assert!(ev[0] >= -0.5 - 1e-12 && ev[ev.len() - 1] <= 1.0 + 1e-12, "{:?}", ev);
    }

    #[test]
    fn thinning_preserves_probability(n in 0usize..=30, d in 0.0..60.0f64) {
        let pops = thinned_populations(n, d);
        let total: f64 = pops.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(pops.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn noon_coherence_decreases_with_depth(n in 1usize..=10, d1 in 0.0..5.0f64, dd in 0.001..5.0f64) {
        let a = noon_output_at(n, &ChannelDepths::uniform(d1, 0.3)).unwrap();
        let b = noon_output_at(n, &ChannelDepths::uniform(d1 + dd, 0.3)).unwrap();
        prop_assert!(coherence_power(&b) < coherence_power(&a));
    }

    #[test]
    fn loss_channels_compose(
        n in 1usize..=6,
        t1 in 0.0..=1.0f64, f1 in -3.0..3.0f64,
        t2 in 0.0..=1.0f64, f2 in -3.0..3.0f64,
        re in proptest::collection::vec(-1.0..1.0f64, 7),
        im in proptest::collection::vec(-1.0..1.0f64, 7),
    ) {
        let cut = PhotonCutoff::new(n).unwrap();
        let amps = DVector::from_fn(n + 1, |i, _| Complex64::new(re[i], im[i]));
        prop_assume!(amps.norm() > 1e-3);
        let rho: CMatrix = SingleModeState::new(cut, amps).unwrap().density_matrix().elements().clone();
        let a = Complex64::from_polar(t1, f1);
        let b = Complex64::from_polar(t2, f2);
        let two_steps = KrausChannel::single_splitter(cut, b).unwrap()
            .apply(&KrausChannel::single_splitter(cut, a).unwrap().apply(&rho));
        let one_step = KrausChannel::single_splitter(cut, a * b).unwrap().apply(&rho);
        prop_assert!(max_abs_diff(&two_steps, &one_step) <= 1e-13);
    }
}
