use proptest::prelude::*;

use rotsym_core::analysis::{fidelity, parity, symmetry_order};
use rotsym_core::analytic::{coefficient_a, final_state, success_probability, OutcomePattern};
use rotsym_core::channels::{apply_loss, DetectorModel, LossParam};
use rotsym_core::fock::{beamsplitter, DensityOperator, PureState};
use rotsym_core::linalg::CMatrix;
use rotsym_core::planner::{mux_for_tolerance, mux_probability};
use rotsym_core::squeeze::SqueezeParam;
use rotsym_core::C64;

fn density(d: usize, seed: &[f64]) -> DensityOperator {
    let mut a = CMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let k = 2 * (i * d + j);
            a[(i, j)] = C64::new(seed[k % seed.len()], seed[(k + 1) % seed.len()]);
        }
    }
    // a small identity admixture keeps the state full rank
    let rho = a.matmul(&a.adjoint()).add(&CMatrix::identity(d).scale(C64::new(0.05, 0.0)));
    let tr = rho.trace().re;
    DensityOperator::single_mode(rho.scale(C64::new(1.0 / tr, 0.0))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn beamsplitter_is_unitary(theta in -3.2f64..3.2, di in 1usize..9, dj in 1usize..9) {
        let u = beamsplitter(di, dj, theta);
        // blocks with more photons than the smaller mode holds are clipped contractions
        prop_assert!(u.unitarity_defect(di.min(dj) - 1) < 1e-10);
    }

    #[test]
    fn coefficients_match_float_sum(n1 in 0usize..7, n2 in 0usize..7, kf in 0.0f64..1.0) {
        let n = n1 + n2;
        let k = ((n as f64 + 1.0) * kf) as usize;
        let k = k.min(n);
        let exact = coefficient_a(n1, n2, k).unwrap().to_f64();
        let f = |m: usize| (1..=m).fold(1.0, |a, j| a * j as f64);
        let mut s = 0.0;
        for i in n1.saturating_sub(k)..=n1.min(n - k) {
            let sign = if (i + k - n1) % 2 == 0 { 1.0 } else { -1.0 };
            s += sign / (f(i) * f(i + k - n1) * f(n1 - i) * f(n - i - k));
        }
        s *= (f(n1) * f(n2)).sqrt();
        prop_assert!((exact - s).abs() <= 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn loss_composes(g1 in 0.0f64..0.6, g2 in 0.0f64..0.6, seed in prop::collection::vec(-1.0f64..1.0, 16)) {
        let d = 7;
        let rho = density(d, &seed);
        let two = apply_loss(&apply_loss(&rho, &LossParam::complete(g1, d).unwrap()).unwrap(), &LossParam::complete(g2, d).unwrap()).unwrap();
        let one = apply_loss(&rho, &LossParam::complete(g1 + g2, d).unwrap()).unwrap();
        prop_assert!(two.matrix().max_abs_diff(one.matrix()) < 1e-12);
        prop_assert!((one.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn povm_sums_to_identity(eta in 0.0f64..=1.0, m in 0usize..40) {
        let det = DetectorModel::new(eta, 40).unwrap();
        let s: f64 = (0..=40).map(|n| det.click_probability(n, m)).sum();
        prop_assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fidelity_is_bounded_and_symmetric(a in prop::collection::vec(-1.0f64..1.0, 12), b in prop::collection::vec(-1.0f64..1.0, 12)) {
        let (x, y) = (density(4, &a), density(4, &b));
        let f = fidelity(&x, &y).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - fidelity(&y, &x).unwrap()).abs() < 1e-8);
        prop_assert!((fidelity(&x, &x).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8)) {
        let amps = |v: &[f64]| (0..4).map(|i| C64::new(v[2 * i], v[2 * i + 1])).collect::<Vec<_>>();
        prop_assume!(a.iter().any(|x| x.abs() > 0.1) && b.iter().any(|x| x.abs() > 0.1));
        let mut x = PureState::from_amplitudes(vec![4], amps(&a)).unwrap();
        let mut y = PureState::from_amplitudes(vec![4], amps(&b)).unwrap();
        x.normalize().unwrap();
        y.normalize().unwrap();
        let overlap = x.inner(&y).unwrap().norm_sqr();
        // rank-one inputs: square roots of rounding-level eigenvalues limit this to ~sqrt(eps)
        prop_assert!((fidelity(&x.to_density(), &y.to_density()).unwrap() - overlap).abs() < 1e-6);
    }

    #[test]
    fn outputs_have_definite_parity(n1 in 0usize..4, n2 in 0usize..4, n3 in 0usize..7, r in 0.1f64..1.3, phi in 0.0f64..6.2) {
        let o = OutcomePattern::new(n1, n2, n3);
        let spec = final_state(o, SqueezeParam::new(r, phi).unwrap()).unwrap();
        let rho = spec.to_state(spec.max_index() + 1).unwrap().to_density();
        let expected = if (n1 + n2 + n3) % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(parity(&rho), Some(expected));
        if n1 == n2 {
            prop_assert!(symmetry_order(&rho).is_some_and(|k| k % 4 == 0));
        }
    }

    #[test]
    fn probability_is_phase_independent(r in 0.1f64..1.3, phi in 0.0f64..6.2, r2 in 0.01f64..0.5, n3 in 0usize..6) {
        let theta = r2.sqrt().asin();
        let o = OutcomePattern::new(1, 2, n3);
        let a = success_probability(o, SqueezeParam::new(r, 0.0).unwrap(), theta).unwrap();
        let b = success_probability(o, SqueezeParam::new(r, phi).unwrap(), theta).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
        prop_assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn mux_ceiling(p in 1e-4f64..0.9, delta in 1e-4f64..0.5) {
        let plan = mux_for_tolerance(p, delta).unwrap();
        prop_assert!(plan.p_mux >= 1.0 - delta - 1e-12);
        if plan.n_mux > 1 {
            prop_assert!(mux_probability(p, plan.n_mux - 1).unwrap() < 1.0 - delta + 1e-12);
        }
    }

    #[test]
    fn normalised_states_stay_normalised(theta in -1.5f64..1.5, n in 0usize..4, m in 0usize..4) {
        let mut s = PureState::fock_product(&[8, 8], &[n, m]).unwrap();
        s.apply(&beamsplitter(8, 8, theta), &[0, 1]).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
