//! Randomized invariants across modules.

use std::sync::Arc;

use kac_core::conditioned::{ConditionedFamily, FamilyConfig};
use kac_core::inequalities::{
    envelope_value, gamma_ratio_sweep, inequality_exponent, optimized_constant, split_coefficient, GeneratorSource,
    SweepSup,
};
use kac_core::kac_process::{generator_matrix_small_n, simulate, wasserstein1_samples, SimulationConfig};
use kac_core::limit::{CollisionOperator, PDE_GRID};
use kac_core::normalization::{build_ladder, default_u_max};
use kac_core::{gaussian_on, mixture, mixture_on, uniform_sphere_sample, MixtureSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_decreases_in_gamma_and_k(gamma in 0.0f64..0.99, dg in 0.001f64..0.5, beta in 0.2f64..3.0, extra in 0.05f64..5.0, dk in 0.01f64..3.0) {
        let k = 1.0 + 1.0 / beta + extra;
        let g2 = (gamma + dg).min(1.0);
        let a = inequality_exponent(gamma, beta, k).unwrap();
        prop_assert!(a > 1.0);
        prop_assert!(inequality_exponent(g2, beta, k).unwrap() < a);
        prop_assert!(inequality_exponent(gamma, beta, k + dk).unwrap() < a);
    }

    #[test]
    fn optimized_constant_is_the_minimum_over_lambda(
        gamma in 0.0f64..0.9,
        beta in 0.3f64..2.0,
        extra in 0.2f64..3.0,
        c_beta in 0.01f64..2.0,
        m_2k in 1.0f64..100.0,
        x in 1e-6f64..1.0,
    ) {
        // inf_λ λ^{1−γ} x + B λ^{1−p} = K x^{(p−1)/(p−γ)}
        let k = 1.0 + 1.0 / beta + extra;
        let sup = SweepSup { c_beta, m_2k };
        let p = k * beta / (1.0 + beta);
        let b = split_coefficient(beta, k, sup);
        let lam = ((p - 1.0) * b / ((1.0 - gamma) * x)).powf(1.0 / (p - gamma));
        let value = |l: f64| l.powf(1.0 - gamma) * x + b * l.powf(1.0 - p);
        let best = value(lam);
        prop_assert!(value(lam * 1.01) >= best && value(lam / 1.01) >= best);
        let closed = optimized_constant(gamma, beta, k, sup) * x.powf((p - 1.0) / (p - gamma));
        prop_assert!((closed - best).abs() <= 1e-9 * best, "{closed} vs {best}");
    }

    #[test]
    fn envelope_is_defined_iff_the_denominator_is_positive(ln in 0.0f64..1.0, lm in 0.0f64..1.0, m in 0.1f64..10.0) {
        let e = envelope_value(1.0, ln, lm, m);
        prop_assert_eq!(e.is_some(), (2.0 * std::f64::consts::PI).sqrt() * ln < 1.0);
        if let Some(e) = e {
            prop_assert!(e > 0.0);
        }
    }

    #[test]
    fn galerkin_spectra_are_nested_and_nonnegative(n in 3usize..=6, degree in 2usize..=5) {
        // degree-d polynomials form an invariant subspace of degree-(d+1) ones
        let low = generator_matrix_small_n(n, degree).unwrap();
        let high = generator_matrix_small_n(n, degree + 1).unwrap();
        prop_assert!(low[0].abs() < 1e-9 && low.iter().all(|&x| x > -1e-9));
        prop_assert!(high.len() > low.len());
        for x in &low {
            prop_assert!(high.iter().any(|y| (x - y).abs() < 1e-7 * (1.0 + x.abs())), "{x} missing");
        }
    }

    #[test]
    fn simulation_conserves_energy(n in 2usize..200, gamma in 0.0f64..1.0, seed in 0u64..1_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = uniform_sphere_sample(n, &mut rng).unwrap();
        let stats = simulate(&start, &SimulationConfig::new(n, gamma, 2.0, seed), &mut rng).unwrap();
        let e: f64 = stats.final_state.velocities().iter().map(|v| v * v).sum();
        prop_assert!((e - n as f64).abs() < 1e-9 * n as f64);
        for obs in &stats.observations {
            prop_assert!((obs.energy - n as f64).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn w1_between_samples_is_a_metric(
        a in proptest::collection::vec(-5.0f64..5.0, 1..60),
        b in proptest::collection::vec(-5.0f64..5.0, 1..60),
        shift in -2.0f64..2.0,
    ) {
        let ab = wasserstein1_samples(&a, &b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - wasserstein1_samples(&b, &a)).abs() < 1e-12);
        prop_assert!(wasserstein1_samples(&a, &a) < 1e-12);
        let moved: Vec<f64> = a.iter().map(|x| x + shift).collect();
        prop_assert!((wasserstein1_samples(&a, &moved) - shift.abs()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn collision_operator_conserves_mass_and_energy(delta in 0.25f64..0.75, gamma in 0.0f64..1.0) {
        let f = mixture_on(MixtureSpec::new(delta).unwrap(), PDE_GRID).unwrap();
        let q = CollisionOperator::new(PDE_GRID, gamma).unwrap().apply(f.values()).unwrap();
        let w = f.quadrature_weights();
        let mass: f64 = q.iter().zip(w).map(|(x, w)| x * w).sum();
        let energy: f64 = q.iter().zip(w).zip(f.nodes()).map(|((x, w), v)| x * w * v * v).sum();
        prop_assert!(mass.abs() < 1e-8, "mass {mass}");
        prop_assert!(energy.abs() < 1e-6, "energy {energy}");
        let n = q.len();
        for i in 0..n / 2 {
            prop_assert_eq!(q[i], q[n - 1 - i]);
        }
    }

    #[test]
    fn maxwellians_are_fixed_points(a in 0.6f64..1.6) {
        let f = gaussian_on(a, PDE_GRID).unwrap();
        let q = CollisionOperator::new(PDE_GRID, 0.5).unwrap().apply(f.values()).unwrap();
        let peak = f.sup();
        let worst = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(worst < 1e-6 * peak.max(1.0), "{worst}");
    }

    #[test]
    fn second_marginal_is_symmetric(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = mixture(MixtureSpec::new(0.25).unwrap()).unwrap();
        let fam = ConditionedFamily::new(&f, 24, FamilyConfig::default()).unwrap();
        let x = fam.marginal(&[a, b]).unwrap();
        let y = fam.marginal(&[b, a]).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn villani_bound_holds_for_random_mixtures(delta in 0.05f64..0.9) {
        let f = mixture(MixtureSpec::new(delta).unwrap()).unwrap();
        let rows = gamma_ratio_sweep(&GeneratorSource::Fixed(f), 0.0, &[8, 16, 32], FamilyConfig::default()).unwrap();
        for r in rows {
            prop_assert_eq!(r.villani_holds, Some(true), "N = {} Γ̂ = {}", r.n, r.gamma_hat);
        }
    }

    #[test]
    fn ladder_log_ratios_are_consistent(delta in 0.1f64..0.9, m in 3usize..30) {
        // log Z_m(u)/Z_n(w) = log Z_m(u) − log Z_n(w)
        let f = mixture(MixtureSpec::new(delta).unwrap()).unwrap();
        let ladder = Arc::new(build_ladder(&f, 40, default_u_max(40, f.sigma2())).unwrap());
        let (u, w) = (0.8 * m as f64, 40.0);
        let direct = ladder.z_value(m, u).unwrap() - ladder.z_value(40, w).unwrap();
        let ratio = ladder.log_z_ratio(m, u, 40, w).unwrap();
        prop_assert!((direct - ratio).abs() < 1e-9 * (1.0 + direct.abs()));
    }
}
