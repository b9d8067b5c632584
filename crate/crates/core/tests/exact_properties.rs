mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tasep::approx::{self, weighted_harmonic_mean};
use tasep::exact::{self, solve_direct, solve_power, SolveOptions, POWER_MAX_ITERS};
use tasep::model::{build_kernel, DEFAULT_STATE_CAP};
use tasep::theorems::{self, Eq23Variant, Precondition, IDENTITY_TOL};
use tasep::{SystemParams, TypeSpec};

fn seeded(max_n: usize, max_k: usize) -> impl Strategy<Value = SystemParams> {
    any::<u64>().prop_map(move |seed| {
        common::random_params(&mut ChaCha8Rng::seed_from_u64(seed), max_n, max_k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn direct_and_power_agree(params in seeded(4, 3)) {
        let kernel = build_kernel(&params, DEFAULT_STATE_CAP).unwrap();
        let direct = solve_direct(&kernel).unwrap();
        let power = solve_power(&kernel, 1e-14, POWER_MAX_ITERS).unwrap();
        prop_assert!(direct.max_abs_diff(&power) <= 1e-10);
    }

    #[test]
    fn flow_estimators_coincide(params in seeded(5, 3)) {
        let r = exact::analyze(&params, &SolveOptions::default()).unwrap();
        prop_assert!(r.observables.flow.spread() <= 1e-10);
        let total: f64 = r.distribution.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(r.distribution.probabilities.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn type_densities_sum_to_cell_density(params in seeded(4, 3)) {
        let r = exact::analyze(&params, &SolveOptions::default()).unwrap();
        for (i, row) in r.observables.density_by_type.iter().enumerate() {
            let s: f64 = row.iter().sum();
            prop_assert!((s - r.observables.density[i]).abs() <= 1e-15);
        }
    }

    #[test]
    fn harmonic_mean_within_bounds(params in seeded(2, 4)) {
        let aux = approx::reduce(&params);
        let hops: Vec<f64> = params.types().iter().map(|t| t.hop_prob).collect();
        let exits: Vec<f64> = params.types().iter().map(|t| t.exit_prob).collect();
        let lo = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        prop_assert!(aux.hop_prob >= lo(&hops) - 1e-15 && aux.hop_prob <= hi(&hops) + 1e-15);
        prop_assert!(aux.exit_prob >= lo(&exits) - 1e-15 && aux.exit_prob <= hi(&exits) + 1e-15);
    }

    #[test]
    fn equal_exit_two_cells_is_exact(seed in any::<u64>(), k in 1usize..5) {
        // shared β for every type
        let params = theorems::special_case_draws_k(seed, 1, k).remove(0);
        let cmp = approx::compare(&params, &SolveOptions::default()).unwrap();
        for i in 0..2 {
            prop_assert!((cmp.exact.density[i] - cmp.approx.density[i]).abs() <= 1e-10);
        }
        prop_assert!((cmp.exact.flow_rate() - cmp.approx.flow_rate()).abs() <= 1e-10);
        let rep = theorems::verify_theorems4_5(&params, Precondition::Enforce).unwrap();
        prop_assert!(rep.all_pass());
    }

    #[test]
    fn single_type_balance_holds(seed in any::<u64>()) {
        let params = common::params_with(&mut ChaCha8Rng::seed_from_u64(seed), 2, 1);
        let rep = theorems::verify_balance_equations(&params, Eq23Variant::Corrected).unwrap();
        prop_assert!(rep.all_pass() && rep.max_residual() <= IDENTITY_TOL);
    }

    #[test]
    fn two_type_balance_holds(seed in any::<u64>()) {
        let params = common::params_with(&mut ChaCha8Rng::seed_from_u64(seed), 2, 2);
        let rep = theorems::verify_balance_equations(&params, Eq23Variant::Corrected).unwrap();
        prop_assert!(rep.all_pass(), "{rep:?}");
    }
}

#[test]
fn harmonic_mean_of_constant_is_constant() {
    assert!((weighted_harmonic_mean([(0.25, 0.4), (0.75, 0.4)]) - 0.4).abs() < 1e-15);
}

#[test]
fn one_cell_birth_death() {
    for &(alpha, beta) in &[(0.3, 0.6), (0.9, 0.1), (0.5, 0.5)] {
        let params = SystemParams::single(1, alpha, 0.7, beta).unwrap();
        let r = exact::analyze(&params, &SolveOptions::default()).unwrap();
        // flow balance α(1−ρ) = βρ
        let rho = alpha / (alpha + beta);
        assert!((r.observables.density[0] - rho).abs() < 1e-12);
    }
}

#[test]
fn power_used_above_dense_cap() {
    let params = SystemParams::new(
        8,
        0.3,
        vec![TypeSpec::new(0.5, 0.6, 0.4), TypeSpec::new(0.5, 0.9, 0.7)],
    )
    .unwrap();
    let r = exact::analyze(&params, &SolveOptions::default()).unwrap();
    assert_eq!(r.distribution.method, exact::SolveMethod::Power);
    assert!(r.observables.flow.spread() <= 1e-10);
}
