mod common;

use mixpred_core::adversary::dirac_class;
use mixpred_core::adversary::{mass_profile, theta_curve, u_set};
use mixpred_core::loss::{cumulative_kl, restricted_kl};
use mixpred_core::prior::{build_construction, cover_cells, high_ratio_set, mix_with_uniform, partition_thresholds};
use mixpred_core::{Alphabet, DiscretePrior, Measure, MeasureSpec, ModelClass, Symbol, DEFAULT_BUDGET};
use proptest::prelude::*;

fn prob() -> impl Strategy<Value = f64> {
    (1u32..100).prop_map(|v| v as f64 / 100.0)
}

fn distribution(size: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..20, size).prop_map(|v| {
        let total: u32 = v.iter().sum();
        v.iter().map(|&x| x as f64 / total as f64).collect()
    })
}

fn binary_measure() -> impl Strategy<Value = Measure> {
    let leaf = prop_oneof![
        prob().prop_map(|p| Measure::bernoulli(p).unwrap()),
        (prob(), prob()).prop_map(|(a, b)| Measure::markov1(a, b).unwrap()),
        (prob(), prob(), 2usize..6).prop_map(|(a, b, t)| {
            Measure::from_spec(
                &serde_json::from_value::<MeasureSpec>(serde_json::json!({
                    "kind": "change_point",
                    "segments": [{"start": 1, "probs": [1.0 - a, a]}, {"start": t, "probs": [1.0 - b, b]}]
                }))
                .unwrap(),
                Alphabet::BINARY,
            )
            .unwrap()
        }),
        prop::collection::vec(0u8..2, 0..5).prop_map(|p| Measure::dirac(Alphabet::BINARY, &p, 0).unwrap()),
    ];
    prop_oneof![
        3 => leaf.clone(),
        1 => (leaf.clone(), leaf, 1u32..10).prop_map(|(a, b, w)| {
            let w = w as f64 / 10.0;
            Measure::mixture(vec![(w, a), (1.0 - w, b)]).unwrap()
        }),
    ]
}

fn ternary_measure() -> impl Strategy<Value = Measure> {
    let t = Alphabet::new(3).unwrap();
    prop_oneof![
        distribution(3).prop_map(move |p| Measure::iid(t, &p).unwrap()),
        prop::collection::vec(distribution(3), 3)
            .prop_map(move |rows| { Measure::from_spec(&MeasureSpec::Markov { order: 1, probs: rows }, t).unwrap() }),
    ]
}

fn any_measure() -> impl Strategy<Value = Measure> {
    prop_oneof![binary_measure(), ternary_measure()]
}

fn string(size: usize, max: usize) -> impl Strategy<Value = Vec<Symbol>> {
    prop::collection::vec(0..size as Symbol, 0..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_are_consistent((m, x) in any_measure().prop_flat_map(|m| {
        let size = m.alphabet().size();
        (Just(m), string(size, 8))
    })) {
        let parent = m.marginal(&x).unwrap().prob();
        let children: f64 = (0..m.alphabet().size())
            .map(|a| {
                let mut y = x.clone();
                y.push(a as Symbol);
                m.marginal(&y).unwrap().prob()
            })
            .sum();
        prop_assert!((parent - children).abs() < 1e-12);
        prop_assert_eq!(m.marginal(&[]).unwrap().prob(), 1.0);
    }

    #[test]
    fn chain_rule_holds((m, x) in any_measure().prop_flat_map(|m| {
        let size = m.alphabet().size();
        (Just(m), string(size, 10))
    })) {
        let marginal = m.marginal(&x).unwrap().log2();
        let mut sum = 0.0;
        let mut defined = true;
        for t in 0..x.len() {
            match m.conditional(&x[..t], x[t]) {
                Ok(c) => sum += c.log2(),
                Err(_) => { defined = false; break; }
            }
        }
        if defined && marginal.is_finite() {
            prop_assert!((marginal - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn full_horizon_normalization(m in any_measure(), n in 1usize..7) {
        let total: f64 = common::all_strings(m.alphabet().size(), n)
            .iter()
            .map(|x| m.marginal(x).unwrap().prob())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn losses_are_nonnegative_and_monotone(mu in binary_measure(), rho in binary_measure(), n in 1usize..9) {
        let a = cumulative_kl(&mu, &rho, n).unwrap().bits();
        let b = cumulative_kl(&mu, &rho, n + 1).unwrap().bits();
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-12);
        let steps = common::kl_by_steps(&mu, &rho, n);
        if a.is_finite() {
            prop_assert!((a - steps).abs() < 1e-9);
        } else {
            prop_assert_eq!(steps, f64::INFINITY);
        }
    }

    #[test]
    fn restricted_losses_add_up(
        mu in binary_measure(),
        rho in prob().prop_map(|p| Measure::bernoulli(p).unwrap()),
        n in 1usize..7,
        mask in any::<u64>(),
    ) {
        let strings = common::all_strings(2, n);
        let (inside, outside): (Vec<_>, Vec<_>) =
            strings.into_iter().enumerate().partition(|(r, _)| mask >> (r % 64) & 1 == 1);
        let inside: Vec<_> = inside.into_iter().map(|(_, x)| x).collect();
        let outside: Vec<_> = outside.into_iter().map(|(_, x)| x).collect();
        let total = cumulative_kl(&mu, &rho, n).unwrap().bits();
        let split = restricted_kl(&mu, &rho, n, &inside).unwrap() + restricted_kl(&mu, &rho, n, &outside).unwrap();
        prop_assert!((total - split).abs() < 1e-9);
    }

    #[test]
    fn mixing_bounds_reference_code_length(rho in binary_measure(), n in 1usize..9) {
        let rp = mix_with_uniform(&rho);
        for x in common::all_strings(2, n) {
            prop_assert!(-rp.marginal(&x).unwrap().log2() <= n as f64 + 1.0 + 1e-12);
        }
    }

    #[test]
    fn cells_partition_high_ratio_set(mu in binary_measure(), rho in binary_measure(), n in 2usize..8, k in 2usize..6) {
        let rp = mix_with_uniform(&rho);
        let t = high_ratio_set(&mu, &rp, n, DEFAULT_BUDGET).unwrap();
        let cells = cover_cells(&mu, &rp, n, k, DEFAULT_BUDGET).unwrap();
        let mut union: Vec<usize> = cells.iter().flat_map(|c| c.strings.ranks().to_vec()).collect();
        let count = union.len();
        union.sort_unstable();
        union.dedup();
        prop_assert_eq!(count, union.len());
        prop_assert_eq!(union.as_slice(), t.ranks());
        let partition = partition_thresholds(n, k, 1.0).unwrap();
        for c in &cells {
            let (lo, hi) = partition.interval(c.i);
            for x in c.strings.strings() {
                let r = (mu.marginal(&x).unwrap().log2() - rp.marginal(&x).unwrap().log2()) / n as f64;
                prop_assert!(r >= lo - 1e-9 && r <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn prior_dump_round_trips(ps in prop::collection::vec(prob(), 1..5), n in 3usize..6) {
        let mut ps = ps;
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let measures = ps.iter().map(|&p| Measure::bernoulli(p).unwrap()).collect();
        let class = ModelClass::new(Alphabet::BINARY, "grid", measures).unwrap();
        let c = build_construction(&class, &Measure::bernoulli(0.5).unwrap(), n, DEFAULT_BUDGET).unwrap();
        let loaded = DiscretePrior::from_dump_json(&c.prior.to_dump_json(), &class).unwrap();
        prop_assert_eq!(loaded.components(), c.prior.components());
        let (a, b) = (loaded.measure().unwrap(), c.prior.measure().unwrap());
        for x in common::all_strings(2, n) {
            prop_assert_eq!(a.marginal(&x).unwrap().log2().to_bits(), b.marginal(&x).unwrap().log2().to_bits());
        }
    }

    #[test]
    fn greedy_gains_do_not_increase(ps in prop::collection::vec(prob(), 1..6), n in 2usize..8) {
        let mut ps = ps;
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let measures = ps.iter().map(|&p| Measure::bernoulli(p).unwrap()).collect();
        let class = ModelClass::new(Alphabet::BINARY, "grid", measures).unwrap();
        let c = build_construction(&class, &Measure::bernoulli(0.3).unwrap(), n.max(3), DEFAULT_BUDGET).unwrap();
        for h in &c.horizons {
            for cover in &h.covers {
                let gains = cover.gains();
                prop_assert!(gains.windows(2).all(|g| g[0] >= g[1]));
                prop_assert!(gains.iter().all(|&g| g > 0.0));
            }
        }
    }

    #[test]
    fn lower_bound_invariants(raw in prop::collection::vec(0u32..10, 32)) {
        let class = dirac_class(5).unwrap();
        let total: u32 = raw.iter().sum();
        prop_assume!(total > 0);
        let weights: Vec<f64> = raw.iter().map(|&v| v as f64 / total as f64).collect();
        let prior = DiscretePrior::from_member_weights(class, &weights).unwrap();
        let profile = mass_profile(&prior).unwrap();
        prop_assert!(profile.w.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(profile.w.iter().all(|&w| (0.0..=1.0 + 1e-12).contains(&w)));
        prop_assert!((profile.w(6) - 1.0).abs() < 1e-12);
        let nu = prior.measure().unwrap();
        for wit in theta_curve(&prior, 5).unwrap() {
            let n = wit.n;
            let u = u_set(n);
            prop_assert_eq!(u.len(), 1 << n);
            let min = u.iter().map(|x| nu.marginal(x).unwrap().prob()).fold(f64::INFINITY, f64::min);
            prop_assert!(min <= 0.5f64.powi(n as i32) * (1.0 - profile.w(n)) + 1e-15);
            prop_assert!(wit.actual_regret_bits >= wit.guarantee_bits - 1e-9);
            // Members with support length ≤ n put no mass on Uₙ.
            for (m, mu) in prior.class().measures().iter().enumerate() {
                if mu.as_dirac().unwrap().0.len() <= n {
                    let mass: f64 = u.iter().map(|x| mu.marginal(x).unwrap().prob()).sum();
                    prop_assert_eq!(mass, 0.0, "member {}", m);
                }
            }
        }
    }
}
