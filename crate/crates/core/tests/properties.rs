//! Property tests for the invariants the library promises.

mod common;

use std::f64::consts::LN_2;
use std::path::Path;

use common::*;
use emaml_core::env::{cartpole, fueltank, CartPoleState};
use emaml_core::meta::*;
use emaml_core::nn::{hessian_vector_product, value_and_gradient};
use emaml_core::ppo::*;
use emaml_core::*;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn memory_from(seed: u64, bits: usize, n: usize) -> (ParameterVector, Memory) {
    let collector = random_params(policy_spec(3, &[5], bits), seed);
    let memory = random_memory(&collector, n, 0.15, &mut seed::rng(seed ^ 0xabc));
    (collector, memory)
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn returns_satisfy_the_recurrence(
        rewards in prop::collection::vec(-10.0f64..10.0, 1..60),
        gamma in 0.0f64..=1.0,
        cut in prop::collection::vec(any::<bool>(), 60),
    ) {
        let n = rewards.len();
        let ends: Vec<usize> = (0..n.saturating_sub(1)).filter(|&i| cut[i]).collect();
        let r = discounted_returns(&rewards, &ends, gamma);
        for t in 0..n {
            let next = if t + 1 < n && !ends.contains(&t) { r[t + 1] } else { 0.0 };
            prop_assert_eq!(r[t], rewards[t] + gamma * next);
        }
    }

    #[test]
    fn surrogate_gradient_matches_differences(seed in 0u64..10_000, clip in 0.05f64..0.5) {
        let (collector, memory) = memory_from(seed, 2, 12);
        let policy = random_params(collector.spec().clone(), seed + 1);
        let adv: Vec<f64> = memory.rewards().iter().map(|r| r - 0.5).collect();
        let gain = SurrogateGain::new(collector.spec(), &memory, &adv, clip).unwrap();
        prop_assert!(gradient_check(&gain, policy.values()) < 1e-4);
    }

    #[test]
    fn hessian_vector_products_match_gradient_differences(seed in 0u64..10_000) {
        let (collector, memory) = memory_from(seed, 1, 10);
        let gain = ExpectedReturnGain::new(collector.spec(), &memory, 0.95, ReturnBaseline::Mean).unwrap();
        let x = collector.values();
        let dir: Vec<f64> = random_params(collector.spec().clone(), seed + 7).values().to_vec();
        let hv = hessian_vector_product(x, &gain, &dir).unwrap();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> {
            let p: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            value_and_gradient(&p, &gain).unwrap().1
        };
        let (up, down) = (shifted(h), shifted(-h));
        let numeric: Vec<f64> = up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * h)).collect();
        prop_assert!(relative_error(&hv, &numeric) < 1e-5);
    }

    #[test]
    fn ratios_are_one_on_fresh_rollouts(seed in 0u64..1000, fuel in any::<bool>()) {
        let kind = if fuel { EnvKind::FuelTank } else { EnvKind::CartPole };
        let config = PpoConfig::for_kind(kind);
        let policy = random_params(config.action_spec(kind).unwrap(), seed);
        let mut memory = Memory::new(kind.observation_len());
        Rollout::new(ProcessParams::nominal(kind), seed).collect(&policy, 200, &mut memory).unwrap();
        let adv = vec![1.0; memory.len()];
        let rho = SurrogateGain::new(policy.spec(), &memory, &adv, 0.2).unwrap().ratios(policy.values()).unwrap();
        prop_assert!(rho.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn clipping_never_raises_the_surrogate(seed in 0u64..10_000, clip in 0.0f64..0.5) {
        let (collector, memory) = memory_from(seed, 2, 1);
        let policy = random_params(collector.spec().clone(), seed + 3);
        let adv = [memory.rewards()[0] * 3.0 - 1.0];
        let clipped = SurrogateGain::new(collector.spec(), &memory, &adv, clip).unwrap();
        let open = SurrogateGain::new(collector.spec(), &memory, &adv, 1e12).unwrap();
        let a = value_and_gradient(policy.values(), &clipped).unwrap().0;
        let b = value_and_gradient(policy.values(), &open).unwrap().0;
        prop_assert!(a <= b);
    }

    #[test]
    fn policy_divergence_is_bounded_and_symmetric(seed in 0u64..10_000, bits in 1usize..=6) {
        let (a, memory) = memory_from(seed, bits, 15);
        let b = random_params(a.spec().clone(), seed + 11);
        let ab = js_divergence(&a, &b, &memory).unwrap();
        let ba = js_divergence(&b, &a, &memory).unwrap();
        prop_assert!(ab >= 0.0 && ab <= bits as f64 * LN_2);
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert_eq!(js_divergence(&a, &a, &memory).unwrap(), 0.0);
    }

    #[test]
    fn scores_scale_with_rewards(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let (collector, memory) = memory_from(seed, 1, 25);
        let library = PolicyComplement::new(
            (0..5).map(|i| ComplementEntry::new(random_params(collector.spec().clone(), seed * 10 + i), format!("f{i}"), 0)).collect(),
        ).unwrap();
        let scaled = memory.with_scaled_rewards(c);
        for baseline in [ReturnBaseline::None, ReturnBaseline::Mean] {
            let a = score_complement(&library, &memory, 0.99, baseline).unwrap();
            let b = score_complement(&library, &scaled, 0.99, baseline).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y - c * x).abs() <= 1e-9 * (c * x).abs().max(1.0));
            }
            let ra = rank_and_select(&library, &memory, 3, 0.99, baseline).unwrap();
            let rb = rank_and_select(&library, &scaled, 3, 0.99, baseline).unwrap();
            prop_assert_eq!(ra.selected.labels(), rb.selected.labels());
        }
    }

    #[test]
    fn selection_is_a_descending_idempotent_subset(scores in prop::collection::vec(-50i32..50, 1..9), r_frac in 0.0f64..=1.0) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let n = scores.len();
        let r = ((n as f64) * r_frac).floor() as usize;
        let spec = policy_spec(2, &[2], 1);
        let library = PolicyComplement::new(
            (0..n).map(|i| ComplementEntry::new(random_params(spec.clone(), i as u64), format!("f{i}"), 0)).collect(),
        ).unwrap();
        let first = select_top(&library, &scores, r).unwrap();
        let picked: Vec<f64> = first.order[..r].iter().map(|&i| scores[i]).collect();
        prop_assert!(picked.windows(2).all(|w| w[0] >= w[1]));
        let labels = library.labels();
        prop_assert!(first.selected.labels().iter().all(|l| labels.contains(l)));
        let again = select_top(&first.selected, &picked, r).unwrap();
        prop_assert_eq!(again.selected.labels(), first.selected.labels());
    }

    #[test]
    fn curation_keeps_s_deterministically(seed in 0u64..1000, n in 1usize..7, s_frac in 0.0f64..=1.0) {
        let (collector, memory) = memory_from(seed, 2, 10);
        let s = ((n as f64) * s_frac).floor() as usize;
        let library = PolicyComplement::new(
            (0..n).map(|i| ComplementEntry::new(random_params(collector.spec().clone(), seed * 7 + i as u64), format!("f{i}"), 0)).collect(),
        ).unwrap();
        let a = curate_complement(&library, s, &memory).unwrap();
        let b = curate_complement(&library, s, &memory).unwrap();
        prop_assert_eq!(a.complement.len(), s);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn maml_equals_fomaml_with_identity_jacobians(
        theta in prop::collection::vec(-3.0f64..3.0, 1..20),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = seed::rng(seed);
        let inner: Vec<InnerResult> = (0..rng.gen_range(1..4))
            .map(|_| {
                let g: Vec<f64> = theta.iter().map(|_| rng.gen_range(-5.0..5.0)).collect();
                InnerResult { theta_final: theta.clone(), second_order: Some(g.clone()), test_gradient: g }
            })
            .collect();
        prop_assert_eq!(
            delta_theta(MetaVariant::Maml, &theta, &inner).unwrap(),
            delta_theta(MetaVariant::Fomaml, &theta, &inner).unwrap()
        );
    }

    #[test]
    fn zero_outer_rate_is_an_exact_identity(seed in 0u64..1000, k_in in 0usize..3) {
        let (theta, memory) = memory_from(seed, 2, 20);
        let library = PolicyComplement::new(
            (0..3).map(|i| ComplementEntry::new(random_params(theta.spec().clone(), seed + 100 + i), format!("f{i}"), 0)).collect(),
        ).unwrap();
        for variant in MetaVariant::ALL {
            let mut c = MetaConfig::for_kind(EnvKind::CartPole);
            c.alpha_out = 0.0;
            c.k_in = k_in;
            c.variant = variant;
            c.complement_size = 3;
            let out = emaml_meta_update(&theta, &memory, &library, &c).unwrap();
            prop_assert!(bit_identical(out.params.values(), theta.values()));
        }
    }

    #[test]
    fn adam_ascent_is_descent_on_the_negated_gain(seed in 0u64..1000, steps in 1usize..6) {
        use rand::Rng;
        let spec = policy_spec(3, &[4], 1);
        let start = random_params(spec, seed);
        let mut rng = seed::rng(seed + 1);
        let mut up = start.clone();
        let mut down = start.clone();
        let mut a = AdamState::new(start.len(), 0.01, (0.9, 0.999));
        let mut b = AdamState::new(start.len(), 0.01, (0.9, 0.999));
        for _ in 0..steps {
            let g: Vec<f64> = (0..start.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let neg: Vec<f64> = g.iter().map(|x| -x).collect();
            a.step(&mut up, &g, Direction::Ascent).unwrap();
            b.step(&mut down, &neg, Direction::Descent).unwrap();
        }
        prop_assert!(bit_identical(up.values(), down.values()));
    }

    #[test]
    fn forward_is_pure(seed in 0u64..10_000, x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let p = random_params(policy_spec(4, &[6, 6], 2), seed);
        let before = p.clone();
        let a = p.forward(&x).unwrap();
        let b = p.forward(&x).unwrap();
        prop_assert!(bit_identical(&a, &b));
        prop_assert_eq!(p, before);
    }

    #[test]
    fn parameter_text_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 13)) {
        let spec = NetworkSpec::mlp(2, &[3], 1, OutputHead::LinearScalar).unwrap();
        let p = ParameterVector::from_values(spec, values).unwrap();
        let q = ParameterVector::from_text(&p.to_text(), Path::new("mem")).unwrap();
        prop_assert!(bit_identical(p.values(), q.values()));
    }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn force_reversal_swaps_actions(
        x in -2.4f64..2.4, x_dot in -3.0f64..3.0, theta in -0.2f64..0.2, theta_dot in -3.0f64..3.0,
        m_c in 0.2f64..5.0, m_p in 0.01f64..1.0, l in 0.1f64..2.0, force in 1.0f64..30.0,
    ) {
        let p = CartPoleParams::new(m_c, m_p, l, force).unwrap();
        let q = CartPoleParams::new(m_c, m_p, l, -force).unwrap();
        let s = CartPoleState::new(x, x_dot, theta, theta_dot);
        prop_assert_eq!(cartpole::step(&p, &s, false).unwrap(), cartpole::step(&q, &s, true).unwrap());
        prop_assert_eq!(cartpole::step(&p, &s, true).unwrap(), cartpole::step(&q, &s, false).unwrap());
        // and the step is a pure function
        prop_assert_eq!(cartpole::step(&p, &s, true).unwrap(), cartpole::step(&p, &s, true).unwrap());
    }
}

proptest! {
    #![proptest_config(cfg(32))]

    #[test]
    fn fuel_is_conserved_and_non_negative(
        seed in any::<u64>(),
        resistances in prop::array::uniform6(5.0f64..300.0),
        pumps in prop::array::uniform6(0.0f64..2.0),
        leaks in prop::array::uniform6(0.0f64..0.1),
        engines in prop::array::uniform2(0.0f64..1.0),
        levels in prop::array::uniform6(0.0f64..100.0),
    ) {
        use rand::Rng;
        let params = FuelTankParams {
            resistances,
            pump_rates: pumps,
            leak_rates: leaks,
            engine_rates: engines,
            ..FuelTankParams::default()
        };
        let mut rng = seed::rng(seed);
        let mut state = fueltank::reset(&params);
        state.levels = levels;
        let initial = state.total();
        for _ in 0..300 {
            let (next, reward, _) = fueltank::step(&params, &state, rng.gen_range(0..64u8)).unwrap();
            prop_assert!(next.levels.iter().all(|&l| l >= 0.0));
            prop_assert!(reward.is_finite());
            state = next;
        }
        let balance = initial - state.total() - state.engine_draw - state.leak_draw;
        prop_assert!(balance.abs() <= 1e-9, "imbalance {}", balance);
    }
}
