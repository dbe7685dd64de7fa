use proptest::prelude::*;
use realitygame_core::analytics::{
    add_drift_observations, inefficiency_series, kl_bernoulli, subjective_wealth_given_heads,
    Regression,
};
use realitygame_core::engine::{run_seeded, RunConfig};
use realitygame_core::rational::RationalContext;
use realitygame_core::{Outcome, PlayerPopulation, RealityMap};

fn any_map() -> impl Strategy<Value = RealityMap> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(RealityMap::Constant),
        Just(RealityMap::SelfDefeating),
        Just(RealityMap::Identity),
        Just(RealityMap::Multimodal),
        (0.1f64..4.0).prop_map(|alpha| RealityMap::Arctan { alpha }),
    ]
}

fn population() -> impl Strategy<Value = PlayerPopulation> {
    proptest::collection::vec((0.01f64..0.99, 0.01f64..1.0), 1..40).prop_map(|pairs| {
        let (s, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        PlayerPopulation::with_weights(s, w).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_recorded_inefficiency_is_non_negative(map in any_map(), seed in any::<u64>()) {
        let config = RunConfig::new(map, PlayerPopulation::uniform_grid(29).unwrap(), 400, seed);
        let traj = run_seeded(&config, 0).unwrap();
        let series = inefficiency_series(&traj).unwrap();
        prop_assert!(series.iter().all(|r| *r >= 0.0));
        prop_assert_eq!(Some(&series), traj.log_returns.as_ref());
    }

    #[test]
    fn epsilon_player_cannot_beat_betting_the_bias(
        pop in population(),
        map in any_map(),
        s in 0.001f64..0.999,
    ) {
        let ctx = RationalContext::new(&pop, 0.0, &map).unwrap();
        let p = pop.total_bet();
        let q = map.evaluate(p).unwrap();
        let best = kl_bernoulli(q, p).unwrap();
        prop_assert!(ctx.expected_log_return(s).unwrap() <= best + 1e-12);
    }

    #[test]
    fn closed_form_ignores_the_order_of_tosses(
        pop in population(),
        pattern in proptest::collection::vec(any::<bool>(), 0..200),
        shuffle_seed in any::<u64>(),
    ) {
        let t = pattern.len() as u64;
        let m = pattern.iter().filter(|h| **h).count() as u64;
        let closed = subjective_wealth_given_heads(&pop, m, t).unwrap();
        // Deterministic Fisher-Yates driven by a simple LCG.
        let mut order = pattern.clone();
        let mut state = shuffle_seed | 1;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        for tosses in [&pattern, &order] {
            let mut state = pop.clone();
            for &h in tosses.iter() {
                state.apply_outcome_mut(if h { Outcome::Heads } else { Outcome::Tails }).unwrap();
            }
            for (a, b) in closed.iter().zip(state.wealths()) {
                prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn wealth_is_conserved_over_a_million_steps() {
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut steps = 0;
    let mut worst: f64 = 0.0;
    while steps < 1_000_000 {
        let n = 2 + (uniform() * 30.0) as usize;
        let strategies: Vec<f64> = (0..n).map(|_| 0.001 + 0.998 * uniform()).collect();
        let weights: Vec<f64> = (0..n).map(|_| 0.01 + uniform()).collect();
        let mut pop = PlayerPopulation::with_weights(strategies, weights).unwrap();
        for _ in 0..1000 {
            let outcome = if uniform() < 0.5 { Outcome::Heads } else { Outcome::Tails };
            pop.apply_outcome_mut(outcome).unwrap();
            let total: f64 = pop.wealths().iter().sum();
            worst = worst.max((total - 1.0).abs());
            steps += 1;
        }
    }
    assert!(worst <= 1e-12, "worst drift {worst}");
}

#[test]
fn drift_follows_the_gaussian_law() {
    let mut config = RunConfig::new(
        RealityMap::SelfDefeating,
        PlayerPopulation::uniform_grid(3000).unwrap(),
        2000,
        9,
    );
    config.record.wealth_snapshots = false;
    config.record.epsilon_player = false;
    let mut reg = Regression::new();
    for seed in 0..128 {
        let traj = run_seeded(&config, seed).unwrap();
        add_drift_observations(&mut reg, &traj.bets, &traj.biases, 100);
    }
    let fit = reg.fit().unwrap();
    assert!((fit.slope - 1.0).abs() < 0.1, "slope {} +- {}", fit.slope, fit.stderr);
}
