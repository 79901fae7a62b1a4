mod common;

use boco::baselines::{self, AdamState, ScoreGradConfig};
use boco::knapsack::{self, KnapsackInstance};
use boco::predictor::{ThetaVec, THETA_DIM};
use boco::rng as brng;
use boco::smc::ParticleCloud;
use boco::WeightMatrix;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn probe() -> [f64; 12] {
    std::array::from_fn(|k| if (k * 7) % 3 == 0 { -1.5 } else { 1.5 })
}

fn dot(g: &[f64; 12], a: &WeightMatrix) -> f64 {
    g.iter().zip(a.to_flat()).map(|(x, y)| x * y).sum()
}

#[test]
fn linear_probe_recovers_gradient() {
    let g = probe();
    let a_hat = WeightMatrix::filled(1.0);
    let cfg = ScoreGradConfig { samples: 100_000, ..ScoreGradConfig::default() };
    let eps = baselines::draw_perturbations(&cfg, &mut brng::stream(3));
    // f(Â + ε) = ⟨G, Â⟩ + ⟨G, ε⟩; the constant part averages out.
    let est = baselines::score_estimate(&a_hat, &eps, |a| Ok(dot(&g, a))).unwrap();
    for k in 0..12 {
        assert!((est[k] - g[k]).abs() <= 0.05 * g[k].abs(), "entry {k}: {} vs {}", est[k], g[k]);
    }
    let shifted = baselines::score_estimate(&a_hat, &eps, |a| Ok(dot(&g, a) - 40.0)).unwrap();
    let offset = baselines::score_estimate(&a_hat, &eps, |_| Ok(40.0)).unwrap();
    for k in 0..12 {
        assert!((shifted[k] + offset[k] - est[k]).abs() < 1e-9);
    }
}

#[test]
fn constant_regret_has_zero_mean_estimate() {
    let inst = KnapsackInstance::default();
    let a_true = WeightMatrix::filled(100.0);
    let cfg = ScoreGradConfig { samples: 100_000, ..ScoreGradConfig::default() };
    let g = baselines::score_function_grad(&WeightMatrix::filled(0.5), &a_true, &inst, &cfg, &mut brng::stream(8)).unwrap();
    for (k, v) in g.iter().enumerate() {
        assert!(v.abs() <= 0.5, "entry {k}: {v}");
    }
}

#[test]
fn perturbed_decisions_with_huge_true_weights_all_score_72() {
    let inst = KnapsackInstance::default();
    let a_true = WeightMatrix::filled(100.0);
    let cfg = ScoreGradConfig { samples: 2000, ..ScoreGradConfig::default() };
    let eps = baselines::draw_perturbations(&cfg, &mut brng::stream(4));
    let hind = knapsack::hindsight_optimum(&a_true, &inst, 64).unwrap().value;
    assert_eq!(hind, 72.0);
    for e in &eps {
        let p = WeightMatrix::from_flat(&std::array::from_fn(|k| 0.5 + e[k]));
        assert_eq!(baselines::perturbed_regret(&p, &a_true, hind, &inst, 64).unwrap(), 72.0);
    }
}

fn frequencies(weights: &[f64], draws: usize, seed: u64) -> Vec<usize> {
    let cloud = ParticleCloud::from_parts(vec![ThetaVec::default(); weights.len()], weights.to_vec(), brng::stream(0)).unwrap();
    let mut r = brng::stream(seed);
    let mut counts = vec![0; weights.len()];
    for _ in 0..draws {
        counts[baselines::bgs_select(&cloud, &mut r)] += 1;
    }
    counts
}

fn chi_squared_p(counts: &[usize], weights: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(weights)
        .map(|(&c, &w)| {
            let e = w * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn bgs_draws_match_weights() {
    let uniform = vec![0.05; 20];
    let counts = frequencies(&uniform, 100_000, 1);
    for c in &counts {
        assert!((*c as f64 / 1e5 - 0.05).abs() <= 0.01);
    }
    assert!(chi_squared_p(&counts, &uniform) > 0.001);

    let skew = vec![0.25, 0.75];
    let counts = frequencies(&skew, 100_000, 2);
    assert!((counts[0] as f64 / 1e5 - 0.25).abs() <= 0.01);
    assert!(chi_squared_p(&counts, &skew) > 0.001);
}

proptest! {
    #[test]
    fn adam_is_a_pure_function_of_its_inputs(seed in any::<u64>(), steps in 1usize..20) {
        let mut r = common::rng(seed);
        let grads: Vec<[f64; THETA_DIM]> = (0..steps)
            .map(|_| std::array::from_fn(|_| rand::Rng::random_range(&mut r, -5.0..5.0)))
            .collect();
        let run = || {
            let mut s = AdamState::default();
            let deltas: Vec<_> = grads.iter().map(|g| baselines::adam_step(&mut s, g)).collect();
            (s, deltas)
        };
        let (a, da) = run();
        let (b, db) = run();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(da, db);
        prop_assert!(a.v.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(a.learning_rate(), 0.1 * 0.99f64.powi(steps as i32));
    }
}
