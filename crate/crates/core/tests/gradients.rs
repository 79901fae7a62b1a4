mod common;

use boco::baselines::mse_loss_grad;
use boco::predictor::{jacobian, predict, sigmoid, ThetaVec, THETA_DIM};
use boco::WeightMatrix;
use common::{central_difference, rng};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_theta<R: Rng>(r: &mut R) -> ThetaVec {
    ThetaVec(std::array::from_fn(|_| r.sample(StandardNormal)))
}

fn random_x<R: Rng>(r: &mut R) -> [f64; 3] {
    std::array::from_fn(|_| r.sample::<f64, _>(StandardNormal) * 1.5)
}

#[test]
fn predict_matches_direct_formula() {
    let mut r = rng(5);
    for _ in 0..100 {
        let theta = random_theta(&mut r);
        let x = random_x(&mut r);
        let got = predict(&theta, &x).to_flat();
        for k in 0..12 {
            let s = theta.0[3 * k] * x[0] + theta.0[3 * k + 1] * x[1] + theta.0[3 * k + 2] * x[2] + theta.0[36 + k];
            let direct = 2.0 / (1.0 + (-s).exp());
            assert!((got[k] - direct).abs() <= 1e-12);
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta = random_theta(&mut r);
        let x = random_x(&mut r);
        let jac = jacobian(&theta, &x);
        for k in 0..12 {
            let f = |p: &[f64]| {
                let t = ThetaVec(p.try_into().unwrap());
                predict(&t, &x).to_flat()[k]
            };
            for p in 0..THETA_DIM {
                let fd = central_difference(f, &theta.0, p, 1e-5);
                worst = worst.max((fd - jac[k][p]).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "max abs error {worst:e}");
}

#[test]
fn mse_gradient_matches_finite_differences() {
    let mut r = rng(7);
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 100 {
        let theta = random_theta(&mut r);
        let x = random_x(&mut r);
        let a = WeightMatrix(std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(1.0..3.0))));
        let (loss, grad) = mse_loss_grad(&theta, &x, &a);
        if loss <= 0.1 {
            continue;
        }
        checked += 1;
        let f = |p: &[f64]| mse_loss_grad(&ThetaVec(p.try_into().unwrap()), &x, &a).0;
        for p in 0..THETA_DIM {
            worst = worst.max((central_difference(f, &theta.0, p, 1e-5) - grad[p]).abs());
        }
    }
    assert!(worst <= 1e-5, "max abs error {worst:e}");
}

proptest! {
    #[test]
    fn outputs_stay_in_open_range(seed in any::<u64>(), scale in 0.1f64..30.0) {
        let mut r = rng(seed);
        let theta = ThetaVec(std::array::from_fn(|_| r.sample::<f64, _>(StandardNormal) * scale));
        let x = random_x(&mut r);
        let out = predict(&theta, &x).to_flat();
        for (k, v) in out.into_iter().enumerate() {
            let s = (0..3).map(|j| theta.weight(k, j) * x[j]).sum::<f64>() + theta.bias(k);
            prop_assert!((0.0..=2.0).contains(&v));
            if s.abs() < 30.0 {
                prop_assert!(v > 0.0 && v < 2.0, "s = {}, v = {}", s, v);
            }
        }
    }

    #[test]
    fn bias_increase_raises_its_entry(seed in any::<u64>(), k in 0usize..12, step in 0.01f64..2.0) {
        let mut r = rng(seed);
        let theta = random_theta(&mut r);
        let x = random_x(&mut r);
        let mut bumped = theta;
        bumped.0[ThetaVec::bias_index(k)] += step;
        let before = predict(&theta, &x).to_flat();
        let after = predict(&bumped, &x).to_flat();
        prop_assert!(after[k] > before[k]);
        for j in (0..12).filter(|&j| j != k) {
            prop_assert_eq!(after[j], before[j]);
        }
    }

    #[test]
    fn jacobian_rows_touch_only_their_parameters(seed in any::<u64>()) {
        let mut r = rng(seed);
        let theta = random_theta(&mut r);
        let x = random_x(&mut r);
        let jac = jacobian(&theta, &x);
        for k in 0..12 {
            for p in 0..THETA_DIM {
                let own = p == ThetaVec::bias_index(k) || (0..3).any(|j| p == ThetaVec::weight_index(k, j));
                if !own {
                    prop_assert_eq!(jac[k][p], 0.0);
                }
            }
        }
    }
}

#[test]
fn sigmoid_handles_large_arguments() {
    for s in [-1e3, -745.0, 0.0, 745.0, 1e3] {
        let v = sigmoid(s);
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
    }
}
