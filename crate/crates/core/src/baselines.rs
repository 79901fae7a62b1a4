//! Comparison frameworks: predict-then-optimize with an MSE fit, decision-focused
//! learning with a score-function gradient, and the Gibbs stochastic predictor.

use crate::error::Result;
use crate::knapsack::{self, KnapsackInstance, DEFAULT_Z_CAP};
use crate::matrix::{WeightMatrix, ENTRIES};
use crate::predictor::{predict, pullback, ThetaVec, THETA_DIM};
use crate::rng::{self, StreamRng};
use crate::smc::ParticleCloud;
use crate::arma::Vec3;

/// Adam with bias correction and a per-step multiplicative learning-rate decay.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: [f64; THETA_DIM],
    pub v: [f64; THETA_DIM],
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr0: f64,
    pub decay: f64,
}

impl Default for AdamState {
    fn default() -> Self {
        AdamState::new(0.1, 0.99)
    }
}

impl AdamState {
    pub fn new(lr0: f64, decay: f64) -> Self {
        AdamState {
            m: [0.0; THETA_DIM],
            v: [0.0; THETA_DIM],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr0,
            decay,
        }
    }

    /// Learning rate used by the next step.
    pub fn learning_rate(&self) -> f64 {
        self.lr0 * self.decay.powi(self.step as i32)
    }
}

/// One Adam update; returns the increment to add to the parameters.
pub fn adam_step(state: &mut AdamState, grad: &[f64; THETA_DIM]) -> [f64; THETA_DIM] {
    let lr = state.learning_rate();
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let mut delta = [0.0; THETA_DIM];
    for k in 0..THETA_DIM {
        let g = grad[k];
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[k] / c1;
        let v_hat = state.v[k] / c2;
        delta[k] = -lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    delta
}

/// Frobenius prediction error `‖A − Â‖_F` and its gradient in θ.
///
/// The gradient is zero at (numerically) zero loss.
pub fn mse_loss_grad(theta: &ThetaVec, x: &Vec3, a_true: &WeightMatrix) -> (f64, [f64; THETA_DIM]) {
    let pred = predict(theta, x).to_flat();
    let truth = a_true.to_flat();
    let resid: [f64; ENTRIES] = std::array::from_fn(|k| pred[k] - truth[k]);
    let loss = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
    if loss < 1e-12 {
        return (loss, [0.0; THETA_DIM]);
    }
    let g: [f64; ENTRIES] = std::array::from_fn(|k| resid[k] / loss);
    (loss, pullback(theta, x, &g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGradConfig {
    /// Perturbation samples K.
    pub samples: usize,
    pub noise_std: f64,
    /// Per-coordinate cap passed to the deterministic solver.
    pub z_cap: u32,
}

impl Default for ScoreGradConfig {
    fn default() -> Self {
        ScoreGradConfig {
            samples: 20,
            noise_std: 1.0,
            z_cap: DEFAULT_Z_CAP,
        }
    }
}

/// `(1/K) Σ f(Â + ε_i) ε_i` over the given perturbations.
pub fn score_estimate<F>(a_hat: &WeightMatrix, perturbations: &[[f64; ENTRIES]], mut f: F) -> Result<[f64; ENTRIES]>
where
    F: FnMut(&WeightMatrix) -> Result<f64>,
{
    let base = a_hat.to_flat();
    let mut acc = [0.0; ENTRIES];
    for eps in perturbations {
        let perturbed = WeightMatrix::from_flat(&std::array::from_fn(|k| base[k] + eps[k]));
        let value = f(&perturbed)?;
        for (a, e) in acc.iter_mut().zip(eps) {
            *a += value * e;
        }
    }
    let k = perturbations.len().max(1) as f64;
    Ok(acc.map(|a| a / k))
}

/// Draws K Gaussian perturbations, twelve coordinates at a time.
pub fn draw_perturbations(cfg: &ScoreGradConfig, rng: &mut StreamRng) -> Vec<[f64; ENTRIES]> {
    (0..cfg.samples)
        .map(|_| {
            let mut e = [0.0; ENTRIES];
            rng::fill_std_normal(rng, &mut e);
            e.map(|v| v * cfg.noise_std)
        })
        .collect()
}

/// Regret of the decision taken at a perturbed prediction. Negative entries
/// of the perturbed matrix are clipped to zero before solving.
pub fn perturbed_regret(perturbed: &WeightMatrix, a_true: &WeightMatrix, hindsight: f64, inst: &KnapsackInstance, z_cap: u32) -> Result<f64> {
    let projected = perturbed.map(|v| v.max(0.0));
    let d = knapsack::solve_deterministic(&projected, inst, z_cap)?;
    Ok(knapsack::regret_against(hindsight, &d.z, a_true, inst))
}

/// Score-function estimate of the regret gradient with respect to `Â`.
pub fn score_function_grad(
    a_hat: &WeightMatrix,
    a_true: &WeightMatrix,
    inst: &KnapsackInstance,
    cfg: &ScoreGradConfig,
    rng: &mut StreamRng,
) -> Result<[f64; ENTRIES]> {
    let hindsight = knapsack::hindsight_optimum(a_true, inst, cfg.z_cap)?.value;
    score_function_grad_with_hindsight(a_hat, a_true, hindsight, inst, cfg, rng)
}

/// As [`score_function_grad`] with the stage's hindsight value already known.
pub fn score_function_grad_with_hindsight(
    a_hat: &WeightMatrix,
    a_true: &WeightMatrix,
    hindsight: f64,
    inst: &KnapsackInstance,
    cfg: &ScoreGradConfig,
    rng: &mut StreamRng,
) -> Result<[f64; ENTRIES]> {
    let eps = draw_perturbations(cfg, rng);
    score_estimate(a_hat, &eps, |p| perturbed_regret(p, a_true, hindsight, inst, cfg.z_cap))
}

/// Decision-focused parameter gradient `Jᵀ g`.
pub fn dfl_param_grad(
    theta: &ThetaVec,
    x: &Vec3,
    a_true: &WeightMatrix,
    inst: &KnapsackInstance,
    cfg: &ScoreGradConfig,
    rng: &mut StreamRng,
) -> Result<[f64; THETA_DIM]> {
    let g = score_function_grad(&predict(theta, x), a_true, inst, cfg, rng)?;
    Ok(pullback(theta, x, &g))
}

/// Samples one particle index from the cloud weights.
pub fn bgs_select(cloud: &ParticleCloud, rng: &mut StreamRng) -> usize {
    rng::categorical(rng, cloud.weights())
}
