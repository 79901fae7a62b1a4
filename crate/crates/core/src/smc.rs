//! PAC-Bayes sequential Monte Carlo over predictor parameters.
//!
//! The cloud approximates the online Gibbs posterior
//! `π_{t+1}(θ) ∝ exp(−λ ℓ(θ, d_t)) π_t(θ)`. Each stage reweights particles by
//! the pseudo-likelihood `exp(−λ ℓ)`; when the effective sample size falls to
//! `τ N` or below, particles are moved by Metropolis-Hastings with the
//! Liu-West mixture as an independence proposal and the weights are reset to
//! uniform. Positions are never resampled; only MH moves them.
//!
//! Weights are kept as normalized log-weights (max-shifted log-sum-exp), so
//! long horizons do not underflow.
//!
//! Random draws during rejuvenation happen in a fixed order: for every
//! particle and every MH step, the mixture component, then the 48 Gaussian
//! coordinates, then the acceptance uniform. All proposals are drawn before
//! any loss is evaluated, so loss evaluation may run concurrently while
//! acceptance stays sequential and seed-reproducible.

use nalgebra::{DMatrix, DVector};

use crate::arma::{StageDatum, Vec3};
use crate::error::{BocoError, Result};
use crate::knapsack::{self, KnapsackInstance, ScenarioSet};
use crate::par;
use crate::predictor::{predict, ThetaVec, THETA_DIM};
use crate::rng::{self, StreamRng};

/// A loss over parameters, evaluated at the current stage.
pub type LossFn<'a> = dyn Fn(&ThetaVec) -> Result<f64> + Sync + 'a;

#[derive(Clone, Debug, PartialEq)]
pub struct SmcConfig {
    /// Particle count N.
    pub particles: usize,
    /// Temperature λ of the pseudo-likelihood.
    pub lambda: f64,
    /// Liu-West shrinkage a.
    pub shrinkage: f64,
    /// Rejuvenate when ESS ≤ τ·N.
    pub ess_threshold: f64,
    /// MH steps per particle per rejuvenation (L).
    pub mh_steps: usize,
    /// Prior π₀ = N(0, prior_std² I).
    pub prior_std: f64,
    /// Smallest diagonal jitter added to the Liu-West covariance.
    pub jitter_floor: f64,
    /// Evaluate proposal losses on the rayon pool.
    pub parallel: bool,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            particles: 20,
            lambda: 1e-4,
            shrinkage: 0.9,
            ess_threshold: 0.5,
            mh_steps: 3,
            prior_std: 1.0,
            jitter_floor: 1e-8,
            parallel: false,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BocoError::Argument(m.into()));
        if self.particles == 0 {
            return bad("particle count must be ≥ 1");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("λ must be positive and finite");
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return bad("shrinkage a must lie in (0, 1]");
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return bad("ESS threshold τ must lie in (0, 1]");
        }
        if !(self.prior_std > 0.0 && self.prior_std.is_finite()) {
            return bad("prior std must be positive and finite");
        }
        if !(self.jitter_floor > 0.0 && self.jitter_floor.is_finite()) {
            return bad("jitter floor must be positive and finite");
        }
        Ok(())
    }
}

/// Weighted particles and the random stream that moves them.
#[derive(Clone, Debug)]
pub struct ParticleCloud {
    thetas: Vec<ThetaVec>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    rng: StreamRng,
}

/// `log Σ exp(v_i)` with a max shift; `−∞` entries contribute nothing.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn normalize_log(log_w: &mut [f64]) -> Result<Vec<f64>> {
    let lse = log_sum_exp(log_w);
    if !lse.is_finite() {
        return Err(BocoError::NumericDomain("all particle weights vanished".into()));
    }
    for v in log_w.iter_mut() {
        *v -= lse;
    }
    Ok(log_w.iter().map(|v| v.exp()).collect())
}

impl ParticleCloud {
    /// Builds a cloud from explicit particles and simplex weights.
    pub fn from_parts(thetas: Vec<ThetaVec>, weights: Vec<f64>, rng: StreamRng) -> Result<Self> {
        if thetas.is_empty() || thetas.len() != weights.len() {
            return Err(BocoError::Argument(format!(
                "{} particles with {} weights",
                thetas.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BocoError::Argument("weights must be finite and ≥ 0".into()));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(BocoError::NumericDomain("non-finite particle".into()));
        }
        let mut log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let weights = normalize_log(&mut log_w)?;
        Ok(ParticleCloud {
            thetas,
            log_weights: log_w,
            weights,
            rng,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[ThetaVec] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn ess(&self) -> f64 {
        ess(&self.weights)
    }

    pub fn rng_mut(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    pub fn reset_uniform(&mut self) {
        let n = self.len();
        self.log_weights.fill(-(n as f64).ln());
        self.weights.fill(1.0 / n as f64);
    }

    /// Per-particle predictions at covariate `x`.
    pub fn predictions(&self, x: &Vec3) -> Vec<crate::matrix::WeightMatrix> {
        self.thetas.iter().map(|t| predict(t, x)).collect()
    }

    /// The pushforward of the empirical posterior at `x` as a scenario set.
    pub fn scenarios(&self, x: &Vec3, alpha: f64) -> Result<ScenarioSet> {
        ScenarioSet::new(self.predictions(x), self.weights.clone(), alpha)
    }

    /// Gibbs reweighting `w_i ← w_i exp(−λ ℓ_i) / Σ_j w_j exp(−λ ℓ_j)`.
    pub fn reweight(&mut self, losses: &[f64], lambda: f64) -> Result<()> {
        if losses.len() != self.len() {
            return Err(BocoError::Argument(format!(
                "{} losses for {} particles",
                losses.len(),
                self.len()
            )));
        }
        if let Some(i) = losses.iter().position(|l| !l.is_finite() || *l < 0.0) {
            return Err(BocoError::NumericDomain(format!(
                "loss {} of particle {i} is not a finite nonnegative number",
                losses[i]
            )));
        }
        let mut log_w: Vec<f64> = self
            .log_weights
            .iter()
            .zip(losses)
            .map(|(lw, l)| lw - lambda * l)
            .collect();
        self.weights = normalize_log(&mut log_w)?;
        self.log_weights = log_w;
        Ok(())
    }
}

/// Draws the initial cloud from the prior with uniform weights.
///
/// The returned cloud keeps the same random stream for its later MH moves.
pub fn init_cloud(config: &SmcConfig, seed: u64) -> Result<ParticleCloud> {
    config.validate()?;
    let mut rng = rng::stream(seed);
    let thetas = (0..config.particles)
        .map(|_| ThetaVec(std::array::from_fn(|_| config.prior_std * rng::std_normal(&mut rng))))
        .collect();
    let n = config.particles;
    ParticleCloud::from_parts(thetas, vec![1.0 / n as f64; n], rng)
}

/// Free-function form of [`ParticleCloud::reweight`].
pub fn reweight(mut cloud: ParticleCloud, losses: &[f64], lambda: f64) -> Result<ParticleCloud> {
    cloud.reweight(losses, lambda)?;
    Ok(cloud)
}

/// Effective sample size `1 / Σ w_i²`.
pub fn ess(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Liu-West shrunk Gaussian mixture `Σ w_i N(m_i, H)`.
#[derive(Clone, Debug)]
pub struct LiuWestKernel {
    pub means: Vec<ThetaVec>,
    pub mixture_weights: Vec<f64>,
    /// Weighted particle mean θ̄.
    pub center: ThetaVec,
    /// `(1 − a²) Σ + jitter·I`.
    pub covariance: DMatrix<f64>,
    /// Lower Cholesky factor of `covariance`.
    pub factor: DMatrix<f64>,
    pub jitter: f64,
}

const MAX_JITTER_ESCALATIONS: usize = 8;

/// Builds the Liu-West proposal from the current weighted cloud.
///
/// Jitter starts at `max(jitter_floor, 1e-10·tr(H)/48)` and grows tenfold on
/// each failed factorization, at most eight times.
pub fn liu_west_params(cloud: &ParticleCloud, a: f64, jitter_floor: f64) -> Result<LiuWestKernel> {
    let w = cloud.weights();
    let thetas = cloud.thetas();
    let mut center = [0.0; THETA_DIM];
    for (t, &wi) in thetas.iter().zip(w) {
        for (c, v) in center.iter_mut().zip(&t.0) {
            *c += wi * v;
        }
    }
    let mut sigma = DMatrix::<f64>::zeros(THETA_DIM, THETA_DIM);
    for (t, &wi) in thetas.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let d = DVector::from_iterator(THETA_DIM, t.0.iter().zip(&center).map(|(v, c)| v - c));
        sigma.ger(wi, &d, &d, 1.0);
    }
    let base = sigma * (1.0 - a * a);
    let mut jitter = jitter_floor.max(1e-10 * base.trace() / THETA_DIM as f64);
    for _ in 0..=MAX_JITTER_ESCALATIONS {
        let mut h = base.clone();
        for k in 0..THETA_DIM {
            h[(k, k)] += jitter;
        }
        if let Some(chol) = h.clone().cholesky() {
            let means = thetas
                .iter()
                .map(|t| ThetaVec(std::array::from_fn(|k| a * t.0[k] + (1.0 - a) * center[k])))
                .collect();
            return Ok(LiuWestKernel {
                means,
                mixture_weights: w.to_vec(),
                center: ThetaVec(center),
                covariance: h,
                factor: chol.l(),
                jitter,
            });
        }
        jitter *= 10.0;
    }
    Err(BocoError::Factorization(format!(
        "Liu-West covariance not positive definite at jitter {jitter:e}"
    )))
}

impl LiuWestKernel {
    /// Draws `(component, θ')`: component by inverse CDF, then `m_I + L z`.
    pub fn sample(&self, rng: &mut StreamRng) -> (usize, ThetaVec) {
        let comp = rng::categorical(rng, &self.mixture_weights);
        let mut z = [0.0; THETA_DIM];
        rng::fill_std_normal(rng, &mut z);
        (comp, self.offset(comp, &z))
    }

    fn offset(&self, comp: usize, z: &[f64; THETA_DIM]) -> ThetaVec {
        let m = &self.means[comp];
        ThetaVec(std::array::from_fn(|r| {
            let mut v = m.0[r];
            for c in 0..=r {
                v += self.factor[(r, c)] * z[c];
            }
            v
        }))
    }

    /// `log Σ_i w_i N(θ; m_i, H)`.
    pub fn log_density(&self, theta: &ThetaVec) -> f64 {
        let log_det_half: f64 = (0..THETA_DIM).map(|k| self.factor[(k, k)].ln()).sum();
        let norm = -0.5 * THETA_DIM as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        let terms: Vec<f64> = self
            .means
            .iter()
            .zip(&self.mixture_weights)
            .map(|(m, &w)| {
                if w == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let d = DVector::from_iterator(THETA_DIM, theta.0.iter().zip(&m.0).map(|(t, m)| t - m));
                let y = self
                    .factor
                    .solve_lower_triangular(&d)
                    .expect("Cholesky factor has a positive diagonal");
                w.ln() + norm - 0.5 * y.norm_squared()
            })
            .collect();
        log_sum_exp(&terms)
    }
}

/// Incremental MH ratio `exp(−λ ℓ(θ') + λ ℓ(θ))`.
#[inline]
pub fn mh_accept_ratio(loss_proposed: f64, loss_current: f64, lambda: f64) -> f64 {
    (lambda * (loss_current - loss_proposed)).exp()
}

/// Log density of the isotropic Gaussian prior `N(0, std² I)`.
pub fn prior_log_density(theta: &ThetaVec, std: f64) -> f64 {
    let sq: f64 = theta.0.iter().map(|v| v * v).sum();
    -0.5 * sq / (std * std) - THETA_DIM as f64 * (std.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Full-history MH ratio
///
/// ```text
/// r = π₀(θ') e^{−λ Σ ℓ(θ', d_i)} q(θ | θ') / (π₀(θ) e^{−λ Σ ℓ(θ, d_i)} q(θ' | θ))
/// ```
///
/// evaluated in log space. `proposal_log_density(to, from)` is `log q(to | from)`.
/// A zero prior density at θ' gives 0; at θ (only) gives +∞.
pub fn full_history_accept_ratio<P, Q, L>(
    theta_proposed: &ThetaVec,
    theta_current: &ThetaVec,
    history: &[StageDatum],
    prior_log_density: P,
    proposal_log_density: Q,
    loss_of: L,
    lambda: f64,
) -> Result<f64>
where
    P: Fn(&ThetaVec) -> f64,
    Q: Fn(&ThetaVec, &ThetaVec) -> f64,
    L: Fn(&ThetaVec, &StageDatum) -> Result<f64>,
{
    if history.is_empty() {
        return Err(BocoError::Argument("full-history ratio needs at least one stage".into()));
    }
    let prior_prop = prior_log_density(theta_proposed);
    let prior_cur = prior_log_density(theta_current);
    if prior_prop == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if prior_cur == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let mut loss_prop = 0.0;
    let mut loss_cur = 0.0;
    for d in history {
        loss_prop += loss_of(theta_proposed, d)?;
        loss_cur += loss_of(theta_current, d)?;
    }
    let log_num = prior_prop - lambda * loss_prop + proposal_log_density(theta_current, theta_proposed);
    let log_den = prior_cur - lambda * loss_cur + proposal_log_density(theta_proposed, theta_current);
    Ok((log_num - log_den).exp())
}

/// Outcome counts of one rejuvenation sweep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RejuvenationStats {
    pub proposed: usize,
    pub accepted: usize,
}

struct Proposal {
    theta: ThetaVec,
    uniform: f64,
}

fn draw_proposals(cloud: &mut ParticleCloud, kernel: &LiuWestKernel, steps: usize) -> Vec<Proposal> {
    let n = cloud.len();
    let mut out = Vec::with_capacity(n * steps);
    for _ in 0..n * steps {
        let (_, theta) = kernel.sample(&mut cloud.rng);
        let uniform = rng::uniform(&mut cloud.rng);
        out.push(Proposal { theta, uniform });
    }
    out
}

fn checked(values: Vec<Result<f64>>, what: &str) -> Result<Vec<f64>> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let v = v?;
            if v.is_nan() || v == f64::INFINITY {
                Err(BocoError::NumericDomain(format!("{what} {i} has non-finite loss {v}")))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Shared MH sweep. `score(θ)` is evaluated once per particle and once per
/// proposal; `ratio(score_proposed, score_current)` decides acceptance.
fn sweep(
    cloud: &mut ParticleCloud,
    kernel: &LiuWestKernel,
    steps: usize,
    parallel: bool,
    current: Option<&[f64]>,
    score: &LossFn<'_>,
    ratio: impl Fn(f64, f64) -> f64,
) -> Result<RejuvenationStats> {
    let mut stats = RejuvenationStats::default();
    if steps > 0 {
        let proposals = draw_proposals(cloud, kernel, steps);
        let current = match current {
            Some(c) if c.len() == cloud.len() => c.to_vec(),
            Some(c) => {
                return Err(BocoError::Argument(format!(
                    "{} cached losses for {} particles",
                    c.len(),
                    cloud.len()
                )))
            }
            None => checked(par::map_collect(&cloud.thetas, parallel, |t| score(t)), "particle")?,
        };
        let proposed = checked(
            par::map_collect(&proposals, parallel, |p| score(&p.theta)),
            "proposal for particle",
        )?;
        for (i, mut cur) in current.into_iter().enumerate() {
            for k in 0..steps {
                let idx = i * steps + k;
                stats.proposed += 1;
                if ratio(proposed[idx], cur) >= proposals[idx].uniform {
                    cloud.thetas[i] = proposals[idx].theta;
                    cur = proposed[idx];
                    stats.accepted += 1;
                }
            }
        }
    }
    cloud.reset_uniform();
    Ok(stats)
}

/// Liu-West MH rejuvenation with the incremental acceptance ratio, followed by
/// a reset to uniform weights. `L = 0` only resets the weights.
pub fn mh_rejuvenate(
    cloud: &mut ParticleCloud,
    kernel: &LiuWestKernel,
    loss_of: &LossFn<'_>,
    config: &SmcConfig,
) -> Result<RejuvenationStats> {
    mh_rejuvenate_cached(cloud, kernel, loss_of, None, config)
}

/// As [`mh_rejuvenate`], reusing already computed stage losses of the
/// current particles instead of calling `loss_of` on them again.
pub fn mh_rejuvenate_cached(
    cloud: &mut ParticleCloud,
    kernel: &LiuWestKernel,
    loss_of: &LossFn<'_>,
    current_losses: Option<&[f64]>,
    config: &SmcConfig,
) -> Result<RejuvenationStats> {
    let lambda = config.lambda;
    sweep(cloud, kernel, config.mh_steps, config.parallel, current_losses, loss_of, |prop, cur| {
        mh_accept_ratio(prop, cur, lambda)
    })
}

/// Cross-check mode: the same sweep with the exact full-history ratio.
///
/// `cumulative_loss_of(θ)` must return `Σ_{i ≤ t} ℓ(θ, d_i)`. The proposal is
/// the kernel's mixture density (independence sampler).
pub fn mh_rejuvenate_full_history(
    cloud: &mut ParticleCloud,
    kernel: &LiuWestKernel,
    cumulative_loss_of: &LossFn<'_>,
    config: &SmcConfig,
) -> Result<RejuvenationStats> {
    let lambda = config.lambda;
    let prior_std = config.prior_std;
    // log r = S(θ') − S(θ) with S = log π₀ − λ Σℓ − log q_t.
    let score = |t: &ThetaVec| -> Result<f64> {
        let cumulative = cumulative_loss_of(t)?;
        if !cumulative.is_finite() {
            return Ok(f64::NAN);
        }
        Ok(prior_log_density(t, prior_std) - lambda * cumulative - kernel.log_density(t))
    };
    sweep(cloud, kernel, config.mh_steps, config.parallel, None, &score, |prop, cur| {
        (prop - cur).exp()
    })
}

/// Discrete Gibbs posterior `∝ prior_k exp(−λ loss_k)`.
pub fn gibbs_posterior_discrete(prior: &[f64], losses: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if prior.len() != losses.len() || prior.is_empty() {
        return Err(BocoError::Argument("prior and losses must have equal, nonzero length".into()));
    }
    if losses.iter().any(|l| !l.is_finite()) || prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(BocoError::NumericDomain("prior or losses out of domain".into()));
    }
    let mut log_w: Vec<f64> = prior.iter().zip(losses).map(|(p, l)| p.ln() - lambda * l).collect();
    normalize_log(&mut log_w)
}

/// `E_π[loss] + KL(π ‖ prior) / λ`, with `0·log 0 = 0`.
pub fn free_energy(pi: &[f64], prior: &[f64], losses: &[f64], lambda: f64) -> Result<f64> {
    if pi.len() != prior.len() || pi.len() != losses.len() {
        return Err(BocoError::Argument("length mismatch".into()));
    }
    let mut expected = 0.0;
    let mut kl = 0.0;
    for ((&p, &p0), &l) in pi.iter().zip(prior).zip(losses) {
        if p == 0.0 {
            continue;
        }
        if p0 <= 0.0 {
            return Err(BocoError::NumericDomain(
                "π is not absolutely continuous with respect to the prior".into(),
            ));
        }
        expected += p * l;
        kl += p * (p / p0).ln();
    }
    Ok(expected + kl / lambda)
}

/// One-stage check of the λ-mixability inequality on the empirical posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixabilityReport {
    /// Regret of the aggregated (chance-constrained) decision.
    pub agg_loss: f64,
    /// Posterior mean of the per-particle regrets.
    pub exp_loss: f64,
    /// `−(1/λ) log Σ w_i exp(−λ ℓ_i)`.
    pub mix_bound: f64,
    pub holds_mixable: bool,
    pub holds_convex_relax: bool,
}

/// Evaluates the mixability bound for one stage. Violations are reported,
/// not raised.
pub fn mixability_check(
    cloud: &ParticleCloud,
    datum: &StageDatum,
    inst: &KnapsackInstance,
    lambda: f64,
    alpha: f64,
    z_cap: u32,
) -> Result<MixabilityReport> {
    let hindsight = knapsack::hindsight_optimum(&datum.a, inst, z_cap)?.value;
    let agg = knapsack::solve_chance(&cloud.scenarios(&datum.x, alpha)?, inst, z_cap)?;
    let agg_loss = knapsack::regret_against(hindsight, &agg.z, &datum.a, inst);
    let losses = cloud
        .predictions(&datum.x)
        .iter()
        .map(|a| {
            let d = knapsack::solve_deterministic(a, inst, z_cap)?;
            Ok(knapsack::regret_against(hindsight, &d.z, &datum.a, inst))
        })
        .collect::<Result<Vec<f64>>>()?;
    let exp_loss: f64 = losses.iter().zip(cloud.weights()).map(|(l, w)| l * w).sum();
    let terms: Vec<f64> = cloud
        .log_weights()
        .iter()
        .zip(&losses)
        .map(|(lw, l)| lw - lambda * l)
        .collect();
    let mix_bound = -log_sum_exp(&terms) / lambda;
    let tol = 1e-9 * exp_loss.abs().max(1.0);
    Ok(MixabilityReport {
        agg_loss,
        exp_loss,
        mix_bound,
        holds_mixable: agg_loss <= mix_bound + tol,
        holds_convex_relax: agg_loss <= exp_loss + tol,
    })
}
