//! The online experiment loop for all four frameworks, multi-trial execution
//! and file outputs.
//!
//! Every trial owns independent random streams derived from
//! `(base_seed, trial, tag)`. The data stream depends only on the trial index,
//! so frameworks run with the same seed see identical `(x_t, A_t)` sequences.

pub mod config;
pub mod io;
pub mod summary;

use std::fmt;
use std::fs;
use std::path::Path;

pub use config::ExperimentConfig;
pub use summary::{percentile, summarize, CurvePoint, MeanStd, SummaryStats, TrialStats};

use crate::arma::{ArmaStream, StageDatum};
use crate::baselines::{self, AdamState, ScoreGradConfig};
use crate::error::{BocoError, Result};
use crate::knapsack::{self, Quantities};
use crate::par;
use crate::predictor::{predict, pullback, ThetaVec};
use crate::rng::{self, StreamRng, StreamTag};
use crate::smc::{self, ParticleCloud};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Framework {
    Bma,
    Bgs,
    Pto,
    Dfl,
}

impl Framework {
    pub const ALL: [Framework; 4] = [Framework::Bma, Framework::Bgs, Framework::Pto, Framework::Dfl];

    /// Upper-case tag used in CSV files.
    pub fn tag(self) -> &'static str {
        match self {
            Framework::Bma => "BMA",
            Framework::Bgs => "BGS",
            Framework::Pto => "PTO",
            Framework::Dfl => "DFL",
        }
    }

    /// Lower-case name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Framework::Bma => "bma",
            Framework::Bgs => "bgs",
            Framework::Pto => "pto",
            Framework::Dfl => "dfl",
        }
    }

    pub fn parse(s: &str) -> Option<Framework> {
        Framework::ALL.into_iter().find(|f| s.eq_ignore_ascii_case(f.tag()))
    }

    pub fn uses_smc(self) -> bool {
        matches!(self, Framework::Bma | Framework::Bgs)
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub trial: usize,
    pub t: usize,
    pub framework: Framework,
    pub z: Quantities,
    pub reward: f64,
    pub feasible: bool,
    pub hindsight: f64,
    pub regret: f64,
    /// Post-reweighting ESS; SMC frameworks only.
    pub ess: Option<f64>,
    pub rejuvenated: Option<bool>,
}

fn record(trial: usize, framework: Framework, datum: &StageDatum, hindsight: f64, z: Quantities, config: &ExperimentConfig) -> StageRecord {
    let r = knapsack::evaluate_reward(&z, &datum.a, &config.instance);
    StageRecord {
        trial,
        t: datum.t,
        framework,
        z,
        reward: r.reward,
        feasible: r.feasible,
        hindsight,
        regret: hindsight - r.reward,
        ess: None,
        rejuvenated: None,
    }
}

/// Regret of the plug-in decision of one parameter vector on one stage.
pub fn particle_loss(theta: &ThetaVec, datum: &StageDatum, hindsight: f64, config: &ExperimentConfig) -> Result<f64> {
    let d = knapsack::solve_deterministic(&predict(theta, &datum.x), &config.instance, config.z_cap)?;
    Ok(knapsack::regret_against(hindsight, &d.z, &datum.a, &config.instance))
}

/// Gibbs reweighting followed by rejuvenation when ESS ≤ τN.
/// Returns the post-reweighting ESS and whether rejuvenation ran.
fn smc_update(cloud: &mut ParticleCloud, datum: &StageDatum, hindsight: f64, config: &ExperimentConfig) -> Result<(f64, bool)> {
    let smc_cfg = &config.smc;
    let losses = par::map_collect(cloud.thetas(), smc_cfg.parallel, |t| particle_loss(t, datum, hindsight, config))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    cloud.reweight(&losses, smc_cfg.lambda)?;
    let ess = cloud.ess();
    let trigger = ess <= smc_cfg.ess_threshold * cloud.len() as f64;
    if trigger {
        let kernel = smc::liu_west_params(cloud, smc_cfg.shrinkage, smc_cfg.jitter_floor)?;
        let loss_of = |t: &ThetaVec| particle_loss(t, datum, hindsight, config);
        smc::mh_rejuvenate_cached(cloud, &kernel, &loss_of, Some(&losses), smc_cfg)?;
    }
    Ok((ess, trigger))
}

/// One BMA stage: chance-constrained decision on the posterior pushforward,
/// then the posterior update.
pub fn run_stage_bma(cloud: &mut ParticleCloud, datum: &StageDatum, hindsight: f64, config: &ExperimentConfig, trial: usize) -> Result<StageRecord> {
    let scenarios = cloud.scenarios(&datum.x, config.alpha)?;
    let decision = knapsack::solve_chance(&scenarios, &config.instance, config.z_cap)?;
    let mut rec = record(trial, Framework::Bma, datum, hindsight, decision.z, config);
    let (ess, rejuvenated) = smc_update(cloud, datum, hindsight, config)?;
    rec.ess = Some(ess);
    rec.rejuvenated = Some(rejuvenated);
    Ok(rec)
}

/// One BGS stage: plug-in decision of a single sampled particle, then the
/// same posterior update as BMA.
pub fn run_stage_bgs(
    cloud: &mut ParticleCloud,
    selection: &mut StreamRng,
    datum: &StageDatum,
    hindsight: f64,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<StageRecord> {
    let idx = baselines::bgs_select(cloud, selection);
    let pred = predict(&cloud.thetas()[idx], &datum.x);
    let decision = knapsack::solve_deterministic(&pred, &config.instance, config.z_cap)?;
    let mut rec = record(trial, Framework::Bgs, datum, hindsight, decision.z, config);
    let (ess, rejuvenated) = smc_update(cloud, datum, hindsight, config)?;
    rec.ess = Some(ess);
    rec.rejuvenated = Some(rejuvenated);
    Ok(rec)
}

fn apply(theta: &mut ThetaVec, delta: &[f64; crate::predictor::THETA_DIM]) -> Result<()> {
    for (t, d) in theta.0.iter_mut().zip(delta) {
        *t += d;
    }
    if theta.is_finite() {
        Ok(())
    } else {
        Err(BocoError::NumericDomain("parameter update produced a non-finite value".into()))
    }
}

/// One PtO stage: plug-in decision, then one Adam step on the Frobenius error.
pub fn run_stage_pto(
    theta: &mut ThetaVec,
    adam: &mut AdamState,
    datum: &StageDatum,
    hindsight: f64,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<StageRecord> {
    let decision = knapsack::solve_deterministic(&predict(theta, &datum.x), &config.instance, config.z_cap)?;
    let rec = record(trial, Framework::Pto, datum, hindsight, decision.z, config);
    let (_, grad) = baselines::mse_loss_grad(theta, &datum.x, &datum.a);
    let delta = baselines::adam_step(adam, &grad);
    apply(theta, &delta)?;
    Ok(rec)
}

/// One DFL stage: plug-in decision, then one Adam step along the
/// score-function regret gradient. Uses exactly `score_k + 1` deterministic
/// solves.
pub fn run_stage_dfl(
    theta: &mut ThetaVec,
    adam: &mut AdamState,
    perturbation: &mut StreamRng,
    datum: &StageDatum,
    hindsight: f64,
    config: &ExperimentConfig,
    trial: usize,
) -> Result<StageRecord> {
    let pred = predict(theta, &datum.x);
    let decision = knapsack::solve_deterministic(&pred, &config.instance, config.z_cap)?;
    let rec = record(trial, Framework::Dfl, datum, hindsight, decision.z, config);
    let cfg = ScoreGradConfig {
        samples: config.score_k,
        noise_std: 1.0,
        z_cap: config.z_cap,
    };
    let g = baselines::score_function_grad_with_hindsight(&pred, &datum.a, hindsight, &config.instance, &cfg, perturbation)?;
    let grad = pullback(theta, &datum.x, &g);
    let delta = baselines::adam_step(adam, &grad);
    apply(theta, &delta)?;
    Ok(rec)
}

/// Standard-normal parameter initialization for the gradient baselines.
pub fn init_theta(rng: &mut StreamRng) -> ThetaVec {
    let mut t = ThetaVec::default();
    rng::fill_std_normal(rng, &mut t.0);
    t
}

/// The data stream of one trial.
pub fn trial_data(config: &ExperimentConfig, trial: usize) -> Result<Vec<StageDatum>> {
    let seed = rng::stream_seed(config.base_seed, trial as u64, StreamTag::Data);
    let mut stream = ArmaStream::new(config.arma.clone(), seed)?;
    (0..config.horizon).map(|_| stream.next_datum()).collect()
}

/// Runs `T` stages of the configured framework on one trial.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<Vec<StageRecord>> {
    let data = trial_data(config, trial)?;
    run_trial_on(config, trial, &data)
}

/// As [`run_trial`] on a caller-supplied stream.
pub fn run_trial_on(config: &ExperimentConfig, trial: usize, data: &[StageDatum]) -> Result<Vec<StageRecord>> {
    let seed = |tag| rng::stream_seed(config.base_seed, trial as u64, tag);
    let mut out = Vec::with_capacity(data.len());
    let hindsight = |d: &StageDatum| knapsack::hindsight_optimum(&d.a, &config.instance, config.z_cap).map(|h| h.value);
    match config.framework {
        Framework::Bma | Framework::Bgs => {
            let mut cloud = smc::init_cloud(&config.smc, seed(StreamTag::Prior))?;
            let mut selection = rng::stream(seed(StreamTag::Selection));
            for d in data {
                let h = hindsight(d)?;
                out.push(if config.framework == Framework::Bma {
                    run_stage_bma(&mut cloud, d, h, config, trial)?
                } else {
                    run_stage_bgs(&mut cloud, &mut selection, d, h, config, trial)?
                });
            }
        }
        Framework::Pto | Framework::Dfl => {
            let mut theta = init_theta(&mut rng::stream(seed(StreamTag::GradInit)));
            let mut adam = AdamState::new(config.adam_lr0, config.adam_decay);
            let mut perturbation = rng::stream(seed(StreamTag::Perturbation));
            for d in data {
                let h = hindsight(d)?;
                out.push(if config.framework == Framework::Pto {
                    run_stage_pto(&mut theta, &mut adam, d, h, config, trial)?
                } else {
                    run_stage_dfl(&mut theta, &mut adam, &mut perturbation, d, h, config, trial)?
                });
            }
        }
    }
    Ok(out)
}

/// Runs all trials (concurrently when enabled) and returns the records in
/// trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<StageRecord>> {
    config.validate()?;
    let trials: Vec<usize> = (0..config.trials).collect();
    let per_trial = par::map_collect(&trials, config.parallel, |&k| run_trial(config, k));
    let mut all = Vec::with_capacity(config.trials * config.horizon);
    for r in per_trial {
        all.extend(r?);
    }
    Ok(all)
}

fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BocoError::io(dir, e))?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"").map_err(|e| BocoError::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| BocoError::io(&probe, e))
}

fn write_curves(dir: &Path, stats: &SummaryStats) -> Result<()> {
    io::write_file(&dir.join(io::reward_curve_file_name(stats.framework)), &io::curve_csv(&stats.reward_curve))?;
    io::write_file(&dir.join(io::feasibility_curve_file_name(stats.framework)), &io::curve_csv(&stats.feas_curve))
}

/// Runs the experiment and writes `<fw>_stages.csv`, the two curve files and
/// `summary.csv` (rebuilt from every stage file in the directory).
pub fn run_experiment(config: &ExperimentConfig) -> Result<SummaryStats> {
    config.validate()?;
    ensure_writable(&config.out)?;
    let records = run_trials(config)?;
    io::write_file(&config.out.join(io::stage_file_name(config.framework)), &io::stage_csv(&records))?;
    let stats = if records.is_empty() {
        empty_summary(config)
    } else {
        summarize(&records)?
    };
    write_curves(&config.out, &stats)?;
    report_summary_only(&config.out)?;
    Ok(stats)
}

fn empty_summary(config: &ExperimentConfig) -> SummaryStats {
    let nan = MeanStd { mean: f64::NAN, std: f64::NAN };
    SummaryStats {
        framework: config.framework,
        trials: config.trials,
        horizon: 0,
        per_trial: Vec::new(),
        reward_full: nan,
        reward_half: nan,
        feas_full: nan,
        feas_half: nan,
        reward_curve: Vec::new(),
        feas_curve: Vec::new(),
    }
}

fn collect_summaries(dir: &Path) -> Result<Vec<SummaryStats>> {
    let mut out = Vec::new();
    for fw in Framework::ALL {
        let path = dir.join(io::stage_file_name(fw));
        if !path.exists() {
            continue;
        }
        let records = io::read_stage_csv(&path)?;
        if !records.is_empty() {
            out.push(summarize(&records)?);
        }
    }
    Ok(out)
}

fn report_summary_only(dir: &Path) -> Result<Vec<SummaryStats>> {
    let stats = collect_summaries(dir)?;
    io::write_file(&dir.join(io::SUMMARY_FILE_NAME), &io::summary_csv(&stats))?;
    Ok(stats)
}

/// Recomputes `summary.csv` and all curve files from the stage files in `dir`.
pub fn report(dir: &Path) -> Result<Vec<SummaryStats>> {
    if !dir.is_dir() {
        return Err(BocoError::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let stats = report_summary_only(dir)?;
    for s in &stats {
        write_curves(dir, s)?;
    }
    Ok(stats)
}
