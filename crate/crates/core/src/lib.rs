//! Bayesian online contextual optimization.
//!
//! A Gibbs-posterior sequential Monte Carlo sampler over the parameters of a
//! sigmoid-linear predictor, coupled to an exact integer-knapsack decision
//! oracle. The crate also carries the three comparison frameworks (Gibbs
//! stochastic predictor, MSE predict-then-optimize, score-function
//! decision-focused learning) and the experiment harness that drives all four
//! on a synthetic ARMA(2,2) data stream.
//!
//! Module map:
//!
//! - [`matrix`]: the 3×4 item-weight matrix shared by every layer.
//! - [`arma`]: seed-driven covariate / weight-matrix stream.
//! - [`predictor`]: the 48-parameter hypothesis `2·S(Wx + b)` and its Jacobian.
//! - [`knapsack`]: deterministic and chance-constrained knapsack solvers,
//!   reward, hindsight optimum and regret.
//! - [`smc`]: particle cloud, Gibbs reweighting, Liu-West rejuvenation and
//!   the theory diagnostics.
//! - [`baselines`]: Adam, MSE gradient, score-function gradient, BGS draw.
//! - [`harness`]: online loop, trials, summaries and file formats.
//!
//! Trials run on rayon when the `parallel` feature is enabled (the default);
//! without it every parallel section falls back to a plain sequential loop
//! and produces bit-identical output.

pub mod arma;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod knapsack;
pub mod matrix;
mod par;
pub mod predictor;
pub mod rng;
pub mod smc;

pub use error::{BocoError, Result};
pub use matrix::{WeightMatrix, COLS, ENTRIES, ROWS};
