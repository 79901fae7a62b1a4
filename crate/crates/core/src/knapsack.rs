//! Integer knapsack with salvage, its chance-constrained scenario version,
//! and the reward / regret bookkeeping built on them.
//!
//! Objective for decision `z ∈ N⁴` under weights `A`:
//!
//! ```text
//! cᵀz + qᵀ[b − A z]⁺     subject to  A z ≤ b
//! ```
//!
//! The chance-constrained program over weighted scenarios `(Aⁱ, wⁱ)` is
//!
//! ```text
//! max  Σᵢ wⁱ·1[Aⁱz ≤ b]·(cᵀz + qᵀ[b − Aⁱz]⁺)   s.t.  Σᵢ wⁱ·1[Aⁱz ≤ b] ≥ α
//! ```
//!
//! Both are solved exactly by depth-first enumeration of the capped lattice
//! `{0..=cap}⁴`. Two prunes keep the search small: feasibility is monotone
//! (entries are nonnegative, so once a scenario is violated it stays violated
//! for every larger `z`), and a per-scenario capacity bound on the remaining
//! items cuts subtrees that cannot beat the incumbent. Ties go to the
//! lexicographically smallest `z`.
//!
//! Leaves are scored with [`objective`] and [`is_feasible`], the same
//! functions an exhaustive enumerator would use, so the solver returns
//! bit-identical values to brute force.

use std::cell::Cell;

use crate::error::{BocoError, Result};
use crate::matrix::{WeightMatrix, COLS, ROWS};

/// Item quantities.
pub type Quantities = [u32; COLS];

/// Slack on the chance constraint for simplex rounding.
pub const CHANCE_TOLERANCE: f64 = 1e-12;

/// Default per-coordinate cap for predicted (possibly tiny) weight matrices.
pub const DEFAULT_Z_CAP: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct KnapsackInstance {
    /// Unit reward per item.
    pub c: [f64; COLS],
    /// Resource capacities.
    pub b: [f64; ROWS],
    /// Unit salvage value per unused resource.
    pub q: [f64; ROWS],
}

impl Default for KnapsackInstance {
    fn default() -> Self {
        KnapsackInstance {
            c: [12.0; COLS],
            b: [8.0; ROWS],
            q: [3.0; ROWS],
        }
    }
}

impl KnapsackInstance {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c.iter().chain(&self.q).all(|v| v.is_finite() && *v >= 0.0)
            && self.b.iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(BocoError::Argument(
                "knapsack instance needs c, q ≥ 0 and b > 0, all finite".into(),
            ))
        }
    }

    /// Reward of the empty decision, `qᵀb`.
    pub fn salvage_only(&self) -> f64 {
        (0..ROWS).map(|i| self.q[i] * self.b[i]).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub z: Quantities,
    /// The solver's objective at `z` (weighted over scenarios for the
    /// chance-constrained program).
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reward {
    pub reward: f64,
    pub feasible: bool,
}

/// A weighted scenario set with its feasibility target.
#[derive(Clone, Debug)]
pub struct ScenarioSet {
    matrices: Vec<WeightMatrix>,
    weights: Vec<f64>,
    alpha: f64,
}

impl ScenarioSet {
    pub fn new(matrices: Vec<WeightMatrix>, weights: Vec<f64>, alpha: f64) -> Result<Self> {
        if matrices.is_empty() {
            return Err(BocoError::Argument("empty scenario set".into()));
        }
        if matrices.len() != weights.len() {
            return Err(BocoError::Argument(format!(
                "{} scenarios but {} weights",
                matrices.len(),
                weights.len()
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(BocoError::Argument(format!("α = {alpha} outside (0, 1]")));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(BocoError::Argument("scenario weights must be finite and ≥ 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(BocoError::Argument(format!("scenario weights sum to {total}")));
        }
        for m in &matrices {
            check_matrix(m)?;
        }
        Ok(ScenarioSet {
            matrices,
            weights,
            alpha,
        })
    }

    pub fn matrices(&self) -> &[WeightMatrix] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total weight of scenarios under which `z` is feasible.
    pub fn feasible_weight(&self, z: &Quantities, inst: &KnapsackInstance) -> f64 {
        feasible_weight(&self.matrices, &self.weights, z, inst)
    }

    /// The chance-constrained objective at `z`.
    pub fn objective(&self, z: &Quantities, inst: &KnapsackInstance) -> f64 {
        chance_objective(&self.matrices, &self.weights, z, inst)
    }
}

fn check_matrix(a: &WeightMatrix) -> Result<()> {
    if a.iter().all(|v| v.is_finite() && v >= 0.0) {
        Ok(())
    } else {
        Err(BocoError::Argument(format!(
            "weight matrix must be finite and nonnegative: {a:?}"
        )))
    }
}

/// `A z`, accumulated left to right over items.
#[inline]
pub fn consumption(a: &WeightMatrix, z: &Quantities) -> [f64; ROWS] {
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for j in 0..COLS {
            s += a.get(i, j) * z[j] as f64;
        }
        s
    })
}

#[inline]
pub fn is_feasible(a: &WeightMatrix, z: &Quantities, inst: &KnapsackInstance) -> bool {
    consumption(a, z).iter().zip(&inst.b).all(|(u, cap)| u <= cap)
}

/// `cᵀz + qᵀ[b − A z]⁺`, ignoring feasibility.
#[inline]
pub fn objective(z: &Quantities, a: &WeightMatrix, inst: &KnapsackInstance) -> f64 {
    let used = consumption(a, z);
    let mut v = 0.0;
    for j in 0..COLS {
        v += inst.c[j] * z[j] as f64;
    }
    for i in 0..ROWS {
        v += inst.q[i] * (inst.b[i] - used[i]).max(0.0);
    }
    v
}

/// Realized reward: the objective when `A z ≤ b`, zero otherwise.
pub fn evaluate_reward(z: &Quantities, a: &WeightMatrix, inst: &KnapsackInstance) -> Reward {
    if is_feasible(a, z, inst) {
        Reward {
            reward: objective(z, a, inst),
            feasible: true,
        }
    } else {
        Reward {
            reward: 0.0,
            feasible: false,
        }
    }
}

fn feasible_weight(
    mats: &[WeightMatrix],
    weights: &[f64],
    z: &Quantities,
    inst: &KnapsackInstance,
) -> f64 {
    let mut total = 0.0;
    for (a, &w) in mats.iter().zip(weights) {
        if is_feasible(a, z, inst) {
            total += w;
        }
    }
    total
}

fn chance_objective(
    mats: &[WeightMatrix],
    weights: &[f64],
    z: &Quantities,
    inst: &KnapsackInstance,
) -> f64 {
    let mut total = 0.0;
    for (a, &w) in mats.iter().zip(weights) {
        if is_feasible(a, z, inst) {
            total += w * objective(z, a, inst);
        }
    }
    total
}

thread_local! {
    static DETERMINISTIC_SOLVES: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`solve_deterministic`] calls made on the current thread.
pub fn deterministic_solve_count() -> u64 {
    DETERMINISTIC_SOLVES.with(Cell::get)
}

/// Maximizes the deterministic knapsack over `{z : z_j ≤ z_cap, A z ≤ b}`.
pub fn solve_deterministic(a: &WeightMatrix, inst: &KnapsackInstance, z_cap: u32) -> Result<Decision> {
    DETERMINISTIC_SOLVES.with(|c| c.set(c.get() + 1));
    check_matrix(a)?;
    inst.validate()?;
    Ok(LatticeSearch::new(std::slice::from_ref(a), &[1.0], 1.0, inst, z_cap).run())
}

/// Maximizes the chance-constrained scenario program over the capped lattice.
///
/// `z = 0` satisfies every scenario, so the problem is never infeasible.
pub fn solve_chance(scenarios: &ScenarioSet, inst: &KnapsackInstance, z_cap: u32) -> Result<Decision> {
    inst.validate()?;
    Ok(LatticeSearch::new(
        &scenarios.matrices,
        &scenarios.weights,
        scenarios.alpha,
        inst,
        z_cap,
    )
    .run())
}

/// Best achievable reward once the true weights are known.
///
/// When every entry is at least 1, each unit consumes at least one unit of
/// every resource and `Σ z ≤ min b`, which caps the search far below
/// `fallback_cap`. Otherwise `fallback_cap` bounds each coordinate.
pub fn hindsight_optimum(a_true: &WeightMatrix, inst: &KnapsackInstance, fallback_cap: u32) -> Result<Decision> {
    check_matrix(a_true)?;
    inst.validate()?;
    let cap = if a_true.min_entry() >= 1.0 {
        inst.b.iter().fold(f64::INFINITY, |m, &v| m.min(v)).floor() as u32
    } else {
        fallback_cap
    };
    Ok(LatticeSearch::new(std::slice::from_ref(a_true), &[1.0], 1.0, inst, cap).run())
}

/// Reward-form regret of `z` against a precomputed hindsight value.
#[inline]
pub fn regret_against(hindsight: f64, z: &Quantities, a_true: &WeightMatrix, inst: &KnapsackInstance) -> f64 {
    hindsight - evaluate_reward(z, a_true, inst).reward
}

/// Hindsight reward minus realized reward; in `[0, C]`.
pub fn regret(z: &Quantities, a_true: &WeightMatrix, inst: &KnapsackInstance, fallback_cap: u32) -> Result<f64> {
    let best = hindsight_optimum(a_true, inst, fallback_cap)?;
    Ok(regret_against(best.value, z, a_true, inst))
}

/// Depth-first branch-and-bound over the capped lattice.
struct LatticeSearch<'a> {
    mats: &'a [WeightMatrix],
    weights: &'a [f64],
    alpha_floor: f64,
    inst: &'a KnapsackInstance,
    cap: u32,
    /// Net value of one unit of item j under scenario i when feasible:
    /// `c_j − Σ_ρ q_ρ A_ρj`.
    rates: Vec<[f64; COLS]>,
    z: Quantities,
    best: Option<Decision>,
}

struct Node {
    active: Vec<usize>,
    used: Vec<[f64; ROWS]>,
    fixed: Vec<f64>,
}

impl<'a> LatticeSearch<'a> {
    fn new(
        mats: &'a [WeightMatrix],
        weights: &'a [f64],
        alpha: f64,
        inst: &'a KnapsackInstance,
        cap: u32,
    ) -> Self {
        let rates = mats
            .iter()
            .map(|a| std::array::from_fn(|j| inst.c[j] - (0..ROWS).map(|i| inst.q[i] * a.get(i, j)).sum::<f64>()))
            .collect();
        LatticeSearch {
            mats,
            weights,
            alpha_floor: alpha - CHANCE_TOLERANCE,
            inst,
            cap,
            rates,
            z: [0; COLS],
            best: None,
        }
    }

    fn run(mut self) -> Decision {
        let n = self.mats.len();
        let base = self.inst.salvage_only();
        let root = Node {
            active: (0..n).collect(),
            used: vec![[0.0; ROWS]; n],
            fixed: vec![base; n],
        };
        self.descend(0, &root);
        // z = 0 is feasible for every scenario, so a leaf was always scored.
        self.best.expect("the zero decision is always feasible")
    }

    /// Largest count of item `col` scenario `i` can still absorb.
    fn max_units(&self, i: usize, col: usize, used: &[f64; ROWS]) -> u32 {
        let a = &self.mats[i];
        let mut limit = self.cap;
        for row in 0..ROWS {
            let w = a.get(row, col);
            if w <= 0.0 {
                continue;
            }
            let cap_row = self.inst.b[row];
            let fits = |v: u32| used[row] + w * v as f64 <= cap_row;
            let guess = ((cap_row - used[row]) / w).floor();
            let mut v = if guess.is_finite() && guess >= 0.0 {
                (guess.min(limit as f64)) as u32
            } else {
                0
            };
            // Floor-division estimate, corrected against the exact test.
            while v < limit && fits(v + 1) {
                v += 1;
            }
            while v > 0 && !fits(v) {
                v -= 1;
            }
            limit = limit.min(v);
        }
        limit
    }

    /// Upper bound on `Σ_{j ≥ from} r_ij z_j` given the remaining slack.
    fn rest_bound(&self, i: usize, from: usize, used: &[f64; ROWS]) -> f64 {
        let rates = &self.rates[i];
        let a = &self.mats[i];
        let positive: Vec<usize> = (from..COLS).filter(|&j| rates[j] > 0.0).collect();
        if positive.is_empty() {
            return 0.0;
        }
        let mut bound: f64 = positive.iter().map(|&j| rates[j] * self.cap as f64).sum();
        for row in 0..ROWS {
            if positive.iter().any(|&j| a.get(row, j) <= 0.0) {
                continue;
            }
            let best_ratio = positive
                .iter()
                .map(|&j| rates[j] / a.get(row, j))
                .fold(0.0_f64, f64::max);
            let slack = (self.inst.b[row] - used[row]).max(0.0);
            bound = bound.min(slack * best_ratio);
        }
        bound
    }

    fn weight_of(&self, members: impl Iterator<Item = usize>) -> f64 {
        let mut total = 0.0;
        for i in members {
            total += self.weights[i];
        }
        total
    }

    fn descend(&mut self, depth: usize, node: &Node) {
        if depth == COLS {
            self.score_leaf();
            return;
        }

        let limits: Vec<u32> = node
            .active
            .iter()
            .zip(&node.used)
            .map(|(&i, used)| self.max_units(i, depth, used))
            .collect();

        // Largest count that keeps at least α of the weight feasible.
        let mut levels = limits.clone();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        levels.dedup();
        let top = levels.into_iter().find(|&level| {
            let members = node
                .active
                .iter()
                .zip(&limits)
                .filter(|(_, &lim)| lim >= level)
                .map(|(&i, _)| i);
            self.weight_of(members) >= self.alpha_floor
        });
        let Some(top) = top else { return };

        for v in (0..=top).rev() {
            let mut child = Node {
                active: Vec::with_capacity(node.active.len()),
                used: Vec::with_capacity(node.active.len()),
                fixed: Vec::with_capacity(node.active.len()),
            };
            for (k, &i) in node.active.iter().enumerate() {
                if limits[k] < v {
                    continue;
                }
                let a = &self.mats[i];
                let used = std::array::from_fn(|row| node.used[k][row] + a.get(row, depth) * v as f64);
                child.active.push(i);
                child.used.push(used);
                child.fixed.push(node.fixed[k] + self.rates[i][depth] * v as f64);
            }

            if let Some(best) = self.best {
                let mut bound = 0.0;
                for (k, &i) in child.active.iter().enumerate() {
                    bound += self.weights[i] * (child.fixed[k] + self.rest_bound(i, depth + 1, &child.used[k]));
                }
                let margin = 1e-9 * best.value.abs().max(1.0);
                if bound < best.value - margin {
                    continue;
                }
            }

            self.z[depth] = v;
            self.descend(depth + 1, &child);
        }
        self.z[depth] = 0;
    }

    fn score_leaf(&mut self) {
        let z = self.z;
        if feasible_weight(self.mats, self.weights, &z, self.inst) < self.alpha_floor {
            return;
        }
        let value = chance_objective(self.mats, self.weights, &z, self.inst);
        let better = match self.best {
            None => true,
            Some(b) => value > b.value || (value == b.value && z < b.z),
        };
        if better {
            self.best = Some(Decision { z, value });
        }
    }
}
