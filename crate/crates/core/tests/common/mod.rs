//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use boco::knapsack::{KnapsackInstance, Quantities};
use boco::WeightMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn used(a: &WeightMatrix, z: &Quantities) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (r, o) in out.iter_mut().enumerate() {
        *o = a.0[r][0] * f64::from(z[0]) + a.0[r][1] * f64::from(z[1]) + a.0[r][2] * f64::from(z[2]) + a.0[r][3] * f64::from(z[3]);
    }
    out
}

pub fn fits(a: &WeightMatrix, z: &Quantities, inst: &KnapsackInstance) -> bool {
    let u = used(a, z);
    (0..3).all(|r| u[r] <= inst.b[r])
}

pub fn value(a: &WeightMatrix, z: &Quantities, inst: &KnapsackInstance) -> f64 {
    let u = used(a, z);
    // Single running sum, items first.
    let mut total = 0.0;
    for j in 0..4 {
        total += inst.c[j] * f64::from(z[j]);
    }
    for r in 0..3 {
        total += inst.q[r] * (inst.b[r] - u[r]).max(0.0);
    }
    total
}

fn lattice(cap: u32) -> impl Iterator<Item = Quantities> {
    (0..=cap).flat_map(move |a| (0..=cap).flat_map(move |b| (0..=cap).flat_map(move |c| (0..=cap).map(move |d| [a, b, c, d]))))
}

/// Exhaustive deterministic optimum; first maximizer in lexicographic order.
pub fn brute_deterministic(a: &WeightMatrix, inst: &KnapsackInstance, cap: u32) -> (Quantities, f64) {
    let mut best = ([0; 4], f64::NEG_INFINITY);
    for z in lattice(cap) {
        if fits(a, &z, inst) {
            let v = value(a, &z, inst);
            if v > best.1 {
                best = (z, v);
            }
        }
    }
    best
}

/// Exhaustive chance-constrained optimum over weighted scenarios.
pub fn brute_chance(mats: &[WeightMatrix], weights: &[f64], alpha: f64, inst: &KnapsackInstance, cap: u32) -> (Quantities, f64) {
    let mut best = ([0; 4], f64::NEG_INFINITY);
    for z in lattice(cap) {
        let mut mass = 0.0;
        let mut v = 0.0;
        for (a, &w) in mats.iter().zip(weights) {
            if fits(a, &z, inst) {
                mass += w;
                v += w * value(a, &z, inst);
            }
        }
        if mass >= alpha - 1e-12 && v > best.1 {
            best = (z, v);
        }
    }
    best
}

pub fn random_matrix<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> WeightMatrix {
    WeightMatrix(std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(lo..hi))))
}

pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

pub fn random_instance<R: Rng>(rng: &mut R) -> KnapsackInstance {
    KnapsackInstance {
        c: std::array::from_fn(|_| rng.random_range(4.0..20.0)),
        b: std::array::from_fn(|_| rng.random_range(4.0..12.0)),
        q: std::array::from_fn(|_| rng.random_range(0.0..5.0)),
    }
}

/// Central difference of a scalar function at coordinate `k`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], k: usize, h: f64) -> f64 {
    let mut p = at.to_vec();
    p[k] = at[k] + h;
    let up = f(&p);
    p[k] = at[k] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
