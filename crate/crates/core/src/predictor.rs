//! Sigmoid-linear hypothesis `Â = 2·S(W x + b)`.
//!
//! `W` is 12×3 and `b` has 12 entries; output entry `k` of the 12-vector is
//! placed row-major into the 3×4 predicted matrix. Parameters are stored flat
//! as `W` row-major (indices `0..36`, `W[k][j]` at `3k + j`) followed by the
//! bias (`36..48`).

use crate::arma::Vec3;
use crate::matrix::{WeightMatrix, ENTRIES};

pub const COVARIATES: usize = 3;
pub const WEIGHT_PARAMS: usize = ENTRIES * COVARIATES;
pub const THETA_DIM: usize = WEIGHT_PARAMS + ENTRIES;

/// Flat parameter vector of the predictor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaVec(pub [f64; THETA_DIM]);

impl Default for ThetaVec {
    fn default() -> Self {
        ThetaVec([0.0; THETA_DIM])
    }
}

impl ThetaVec {
    #[inline]
    pub const fn weight_index(output: usize, covariate: usize) -> usize {
        output * COVARIATES + covariate
    }

    #[inline]
    pub const fn bias_index(output: usize) -> usize {
        WEIGHT_PARAMS + output
    }

    #[inline]
    pub fn weight(&self, output: usize, covariate: usize) -> f64 {
        self.0[Self::weight_index(output, covariate)]
    }

    #[inline]
    pub fn bias(&self, output: usize) -> f64 {
        self.0[Self::bias_index(output)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Logistic function, branch-stable so that neither side overflows.
#[inline]
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn pre_activation(theta: &ThetaVec, x: &Vec3, k: usize) -> f64 {
    theta.weight(k, 0) * x[0] + theta.weight(k, 1) * x[1] + theta.weight(k, 2) * x[2] + theta.bias(k)
}

/// Predicted weight matrix; every entry lies in `(0, 2)`.
pub fn predict(theta: &ThetaVec, x: &Vec3) -> WeightMatrix {
    let flat: [f64; ENTRIES] = std::array::from_fn(|k| 2.0 * sigmoid(pre_activation(theta, x, k)));
    WeightMatrix::from_flat(&flat)
}

/// 12×48 Jacobian of the flat prediction with respect to θ.
///
/// Row `k` is nonzero only at `W[k][·]` and `b[k]`.
pub fn jacobian(theta: &ThetaVec, x: &Vec3) -> Box<[[f64; THETA_DIM]; ENTRIES]> {
    let mut jac = Box::new([[0.0; THETA_DIM]; ENTRIES]);
    for (k, row) in jac.iter_mut().enumerate() {
        let s = sigmoid(pre_activation(theta, x, k));
        let d = 2.0 * s * (1.0 - s);
        for j in 0..COVARIATES {
            row[ThetaVec::weight_index(k, j)] = d * x[j];
        }
        row[ThetaVec::bias_index(k)] = d;
    }
    jac
}

/// `Jᵀ g` for a gradient `g` over the 12 flat prediction entries, without
/// materializing the Jacobian.
pub fn pullback(theta: &ThetaVec, x: &Vec3, grad_pred: &[f64; ENTRIES]) -> [f64; THETA_DIM] {
    let mut out = [0.0; THETA_DIM];
    for (k, &g) in grad_pred.iter().enumerate() {
        let s = sigmoid(pre_activation(theta, x, k));
        let d = 2.0 * s * (1.0 - s) * g;
        for j in 0..COVARIATES {
            out[ThetaVec::weight_index(k, j)] = d * x[j];
        }
        out[ThetaVec::bias_index(k)] = d;
    }
    out
}
