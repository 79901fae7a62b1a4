//! Synthetic covariate / weight-matrix stream.
//!
//! Covariates follow a three-dimensional ARMA(2,2) recurrence
//!
//! ```text
//! x_t = u_t + Φ1 x_{t-1} + Φ2 x_{t-2} + Θ1 u_{t-1} + Θ2 u_{t-2},   u_t ~ N(0, Σ_U)
//! ```
//!
//! and each covariate is mapped to a 3×4 weight matrix through
//!
//! ```text
//! ξ̃ = G (x + δ·deltaScale) + (B x) ∘ ε
//! ξ_i = max(clipFloor, ξ̃_i) / scale + shift
//! ```
//!
//! with δ ∈ R³ and ε ∈ R¹² standard Gaussian, then reshaped row-major.
//!
//! Per stage the generator consumes, in order: three normals for `u_t`
//! (`u_t = L z` with `L` the lower Cholesky factor of Σ_U), three for δ,
//! twelve for ε. Lags start at zero; `burn_in` stages are generated and
//! discarded before stage 0.

use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{BocoError, Result};
use crate::harness::io::fmt_float;
use crate::matrix::{WeightMatrix, ENTRIES};
use crate::rng::{self, StreamRng};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];
pub type Loading = [[f64; 3]; ENTRIES];

#[derive(Clone, Debug, PartialEq)]
pub struct ArmaConfig {
    pub phi1: Mat3,
    pub phi2: Mat3,
    pub theta1: Mat3,
    pub theta2: Mat3,
    pub sigma_u: Mat3,
    pub g: Loading,
    pub b: Loading,
    pub clip_floor: f64,
    pub scale: f64,
    pub shift: f64,
    pub delta_scale: f64,
    pub burn_in: usize,
}

const G_PATTERN: [f64; 3] = [0.8, 0.1, 0.1];

const B_PATTERN: [[f64; 3]; ENTRIES] = [
    [0.0, -1.0, -1.0],
    [-1.0, 0.0, -1.0],
    [-1.0, -1.0, 0.0],
    [0.0, -1.0, 1.0],
    [-1.0, 0.0, 1.0],
    [-1.0, 1.0, 0.0],
    [0.0, 1.0, -1.0],
    [1.0, 0.0, -1.0],
    [1.0, -1.0, 0.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
];

impl Default for ArmaConfig {
    fn default() -> Self {
        // G cycles the (0.8, 0.1, 0.1) pattern so that row k puts 0.8 on
        // covariate k mod 3.
        let g = std::array::from_fn(|k| {
            std::array::from_fn(|j| 2.5 * G_PATTERN[(j + 3 - k % 3) % 3])
        });
        let b = std::array::from_fn(|k| std::array::from_fn(|j| 7.5 * B_PATTERN[k][j]));
        ArmaConfig {
            phi1: [[0.5, -0.9, 0.0], [1.1, -0.7, 0.0], [0.0, 0.0, 0.5]],
            phi2: [[0.0, -0.5, 0.0], [-0.5, 0.0, 0.0], [0.0, 0.0, 0.0]],
            theta1: [[0.4, 0.8, 0.0], [-1.1, -0.3, 0.0], [0.0, 0.0, 0.0]],
            theta2: [[0.0, -0.8, 0.0], [-1.1, 0.0, 0.0], [0.0, 0.0, 0.0]],
            sigma_u: [[1.0, 0.5, 0.0], [0.5, 1.2, 0.5], [0.0, 0.5, 0.8]],
            g,
            b,
            clip_floor: -100.0,
            scale: 100.0,
            shift: 2.0,
            delta_scale: 0.25,
            burn_in: 0,
        }
    }
}

impl ArmaConfig {
    /// Lower-triangular factor `L` with `L Lᵀ = Σ_U`.
    ///
    /// Σ_U must be symmetric positive semidefinite; singular matrices (for
    /// example Σ_U = 0) get zero columns where the pivot vanishes.
    pub fn innovation_factor(&self) -> Result<Mat3> {
        let s = &self.sigma_u;
        if s.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BocoError::NumericDomain("Σ_U has non-finite entries".into()));
        }
        let scale = s.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = 1e-12 * scale.max(1.0);
        for i in 0..3 {
            for j in 0..i {
                if (s[i][j] - s[j][i]).abs() > tol {
                    return Err(BocoError::Factorization(format!(
                        "Σ_U is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| s[i][j]));
        if let Some(&bad) = eig.eigenvalues.iter().find(|&&e| e < -tol) {
            return Err(BocoError::Factorization(format!(
                "Σ_U has negative eigenvalue {bad}"
            )));
        }

        let mut l = [[0.0; 3]; 3];
        for j in 0..3 {
            let d = s[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if d <= tol {
                // Zero pivot on a PSD matrix: the column below is zero too.
                continue;
            }
            l[j][j] = d.sqrt();
            for i in j + 1..3 {
                let off = s[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = off / l[j][j];
            }
        }
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        self.innovation_factor()?;
        let scalars = [self.clip_floor, self.scale, self.shift, self.delta_scale];
        if scalars.iter().any(|v| !v.is_finite()) || self.scale == 0.0 {
            return Err(BocoError::Argument(
                "clip floor, scale, shift and delta scale must be finite with scale ≠ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Lagged covariates and innovations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ArmaState {
    pub x_prev: Vec3,
    pub x_prev2: Vec3,
    pub u_prev: Vec3,
    pub u_prev2: Vec3,
}

/// One observation pair `(x_t, A_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageDatum {
    pub t: usize,
    pub x: Vec3,
    pub a: WeightMatrix,
}

#[inline]
fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(BocoError::NumericDomain(format!("{what} has non-finite components")))
    }
}

/// Advances the recurrence by one stage with innovation `u_t` and returns `x_t`.
pub fn arma_step(state: &mut ArmaState, config: &ArmaConfig, u_t: &Vec3) -> Result<Vec3> {
    check_finite(u_t, "innovation")?;
    check_finite(
        &[state.x_prev, state.x_prev2, state.u_prev, state.u_prev2].concat(),
        "ARMA lag state",
    )?;
    let terms = [
        mat_vec(&config.phi1, &state.x_prev),
        mat_vec(&config.phi2, &state.x_prev2),
        mat_vec(&config.theta1, &state.u_prev),
        mat_vec(&config.theta2, &state.u_prev2),
    ];
    let x: Vec3 = std::array::from_fn(|i| u_t[i] + terms.iter().map(|t| t[i]).sum::<f64>());
    check_finite(&x, "covariate")?;
    state.x_prev2 = state.x_prev;
    state.x_prev = x;
    state.u_prev2 = state.u_prev;
    state.u_prev = *u_t;
    Ok(x)
}

/// Maps a covariate and its noise draws to the clipped, shifted weight matrix.
pub fn synthesize_weights(
    x: &Vec3,
    delta: &Vec3,
    eps: &[f64; ENTRIES],
    config: &ArmaConfig,
) -> Result<WeightMatrix> {
    check_finite(x, "covariate")?;
    check_finite(delta, "δ")?;
    check_finite(eps, "ε")?;
    let shifted: Vec3 = std::array::from_fn(|j| x[j] + delta[j] * config.delta_scale);
    let flat: [f64; ENTRIES] = std::array::from_fn(|k| {
        let g = &config.g[k];
        let b = &config.b[k];
        let mean = g[0] * shifted[0] + g[1] * shifted[1] + g[2] * shifted[2];
        let spread = b[0] * x[0] + b[1] * x[1] + b[2] * x[2];
        let raw = mean + spread * eps[k];
        raw.max(config.clip_floor) / config.scale + config.shift
    });
    Ok(WeightMatrix::from_flat(&flat))
}

/// Iterator over an ARMA stream. Owns its lag state and random stream.
pub struct ArmaStream {
    config: ArmaConfig,
    factor: Mat3,
    state: ArmaState,
    rng: StreamRng,
    t: usize,
}

impl ArmaStream {
    pub fn new(config: ArmaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let factor = config.innovation_factor()?;
        let mut stream = ArmaStream {
            config,
            factor,
            state: ArmaState::default(),
            rng: rng::stream(seed),
            t: 0,
        };
        for _ in 0..stream.config.burn_in {
            stream.draw()?;
        }
        Ok(stream)
    }

    fn draw(&mut self) -> Result<(Vec3, WeightMatrix)> {
        let mut z = [0.0; 3];
        rng::fill_std_normal(&mut self.rng, &mut z);
        let u = mat_vec(&self.factor, &z);
        let mut delta = [0.0; 3];
        rng::fill_std_normal(&mut self.rng, &mut delta);
        let mut eps = [0.0; ENTRIES];
        rng::fill_std_normal(&mut self.rng, &mut eps);
        let x = arma_step(&mut self.state, &self.config, &u)?;
        let a = synthesize_weights(&x, &delta, &eps, &self.config)?;
        Ok((x, a))
    }

    pub fn next_datum(&mut self) -> Result<StageDatum> {
        let (x, a) = self.draw()?;
        let datum = StageDatum { t: self.t, x, a };
        self.t += 1;
        Ok(datum)
    }
}

/// The first `horizon` stages of the stream seeded by `seed`.
pub fn generate_stream(config: &ArmaConfig, seed: u64, horizon: usize) -> Result<Vec<StageDatum>> {
    let mut stream = ArmaStream::new(config.clone(), seed)?;
    (0..horizon).map(|_| stream.next_datum()).collect()
}

pub const STREAM_CSV_HEADER: &str =
    "t,x1,x2,x3,a11,a12,a13,a14,a21,a22,a23,a24,a31,a32,a33,a34";

/// Writes a stream as CSV (`t, x1..x3, a11..a34`, row-major).
pub fn write_stream_csv<W: Write>(data: &[StageDatum], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{STREAM_CSV_HEADER}")?;
    for d in data {
        write!(out, "{}", d.t)?;
        for v in d.x.iter().copied().chain(d.a.iter()) {
            write!(out, ",{}", fmt_float(v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn default_constants() {
        let c = ArmaConfig::default();
        assert_eq!(c.phi1[0], [0.5, -0.9, 0.0]);
        assert_eq!(c.theta2[1], [-1.1, 0.0, 0.0]);
        assert_eq!(c.g[0], [2.0, 0.25, 0.25]);
        assert_eq!(c.g[4], [0.25, 2.0, 0.25]);
        assert_eq!(c.g[11], [0.25, 0.25, 2.0]);
        assert_eq!(c.b[3], [0.0, -7.5, 7.5]);
        assert_eq!(c.b[11], [7.5, 7.5, 0.0]);
        assert_eq!((c.clip_floor, c.scale, c.shift, c.delta_scale), (-100.0, 100.0, 2.0, 0.25));
    }

    #[test]
    fn cholesky_reconstructs_sigma() {
        let c = ArmaConfig::default();
        let l = c.innovation_factor().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - c.sigma_u[i][j]).abs() < 1e-14);
            }
            for j in i + 1..3 {
                assert_eq!(l[i][j], 0.0);
            }
        }
    }

    #[test]
    fn rejects_indefinite_or_asymmetric_sigma() {
        let mut c = ArmaConfig { sigma_u: [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]], ..ArmaConfig::default() };
        assert!(matches!(c.innovation_factor(), Err(BocoError::Factorization(_))));
        c.sigma_u = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(c.innovation_factor().is_err());
        c.sigma_u = [[0.0; 3]; 3];
        assert_eq!(c.innovation_factor().unwrap(), [[0.0; 3]; 3]);
    }

    #[test]
    fn step_zero_and_first_step() {
        let c = ArmaConfig::default();
        let mut s = ArmaState::default();
        assert_eq!(arma_step(&mut s, &c, &[0.0; 3]).unwrap(), [0.0; 3]);
        let mut s = ArmaState::default();
        assert_eq!(arma_step(&mut s, &c, &[1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(s.u_prev, [1.0, 0.0, 0.0]);
        assert_eq!(s.x_prev, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn step_rejects_non_finite() {
        let c = ArmaConfig::default();
        let mut s = ArmaState::default();
        assert!(matches!(
            arma_step(&mut s, &c, &[f64::NAN, 0.0, 0.0]),
            Err(BocoError::NumericDomain(_))
        ));
        s.x_prev2 = [f64::INFINITY, 0.0, 0.0];
        assert!(arma_step(&mut s, &c, &[0.0; 3]).is_err());
    }

    #[test]
    fn step_matches_dense_evaluation() {
        // Oracle: stack (u, x₋₁, x₋₂, u₋₁, u₋₂) into a 15-vector and multiply
        // by the dense 3×15 block matrix [I Φ1 Φ2 Θ1 Θ2].
        let c = ArmaConfig::default();
        let mut rng = rng::stream(11);
        for _ in 0..200 {
            let mut s = ArmaState {
                x_prev: std::array::from_fn(|_| rng.random_range(-5.0..5.0)),
                x_prev2: std::array::from_fn(|_| rng.random_range(-5.0..5.0)),
                u_prev: std::array::from_fn(|_| rng.random_range(-5.0..5.0)),
                u_prev2: std::array::from_fn(|_| rng.random_range(-5.0..5.0)),
            };
            let u: Vec3 = std::array::from_fn(|_| rng.random_range(-5.0..5.0));
            let mut stacked = Vec::new();
            stacked.extend_from_slice(&u);
            stacked.extend_from_slice(&s.x_prev);
            stacked.extend_from_slice(&s.x_prev2);
            stacked.extend_from_slice(&s.u_prev);
            stacked.extend_from_slice(&s.u_prev2);
            let blocks = [
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                c.phi1,
                c.phi2,
                c.theta1,
                c.theta2,
            ];
            let mut expect = [0.0; 3];
            for (i, e) in expect.iter_mut().enumerate() {
                for col in 0..15 {
                    *e += blocks[col / 3][i][col % 3] * stacked[col];
                }
            }
            let got = arma_step(&mut s, &c, &u).unwrap();
            for i in 0..3 {
                assert!((got[i] - expect[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn synthesize_zero_case_and_clip() {
        let c = ArmaConfig::default();
        let a = synthesize_weights(&[0.0; 3], &[0.0; 3], &[0.0; ENTRIES], &c).unwrap();
        assert_eq!(a, WeightMatrix::filled(2.0));
        // G ≥ 0 entrywise, so a hugely negative δ drives every ξ̃ far below the floor.
        let a = synthesize_weights(&[0.0; 3], &[-4e6; 3], &[0.0; ENTRIES], &c).unwrap();
        assert_eq!(a, WeightMatrix::filled(1.0));
    }

    #[test]
    fn synthesize_matches_direct_formula() {
        let c = ArmaConfig::default();
        let mut rng = rng::stream(5);
        for _ in 0..200 {
            let x: Vec3 = std::array::from_fn(|_| rng.random_range(-8.0..8.0));
            let d: Vec3 = std::array::from_fn(|_| rng::std_normal(&mut rng));
            let e: [f64; ENTRIES] = std::array::from_fn(|_| rng::std_normal(&mut rng));
            let a = synthesize_weights(&x, &d, &e, &c).unwrap();
            for row in 0..3 {
                for col in 0..4 {
                    let k = 4 * row + col;
                    let mut raw = 0.0;
                    for j in 0..3 {
                        raw += c.g[k][j] * (x[j] + d[j] / 4.0);
                    }
                    let bx: f64 = (0..3).map(|j| c.b[k][j] * x[j]).sum();
                    raw += bx * e[k];
                    let expect = raw.max(-100.0) / 100.0 + 2.0;
                    assert!((a.get(row, col) - expect).abs() < 1e-12);
                    assert!(a.get(row, col) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn stream_is_deterministic_and_bounded() {
        let c = ArmaConfig::default();
        assert!(generate_stream(&c, 3, 0).unwrap().is_empty());
        let s1 = generate_stream(&c, 3, 200).unwrap();
        let s2 = generate_stream(&c, 3, 200).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|d| d.a.min_entry() >= 1.0));
        assert_ne!(s1, generate_stream(&c, 4, 200).unwrap());
    }

    #[test]
    fn zero_noise_stream_is_constant() {
        let c = ArmaConfig { sigma_u: [[0.0; 3]; 3], b: [[0.0; 3]; ENTRIES], delta_scale: 0.0, ..ArmaConfig::default() };
        let s = generate_stream(&c, 9, 50).unwrap();
        assert!(s.iter().all(|d| d.a == WeightMatrix::filled(2.0)));
    }

    #[test]
    fn burn_in_shifts_the_stream() {
        let c = ArmaConfig::default();
        let plain = generate_stream(&c, 1, 10).unwrap();
        let burned = generate_stream(&ArmaConfig { burn_in: 5, ..c }, 1, 5).unwrap();
        assert_eq!(burned[0].x, plain[5].x);
        assert_eq!(burned[0].t, 0);
    }
}
