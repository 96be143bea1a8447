//! One thermal-drift step: a two-outcome instrument that applies
//! `e^{∓τσ/2} ρ e^{∓τσ/2}` and records the direction.
//!
//! Outcome `m = +1` is the `e^{−τσ/2}` branch, taken with probability
//! `(cosh τ − sinh τ · tr(σρ)) / (2 cosh τ)`. With this convention a path
//! `(j_k, m_k)` drives `ρ` towards `e^{−βH}` for `H = (λ/N) Σ_k m_k σ_{j_k}`.
//! The normalization scale is `μ = 1/cosh τ`, the only value that makes the
//! instrument trace preserving.
//!
//! The post-state is computed from `A = cosh(τ/2) I − m sinh(τ/2) σ` acting on
//! rows and columns through the signed-permutation form of `σ`, in O(d²).

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::DensityMatrix;
use crate::pauli::PauliWord;

/// Branch probabilities below this abort the step.
pub const UNDERFLOW_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Direction {
    /// `m = +1`, the `e^{−τσ/2}` drift.
    Plus,
    /// `m = −1`, the `e^{+τσ/2}` drift.
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        d.as_i8()
    }
}

impl TryFrom<i8> for Direction {
    type Error = Error;

    fn try_from(m: i8) -> Result<Self> {
        match m {
            1 => Ok(Direction::Plus),
            -1 => Ok(Direction::Minus),
            other => Err(Error::InvalidArgument(format!("direction must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftStepSpec {
    word: PauliWord,
    tau: f64,
    mu: f64,
}

impl DriftStepSpec {
    pub fn new(word: PauliWord, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive and finite, got {tau}")));
        }
        if word.is_identity() {
            return Err(Error::AllIdentity);
        }
        Ok(Self {
            word,
            tau,
            mu: 1.0 / tau.cosh(),
        })
    }

    pub fn word(&self) -> &PauliWord {
        &self.word
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftOutcome {
    pub m: Direction,
    pub post_state: DensityMatrix,
    pub branch_prob: f64,
}

fn check_dims(word: &PauliWord, rho: &DensityMatrix) -> Result<()> {
    if word.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: word.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `tr(σρ)`, real for Hermitian `ρ`.
fn pauli_expectation(word: &PauliWord, rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let global = word.y_phase();
    let mut acc = Complex64::new(0.0, 0.0);
    for l in 0..word.dim() {
        acc += m[(l, word.flip(l))] * word.sign(l);
    }
    (global * acc).re
}

fn probability_of(tau: f64, expectation: f64, m: Direction) -> f64 {
    0.5 * (1.0 - m.sign() * tau.tanh() * expectation)
}

/// `(p_plus, p_minus)` from `tr(e^{∓τσ}ρ) = cosh τ ∓ sinh τ · tr(σρ)`.
pub fn branch_probabilities(spec: &DriftStepSpec, rho: &DensityMatrix) -> Result<(f64, f64)> {
    check_dims(&spec.word, rho)?;
    let e = pauli_expectation(&spec.word, rho);
    let p_plus = probability_of(spec.tau, e, Direction::Plus);
    Ok((p_plus, 1.0 - p_plus))
}

/// Applies `A ρ A` with `A = c I − s σ` in place, then renormalizes.
fn drift_kernel(word: &PauliWord, rho: &mut DensityMatrix, c: f64, s: f64) {
    let d = word.dim();
    let x = word.x_mask() as usize;
    let g = word.y_phase();
    let m = rho.matrix_mut();
    let data = m.as_mut_slice();
    // Column-major: entry (i, k) lives at k * d + i.
    if x == 0 {
        let f: Vec<f64> = (0..d).map(|l| c - s * g.re * word.sign(l)).collect();
        for k in 0..d {
            let col = &mut data[k * d..(k + 1) * d];
            for (i, z) in col.iter_mut().enumerate() {
                *z *= f[i] * f[k];
            }
        }
    } else {
        let phase: Vec<Complex64> = (0..d).map(|l| g * word.sign(l)).collect();
        let top = 1usize << (63 - x.leading_zeros());
        for k in 0..d {
            if k & top != 0 {
                continue;
            }
            let k2 = k ^ x;
            let (pk, pk2) = (phase[k] * s, phase[k2] * s);
            for i in 0..d {
                if i & top != 0 {
                    continue;
                }
                let i2 = i ^ x;
                let (a, b, cc, dd) = (data[k * d + i], data[k * d + i2], data[k2 * d + i], data[k2 * d + i2]);
                // Row pass: (Aρ)[i,·] = c ρ[i,·] − s φ(i2) ρ[i2,·].
                let (pi, pi2) = (phase[i] * s, phase[i2] * s);
                let r_ik = a * c - pi2 * b;
                let r_i2k = b * c - pi * a;
                let r_ik2 = cc * c - pi2 * dd;
                let r_i2k2 = dd * c - pi * cc;
                // Column pass: (BA)[·,k] = c B[·,k] − s φ(k) B[·,k2].
                data[k * d + i] = r_ik * c - r_ik2 * pk;
                data[k * d + i2] = r_i2k * c - r_i2k2 * pk;
                data[k2 * d + i] = r_ik2 * c - r_ik * pk2;
                data[k2 * d + i2] = r_i2k2 * c - r_i2k * pk2;
            }
        }
    }
    let tr: f64 = (0..d).map(|l| data[l * d + l].re).sum();
    let inv = 1.0 / tr;
    for z in data.iter_mut() {
        *z *= inv;
    }
}

/// Applies the `m` branch to `rho` in place and returns its probability.
pub fn drift_in_place(spec: &DriftStepSpec, rho: &mut DensityMatrix, m: Direction) -> Result<f64> {
    check_dims(&spec.word, rho)?;
    let e = pauli_expectation(&spec.word, rho);
    let prob = probability_of(spec.tau, e, m);
    if !(prob >= UNDERFLOW_GUARD) {
        return Err(Error::Underflow { prob });
    }
    let half = 0.5 * spec.tau;
    drift_kernel(&spec.word, rho, half.cosh(), m.sign() * half.sinh());
    Ok(prob)
}

/// Samples the outcome, applies it in place and returns `(m, branch probability)`.
pub fn sample_in_place<R: Rng + ?Sized>(
    spec: &DriftStepSpec,
    rho: &mut DensityMatrix,
    rng: &mut R,
) -> Result<(Direction, f64)> {
    let (p_plus, _) = branch_probabilities(spec, rho)?;
    let u: f64 = rng.random();
    let m = if u < p_plus { Direction::Plus } else { Direction::Minus };
    let prob = drift_in_place(spec, rho, m)?;
    Ok((m, prob))
}

pub fn apply_drift<R: Rng + ?Sized>(spec: &DriftStepSpec, rho: &DensityMatrix, rng: &mut R) -> Result<DriftOutcome> {
    let mut post_state = rho.clone();
    let (m, branch_prob) = sample_in_place(spec, &mut post_state, rng)?;
    Ok(DriftOutcome {
        m,
        post_state,
        branch_prob,
    })
}

pub fn apply_drift_forced(spec: &DriftStepSpec, rho: &DensityMatrix, m: Direction) -> Result<DriftOutcome> {
    let mut post_state = rho.clone();
    let branch_prob = drift_in_place(spec, &mut post_state, m)?;
    Ok(DriftOutcome {
        m,
        post_state,
        branch_prob,
    })
}
