//! Gate-level dilation of the drift instrument.
//!
//! Three registers of `n` qubits each: ancillas `A`, `B` and the system `S`
//! (plus optional spectator system qubits that no gate touches). Qubit 0 is
//! `A_1` and the most significant bit of a basis index, so an index reads
//! `a · 2^{2n+m} + b · 2^{n+m} + s`.
//!
//! The circuit, in time order, is `T†` on `S`, `U_τ` on `AB`, a qubit-wise
//! `SWAP` of `B` and `S`, `U_τ†`, the decoder `V`, and `T` on `S`. Measuring
//! `A_n` and `B_n` gives three outcomes: `A_n = 1` heralds a loop that leaves
//! the system untouched, otherwise `B_n` holds the drift direction.
//!
//! Mixed inputs are handled by linearity over an eigenbasis of `ρ`, which
//! gives exact branch probabilities and conditional states.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::drift::{Direction, DriftOutcome};
use crate::error::{Error, Result};
use crate::operators::{trace_distance, DensityMatrix};
use crate::pauli::{CMatrix, Letter, PauliWord, SitePermutation};

pub const DEFAULT_MAX_ROUNDS: usize = 40;

/// Largest register accepted for simulation.
pub const MAX_TOTAL_QUBITS: usize = 14;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    Ry { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
}

impl Gate {
    pub fn inverse(self) -> Gate {
        match self {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            Gate::Ry { qubit, angle } => Gate::Ry { qubit, angle: -angle },
            g => g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    q: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(q: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << q];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { q, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("{len} amplitudes is not a power of two")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state vector has squared norm {norm}")));
        }
        Ok(Self {
            q: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.q
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &Gate) {
        let amps = &mut self.amps;
        match *gate {
            Gate::H(q) => {
                let b = 1 << (self.q - 1 - q);
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for i in (0..amps.len()).filter(|i| i & b == 0) {
                    let (x, y) = (amps[i], amps[i | b]);
                    amps[i] = (x + y) * r;
                    amps[i | b] = (x - y) * r;
                }
            }
            Gate::S(q) | Gate::Sdg(q) => {
                let b = 1 << (self.q - 1 - q);
                let phase = if matches!(gate, Gate::S(_)) {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & b != 0 {
                        *a *= phase;
                    }
                }
            }
            Gate::Ry { qubit, angle } => {
                let b = 1 << (self.q - 1 - qubit);
                let (s, c) = (0.5 * angle).sin_cos();
                for i in (0..amps.len()).filter(|i| i & b == 0) {
                    let (x, y) = (amps[i], amps[i | b]);
                    amps[i] = x * c - y * s;
                    amps[i | b] = x * s + y * c;
                }
            }
            Gate::Cnot { control, target } => {
                let (cb, tb) = (1 << (self.q - 1 - control), 1 << (self.q - 1 - target));
                for i in (0..amps.len()).filter(|i| i & cb != 0 && i & tb == 0) {
                    amps.swap(i, i | tb);
                }
            }
            Gate::Cz(a, b) => {
                let mask = (1 << (self.q - 1 - a)) | (1 << (self.q - 1 - b));
                for (i, amp) in amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
        }
    }

    pub fn apply_all(&mut self, gates: &[Gate]) {
        for g in gates {
            self.apply(g);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotOutcome {
    Up,
    Down,
    Loop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationCircuit {
    n: usize,
    spectators: usize,
    word: PauliWord,
    tau: f64,
    theta: f64,
    gates: Vec<Gate>,
    u_len: usize,
    t_len: usize,
}

/// `θ = arccos √(e^{−τ/2} / (2 cosh(τ/2)))`.
pub fn theta_for(tau: f64) -> f64 {
    ((-0.5 * tau).exp() / (2.0 * (0.5 * tau).cosh())).sqrt().acos()
}

/// Probability of the loop outcome, `1 / (2 cosh²(τ/2))`.
pub fn loop_probability(tau: f64) -> f64 {
    0.5 / (0.5 * tau).cosh().powi(2)
}

pub fn build_circuit(word: &PauliWord, tau: f64) -> Result<DilationCircuit> {
    build_circuit_with_theta(word, tau, theta_for(tau), 0)
}

/// Like [`build_circuit`] with an explicit rotation angle and `spectators`
/// untouched system qubits after the support. Used for sensitivity checks.
pub fn build_circuit_with_theta(word: &PauliWord, tau: f64, theta: f64, spectators: usize) -> Result<DilationCircuit> {
    if word.letters().contains(&Letter::I) {
        return Err(Error::InvalidArgument(format!(
            "dilation needs a word without identity sites, got {word}"
        )));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be finite and nonnegative, got {tau}")));
    }
    let n = word.num_qubits();
    if 3 * n + spectators > MAX_TOTAL_QUBITS {
        return Err(Error::DenseLimit {
            n: 3 * n + spectators,
            limit: MAX_TOTAL_QUBITS,
        });
    }
    let a = |i: usize| i;
    let b = |i: usize| n + i;
    let s = |i: usize| 2 * n + i;
    let last = n - 1;

    let mut u = Vec::new();
    for i in 0..last {
        u.push(Gate::H(a(i)));
    }
    u.push(Gate::Ry {
        qubit: a(last),
        angle: 2.0 * theta,
    });
    for i in 0..last {
        u.push(Gate::Cnot { control: a(i), target: a(last) });
    }
    for i in 0..n {
        u.push(Gate::Cnot { control: a(i), target: b(i) });
    }

    let mut swap = Vec::new();
    for i in 0..n {
        swap.push(Gate::Cnot { control: b(i), target: s(i) });
        swap.push(Gate::Cnot { control: s(i), target: b(i) });
        swap.push(Gate::Cnot { control: b(i), target: s(i) });
    }

    let mut v = Vec::new();
    for i in 0..last {
        v.push(Gate::Cnot { control: a(last), target: a(i) });
    }
    for i in 0..n {
        v.push(Gate::Cz(a(i), s(i)));
        v.push(Gate::Cnot { control: b(i), target: s(i) });
    }
    for i in 0..last {
        v.push(Gate::Cnot { control: b(i), target: b(last) });
    }

    // T with T Z T† = σ per site: X -> H, Y -> S·H (H first in time).
    let mut t = Vec::new();
    for (i, letter) in word.letters().iter().enumerate() {
        match letter {
            Letter::X => t.push(Gate::H(s(i))),
            Letter::Y => {
                t.push(Gate::H(s(i)));
                t.push(Gate::S(s(i)));
            }
            _ => {}
        }
    }
    let t_dag: Vec<Gate> = t.iter().rev().map(|g| g.inverse()).collect();
    let u_dag: Vec<Gate> = u.iter().rev().map(|g| g.inverse()).collect();

    let (u_len, t_len) = (u.len(), t.len());
    let gates = [t_dag, u, swap, u_dag, v, t].concat();
    Ok(DilationCircuit {
        n,
        spectators,
        word: word.clone(),
        tau,
        theta,
        gates,
        u_len,
        t_len,
    })
}

/// Exact probability and unnormalized conditional system state of one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub prob: f64,
    pub unnormalized: CMatrix,
}

impl Branch {
    pub fn state(&self) -> Result<DensityMatrix> {
        if !(self.prob > 0.0) {
            return Err(Error::Underflow { prob: self.prob });
        }
        DensityMatrix::from_matrix_unchecked(&self.unnormalized / Complex64::from(self.prob))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotDistribution {
    pub up: Branch,
    pub down: Branch,
    pub looped: Branch,
}

impl ShotDistribution {
    pub fn branch(&self, outcome: ShotOutcome) -> &Branch {
        match outcome {
            ShotOutcome::Up => &self.up,
            ShotOutcome::Down => &self.down,
            ShotOutcome::Loop => &self.looped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub outcome: DriftOutcome,
    pub rounds: usize,
}

impl DilationCircuit {
    pub fn num_system_qubits(&self) -> usize {
        self.n + self.spectators
    }

    pub fn total_qubits(&self) -> usize {
        2 * self.n + self.num_system_qubits()
    }

    pub fn word(&self) -> &PauliWord {
        &self.word
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// The `U_τ` block alone, on the `2n` ancilla qubits.
    pub fn u_tau_gates(&self) -> &[Gate] {
        &self.gates[self.t_len..self.t_len + self.u_len]
    }

    /// `2(3n − 1)` for `U_τ` and its inverse, `3n` CNOTs for the swap, `4n − 2`
    /// for `V`, and twice the single-site Clifford count of `T`.
    pub fn expected_gate_count(word: &PauliWord) -> usize {
        let n = word.num_qubits();
        let t: usize = word
            .letters()
            .iter()
            .map(|l| match l {
                Letter::X => 1,
                Letter::Y => 2,
                _ => 0,
            })
            .sum();
        2 * (3 * n - 1) + 3 * n + (4 * n - 2) + 2 * t
    }

    /// `(Π↑, Π↓, Π↻)` as diagonal masks over the full register.
    pub fn classify(&self, index: usize) -> ShotOutcome {
        let q = self.total_qubits();
        let a_n = (index >> (q - self.n)) & 1;
        let b_n = (index >> (q - 2 * self.n)) & 1;
        match (a_n, b_n) {
            (1, _) => ShotOutcome::Loop,
            (0, 0) => ShotOutcome::Up,
            _ => ShotOutcome::Down,
        }
    }

    /// Number of basis states in each projector's range.
    pub fn projector_ranks(&self) -> (usize, usize, usize) {
        let total = 1usize << self.total_qubits();
        let mut ranks = (0, 0, 0);
        for i in 0..total {
            match self.classify(i) {
                ShotOutcome::Up => ranks.0 += 1,
                ShotOutcome::Down => ranks.1 += 1,
                ShotOutcome::Loop => ranks.2 += 1,
            }
        }
        ranks
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.num_qubits() != self.num_system_qubits() {
            return Err(Error::DimensionMismatch {
                expected: 1 << self.num_system_qubits(),
                found: rho.dim(),
            });
        }
        Ok(())
    }

    /// Runs the circuit on `|0⟩_A |0⟩_B |ψ⟩_S`.
    pub fn evolve_pure(&self, psi: &[Complex64]) -> Result<StateVector> {
        let ds = 1usize << self.num_system_qubits();
        if psi.len() != ds {
            return Err(Error::DimensionMismatch {
                expected: ds,
                found: psi.len(),
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.total_qubits()];
        amps[..ds].copy_from_slice(psi);
        let mut sv = StateVector {
            q: self.total_qubits(),
            amps,
        };
        sv.apply_all(&self.gates);
        Ok(sv)
    }

    /// Exact outcome probabilities and conditional states for a mixed input.
    pub fn distribution(&self, rho: &DensityMatrix) -> Result<ShotDistribution> {
        self.check_state(rho)?;
        let ds = rho.dim();
        let (values, vectors) = rho.eigh();
        let mut acc = [CMatrix::zeros(ds, ds), CMatrix::zeros(ds, ds), CMatrix::zeros(ds, ds)];
        for (e, &p) in values.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let psi: Vec<Complex64> = vectors.column(e).iter().copied().collect();
            let out = self.evolve_pure(&psi)?;
            for (block, chunk) in out.amps.chunks(ds).enumerate() {
                let slot = match self.classify(block * ds) {
                    ShotOutcome::Up => 0,
                    ShotOutcome::Down => 1,
                    ShotOutcome::Loop => 2,
                };
                let target = &mut acc[slot];
                for k in 0..ds {
                    let ck = chunk[k].conj() * p;
                    if ck == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for i in 0..ds {
                        target[(i, k)] += chunk[i] * ck;
                    }
                }
            }
        }
        let [up, down, looped] = acc.map(|m| Branch {
            prob: m.trace().re,
            unnormalized: m,
        });
        Ok(ShotDistribution { up, down, looped })
    }

    pub fn run_single_shot<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        rng: &mut R,
    ) -> Result<(ShotOutcome, DensityMatrix)> {
        let dist = self.distribution(rho)?;
        let u: f64 = rng.random();
        let outcome = if u < dist.up.prob {
            ShotOutcome::Up
        } else if u < dist.up.prob + dist.down.prob {
            ShotOutcome::Down
        } else {
            ShotOutcome::Loop
        };
        Ok((outcome, dist.branch(outcome).state()?))
    }

    /// Repeats single shots until a directional outcome. The reported branch
    /// probability is the closed-form instrument probability of that direction.
    pub fn run_until_success<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        max_rounds: usize,
        rng: &mut R,
    ) -> Result<RepeatOutcome> {
        if max_rounds == 0 {
            return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
        }
        let mut state = rho.clone();
        for round in 1..=max_rounds {
            let dist = self.distribution(&state)?;
            let u: f64 = rng.random();
            let outcome = if u < dist.up.prob {
                ShotOutcome::Up
            } else if u < dist.up.prob + dist.down.prob {
                ShotOutcome::Down
            } else {
                ShotOutcome::Loop
            };
            let branch = dist.branch(outcome);
            let directional = dist.up.prob + dist.down.prob;
            let m = match outcome {
                ShotOutcome::Up => Direction::Plus,
                ShotOutcome::Down => Direction::Minus,
                ShotOutcome::Loop => {
                    state = branch.state()?;
                    continue;
                }
            };
            return Ok(RepeatOutcome {
                outcome: DriftOutcome {
                    m,
                    post_state: branch.state()?,
                    branch_prob: branch.prob / directional,
                },
                rounds: round,
            });
        }
        Err(Error::RoundsExhausted { rounds: max_rounds })
    }
}

/// Dense matrix of a gate sequence on `q` qubits.
pub fn gates_to_unitary(gates: &[Gate], q: usize) -> CMatrix {
    let d = 1usize << q;
    let mut u = CMatrix::zeros(d, d);
    for col in 0..d {
        let mut sv = StateVector::zero(q);
        sv.amps[0] = Complex64::new(0.0, 0.0);
        sv.amps[col] = Complex64::new(1.0, 0.0);
        sv.apply_all(gates);
        for (row, a) in sv.amps.iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    u
}

/// `G_{jk} = tr_A[U |00⟩⟨jk| U†]` for a unitary on `A ⊗ B` with equal halves.
pub fn kraus_extract(u: &CMatrix, j: usize, k: usize) -> Result<CMatrix> {
    let d = u.nrows();
    if u.ncols() != d || !d.is_power_of_two() || d.trailing_zeros() % 2 != 0 {
        return Err(Error::InvalidArgument(format!("{d}×{} is not an operator on two equal registers", u.ncols())));
    }
    let deviation = (u.adjoint() * u - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    let half = 1usize << (d.trailing_zeros() / 2);
    if j >= half || k >= half {
        return Err(Error::InvalidArgument(format!("indices ({j}, {k}) out of range for {half}")));
    }
    let left = u.column(0);
    let right = u.column(j * half + k);
    let mut g = CMatrix::zeros(half, half);
    for a in 0..half {
        for b in 0..half {
            for b2 in 0..half {
                g[(b, b2)] += left[a * half + b] * right[a * half + b2].conj();
            }
        }
    }
    Ok(g)
}

/// Per-case comparison of the circuit against the closed-form instrument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub word: String,
    pub tau: f64,
    pub max_prob_deviation: f64,
    pub max_trace_distance: f64,
    pub loop_deviation: f64,
    pub completeness_deviation: f64,
    pub gate_count: usize,
}

impl VerifyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_prob_deviation <= tol
            && self.max_trace_distance <= tol
            && self.loop_deviation <= tol
            && self.completeness_deviation <= tol
    }
}

/// Builds the circuit for `word` (identity sites become spectators) and
/// compares its exact shot distribution with the instrument on `rho`.
pub fn verify_against_channel(word: &PauliWord, tau: f64, rho: &DensityMatrix) -> Result<VerifyReport> {
    verify_with_theta_offset(word, tau, rho, 0.0)
}

pub fn verify_with_theta_offset(word: &PauliWord, tau: f64, rho: &DensityMatrix, offset: f64) -> Result<VerifyReport> {
    use crate::drift::{apply_drift_forced, DriftStepSpec};

    let (support, perm) = word.strip_identity()?;
    let spectators = word.num_qubits() - support.num_qubits();
    let circuit = build_circuit_with_theta(&support, tau, theta_for(tau) + offset, spectators)?;
    let permuted = DensityMatrix::from_matrix_unchecked(perm.permute_operator(rho.matrix())?)?;
    let dist = circuit.distribution(&permuted)?;

    let spec = DriftStepSpec::new(word.clone(), tau)?;
    let p_loop = loop_probability(tau);
    let mut max_prob_deviation = 0.0f64;
    let mut max_trace_distance = 0.0f64;
    for (m, branch) in [(Direction::Plus, &dist.up), (Direction::Minus, &dist.down)] {
        let expected = apply_drift_forced(&spec, rho, m)?;
        let prob = expected.branch_prob * (1.0 - p_loop);
        max_prob_deviation = max_prob_deviation.max((branch.prob - prob).abs());
        let state = unpermute(&perm, &branch.state()?)?;
        max_trace_distance = max_trace_distance.max(trace_distance(&state, &expected.post_state)?);
    }
    let looped = unpermute(&perm, &dist.looped.state()?)?;
    max_trace_distance = max_trace_distance.max(trace_distance(&looped, rho)?);
    let loop_deviation = (dist.looped.prob - p_loop).abs();
    let completeness_deviation = (dist.up.prob + dist.down.prob + dist.looped.prob - 1.0).abs();
    Ok(VerifyReport {
        word: word.to_string(),
        tau,
        max_prob_deviation,
        max_trace_distance,
        loop_deviation,
        completeness_deviation,
        gate_count: circuit.gates().len(),
    })
}

fn unpermute(perm: &SitePermutation, rho: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::from_matrix_unchecked(perm.unpermute_operator(rho.matrix())?)
}
