//! Ensembles and the measurement-controlled sampling loop.
//!
//! Each of the `N` steps draws a generator `σ_j` with probability `h_j/λ`,
//! applies the drift instrument with `τ = λβ/N` and records `(j, m)`. The
//! label coefficient of word `j` is `c_j = λ x_j / N` where `x_j` is the sum
//! of the recorded directions at index `j`.
//!
//! Run `r` of a batch draws from a ChaCha stream selected by `r` under the
//! master seed, so results do not depend on how runs are scheduled.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{drift_in_place, sample_in_place, Direction, DriftStepSpec};
use crate::error::{Error, Result};
use crate::operators::{gibbs_state, trace_distance, DensityMatrix, HermitianOperator};
use crate::pauli::{Letter, PauliWord};

/// Tolerance of the periodic state-validity check.
pub const SPOT_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Heisenberg,
    Tfim,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Heisenberg => "heisenberg",
            Model::Tfim => "tfim",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heisenberg" => Ok(Model::Heisenberg),
            "tfim" => Ok(Model::Tfim),
            other => Err(Error::InvalidArgument(format!(
                "unknown model {other:?} (expected heisenberg or tfim)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    name: String,
    n: usize,
    words: Vec<PauliWord>,
    bounds: Vec<f64>,
    lambda: f64,
    cumulative: Vec<f64>,
}

impl Ensemble {
    pub fn new(name: impl Into<String>, words: Vec<PauliWord>, bounds: Vec<f64>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one word".into()));
        }
        if words.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: words.len(),
                found: bounds.len(),
            });
        }
        let n = words[0].num_qubits();
        for (i, w) in words.iter().enumerate() {
            if w.num_qubits() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.num_qubits(),
                });
            }
            if w.is_identity() {
                return Err(Error::AllIdentity);
            }
            if words[..i].contains(w) {
                return Err(Error::InvalidArgument(format!("duplicate word {w}")));
            }
        }
        if let Some(b) = bounds.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument(format!("bounds must be positive and finite, got {b}")));
        }
        let mut cumulative = Vec::with_capacity(bounds.len());
        let mut acc = 0.0;
        for b in &bounds {
            acc += b;
            cumulative.push(acc);
        }
        Ok(Self {
            name: name.into(),
            n,
            words,
            bounds,
            lambda: acc,
            cumulative,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[PauliWord] {
        &self.words
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Selection probabilities `h_j / λ`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b / self.lambda).collect()
    }

    /// `Σ_j c_j σ_j`.
    pub fn hamiltonian(&self, coefficients: &[f64]) -> Result<HermitianOperator> {
        if coefficients.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coefficients.len(),
            });
        }
        HermitianOperator::from_terms(self.n, self.words.iter().zip(coefficients.iter().copied()))
    }
}

/// Nearest-neighbour pairs of a `rows × cols` open grid, sites in row-major order.
/// For each site the right edge comes before the down edge.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let site = r * cols + c;
            if c + 1 < cols {
                edges.push((site, site + 1));
            }
            if r + 1 < rows {
                edges.push((site, site + cols));
            }
        }
    }
    edges
}

/// Heisenberg: `XX, YY, ZZ` per edge. TFIM: `ZZ` per edge, then `X` per site.
pub fn build_grid_ensemble(model: Model, rows: usize, cols: usize, h: f64) -> Result<Ensemble> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("grid needs at least one row and one column".into()));
    }
    let n = rows * cols;
    let edges = grid_edges(rows, cols);
    let mut words = Vec::new();
    match model {
        Model::Heisenberg => {
            for &(a, b) in &edges {
                for l in [Letter::X, Letter::Y, Letter::Z] {
                    words.push(PauliWord::from_sites(n, &[(a, l), (b, l)])?);
                }
            }
        }
        Model::Tfim => {
            for &(a, b) in &edges {
                words.push(PauliWord::from_sites(n, &[(a, Letter::Z), (b, Letter::Z)])?);
            }
            for s in 0..n {
                words.push(PauliWord::from_sites(n, &[(s, Letter::X)])?);
            }
        }
    }
    let bounds = vec![h; words.len()];
    Ensemble::new(format!("{model}-{rows}x{cols}"), words, bounds)
}

/// 0-based index `j` drawn with probability `h_j / λ`.
pub fn weighted_index<R: Rng + ?Sized>(ensemble: &Ensemble, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * ensemble.lambda;
    ensemble.cumulative.partition_point(|&c| c <= u).min(ensemble.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub beta: f64,
    pub steps: usize,
    pub seed: u64,
    /// `None` starts from `I / 2^n`.
    pub initial_state: Option<DensityMatrix>,
    /// Validate the state every this many steps; 0 disables.
    pub check_every: usize,
    /// Attach the trace distance to the Gibbs state of the label.
    pub diagnostics: bool,
}

impl SamplerConfig {
    pub fn new(beta: f64, steps: usize, seed: u64) -> Self {
        Self {
            beta,
            steps,
            seed,
            initial_state: None,
            check_every: 0,
            diagnostics: false,
        }
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn with_check_every(mut self, every: usize) -> Self {
        self.check_every = every;
        self
    }

    pub fn with_initial_state(mut self, rho: DensityMatrix) -> Self {
        self.initial_state = Some(rho);
        self
    }

    /// `τ = λβ/N`.
    pub fn tau(&self, lambda: f64) -> f64 {
        lambda * self.beta / self.steps as f64
    }

    fn validate(&self, ensemble: &Ensemble) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        if let Some(rho) = &self.initial_state {
            if rho.num_qubits() != ensemble.num_qubits() {
                return Err(Error::DimensionMismatch {
                    expected: 1 << ensemble.num_qubits(),
                    found: rho.dim(),
                });
            }
        }
        Ok(())
    }

    fn initial(&self, n: usize) -> DensityMatrix {
        self.initial_state.clone().unwrap_or_else(|| DensityMatrix::maximally_mixed(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub j: usize,
    pub m: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSample {
    pub run_index: u64,
    pub beta: f64,
    pub steps: usize,
    /// `c_j = λ x_j / N`.
    pub coefficients: Vec<f64>,
    /// `x_j = Σ_{k: j_k = j} m_k`.
    pub endpoint: Vec<i64>,
    pub state: DensityMatrix,
    pub path: Vec<PathStep>,
    pub trace_distance: Option<f64>,
}

impl ThermalSample {
    pub fn label(&self, ensemble: &Ensemble) -> Result<HermitianOperator> {
        ensemble.hamiltonian(&self.coefficients)
    }

    /// Checks the structural relations between path, endpoint and label.
    pub fn check_invariants(&self, ensemble: &Ensemble) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidState(msg));
        if self.path.len() != self.steps {
            return fail(format!("path has {} steps, expected {}", self.path.len(), self.steps));
        }
        let mut counts = vec![0i64; ensemble.len()];
        let mut x = vec![0i64; ensemble.len()];
        for s in &self.path {
            counts[s.j] += 1;
            x[s.j] += i64::from(s.m.as_i8());
        }
        if x != self.endpoint {
            return fail("endpoint does not match path".into());
        }
        if x.iter().zip(&counts).any(|(x, c)| x.abs() > *c) {
            return fail("endpoint exceeds visit count".into());
        }
        let total: i64 = x.iter().map(|v| v.abs()).sum();
        if total > self.steps as i64 || (self.steps as i64 - total) % 2 != 0 {
            return fail("endpoint violates reach parity".into());
        }
        let unit = ensemble.lambda() / self.steps as f64;
        for (c, x) in self.coefficients.iter().zip(&x) {
            if (c / unit - *x as f64).abs() > 1e-9 * (1.0 + x.abs() as f64) {
                return fail(format!("coefficient {c} is not {x} grid units"));
            }
        }
        self.state.validate(SPOT_CHECK_TOL)
    }
}

/// Generator for run `run_index` under `seed`.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

fn step_specs(ensemble: &Ensemble, tau: f64) -> Result<Vec<DriftStepSpec>> {
    ensemble.words.iter().map(|w| DriftStepSpec::new(w.clone(), tau)).collect()
}

fn finish(
    ensemble: &Ensemble,
    config: &SamplerConfig,
    run_index: u64,
    state: DensityMatrix,
    path: Vec<PathStep>,
) -> Result<ThermalSample> {
    let mut endpoint = vec![0i64; ensemble.len()];
    for s in &path {
        endpoint[s.j] += i64::from(s.m.as_i8());
    }
    let unit = ensemble.lambda / config.steps as f64;
    let coefficients = endpoint.iter().map(|&x| unit * x as f64).collect();
    let mut sample = ThermalSample {
        run_index,
        beta: config.beta,
        steps: config.steps,
        coefficients,
        endpoint,
        state,
        path,
        trace_distance: None,
    };
    if config.diagnostics {
        sample.trace_distance = Some(gibbs_error(ensemble, &sample)?);
    }
    Ok(sample)
}

/// `‖ρ_N − e^{−βH}/Z‖₁` for the sample's own label.
pub fn gibbs_error(ensemble: &Ensemble, sample: &ThermalSample) -> Result<f64> {
    let g = gibbs_state(&sample.label(ensemble)?, sample.beta);
    trace_distance(&sample.state, &g)
}

pub fn run(ensemble: &Ensemble, config: &SamplerConfig) -> Result<ThermalSample> {
    run_indexed(ensemble, config, 0)
}

pub fn run_indexed(ensemble: &Ensemble, config: &SamplerConfig, run_index: u64) -> Result<ThermalSample> {
    let mut rng = run_rng(config.seed, run_index);
    run_with_rng(ensemble, config, run_index, &mut rng)
}

pub fn run_with_rng<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    config: &SamplerConfig,
    run_index: u64,
    rng: &mut R,
) -> Result<ThermalSample> {
    config.validate(ensemble)?;
    let specs = step_specs(ensemble, config.tau(ensemble.lambda))?;
    let mut state = config.initial(ensemble.n);
    let mut path = Vec::with_capacity(config.steps);
    for k in 0..config.steps {
        let j = weighted_index(ensemble, rng);
        let (m, _) = sample_in_place(&specs[j], &mut state, rng).map_err(|e| e.at_step(k))?;
        path.push(PathStep { j, m });
        if config.check_every > 0 && (k + 1) % config.check_every == 0 {
            state.validate(SPOT_CHECK_TOL).map_err(|e| e.at_step(k))?;
        }
    }
    finish(ensemble, config, run_index, state, path)
}

/// Applies a given path with forced outcomes. Returns the resulting sample and
/// the exact log-likelihood ratio `Σ_k log(2 P[m_k])` against fair coins.
pub fn replay_path(ensemble: &Ensemble, config: &SamplerConfig, path: &[PathStep]) -> Result<(ThermalSample, f64)> {
    config.validate(ensemble)?;
    if path.len() != config.steps {
        return Err(Error::ReplayMismatch(format!(
            "path has {} steps, config has {}",
            path.len(),
            config.steps
        )));
    }
    if let Some(bad) = path.iter().find(|s| s.j >= ensemble.len()) {
        return Err(Error::ReplayMismatch(format!("index {} out of range", bad.j)));
    }
    let specs = step_specs(ensemble, config.tau(ensemble.lambda))?;
    let mut state = config.initial(ensemble.n);
    let mut log_l = 0.0;
    for (k, s) in path.iter().enumerate() {
        let p = drift_in_place(&specs[s.j], &mut state, s.m).map_err(|e| e.at_step(k))?;
        log_l += (2.0 * p).ln();
    }
    let sample = finish(ensemble, config, 0, state, path.to_vec())?;
    Ok((sample, log_l))
}

/// `count` runs with indices `0..count`, in index order. A `concurrency` of
/// `None` uses the global rayon pool.
pub fn run_batch(
    ensemble: &Ensemble,
    config: &SamplerConfig,
    count: usize,
    concurrency: Option<usize>,
) -> Result<Vec<Result<ThermalSample>>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let work = || {
        (0..count as u64)
            .into_par_iter()
            .map(|r| run_indexed(ensemble, config, r))
            .collect::<Vec<_>>()
    };
    match concurrency {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn word(s: &str) -> PauliWord {
        s.parse().unwrap()
    }

    #[test]
    fn grid_sizes() {
        let e = build_grid_ensemble(Model::Heisenberg, 3, 3, 1.0).unwrap();
        assert_eq!(grid_edges(3, 3).len(), 12);
        assert_eq!(e.len(), 36);
        assert_eq!(e.num_qubits(), 9);
        assert_abs_diff_eq!(e.lambda(), 36.0);
        assert_eq!(build_grid_ensemble(Model::Tfim, 3, 3, 1.0).unwrap().len(), 21);
        assert_eq!(build_grid_ensemble(Model::Heisenberg, 2, 2, 1.0).unwrap().len(), 12);
        assert_eq!(build_grid_ensemble(Model::Heisenberg, 2, 3, 0.5).unwrap().len(), 21);
        assert!(build_grid_ensemble(Model::Tfim, 0, 3, 1.0).is_err());
    }

    #[test]
    fn grid_words() {
        let e = build_grid_ensemble(Model::Heisenberg, 2, 2, 1.0).unwrap();
        let first: Vec<String> = e.words()[..3].iter().map(|w| w.to_string()).collect();
        assert_eq!(first, ["XXII", "YYII", "ZZII"]);
        assert_eq!(e.words()[3].to_string(), "XIXI");
        let t = build_grid_ensemble(Model::Tfim, 1, 3, 1.0).unwrap();
        let all: Vec<String> = t.words().iter().map(|w| w.to_string()).collect();
        assert_eq!(all, ["ZZI", "IZZ", "XII", "IXI", "IIX"]);
    }

    #[test]
    fn ensemble_validation() {
        assert!(Ensemble::new("x", vec![word("XZ"), word("XZ")], vec![1.0, 1.0]).is_err());
        assert!(Ensemble::new("x", vec![word("XZ")], vec![0.0]).is_err());
        assert!(Ensemble::new("x", vec![word("II")], vec![1.0]).is_err());
        assert!(Ensemble::new("x", vec![word("X"), word("XZ")], vec![1.0, 1.0]).is_err());
    }

    fn frequencies(bounds: Vec<f64>, draws: usize) -> Vec<f64> {
        let words = ["X", "Y", "Z"][..bounds.len()].iter().map(|s| word(s)).collect();
        let e = Ensemble::new("t", words, bounds).unwrap();
        let mut rng = run_rng(5, 0);
        let mut counts = vec![0usize; e.len()];
        for _ in 0..draws {
            counts[weighted_index(&e, &mut rng)] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn weighted_index_frequencies() {
        let draws = 100_000;
        let band = |p: f64| 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        for f in frequencies(vec![2.0, 2.0, 2.0], draws) {
            assert!((f - 1.0 / 3.0).abs() < band(1.0 / 3.0));
        }
        let f = frequencies(vec![1.0, 3.0], draws);
        assert!((f[0] - 0.25).abs() < band(0.25));
        assert!((f[1] - 0.75).abs() < band(0.75));
        assert_eq!(frequencies(vec![0.7], 100), vec![1.0]);
    }

    #[test]
    fn forced_path_label() {
        let e = Ensemble::new("t", vec![word("ZI"), word("IX")], vec![1.0, 1.0]).unwrap();
        let config = SamplerConfig::new(1.0, 4, 0);
        let path = [(0, 1), (0, 1), (1, 1), (1, -1)].map(|(j, m)| PathStep {
            j,
            m: Direction::try_from(m).unwrap(),
        });
        let (sample, _) = replay_path(&e, &config, &path).unwrap();
        assert_eq!(sample.endpoint, vec![2, 0]);
        assert_eq!(sample.coefficients, vec![e.lambda() / 2.0, 0.0]);
        sample.check_invariants(&e).unwrap();
    }

    #[test]
    fn single_word_is_exact() {
        let e = Ensemble::new("t", vec![word("XYZ")], vec![1.3]).unwrap();
        for (beta, steps) in [(0.5, 1), (2.0, 17), (5.0, 1000)] {
            let config = SamplerConfig::new(beta, steps, 9).with_diagnostics(true);
            let s = run(&e, &config).unwrap();
            assert!(s.trace_distance.unwrap() <= 1e-10, "{beta} {steps}");
        }
    }

    #[test]
    fn small_beta_stays_mixed() {
        let e = build_grid_ensemble(Model::Heisenberg, 2, 2, 1.0).unwrap();
        let s = run(&e, &SamplerConfig::new(1e-12, 200, 3)).unwrap();
        let d = trace_distance(&s.state, &DensityMatrix::maximally_mixed(4)).unwrap();
        assert!(d <= 1e-8);
    }

    #[test]
    fn spot_checks_pass_on_grid() {
        let e = build_grid_ensemble(Model::Heisenberg, 2, 2, 1.0).unwrap();
        let config = SamplerConfig::new(1.0, 2000, 11).with_check_every(100);
        let s = run(&e, &config).unwrap();
        s.check_invariants(&e).unwrap();
    }

    #[test]
    fn deterministic_and_batch_consistent() {
        let e = build_grid_ensemble(Model::Tfim, 1, 3, 1.0).unwrap();
        let config = SamplerConfig::new(1.0, 300, 42);
        let a = run(&e, &config).unwrap();
        let b = run(&e, &config).unwrap();
        assert_eq!(a, b);
        let batch1 = run_batch(&e, &config, 4, Some(1)).unwrap();
        let batch2 = run_batch(&e, &config, 4, Some(3)).unwrap();
        assert_eq!(batch1, batch2);
        assert_eq!(batch1[0].as_ref().unwrap(), &a);
        assert_ne!(batch1[1].as_ref().unwrap().path, a.path);
        assert!(run_batch(&e, &config, 0, None).is_err());
    }

    #[test]
    fn config_validation() {
        let e = build_grid_ensemble(Model::Tfim, 1, 2, 1.0).unwrap();
        assert!(run(&e, &SamplerConfig::new(0.0, 10, 0)).is_err());
        assert!(run(&e, &SamplerConfig::new(1.0, 0, 0)).is_err());
        let wrong = SamplerConfig::new(1.0, 10, 0).with_initial_state(DensityMatrix::maximally_mixed(3));
        assert!(matches!(run(&e, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn replay_reproduces_run() {
        let e = build_grid_ensemble(Model::Heisenberg, 1, 3, 1.0).unwrap();
        let config = SamplerConfig::new(1.5, 400, 8);
        let s = run(&e, &config).unwrap();
        let (r, _) = replay_path(&e, &config, &s.path).unwrap();
        assert_eq!(r.endpoint, s.endpoint);
        assert!(trace_distance(&r.state, &s.state).unwrap() < 1e-12);
        assert!(replay_path(&e, &config, &s.path[1..]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn samples_satisfy_invariants(seed in any::<u64>(), beta in 0.05f64..3.0, steps in 1usize..300) {
            let e = build_grid_ensemble(Model::Heisenberg, 1, 3, 1.0).unwrap();
            let s = run(&e, &SamplerConfig::new(beta, steps, seed)).unwrap();
            prop_assert!(s.check_invariants(&e).is_ok());
        }

        #[test]
        fn runs_are_reproducible(seed in any::<u64>(), steps in 1usize..100) {
            let e = build_grid_ensemble(Model::Tfim, 2, 2, 0.5).unwrap();
            let config = SamplerConfig::new(1.0, steps, seed);
            prop_assert_eq!(run(&e, &config).unwrap(), run(&e, &config).unwrap());
        }
    }
}
