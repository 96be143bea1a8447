//! Label-distribution theory.
//!
//! Under fair coins the endpoint `x` of a sampling path is a lazy lattice walk
//! whose step along axis `j` has probability `p_j = h_j/λ` in each direction.
//! Its leading-order law is the lattice Gaussian
//!
//! ```text
//! a_N(x) / ((2πN)^{L/2} √∏p_j) · exp(−Σ_j x_j² / (2N p_j))
//! ```
//!
//! with `a_N` the reach parity. Axis `j` moves on a fraction `p_j` of steps, so its
//! variance after `N` steps is `N p_j` and the exponent divides by `p_j`.
//! The true measured law tilts this by the path
//! likelihood ratio, which is close to `2^{−n} tr e^{−βH(x)}`.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::histogram::{freedman_diaconis_edges, Histogram};
use crate::operators::{log_partition, trace_distance};
use crate::sampler::{replay_path, Ensemble, SamplerConfig, ThermalSample};

/// 2 if `x` is reachable in exactly `steps` unit moves, else 0.
pub fn reach_parity(x: &[i64], steps: u64) -> u8 {
    let total: u64 = x.iter().map(|v| v.unsigned_abs()).sum();
    if total <= steps && (steps - total) % 2 == 0 {
        2
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkLaw {
    steps: usize,
    probs: Vec<f64>,
}

impl WalkLaw {
    pub fn new(steps: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidArgument("walk probabilities must be positive".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("walk probabilities sum to {sum}")));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("walk needs at least one step".into()));
        }
        Ok(Self { steps, probs })
    }

    pub fn from_ensemble(ensemble: &Ensemble, steps: usize) -> Result<Self> {
        let mut probs = ensemble.probabilities();
        // Absorb rounding so the sum check holds for any bounds.
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        Self::new(steps, probs)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dimension(&self) -> usize {
        self.probs.len()
    }
}

pub fn gaussian_endpoint_density(law: &WalkLaw, x: &[i64]) -> Result<f64> {
    if x.len() != law.dimension() {
        return Err(Error::DimensionMismatch {
            expected: law.dimension(),
            found: x.len(),
        });
    }
    let a = f64::from(reach_parity(x, law.steps as u64));
    if a == 0.0 {
        return Ok(0.0);
    }
    let n = law.steps as f64;
    let l = law.dimension() as f64;
    let prod: f64 = law.probs.iter().product();
    let exponent: f64 = x.iter().zip(&law.probs).map(|(&x, p)| (x as f64).powi(2) / p).sum::<f64>() / (2.0 * n);
    Ok(a / ((2.0 * std::f64::consts::PI * n).powf(0.5 * l) * prod.sqrt()) * (-exponent).exp())
}

/// `log(2^{−n} tr e^{−βH})` for the label `c = λx/N`.
pub fn log_normalized_partition(ensemble: &Ensemble, beta: f64, coefficients: &[f64]) -> Result<f64> {
    let h = ensemble.hamiltonian(coefficients)?;
    Ok(log_partition(&h, beta) - ensemble.num_qubits() as f64 * std::f64::consts::LN_2)
}

/// Reweighted lattice law at `x`, unnormalized: Gaussian density times `2^{−n} tr e^{−βH(x)}`.
pub fn reweighted_endpoint_weight(ensemble: &Ensemble, beta: f64, steps: usize, x: &[i64]) -> Result<f64> {
    let law = WalkLaw::from_ensemble(ensemble, steps)?;
    let g = gaussian_endpoint_density(&law, x)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let unit = ensemble.lambda() / steps as f64;
    let c: Vec<f64> = x.iter().map(|&v| unit * v as f64).collect();
    Ok(g * log_normalized_partition(ensemble, beta, &c)?.exp())
}

/// Exact `log L_N = Σ_k log(2 P[m_k | ρ_{k−1}])`, replaying the sample's path
/// from `I/2^n`. Fails if the replay does not land on the sample's state.
pub fn log_likelihood_ratio(ensemble: &Ensemble, beta: f64, sample: &ThermalSample) -> Result<f64> {
    let config = SamplerConfig::new(beta, sample.path.len(), 0);
    let (replayed, log_l) = replay_path(ensemble, &config, &sample.path)?;
    if replayed.endpoint != sample.endpoint {
        return Err(Error::ReplayMismatch("endpoint differs from the recorded sample".into()));
    }
    let dist = trace_distance(&replayed.state, &sample.state)?;
    if dist > 1e-8 {
        return Err(Error::ReplayMismatch(format!("replayed state differs by {dist:e}")));
    }
    Ok(log_l)
}

/// Monte-Carlo draws of one label coefficient with their importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalMarginal {
    pub axis: usize,
    pub values: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl TheoreticalMarginal {
    /// Weights normalized to sum to one, via log-sum-exp.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    pub fn histogram(&self, edges: Vec<f64>) -> Result<Histogram> {
        Histogram::from_weighted(&self.values, &self.weights(), edges)
    }

    pub fn fd_histogram(&self) -> Result<Histogram> {
        let w = self.weights();
        let edges = freedman_diaconis_edges(&self.values, &w)?;
        Histogram::from_weighted(&self.values, &w, edges)
    }

    pub fn weighted_mean(&self) -> f64 {
        self.values.iter().zip(self.weights()).map(|(v, w)| v * w).sum()
    }
}

/// Draws `x ~ N(0, N p_j)` per axis (continuous relaxation of the walk),
/// weights each draw by `2^{−n} tr e^{−βH(x)}` and records `c_axis = λ x_axis / N`.
pub fn theoretical_marginal<R: Rng + ?Sized>(
    ensemble: &Ensemble,
    beta: f64,
    steps: usize,
    axis: usize,
    mc_count: usize,
    rng: &mut R,
) -> Result<TheoreticalMarginal> {
    if mc_count == 0 {
        return Err(Error::InvalidArgument("mc_count must be at least 1".into()));
    }
    if axis >= ensemble.len() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range for {} words", ensemble.len())));
    }
    let law = WalkLaw::from_ensemble(ensemble, steps)?;
    let n = steps as f64;
    let normals: Vec<Normal<f64>> = law
        .probs()
        .iter()
        .map(|p| Normal::new(0.0, (n * p).sqrt()).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<_>>()?;
    let unit = ensemble.lambda() / n;
    let mut values = Vec::with_capacity(mc_count);
    let mut log_weights = Vec::with_capacity(mc_count);
    let mut c = vec![0.0; ensemble.len()];
    for _ in 0..mc_count {
        for (cj, normal) in c.iter_mut().zip(&normals) {
            *cj = unit * normal.sample(rng);
        }
        values.push(c[axis]);
        log_weights.push(log_normalized_partition(ensemble, beta, &c)?);
    }
    Ok(TheoreticalMarginal {
        axis,
        values,
        log_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::Direction;
    use crate::pauli::PauliWord;
    use crate::sampler::{build_grid_ensemble, run, Model, PathStep};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_z(h: f64) -> Ensemble {
        Ensemble::new("z", vec!["Z".parse::<PauliWord>().unwrap()], vec![h]).unwrap()
    }

    #[test]
    fn parity_examples() {
        assert_eq!(reach_parity(&[1, 0], 3), 2);
        assert_eq!(reach_parity(&[1, 0], 2), 0);
        assert_eq!(reach_parity(&[2, 2], 3), 0);
        assert_eq!(reach_parity(&[-2, 1], 3), 2);
    }

    #[test]
    fn density_examples() {
        let law = WalkLaw::new(10, vec![1.0]).unwrap();
        let d = gaussian_endpoint_density(&law, &[0]).unwrap();
        assert_abs_diff_eq!(d, 2.0 / (2.0 * std::f64::consts::PI * 10.0).sqrt(), epsilon = 1e-15);
        assert_eq!(gaussian_endpoint_density(&law, &[1]).unwrap(), 0.0);

        // Exact law for N = 2: P(0) = 1/2, P(±2) = 1/4.
        let law = WalkLaw::new(2, vec![1.0]).unwrap();
        for (x, exact) in [(0, 0.5), (2, 0.25), (-2, 0.25)] {
            assert!((gaussian_endpoint_density(&law, &[x]).unwrap() - exact).abs() < 0.15);
        }
        assert!(WalkLaw::new(3, vec![0.5, 0.4]).is_err());
        assert!(gaussian_endpoint_density(&law, &[0, 0]).is_err());
    }

    #[test]
    fn trivial_path_likelihood() {
        let e = single_z(1.0);
        let config = SamplerConfig::new(0.3, 1, 0);
        let path = [PathStep { j: 0, m: Direction::Plus }];
        let (sample, log_l) = replay_path(&e, &config, &path).unwrap();
        assert_abs_diff_eq!(log_l, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(log_likelihood_ratio(&e, 0.3, &sample).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_step_likelihood_matches_products() {
        let beta = 0.8;
        let e = single_z(1.0);
        let tau: f64 = beta / 2.0;
        let path = [PathStep { j: 0, m: Direction::Plus }; 2];
        let (sample, _) = replay_path(&e, &SamplerConfig::new(beta, 2, 0), &path).unwrap();
        // Direct: first step from I/2 has P = 1/2; then ⟨Z⟩ = −tanh τ, so P(+1) = (1 + tanh² τ)/2.
        let direct = (2.0f64 * 0.5).ln() + (1.0 + tau.tanh().powi(2)).ln();
        assert_abs_diff_eq!(log_likelihood_ratio(&e, beta, &sample).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn single_word_likelihood_is_exact() {
        // For one commuting word L_N = cosh(τ x)/cosh^N τ.
        let e = single_z(1.0);
        for seed in 0..10 {
            let (beta, steps) = (2.0, 50);
            let s = run(&e, &SamplerConfig::new(beta, steps, seed)).unwrap();
            let tau: f64 = beta / steps as f64;
            let x = s.endpoint[0] as f64;
            let exact = (tau * x).cosh().ln() - steps as f64 * tau.cosh().ln();
            assert_abs_diff_eq!(log_likelihood_ratio(&e, beta, &s).unwrap(), exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn replay_mismatch_detected() {
        let e = single_z(1.0);
        let mut s = run(&e, &SamplerConfig::new(1.0, 20, 1)).unwrap();
        s.endpoint[0] += 2;
        assert!(matches!(log_likelihood_ratio(&e, 1.0, &s), Err(Error::ReplayMismatch(_))));
    }

    #[test]
    fn zero_beta_marginal_is_gaussian() {
        let e = build_grid_ensemble(Model::Heisenberg, 1, 2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = theoretical_marginal(&e, 0.0, 100, 1, 4000, &mut rng).unwrap();
        let w = m.weights();
        for wi in &w {
            assert_abs_diff_eq!(*wi, 1.0 / 4000.0, epsilon = 1e-15);
        }
        // c = λx/N with x ~ N(0, N/3): standard deviation λ/√(3N).
        let sd = e.lambda() / (3.0f64 * 100.0).sqrt();
        assert!(m.weighted_mean().abs() < 4.0 * sd / (4000f64).sqrt());
    }

    #[test]
    fn single_z_marginal_matches_quadrature() {
        // Weight cosh(βc); the marginal is a Gaussian tilted by cosh, whose
        // second moment is s² + (βs²)² for c ~ N(0, s²).
        let (beta, steps, h) = (1.5, 400, 1.0);
        let e = single_z(h);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = theoretical_marginal(&e, beta, steps, 0, 20_000, &mut rng).unwrap();
        let s2 = h * h / steps as f64;
        let second: f64 = m.values.iter().zip(m.weights()).map(|(v, w)| v * v * w).sum();
        let quad = {
            let sd = s2.sqrt();
            let (mut num, mut den) = (0.0, 0.0);
            let k = 4000;
            for i in 0..=k {
                let c = -10.0 * sd + 20.0 * sd * i as f64 / k as f64;
                let f = (-c * c / (2.0 * s2)).exp() * (beta * c).cosh();
                num += c * c * f;
                den += f;
            }
            num / den
        };
        assert_abs_diff_eq!(quad, s2 + (beta * s2).powi(2), epsilon = 1e-9);
        assert!((second - quad).abs() < 0.05 * quad);
    }

    #[test]
    fn marginal_arguments_checked() {
        let e = single_z(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(theoretical_marginal(&e, 1.0, 10, 0, 0, &mut rng).is_err());
        assert!(theoretical_marginal(&e, 1.0, 10, 1, 10, &mut rng).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn lattice_density_sums_to_one(steps in 100usize..400, l in 1usize..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..l).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let law = WalkLaw::new(steps, raw.iter().map(|p| p / total).collect()).unwrap();
            let radius: Vec<i64> = law.probs().iter().map(|p| (6.0 * (steps as f64 * p).sqrt()).ceil() as i64).collect();
            let mut sum = 0.0;
            let mut x = vec![0i64; l];
            fn walk(dim: usize, x: &mut Vec<i64>, radius: &[i64], law: &WalkLaw, sum: &mut f64) {
                if dim == x.len() {
                    *sum += gaussian_endpoint_density(law, x).unwrap();
                    return;
                }
                for v in -radius[dim]..=radius[dim] {
                    x[dim] = v;
                    walk(dim + 1, x, radius, law, sum);
                }
            }
            walk(0, &mut x, &radius, &law, &mut sum);
            prop_assert!((sum - 1.0).abs() < 0.02, "sum {}", sum);
        }
    }
}
