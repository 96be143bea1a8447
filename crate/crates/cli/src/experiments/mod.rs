//! One module per subcommand. Each exposes a `run` that computes a typed result
//! and a `write` that renders it into the output directory.

pub mod levelstats;
pub mod marginal;
pub mod sample;
pub mod scaling;
pub mod tradeoff;
pub mod verify;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use thermaldrift::sampler::{run_indexed, run_rng, Ensemble, SamplerConfig, ThermalSample};

use crate::config::{Experiment, Settings};
use crate::error::CliResult;

/// Seed for sweep point `point`, derived from the master seed.
pub fn point_seed(master: u64, point: u64) -> u64 {
    run_rng(master, point).next_u64()
}

/// Runs `runs` independent samples and maps each through `f`, keeping run order.
pub(crate) fn map_runs<T, F>(ensemble: &Ensemble, config: &SamplerConfig, runs: usize, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(ThermalSample) -> CliResult<T> + Sync,
{
    (0..runs as u64)
        .into_par_iter()
        .map(|r| f(run_indexed(ensemble, config, r)?))
        .collect()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for a single value.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Ensemble description written next to experiment outputs.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleInfo {
    pub name: String,
    pub num_qubits: usize,
    pub lambda: f64,
    pub words: Vec<String>,
    pub bounds: Vec<f64>,
}

impl EnsembleInfo {
    pub fn of(e: &Ensemble) -> Self {
        Self {
            name: e.name().to_string(),
            num_qubits: e.num_qubits(),
            lambda: e.lambda(),
            words: e.words().iter().map(|w| w.to_string()).collect(),
            bounds: e.bounds().to_vec(),
        }
    }
}

/// Runs the configured experiment, writes its outputs, and returns a short report.
pub fn execute(settings: &Settings) -> CliResult<String> {
    let out = &settings.out;
    match settings.experiment {
        Experiment::Sample => {
            let r = sample::run(settings)?;
            sample::write(&r, out)?;
            Ok(sample::report(&r))
        }
        Experiment::Scaling => {
            let r = scaling::run(settings)?;
            scaling::write(&r, out)?;
            Ok(scaling::report(&r))
        }
        Experiment::Marginal => {
            let r = marginal::run(settings)?;
            marginal::write(&r, out)?;
            Ok(marginal::report(&r))
        }
        Experiment::Tradeoff => {
            let r = tradeoff::run(settings)?;
            tradeoff::write(&r, out)?;
            Ok(tradeoff::report(&r))
        }
        Experiment::Levelstats => {
            let r = levelstats::run(settings)?;
            levelstats::write(&r, out)?;
            Ok(levelstats::report(&r))
        }
        Experiment::VerifyCircuit => {
            let r = verify::run(settings)?;
            verify::write(&r, out)?;
            verify::check(&r)?;
            Ok(verify::report(&r))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.75 * v).collect();
        assert!((fit_slope(&x, &y) + 0.75).abs() < 1e-14);
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(1, 0), point_seed(1, 1));
        assert_ne!(point_seed(1, 0), point_seed(2, 0));
        assert_eq!(point_seed(5, 3), point_seed(5, 3));
    }

    #[test]
    fn moments() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(std_dev(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(std_dev(&[4.0]), 0.0);
    }
}
