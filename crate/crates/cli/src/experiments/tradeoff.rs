use std::path::Path;

use thermaldrift::sampler::SamplerConfig;
use thermaldrift::Error;

use super::{map_runs, mean, point_seed, std_dev};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::Csv;

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffPoint {
    pub k: f64,
    pub steps: usize,
    pub errors: Vec<f64>,
    /// `‖H‖∞` of each sampled label.
    pub hnorms: Vec<f64>,
}

impl TradeoffPoint {
    pub fn inv_epsilon_mean(&self) -> f64 {
        1.0 / mean(&self.errors)
    }

    pub fn inv_epsilon_max(&self) -> f64 {
        1.0 / self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn hnorm_mean(&self) -> f64 {
        mean(&self.hnorms)
    }

    pub fn hnorm_se(&self) -> f64 {
        std_dev(&self.hnorms) / (self.hnorms.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffResult {
    pub beta: f64,
    pub points: Vec<TradeoffPoint>,
}

pub fn run(s: &Settings) -> CliResult<TradeoffResult> {
    let ensemble = s.ensemble()?;
    let beta = s.betas[0];
    let mut points = Vec::with_capacity(s.ks.len());
    for (j, &k) in s.ks.iter().enumerate() {
        let steps = s.steps_for(ensemble.lambda(), beta, k);
        let config = SamplerConfig::new(beta, steps, point_seed(s.seed, j as u64)).with_diagnostics(true);
        let pairs = map_runs(&ensemble, &config, s.runs, |x| {
            let norm = x.label(&ensemble)?.operator_norm();
            let bound: f64 = x.coefficients.iter().map(|c| c.abs()).sum();
            if norm > bound * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::InvalidState(format!("label norm {norm} exceeds Σ|c_j| = {bound}")).into());
            }
            Ok((x.trace_distance.expect("diagnostics enabled"), norm))
        })?;
        let (errors, hnorms) = pairs.into_iter().unzip();
        points.push(TradeoffPoint {
            k,
            steps,
            errors,
            hnorms,
        });
    }
    Ok(TradeoffResult { beta, points })
}

pub fn write(r: &TradeoffResult, out: &Path) -> CliResult<()> {
    let mut csv = Csv::new(&["k", "N", "inv_epsilon_mean", "hnorm_mean", "hnorm_se", "inv_epsilon_max"]);
    for p in &r.points {
        csv.row(&[
            &p.k,
            &p.steps,
            &p.inv_epsilon_mean(),
            &p.hnorm_mean(),
            &p.hnorm_se(),
            &p.inv_epsilon_max(),
        ]);
    }
    csv.write(&out.join("tradeoff.csv"))
}

pub fn report(r: &TradeoffResult) -> String {
    let parts: Vec<String> = r
        .points
        .iter()
        .map(|p| format!("k={} 1/eps {:.1} |H| {:.3}", p.k, p.inv_epsilon_max(), p.hnorm_mean()))
        .collect();
    format!("tradeoff at beta={}: {}", r.beta, parts.join(", "))
}
