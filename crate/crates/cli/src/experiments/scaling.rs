use std::path::Path;

use thermaldrift::sampler::SamplerConfig;

use super::{fit_slope, map_runs, mean, point_seed};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::Csv;

/// Failure probability δ in the trend constant `K₀ = (n+2) ln 2 + ln(N/δ)`.
pub const TREND_DELTA: f64 = 0.01;

/// `K₀^{3/2} N^{3/2} τ³` without the unspecified leading constant.
pub fn trend(num_qubits: usize, steps: usize, tau: f64) -> f64 {
    let n = steps as f64;
    let k0 = (num_qubits as f64 + 2.0) * std::f64::consts::LN_2 + (n / TREND_DELTA).ln();
    k0.powf(1.5) * n.powf(1.5) * tau.powi(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub beta: f64,
    pub k: f64,
    pub steps: usize,
    pub trend: f64,
    pub errors: Vec<f64>,
}

impl ScalingPoint {
    pub fn mean_error(&self) -> f64 {
        mean(&self.errors)
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    pub k: f64,
    /// Fit of `ln(mean ε)` against `ln β`.
    pub mean_slope: f64,
    pub max_slope: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    /// Ordered by β, then k.
    pub points: Vec<ScalingPoint>,
    pub slopes: Vec<Slope>,
}

pub fn run(s: &Settings) -> CliResult<ScalingResult> {
    let ensemble = s.ensemble()?;
    let lambda = ensemble.lambda();
    let mut points = Vec::with_capacity(s.betas.len() * s.ks.len());
    for (i, &beta) in s.betas.iter().enumerate() {
        for (j, &k) in s.ks.iter().enumerate() {
            let index = (i * s.ks.len() + j) as u64;
            let steps = s.steps_for(lambda, beta, k);
            let config = SamplerConfig::new(beta, steps, point_seed(s.seed, index)).with_diagnostics(true);
            let errors = map_runs(&ensemble, &config, s.runs, |x| {
                Ok(x.trace_distance.expect("diagnostics enabled"))
            })?;
            points.push(ScalingPoint {
                beta,
                k,
                steps,
                trend: trend(ensemble.num_qubits(), steps, config.tau(lambda)),
                errors,
            });
        }
    }
    let log_beta: Vec<f64> = s.betas.iter().map(|b| b.ln()).collect();
    let slopes = s
        .ks
        .iter()
        .map(|&k| {
            let column: Vec<&ScalingPoint> = points.iter().filter(|p| p.k == k).collect();
            let fit = |f: fn(&ScalingPoint) -> f64| {
                let y: Vec<f64> = column.iter().map(|p| f(p).ln()).collect();
                fit_slope(&log_beta, &y)
            };
            Slope {
                k,
                mean_slope: fit(ScalingPoint::mean_error),
                max_slope: fit(ScalingPoint::max_error),
                expected: 2.0 - k,
            }
        })
        .collect();
    Ok(ScalingResult { points, slopes })
}

pub fn write(r: &ScalingResult, out: &Path) -> CliResult<()> {
    let mut rows = Csv::new(&["beta", "k", "N", "run", "trace_distance", "trend"]);
    let mut summary = Csv::new(&["beta", "k", "N", "mean_trace_distance", "max_trace_distance", "trend"]);
    for p in &r.points {
        for (run, e) in p.errors.iter().enumerate() {
            rows.row(&[&p.beta, &p.k, &p.steps, &run, e, &p.trend]);
        }
        summary.row(&[&p.beta, &p.k, &p.steps, &p.mean_error(), &p.max_error(), &p.trend]);
    }
    let mut slopes = Csv::new(&["k", "slope_mean", "slope_max", "expected_slope"]);
    for s in &r.slopes {
        slopes.row(&[&s.k, &s.mean_slope, &s.max_slope, &s.expected]);
    }
    rows.write(&out.join("scaling.csv"))?;
    summary.write(&out.join("scaling_summary.csv"))?;
    slopes.write(&out.join("scaling_slopes.csv"))
}

pub fn report(r: &ScalingResult) -> String {
    let parts: Vec<String> = r
        .slopes
        .iter()
        .map(|s| format!("k={} slope {:.3} (expected {})", s.k, s.mean_slope, s.expected))
        .collect();
    format!("scaling: {}", parts.join(", "))
}
