use std::path::Path;

use serde::Serialize;
use thermaldrift::histogram::{weighted_quantile, Histogram, MAX_AUTO_BINS};
use thermaldrift::sampler::{run_rng, SamplerConfig};
use thermaldrift::walk::theoretical_marginal;

use super::{map_runs, mean, point_seed, std_dev};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{write_json, Csv};

#[derive(Debug, Clone, Serialize)]
pub struct MarginalSummary {
    pub word: String,
    pub axis: usize,
    pub beta: f64,
    pub steps: usize,
    pub runs: usize,
    pub mc_count: usize,
    pub bins: usize,
    pub bin_width: f64,
    pub tv_distance: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub theoretical_mean: f64,
    pub mc_effective_size: f64,
}

#[derive(Debug, Clone)]
pub struct MarginalResult {
    pub empirical: Histogram,
    pub theoretical: Histogram,
    /// Sampled coefficient values, in run order.
    pub values: Vec<f64>,
    pub summary: MarginalSummary,
}

/// Edges of width `B·unit` centred on the lattice `unit·ℤ`, covering `lo..=hi`.
/// `B` is the Freedman–Diaconis width of `lattice` rounded to whole steps.
pub fn lattice_edges(lattice: &[i64], unit: f64, lo: f64, hi: f64) -> Vec<f64> {
    let xs: Vec<f64> = lattice.iter().map(|&x| x as f64).collect();
    let ones = vec![1.0; xs.len()];
    let iqr = weighted_quantile(&xs, &ones, 0.75) - weighted_quantile(&xs, &ones, 0.25);
    let fd = 2.0 * iqr / (xs.len() as f64).cbrt();
    let (lo, hi) = ((lo / unit).floor() - 0.5, (hi / unit).ceil() + 0.5);
    let mut width = fd.round().max(1.0);
    while (hi - lo) / width > MAX_AUTO_BINS as f64 {
        width += 1.0;
    }
    let bins = ((hi - lo) / width).ceil() as usize;
    (0..=bins).map(|b| (lo + b as f64 * width) * unit).collect()
}

pub fn run(s: &Settings) -> CliResult<MarginalResult> {
    let ensemble = s.ensemble()?;
    let beta = s.betas[0];
    let steps = s.steps_for(ensemble.lambda(), beta, s.ks[0]);
    let unit = ensemble.lambda() / steps as f64;
    let config = SamplerConfig::new(beta, steps, point_seed(s.seed, 0));
    let axis = s.axis;
    let lattice = map_runs(&ensemble, &config, s.runs, |x| Ok(x.endpoint[axis]))?;
    let values: Vec<f64> = lattice.iter().map(|&x| x as f64 * unit).collect();

    let mut rng = run_rng(point_seed(s.seed, 1), 0);
    let theory = theoretical_marginal(&ensemble, beta, steps, axis, s.mc_count, &mut rng)?;
    let weights = theory.weights();

    let all = values.iter().chain(&theory.values);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let edges = lattice_edges(&lattice, unit, lo, hi);
    let empirical = Histogram::from_samples(&values, edges.clone())?;
    let theoretical = Histogram::from_weighted(&theory.values, &weights, edges)?;
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();

    let summary = MarginalSummary {
        word: ensemble.words()[axis].to_string(),
        axis,
        beta,
        steps,
        runs: s.runs,
        mc_count: s.mc_count,
        bins: empirical.bins(),
        bin_width: empirical.width(0),
        tv_distance: empirical.total_variation(&theoretical)?,
        empirical_mean: mean(&values),
        empirical_std: std_dev(&values),
        theoretical_mean: theory.weighted_mean(),
        mc_effective_size: 1.0 / sum_sq,
    };
    Ok(MarginalResult {
        empirical,
        theoretical,
        values,
        summary,
    })
}

pub fn write(r: &MarginalResult, out: &Path) -> CliResult<()> {
    let mut csv = Csv::new(&["bin_left", "bin_right", "empirical_density", "theoretical_density"]);
    let e = &r.empirical;
    for b in 0..e.bins() {
        csv.row(&[&e.edges[b], &e.edges[b + 1], &e.density[b], &r.theoretical.density[b]]);
    }
    csv.write(&out.join("marginal.csv"))?;
    write_json(&out.join("marginal_summary.json"), &r.summary)
}

pub fn report(r: &MarginalResult) -> String {
    format!(
        "marginal: {} coefficient over {} runs, TV distance to theory {:.4}",
        r.summary.word, r.summary.runs, r.summary.tv_distance
    )
}
