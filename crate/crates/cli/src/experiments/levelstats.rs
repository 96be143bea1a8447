use std::path::Path;

use rand::Rng;
use serde::Serialize;
use thermaldrift::operators::gibbs_state;
use thermaldrift::sampler::{build_grid_ensemble, run_indexed, run_rng, Model, SamplerConfig};
use thermaldrift::spectra::{modular_gap_ratios, reference_density, GapRatioStats, Reference, DEFAULT_MERGE_TOL};
use thermaldrift::DensityMatrix;

use rayon::prelude::*;

use super::point_seed;
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{write_json, Csv};

/// Reference used for the `wd_ref` column.
pub const WD_REFERENCE: Reference = Reference::Goe;

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub states: usize,
    pub ratios: usize,
    pub mean_r: f64,
    pub merged_levels: usize,
    pub excluded_levels: usize,
    pub l1_poisson: f64,
    pub l1_goe: f64,
    pub l1_gue: f64,
}

impl EnsembleStats {
    fn of(stats: &GapRatioStats, states: usize) -> Self {
        Self {
            states,
            ratios: stats.ratios.len(),
            mean_r: stats.mean_r,
            merged_levels: stats.merged_levels,
            excluded_levels: stats.excluded_levels,
            l1_poisson: stats.l1_distance(Reference::Poisson),
            l1_goe: stats.l1_distance(Reference::Goe),
            l1_gue: stats.l1_distance(Reference::Gue),
        }
    }

    /// L¹ distance to the Wigner–Dyson reference used in the histogram CSV.
    pub fn l1_wd(&self) -> f64 {
        self.l1_goe
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelstatsSummary {
    pub model: String,
    pub beta: f64,
    pub steps: usize,
    pub initial_beta: f64,
    pub wd_reference: String,
    pub initial: EnsembleStats,
    pub output: EnsembleStats,
    pub mean_r_difference: f64,
}

#[derive(Debug, Clone)]
pub struct LevelstatsResult {
    pub initial: GapRatioStats,
    pub output: GapRatioStats,
    pub summary: LevelstatsSummary,
}

/// Thermal state of a Heisenberg grid with couplings uniform in `[−h, h]`.
pub fn random_heisenberg_state<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    h: f64,
    beta: f64,
    rng: &mut R,
) -> CliResult<DensityMatrix> {
    let e = build_grid_ensemble(Model::Heisenberg, rows, cols, h)?;
    let coefficients: Vec<f64> = e.bounds().iter().map(|&b| rng.random_range(-b..=b)).collect();
    Ok(gibbs_state(&e.hamiltonian(&coefficients)?, beta))
}

pub fn run(s: &Settings) -> CliResult<LevelstatsResult> {
    let ensemble = s.ensemble()?;
    let beta = s.betas[0];
    let steps = s.steps_for(ensemble.lambda(), beta, s.ks[0]);
    let sampler_seed = point_seed(s.seed, 0);
    let initial_seed = point_seed(s.seed, 1);
    let per_run: Vec<(GapRatioStats, GapRatioStats)> = (0..s.runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(initial_seed, r);
            let rho0 = random_heisenberg_state(s.rows, s.cols, s.h, s.initial_beta, &mut rng)?;
            let before = modular_gap_ratios(&rho0, DEFAULT_MERGE_TOL)?;
            let config = SamplerConfig::new(beta, steps, sampler_seed).with_initial_state(rho0);
            let sample = run_indexed(&ensemble, &config, r)?;
            let after = modular_gap_ratios(&sample.state, DEFAULT_MERGE_TOL)?;
            Ok((before, after))
        })
        .collect::<CliResult<_>>()?;
    let initial = GapRatioStats::pool(per_run.iter().map(|p| &p.0))?;
    let output = GapRatioStats::pool(per_run.iter().map(|p| &p.1))?;
    let summary = LevelstatsSummary {
        model: s.model.to_string(),
        beta,
        steps,
        initial_beta: s.initial_beta,
        wd_reference: WD_REFERENCE.to_string(),
        initial: EnsembleStats::of(&initial, s.runs),
        output: EnsembleStats::of(&output, s.runs),
        mean_r_difference: output.mean_r - initial.mean_r,
    };
    Ok(LevelstatsResult {
        initial,
        output,
        summary,
    })
}

/// Mean of `reference_density` over `[a, b]` by the midpoint rule.
fn bin_average(kind: Reference, a: f64, b: f64) -> f64 {
    const POINTS: usize = 64;
    let h = (b - a) / POINTS as f64;
    (0..POINTS)
        .map(|i| reference_density(kind, a + (i as f64 + 0.5) * h))
        .sum::<f64>()
        / POINTS as f64
}

fn histogram_csv(stats: &GapRatioStats) -> Csv {
    let mut csv = Csv::new(&["bin_left", "bin_right", "density", "poisson_ref", "wd_ref"]);
    let h = &stats.histogram;
    for b in 0..h.bins() {
        let (a, z) = (h.edges[b], h.edges[b + 1]);
        csv.row(&[
            &a,
            &z,
            &h.density[b],
            &bin_average(Reference::Poisson, a, z),
            &bin_average(WD_REFERENCE, a, z),
        ]);
    }
    csv
}

pub fn write(r: &LevelstatsResult, out: &Path) -> CliResult<()> {
    histogram_csv(&r.initial).write(&out.join("levelstats_initial.csv"))?;
    histogram_csv(&r.output).write(&out.join("levelstats_output.csv"))?;
    write_json(&out.join("levelstats_summary.json"), &r.summary)
}

pub fn report(r: &LevelstatsResult) -> String {
    format!(
        "levelstats: <r> initial {:.4}, output {:.4} ({} output ratios)",
        r.summary.initial.mean_r, r.summary.output.mean_r, r.summary.output.ratios
    )
}
