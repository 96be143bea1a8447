use std::path::Path;

use serde::Serialize;
use thermaldrift::sampler::{run_batch, SamplerConfig};

use super::{point_seed, EnsembleInfo};
use crate::config::Settings;
use crate::error::CliResult;
use crate::output::{write_json, write_jsonl};

#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub run_index: u64,
    pub beta: f64,
    pub steps: usize,
    pub tau: f64,
    pub coefficients: Vec<f64>,
    pub endpoint: Vec<i64>,
    pub trace_distance: f64,
    pub hnorm: f64,
    /// Row-major `[re, im]` entries, only with `dump_states`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    pub ensemble: EnsembleInfo,
    pub records: Vec<SampleRecord>,
}

pub fn run(s: &Settings) -> CliResult<SampleResult> {
    let ensemble = s.ensemble()?;
    let beta = s.betas[0];
    let steps = s.steps_for(ensemble.lambda(), beta, s.ks[0]);
    let config = SamplerConfig::new(beta, steps, point_seed(s.seed, 0)).with_diagnostics(true);
    let tau = config.tau(ensemble.lambda());
    let mut records = Vec::with_capacity(s.runs);
    for sample in run_batch(&ensemble, &config, s.runs, None)? {
        let sample = sample?;
        sample.check_invariants(&ensemble)?;
        records.push(SampleRecord {
            run_index: sample.run_index,
            beta,
            steps,
            tau,
            hnorm: sample.label(&ensemble)?.operator_norm(),
            trace_distance: sample.trace_distance.expect("diagnostics enabled"),
            state: s.dump_states.then(|| sample.state.to_row_major()),
            coefficients: sample.coefficients,
            endpoint: sample.endpoint,
        });
    }
    Ok(SampleResult {
        ensemble: EnsembleInfo::of(&ensemble),
        records,
    })
}

pub fn write(r: &SampleResult, out: &Path) -> CliResult<()> {
    write_json(&out.join("ensemble.json"), &r.ensemble)?;
    write_jsonl(&out.join("samples.jsonl"), &r.records)
}

pub fn report(r: &SampleResult) -> String {
    let worst = r.records.iter().map(|x| x.trace_distance).fold(0.0, f64::max);
    format!(
        "sample: {} records on {}, max trace distance {worst:e}",
        r.records.len(),
        r.ensemble.name
    )
}
