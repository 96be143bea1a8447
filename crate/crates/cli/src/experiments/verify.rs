use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use thermaldrift::dilation::{verify_with_theta_offset, DilationCircuit, VerifyReport};
use thermaldrift::pauli::{Letter, PauliWord};
use thermaldrift::sampler::run_rng;
use thermaldrift::DensityMatrix;

use super::point_seed;
use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::output::Csv;

pub const SIZES: [usize; 3] = [1, 2, 3];
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCase {
    pub n: usize,
    pub case: usize,
    pub report: VerifyReport,
    pub expected_gate_count: usize,
}

impl VerifyCase {
    pub fn passes(&self) -> bool {
        self.report.passes(TOLERANCE) && self.report.gate_count == self.expected_gate_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub theta_offset: f64,
    pub cases: Vec<VerifyCase>,
}

impl VerifyResult {
    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.passes()).count()
    }
}

/// Uniform over the `4^n − 1` non-identity words.
pub fn random_word<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PauliWord {
    const LETTERS: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];
    loop {
        let letters: Vec<Letter> = (0..n).map(|_| LETTERS[rng.random_range(0..4)]).collect();
        if letters.iter().any(|&l| l != Letter::I) {
            return PauliWord::new(letters).expect("valid length");
        }
    }
}

pub fn run(s: &Settings) -> CliResult<VerifyResult> {
    let jobs: Vec<(usize, usize)> = SIZES
        .iter()
        .flat_map(|&n| (0..s.cases).map(move |c| (n, c)))
        .collect();
    let cases = jobs
        .into_par_iter()
        .map(|(n, case)| {
            let mut rng = run_rng(point_seed(s.seed, n as u64), case as u64);
            let word = random_word(n, &mut rng);
            let tau = 1.0 - rng.random::<f64>();
            let rho = DensityMatrix::random(n, &mut rng);
            let report = verify_with_theta_offset(&word, tau, &rho, s.theta_offset)?;
            let (support, _) = word.strip_identity()?;
            Ok(VerifyCase {
                n,
                case,
                report,
                expected_gate_count: DilationCircuit::expected_gate_count(&support),
            })
        })
        .collect::<CliResult<_>>()?;
    Ok(VerifyResult {
        theta_offset: s.theta_offset,
        cases,
    })
}

pub fn write(r: &VerifyResult, out: &Path) -> CliResult<()> {
    let mut csv = Csv::new(&[
        "n",
        "case",
        "word",
        "tau",
        "max_prob_deviation",
        "max_trace_distance",
        "loop_deviation",
        "completeness_deviation",
        "gate_count",
        "expected_gate_count",
        "pass",
    ]);
    for c in &r.cases {
        let rep = &c.report;
        csv.row(&[
            &c.n,
            &c.case,
            &rep.word,
            &rep.tau,
            &rep.max_prob_deviation,
            &rep.max_trace_distance,
            &rep.loop_deviation,
            &rep.completeness_deviation,
            &rep.gate_count,
            &c.expected_gate_count,
            &c.passes(),
        ]);
    }
    csv.write(&out.join("verify.csv"))
}

/// Turns failed cases into a verification error.
pub fn check(r: &VerifyResult) -> CliResult<()> {
    match r.failures() {
        0 => Ok(()),
        f => Err(CliError::Verification(format!("{f} of {} circuit cases failed", r.cases.len()))),
    }
}

pub fn report(r: &VerifyResult) -> String {
    let worst = r
        .cases
        .iter()
        .map(|c| c.report.max_prob_deviation.max(c.report.max_trace_distance))
        .fold(0.0, f64::max);
    format!(
        "verify-circuit: {} cases, {} failures, worst deviation {worst:e}",
        r.cases.len(),
        r.failures()
    )
}
