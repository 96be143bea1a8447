use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use thermaldrift::sampler::{build_grid_ensemble, Model};
use thermaldrift_cli::experiments::{levelstats, marginal, sample, scaling, tradeoff, verify};
use thermaldrift_cli::{CliError, Experiment, Overrides, Settings};

const SUBCOMMANDS: [&str; 6] = ["sample", "scaling", "marginal", "tradeoff", "levelstats", "verify-circuit"];

fn manifest_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermaldrift"))
        .args(args)
        .env_remove("THERMALDRIFT_THREADS")
        .output()
        .unwrap()
}

fn read_dir(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read_to_string(e.path()).unwrap(),
            )
        })
        .collect()
}

/// Runs each fixture config and compares every output file with the stored copy.
/// `UPDATE_GOLDEN=1` rewrites the stored copies.
#[test]
fn golden_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for cmd in SUBCOMMANDS {
        let config = manifest_path(&format!("tests/fixtures/{cmd}.toml"));
        let out = tmp.path().join(cmd);
        let o = cli(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let produced = read_dir(&out);
        let golden_dir = manifest_path(&format!("tests/golden/{cmd}"));
        if update {
            let _ = fs::remove_dir_all(&golden_dir);
            fs::create_dir_all(&golden_dir).unwrap();
            for (name, text) in &produced {
                fs::write(golden_dir.join(name), text).unwrap();
            }
            continue;
        }
        let golden = read_dir(&golden_dir);
        assert_eq!(
            produced.keys().collect::<Vec<_>>(),
            golden.keys().collect::<Vec<_>>(),
            "{cmd}: file set"
        );
        for (name, text) in &produced {
            assert_eq!(text, &golden[name], "{cmd}/{name} differs from the golden copy");
        }
    }
}

#[test]
fn csv_headers_are_fixed() {
    let tmp = tempfile::tempdir().unwrap();
    let expected = [
        ("scaling", "scaling.csv", "beta,k,N,run,trace_distance,trend"),
        ("scaling", "scaling_summary.csv", "beta,k,N,mean_trace_distance,max_trace_distance,trend"),
        ("scaling", "scaling_slopes.csv", "k,slope_mean,slope_max,expected_slope"),
        ("marginal", "marginal.csv", "bin_left,bin_right,empirical_density,theoretical_density"),
        ("tradeoff", "tradeoff.csv", "k,N,inv_epsilon_mean,hnorm_mean,hnorm_se,inv_epsilon_max"),
        ("levelstats", "levelstats_initial.csv", "bin_left,bin_right,density,poisson_ref,wd_ref"),
        ("levelstats", "levelstats_output.csv", "bin_left,bin_right,density,poisson_ref,wd_ref"),
        (
            "verify-circuit",
            "verify.csv",
            "n,case,word,tau,max_prob_deviation,max_trace_distance,loop_deviation,completeness_deviation,gate_count,expected_gate_count,pass",
        ),
    ];
    for (cmd, file, header) in expected {
        let config = manifest_path(&format!("tests/fixtures/{cmd}.toml"));
        let out = tmp.path().join(cmd);
        if !out.exists() {
            let o = cli(&[cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert!(o.status.success());
        }
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header, "{file}");
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }
}

#[test]
fn validation_errors_exit_1_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.toml");
    fs::write(&config, "experiment = \"sample\"\nrows = 2\nruns = 0\n").unwrap();
    let o = cli(&["sample", "--config", config.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:3: runs must be at least 1"), "{err}");

    let o = cli(&["sample", "--runs", "0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--runs"));

    fs::write(&config, "experiment = \"sample\"\nunknown_key = 1\n").unwrap();
    let o = cli(&["sample", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.toml:2:"));

    let o = cli(&["nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corrupted_theta_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("verify.toml");
    fs::write(&config, "experiment = \"verify-circuit\"\ncases = 3\ntheta_offset = 0.01\n").unwrap();
    let out = tmp.path().join("out");
    let o = cli(&["verify-circuit", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn threads_env_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_thermaldrift"))
        .args(["verify-circuit", "--cases", "1"])
        .env("THERMALDRIFT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_code_mapping() {
    assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
    assert_eq!(CliError::Numerical(thermaldrift::Error::Underflow { prob: 0.0 }).exit_code(), 2);
    assert_eq!(CliError::Verification("x".into()).exit_code(), 3);
}

fn settings(e: Experiment, flags: Overrides) -> Settings {
    Settings::resolve_text(e, None, &flags).unwrap()
}

#[test]
fn sample_records_pass_invariants() {
    let s = settings(
        Experiment::Sample,
        Overrides {
            beta: Some(1.0),
            steps: Some(500),
            runs: Some(5),
            ..Overrides::default()
        },
    );
    let r = sample::run(&s).unwrap();
    assert_eq!(r.records.len(), 5);
    let lambda = r.ensemble.lambda;
    for rec in &r.records {
        let total: i64 = rec.endpoint.iter().map(|x| x.abs()).sum();
        assert!(total <= 500 && (500 - total) % 2 == 0);
        for (c, x) in rec.coefficients.iter().zip(&rec.endpoint) {
            assert!((c - lambda * *x as f64 / 500.0).abs() < 1e-12);
        }
        let l1: f64 = rec.coefficients.iter().map(|c| c.abs()).sum();
        assert!(rec.hnorm <= l1 + 1e-12);
        assert!(rec.trace_distance >= 0.0 && rec.trace_distance < 1.0);
        assert!(rec.state.is_none());
    }
}

#[test]
fn more_steps_means_smaller_error() {
    let base = Overrides {
        rows: Some(1),
        cols: Some(3),
        beta_min: Some(1.0),
        beta_max: Some(2.0),
        beta_points: Some(2),
        k: vec![2.0],
        runs: Some(10),
        ..Overrides::default()
    };
    let coarse = scaling::run(&settings(
        Experiment::Scaling,
        Overrides {
            step_constant: Some(10.0),
            ..base.clone()
        },
    ))
    .unwrap();
    let fine = scaling::run(&settings(
        Experiment::Scaling,
        Overrides {
            step_constant: Some(100.0),
            ..base
        },
    ))
    .unwrap();
    for (c, f) in coarse.points.iter().zip(&fine.points) {
        assert!(f.mean_error() < c.mean_error(), "beta {}: {} vs {}", c.beta, f.mean_error(), c.mean_error());
    }
}

#[test]
fn marginal_is_symmetric_at_infinite_temperature() {
    let s = settings(
        Experiment::Marginal,
        Overrides {
            beta: Some(1e-9),
            runs: Some(4000),
            mc_count: Some(500),
            step_constant: Some(50.0),
            ..Overrides::default()
        },
    );
    let r = marginal::run(&s).unwrap();
    let n = r.values.len() as f64;
    assert!(r.summary.empirical_mean.abs() < 3.0 * r.summary.empirical_std / n.sqrt());
    assert!((r.empirical.integral() - 1.0).abs() < 1e-12);
    assert!((r.theoretical.integral() - 1.0).abs() < 1e-12);
}

fn monotone_with_one_inversion(xs: &[f64], increasing: bool) -> bool {
    let inversions = xs
        .windows(2)
        .filter(|w| if increasing { w[1] < w[0] } else { w[1] > w[0] })
        .count();
    inversions <= 1
}

#[test]
fn tradeoff_trends() {
    let r = tradeoff::run(&Settings::defaults(Experiment::Tradeoff)).unwrap();
    let inv: Vec<f64> = r.points.iter().map(|p| p.inv_epsilon_max()).collect();
    let inv_mean: Vec<f64> = r.points.iter().map(|p| p.inv_epsilon_mean()).collect();
    let norms: Vec<f64> = r.points.iter().map(|p| p.hnorm_mean()).collect();
    assert!(monotone_with_one_inversion(&inv, true), "{inv:?}");
    assert!(monotone_with_one_inversion(&inv_mean, true), "{inv_mean:?}");
    assert!(monotone_with_one_inversion(&norms, false), "{norms:?}");
    assert!(r.points.iter().all(|p| p.hnorm_se() > 0.0));
}

#[test]
fn levelstats_ratios_in_unit_interval() {
    let s = settings(
        Experiment::Levelstats,
        Overrides {
            runs: Some(4),
            ..Overrides::default()
        },
    );
    let r = levelstats::run(&s).unwrap();
    for stats in [&r.initial, &r.output] {
        assert!(stats.ratios.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!((0.0..=1.0).contains(&stats.mean_r));
    }
    assert_eq!(r.summary.output.states, 4);
}

#[test]
fn verify_reports_every_case() {
    let s = settings(
        Experiment::VerifyCircuit,
        Overrides {
            cases: Some(5),
            ..Overrides::default()
        },
    );
    let r = verify::run(&s).unwrap();
    assert_eq!(r.cases.len(), 15);
    assert_eq!(r.failures(), 0);
    for c in &r.cases {
        assert!(c.report.tau > 0.0 && c.report.tau <= 1.0);
        assert_eq!(c.report.word.len(), c.n);
    }
}

#[test]
fn default_marginal_axis_is_a_yy_term() {
    let s = Settings::defaults(Experiment::Marginal);
    let e = build_grid_ensemble(Model::Heisenberg, s.rows, s.cols, s.h).unwrap();
    assert_eq!(e.words()[s.axis].to_string(), "YYII");
}
