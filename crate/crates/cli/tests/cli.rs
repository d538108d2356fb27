use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;
use tempfile::TempDir;

use rplab_cli::{main_with, Cli, EXIT_ERROR, EXIT_PASS, EXIT_PROPERTY_FAILURE};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn rplab(args: &[&str], env_seed: Option<&str>) -> Run {
    let cli = Cli::try_parse_from(std::iter::once("rplab").chain(args.iter().copied())).expect("arguments parse");
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(cli, env_seed, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn report(dir: &Path, kind: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{kind}.json"))).unwrap()).unwrap()
}

fn out_arg(dir: &TempDir) -> String {
    dir.path().to_str().unwrap().to_owned()
}

#[test]
fn selfcheck_passes_and_writes_artifacts() {
    let dir = TempDir::new().unwrap();
    let run = rplab(&["selfcheck", "--cases", "50", "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_PASS, "{}", run.stdout);
    assert_eq!(run.stdout.lines().count(), 6);
    assert!(run.stdout.lines().all(|l| l.starts_with("PASS selfcheck ")));
    let json = report(dir.path(), "selfcheck");
    assert_eq!(json["config"]["cases"], 50);
    assert_eq!(json["passed"], true);
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "selfcheck");
}

#[test]
fn ccnorm_pure_area_is_within_two_percent_of_dido() {
    let dir = TempDir::new().unwrap();
    let input = fixture("heisenberg_pure_area.json");
    let run = rplab(&["ccnorm", "--input", input.to_str().unwrap(), "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_PASS, "{}{}", run.stdout, run.stderr);
    let upper = report(dir.path(), "ccnorm")["report"]["upper"].as_f64().unwrap();
    let exact = 2.0 * std::f64::consts::PI.sqrt();
    assert!((upper / exact - 1.0).abs() <= 0.02, "upper {upper}");
    assert!(dir.path().join("ccnorm_path.csv").exists());
}

#[test]
fn signature_of_a_square_carries_its_area() {
    let dir = TempDir::new().unwrap();
    let input = fixture("square.csv");
    let run = rplab(&["sig", "--input", input.to_str().unwrap(), "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_PASS);
    let sig: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("signature.json")).unwrap()).unwrap();
    let level2: Vec<f64> = serde_json::from_value(sig["levels"][2].clone()).unwrap();
    assert!((0.5 * (level2[1] - level2[2]) - 1.0).abs() < 1e-12);
}

#[test]
fn euler_rate_on_linear1d_meets_the_exponent() {
    let dir = TempDir::new().unwrap();
    let run = rplab(&["euler-rate", "--fields", "linear1d", "--N", "2", "--p", "1", "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_PASS, "{}", run.stdout);
    let slope = report(dir.path(), "euler-rate")["report"]["fitted_slope"].as_f64().unwrap();
    assert!(slope >= 2.9, "slope {slope}");
    let csv = fs::read_to_string(dir.path().join("euler-rate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# rplab euler-rate seed=0"));
    assert!(lines.next().unwrap().starts_with("# config {"));
    assert_eq!(lines.next(), Some("log_length,log_error,fit"));
}

#[test]
fn rough_driver_fails_the_smooth_rate_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let step = Normal::new(0.0, (1.0f64 / 4096.0).sqrt()).unwrap();
    let mut csv = String::from("t,x1\n");
    let mut x = 0.0;
    for k in 0..=4096 {
        csv.push_str(&format!("{:?},{x:?}\n", k as f64 / 4096.0));
        x += step.sample(&mut rng);
    }
    let input = dir.path().join("walk.csv");
    fs::write(&input, csv).unwrap();
    let run = rplab(
        &["euler-rate", "--fields", "linear1d", "--input", input.to_str().unwrap(), "--out", &out_arg(&dir)],
        None,
    );
    assert_eq!(run.code, EXIT_PROPERTY_FAILURE, "{}", run.stdout);
    assert!(run.stdout.starts_with("FAIL euler-rate euler-exponent"));
}

#[test]
fn errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir);
    for args in [
        vec!["sig", "--out", &out],
        vec!["euler-rate", "--fields", "no_such_field", "--out", &out],
        vec!["davie-rate", "--N", "1", "--p", "2.5", "--out", &out],
        vec!["selfcheck", "--workers", "0", "--out", &out],
    ] {
        let run = rplab(&args, None);
        assert_eq!(run.code, EXIT_ERROR, "{args:?}");
        assert!(run.stderr.starts_with("error: "), "{args:?}: {}", run.stderr);
    }
}

#[test]
fn drift_is_refused() {
    let dir = TempDir::new().unwrap();
    let run = rplab(&["davie-rate", "--drift", "linear1d", "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("drift"), "{}", run.stderr);
    assert!(!dir.path().join("davie-rate.json").exists());
}

#[test]
fn config_file_flags_and_environment_compose() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, "kind = \"selfcheck\"\nseed = 5\ncases = 20\nd = 3\n").unwrap();
    let config = config.to_str().unwrap();
    let out = out_arg(&dir);

    assert_eq!(rplab(&["run", "--config", config, "--out", &out], Some("9")).code, EXIT_PASS);
    let json = report(dir.path(), "selfcheck");
    assert_eq!((json["seed"].as_u64(), json["config"]["d"].as_u64()), (Some(5), Some(3)));

    assert_eq!(rplab(&["selfcheck", "--config", config, "--seed", "7", "--d", "2", "--out", &out], None).code, EXIT_PASS);
    let json = report(dir.path(), "selfcheck");
    assert_eq!((json["seed"].as_u64(), json["config"]["d"].as_u64()), (Some(7), Some(2)));

    assert_eq!(rplab(&["selfcheck", "--cases", "5", "--out", &out], Some("11")).code, EXIT_PASS);
    assert_eq!(report(dir.path(), "selfcheck")["seed"].as_u64(), Some(11));

    let mismatch = rplab(&["azencott", "--config", config, "--out", &out], None);
    assert_eq!(mismatch.code, EXIT_ERROR);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "kind = \"selfcheck\"\ncolour = 1\n").unwrap();
    assert_eq!(rplab(&["run", "--config", bad.to_str().unwrap(), "--out", &out], None).code, EXIT_ERROR);
}

/// CSV rows without the `#` echo lines, which name the output dir and worker count.
fn csv_body(dir: &Path, kind: &str) -> String {
    let text = fs::read_to_string(dir.join(format!("{kind}.csv"))).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn outputs_are_identical_across_reruns_and_worker_counts() {
    let cases: [(&str, &[&str]); 2] = [
        ("davie-rate", &["davie-rate", "--samples", "6", "--windows", "4", "--fine-level", "10", "--seed", "42"]),
        ("azencott", &["azencott", "--samples", "300", "--fine-level", "10", "--seed", "42"]),
    ];
    for (kind, args) in cases {
        let bodies: Vec<String> = ["1", "1", "4"]
            .iter()
            .map(|workers| {
                let dir = TempDir::new().unwrap();
                let out = out_arg(&dir);
                let mut full = args.to_vec();
                full.extend(["--workers", workers, "--out", &out]);
                let run = rplab(&full, None);
                assert_ne!(run.code, EXIT_ERROR, "{}", run.stderr);
                csv_body(dir.path(), kind)
            })
            .collect();
        assert_eq!(bodies[0], bodies[1], "{kind} rerun");
        assert_eq!(bodies[0], bodies[2], "{kind} worker count");
    }
}

#[test]
fn gamma_bound_defaults_pass() {
    let dir = TempDir::new().unwrap();
    let run = rplab(&["gamma-bound", "--out", &out_arg(&dir)], None);
    assert_eq!(run.code, EXIT_PASS, "{}", run.stdout);
    assert_eq!(csv_body(dir.path(), "gamma-bound").lines().count(), 5);
}
