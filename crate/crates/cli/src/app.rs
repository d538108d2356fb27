use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use rplab::{Error, Result};

use crate::commands::{run, Outcome};
use crate::config::{Kind, Knobs, SEED_ENV};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PROPERTY_FAILURE: i32 = 2;

const DEFAULT_OUT: &str = "rplab-out";

#[derive(Parser, Debug)]
#[command(name = "rplab", version, about = "Rough-path numerics experiments")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Randomized tensor-group and Chen-identity checks.
    Selfcheck(Knobs),
    /// Step-N signature of a path CSV.
    Sig(Knobs),
    /// Lower and upper CC-norm bounds of a group element JSON.
    Ccnorm(Knobs),
    /// Euler defect rate along a smooth driver.
    EulerRate(Knobs),
    /// Davie rate along enhanced Brownian motion.
    DavieRate(Knobs),
    /// Growth of the Λ/Γ recursion against its bounds.
    GammaBound(Knobs),
    /// Tail probabilities of the Euler defect.
    Azencott(Knobs),
    /// L^q convergence of dyadic approximations.
    LqConv(Knobs),
    /// Runs the experiment named by `kind` in the config file.
    Run(Knobs),
}

impl Command {
    fn split(self) -> (Option<Kind>, Knobs) {
        match self {
            Command::Selfcheck(k) => (Some(Kind::Selfcheck), k),
            Command::Sig(k) => (Some(Kind::Sig), k),
            Command::Ccnorm(k) => (Some(Kind::Ccnorm), k),
            Command::EulerRate(k) => (Some(Kind::EulerRate), k),
            Command::DavieRate(k) => (Some(Kind::DavieRate), k),
            Command::GammaBound(k) => (Some(Kind::GammaBound), k),
            Command::Azencott(k) => (Some(Kind::Azencott), k),
            Command::LqConv(k) => (Some(Kind::LqConv), k),
            Command::Run(k) => (None, k),
        }
    }
}

/// Merges file and flags, resolves the kind and the seed.
pub fn resolve(cli: Cli, env_seed: Option<&str>) -> Result<(Kind, Knobs)> {
    let (sub_kind, flags) = cli.command.split();
    let file = match &cli.config {
        Some(path) => Knobs::load(path)?,
        None => Knobs::default(),
    };
    let kind = match (sub_kind, file.kind) {
        (Some(k), Some(f)) if k != f => {
            return Err(Error::InvalidInput(format!("config is for {f}, but the subcommand is {k}")))
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(Error::InvalidInput("run needs a config file with a kind".into())),
    };
    let mut knobs = file.overlaid(&flags);
    knobs.resolve_seed(env_seed)?;
    Ok((kind, knobs))
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn strip_nulls(value: &mut serde_json::Value) {
    if let serde_json::Value::Object(map) = value {
        map.retain(|_, v| !v.is_null());
        map.values_mut().for_each(strip_nulls);
        map.retain(|_, v| !matches!(v, serde_json::Value::Object(m) if m.is_empty()));
    }
}

/// Writes `<kind>.json`, `<kind>.csv`, extras and `metadata.json` under `dir`.
pub fn write_artifacts(dir: &Path, outcome: &Outcome, started: f64, elapsed: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let name = outcome.kind.name();
    let mut config = serde_json::to_value(&outcome.config).map_err(|e| Error::Inconsistent(e.to_string()))?;
    strip_nulls(&mut config);
    let body = json!({
        "kind": name,
        "seed": outcome.config.seed,
        "config": config,
        "passed": outcome.passed(),
        "assertions": outcome.assertions,
        "report": outcome.report,
    });
    let pretty = serde_json::to_string_pretty(&body).map_err(|e| Error::Inconsistent(e.to_string()))?;
    fs::write(dir.join(format!("{name}.json")), pretty + "\n")?;
    let echo = format!(
        "# rplab {name} seed={}\n# config {}\n",
        outcome.config.seed.unwrap_or_default(),
        config
    );
    if let Some(csv) = &outcome.csv {
        fs::write(dir.join(format!("{name}.csv")), format!("{echo}{csv}"))?;
    }
    for (file, contents) in &outcome.extra {
        let prefixed = if file.ends_with(".csv") && !file.starts_with("ccnorm_path") {
            format!("{echo}{contents}")
        } else {
            contents.clone()
        };
        fs::write(dir.join(file), prefixed)?;
    }
    let metadata = json!({
        "kind": name,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "argv": std::env::args().collect::<Vec<_>>(),
    });
    fs::write(dir.join("metadata.json"), metadata.to_string() + "\n")?;
    Ok(())
}

fn execute(kind: Kind, knobs: Knobs, stdout: &mut dyn Write) -> Result<bool> {
    let out_dir = knobs.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let started = unix_seconds();
    let clock = Instant::now();
    let outcome = match knobs.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(|| run(kind, knobs))?,
        None => run(kind, knobs)?,
    };
    write_artifacts(&out_dir, &outcome, started, clock.elapsed().as_secs_f64())?;
    for a in &outcome.assertions {
        let status = if a.passed { "PASS" } else { "FAIL" };
        writeln!(stdout, "{status} {kind} {}: {}", a.name, a.detail)?;
    }
    Ok(outcome.passed())
}

/// Full pipeline from parsed arguments to exit status.
pub fn main_with(cli: Cli, env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = resolve(cli, env_seed).and_then(|(kind, knobs)| execute(kind, knobs, stdout));
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_PROPERTY_FAILURE,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn main_from_env() -> i32 {
    let cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    main_with(cli, env_seed.as_deref(), &mut std::io::stdout(), &mut std::io::stderr())
}
