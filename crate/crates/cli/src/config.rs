//! Experiment knobs shared by the TOML config file and the command line.
//! Flags win over file values; anything left unset falls back to a
//! per-experiment default.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use rplab::{Error, Result};

/// Default seed when neither a flag, the file, nor `RPLAB_SEED` sets one.
pub const DEFAULT_SEED: u64 = 0;
pub const SEED_ENV: &str = "RPLAB_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Selfcheck,
    Sig,
    Ccnorm,
    EulerRate,
    DavieRate,
    GammaBound,
    Azencott,
    LqConv,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Selfcheck,
        Kind::Sig,
        Kind::Ccnorm,
        Kind::EulerRate,
        Kind::DavieRate,
        Kind::GammaBound,
        Kind::Azencott,
        Kind::LqConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Selfcheck => "selfcheck",
            Kind::Sig => "sig",
            Kind::Ccnorm => "ccnorm",
            Kind::EulerRate => "euler-rate",
            Kind::DavieRate => "davie-rate",
            Kind::GammaBound => "gamma-bound",
            Kind::Azencott => "azencott",
            Kind::LqConv => "lq-conv",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment kind {s:?}")))
    }
}

/// A grid value that also accepts `e` for Euler's number.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "e" => Ok(std::f64::consts::E),
        other => other.parse::<f64>().map_err(|e| format!("{other:?}: {e}")),
    }
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GeodesicKnobs {
    /// Segments of the witness path.
    #[arg(long)]
    pub m: Option<usize>,
    /// Length budget factor `K` for geodesic cells.
    #[arg(long)]
    pub k_budget: Option<f64>,
    /// Signature tolerance of the witness path.
    #[arg(long)]
    pub geodesic_tol: Option<f64>,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Knobs {
    /// Experiment kind; only meaningful in a config file.
    #[arg(skip)]
    pub kind: Option<Kind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Driver dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Truncation depth / Euler step order.
    #[arg(long = "N", id = "N")]
    #[serde(rename = "N")]
    pub depth: Option<usize>,
    /// Roughness exponent.
    #[arg(long)]
    pub p: Option<f64>,
    /// Builtin vector-field name or path to a field JSON file.
    #[arg(long)]
    pub fields: Option<String>,
    /// Drift field; rejected, drifts are not supported.
    #[arg(long)]
    pub drift: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y0: Option<Vec<f64>>,
    /// Input file (path CSV or group element JSON).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Randomized cases per property.
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Samples for the Euler/geodesic agreement run (0 skips it).
    #[arg(long)]
    pub agreement_samples: Option<usize>,
    /// Skeleton resolution `2^-fine_level`.
    #[arg(long)]
    pub fine_level: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub lengths: Option<Vec<f64>>,
    /// Evenly spaced window starts per length.
    #[arg(long)]
    pub windows: Option<usize>,
    /// Reference integrator tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub r_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub q_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_real)]
    pub b_grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub geodesic: GeodesicKnobs,
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl Knobs {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("knobs serialize")
    }

    /// `self` with every value set in `top` replaced by it.
    pub fn overlaid(mut self, top: &Knobs) -> Knobs {
        overlay!(top, self; kind, seed, workers, out, d, depth, p, fields, drift, y0, input, cases,
            samples, agreement_samples, fine_level, lengths, windows, tol, t_grid, r_grid, q_list,
            n_list, b_grid);
        overlay!(top.geodesic, self.geodesic; m, k_budget, geodesic_tol);
        self
    }

    /// Seed from the knobs, else `RPLAB_SEED`, else [`DEFAULT_SEED`].
    pub fn resolve_seed(&mut self, env: Option<&str>) -> Result<u64> {
        let seed = match (self.seed, env) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .trim()
                .parse()
                .map_err(|e| Error::InvalidInput(format!("{SEED_ENV}={v:?}: {e}")))?,
            (None, None) => DEFAULT_SEED,
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    /// Rejects knobs every experiment refuses.
    pub fn validate_common(&self) -> Result<()> {
        if let Some(drift) = &self.drift {
            return Err(Error::Unsupported(format!(
                "drift field {drift:?}: only driftless systems dy = V(y) dx are supported"
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidInput("workers must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_nesting() {
        let text = "kind = \"azencott\"\nN = 3\np = 2.5\nr-grid = [1.0, 2.0]\n[geodesic]\nm = 16\n";
        let k = Knobs::from_toml(text).unwrap();
        assert_eq!(k.kind, Some(Kind::Azencott));
        assert_eq!(k.depth, Some(3));
        assert_eq!(k.geodesic.m, Some(16));
        assert_eq!(Knobs::from_toml(&k.to_toml()).unwrap(), k);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Knobs::from_toml("colour = 3").is_err());
        assert!(Knobs::from_toml("kind = \"plot\"").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Knobs::from_toml("seed = 1\np = 2.5\n[geodesic]\nm = 8").unwrap();
        let flags = Knobs {
            seed: Some(9),
            geodesic: GeodesicKnobs { m: Some(32), ..Default::default() },
            ..Default::default()
        };
        let merged = file.overlaid(&flags);
        assert_eq!((merged.seed, merged.p, merged.geodesic.m), (Some(9), Some(2.5), Some(32)));
    }

    #[test]
    fn seed_precedence() {
        let mut k = Knobs::default();
        assert_eq!(k.resolve_seed(Some("42")).unwrap(), 42);
        let mut k = Knobs { seed: Some(3), ..Default::default() };
        assert_eq!(k.resolve_seed(Some("42")).unwrap(), 3);
        assert!(Knobs::default().resolve_seed(Some("x")).is_err());
    }

    #[test]
    fn drift_is_refused() {
        let k = Knobs { drift: Some("v0".into()), ..Default::default() };
        assert!(matches!(k.validate_common(), Err(Error::Unsupported(_))));
    }
}
