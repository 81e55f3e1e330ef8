//! Run parameters: defaults, a TOML file and command-line flags, in rising precedence.

use crate::error::CliError;
use boolperc::connectivity::EventSpec;
use boolperc::measures::MeasureKind;
use boolperc::{RadiusMeasure, Truncation};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Every tunable of every subcommand. Unset keys fall back to the config file,
/// then to the defaults documented on each accessor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Dimension (default 2).
    #[arg(long)]
    pub d: Option<usize>,
    /// Radius law: power-law, truncated or point-mass (default power-law).
    /// A config file may also give a table such as `{ kind = "truncated", delta = 1.0, cutoff = 8.0 }`.
    #[arg(long)]
    pub measure: Option<MeasureSpec>,
    /// Tail exponent of the power law (default 1).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Support cut-off of the truncated power law.
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Radius of the point mass (default 1).
    #[arg(long)]
    pub radius: Option<f64>,

    #[arg(long)]
    pub lambda: Option<f64>,
    /// Intensities for coupled curves.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub lambda_lo: Option<f64>,
    #[arg(long)]
    pub lambda_hi: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub max_replicas: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,

    /// Event: crossing, seed, big-ball, dictator, two-arm or slab.
    #[arg(long)]
    pub event: Option<String>,
    #[arg(long)]
    pub inner: Option<f64>,
    #[arg(long)]
    pub outer: Option<f64>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub big_n: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub big_k: Option<f64>,
    /// Outer scales of the two-arm sweep.
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<f64>>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Radius of the ball `S` for the `φ` functional.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub ell_max: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,

    /// Cell position for the pivotal integral.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Radius band of the pivotal cell.
    #[arg(long)]
    pub band: Option<u32>,
    #[arg(long)]
    pub draws: Option<u64>,
    #[arg(long)]
    pub tail_budget: Option<f64>,
    /// Half-width of the coupled finite difference in `δ`.
    #[arg(long)]
    pub h: Option<f64>,
    /// Cells examined by the influence diagnostic, smallest radius band first (default 400).
    #[arg(long)]
    pub cell_budget: Option<usize>,

    /// Dyadic probabilities, one per variable or a single shared value.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<String>>,
    /// Encoding depths to check.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<u32>>,

    /// Sites range over `[-M, M]^2`.
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub half_sites: Option<i64>,
    /// Acceptance probabilities of the abstract exploration.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub xi: Option<f64>,
    /// JSON-lines trace of the first exploration replica.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Sprinkling geometry: ball or cube.
    #[arg(long)]
    pub geometry: Option<String>,
    /// Size of `A` (radius or half-side).
    #[arg(long)]
    pub a_size: Option<f64>,
    /// Size of the window `R`.
    #[arg(long)]
    pub room: Option<f64>,
    /// Size of the target boundary `C`.
    #[arg(long)]
    pub target: Option<f64>,

    #[arg(long)]
    pub replicas: Option<u64>,
    /// Master seed; defaults to `BOOLPERC_SEED`, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replica offset, for splitting one run into mergeable parts.
    #[arg(long)]
    pub offset: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Largest radius sampled; by default chosen from the discarded-ball budget.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Expected number of discarded balls allowed (default 1e-3).
    #[arg(long)]
    pub max_discarded: Option<f64>,
    /// Output CSV path (default `<subcommand>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A radius law named by flag, or spelled out as a table with its own parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Name(String),
    Table(MeasureKind),
}

impl std::str::FromStr for MeasureSpec {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(MeasureSpec::Name(s.to_string()))
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

fn need<T: Clone>(v: &Option<T>, key: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| missing(key))
}

impl Params {
    /// Reads a flat TOML file.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `self` win over those in `base`.
    pub fn over(self, base: Params) -> Params {
        let top = serde_json::to_value(self).expect("params serialize");
        let mut merged = serde_json::to_value(base).expect("params serialize");
        let (serde_json::Value::Object(top), serde_json::Value::Object(m)) = (top, &mut merged) else {
            unreachable!("params serialize to objects")
        };
        for (k, v) in top {
            if !v.is_null() {
                m.insert(k, v);
            }
        }
        serde_json::from_value(merged).expect("params round-trip")
    }

    /// Applies `BOOLPERC_SEED` when no seed was given.
    pub fn with_env_seed(mut self) -> Result<Self, CliError> {
        if self.seed.is_none() {
            if let Ok(s) = std::env::var("BOOLPERC_SEED") {
                let seed = s.trim().parse().map_err(|_| CliError::Config(format!("BOOLPERC_SEED is not a u64: {s:?}")))?;
                self.seed = Some(seed);
            }
        }
        Ok(self)
    }

    pub fn dim(&self) -> Result<usize, CliError> {
        match self.d.unwrap_or(2) {
            d @ 1..=8 => Ok(d),
            d => Err(CliError::Config(format!("d must lie in 1..=8, got {d}"))),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn replicas(&self) -> Result<u64, CliError> {
        match self.replicas.unwrap_or(1000) {
            0 => Err(CliError::Config("replicas must be at least 1".into())),
            r => Ok(r),
        }
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        let l = need(&self.lambda, "lambda")?;
        if !(l >= 0.0 && l.is_finite()) {
            return Err(CliError::Config(format!("lambda must be finite and nonnegative, got {l}")));
        }
        Ok(l)
    }

    pub fn req_f64(&self, v: Option<f64>, key: &str) -> Result<f64, CliError> {
        need(&v, key)
    }

    pub fn truncation(&self) -> Truncation {
        let max_discarded = self.max_discarded.unwrap_or(1e-3);
        match self.r_max {
            Some(r_max) => Truncation::Fixed { r_max, max_discarded },
            None => Truncation::Auto { max_discarded },
        }
    }

    pub fn mc(&self) -> Result<boolperc::McSettings, CliError> {
        Ok(boolperc::McSettings::new(self.replicas()?, self.seed())
            .offset(self.offset.unwrap_or(0))
            .truncation(self.truncation()))
    }

    pub fn measure(&self) -> Result<RadiusMeasure, CliError> {
        let d = self.dim()?;
        let delta = self.delta.unwrap_or(1.0);
        let name = match &self.measure {
            None => "power-law",
            Some(MeasureSpec::Name(n)) => n.as_str(),
            Some(MeasureSpec::Table(kind)) => {
                return match *kind {
                    MeasureKind::PowerLaw { delta } => RadiusMeasure::power_law(d, delta),
                    MeasureKind::Truncated { delta, cutoff } => RadiusMeasure::truncated(d, delta, cutoff),
                    MeasureKind::PointMass { radius } => RadiusMeasure::point_mass(d, radius),
                }
                .map_err(|e| CliError::Config(e.to_string()));
            }
        };
        let mu = match name {
            "power-law" | "powerlaw" => RadiusMeasure::power_law(d, delta),
            "truncated" => RadiusMeasure::truncated(d, delta, need(&self.cutoff, "cutoff")?),
            "point-mass" | "pointmass" => RadiusMeasure::point_mass(d, self.radius.unwrap_or(1.0)),
            other => return Err(CliError::Config(format!("unknown measure `{other}`"))),
        };
        mu.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn event(&self) -> Result<EventSpec, CliError> {
        let d = self.dim()?;
        let f = |v: Option<f64>, k: &str| need(&v, k);
        let ev = match need(&self.event, "event")?.as_str() {
            "crossing" => EventSpec::Crossing { inner: self.inner.unwrap_or(0.0), outer: f(self.outer, "outer")? },
            "seed" => EventSpec::Seed { n: f(self.n, "n")?, big_n: f(self.big_n, "N")?, rho: f(self.rho, "rho")? },
            "big-ball" => EventSpec::BigBall { n: f(self.n, "n")?, threshold: f(self.threshold, "threshold")? },
            "dictator" => EventSpec::dictator(f(self.n, "n")?, d, self.delta.unwrap_or(1.0)),
            "two-arm" => EventSpec::TwoArm { k: f(self.k, "k")?, big_k: f(self.big_k, "K")? },
            "slab" => EventSpec::slab_crossing(d, f(self.k, "k")?, f(self.outer, "outer")?),
            other => return Err(CliError::Config(format!("unknown event `{other}`"))),
        };
        ev.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: Params = toml::from_str("lambda = 0.5\nreplicas = 10\nN = 6.0\n").unwrap();
        let cli = Params { lambda: Some(0.7), ..Params::default() };
        let p = cli.over(file);
        assert_eq!(p.lambda, Some(0.7));
        assert_eq!(p.replicas, Some(10));
        assert_eq!(p.big_n, Some(6.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Params>("lamda = 0.5\n").is_err());
    }

    #[test]
    fn measure_table_and_flag_agree() {
        let file: Params = toml::from_str("measure = { kind = \"truncated\", delta = 2.0, cutoff = 8.0 }\n").unwrap();
        let flat = Params {
            measure: Some(MeasureSpec::Name("truncated".into())),
            delta: Some(2.0),
            cutoff: Some(8.0),
            ..Params::default()
        };
        assert_eq!(file.measure().unwrap(), flat.measure().unwrap());
        let pm: Params = toml::from_str("measure = { kind = \"pointmass\", radius = 0.5 }\n").unwrap();
        assert_eq!(pm.measure().unwrap(), RadiusMeasure::point_mass(2, 0.5).unwrap());
        let bad: Params = toml::from_str("measure = { kind = \"powerlaw\", delta = -1.0 }\n").unwrap();
        assert!(bad.measure().is_err());
    }

    #[test]
    fn missing_event_keys_are_reported() {
        let p = Params { event: Some("seed".into()), n: Some(1.0), ..Params::default() };
        let err = p.event().unwrap_err();
        assert!(err.to_string().contains("`N`"), "{err}");
    }
}
