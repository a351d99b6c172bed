//! Run configuration: a JSON file, command-line flags layered on top.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_POINTS: usize = 8;

/// Parameters with this prefix configure the scenario rather than the fixture.
pub const SHIFT_PREFIX: &str = "shift.";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("expected NAME=VALUE with a real VALUE, got `{0}`")]
    BadAssignment(String),
    #[error("sample count must be at least 1")]
    NoPoints,
    #[error("scenario `{scenario}` needs a fixture providing {needs}; `{fixture}` does not")]
    Incompatible {
        scenario: Scenario,
        fixture: String,
        needs: &'static str,
    },
    #[error("unknown shift `{0}`; expected shift.parallel or shift.bump")]
    UnknownShift(String),
    #[error(transparent)]
    Fixture(ambrose_core::GeomError),
    #[error("sample point rejected: {0}")]
    Point(ambrose_core::GeomError),
    #[error("AMBROSE_THREADS must be a positive integer, got `{0}`")]
    Threads(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Singer,
    CheckLhTriple,
    CheckLsTriple,
    Adapt,
    TotalSpace,
    Identities,
    Selftest,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Singer,
        Scenario::CheckLhTriple,
        Scenario::CheckLsTriple,
        Scenario::Adapt,
        Scenario::TotalSpace,
        Scenario::Identities,
        Scenario::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Singer => "singer",
            Scenario::CheckLhTriple => "check-lh-triple",
            Scenario::CheckLsTriple => "check-ls-triple",
            Scenario::Adapt => "adapt",
            Scenario::TotalSpace => "total-space",
            Scenario::Identities => "identities",
            Scenario::Selftest => "selftest",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::UnknownScenario(s.to_string()))
    }
}

/// Either a number of quasi-random interior points or explicit coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    Count(usize),
    List(Vec<Vec<f64>>),
}

/// Everything a run needs. Every field is optional so a config file and the
/// flags can be merged; [`RunConfig::validate`] fills in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub fixture: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub points: Option<Points>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub kmax: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Which adjoint-valued 1-form shifts the reference connection `A0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Shift {
    pub parallel: f64,
    pub bump: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidConfig {
    pub scenario: Scenario,
    pub fixture: Option<String>,
    pub params: BTreeMap<String, f64>,
    pub shift: Shift,
    pub points: Points,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub kmax: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Fields set in `over` replace those here; map entries are merged key by key.
    pub fn overlay(mut self, over: RunConfig) -> Self {
        self.scenario = over.scenario.or(self.scenario);
        self.fixture = over.fixture.or(self.fixture);
        self.params.extend(over.params);
        self.points = over.points.or(self.points);
        self.seed = over.seed.or(self.seed);
        self.tolerances.extend(over.tolerances);
        self.kmax = over.kmax.or(self.kmax);
        self.out = over.out.or(self.out);
        self
    }

    pub fn validate(&self) -> Result<ValidConfig, ConfigError> {
        let scenario: Scenario = self.scenario.as_deref().ok_or(ConfigError::Missing("scenario"))?.parse()?;
        if scenario != Scenario::Selftest && self.fixture.is_none() {
            return Err(ConfigError::Missing("fixture"));
        }
        let points = self.points.clone().unwrap_or(Points::Count(DEFAULT_POINTS));
        match &points {
            Points::Count(0) => return Err(ConfigError::NoPoints),
            Points::List(l) if l.is_empty() => return Err(ConfigError::NoPoints),
            _ => {}
        }
        let mut params = BTreeMap::new();
        let mut shift = Shift::default();
        for (k, v) in &self.params {
            match k.strip_prefix(SHIFT_PREFIX) {
                Some("parallel") => shift.parallel = *v,
                Some("bump") => shift.bump = *v,
                Some(_) => return Err(ConfigError::UnknownShift(k.clone())),
                None => {
                    params.insert(k.clone(), *v);
                }
            }
        }
        Ok(ValidConfig {
            scenario,
            fixture: self.fixture.clone(),
            params,
            shift,
            points,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            tolerances: self.tolerances.clone(),
            kmax: self.kmax,
            out: self.out.clone(),
        })
    }
}

/// Parses `NAME=VALUE` with a real value.
pub fn parse_assignment(s: &str) -> Result<(String, f64), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::BadAssignment(s.to_string()))?;
    let v: f64 = v.trim().parse().map_err(|_| ConfigError::BadAssignment(s.to_string()))?;
    if k.trim().is_empty() {
        return Err(ConfigError::BadAssignment(s.to_string()));
    }
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Parser)]
#[command(name = "ambrose", version, about = "Run a verification scenario on a fixture and print a JSON report")]
pub struct Args {
    /// JSON file with any of the fields below; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// singer | check-lh-triple | check-ls-triple | adapt | total-space | identities | selftest
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub fixture: Option<String>,
    /// Fixture parameter, or shift.parallel / shift.bump to move A0 (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Number of quasi-random interior sample points
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance override for a named residual (repeatable)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tol: Vec<String>,
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the fixture catalog and exit
    #[arg(long)]
    pub list_fixtures: bool,
}

impl Args {
    /// The config file (if any) with the flags layered on top.
    pub fn to_config(&self) -> Result<RunConfig, ConfigError> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            scenario: self.scenario.clone(),
            fixture: self.fixture.clone(),
            params: self.params.iter().map(|s| parse_assignment(s)).collect::<Result<_, _>>()?,
            points: self.points.map(Points::Count),
            seed: self.seed,
            tolerances: self.tol.iter().map(|s| parse_assignment(s)).collect::<Result<_, _>>()?,
            kmax: self.kmax,
            out: self.out.clone(),
        };
        Ok(base.overlay(flags))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_the_file() {
        let file = RunConfig::from_json(
            r#"{"scenario": "singer", "fixture": "round_sphere2", "params": {"radius": 2.0}, "points": [[1.0, 0.0]], "seed": 7}"#,
        )
        .unwrap();
        let flags = RunConfig {
            params: [("radius".to_string(), 3.0)].into(),
            points: Some(Points::Count(4)),
            ..Default::default()
        };
        let c = file.overlay(flags).validate().unwrap();
        assert_eq!(c.scenario, Scenario::Singer);
        assert_eq!(c.params["radius"], 3.0);
        assert_eq!(c.points, Points::Count(4));
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn defaults_and_shifts() {
        let c = RunConfig {
            scenario: Some("total-space".into()),
            fixture: Some("hopf_monopole".into()),
            params: [("shift.bump".to_string(), 1.0), ("charge".to_string(), 2.0)].into(),
            ..Default::default()
        }
        .validate()
        .unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.points, Points::Count(DEFAULT_POINTS));
        assert_eq!(c.shift, Shift { parallel: 0.0, bump: 1.0 });
        assert_eq!(c.params.len(), 1);
    }

    #[test]
    fn invalid_configs() {
        let base = RunConfig {
            scenario: Some("singer".into()),
            fixture: Some("round_sphere2".into()),
            ..Default::default()
        };
        let bad = |c: RunConfig| c.validate().unwrap_err();
        assert!(matches!(
            bad(RunConfig { scenario: Some("dance".into()), ..base.clone() }),
            ConfigError::UnknownScenario(_)
        ));
        assert!(matches!(bad(RunConfig { fixture: None, ..base.clone() }), ConfigError::Missing("fixture")));
        assert!(matches!(bad(RunConfig { points: Some(Points::Count(0)), ..base.clone() }), ConfigError::NoPoints));
        assert!(matches!(
            bad(RunConfig { params: [("shift.up".to_string(), 1.0)].into(), ..base.clone() }),
            ConfigError::UnknownShift(_)
        ));
        assert!(RunConfig::from_json(r#"{"scenery": "x"}"#).is_err());
        assert!(parse_assignment("radius").is_err());
        assert!(parse_assignment("radius=big").is_err());
        assert_eq!(parse_assignment("radius=2.5").unwrap(), ("radius".to_string(), 2.5));
    }

    #[test]
    fn selftest_needs_no_fixture() {
        let c = RunConfig {
            scenario: Some("selftest".into()),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
    }
}
