//! Driver behind the `ambrose` binary: validate a configuration, run one
//! scenario over a fixture, and produce a JSON report.

pub mod config;
pub mod output;
pub mod scenarios;

use ambrose_core::fixtures::Fixture;
use ambrose_core::report::VerificationReport;
use ambrose_core::{GeomError, Result as GeomResult};

use config::{ConfigError, Points, Scenario, ValidConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "AMBROSE_THREADS";

/// A finished run: the report and the process exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub report: VerificationReport,
    pub code: i32,
}

fn sample_points(cfg: &ValidConfig, fx: Option<&Fixture>) -> Result<Vec<Vec<f64>>, ConfigError> {
    let Some(fx) = fx else {
        return Ok(vec![]);
    };
    match &cfg.points {
        Points::Count(n) => Ok(fx.chart.sample_interior(*n, cfg.seed)),
        Points::List(list) => {
            for x in list {
                if x.len() != fx.dim() {
                    return Err(ConfigError::Point(GeomError::AxisMismatch(format!(
                        "point {x:?} has {} coordinates, `{}` has dimension {}",
                        x.len(),
                        fx.name,
                        fx.dim()
                    ))));
                }
                fx.chart.check_interior(x).map_err(ConfigError::Point)?;
            }
            Ok(list.clone())
        }
    }
}

fn dispatch(cfg: &ValidConfig, fx: Option<&Fixture>, points: &[Vec<f64>]) -> GeomResult<VerificationReport> {
    let fx = || fx.expect("validated: every scenario but selftest has a fixture");
    match cfg.scenario {
        Scenario::Singer => scenarios::singer(fx(), points, cfg.kmax),
        Scenario::CheckLhTriple => scenarios::check_lh(fx(), points, cfg.shift),
        Scenario::CheckLsTriple => scenarios::check_ls(fx(), points, cfg.shift),
        Scenario::Adapt => scenarios::adapt(fx(), points, cfg.kmax),
        Scenario::TotalSpace => scenarios::total_space(fx(), points, cfg.shift),
        Scenario::Identities => scenarios::identities(fx(), points),
        Scenario::Selftest => scenarios::selftest(),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, ConfigError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or(ConfigError::Threads(v.clone()))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| ConfigError::Threads(e.to_string()))
}

/// Runs a validated configuration. Configuration problems are errors; a
/// numerical failure still yields a (partial) report with exit code 3.
pub fn run(cfg: &ValidConfig) -> Result<Outcome, ConfigError> {
    let fx = match &cfg.fixture {
        Some(name) => Some(scenarios::load_fixture(cfg.scenario, name, &cfg.params)?),
        None => None,
    };
    let points = sample_points(cfg, fx.as_ref())?;
    let pool = thread_pool()?;
    let result = pool.install(|| dispatch(cfg, fx.as_ref(), &points));
    let fixture_name = cfg.fixture.clone().unwrap_or_default();
    let (mut report, numerical) = match result {
        Ok(r) => (r, false),
        Err(e) => {
            let mut r = VerificationReport::new(cfg.scenario.name(), points.clone());
            r.flag(&format!("numerical-failure: {e}"));
            r.pass = false;
            (r, true)
        }
    };
    report.scenario = cfg.scenario.name().to_string();
    report = report.for_fixture(&fixture_name, &cfg.params);
    report.points = points;
    if !numerical {
        let hit = report.override_tolerances(&cfg.tolerances);
        for name in cfg.tolerances.keys().filter(|k| !hit.contains(k)) {
            report.flag(&format!("unused-tolerance:{name}"));
        }
    }
    let code = if numerical {
        EXIT_NUMERICAL
    } else if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    Ok(Outcome { report, code })
}
