//! Shared setup for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use ambrose_core::fixtures::{instantiate, Fixture};
use ambrose_core::homogeneity::SectionSetup;

/// A fixture with its section setup and a few interior points.
pub struct Bench {
    pub fixture: Fixture,
    pub setup: SectionSetup,
    pub points: Vec<Vec<f64>>,
}

pub fn prepare(name: &str, params: &[(&str, f64)], points: usize) -> Bench {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let fixture = instantiate(name, &p).expect("catalog fixture");
    let setup = SectionSetup::for_fixture(&fixture).expect("default section");
    let points = fixture.chart.sample_interior(points, 42);
    Bench { fixture, setup, points }
}
