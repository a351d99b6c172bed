//! Named residuals with tolerances and the pass/fail verdict derived from them.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub fixture: String,
    pub params: BTreeMap<String, f64>,
    pub points: Vec<Vec<f64>>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub stabilizer_dims: Vec<usize>,
    pub singer_k: Option<usize>,
    /// Boolean outcomes that are not residuals (for example the agreement of
    /// two condition systems).
    pub verdicts: BTreeMap<String, bool>,
    pub flags: Vec<String>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(scenario: &str, points: Vec<Vec<f64>>) -> Self {
        Self {
            scenario: scenario.to_string(),
            points,
            pass: true,
            ..Self::default()
        }
    }

    pub fn for_fixture(mut self, name: &str, params: &BTreeMap<String, f64>) -> Self {
        self.fixture = name.to_string();
        self.params = params.clone();
        self
    }

    /// Adds a residual with the tolerance it must stay below.
    pub fn record(&mut self, name: &str, value: f64, tol: f64) {
        self.residuals.insert(name.to_string(), value);
        self.tolerances.insert(name.to_string(), tol);
        self.update_pass();
    }

    pub fn flag(&mut self, flag: &str) {
        if !self.flags.iter().any(|f| f == flag) {
            self.flags.push(flag.to_string());
        }
    }

    /// Replaces tolerances by name; unknown names are ignored. Returns the
    /// names that matched.
    pub fn override_tolerances(&mut self, overrides: &BTreeMap<String, f64>) -> Vec<String> {
        let mut hit = Vec::new();
        for (name, tol) in overrides {
            if let Some(t) = self.tolerances.get_mut(name) {
                *t = *tol;
                hit.push(name.clone());
            }
        }
        self.update_pass();
        hit
    }

    /// Whether the residual `name` is below its tolerance (false if absent).
    pub fn holds(&self, name: &str) -> bool {
        matches!(
            (self.residuals.get(name), self.tolerances.get(name)),
            (Some(v), Some(t)) if *v < *t
        )
    }

    fn update_pass(&mut self) {
        self.pass = self.residuals.keys().all(|k| self.holds(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_tracks_every_residual() {
        let mut r = VerificationReport::new("demo", vec![]);
        assert!(r.pass);
        r.record("a", 1e-9, 1e-5);
        assert!(r.pass);
        r.record("b", 1e-3, 1e-5);
        assert!(!r.pass);
        let hit = r.override_tolerances(&[("b".to_string(), 1e-2), ("zzz".to_string(), 1.0)].into());
        assert_eq!(hit, vec!["b".to_string()]);
        assert!(r.pass);
    }

    #[test]
    fn nan_never_passes() {
        let mut r = VerificationReport::new("demo", vec![]);
        r.record("a", f64::NAN, 1.0);
        assert!(!r.pass);
    }
}
