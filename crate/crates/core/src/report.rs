//! Serializable verdicts for identity checks and rate experiments.

use serde::{Deserialize, Serialize};

pub const IDENTITY_SCHEMA: &str = "identity-report/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Per-path algebraic identity; verdict at relative tolerance 1e-10.
    ExactPathwise,
    /// Statistical comparison of two Monte-Carlo estimates at a σ-level.
    MonteCarlo,
}

/// Outcome of one identity verification.
///
/// Exact-pathwise checks populate `max_rel_err`; Monte-Carlo checks populate the
/// per-side estimates with standard errors pooled as `sqrt(se_lhs² + se_rhs²)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub schema: String,
    pub name: String,
    pub mode: CheckMode,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_rhs: Option<f64>,
    pub n: u64,
    /// Exact mode: worst relative component error over all paths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rel_err: Option<f64>,
    /// Monte-Carlo mode: how many pooled standard errors separate the sides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_distance: Option<f64>,
    pub tolerance_sigmas: f64,
    /// Set when an estimator's sample variance is non-finite (heavy tails).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub variance_flag: bool,
    pub pass: bool,
}

pub const EXACT_REL_TOL: f64 = 1e-10;

impl IdentityReport {
    pub fn exact(name: impl Into<String>, lhs: Vec<f64>, rhs: Vec<f64>, n: u64, max_rel_err: f64) -> Self {
        IdentityReport {
            schema: IDENTITY_SCHEMA.to_string(),
            name: name.into(),
            mode: CheckMode::ExactPathwise,
            lhs,
            rhs,
            se_lhs: None,
            se_rhs: None,
            n,
            max_rel_err: Some(max_rel_err),
            sigma_distance: None,
            tolerance_sigmas: 0.0,
            variance_flag: false,
            pass: max_rel_err <= EXACT_REL_TOL,
        }
    }

    pub fn monte_carlo(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        se_lhs: f64,
        se_rhs: f64,
        n: u64,
        sigmas: f64,
    ) -> Self {
        let pooled = (se_lhs * se_lhs + se_rhs * se_rhs).sqrt();
        let dist = if pooled > 0.0 {
            (lhs - rhs).abs() / pooled
        } else if lhs == rhs {
            0.0
        } else {
            f64::INFINITY
        };
        let variance_flag = !se_lhs.is_finite() || !se_rhs.is_finite();
        IdentityReport {
            schema: IDENTITY_SCHEMA.to_string(),
            name: name.into(),
            mode: CheckMode::MonteCarlo,
            lhs: vec![lhs],
            rhs: vec![rhs],
            se_lhs: Some(se_lhs),
            se_rhs: Some(se_rhs),
            n,
            max_rel_err: None,
            sigma_distance: Some(dist),
            tolerance_sigmas: sigmas,
            variance_flag,
            pass: !variance_flag && dist <= sigmas,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_report_passes_at_tolerance() {
        let r = IdentityReport::exact("t", vec![1.0], vec![1.0], 10, 5e-11);
        assert!(r.pass);
        let r = IdentityReport::exact("t", vec![1.0], vec![1.0], 10, 5e-9);
        assert!(!r.pass);
    }

    #[test]
    fn monte_carlo_report_measures_sigma_distance() {
        let r = IdentityReport::monte_carlo("t", 1.0, 1.05, 0.03, 0.04, 100, 3.0);
        assert!(r.pass);
        assert!((r.sigma_distance.unwrap() - 1.0).abs() < 1e-12);
        let r = IdentityReport::monte_carlo("t", 1.0, 2.0, 0.01, 0.01, 100, 3.0);
        assert!(!r.pass);
    }

    #[test]
    fn json_roundtrip() {
        let r = IdentityReport::monte_carlo("t", 1.0, 1.0, 0.1, 0.1, 5, 3.0);
        let s = r.to_json();
        let back: IdentityReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back.name, "t");
        assert_eq!(back.schema, IDENTITY_SCHEMA);
    }
}
