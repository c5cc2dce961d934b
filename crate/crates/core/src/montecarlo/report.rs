use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// One threshold of a sup-distribution experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupRecord {
    pub u: f64,
    pub empirical_cdf: f64,
    pub wilson_ci_low: f64,
    pub wilson_ci_high: f64,
    pub theory_limit: f64,
    pub grid_points: u64,
    pub replicates: usize,
    /// Window scales `mᵢ(u)` used at this threshold.
    pub m_values: Vec<f64>,
    pub x: Vec<f64>,
    /// `λ(J)` of the unscaled set.
    pub set_measure: f64,
}

impl SupRecord {
    pub fn discrepancy(&self) -> f64 {
        (self.empirical_cdf - self.theory_limit).abs()
    }

    pub fn ci_width(&self) -> f64 {
        self.wilson_ci_high - self.wilson_ci_low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub rule: String,
    pub passed: bool,
    pub detail: String,
}

/// Result of a sup-distribution experiment.
///
/// `wall_seconds` is not serialized, so [`canonical_json`] is identical for
/// identical inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub records: Vec<SupRecord>,
    pub config_hash: String,
    pub seed: u64,
    pub flags: Vec<String>,
    pub verdict: Option<Verdict>,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ExperimentReport {
    /// Per-threshold table with header `u,empirical,ci_low,ci_high,theory,n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,empirical,ci_low,ci_high,theory,n\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.u, r.empirical_cdf, r.wilson_ci_low, r.wilson_ci_high, r.theory_limit, r.replicates
            ));
        }
        out
    }
}

/// Pretty-printed JSON; field order follows the type definitions.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

/// SHA-256 of the compact JSON form, hex encoded.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_and_handles_extremes() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.95 && hi == 1.0);
        let (lo, hi) = wilson_interval(37, 100);
        assert!(lo < 0.37 && 0.37 < hi);
        // reference values evaluated independently in double precision
        assert!((lo - 0.281_823_605_343_245_3).abs() < 1e-12, "{lo}");
        assert!((hi - 0.467_794_704_190_570_8).abs() < 1e-12, "{hi}");
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&vec![1.0, 2.0]).unwrap();
        assert_eq!(a, config_hash(&vec![1.0, 2.0]).unwrap());
        assert_ne!(a, config_hash(&vec![1.0, 2.5]).unwrap());
        assert_eq!(a.len(), 64);
    }
}
