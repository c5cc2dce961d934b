use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{config_hash, wilson_interval, Verdict};
use super::sup::{sample_maxima, Window};
use super::{default_a, default_budget, resolve_pickands, MIN_EXCEEDANCES, MIN_REPLICATES};
use crate::error::{ensure, ensure_len, Result};
use crate::fields::{CorrelationModel, SeparableStable};
use crate::geometry::build_grid;
use crate::limit_law::{normal_tail, tail_constant_m, validate_alphas};

/// Inputs of the high-excursion tail check on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailCheckConfig {
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub pickands_values: Option<Vec<f64>>,
    pub u_values: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_budget")]
    pub grid_budget: u64,
}

impl TailCheckConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(!self.alphas.is_empty(), || "alphas must not be empty".into())?;
        validate_alphas(&self.alphas)?;
        ensure(!self.u_values.is_empty(), || "u_values must not be empty".into())?;
        ensure(self.u_values.iter().all(|&u| u > 0.0 && u.is_finite()), || {
            format!("thresholds must be positive, got {:?}", self.u_values)
        })?;
        ensure(self.replicates >= MIN_REPLICATES, || {
            format!("replicates must be at least {MIN_REPLICATES}, got {}", self.replicates)
        })?;
        ensure(self.a > 0.0, || format!("a must be positive, got {}", self.a))?;
        resolve_pickands(&self.alphas, self.pickands_values.as_deref()).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    pub u: f64,
    /// Fraction of replicates whose lattice sup exceeds `u`.
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub exceedances: usize,
    /// `∏(H_{αᵢ} u^{2/αᵢ}) Ψ(u)`, i.e. `1/m(u)`.
    pub theory: f64,
    pub ratio: f64,
    pub ratio_ci_low: f64,
    pub ratio_ci_high: f64,
    /// One-point exceedance probability `Ψ(u)`.
    pub point_tail: f64,
    pub above_point_floor: bool,
    pub grid_points: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub records: Vec<TailRecord>,
    pub config_hash: String,
    pub seed: u64,
    pub flags: Vec<String>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Compares `P(sup over [0,1]^d > u)` on the lattice `qᵢ = a u^{−2/αᵢ}` with
/// the tail asymptotic `∏(H_{αᵢ} u^{2/αᵢ}) Ψ(u)`.
///
/// Passes when every ratio lies in `[0.5, 2]` and the ratio at the largest
/// `u` is strictly closer to 1 than at the smallest.
pub fn piterbarg_tail_check(config: &TailCheckConfig) -> Result<TailReport> {
    let start = Instant::now();
    config.validate()?;
    let hs = resolve_pickands(&config.alphas, config.pickands_values.as_deref())?;
    let d = config.alphas.len();
    let model = CorrelationModel::SeparableStable(SeparableStable::new(config.alphas.clone())?);
    let mut records = Vec::new();
    let mut flags = Vec::new();
    for &u in &config.u_values {
        let grid = build_grid(
            &vec![(0.0, 1.0); d],
            &config.alphas,
            config.a,
            u,
            config.grid_budget as u128,
        )?;
        let grid_points = grid.total_points() as u64;
        let window = Window {
            grid,
            masks: vec![None],
        };
        let maxima = sample_maxima(&model, &window, config.replicates, config.seed, config.workers)?;
        let exceedances = maxima.iter().filter(|m| m[0] > u).count();
        let n = config.replicates;
        let (lo, hi) = wilson_interval(exceedances, n);
        let theory = 1.0 / tail_constant_m(u, &config.alphas, &hs)?.m;
        let empirical = exceedances as f64 / n as f64;
        let point_tail = normal_tail(u);
        records.push(TailRecord {
            u,
            empirical,
            ci_low: lo,
            ci_high: hi,
            exceedances,
            theory,
            ratio: empirical / theory,
            ratio_ci_low: lo / theory,
            ratio_ci_high: hi / theory,
            point_tail,
            above_point_floor: empirical >= point_tail,
            grid_points,
            replicates: n,
        });
    }
    if let Some(last) = records.last() {
        if last.exceedances < MIN_EXCEEDANCES {
            flags.push(format!(
                "too_few_exceedances at u={}: {} < {MIN_EXCEEDANCES}; increase replicates",
                last.u, last.exceedances
            ));
        }
    }
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let in_band = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let closer = match (ratios.first(), ratios.last()) {
        (Some(f), Some(l)) if ratios.len() >= 2 => (l - 1.0).abs() < (f - 1.0).abs(),
        _ => false,
    };
    let verdict = Verdict {
        rule: "every ratio in [0.5, 2.0] and |ratio(last u) - 1| < |ratio(first u) - 1|".into(),
        passed: in_band && closer,
        detail: format!("ratios {ratios:?}; in band: {in_band}; closer to 1 at the largest u: {closer}"),
    };
    Ok(TailReport {
        records,
        config_hash: config_hash(&TailCheckConfig {
            workers: 0,
            ..config.clone()
        })?,
        seed: config.seed,
        flags,
        verdict,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Inputs of the lattice-refinement experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub alphas: Vec<f64>,
    /// Per-coordinate `[lower, upper]` of the observation box.
    pub extents: Vec<[f64; 2]>,
    pub u: f64,
    /// Decreasing lattice constants; each must be an integer multiple of
    /// `min(a_values)/4`.
    pub a_values: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_budget")]
    pub grid_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub a: f64,
    /// Lattice step as a multiple of the reference step.
    pub stride: usize,
    pub grid_points: u64,
    pub cdf: f64,
    /// `P(coarse sup ≤ u) − P(reference sup ≤ u)`.
    pub gap: f64,
    pub gap_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub a_ref: f64,
    pub records: Vec<GapRecord>,
    pub config_hash: String,
    pub seed: u64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Estimates the lattice error of `P(sup ≤ u)` against a reference lattice
/// at `a_ref = min(a)/4`. Coarse lattices are sub-lattices of the reference,
/// so each replicate's coarse sup never exceeds its reference sup.
pub fn discretization_gap(config: &GapConfig) -> Result<GapReport> {
    let start = Instant::now();
    let d = config.alphas.len();
    ensure(d > 0, || "alphas must not be empty".into())?;
    validate_alphas(&config.alphas)?;
    ensure_len("extents", d, config.extents.len())?;
    ensure(!config.a_values.is_empty(), || "a_values must not be empty".into())?;
    ensure(config.a_values.iter().all(|&a| a > 0.0 && a.is_finite()), || {
        format!("a_values must be positive, got {:?}", config.a_values)
    })?;
    ensure(config.a_values.windows(2).all(|w| w[0] > w[1]), || {
        "a_values must decrease".into()
    })?;
    ensure(config.u > 0.0, || format!("u must be positive, got {}", config.u))?;
    ensure(config.replicates >= MIN_REPLICATES, || {
        format!(
            "replicates must be at least {MIN_REPLICATES}, got {}",
            config.replicates
        )
    })?;
    let a_ref = config.a_values.iter().copied().fold(f64::INFINITY, f64::min) / 4.0;
    let strides = config
        .a_values
        .iter()
        .map(|&a| {
            let s = (a / a_ref).round();
            ensure((a / a_ref - s).abs() < 1e-9 * s, || {
                format!("a = {a} is not an integer multiple of the reference {a_ref}")
            })?;
            Ok(s as usize)
        })
        .collect::<Result<Vec<usize>>>()?;
    let extents: Vec<(f64, f64)> = config.extents.iter().map(|e| (e[0], e[1])).collect();
    let grid = build_grid(&extents, &config.alphas, a_ref, config.u, config.grid_budget as u128)?;
    let n = grid.total_points() as usize;
    let mut masks = vec![None];
    for &s in &strides {
        let mask: Vec<bool> = (0..n)
            .map(|flat| {
                let mut rest = flat;
                let mut keep = true;
                for ax in grid.axes.iter().rev() {
                    let i = rest % ax.count;
                    rest /= ax.count;
                    keep &= (ax.start + i as i64).rem_euclid(s as i64) == 0;
                }
                keep
            })
            .collect();
        masks.push(Some(mask));
    }
    let window = Window { grid, masks };
    let model = CorrelationModel::SeparableStable(SeparableStable::new(config.alphas.clone())?);
    let maxima = sample_maxima(&model, &window, config.replicates, config.seed, config.workers)?;
    let reps = config.replicates as f64;
    let fine_hits: Vec<bool> = maxima.iter().map(|m| m[0] <= config.u).collect();
    let fine_cdf = fine_hits.iter().filter(|&&b| b).count() as f64 / reps;
    let mut records = Vec::new();
    for (k, (&a, &s)) in config.a_values.iter().zip(&strides).enumerate() {
        let diffs: Vec<f64> = maxima
            .iter()
            .zip(&fine_hits)
            .map(|(m, &fine)| f64::from(u8::from(m[k + 1] <= config.u)) - f64::from(u8::from(fine)))
            .collect();
        let gap = diffs.iter().sum::<f64>() / reps;
        let var = diffs.iter().map(|v| (v - gap).powi(2)).sum::<f64>() / (reps - 1.0);
        records.push(GapRecord {
            a,
            stride: s,
            grid_points: window.points_in(k + 1),
            cdf: fine_cdf + gap,
            gap,
            gap_std_error: (var / reps).sqrt(),
        });
    }
    records.push(GapRecord {
        a: a_ref,
        stride: 1,
        grid_points: window.points_in(0),
        cdf: fine_cdf,
        gap: 0.0,
        gap_std_error: 0.0,
    });
    let gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    let verdict = Verdict {
        rule: "gap >= 0 and nonincreasing as a decreases".into(),
        passed: gaps.iter().all(|&g| g >= 0.0) && gaps.windows(2).all(|w| w[1] <= w[0]),
        detail: format!("gaps {gaps:?}"),
    };
    Ok(GapReport {
        a_ref,
        records,
        config_hash: config_hash(&GapConfig {
            workers: 0,
            ..config.clone()
        })?,
        seed: config.seed,
        verdict,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_is_nonnegative_and_zero_at_reference() {
        let cfg = GapConfig {
            alphas: vec![2.0, 2.0],
            extents: vec![[0.0, 1.0], [0.0, 1.0]],
            u: 2.0,
            a_values: vec![1.0, 0.5, 0.25],
            replicates: 300,
            seed: 3,
            workers: 0,
            grid_budget: default_budget(),
        };
        let rep = discretization_gap(&cfg).unwrap();
        assert_eq!(rep.a_ref, 0.0625);
        assert_eq!(rep.records.last().unwrap().gap, 0.0);
        assert!(rep.records.iter().all(|r| r.gap >= 0.0));
        assert_eq!(rep.records[0].stride, 16);
        let bad = GapConfig {
            a_values: vec![1.0, 0.3],
            ..cfg
        };
        assert!(discretization_gap(&bad).is_err());
    }

    #[test]
    fn tail_check_reports_ratio_and_floor() {
        let cfg = TailCheckConfig {
            alphas: vec![2.0, 2.0],
            pickands_values: None,
            u_values: vec![2.0],
            replicates: 2000,
            seed: 1,
            a: 0.25,
            workers: 0,
            grid_budget: default_budget(),
        };
        let rep = piterbarg_tail_check(&cfg).unwrap();
        let r = &rep.records[0];
        assert!(r.above_point_floor);
        assert!(r.ratio > 0.0);
        assert!((r.ratio - r.empirical / r.theory).abs() < 1e-15);
    }
}
