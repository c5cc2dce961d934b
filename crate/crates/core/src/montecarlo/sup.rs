use std::time::Instant;

use super::report::{config_hash, wilson_interval, ExperimentReport, SupRecord, Verdict};
use super::SupExperimentConfig;
use crate::error::{ensure, Error, Result};
use crate::fields::{CorrelationModel, FieldSampler, SamplerScratch};
use crate::geometry::{build_grid, GridSpec, JordanSet};
use crate::limit_law::{limit_cdf, LimitLawParams, QuadratureSpec};
use crate::replicate::run_replicates;

/// A lattice together with membership masks for the sets observed on it.
pub(crate) struct Window {
    pub grid: GridSpec,
    /// `None` means every lattice point belongs to the set.
    pub masks: Vec<Option<Vec<bool>>>,
}

impl Window {
    pub fn points_in(&self, set: usize) -> u64 {
        match &self.masks[set] {
            None => self.grid.total_points() as u64,
            Some(m) => m.iter().filter(|&&b| b).count() as u64,
        }
    }
}

fn contains_with_slack(set: &JordanSet, p: &[f64]) -> bool {
    set.boxes().iter().any(|b| {
        p.iter().zip(b.lower().iter().zip(b.upper())).all(|(&x, (&lo, &hi))| {
            let slack = 1e-9 * lo.abs().max(hi.abs()).max(1.0);
            lo - slack <= x && x <= hi + slack
        })
    })
}

/// Lattice `qᵢ = a·u^{−2/αᵢ}` over the joint bounding box of `sets`.
pub(crate) fn window_for_sets(sets: &[JordanSet], alphas: &[f64], a: f64, u: f64, budget: u128) -> Result<Window> {
    ensure(!sets.is_empty(), || "at least one set is required".into())?;
    let d = alphas.len();
    let mut extents = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for s in sets {
        let bb = s.bounding_box();
        for (i, e) in extents.iter_mut().enumerate() {
            e.0 = e.0.min(bb.lower()[i]);
            e.1 = e.1.max(bb.upper()[i]);
        }
    }
    let grid = build_grid(&extents, alphas, a, u, budget)?;
    let n = grid.total_points() as usize;
    let mut point = vec![0.0; d];
    let masks = sets
        .iter()
        .map(|s| {
            let whole = s.boxes().len() == 1 && {
                let b = &s.boxes()[0];
                (0..d).all(|i| b.lower()[i] <= extents[i].0 && b.upper()[i] >= extents[i].1)
            };
            if whole {
                None
            } else {
                Some(
                    (0..n)
                        .map(|k| {
                            grid.point(k, &mut point);
                            contains_with_slack(s, &point)
                        })
                        .collect(),
                )
            }
        })
        .collect();
    Ok(Window { grid, masks })
}

/// Per replicate, the maximum of one field sample over each mask of
/// `window` (`−∞` for an empty mask).
pub(crate) fn sample_maxima(
    model: &CorrelationModel,
    window: &Window,
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    let sampler = FieldSampler::new(model, &window.grid)?;
    let n = sampler.len();
    run_replicates(
        replicates,
        seed,
        workers,
        || (SamplerScratch::default(), vec![0.0; n]),
        |(scratch, values), rng| {
            sampler.sample_into(rng, values, scratch);
            let maxima = window
                .masks
                .iter()
                .map(|mask| match mask {
                    None => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Some(m) => values
                        .iter()
                        .zip(m)
                        .filter(|(_, &inside)| inside)
                        .map(|(&v, _)| v)
                        .fold(f64::NEG_INFINITY, f64::max),
                })
                .collect::<Vec<f64>>();
            if maxima.iter().any(|v| v.is_nan()) {
                return Err(Error::NonFinite("field sample maximum".into()));
            }
            Ok(maxima)
        },
    )
}

pub(crate) fn theory_value(x: &[f64], lambda_j: f64, r: f64, gamma: f64, quad: &QuadratureSpec) -> Result<f64> {
    let params = LimitLawParams::new(x.to_vec(), lambda_j, r, gamma)?;
    Ok(limit_cdf(&params, quad)?.value)
}

/// Builds the record for `count` of `n` replicates with sup at most `u`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn record(
    u: f64,
    count: usize,
    n: usize,
    theory: f64,
    grid_points: u64,
    m_values: Vec<f64>,
    x: Vec<f64>,
    set_measure: f64,
) -> SupRecord {
    let (lo, hi) = wilson_interval(count, n);
    SupRecord {
        u,
        empirical_cdf: count as f64 / n as f64,
        wilson_ci_low: lo,
        wilson_ci_high: hi,
        theory_limit: theory,
        grid_points,
        replicates: n,
        m_values,
        x,
        set_measure,
    }
}

pub(crate) fn finish(
    experiment: &str,
    config_hash: String,
    seed: u64,
    records: Vec<SupRecord>,
    flags: Vec<String>,
    verdict: Option<Verdict>,
    start: Instant,
) -> ExperimentReport {
    ExperimentReport {
        experiment: experiment.into(),
        records,
        config_hash,
        seed,
        flags,
        verdict,
        wall_seconds: start.elapsed().as_secs_f64(),
    }
}

/// `P(sup over J^x_m ≤ u)` per threshold, one lattice per threshold, with
/// the same replicate streams at every threshold.
///
/// A threshold whose lattice exceeds the budget ends the sweep and is
/// recorded in `flags`.
pub fn estimate_sup_cdf(config: &SupExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let hs = config.resolved_pickands()?;
    let alphas = config.model.alphas();
    let lambda_j = config.set.measure();
    let theory = theory_value(
        &config.x,
        lambda_j,
        config.model.r(),
        config.plan.gamma(),
        &config.quadrature,
    )?;
    run_scaled(config, "simulate_sup", config.hash()?, |u, flags| {
        let ev = config.plan.evaluate_m_i(u, alphas, &hs)?;
        if ev.growth_mismatch {
            flags.push(format!(
                "growth_mismatch at u={u}: closing growth {:.4}",
                ev.closing_growth
            ));
        }
        Ok((ev.m_values, theory))
    })
}

/// Threshold loop shared by the sup experiments: `scales(u)` yields the window
/// scales and the reference value at `u`.
pub(crate) fn run_scaled(
    config: &SupExperimentConfig,
    experiment: &str,
    hash: String,
    mut scales: impl FnMut(f64, &mut Vec<String>) -> Result<(Vec<f64>, f64)>,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let alphas = config.model.alphas();
    let lambda_j = config.set.measure();
    let mut records = Vec::new();
    let mut flags = Vec::new();
    for &u in &config.u_values {
        let (m_values, theory) = scales(u, &mut flags)?;
        let scaled = config.set.scale(&config.x, &m_values)?;
        let window = match window_for_sets(&[scaled], alphas, config.a, u, config.grid_budget as u128) {
            Ok(w) => w,
            Err(Error::Budget { required, budget, .. }) => {
                flags.push(format!("grid_budget_exceeded at u={u}: {required} points > {budget}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let model = config.model.build(&m_values)?;
        let maxima = sample_maxima(&model, &window, config.replicates, config.seed, config.workers)?;
        let count = maxima.iter().filter(|m| m[0] <= u).count();
        records.push(record(
            u,
            count,
            config.replicates,
            theory,
            window.points_in(0),
            m_values,
            config.x.clone(),
            lambda_j,
        ));
    }
    Ok(finish(experiment, hash, config.seed, records, flags, None, start))
}

/// Runs [`estimate_sup_cdf`] over an increasing ladder of at least three
/// thresholds and judges the trend: the discrepancy to the limit at the
/// largest `u` may not exceed the discrepancy at the smallest `u` plus the
/// width of its Wilson interval.
pub fn convergence_study(config: &SupExperimentConfig) -> Result<ExperimentReport> {
    ensure(config.u_values.len() >= 3, || {
        format!(
            "a convergence study needs at least 3 thresholds, got {}",
            config.u_values.len()
        )
    })?;
    ensure(config.u_values.windows(2).all(|w| w[0] < w[1]), || {
        "thresholds must increase".into()
    })?;
    let mut report = estimate_sup_cdf(config)?;
    report.experiment = "converge".into();
    report.verdict = Some(trend_verdict(&report.records));
    Ok(report)
}

pub(crate) fn trend_verdict(records: &[SupRecord]) -> Verdict {
    match (records.first(), records.last()) {
        (Some(first), Some(last)) if records.len() >= 2 => {
            let allowed = first.discrepancy() + first.ci_width();
            Verdict {
                rule: "discrepancy(last u) <= discrepancy(first u) + CI width(first u)".into(),
                passed: last.discrepancy() <= allowed,
                detail: format!(
                    "first |emp - theory| = {:.5} (CI width {:.5}), last = {:.5}",
                    first.discrepancy(),
                    first.ci_width(),
                    last.discrepancy()
                ),
            }
        }
        _ => Verdict {
            rule: "discrepancy trend".into(),
            passed: false,
            detail: "fewer than two thresholds completed".into(),
        },
    }
}

fn decreasing_verdict(records: &[SupRecord], what: &str) -> Verdict {
    let values: Vec<f64> = records.iter().map(|r| r.empirical_cdf).collect();
    Verdict {
        rule: format!("empirical_cdf nonincreasing in {what}"),
        passed: values.windows(2).all(|w| w[1] <= w[0]),
        detail: format!("{values:?}"),
    }
}

/// Several sets observed on one lattice at threshold `u`; each replicate's
/// sample is restricted to every set.
pub fn nested_set_sweep(config: &SupExperimentConfig, sets: &[JordanSet], u: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate()?;
    let hs = config.resolved_pickands()?;
    let alphas = config.model.alphas();
    let ev = config.plan.evaluate_m_i(u, alphas, &hs)?;
    let scaled = sets
        .iter()
        .map(|s| s.scale(&config.x, &ev.m_values))
        .collect::<Result<Vec<_>>>()?;
    sweep_on_window(
        config,
        "nested_sets",
        &scaled,
        sets,
        std::slice::from_ref(&config.x),
        u,
        &ev.m_values,
        start,
    )
}

/// `x`-sweep at a fixed threshold: the sets `J^{x_k}_m` share one lattice.
pub fn x_sweep(config: &SupExperimentConfig, xs: &[Vec<f64>], u: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate()?;
    ensure(!xs.is_empty(), || "x-sweep needs at least one x".into())?;
    let hs = config.resolved_pickands()?;
    let alphas = config.model.alphas();
    let ev = config.plan.evaluate_m_i(u, alphas, &hs)?;
    let scaled = xs
        .iter()
        .map(|x| config.set.scale(x, &ev.m_values))
        .collect::<Result<Vec<_>>>()?;
    let originals = vec![config.set.clone(); xs.len()];
    sweep_on_window(config, "x_sweep", &scaled, &originals, xs, u, &ev.m_values, start)
}

#[allow(clippy::too_many_arguments)]
fn sweep_on_window(
    config: &SupExperimentConfig,
    experiment: &str,
    scaled: &[JordanSet],
    originals: &[JordanSet],
    xs: &[Vec<f64>],
    u: f64,
    m_values: &[f64],
    start: Instant,
) -> Result<ExperimentReport> {
    let alphas = config.model.alphas();
    let window = window_for_sets(scaled, alphas, config.a, u, config.grid_budget as u128)?;
    let model = config.model.build(m_values)?;
    let maxima = sample_maxima(&model, &window, config.replicates, config.seed, config.workers)?;
    let mut records = Vec::new();
    for (k, set) in originals.iter().enumerate() {
        let x = if xs.len() == 1 { &xs[0] } else { &xs[k] };
        let count = maxima.iter().filter(|m| m[k] <= u).count();
        let theory = theory_value(
            x,
            set.measure(),
            config.model.r(),
            config.plan.gamma(),
            &config.quadrature,
        )?;
        records.push(record(
            u,
            count,
            config.replicates,
            theory,
            window.points_in(k),
            m_values.to_vec(),
            x.clone(),
            set.measure(),
        ));
    }
    let verdict = decreasing_verdict(&records, "the set (listed in increasing order)");
    Ok(finish(
        experiment,
        config_hash(&(config.normalized(), xs, u))?,
        config.seed,
        records,
        vec![],
        Some(verdict),
        start,
    ))
}

/// The window and lattice of threshold `u_geometry`, thresholded at each of
/// `thresholds`; one sample per replicate serves every threshold.
pub fn threshold_sweep(config: &SupExperimentConfig, u_geometry: f64, thresholds: &[f64]) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate()?;
    ensure(!thresholds.is_empty(), || "threshold sweep needs thresholds".into())?;
    let hs = config.resolved_pickands()?;
    let alphas = config.model.alphas();
    let ev = config.plan.evaluate_m_i(u_geometry, alphas, &hs)?;
    let scaled = config.set.scale(&config.x, &ev.m_values)?;
    let window = window_for_sets(&[scaled], alphas, config.a, u_geometry, config.grid_budget as u128)?;
    let model = config.model.build(&ev.m_values)?;
    let maxima = sample_maxima(&model, &window, config.replicates, config.seed, config.workers)?;
    let lambda_j = config.set.measure();
    let theory = theory_value(
        &config.x,
        lambda_j,
        config.model.r(),
        config.plan.gamma(),
        &config.quadrature,
    )?;
    let records: Vec<SupRecord> = thresholds
        .iter()
        .map(|&t| {
            let count = maxima.iter().filter(|m| m[0] <= t).count();
            record(
                t,
                count,
                config.replicates,
                theory,
                window.points_in(0),
                ev.m_values.clone(),
                config.x.clone(),
                lambda_j,
            )
        })
        .collect();
    let values: Vec<f64> = records.iter().map(|r| r.empirical_cdf).collect();
    let order_ok = thresholds.windows(2).all(|w| w[0] <= w[1]);
    let verdict = Verdict {
        rule: "empirical_cdf nondecreasing in the threshold".into(),
        passed: !order_ok || values.windows(2).all(|w| w[0] <= w[1]),
        detail: format!("{values:?}"),
    };
    let flags = vec![format!(
        "lattice and window fixed at u={u_geometry}; theory_limit refers to that window"
    )];
    Ok(finish(
        "threshold_sweep",
        config_hash(&(config.normalized(), u_geometry, thresholds))?,
        config.seed,
        records,
        flags,
        Some(verdict),
        start,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AxisBox;
    use crate::limit_law::normal_cdf;

    fn small_config(replicates: usize) -> SupExperimentConfig {
        SupExperimentConfig::weak_unit_square(vec![2.0, 2.0], vec![2.0, 2.5], replicates, 7).unwrap()
    }

    #[test]
    fn very_low_threshold_is_never_met() {
        let cfg = small_config(200);
        let rep = threshold_sweep(&cfg, 2.0, &[-10.0, 0.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(rep.records[0].empirical_cdf, 0.0);
        assert_eq!(rep.records[4].empirical_cdf, 1.0);
        assert!(rep.verdict.unwrap().passed);
    }

    #[test]
    fn single_point_set_follows_the_marginal() {
        let mut cfg = small_config(4000);
        // a set thinner than one lattice step holds exactly one lattice point
        cfg.set = JordanSet::from_box(AxisBox::new(vec![0.0, 0.0], vec![1e-4, 1e-4]).unwrap());
        let rep = threshold_sweep(&cfg, 2.0, &[0.5]).unwrap();
        let r = &rep.records[0];
        assert_eq!(r.grid_points, 1);
        let p = normal_cdf(0.5);
        assert!(r.wilson_ci_low <= p && p <= r.wilson_ci_high, "{r:?}");
    }

    #[test]
    fn nested_sets_and_x_sweep_are_monotone() {
        let cfg = small_config(300);
        let sets: Vec<JordanSet> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&s| JordanSet::from_box(AxisBox::new(vec![0.0, 0.0], vec![s, 1.0]).unwrap()))
            .collect();
        let rep = nested_set_sweep(&cfg, &sets, 2.5).unwrap();
        assert!(rep.verdict.as_ref().unwrap().passed);
        let xs = vec![vec![0.5, 0.5], vec![1.0, 0.5], vec![1.0, 1.0]];
        let rep = x_sweep(&cfg, &xs, 2.5).unwrap();
        assert!(rep.verdict.unwrap().passed);
        assert!(rep.records[0].theory_limit > rep.records[2].theory_limit);
    }

    #[test]
    fn reports_are_deterministic_across_workers() {
        let mut cfg = small_config(150);
        cfg.workers = 1;
        let one = estimate_sup_cdf(&cfg).unwrap();
        cfg.workers = 3;
        let three = estimate_sup_cdf(&cfg).unwrap();
        assert_eq!(
            super::super::canonical_json(&one).unwrap(),
            super::super::canonical_json(&three).unwrap()
        );
    }

    #[test]
    fn budget_overrun_truncates_with_flag() {
        let mut cfg = small_config(100);
        cfg.grid_budget = 400;
        let rep = estimate_sup_cdf(&cfg).unwrap();
        assert!(rep.records.len() < 2);
        assert!(rep.flags.iter().any(|f| f.starts_with("grid_budget_exceeded")));
    }
}
