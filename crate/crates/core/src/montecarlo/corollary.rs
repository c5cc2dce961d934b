use serde::{Deserialize, Serialize};

use super::report::{config_hash, ExperimentReport, Verdict};
use super::sup::{run_scaled, theory_value, trend_verdict};
use super::SupExperimentConfig;
use crate::error::{ensure, Result};
use crate::geometry::{ScalingPlan, SlowFactor};
use crate::limit_law::tail_constant_m;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorollaryKind {
    /// One side shrinks like `exp(−κu²)c(u)`; the sup probability tends to 0.
    Szybko,
    /// Sides grow or shrink slower than the Pickands scale; the limit law
    /// holds, conditional on the conjectured rate.
    Wolno,
}

fn default_kappa() -> f64 {
    0.125
}

fn default_shrinking() -> usize {
    1
}

fn default_divergence() -> SlowFactor {
    SlowFactor::LogPower { exponent: 1.0 }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorollaryConfig {
    pub kind: CorollaryKind,
    pub base: SupExperimentConfig,
    /// Decay rate of the first side (fast regime).
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Slow factor `c(u)` of the first side (fast regime).
    #[serde(default)]
    pub c: Option<SlowFactor>,
    /// Also run `κ = 0`, where the sup converges to the limit law (fast regime).
    #[serde(default = "default_true")]
    pub control: bool,
    /// Number of leading sides on the conjectured rate (slow regime).
    #[serde(default = "default_shrinking")]
    pub shrinking: usize,
    /// Diverging factor multiplying `u^{−2/αᵢ}` (slow regime).
    #[serde(default = "default_divergence")]
    pub divergence: SlowFactor,
}

impl CorollaryConfig {
    pub fn new(kind: CorollaryKind, base: SupExperimentConfig) -> Self {
        Self {
            kind,
            base,
            kappa: default_kappa(),
            c: None,
            control: true,
            shrinking: default_shrinking(),
            divergence: default_divergence(),
        }
    }

    fn slow_factor(&self) -> SlowFactor {
        self.c.unwrap_or(SlowFactor::ONE)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let d = self.base.plan.dim();
        match self.kind {
            CorollaryKind::Szybko => {
                ensure(d >= 2, || "the fast regime needs d >= 2".into())?;
                ensure(self.kappa > 0.0 && self.kappa.is_finite(), || {
                    format!("kappa must be positive, got {}", self.kappa)
                })?;
                self.slow_factor().validate()
            }
            CorollaryKind::Wolno => {
                ensure(self.shrinking >= 1 && self.shrinking < d, || {
                    format!("shrinking = {} must lie in 1..d with d = {d}", self.shrinking)
                })?;
                ensure(self.base.plan.bounded_dims() >= self.shrinking, || {
                    format!(
                        "the base plan must hold the first {} coordinates bounded, it bounds {}",
                        self.shrinking,
                        self.base.plan.bounded_dims()
                    )
                })?;
                self.divergence.validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub kind: CorollaryKind,
    pub main: ExperimentReport,
    /// The `κ = 0` arm of the fast regime.
    pub control: Option<ExperimentReport>,
    /// Set for the slow regime, whose rate is a conjecture.
    pub conjecture_conditional: bool,
}

/// Fast regime: `m̄₁ = exp(−κu²)c(u)`, `m̄ᵢ = mᵢ` in between and
/// `m̄_d = m(u)/∏_{i<d} m̄ᵢ`. Slow regime: `m̄ᵢ = u^{−2/αᵢ}·f(u)` for the
/// first `shrinking` sides, the bounded limits scaled out of the last side.
pub fn corollary_experiments(config: &CorollaryConfig) -> Result<CorollaryReport> {
    config.validate()?;
    let base = &config.base;
    let hs = base.resolved_pickands()?;
    let alphas = base.model.alphas().to_vec();
    let d = alphas.len();
    let lambda_j = base.set.measure();
    let hash = config_hash(&CorollaryConfig {
        base: base.normalized(),
        ..config.clone()
    })?;
    match config.kind {
        CorollaryKind::Szybko => {
            let c = config.slow_factor();
            let mut main = run_scaled(base, "corollary_szybko", hash.clone(), |u, flags| {
                let mut m = base.plan.evaluate_m_i(u, &alphas, &hs)?.m_values;
                let log_m = tail_constant_m(u, &alphas, &hs)?.log_m;
                m[0] = (-config.kappa * u * u + c.ln_eval(u)?).exp();
                let leading: f64 = m[..d - 1].iter().map(|v| v.ln()).sum();
                m[d - 1] = (log_m - leading).exp();
                if m[0] * config.x_extent(0) < base.grid_spacing(u, 0) {
                    flags.push(format!("first side thinner than one lattice step at u={u}"));
                }
                Ok((m, 0.0))
            })?;
            let values: Vec<f64> = main.records.iter().map(|r| r.empirical_cdf).collect();
            main.verdict = Some(Verdict {
                rule: "empirical_cdf strictly decreasing in u (trend to 0)".into(),
                passed: values.len() >= 2 && values.windows(2).all(|w| w[1] < w[0]),
                detail: format!("{values:?}"),
            });
            let control = if config.control {
                let leading = vec![0.5 / (d - 1) as f64; d - 2];
                let descs = vec![SlowFactor::ONE; d - 1];
                let c_limit = match c {
                    SlowFactor::Constant { value } => value,
                    _ => 1.0,
                };
                let plan = ScalingPlan::closing(d, 1, vec![c_limit], leading, descs)?;
                let theory = theory_value(&base.x, lambda_j, base.model.r(), plan.gamma(), &base.quadrature)?;
                let control_config = SupExperimentConfig {
                    plan: plan.clone(),
                    ..base.clone()
                };
                let mut rep = run_scaled(&control_config, "corollary_szybko_control", hash, |u, _| {
                    Ok((plan.evaluate_m_i(u, &alphas, &hs)?.m_values, theory))
                })?;
                rep.verdict = Some(trend_verdict(&rep.records));
                Some(rep)
            } else {
                None
            };
            Ok(CorollaryReport {
                kind: config.kind,
                main,
                control,
                conjecture_conditional: false,
            })
        }
        CorollaryKind::Wolno => {
            let j = config.shrinking;
            let theory = theory_value(&base.x, lambda_j, base.model.r(), base.plan.gamma(), &base.quadrature)?;
            let mut main = run_scaled(base, "corollary_wolno", hash, |u, _| {
                let mut m = base.plan.evaluate_m_i(u, &alphas, &hs)?.m_values;
                let f = config.divergence.eval(u)?;
                let mut correction = 1.0;
                for i in 0..j {
                    let bar = u.powf(-2.0 / alphas[i]) * f;
                    correction *= bar / m[i];
                    m[i] = bar;
                }
                m[d - 1] /= correction;
                Ok((m, theory))
            })?;
            main.flags
                .push("conjecture_conditional: side rate u^(-2/alpha) is conjectured".into());
            main.verdict = Some(trend_verdict(&main.records));
            Ok(CorollaryReport {
                kind: config.kind,
                main,
                control: None,
                conjecture_conditional: true,
            })
        }
    }
}

impl CorollaryConfig {
    fn x_extent(&self, axis: usize) -> f64 {
        let bb = self.base.set.bounding_box();
        self.base.x[axis] * (bb.upper()[axis] - bb.lower()[axis])
    }
}

impl SupExperimentConfig {
    pub(crate) fn grid_spacing(&self, u: f64, axis: usize) -> f64 {
        self.a * u.powf(-2.0 / self.model.alphas()[axis])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_regime_keeps_the_product() {
        let base = SupExperimentConfig::weak_unit_square(vec![2.0, 2.0], vec![2.0, 2.5], 200, 5).unwrap();
        let mut cfg = CorollaryConfig::new(CorollaryKind::Szybko, base);
        cfg.control = false;
        let rep = corollary_experiments(&cfg).unwrap();
        for r in &rep.main.records {
            let m = tail_constant_m(r.u, &[2.0, 2.0], &[0.5641895835477563; 2]).unwrap().m;
            assert!((r.m_values.iter().product::<f64>() / m - 1.0).abs() < 1e-12);
            assert!((r.m_values[0] - (-0.125 * r.u * r.u).exp()).abs() < 1e-14);
            assert_eq!(r.theory_limit, 0.0);
        }
        assert!(!rep.conjecture_conditional);
    }

    #[test]
    fn slow_regime_needs_a_bounded_side() {
        let base = SupExperimentConfig::weak_unit_square(vec![2.0, 2.0], vec![2.0, 2.5], 200, 5).unwrap();
        let cfg = CorollaryConfig::new(CorollaryKind::Wolno, base.clone());
        assert!(corollary_experiments(&cfg).is_err());
        let plan = ScalingPlan::new(2, 1, vec![1.0], vec![0.5], vec![SlowFactor::ONE]).unwrap();
        let cfg = CorollaryConfig::new(CorollaryKind::Wolno, SupExperimentConfig { plan, ..base });
        let rep = corollary_experiments(&cfg).unwrap();
        assert!(rep.conjecture_conditional);
        let r = &rep.main.records[0];
        assert!((r.m_values[0] - 2.0_f64.ln() / 2.0).abs() < 1e-14);
        assert!(rep.main.flags.iter().any(|f| f.starts_with("conjecture_conditional")));
    }
}
