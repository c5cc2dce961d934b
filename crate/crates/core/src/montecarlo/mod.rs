//! Monte Carlo experiments on the sup distribution and deterministic lemma
//! diagnostics.
//!
//! Every experiment draws one field per replicate from the stream
//! `(seed, replicate index)`. Thresholds that share a lattice share the
//! sample, and nested sets are restricted from one sample, so monotonicity in
//! `u` and in the set holds replicate by replicate.

mod corollary;
mod lemmas;
mod report;
mod sup;
mod tail;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Error, Result};
use crate::fields::{CorrelationModel, MixtureModel, SeparableStable};
use crate::geometry::{JordanSet, ScalingPlan, GRID_BUDGET};
use crate::limit_law::{literature_pickands, validate_alphas, QuadratureSpec};

pub use corollary::{corollary_experiments, CorollaryConfig, CorollaryKind, CorollaryReport};
pub use lemmas::{
    lemma2_sum, lemma2_term, lemma3_sum, lemma3_term, lemma3_weights, lemma_sums, HalfWidthRule, LemmaKind,
    LemmaSumConfig, LemmaSumReport, LemmaTerm, LogHorizonRule, LEMMA_BUDGET,
};
pub use report::{canonical_json, config_hash, wilson_interval, ExperimentReport, SupRecord, Verdict, WILSON_Z};
pub use sup::{convergence_study, estimate_sup_cdf, nested_set_sweep, threshold_sweep, x_sweep};
pub use tail::{
    discretization_gap, piterbarg_tail_check, GapConfig, GapRecord, GapReport, TailCheckConfig, TailRecord, TailReport,
};

/// Minimum replicate count for any proportion estimate.
pub const MIN_REPLICATES: usize = 100;
/// Exceedance count below which a tail estimate is flagged as unreliable.
pub const MIN_EXCEEDANCES: usize = 20;

pub(crate) fn default_a() -> f64 {
    0.25
}

pub(crate) fn default_budget() -> u64 {
    GRID_BUDGET as u64
}

fn default_block_edge() -> f64 {
    1.0
}

/// How the mixture horizon `T` follows the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonRule {
    /// `T = maxᵢ mᵢ(u)`, the longest side of the scaled window.
    #[default]
    MaxScale,
    /// A fixed `log T`.
    Fixed { log_horizon: f64 },
}

/// Model description resolved per threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    SeparableStable {
        alphas: Vec<f64>,
    },
    MixtureStrong {
        alphas: Vec<f64>,
        #[serde(rename = "R")]
        r: f64,
        #[serde(default = "default_block_edge")]
        block_edge: f64,
        #[serde(default)]
        bounded_dims: usize,
        #[serde(default)]
        horizon: HorizonRule,
    },
}

impl ModelSpec {
    pub fn alphas(&self) -> &[f64] {
        match self {
            ModelSpec::SeparableStable { alphas } | ModelSpec::MixtureStrong { alphas, .. } => alphas,
        }
    }

    /// The long-range constant `R`.
    pub fn r(&self) -> f64 {
        match self {
            ModelSpec::SeparableStable { .. } => 0.0,
            ModelSpec::MixtureStrong { r, .. } => *r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.alphas().is_empty(), || {
            "model needs at least one dimension".into()
        })?;
        validate_alphas(self.alphas())?;
        if let ModelSpec::MixtureStrong {
            r,
            block_edge,
            bounded_dims,
            horizon,
            ..
        } = self
        {
            ensure(*r > 0.0 && r.is_finite(), || {
                format!("mixture R must be positive, got {r}")
            })?;
            ensure(*block_edge > 0.0, || {
                format!("block edge must be positive, got {block_edge}")
            })?;
            ensure(*bounded_dims < self.alphas().len(), || {
                format!(
                    "bounded_dims = {bounded_dims} must be below d = {}",
                    self.alphas().len()
                )
            })?;
            if let HorizonRule::Fixed { log_horizon } = horizon {
                ensure(*log_horizon > 0.0, || {
                    format!("log T must be positive, got {log_horizon}")
                })?;
            }
        }
        Ok(())
    }

    /// The concrete model at a threshold whose window scales are `m_values`.
    pub fn build(&self, m_values: &[f64]) -> Result<CorrelationModel> {
        match self {
            ModelSpec::SeparableStable { alphas } => {
                Ok(CorrelationModel::SeparableStable(SeparableStable::new(alphas.clone())?))
            }
            ModelSpec::MixtureStrong {
                alphas,
                r,
                block_edge,
                bounded_dims,
                horizon,
            } => {
                let log_horizon = match horizon {
                    HorizonRule::MaxScale => m_values.iter().map(|m| m.ln()).fold(f64::NEG_INFINITY, f64::max),
                    HorizonRule::Fixed { log_horizon } => *log_horizon,
                };
                let base = SeparableStable::new(alphas.clone())?;
                let model = MixtureModel::with_log_horizon(base, *r, log_horizon, *bounded_dims)?
                    .with_block_edge(*block_edge)?;
                Ok(CorrelationModel::MixtureStrong(model))
            }
        }
    }
}

/// Inputs of a sup-distribution experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupExperimentConfig {
    pub model: ModelSpec,
    pub plan: ScalingPlan,
    #[serde(rename = "J")]
    pub set: JordanSet,
    pub x: Vec<f64>,
    pub u_values: Vec<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides for `H_{αᵢ}`; defaults to the closed forms for `α ∈ {1, 2}`.
    #[serde(default)]
    pub pickands_values: Option<Vec<f64>>,
    /// Worker threads; 0 uses all available cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_budget")]
    pub grid_budget: u64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

impl SupExperimentConfig {
    /// Weakly dependent separable model, symmetric plan, `J = [0,1]^d`,
    /// `x = 1`.
    pub fn weak_unit_square(alphas: Vec<f64>, u_values: Vec<f64>, replicates: usize, seed: u64) -> Result<Self> {
        let d = alphas.len();
        let config = Self {
            model: ModelSpec::SeparableStable { alphas },
            plan: ScalingPlan::symmetric(d)?,
            set: JordanSet::unit_cube(d),
            x: vec![1.0; d],
            u_values,
            a: default_a(),
            replicates,
            seed,
            pickands_values: None,
            workers: 0,
            grid_budget: GRID_BUDGET as u64,
            quadrature: QuadratureSpec::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.plan.validate()?;
        let d = self.model.alphas().len();
        ensure_len("plan dimension", d, self.plan.dim())?;
        ensure_len("set dimension", d, self.set.dim())?;
        ensure_len("x", d, self.x.len())?;
        ensure(self.x.iter().all(|&v| v > 0.0 && v.is_finite()), || {
            format!("every x_i must be positive, got {:?}", self.x)
        })?;
        ensure(!self.u_values.is_empty(), || "u_values must not be empty".into())?;
        ensure(self.u_values.iter().all(|&u| u > 0.0 && u.is_finite()), || {
            format!("thresholds must be positive, got {:?}", self.u_values)
        })?;
        ensure(self.a > 0.0 && self.a.is_finite(), || {
            format!("a must be positive, got {}", self.a)
        })?;
        ensure(self.replicates >= MIN_REPLICATES, || {
            format!("replicates must be at least {MIN_REPLICATES}, got {}", self.replicates)
        })?;
        self.quadrature.validate()?;
        self.resolved_pickands().map(|_| ())
    }

    /// The config with execution-only settings cleared, as hashed into
    /// reports.
    pub fn normalized(&self) -> Self {
        Self {
            workers: 0,
            ..self.clone()
        }
    }

    /// SHA-256 of the normalized config.
    pub fn hash(&self) -> Result<String> {
        config_hash(&self.normalized())
    }

    pub fn resolved_pickands(&self) -> Result<Vec<f64>> {
        resolve_pickands(self.model.alphas(), self.pickands_values.as_deref())
    }
}

/// Explicit values when given, otherwise the closed forms for `α ∈ {1, 2}`.
pub fn resolve_pickands(alphas: &[f64], overrides: Option<&[f64]>) -> Result<Vec<f64>> {
    match overrides {
        Some(h) => {
            ensure_len("pickands_values", alphas.len(), h.len())?;
            ensure(h.iter().all(|&v| v > 0.0 && v.is_finite()), || {
                format!("Pickands values must be positive, got {h:?}")
            })?;
            Ok(h.to_vec())
        }
        None => alphas
            .iter()
            .map(|&a| {
                literature_pickands(a).ok_or_else(|| {
                    Error::invalid(format!(
                        "no closed-form Pickands constant for alpha = {a}; supply pickands_values"
                    ))
                })
            })
            .collect(),
    }
}
