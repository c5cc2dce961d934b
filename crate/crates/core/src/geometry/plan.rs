use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Error, Result};
use crate::limit_law::{tail_constant_m, TailAsymptotics};

/// Tolerance on `Σ γᵢ = 1/2`.
pub const GAMMA_SUM_TOLERANCE: f64 = 1e-12;

/// Slowly varying factor `cᵢ(u)` with `log cᵢ(u) = o(u²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlowFactor {
    /// `c(u) = value`.
    Constant { value: f64 },
    /// `c(u) = u^exponent`.
    Power { exponent: f64 },
    /// `c(u) = (log u)^exponent`, defined for `u > 1`.
    LogPower { exponent: f64 },
}

impl SlowFactor {
    pub const ONE: SlowFactor = SlowFactor::Constant { value: 1.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            SlowFactor::Constant { value } => ensure(value > 0.0 && value.is_finite(), || {
                format!("constant slow factor must be positive, got {value}")
            }),
            SlowFactor::Power { exponent } | SlowFactor::LogPower { exponent } => {
                ensure(exponent.is_finite(), || "slow factor exponent must be finite".into())
            }
        }
    }

    pub fn ln_eval(&self, u: f64) -> Result<f64> {
        match *self {
            SlowFactor::Constant { value } => Ok(value.ln()),
            SlowFactor::Power { exponent } => Ok(exponent * u.ln()),
            SlowFactor::LogPower { exponent } => {
                ensure(u > 1.0, || format!("(log u)^p needs u > 1, got {u}"))?;
                Ok(exponent * u.ln().ln())
            }
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        self.ln_eval(u).map(f64::exp)
    }
}

/// Per-coordinate growth of the observation window.
///
/// Coordinates `1..=k` have bounded scale `mᵢ ≡ Mᵢ`. Coordinates `k < i < d`
/// grow like `exp(γᵢu²)cᵢ(u)`. The last coordinate closes the product
/// constraint `∏ mᵢ(u) = m(u)`; its declared `(γ_d, c_d)` is checked against
/// the growth it actually has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlan", into = "RawPlan")]
pub struct ScalingPlan {
    d: usize,
    k: usize,
    bounded_limits: Vec<f64>,
    gammas: Vec<f64>,
    c_descriptors: Vec<SlowFactor>,
    growth_tolerance: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    d: usize,
    k: usize,
    #[serde(rename = "M", default)]
    bounded_limits: Vec<f64>,
    gammas: Vec<f64>,
    c_descriptors: Vec<SlowFactor>,
    #[serde(default = "default_growth_tolerance")]
    growth_tolerance: f64,
}

fn default_growth_tolerance() -> f64 {
    0.1
}

impl TryFrom<RawPlan> for ScalingPlan {
    type Error = Error;

    fn try_from(raw: RawPlan) -> Result<Self> {
        let plan = ScalingPlan {
            d: raw.d,
            k: raw.k,
            bounded_limits: raw.bounded_limits,
            gammas: raw.gammas,
            c_descriptors: raw.c_descriptors,
            growth_tolerance: raw.growth_tolerance,
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl From<ScalingPlan> for RawPlan {
    fn from(p: ScalingPlan) -> Self {
        RawPlan {
            d: p.d,
            k: p.k,
            bounded_limits: p.bounded_limits,
            gammas: p.gammas,
            c_descriptors: p.c_descriptors,
            growth_tolerance: p.growth_tolerance,
        }
    }
}

/// Scales `mᵢ(u)` at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEvaluation {
    pub m_values: Vec<f64>,
    pub tail: TailAsymptotics,
    /// Local growth rate `Δ log m_d / Δ u²` of the closing coordinate.
    pub closing_growth: f64,
    /// Set when `closing_growth` differs from the declared `γ_d` by more than
    /// the plan's tolerance.
    pub growth_mismatch: bool,
}

impl ScalingPlan {
    pub fn new(
        d: usize,
        k: usize,
        bounded_limits: Vec<f64>,
        gammas: Vec<f64>,
        c_descriptors: Vec<SlowFactor>,
    ) -> Result<Self> {
        let plan = Self {
            d,
            k,
            bounded_limits,
            gammas,
            c_descriptors,
            growth_tolerance: default_growth_tolerance(),
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Like [`ScalingPlan::new`] but the last `γ` is set to close the sum at
    /// 1/2; `leading_gammas` covers coordinates `k+1..d-1`.
    pub fn closing(
        d: usize,
        k: usize,
        bounded_limits: Vec<f64>,
        leading_gammas: Vec<f64>,
        c_descriptors: Vec<SlowFactor>,
    ) -> Result<Self> {
        let mut gammas = leading_gammas;
        gammas.push(0.5 - gammas.iter().sum::<f64>());
        Self::new(d, k, bounded_limits, gammas, c_descriptors)
    }

    /// `k = 0`, `γᵢ = 1/(2d)`, `cᵢ ≡ 1`: every coordinate grows at the same
    /// exponential rate.
    pub fn symmetric(d: usize) -> Result<Self> {
        ensure(d >= 1, || "dimension must be at least 1".into())?;
        Self::new(d, 0, vec![], vec![0.5 / d as f64; d], vec![SlowFactor::ONE; d])
    }

    pub fn with_growth_tolerance(mut self, tol: f64) -> Self {
        self.growth_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.d >= 1, || "dimension must be at least 1".into())?;
        ensure(self.k < self.d, || {
            format!("k = {} must be below d = {}", self.k, self.d)
        })?;
        ensure_len("bounded limits M", self.k, self.bounded_limits.len())?;
        ensure_len("gammas", self.d - self.k, self.gammas.len())?;
        ensure_len("c_descriptors", self.d - self.k, self.c_descriptors.len())?;
        ensure(self.bounded_limits.iter().all(|&m| m > 0.0 && m.is_finite()), || {
            format!("bounded limits M must be positive, got {:?}", self.bounded_limits)
        })?;
        ensure(self.gammas.iter().all(|&g| (0.0..=0.5).contains(&g)), || {
            format!("each gamma must lie in [0, 1/2], got {:?}", self.gammas)
        })?;
        let sum: f64 = self.gammas.iter().sum();
        ensure((sum - 0.5).abs() <= GAMMA_SUM_TOLERANCE, || {
            format!("gammas must sum to 1/2 over the unbounded coordinates, got {sum}")
        })?;
        for c in &self.c_descriptors {
            c.validate()?;
        }
        ensure(self.growth_tolerance > 0.0, || {
            "growth tolerance must be positive".into()
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bounded_dims(&self) -> usize {
        self.k
    }

    pub fn bounded_limits(&self) -> &[f64] {
        &self.bounded_limits
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn c_descriptors(&self) -> &[SlowFactor] {
        &self.c_descriptors
    }

    /// `γ = maxᵢ γᵢ`.
    pub fn gamma(&self) -> f64 {
        self.gammas.iter().copied().fold(0.0, f64::max)
    }

    /// `log mᵢ(u)` for every coordinate except the last.
    fn leading_logs(&self, u: f64) -> Result<Vec<f64>> {
        let mut logs = Vec::with_capacity(self.d - 1);
        for i in 0..self.d - 1 {
            if i < self.k {
                logs.push(self.bounded_limits[i].ln());
            } else {
                let j = i - self.k;
                logs.push(self.gammas[j] * u * u + self.c_descriptors[j].ln_eval(u)?);
            }
        }
        Ok(logs)
    }

    fn closing_log(&self, u: f64, alphas: &[f64], pickands_values: &[f64]) -> Result<(f64, TailAsymptotics)> {
        let tail = tail_constant_m(u, alphas, pickands_values)?;
        let leading: f64 = self.leading_logs(u)?.iter().sum();
        Ok((tail.log_m - leading, tail))
    }

    /// `(m₁(u), …, m_d(u))` with `∏ mᵢ = m(u)`.
    pub fn evaluate_m_i(&self, u: f64, alphas: &[f64], pickands_values: &[f64]) -> Result<ScaleEvaluation> {
        ensure_len("alphas vs plan dimension", self.d, alphas.len())?;
        let mut logs = self.leading_logs(u)?;
        let (last, tail) = self.closing_log(u, alphas, pickands_values)?;
        logs.push(last);

        let u2 = u * 1.01;
        let (last2, _) = self.closing_log(u2, alphas, pickands_values)?;
        let closing_growth = (last2 - last) / (u2 * u2 - u * u);
        let declared = self.gammas[self.d - 1 - self.k];
        let growth_mismatch = (closing_growth - declared).abs() > self.growth_tolerance;

        let m_values: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        if m_values.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::NonFinite(format!("scales m_i at u = {u}: {m_values:?}")));
        }
        Ok(ScaleEvaluation {
            m_values,
            tail,
            closing_growth,
            growth_mismatch,
        })
    }
}
