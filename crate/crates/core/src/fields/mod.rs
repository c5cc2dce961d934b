//! Correlation models, condition validators and exact grid samplers.
//!
//! Two families are provided. [`SeparableStable`] has correlation
//! `r(t) = exp(−Σ|tᵢ|^{αᵢ})` and is weakly dependent. [`MixtureModel`] is the
//! block construction `Y = √(1−ρ)·η + √ρ·W` with `ρ = R / log T`, where `η`
//! consists of independent copies of a base field on unit blocks of the
//! unbounded coordinates and `W` is one shared standard normal.

mod sample;
mod sampler;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::limit_law::{mixing_weight_log, validate_alphas};

pub use sample::{read_dump, sample_field, FieldSample};
pub use sampler::{
    AxisFactor, FieldSampler, MixtureSampler, SamplerScratch, SeparableSampler, StationarySampler, DENSE_AXIS_LIMIT,
};
pub use validate::{verify_a1, verify_a3, A1Report, A3Report};

/// A stationary correlation function on `ℝ^d`.
pub trait Correlation: Send + Sync {
    fn dim(&self) -> usize;

    /// Local exponents `αᵢ` of `1 − r(t) ≈ Σ|tᵢ|^{αᵢ}`.
    fn alphas(&self) -> &[f64];

    /// `r(t) = Cov(X(t), X(0))`.
    fn correlation(&self, t: &[f64]) -> f64;

    /// The limit `R` of `r(t) · log‖t‖`.
    fn long_range_constant(&self) -> f64 {
        0.0
    }
}

/// `r(t) = exp(−Σ|tᵢ|^{αᵢ})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableStable {
    alphas: Vec<f64>,
}

impl SeparableStable {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        ensure(!alphas.is_empty(), || "a model needs at least one dimension".into())?;
        validate_alphas(&alphas)?;
        Ok(Self { alphas })
    }

    /// One-dimensional factor `exp(−|lag|^{αᵢ})`.
    pub fn axis_correlation(&self, axis: usize, lag: f64) -> f64 {
        (-lag.abs().powf(self.alphas[axis])).exp()
    }
}

impl Correlation for SeparableStable {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn correlation(&self, t: &[f64]) -> f64 {
        let s: f64 = t.iter().zip(&self.alphas).map(|(ti, a)| ti.abs().powf(*a)).sum();
        (-s).exp()
    }
}

fn default_block_edge() -> f64 {
    1.0
}

/// Block mixture `Y_T` over a separable base model.
///
/// `horizon` is stored as `log T` so that horizons like `exp(u²/4)` stay
/// representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureModel {
    base: SeparableStable,
    #[serde(rename = "R")]
    r: f64,
    log_horizon: f64,
    #[serde(default = "default_block_edge")]
    block_edge: f64,
    #[serde(default)]
    bounded_dims: usize,
}

impl MixtureModel {
    pub fn new(base: SeparableStable, r: f64, horizon: f64, bounded_dims: usize) -> Result<Self> {
        ensure(horizon > 1.0 && horizon.is_finite(), || {
            format!("horizon T must exceed 1, got {horizon}")
        })?;
        Self::with_log_horizon(base, r, horizon.ln(), bounded_dims)
    }

    pub fn with_log_horizon(base: SeparableStable, r: f64, log_horizon: f64, bounded_dims: usize) -> Result<Self> {
        let model = Self {
            base,
            r,
            log_horizon,
            block_edge: 1.0,
            bounded_dims,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_block_edge(mut self, edge: f64) -> Result<Self> {
        self.block_edge = edge;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.r > 0.0 && self.r.is_finite(), || {
            format!("R must be positive, got {}", self.r)
        })?;
        ensure(self.block_edge > 0.0 && self.block_edge.is_finite(), || {
            format!("block edge must be positive, got {}", self.block_edge)
        })?;
        ensure(self.bounded_dims < self.base.dim(), || {
            format!(
                "bounded_dims = {} must be below d = {}",
                self.bounded_dims,
                self.base.dim()
            )
        })?;
        mixing_weight_log(self.r, self.log_horizon).map(|_| ())
    }

    pub fn base(&self) -> &SeparableStable {
        &self.base
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn log_horizon(&self) -> f64 {
        self.log_horizon
    }

    pub fn block_edge(&self) -> f64 {
        self.block_edge
    }

    pub fn bounded_dims(&self) -> usize {
        self.bounded_dims
    }

    /// `ρ = R / log T`.
    pub fn rho(&self) -> f64 {
        self.r / self.log_horizon
    }

    /// Block index of coordinate `axis` at position `t`.
    pub fn block_of(&self, t: f64) -> i64 {
        (t / self.block_edge).floor() as i64
    }

    fn same_block(&self, s: &[f64], t: &[f64]) -> bool {
        (self.bounded_dims..self.dim()).all(|i| self.block_of(s[i]) == self.block_of(t[i]))
    }

    /// `C_T(s, t)`: `(1−ρ)·r(t−s) + ρ` inside one block, `ρ` otherwise.
    pub fn covariance_between(&self, s: &[f64], t: &[f64]) -> f64 {
        let rho = self.rho();
        if self.same_block(s, t) {
            let lag: Vec<f64> = s.iter().zip(t).map(|(a, b)| b - a).collect();
            (1.0 - rho) * self.base.correlation(&lag) + rho
        } else {
            rho
        }
    }
}

impl Correlation for MixtureModel {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn alphas(&self) -> &[f64] {
        self.base.alphas()
    }

    /// Covariance between the origin and `t`.
    fn correlation(&self, t: &[f64]) -> f64 {
        self.covariance_between(&vec![0.0; t.len()], t)
    }

    fn long_range_constant(&self) -> f64 {
        self.r
    }
}

/// The model families the samplers support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CorrelationModel {
    SeparableStable(SeparableStable),
    MixtureStrong(MixtureModel),
}

impl CorrelationModel {
    pub fn as_correlation(&self) -> &dyn Correlation {
        match self {
            CorrelationModel::SeparableStable(m) => m,
            CorrelationModel::MixtureStrong(m) => m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CorrelationModel::SeparableStable(m) => SeparableStable::new(m.alphas.clone()).map(|_| ()),
            CorrelationModel::MixtureStrong(m) => {
                SeparableStable::new(m.base.alphas.clone())?;
                m.validate()
            }
        }
    }
}

impl Correlation for CorrelationModel {
    fn dim(&self) -> usize {
        self.as_correlation().dim()
    }

    fn alphas(&self) -> &[f64] {
        self.as_correlation().alphas()
    }

    fn correlation(&self, t: &[f64]) -> f64 {
        self.as_correlation().correlation(t)
    }

    fn long_range_constant(&self) -> f64 {
        self.as_correlation().long_range_constant()
    }
}

/// A correlation given by a closure, for validator experiments and for the
/// generic stationary sampler.
pub struct FnCorrelation<F> {
    alphas: Vec<f64>,
    long_range: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnCorrelation<F> {
    pub fn new(alphas: Vec<f64>, long_range: f64, f: F) -> Self {
        Self { alphas, long_range, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Correlation for FnCorrelation<F> {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    fn correlation(&self, t: &[f64]) -> f64 {
        (self.f)(t)
    }

    fn long_range_constant(&self) -> f64 {
        self.long_range
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixture() -> MixtureModel {
        let base = SeparableStable::new(vec![2.0, 2.0]).unwrap();
        MixtureModel::new(base, 0.5, 100.0, 0).unwrap()
    }

    #[test]
    fn unit_variance_and_closed_forms() {
        let sep = SeparableStable::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(sep.correlation(&[0.0, 0.0]), 1.0);
        assert!((sep.correlation(&[1.0, 0.0]) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(mixture().correlation(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn mixture_case_split() {
        let m = mixture();
        let rho = 0.5 / 100f64.ln();
        assert_eq!(m.rho(), rho);
        assert_eq!(m.covariance_between(&[0.9, 0.2], &[1.1, 0.2]), rho);
        let within = m.covariance_between(&[0.1, 0.2], &[0.6, 0.7]);
        let base = m.base().correlation(&[0.5, 0.5]);
        assert_eq!(within, (1.0 - rho) * base + rho);
    }

    #[test]
    fn bounded_coordinates_share_one_copy() {
        let base = SeparableStable::new(vec![2.0, 2.0]).unwrap();
        let m = MixtureModel::new(base, 0.5, 100.0, 1).unwrap();
        let rho = m.rho();
        assert!(m.covariance_between(&[0.5, 0.5], &[3.5, 0.5]) > rho);
        assert_eq!(m.covariance_between(&[0.5, 0.5], &[0.5, 1.5]), rho);
    }

    #[test]
    fn mixture_requires_rho_below_one() {
        let base = SeparableStable::new(vec![2.0]).unwrap();
        assert!(MixtureModel::new(base.clone(), 5.0, 100.0, 0).is_err());
        assert!(MixtureModel::new(base.clone(), 0.5, 1.0, 0).is_err());
        assert!(MixtureModel::new(base, 0.5, 100.0, 1).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let model = CorrelationModel::MixtureStrong(mixture());
        let text = serde_json::to_string(&model).unwrap();
        assert!(text.contains("\"family\":\"mixture_strong\""), "{text}");
        let back: CorrelationModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
    }
}
