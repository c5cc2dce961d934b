//! The mixed-Gumbel limit law and the tail quantities that calibrate it.
//!
//! For a field satisfying the local condition with exponents `αᵢ` and the
//! long-range condition with constant `R`, the probability that the sup over
//! `J^x_m` stays below `u` converges to
//!
//! ```text
//! E exp(-c · exp(-R/(2γ) + √(R/γ) · W)),   c = λ(J) · x₁ ⋯ x_d,  W ~ N(0, 1).
//! ```
//!
//! For `R = 0` the mixing variable is the constant 1 and the law is `exp(-c)`.

mod normal;
mod quadrature;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, ensure_len, Error, Result};
use crate::replicate::replicate_rng;

pub use normal::{erfcx, log_normal_tail, normal_cdf, normal_pdf, normal_tail};
pub use quadrature::GaussHermite;

/// Intensities are clamped to this range before exponentiation.
pub const INTENSITY_FLOOR: f64 = 1e-300;
pub const INTENSITY_CEILING: f64 = 1e300;

/// Parameters `(x, λ(J), R, γ)` of the limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitLawParams {
    pub x: Vec<f64>,
    pub lambda_j: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub gamma: f64,
}

impl LimitLawParams {
    pub fn new(x: Vec<f64>, lambda_j: f64, r: f64, gamma: f64) -> Result<Self> {
        let params = Self { x, lambda_j, r, gamma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.x.is_empty(), || "x must have at least one coordinate".into())?;
        ensure(self.x.iter().all(|&v| v > 0.0 && v.is_finite()), || {
            format!("every x_i must be positive and finite, got {:?}", self.x)
        })?;
        ensure(self.lambda_j > 0.0 && self.lambda_j.is_finite(), || {
            format!("lambda_J must be positive, got {}", self.lambda_j)
        })?;
        validate_dependence(self.r, self.gamma)
    }

    /// `c = λ(J) · ∏ xᵢ`.
    pub fn intensity(&self) -> f64 {
        self.lambda_j * self.x.iter().product::<f64>()
    }
}

fn validate_dependence(r: f64, gamma: f64) -> Result<()> {
    ensure(r >= 0.0 && r.is_finite(), || {
        format!("R must be a finite nonnegative number, got {r}")
    })?;
    ensure(gamma > 0.0 && gamma <= 0.5, || {
        format!("gamma must lie in (0, 1/2], got {gamma}")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    GaussHermite,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub method: QuadratureMethod,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            node_count: 64,
            method: QuadratureMethod::GaussHermite,
            mc_draws: 1_000_000,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(node_count: usize) -> Self {
        Self {
            node_count,
            ..Self::default()
        }
    }

    pub fn monte_carlo(mc_draws: usize, seed: u64) -> Self {
        Self {
            method: QuadratureMethod::MonteCarlo,
            mc_draws,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            QuadratureMethod::GaussHermite => ensure(self.node_count >= 8, || {
                format!("Gauss-Hermite needs at least 8 nodes, got {}", self.node_count)
            }),
            QuadratureMethod::MonteCarlo => ensure(self.mc_draws >= 100_000, || {
                format!("Monte Carlo needs at least 1e5 draws, got {}", self.mc_draws)
            }),
        }
    }
}

/// Value of the limit law with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub value: f64,
    /// Standard error, present for Monte Carlo evaluation only.
    pub std_error: Option<f64>,
    pub method: QuadratureMethod,
    /// Intensity after clamping.
    pub intensity: f64,
    /// True when the intensity had to be clamped.
    pub saturated: bool,
}

/// Evaluates the limit law for validated parameters.
pub fn limit_cdf(params: &LimitLawParams, quad: &QuadratureSpec) -> Result<LimitValue> {
    params.validate()?;
    mixed_gumbel_cdf(params.intensity(), params.r, params.gamma, quad)
}

/// `E exp(-c · exp(-R/(2γ) + √(R/γ) W))` for an intensity `c >= 0`.
///
/// `c = 0` returns exactly 1.
pub fn mixed_gumbel_cdf(c: f64, r: f64, gamma: f64, quad: &QuadratureSpec) -> Result<LimitValue> {
    validate_dependence(r, gamma)?;
    quad.validate()?;
    ensure(c >= 0.0 && !c.is_nan(), || {
        format!("intensity must be nonnegative, got {c}")
    })?;
    if c == 0.0 {
        return Ok(LimitValue {
            value: 1.0,
            std_error: quad_has_error(quad).then_some(0.0),
            method: quad.method,
            intensity: 0.0,
            saturated: false,
        });
    }
    let clamped = c.clamp(INTENSITY_FLOOR, INTENSITY_CEILING);
    let saturated = clamped != c;
    let (shift, scale) = specialization_coefficients(r, gamma)?;
    let log_c = clamped.ln();
    let integrand = |w: f64| (-(log_c - shift + scale * w).exp()).exp();

    let (value, std_error) = match quad.method {
        QuadratureMethod::GaussHermite => {
            let rule = GaussHermite::new(quad.node_count);
            (rule.expect(integrand), None)
        }
        QuadratureMethod::MonteCarlo => {
            let mut rng = replicate_rng(quad.seed, 0);
            let n = quad.mc_draws as f64;
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..quad.mc_draws {
                let w: f64 = rng.sample(StandardNormal);
                let v = integrand(w);
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / n;
            let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (mean, Some((var / n).sqrt()))
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite(format!(
            "limit law at c = {c:e}, R = {r}, gamma = {gamma}"
        )));
    }
    Ok(LimitValue {
        value,
        std_error,
        method: quad.method,
        intensity: clamped,
        saturated,
    })
}

fn quad_has_error(quad: &QuadratureSpec) -> bool {
    quad.method == QuadratureMethod::MonteCarlo
}

/// `(R/(2γ), √(R/γ))`: the shift and scale of the log-normal mixing exponent.
pub fn specialization_coefficients(r: f64, gamma: f64) -> Result<(f64, f64)> {
    validate_dependence(r, gamma)?;
    Ok((r / (2.0 * gamma), (r / gamma).sqrt()))
}

/// Tail scale `m(u) = (∏ H_{αᵢ} u^{2/αᵢ} · Ψ(u))⁻¹` and its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailAsymptotics {
    pub u: f64,
    /// `Ψ(u)`; underflows to 0 for `u` beyond about 38, see `log_psi`.
    pub psi: f64,
    pub log_psi: f64,
    /// `m(u)`; overflows to infinity when `Ψ(u)` underflows, see `log_m`.
    pub m: f64,
    pub log_m: f64,
    pub alphas: Vec<f64>,
    pub pickands_values: Vec<f64>,
}

pub fn tail_constant_m(u: f64, alphas: &[f64], pickands_values: &[f64]) -> Result<TailAsymptotics> {
    ensure_len("pickands_values vs alphas", alphas.len(), pickands_values.len())?;
    ensure(!alphas.is_empty(), || "at least one exponent is required".into())?;
    ensure(u > 0.0 && u.is_finite(), || format!("u must be positive, got {u}"))?;
    validate_alphas(alphas)?;
    ensure(pickands_values.iter().all(|&h| h > 0.0 && h.is_finite()), || {
        format!("Pickands values must be positive, got {pickands_values:?}")
    })?;
    let log_psi = log_normal_tail(u);
    let log_prefactor: f64 = alphas
        .iter()
        .zip(pickands_values)
        .map(|(&a, &h)| h.ln() + 2.0 / a * u.ln())
        .sum();
    let log_m = -(log_prefactor + log_psi);
    let psi = normal_tail(u);
    let prefactor: f64 = alphas
        .iter()
        .zip(pickands_values)
        .map(|(&a, &h)| h * u.powf(2.0 / a))
        .product();
    let m = if psi > 0.0 {
        1.0 / (prefactor * psi)
    } else {
        log_m.exp()
    };
    Ok(TailAsymptotics {
        u,
        psi,
        log_psi,
        m,
        log_m,
        alphas: alphas.to_vec(),
        pickands_values: pickands_values.to_vec(),
    })
}

pub(crate) fn validate_alphas(alphas: &[f64]) -> Result<()> {
    ensure(alphas.iter().all(|&a| a > 0.0 && a <= 2.0), || {
        format!("exponents must lie in (0, 2], got {alphas:?}")
    })
}

/// Threshold seen by the independent part of the mixture field given `W = z`:
/// `u_z = (u - √(R/log T) z) / √(1 - R/log T)`.
pub fn u_z_transform(u: f64, z: f64, r: f64, horizon: f64) -> Result<f64> {
    ensure(horizon > 1.0 && horizon.is_finite(), || {
        format!("horizon T must be finite and exceed 1, got {horizon}")
    })?;
    u_z_transform_log(u, z, r, horizon.ln())
}

/// [`u_z_transform`] taking `log T`, for horizons that overflow `f64`.
pub fn u_z_transform_log(u: f64, z: f64, r: f64, log_horizon: f64) -> Result<f64> {
    let rho = mixing_weight_log(r, log_horizon)?;
    Ok((u - rho.sqrt() * z) / (1.0 - rho).sqrt())
}

/// `R / log T`, the weight of the shared component in the mixture field.
pub fn mixing_weight(r: f64, horizon: f64) -> Result<f64> {
    ensure(horizon > 1.0 && horizon.is_finite(), || {
        format!("horizon T must be finite and exceed 1, got {horizon}")
    })?;
    mixing_weight_log(r, horizon.ln())
}

pub fn mixing_weight_log(r: f64, log_horizon: f64) -> Result<f64> {
    ensure(log_horizon > 0.0 && log_horizon.is_finite(), || {
        format!("log T must be positive and finite, got {log_horizon}")
    })?;
    ensure(r >= 0.0 && r.is_finite(), || format!("R must be nonnegative, got {r}"))?;
    let rho = r / log_horizon;
    ensure(rho < 1.0, || {
        format!("R/log T = {rho} must be below 1; the horizon is too small for R = {r}")
    })?;
    Ok(rho)
}

/// Limit of `m(u)/m(u_z)`: `exp(-R/(2γ) + √(R/γ) z)`.
pub fn m_ratio_limit(z: f64, r: f64, gamma: f64) -> Result<f64> {
    let (shift, scale) = specialization_coefficients(r, gamma)?;
    Ok((-shift + scale * z).exp())
}

/// Known closed forms `H₁ = 1` and `H₂ = 1/√π`.
pub fn literature_pickands(alpha: f64) -> Option<f64> {
    if alpha == 1.0 {
        Some(1.0)
    } else if alpha == 2.0 {
        Some(1.0 / std::f64::consts::PI.sqrt())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: f64 = 0.564_189_583_547_756_3;

    #[test]
    fn weak_dependence_reduces_to_gumbel() {
        let p = LimitLawParams::new(vec![1.0, 1.0], 1.0, 0.0, 0.25).unwrap();
        let v = limit_cdf(&p, &QuadratureSpec::default()).unwrap();
        assert!((v.value - (-1.0f64).exp()).abs() < 1e-14);
        assert!(!v.saturated);
    }

    #[test]
    fn zero_intensity_gives_one() {
        let v = mixed_gumbel_cdf(0.0, 0.5, 0.25, &QuadratureSpec::default()).unwrap();
        assert_eq!(v.value, 1.0);
        let tiny = mixed_gumbel_cdf(1e-12, 0.5, 0.25, &QuadratureSpec::default()).unwrap();
        assert!(1.0 - tiny.value < 1e-11);
    }

    #[test]
    fn strong_dependence_matches_frozen_monte_carlo() {
        // 1e7 independent draws of exp(-exp(-1 + √2 W)): mean and standard error.
        let golden = 0.608_457_735_660_032_9;
        let se = 9.539_844_307_353_576e-5;
        let v = mixed_gumbel_cdf(1.0, 0.5, 0.25, &QuadratureSpec::default()).unwrap();
        assert!((v.value - golden).abs() < 3.0 * se, "{} vs {golden}", v.value);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let q = QuadratureSpec::monte_carlo(100_000, 9);
        let a = mixed_gumbel_cdf(2.0, 1.0, 0.25, &q).unwrap();
        let b = mixed_gumbel_cdf(2.0, 1.0, 0.25, &q).unwrap();
        assert_eq!(a, b);
        assert!(a.std_error.unwrap() > 0.0);
    }

    #[test]
    fn saturation_is_flagged() {
        let v = mixed_gumbel_cdf(1e305, 0.0, 0.5, &QuadratureSpec::default()).unwrap();
        assert!(v.saturated);
        assert_eq!(v.intensity, INTENSITY_CEILING);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(LimitLawParams::new(vec![1.0, -1.0], 1.0, 0.0, 0.25).is_err());
        assert!(LimitLawParams::new(vec![1.0], 0.0, 0.0, 0.25).is_err());
        assert!(LimitLawParams::new(vec![1.0], 1.0, -0.1, 0.25).is_err());
        assert!(LimitLawParams::new(vec![1.0], 1.0, 0.0, 0.0).is_err());
        assert!(LimitLawParams::new(vec![1.0], 1.0, 0.0, 0.6).is_err());
        assert!(QuadratureSpec::gauss_hermite(4).validate().is_err());
        assert!(QuadratureSpec::monte_carlo(10, 0).validate().is_err());
    }

    #[test]
    fn specialization_examples() {
        assert_eq!(specialization_coefficients(1.0, 0.25).unwrap(), (2.0, 2.0));
        assert_eq!(specialization_coefficients(0.0, 0.3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn tail_constant_examples() {
        let t = tail_constant_m(1.0, &[2.0], &[1.0]).unwrap();
        assert!((t.m - 6.302_974_375_068_753).abs() < 1e-9);
        let t = tail_constant_m(3.0, &[2.0], &[H2]).unwrap();
        assert!((t.m - 437.675_984_747_074_55).abs() < 1e-8);
        assert!((t.m - 437.7).abs() < 0.05);
        assert!(t.psi > 0.0 && t.psi < 1.0);
    }

    #[test]
    fn doubling_pickands_values_divides_m() {
        let alphas = [2.0, 1.0, 0.5];
        let hs = [H2, 1.0, 3.0];
        let doubled: Vec<f64> = hs.iter().map(|h| 2.0 * h).collect();
        let a = tail_constant_m(2.5, &alphas, &hs).unwrap();
        let b = tail_constant_m(2.5, &alphas, &doubled).unwrap();
        assert!((a.m / b.m - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tail_constant_rejects_mismatch() {
        let err = tail_constant_m(2.0, &[2.0, 2.0], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn u_z_examples() {
        for &u in &[1.0, 3.0, 10.0] {
            assert_eq!(u_z_transform(u, 1.7, 0.0, 50.0).unwrap(), u);
        }
        let t = 2.0f64.exp();
        let got = u_z_transform(3.0, 0.0, 0.5, t).unwrap();
        assert!((got / 3.0 - 1.154_700_538_379_251_7).abs() < 1e-12);
        assert!(u_z_transform(3.0, 0.0, 2.0, t).is_err());
    }

    #[test]
    fn u_z_expansion_gap_is_little_o_of_one_over_u() {
        // T = exp(γu²)·c with γ = 1/4, c = 3: the gap times u must vanish.
        let (r, gamma, z) = (0.5, 0.25, 1.0);
        let scaled_gaps: Vec<f64> = [10.0f64, 100.0, 1000.0]
            .iter()
            .map(|&u| {
                let horizon_log = gamma * u * u + 3.0f64.ln();
                let rho = r / horizon_log;
                let uz = (u - rho.sqrt() * z) / (1.0 - rho).sqrt();
                let first_order = (-(r / gamma).sqrt() * z + r / (2.0 * gamma)) / u;
                (uz - u - first_order) * u
            })
            .collect();
        assert!(scaled_gaps[1].abs() < scaled_gaps[0].abs());
        assert!(scaled_gaps[2].abs() < scaled_gaps[1].abs());
        assert!(scaled_gaps[2].abs() < 1e-3);
    }

    #[test]
    fn m_ratio_examples() {
        assert_eq!(m_ratio_limit(0.3, 0.0, 0.25).unwrap(), 1.0);
        let (r, gamma): (f64, f64) = (0.5, 0.25);
        let z = 0.5 * (r / gamma).sqrt();
        assert!((m_ratio_limit(z, r, gamma).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn m_ratio_matches_direct_evaluation() {
        let (r, gamma, z, u) = (0.5, 0.25, 1.0, 200.0);
        let uz = u_z_transform_log(u, z, r, u * u / 4.0).unwrap();
        let m_u = tail_constant_m(u, &[2.0, 2.0], &[H2, H2]).unwrap();
        let m_uz = tail_constant_m(uz, &[2.0, 2.0], &[H2, H2]).unwrap();
        let direct = (m_u.log_m - m_uz.log_m).exp();
        let limit = m_ratio_limit(z, r, gamma).unwrap();
        assert!((direct / limit - 1.0).abs() < 1e-2, "{direct} vs {limit}");
    }
}
