use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{config_hash, Verdict};
use super::{default_a, resolve_pickands};
use crate::error::{ensure, ensure_len, Error, Result};
use crate::fields::{Correlation, SeparableStable};
use crate::geometry::ScalingPlan;
use crate::limit_law::{tail_constant_m, validate_alphas};

/// Default lattice budget for the lemma sums.
pub const LEMMA_BUDGET: u128 = 1 << 24;

fn default_eps() -> f64 {
    0.25
}

fn default_lemma_budget() -> u64 {
    LEMMA_BUDGET as u64
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    Lemma2,
    Lemma3,
}

/// `log T` for the near-diagonal sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LogHorizonRule {
    /// `log T = γ u²`.
    GammaU2 {
        gamma: f64,
    },
    Fixed {
        log_horizon: f64,
    },
}

impl Default for LogHorizonRule {
    fn default() -> Self {
        LogHorizonRule::GammaU2 { gamma: 0.25 }
    }
}

impl LogHorizonRule {
    pub fn log_horizon(&self, u: f64) -> f64 {
        match *self {
            LogHorizonRule::GammaU2 { gamma } => gamma * u * u,
            LogHorizonRule::Fixed { log_horizon } => log_horizon,
        }
    }
}

/// Half-widths `Tᵢ` of the far-field lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum HalfWidthRule {
    /// `Tᵢ = τ·mᵢ(u)` from the scaling plan.
    PlanScaled {
        tau: f64,
    },
    Fixed {
        half_widths: Vec<f64>,
    },
}

impl Default for HalfWidthRule {
    fn default() -> Self {
        HalfWidthRule::PlanScaled { tau: 1.0 }
    }
}

/// One evaluated lemma sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTerm {
    pub u: f64,
    pub sum: f64,
    /// Largest single summand, prefactor excluded.
    pub max_term: f64,
    /// Portion of `sum` from the near branch (`max` over unbounded `|tᵢ| < 1`).
    pub near_sum: f64,
    pub far_sum: f64,
    pub log_prefactor: f64,
    pub log_horizon: f64,
    pub spacings: Vec<f64>,
    /// Empty for the near-diagonal sum.
    pub half_widths: Vec<f64>,
    pub lattice_points: u128,
    pub evaluated_points: u64,
    /// Far-region stride; 1 when every lattice point was evaluated.
    pub stride: usize,
}

impl LemmaTerm {
    pub fn strided(&self) -> bool {
        self.stride > 1
    }
}

/// Summand of the near-diagonal sum at correlation `r` and `ρ = R/log T`.
pub fn lemma2_term(r: f64, u: f64, rho: f64) -> Result<f64> {
    let s = r + (1.0 - r) * rho;
    let arg = 1.0 - s * s;
    if arg <= 0.0 {
        return Err(Error::Singular(format!(
            "1 - (r + (1-r)R/log T)^2 = {arg:e} <= 0 at r = {r}; choose a smaller eps"
        )));
    }
    Ok((1.0 - r) * rho / arg.sqrt() * (-u * u / (1.0 + s)).exp())
}

/// `(ρ_T, ϱ_T)` at correlation `r`; `near` selects the first branch.
pub fn lemma3_weights(r: f64, rho: f64, near: bool) -> (f64, f64) {
    if near {
        (1.0, r.abs() + (1.0 - r) * rho)
    } else {
        ((r - rho).abs(), rho)
    }
}

/// Summand of the far-field sum.
pub fn lemma3_term(r: f64, u: f64, rho: f64, near: bool) -> f64 {
    let (rho_t, varrho_t) = lemma3_weights(r, rho, near);
    rho_t * (-u * u / (1.0 + r.abs().max(varrho_t))).exp()
}

fn spacings(alphas: &[f64], a: f64, u: f64) -> Vec<f64> {
    alphas.iter().map(|&al| a * u.powf(-2.0 / al)).collect()
}

#[derive(Default, Clone, Copy)]
struct Partial {
    near: f64,
    far: f64,
    max_term: f64,
    points: u64,
}

impl Partial {
    fn merge(self, o: Partial) -> Partial {
        Partial {
            near: self.near + o.near,
            far: self.far + o.far,
            max_term: self.max_term.max(o.max_term),
            points: self.points + o.points,
        }
    }
}

/// Sums `f` over the product of `axes`; the first axis is split across
/// threads and partial sums are merged in index order.
fn lattice_sum<F>(axes: &[Vec<i64>], q: &[f64], f: F) -> Result<Partial>
where
    F: Fn(&[f64], &[i64]) -> Result<Option<(f64, f64, bool)>> + Sync,
{
    let d = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return Ok(Partial::default());
    }
    let parts = axes[0]
        .par_iter()
        .map(|&j0| {
            let mut idx = vec![0usize; d];
            let mut j = vec![0i64; d];
            let mut t = vec![0.0; d];
            let mut acc = Partial::default();
            j[0] = j0;
            t[0] = j0 as f64 * q[0];
            loop {
                for i in 1..d {
                    j[i] = axes[i][idx[i]];
                    t[i] = j[i] as f64 * q[i];
                }
                if let Some((v, raw, near)) = f(&t, &j)? {
                    if near {
                        acc.near += v;
                    } else {
                        acc.far += v;
                    }
                    acc.max_term = acc.max_term.max(raw);
                    acc.points += 1;
                }
                let mut i = d;
                loop {
                    if i == 1 {
                        return Ok(acc);
                    }
                    i -= 1;
                    idx[i] += 1;
                    if idx[i] < axes[i].len() {
                        break;
                    }
                    idx[i] = 0;
                }
            }
        })
        .collect::<Result<Vec<Partial>>>()?;
    Ok(parts.into_iter().fold(Partial::default(), Partial::merge))
}

/// `(m(u)/∏qᵢ)·Σ` over `jq ∈ (−ε,ε)^d \ {0}` of the near-diagonal summand,
/// with `ρ = R/log T`.
pub fn lemma2_sum(
    model: &dyn Correlation,
    u: f64,
    a: f64,
    eps: f64,
    r: f64,
    log_horizon: f64,
    pickands_values: &[f64],
) -> Result<LemmaTerm> {
    ensure(u > 0.0 && a > 0.0 && eps > 0.0, || {
        format!("u, a and eps must be positive, got u={u}, a={a}, eps={eps}")
    })?;
    ensure(r >= 0.0, || format!("R must be nonnegative, got {r}"))?;
    ensure(log_horizon > 0.0, || {
        format!("T must exceed 1, got log T = {log_horizon}")
    })?;
    let alphas = model.alphas();
    let q = spacings(alphas, a, u);
    let log_m = tail_constant_m(u, alphas, pickands_values)?.log_m;
    let log_prefactor = log_m - q.iter().map(|v| v.ln()).sum::<f64>();
    let rho = r / log_horizon;
    let axes: Vec<Vec<i64>> = q
        .iter()
        .map(|&qi| {
            let top = (eps / qi).ceil() as i64 - 1;
            (-top..=top).collect()
        })
        .collect();
    let lattice_points = axes.iter().map(|a| a.len() as u128).product::<u128>() - 1;
    let part = lattice_sum(&axes, &q, |t, j| {
        if j.iter().all(|&v| v == 0) {
            return Ok(None);
        }
        let rt = model.correlation(t);
        if rt <= 0.0 {
            return Err(Error::Singular(format!(
                "r(t) = {rt} <= 0 at t = {t:?}; choose a smaller eps"
            )));
        }
        let v = lemma2_term(rt, u, rho)?;
        Ok(Some((v, v, true)))
    })?;
    let scale = log_prefactor.exp();
    Ok(LemmaTerm {
        u,
        sum: scale * part.near,
        max_term: part.max_term,
        near_sum: scale * part.near,
        far_sum: 0.0,
        log_prefactor,
        log_horizon,
        spacings: q,
        half_widths: vec![],
        lattice_points,
        evaluated_points: part.points,
        stride: 1,
    })
}

/// `(∏Tᵢ/∏qᵢ)·Σ` over `jq ∈ ∏[−Tᵢ,Tᵢ]` outside `(−ε,ε)^d` of the far-field
/// summand, with `log T = log maxᵢ Tᵢ` and the first `bounded_dims`
/// coordinates bounded.
///
/// Over budget, the near branch is still summed exactly and the far branch on
/// the sub-lattice of indices divisible by a stride `s`, each point weighted
/// by `s^d`; without `allow_stride` a budget error is returned instead.
#[allow(clippy::too_many_arguments)]
pub fn lemma3_sum(
    model: &dyn Correlation,
    u: f64,
    a: f64,
    eps: f64,
    half_widths: &[f64],
    r: f64,
    bounded_dims: usize,
    budget: u128,
    allow_stride: bool,
) -> Result<LemmaTerm> {
    let alphas = model.alphas();
    let d = alphas.len();
    ensure_len("half_widths", d, half_widths.len())?;
    ensure(u > 0.0 && a > 0.0 && eps > 0.0, || {
        format!("u, a and eps must be positive, got u={u}, a={a}, eps={eps}")
    })?;
    ensure(r >= 0.0, || format!("R must be nonnegative, got {r}"))?;
    ensure(bounded_dims < d, || {
        format!("bounded_dims = {bounded_dims} must be below d = {d}")
    })?;
    let t_max = half_widths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(
        half_widths.iter().all(|&t| t > 0.0 && t.is_finite()) && t_max > 1.0,
        || format!("half-widths must be positive with max above 1, got {half_widths:?}"),
    )?;
    let log_horizon = t_max.ln();
    let rho = r / log_horizon;
    let q = spacings(alphas, a, u);
    let log_prefactor = half_widths.iter().map(|t| t.ln()).sum::<f64>() - q.iter().map(|v| v.ln()).sum::<f64>();
    let tops: Vec<i64> = half_widths
        .iter()
        .zip(&q)
        .map(|(&t, &qi)| (t / qi * (1.0 + 1e-12)).floor() as i64)
        .collect();
    let lattice_points: u128 = tops.iter().map(|&j| (2 * j + 1) as u128).product();

    let is_near = |t: &[f64]| t[bounded_dims..].iter().all(|v| v.abs() < 1.0);
    let in_eps_box = |t: &[f64]| t.iter().all(|v| v.abs() < eps);
    let summand = |t: &[f64], near: bool| lemma3_term(model.correlation(t), u, rho, near);

    let (part, stride) = if lattice_points <= budget {
        let axes: Vec<Vec<i64>> = tops.iter().map(|&j| (-j..=j).collect()).collect();
        let part = lattice_sum(&axes, &q, |t, _| {
            if in_eps_box(t) {
                return Ok(None);
            }
            let near = is_near(t);
            let v = summand(t, near);
            Ok(Some((v, v, near)))
        })?;
        (part, 1usize)
    } else {
        if !allow_stride {
            return Err(Error::Budget {
                what: "far-field lemma lattice",
                required: lattice_points,
                budget,
            });
        }
        // Odd stride s = 2h+1: the far point ks stands for the indices
        // [ks-h, ks+h] clipped to the lattice. The exact zone is a union of
        // such cells covering the near branch and the eps box.
        let ratio = lattice_points as f64 / budget as f64;
        let mut s = ratio.powf(1.0 / d as f64).ceil().max(3.0) as i64;
        if s % 2 == 0 {
            s += 1;
        }
        let h = s / 2;
        let zone: Vec<i64> = tops
            .iter()
            .zip(&q)
            .enumerate()
            .map(|(i, (&j, &qi))| {
                if i < bounded_dims {
                    j
                } else {
                    let reach = (1.0 / qi).ceil().max((eps / qi).ceil()) as i64;
                    ((reach + s - 1) / s * s + h).min(j)
                }
            })
            .collect();
        let zone_points: u128 = zone.iter().map(|&z| (2 * z + 1) as u128).product();
        if zone_points > budget {
            return Err(Error::Budget {
                what: "exact zone of the far-field lemma lattice",
                required: zone_points,
                budget,
            });
        }
        let zone_axes: Vec<Vec<i64>> = zone.iter().map(|&z| (-z..=z).collect()).collect();
        let exact = lattice_sum(&zone_axes, &q, |t, _| {
            if in_eps_box(t) {
                return Ok(None);
            }
            let near = is_near(t);
            let v = summand(t, near);
            Ok(Some((v, v, near)))
        })?;
        let far_axes: Vec<Vec<i64>> = tops
            .iter()
            .map(|&j| {
                let kmax = (j + h) / s;
                (-kmax..=kmax).map(|k| k * s).collect()
            })
            .collect();
        let cell = |j: i64, top: i64| ((j + h).min(top) - (j - h).max(-top) + 1) as f64;
        let far = lattice_sum(&far_axes, &q, |t, j| {
            if j.iter().zip(&zone).all(|(&ji, &z)| ji.abs() <= z) {
                return Ok(None);
            }
            let weight: f64 = j.iter().zip(&tops).map(|(&ji, &top)| cell(ji, top)).product();
            let v = summand(t, false);
            Ok(Some((weight * v, v, false)))
        })?;
        (exact.merge(far), s as usize)
    };
    let scale = log_prefactor.exp();
    Ok(LemmaTerm {
        u,
        sum: scale * (part.near + part.far),
        max_term: part.max_term,
        near_sum: scale * part.near,
        far_sum: scale * part.far,
        log_prefactor,
        log_horizon,
        spacings: q,
        half_widths: half_widths.to_vec(),
        lattice_points,
        evaluated_points: part.points,
        stride,
    })
}

/// Inputs of the lemma-sum diagnostic over a threshold ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSumConfig {
    pub lemma: LemmaKind,
    pub alphas: Vec<f64>,
    pub u_values: Vec<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(rename = "R", default)]
    pub r: f64,
    #[serde(default)]
    pub pickands_values: Option<Vec<f64>>,
    #[serde(default)]
    pub log_horizon: LogHorizonRule,
    #[serde(default)]
    pub half_widths: HalfWidthRule,
    /// Plan supplying `mᵢ(u)`; the symmetric plan when absent.
    #[serde(default)]
    pub plan: Option<ScalingPlan>,
    #[serde(default)]
    pub bounded_dims: usize,
    #[serde(default = "default_lemma_budget")]
    pub budget: u64,
    #[serde(default = "default_true")]
    pub allow_stride: bool,
}

impl LemmaSumConfig {
    pub fn new(lemma: LemmaKind, alphas: Vec<f64>, u_values: Vec<f64>, r: f64) -> Self {
        Self {
            lemma,
            alphas,
            u_values,
            a: default_a(),
            eps: default_eps(),
            r,
            pickands_values: None,
            log_horizon: LogHorizonRule::default(),
            half_widths: HalfWidthRule::default(),
            plan: None,
            bounded_dims: 0,
            budget: default_lemma_budget(),
            allow_stride: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.alphas.is_empty(), || "alphas must not be empty".into())?;
        validate_alphas(&self.alphas)?;
        ensure(!self.u_values.is_empty(), || "u_values must not be empty".into())?;
        ensure(self.u_values.iter().all(|&u| u > 0.0 && u.is_finite()), || {
            format!("thresholds must be positive, got {:?}", self.u_values)
        })?;
        ensure(self.a > 0.0 && self.eps > 0.0, || {
            format!("a and eps must be positive, got a={}, eps={}", self.a, self.eps)
        })?;
        ensure(self.r >= 0.0 && self.r.is_finite(), || {
            format!("R must be nonnegative, got {}", self.r)
        })?;
        match &self.half_widths {
            HalfWidthRule::PlanScaled { tau } => ensure(*tau > 0.0, || format!("tau must be positive, got {tau}"))?,
            HalfWidthRule::Fixed { half_widths } => ensure_len("half_widths", self.alphas.len(), half_widths.len())?,
        }
        if let Some(plan) = &self.plan {
            plan.validate()?;
            ensure_len("plan dimension", self.alphas.len(), plan.dim())?;
        }
        resolve_pickands(&self.alphas, self.pickands_values.as_deref()).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaSumReport {
    pub lemma: LemmaKind,
    pub u_values: Vec<f64>,
    pub sum_values: Vec<f64>,
    pub terms: Vec<LemmaTerm>,
    pub eps: f64,
    pub a: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub flags: Vec<String>,
    pub verdict: Verdict,
    pub config_hash: String,
}

/// Evaluates the configured lemma sum at every threshold and judges whether
/// the sums strictly decrease.
pub fn lemma_sums(config: &LemmaSumConfig) -> Result<LemmaSumReport> {
    config.validate()?;
    let hs = resolve_pickands(&config.alphas, config.pickands_values.as_deref())?;
    let model = SeparableStable::new(config.alphas.clone())?;
    let plan = match &config.plan {
        Some(p) => p.clone(),
        None => ScalingPlan::symmetric(config.alphas.len())?,
    };
    let mut terms = Vec::new();
    let mut flags = Vec::new();
    for &u in &config.u_values {
        let term = match config.lemma {
            LemmaKind::Lemma2 => lemma2_sum(
                &model,
                u,
                config.a,
                config.eps,
                config.r,
                config.log_horizon.log_horizon(u),
                &hs,
            )?,
            LemmaKind::Lemma3 => {
                let t = match &config.half_widths {
                    HalfWidthRule::PlanScaled { tau } => plan
                        .evaluate_m_i(u, &config.alphas, &hs)?
                        .m_values
                        .iter()
                        .map(|m| tau * m)
                        .collect(),
                    HalfWidthRule::Fixed { half_widths } => half_widths.clone(),
                };
                lemma3_sum(
                    &model,
                    u,
                    config.a,
                    config.eps,
                    &t,
                    config.r,
                    config.bounded_dims,
                    config.budget as u128,
                    config.allow_stride,
                )?
            }
        };
        if term.strided() {
            flags.push(format!(
                "strided at u={u}: far branch evaluated every {} lattice steps and reweighted",
                term.stride
            ));
        }
        terms.push(term);
    }
    let sums: Vec<f64> = terms.iter().map(|t| t.sum).collect();
    let verdict = Verdict {
        rule: "sums nonnegative and strictly decreasing in u".into(),
        passed: sums.iter().all(|&s| s >= 0.0) && sums.windows(2).all(|w| w[1] < w[0]),
        detail: format!("{sums:?}"),
    };
    Ok(LemmaSumReport {
        lemma: config.lemma,
        u_values: config.u_values.clone(),
        sum_values: sums,
        terms,
        eps: config.eps,
        a: config.a,
        r: config.r,
        flags,
        verdict,
        config_hash: config_hash(config)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const H2: f64 = 0.564_189_583_547_756_3;

    #[test]
    fn lemma2_vanishes_without_long_range() {
        let model = SeparableStable::new(vec![2.0, 2.0]).unwrap();
        let t = lemma2_sum(&model, 3.0, 0.25, 0.25, 0.0, 2.25, &[H2, H2]).unwrap();
        assert_eq!(t.sum, 0.0);
        assert!(t.evaluated_points > 0);
    }

    #[test]
    fn lemma2_single_term_by_hand() {
        // d = 1, q = 0.25/3, eps just above q: lattice {-q, q}
        let model = SeparableStable::new(vec![2.0]).unwrap();
        let (u, r_cap, log_t) = (3.0_f64, 0.5, 2.25);
        let q = 0.25 / u;
        let t = lemma2_sum(&model, u, 0.25, 1.5 * q, r_cap, log_t, &[H2]).unwrap();
        assert_eq!(t.evaluated_points, 2);
        let r = (-q * q).exp();
        let rho = r_cap / log_t;
        let s = r + (1.0 - r) * rho;
        let hand = (1.0 - r) * rho * (1.0 - s * s).powf(-0.5) * (-u * u / (1.0 + s)).exp();
        assert!((t.max_term - hand).abs() <= 1e-12 * hand);
        let m = tail_constant_m(u, &[2.0], &[H2]).unwrap().m;
        assert!((t.sum - 2.0 * hand * m / q).abs() <= 1e-12 * t.sum);
    }

    #[test]
    fn lemma2_reports_singular_terms() {
        assert!(matches!(lemma2_term(0.9, 3.0, 1.5), Err(Error::Singular(_))));
    }

    #[test]
    fn lemma3_branches() {
        assert_eq!(lemma3_weights(0.3, 0.1, true).0, 1.0);
        assert_eq!(lemma3_weights(0.3, 0.1, false), ((0.3_f64 - 0.1).abs(), 0.1));
        assert!((lemma3_weights(0.3, 0.1, true).1 - (0.3 + 0.7 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn lemma3_stride_tracks_exact_sum() {
        let model = SeparableStable::new(vec![2.0, 2.0]).unwrap();
        let tw = [8.0, 12.0];
        let exact = lemma3_sum(&model, 3.0, 0.25, 0.25, &tw, 0.0, 0, 1 << 24, true).unwrap();
        assert_eq!(exact.stride, 1);
        let strided = lemma3_sum(&model, 3.0, 0.25, 0.25, &tw, 0.0, 0, 4000, true).unwrap();
        assert!(strided.stride > 1);
        assert!((strided.near_sum - exact.near_sum).abs() <= 1e-12 * exact.near_sum);
        assert!(
            (strided.far_sum / exact.far_sum - 1.0).abs() < 0.1,
            "{} {}",
            strided.far_sum,
            exact.far_sum
        );
        assert!(lemma3_sum(&model, 3.0, 0.25, 0.25, &tw, 0.0, 0, 4000, false).is_err());
    }

    #[test]
    fn lemma_sums_are_nonnegative() {
        let mut cfg = LemmaSumConfig::new(LemmaKind::Lemma3, vec![2.0, 2.0], vec![2.0, 2.5], 0.5);
        cfg.budget = 1 << 16;
        let rep = lemma_sums(&cfg).unwrap();
        assert!(rep.sum_values.iter().all(|&s| s >= 0.0));
        cfg.lemma = LemmaKind::Lemma2;
        let rep = lemma_sums(&cfg).unwrap();
        assert!(rep.sum_values.iter().all(|&s| s > 0.0));
    }
}
