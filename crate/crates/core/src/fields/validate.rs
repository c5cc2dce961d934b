use serde::Serialize;

use super::Correlation;
use crate::error::{ensure, Result};

/// Points per simplex edge used to generate sampling directions.
const SIMPLEX_STEPS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A1Report {
    pub radii: Vec<f64>,
    /// `sup |1 − r(t) − s(t)| / s(t)` with `s(t) = Σ|tᵢ|^{αᵢ}` at each radius.
    pub sup_ratios: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct A3Report {
    pub radii: Vec<f64>,
    pub long_range_constant: f64,
    /// `max |r(t)·log‖t‖ − R|` over sampled directions at each radius.
    pub deviations: Vec<f64>,
    pub passed: bool,
}

/// Weight vectors on the simplex `{w ≥ 0, Σw = 1}` with denominators
/// `SIMPLEX_STEPS`.
fn simplex_weights(d: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / SIMPLEX_STEPS as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(d, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, SIMPLEX_STEPS, &mut Vec::new(), &mut out);
    out
}

/// All sign patterns of `v` (without duplicates for zero entries).
fn sign_patterns(v: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![v.to_vec()];
    for i in 0..v.len() {
        if v[i] != 0.0 {
            let flipped: Vec<Vec<f64>> = out
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    q[i] = -q[i];
                    q
                })
                .collect();
            out.extend(flipped);
        }
    }
    out
}

/// Checks the local condition `r(t) = 1 − Σ|tᵢ|^{αᵢ} + o(Σ|tᵢ|^{αᵢ})` at
/// radii `radius`, `radius/2`, `radius/4`.
///
/// Passes when every halving strictly lowers the sup ratio or brings it to
/// at most `tolerance`.
pub fn verify_a1<C: Correlation + ?Sized>(model: &C, radius: f64, tolerance: f64) -> Result<A1Report> {
    ensure(radius > 0.0 && radius.is_finite(), || {
        format!("radius must be positive, got {radius}")
    })?;
    let alphas = model.alphas();
    let weights = simplex_weights(model.dim());
    let radii = vec![radius, radius / 2.0, radius / 4.0];
    let sup_ratios: Vec<f64> = radii
        .iter()
        .map(|&rad| {
            let mut sup: f64 = 0.0;
            for w in &weights {
                for frac in [1.0, 0.5, 0.25] {
                    let s = rad * frac;
                    let t: Vec<f64> = w.iter().zip(alphas).map(|(wi, a)| (wi * s).powf(1.0 / a)).collect();
                    for tt in sign_patterns(&t) {
                        let ratio = (1.0 - model.correlation(&tt) - s).abs() / s;
                        sup = sup.max(ratio);
                    }
                }
            }
            sup
        })
        .collect();
    let passed = sup_ratios.windows(2).all(|w| w[1] < w[0] || w[1] <= tolerance);
    Ok(A1Report {
        radii,
        sup_ratios,
        tolerance,
        passed,
    })
}

/// Checks the long-range condition `r(t)·log‖t‖ → R` along increasing
/// radii. Passes when the deviation never grows and ends below where it
/// started (or at zero).
pub fn verify_a3<C: Correlation + ?Sized>(model: &C, radii: &[f64]) -> Result<A3Report> {
    ensure(radii.len() >= 2, || "need at least two radii".into())?;
    ensure(radii[0] >= std::f64::consts::E, || {
        format!("radii must be at least e, got {}", radii[0])
    })?;
    ensure(radii.windows(2).all(|w| w[0] < w[1]), || "radii must increase".into())?;
    let r_const = model.long_range_constant();
    let directions: Vec<Vec<f64>> = simplex_weights(model.dim())
        .iter()
        .flat_map(|w| {
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            sign_patterns(&w.iter().map(|x| x / norm).collect::<Vec<_>>())
        })
        .collect();
    let deviations: Vec<f64> = radii
        .iter()
        .map(|&rad| {
            directions
                .iter()
                .map(|dir| {
                    let t: Vec<f64> = dir.iter().map(|x| x * rad).collect();
                    (model.correlation(&t) * rad.ln() - r_const).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let first = deviations[0];
    let last = *deviations.last().unwrap();
    let passed = deviations.windows(2).all(|w| w[1] <= w[0]) && (last < first || last == 0.0);
    Ok(A3Report {
        radii: radii.to_vec(),
        long_range_constant: r_const,
        deviations,
        passed,
    })
}
