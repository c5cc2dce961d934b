//! Standard normal tail, density and log-tail.
//!
//! `Ψ(u) = P(W > u)` is evaluated through the complementary error function.
//! Above `u = 6` the exponentially scaled form `erfcx` is used instead, so the
//! logarithm of the tail stays accurate far beyond the point where `Ψ(u)`
//! itself underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

const SCALED_FROM: f64 = 6.0;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `Ψ(u) = P(W > u)` for a standard normal `W`.
pub fn normal_tail(u: f64) -> f64 {
    if u > SCALED_FROM {
        0.5 * erfcx(u * FRAC_1_SQRT_2) * (-0.5 * u * u).exp()
    } else {
        0.5 * erfc(u * FRAC_1_SQRT_2)
    }
}

/// `Φ(u) = P(W <= u)`.
pub fn normal_cdf(u: f64) -> f64 {
    normal_tail(-u)
}

/// `log Ψ(u)`, finite for every finite `u`.
pub fn log_normal_tail(u: f64) -> f64 {
    if u > SCALED_FROM {
        (0.5 * erfcx(u * FRAC_1_SQRT_2)).ln() - 0.5 * u * u
    } else {
        normal_tail(u).ln()
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Uses the Laplace continued fraction for `x >= 4`, where 60 terms give full
/// double precision, and the unscaled `erfc` below that.
pub fn erfcx(x: f64) -> f64 {
    if x < 4.0 {
        return (x * x).exp() * erfc(x);
    }
    let mut f = x;
    for n in (1..=60).rev() {
        f = x + 0.5 * f64::from(n) / f;
    }
    FRAC_1_SQRT_PI / f
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of the density over `[u, u + 15]`,
    /// used as an independent oracle for the tail.
    fn simpson_tail(u: f64) -> f64 {
        let lo = u.max(-15.0);
        let hi = u.max(0.0) + 15.0;
        let n = 60_000;
        let h = (hi - lo) / n as f64;
        let mut acc = normal_pdf(lo) + normal_pdf(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * normal_pdf(lo + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn tail_at_zero_is_one_half() {
        assert_eq!(normal_tail(0.0), 0.5);
    }

    #[test]
    fn tail_matches_quadrature_oracle() {
        // Oracle value at 1.96: 0.024997895148220435
        let oracle = simpson_tail(1.96);
        assert!((oracle - 0.024997895148220435).abs() < 1e-13);
        assert!((normal_tail(1.96) - 0.024998).abs() < 1e-6);
        for &u in &[-3.0, -1.0, 0.5, 1.0, 2.5, 4.0, 5.9] {
            let rel = (normal_tail(u) - simpson_tail(u)).abs() / simpson_tail(u);
            assert!(rel < 1e-12, "u = {u}: rel err {rel:e}");
        }
    }

    #[test]
    fn scaled_branch_is_continuous_and_accurate() {
        for &u in &[6.0, 6.5, 7.0, 8.0] {
            let direct = 0.5 * erfc(u * FRAC_1_SQRT_2);
            let rel = (normal_tail(u) - direct).abs() / direct;
            assert!(rel < 1e-12, "u = {u}: rel err {rel:e}");
        }
        let below = normal_tail(6.0 - 1e-12);
        let above = normal_tail(6.0 + 1e-12);
        assert!((below - above).abs() / below < 1e-9);
    }

    #[test]
    fn lower_tail_is_close_to_one() {
        assert!(normal_tail(-8.0) > 0.999_999);
        assert!((normal_cdf(1.0) + normal_tail(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_tail_survives_underflow() {
        // Mills-ratio expansion: log Ψ(u) ≈ -u²/2 - log(u√(2π)) - 1/u²
        let u = 200.0;
        let approx = -0.5 * u * u - (u * (2.0 * PI).sqrt()).ln() - 1.0 / (u * u);
        assert!(normal_tail(u) == 0.0);
        assert!((log_normal_tail(u) - approx).abs() < 1e-6);
    }

    #[test]
    fn erfcx_branches_agree_at_switch() {
        let x = 4.0;
        let cf = {
            let mut f = x;
            for n in (1..=60).rev() {
                f = x + 0.5 * f64::from(n) / f;
            }
            FRAC_1_SQRT_PI / f
        };
        assert!((cf - (x * x).exp() * erfc(x)).abs() / cf < 1e-13);
    }
}
