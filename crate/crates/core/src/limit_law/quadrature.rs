//! Gauss–Hermite rules for expectations over a standard normal variable.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights with `Σ wᵢ f(xᵢ) ≈ E f(W)`, `W ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule for the probabilists' weight `φ(x)`.
    ///
    /// Nodes come from the Golub–Welsch eigenproblem and are polished by
    /// Newton steps on the orthonormal Hermite recurrence; weights use the
    /// Christoffel formula `1 / Σ_k p_k(x)²`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (pn, pn1, _) = orthonormal_hermite(n, *x);
                let deriv = (n as f64).sqrt() * pn1;
                if deriv != 0.0 {
                    *x -= pn / deriv;
                }
            }
            let (_, _, sum_sq) = orthonormal_hermite(n, *x);
            weights.push(1.0 / sum_sq);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Returns `(p_n(x), p_{n-1}(x), Σ_{k<n} p_k(x)²)` for the Hermite polynomials
/// orthonormal under the standard normal density.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_normal_moments() {
        let rule = GaussHermite::new(32);
        assert!((rule.expect(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(rule.expect(|x| x).abs() < 1e-14);
        assert!((rule.expect(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((rule.expect(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        // E x^10 = 9!! = 945
        assert!((rule.expect(|x| x.powi(10)) - 945.0).abs() < 1e-9);
    }

    #[test]
    fn integrates_lognormal_mean() {
        // E exp(s W) = exp(s²/2)
        let rule = GaussHermite::new(64);
        for &s in &[0.5, 1.0, 2.0, 2.8] {
            let got = rule.expect(|x| (s * x).exp());
            let want = (0.5 * s * s).exp();
            assert!((got - want).abs() / want < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn nodes_are_symmetric() {
        let rule = GaussHermite::new(64);
        for i in 0..32 {
            assert!((rule.nodes[i] + rule.nodes[63 - i]).abs() < 1e-12);
            assert!((rule.weights[i] - rule.weights[63 - i]).abs() <= 1e-14 * rule.weights[i].max(1e-300));
        }
    }
}
