//! One-dimensional circulant embedding of a stationary covariance.
//!
//! A covariance sequence `c(0), c(1), …` on `n` equally spaced points is
//! embedded in a symmetric circulant matrix of even size `M >= 2(n - 1)`. When
//! the circulant's eigenvalues are nonnegative, a real Gaussian vector with
//! exactly the target covariance is obtained from `M` independent standard
//! normals and one FFT (Davies–Harte construction with Hermitian symmetry).

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Negative eigenvalues within this fraction of the largest one are clipped.
pub const CLIP_TOLERANCE: f64 = 1e-9;
/// Padding doublings tried before giving up.
pub const MAX_ATTEMPTS: usize = 4;

pub struct CirculantEmbedding {
    len: usize,
    size: usize,
    /// Per-frequency amplitudes `√(λ_k / M)` (halved in variance for paired
    /// frequencies, see `apply`).
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    clipped_mass: f64,
    min_eigenvalue: f64,
}

impl std::fmt::Debug for CirculantEmbedding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantEmbedding")
            .field("len", &self.len)
            .field("size", &self.size)
            .field("clipped_mass", &self.clipped_mass)
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl CirculantEmbedding {
    /// Embeds `autocov(k)`, `k = 0, 1, …`, for `len` output points, doubling
    /// the padding on failure.
    pub fn new(len: usize, autocov: impl Fn(usize) -> f64) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("circulant embedding of an empty grid"));
        }
        let mut planner = FftPlanner::new();
        let base = (2 * len.saturating_sub(1)).max(2);
        let mut worst = (0.0, 0.0);
        for attempt in 0..MAX_ATTEMPTS {
            let size = fast_even_size(base << attempt);
            let fft = planner.plan_fft_forward(size);
            let mut row: Vec<Complex<f64>> = (0..size).map(|j| Complex::new(autocov(j.min(size - j)), 0.0)).collect();
            fft.process(&mut row);
            let max = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
            let min = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
            if min < -CLIP_TOLERANCE * max {
                worst = (min, max);
                continue;
            }
            let mut clipped_mass = 0.0;
            let amplitudes = row
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let lambda = if c.re < 0.0 {
                        clipped_mass += -c.re;
                        0.0
                    } else {
                        c.re
                    };
                    let paired = k != 0 && 2 * k != size;
                    let var = if paired {
                        lambda / (2.0 * size as f64)
                    } else {
                        lambda / size as f64
                    };
                    var.sqrt()
                })
                .collect();
            return Ok(Self {
                len,
                size,
                amplitudes,
                fft,
                clipped_mass,
                min_eigenvalue: min,
            });
        }
        Err(Error::Embedding {
            attempts: MAX_ATTEMPTS,
            min_eigenvalue: worst.0,
            max_eigenvalue: worst.1,
        })
    }

    /// Number of output points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of standard normals consumed per sample (the embedding size).
    pub fn input_len(&self) -> usize {
        self.size
    }

    /// Total magnitude of clipped negative eigenvalues.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Maps `input_len()` independent standard normals to one sample of
    /// `len()` points. The map is linear, so its implied covariance can be
    /// checked by applying it to unit vectors.
    pub fn apply(&self, normals: &[f64], out: &mut [f64], scratch: &mut Vec<Complex<f64>>) {
        debug_assert_eq!(normals.len(), self.size);
        debug_assert!(out.len() >= self.len);
        let m = self.size;
        let half = m / 2;
        scratch.clear();
        scratch.resize(m, Complex::new(0.0, 0.0));
        scratch[0] = Complex::new(self.amplitudes[0] * normals[0], 0.0);
        scratch[half] = Complex::new(self.amplitudes[half] * normals[1], 0.0);
        for k in 1..half {
            let a = self.amplitudes[k];
            let w = Complex::new(a * normals[2 * k], a * normals[2 * k + 1]);
            scratch[k] = w;
            scratch[m - k] = w.conj();
        }
        self.fft.process(scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()).take(self.len) {
            *o = c.re;
        }
    }

    /// Draws one sample.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        out: &mut [f64],
        normals: &mut Vec<f64>,
        scratch: &mut Vec<Complex<f64>>,
    ) {
        normals.clear();
        normals.extend((0..self.size).map(|_| rng.sample::<f64, _>(StandardNormal)));
        self.apply(normals, out, scratch);
    }
}

/// Smallest even size `>= n` whose prime factors are 2, 3 and 5.
pub(crate) fn fast_even_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m.is_multiple_of(2) {
            let mut r = m;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn implied_covariance(emb: &CirculantEmbedding) -> Vec<f64> {
        let n = emb.len();
        let mut cov = vec![0.0; n * n];
        let mut unit = vec![0.0; emb.input_len()];
        let mut col = vec![0.0; n];
        let mut scratch = Vec::new();
        for i in 0..emb.input_len() {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[i] = 1.0;
            emb.apply(&unit, &mut col, &mut scratch);
            for a in 0..n {
                for b in 0..n {
                    cov[a * n + b] += col[a] * col[b];
                }
            }
        }
        cov
    }

    #[test]
    fn reproduces_exponential_covariance_exactly() {
        let q = 0.3;
        let emb = CirculantEmbedding::new(12, |k| (-(k as f64) * q).exp()).unwrap();
        let cov = implied_covariance(&emb);
        for a in 0..12 {
            for b in 0..12 {
                let want = (-((a as f64 - b as f64).abs()) * q).exp();
                assert!((cov[a * 12 + b] - want).abs() < 1e-12);
            }
        }
        assert_eq!(emb.clipped_mass(), 0.0);
    }

    #[test]
    fn gaussian_covariance_clips_roundoff_only() {
        let q = 0.07;
        let emb = CirculantEmbedding::new(400, |k| (-(k as f64 * q).powi(2)).exp()).unwrap();
        assert!(emb.clipped_mass() < 1e-9);
    }

    #[test]
    fn rejects_non_definite_sequence() {
        // A "covariance" with |c(1)| > c(0) has no embedding at any padding.
        let err = CirculantEmbedding::new(8, |k| {
            if k == 1 {
                1.5
            } else if k == 0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Embedding {
                attempts: MAX_ATTEMPTS,
                ..
            }
        ));
    }

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_even_size(7), 8);
        assert_eq!(fast_even_size(14), 16);
        assert_eq!(fast_even_size(1442), 1458);
    }
}
