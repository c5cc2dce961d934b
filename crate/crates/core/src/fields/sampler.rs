use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Correlation, CorrelationModel, MixtureModel, SeparableStable};
use crate::embedding::{fast_even_size, CirculantEmbedding, CLIP_TOLERANCE, MAX_ATTEMPTS};
use crate::error::{ensure_len, Error, Result};
use crate::geometry::{GridSpec, GRID_BUDGET};

/// Axes longer than this use circulant embedding instead of a dense
/// eigendecomposition.
pub const DENSE_AXIS_LIMIT: usize = 1024;
/// Eigenvalues below this fraction of the largest are dropped from a dense
/// factor.
const EIGEN_FLOOR: f64 = 1e-14;
/// Negative eigenvalues beyond this fraction of the largest reject a dense
/// factorization.
const NEGATIVE_TOLERANCE: f64 = 1e-8;

/// A linear map `L` from `input_len()` standard normals to `output_len()`
/// correlated values with `L Lᵀ` equal to a one-dimensional Toeplitz
/// covariance.
#[derive(Debug)]
pub enum AxisFactor {
    Dense {
        n: usize,
        rank: usize,
        /// `n × rank`, row-major.
        matrix: Vec<f64>,
        clipped_mass: f64,
    },
    Circulant(CirculantEmbedding),
}

impl AxisFactor {
    /// Scaled eigenvectors of the `n × n` Toeplitz matrix `autocov(|i − j|)`.
    pub fn dense(n: usize, autocov: impl Fn(usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("covariance factor of an empty axis"));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| autocov(i.abs_diff(j)));
        let eig = SymmetricEigen::new(cov);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if max.is_nan() || max <= 0.0 || min < -NEGATIVE_TOLERANCE * max {
            return Err(Error::Factorization(format!(
                "{n}-point axis covariance has eigenvalues in [{min:e}, {max:e}]"
            )));
        }
        let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > EIGEN_FLOOR * max).collect();
        let clipped_mass = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
        let rank = keep.len();
        let mut matrix = vec![0.0; n * rank];
        for (c, &k) in keep.iter().enumerate() {
            let s = eig.eigenvalues[k].sqrt();
            for i in 0..n {
                matrix[i * rank + c] = eig.eigenvectors[(i, k)] * s;
            }
        }
        Ok(AxisFactor::Dense {
            n,
            rank,
            matrix,
            clipped_mass,
        })
    }

    pub fn circulant(n: usize, autocov: impl Fn(usize) -> f64) -> Result<Self> {
        CirculantEmbedding::new(n, autocov).map(AxisFactor::Circulant)
    }

    /// Dense up to [`DENSE_AXIS_LIMIT`] points, circulant beyond.
    pub fn auto(n: usize, autocov: impl Fn(usize) -> f64) -> Result<Self> {
        if n <= DENSE_AXIS_LIMIT {
            Self::dense(n, autocov)
        } else {
            Self::circulant(n, autocov)
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            AxisFactor::Dense { n, .. } => *n,
            AxisFactor::Circulant(e) => e.len(),
        }
    }

    pub fn input_len(&self) -> usize {
        match self {
            AxisFactor::Dense { rank, .. } => *rank,
            AxisFactor::Circulant(e) => e.input_len(),
        }
    }

    pub fn clipped_mass(&self) -> f64 {
        match self {
            AxisFactor::Dense { clipped_mass, .. } => *clipped_mass,
            AxisFactor::Circulant(e) => e.clipped_mass(),
        }
    }

    /// The map as an explicit `output_len × input_len` row-major matrix.
    pub fn matrix(&self) -> Vec<f64> {
        match self {
            AxisFactor::Dense { matrix, .. } => matrix.clone(),
            AxisFactor::Circulant(e) => {
                let (n, m) = (e.len(), e.input_len());
                let mut out = vec![0.0; n * m];
                let mut unit = vec![0.0; m];
                let mut col = vec![0.0; n];
                let mut scratch = Vec::new();
                for j in 0..m {
                    unit[j] = 1.0;
                    e.apply(&unit, &mut col, &mut scratch);
                    unit[j] = 0.0;
                    for i in 0..n {
                        out[i * m + j] = col[i];
                    }
                }
                out
            }
        }
    }

    /// `L Lᵀ`, row-major.
    pub fn implied_covariance(&self) -> Vec<f64> {
        let (n, m) = (self.output_len(), self.input_len());
        let l = self.matrix();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..m).map(|k| l[i * m + k] * l[j * m + k]).sum();
            }
        }
        out
    }
}

/// Reusable buffers for one worker.
#[derive(Default)]
pub struct SamplerScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    block: Vec<f64>,
    line_in: Vec<f64>,
    line_out: Vec<f64>,
    complex: Vec<Complex<f64>>,
}

/// Applies `factor` along `axis` of the row-major array `input` with shape
/// `shape`; `shape[axis]` must equal `factor.input_len()`.
#[allow(clippy::too_many_arguments)]
fn apply_axis(
    factor: &AxisFactor,
    input: &[f64],
    shape: &[usize],
    axis: usize,
    out: &mut Vec<f64>,
    line_in: &mut Vec<f64>,
    line_out: &mut Vec<f64>,
    complex: &mut Vec<Complex<f64>>,
) {
    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let m = factor.input_len();
    let n = factor.output_len();
    debug_assert_eq!(shape[axis], m);
    out.clear();
    out.resize(pre * n * post, 0.0);
    match factor {
        // Last axis: one `pre × m` by `m × n` product against the transpose.
        AxisFactor::Dense { matrix, .. } if post == 1 => {
            // SAFETY: input is pre×m, matrix is n×m read as its m×n
            // transpose, out is pre×n; all row-major.
            unsafe {
                matrixmultiply::dgemm(
                    pre,
                    m,
                    n,
                    1.0,
                    input.as_ptr(),
                    m as isize,
                    1,
                    matrix.as_ptr(),
                    1,
                    m as isize,
                    0.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        AxisFactor::Dense { matrix, .. } => {
            for p in 0..pre {
                let b = &input[p * m * post..(p + 1) * m * post];
                let c = &mut out[p * n * post..(p + 1) * n * post];
                // SAFETY: the slices cover exactly n×m, m×post and n×post
                // row-major blocks with the strides passed below.
                unsafe {
                    matrixmultiply::dgemm(
                        n,
                        m,
                        post,
                        1.0,
                        matrix.as_ptr(),
                        m as isize,
                        1,
                        b.as_ptr(),
                        post as isize,
                        1,
                        0.0,
                        c.as_mut_ptr(),
                        post as isize,
                        1,
                    );
                }
            }
        }
        AxisFactor::Circulant(e) => {
            line_in.resize(m, 0.0);
            line_out.resize(n, 0.0);
            for p in 0..pre {
                for s in 0..post {
                    for j in 0..m {
                        line_in[j] = input[(p * m + j) * post + s];
                    }
                    e.apply(line_in, line_out, complex);
                    for i in 0..n {
                        out[(p * n + i) * post + s] = line_out[i];
                    }
                }
            }
        }
    }
}

/// Kronecker-product sampler for a separable correlation on a lattice.
#[derive(Debug)]
pub struct SeparableSampler {
    factors: Vec<Arc<AxisFactor>>,
}

impl SeparableSampler {
    pub fn new(model: &SeparableStable, grid: &GridSpec) -> Result<Self> {
        ensure_len("grid vs model dimension", model.dim(), grid.dim())?;
        let factors = grid
            .axes
            .iter()
            .enumerate()
            .map(|(i, ax)| {
                let q = ax.spacing;
                AxisFactor::auto(ax.count, |lag| model.axis_correlation(i, lag as f64 * q)).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }

    fn from_factors(factors: Vec<Arc<AxisFactor>>) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &[Arc<AxisFactor>] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.iter().map(|f| f.output_len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Covariance between flat indices `a` and `b` implied by the factors.
    pub fn implied_covariance(&self, a: usize, b: usize) -> f64 {
        let covs: Vec<(usize, Vec<f64>)> = self
            .factors
            .iter()
            .map(|f| (f.output_len(), f.implied_covariance()))
            .collect();
        let (mut a, mut b) = (a, b);
        let mut value = 1.0;
        for (n, cov) in covs.iter().rev() {
            value *= cov[(a % n) * n + b % n];
            a /= n;
            b /= n;
        }
        value
    }

    /// Draws one sample into `out`; the result is also left in `scratch.a`.
    fn sample_scratch<R: Rng + ?Sized>(&self, rng: &mut R, scratch: &mut SamplerScratch) {
        let mut shape: Vec<usize> = self.factors.iter().map(|f| f.input_len()).collect();
        let total: usize = shape.iter().product();
        scratch.a.clear();
        scratch
            .a
            .extend((0..total).map(|_| rng.sample::<f64, _>(StandardNormal)));
        for (axis, f) in self.factors.iter().enumerate() {
            apply_axis(
                f,
                &scratch.a,
                &shape,
                axis,
                &mut scratch.b,
                &mut scratch.line_in,
                &mut scratch.line_out,
                &mut scratch.complex,
            );
            shape[axis] = f.output_len();
            std::mem::swap(&mut scratch.a, &mut scratch.b);
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut SamplerScratch) {
        self.sample_scratch(rng, scratch);
        out.copy_from_slice(&scratch.a);
    }
}

/// Independent base-field copies on blocks plus one shared normal.
#[derive(Debug)]
pub struct MixtureSampler {
    dims: Vec<usize>,
    /// Per axis: `(first grid index, run length, factor)` for each block.
    runs: Vec<Vec<(usize, usize, Arc<AxisFactor>)>>,
    rho: f64,
}

impl MixtureSampler {
    pub fn new(model: &MixtureModel, grid: &GridSpec) -> Result<Self> {
        ensure_len("grid vs model dimension", model.dim(), grid.dim())?;
        let mut cache: BTreeMap<(usize, usize), Arc<AxisFactor>> = BTreeMap::new();
        let mut runs = Vec::with_capacity(grid.dim());
        for (i, ax) in grid.axes.iter().enumerate() {
            let mut bounds: Vec<(usize, usize)> = Vec::new();
            if i < model.bounded_dims() {
                bounds.push((0, ax.count));
            } else {
                let mut start = 0;
                for j in 1..=ax.count {
                    if j == ax.count || model.block_of(ax.coordinate(j)) != model.block_of(ax.coordinate(start)) {
                        bounds.push((start, j - start));
                        start = j;
                    }
                }
            }
            let mut axis_runs = Vec::with_capacity(bounds.len());
            for (start, len) in bounds {
                let factor = match cache.get(&(i, len)) {
                    Some(f) => f.clone(),
                    None => {
                        let q = ax.spacing;
                        let base = model.base();
                        let f = Arc::new(AxisFactor::auto(len, |lag| base.axis_correlation(i, lag as f64 * q))?);
                        cache.insert((i, len), f.clone());
                        f
                    }
                };
                axis_runs.push((start, len, factor));
            }
            runs.push(axis_runs);
        }
        Ok(Self {
            dims: grid.dims(),
            runs,
            rho: model.rho(),
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_count(&self) -> usize {
        self.runs.iter().map(Vec::len).product()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut SamplerScratch) {
        let d = self.dims.len();
        let scale = (1.0 - self.rho).sqrt();
        let mut strides = vec![1usize; d];
        for i in (0..d - 1).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        let mut which = vec![0usize; d];
        'blocks: loop {
            let factors: Vec<Arc<AxisFactor>> = (0..d).map(|i| self.runs[i][which[i]].2.clone()).collect();
            let sub = SeparableSampler::from_factors(factors);
            sub.sample_scratch(rng, scratch);
            std::mem::swap(&mut scratch.a, &mut scratch.block);
            let lens: Vec<usize> = (0..d).map(|i| self.runs[i][which[i]].1).collect();
            let starts: Vec<usize> = (0..d).map(|i| self.runs[i][which[i]].0).collect();
            let mut idx = vec![0usize; d];
            for &v in scratch.block.iter() {
                let flat: usize = (0..d).map(|i| (starts[i] + idx[i]) * strides[i]).sum();
                out[flat] = scale * v;
                for i in (0..d).rev() {
                    idx[i] += 1;
                    if idx[i] < lens[i] {
                        break;
                    }
                    idx[i] = 0;
                }
            }
            for i in (0..d).rev() {
                which[i] += 1;
                if which[i] < self.runs[i].len() {
                    continue 'blocks;
                }
                which[i] = 0;
            }
            break;
        }
        let w: f64 = rng.sample(StandardNormal);
        let shift = self.rho.sqrt() * w;
        for v in out.iter_mut() {
            *v += shift;
        }
    }
}

/// `d`-dimensional circulant embedding for an arbitrary stationary
/// correlation.
pub struct StationarySampler {
    dims: Vec<usize>,
    sizes: Vec<usize>,
    amplitudes: Vec<f64>,
    ffts: Vec<Arc<dyn Fft<f64>>>,
    clipped_mass: f64,
}

impl std::fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StationarySampler")
            .field("dims", &self.dims)
            .field("sizes", &self.sizes)
            .field("clipped_mass", &self.clipped_mass)
            .finish()
    }
}

fn fft_along_axes(
    data: &mut [Complex<f64>],
    sizes: &[usize],
    ffts: &[Arc<dyn Fft<f64>>],
    line: &mut Vec<Complex<f64>>,
) {
    for (axis, fft) in ffts.iter().enumerate() {
        let m = sizes[axis];
        let pre: usize = sizes[..axis].iter().product();
        let post: usize = sizes[axis + 1..].iter().product();
        line.resize(m, Complex::new(0.0, 0.0));
        for p in 0..pre {
            for s in 0..post {
                for j in 0..m {
                    line[j] = data[(p * m + j) * post + s];
                }
                fft.process(line);
                for j in 0..m {
                    data[(p * m + j) * post + s] = line[j];
                }
            }
        }
    }
}

impl StationarySampler {
    pub fn new<C: Correlation + ?Sized>(model: &C, grid: &GridSpec) -> Result<Self> {
        ensure_len("grid vs model dimension", model.dim(), grid.dim())?;
        let dims = grid.dims();
        let spacings = grid.spacings();
        let d = dims.len();
        let mut planner = FftPlanner::new();
        let mut worst = (0.0, 0.0);
        for attempt in 0..MAX_ATTEMPTS {
            let sizes: Vec<usize> = dims
                .iter()
                .map(|&n| fast_even_size((2 * n.saturating_sub(1)).max(2) << attempt))
                .collect();
            let total: usize = sizes.iter().product();
            if total as u128 > 4 * GRID_BUDGET {
                return Err(Error::Budget {
                    what: "circulant embedding",
                    required: total as u128,
                    budget: 4 * GRID_BUDGET,
                });
            }
            let ffts: Vec<Arc<dyn Fft<f64>>> = sizes.iter().map(|&m| planner.plan_fft_forward(m)).collect();
            let mut data = vec![Complex::new(0.0, 0.0); total];
            let mut lag = vec![0.0; d];
            for (flat, slot) in data.iter_mut().enumerate() {
                let mut rest = flat;
                for i in (0..d).rev() {
                    let k = rest % sizes[i];
                    rest /= sizes[i];
                    let signed = if 2 * k <= sizes[i] {
                        k as f64
                    } else {
                        k as f64 - sizes[i] as f64
                    };
                    lag[i] = signed * spacings[i];
                }
                *slot = Complex::new(model.correlation(&lag), 0.0);
            }
            fft_along_axes(&mut data, &sizes, &ffts, &mut Vec::new());
            let max = data.iter().map(|c| c.re).fold(f64::MIN, f64::max);
            let min = data.iter().map(|c| c.re).fold(f64::MAX, f64::min);
            if min < -CLIP_TOLERANCE * max {
                worst = (min, max);
                continue;
            }
            let mut clipped_mass = 0.0;
            let amplitudes = data
                .iter()
                .map(|c| {
                    if c.re < 0.0 {
                        clipped_mass += -c.re;
                        0.0
                    } else {
                        (c.re / total as f64).sqrt()
                    }
                })
                .collect();
            return Ok(Self {
                dims,
                sizes,
                amplitudes,
                ffts,
                clipped_mass,
            });
        }
        Err(Error::Embedding {
            attempts: MAX_ATTEMPTS,
            min_eigenvalue: worst.0,
            max_eigenvalue: worst.1,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut SamplerScratch) {
        let mut data: Vec<Complex<f64>> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * re, a * im)
            })
            .collect();
        fft_along_axes(&mut data, &self.sizes, &self.ffts, &mut scratch.complex);
        let d = self.dims.len();
        for (flat, o) in out.iter_mut().enumerate() {
            let mut rest = flat;
            let mut src = 0;
            let mut stride = 1;
            for i in (0..d).rev() {
                let k = rest % self.dims[i];
                rest /= self.dims[i];
                src += k * stride;
                stride *= self.sizes[i];
            }
            *o = data[src].re;
        }
    }
}

/// Exact sampler for a model on a lattice.
#[derive(Debug)]
pub enum FieldSampler {
    Separable(SeparableSampler),
    Mixture(MixtureSampler),
    Stationary(StationarySampler),
}

impl FieldSampler {
    pub fn new(model: &CorrelationModel, grid: &GridSpec) -> Result<Self> {
        model.validate()?;
        check_budget(grid)?;
        match model {
            CorrelationModel::SeparableStable(m) => SeparableSampler::new(m, grid).map(FieldSampler::Separable),
            CorrelationModel::MixtureStrong(m) => MixtureSampler::new(m, grid).map(FieldSampler::Mixture),
        }
    }

    /// Circulant embedding in all `d` dimensions at once, for correlations
    /// without product structure.
    pub fn stationary<C: Correlation + ?Sized>(model: &C, grid: &GridSpec) -> Result<Self> {
        check_budget(grid)?;
        StationarySampler::new(model, grid).map(FieldSampler::Stationary)
    }

    pub fn len(&self) -> usize {
        match self {
            FieldSampler::Separable(s) => s.len(),
            FieldSampler::Mixture(s) => s.len(),
            FieldSampler::Stationary(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clipped_mass(&self) -> f64 {
        match self {
            FieldSampler::Separable(s) => s.factors.iter().map(|f| f.clipped_mass()).sum(),
            FieldSampler::Mixture(s) => s.runs.iter().flatten().map(|r| r.2.clipped_mass()).sum(),
            FieldSampler::Stationary(s) => s.clipped_mass,
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut SamplerScratch) {
        debug_assert_eq!(out.len(), self.len());
        match self {
            FieldSampler::Separable(s) => s.sample_into(rng, out, scratch),
            FieldSampler::Mixture(s) => s.sample_into(rng, out, scratch),
            FieldSampler::Stationary(s) => s.sample_into(rng, out, scratch),
        }
    }
}

fn check_budget(grid: &GridSpec) -> Result<()> {
    let total = grid.total_points();
    if total > GRID_BUDGET {
        return Err(Error::Budget {
            what: "field sample",
            required: total,
            budget: GRID_BUDGET,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replicate::replicate_rng;

    fn grid(spacings: &[f64], counts: &[usize]) -> GridSpec {
        GridSpec::from_axes(spacings, counts).unwrap()
    }

    #[test]
    fn dense_factor_reproduces_covariance() {
        for alpha in [0.5, 1.0, 2.0] {
            let f = AxisFactor::dense(16, |k| (-(k as f64 * 0.1).powf(alpha)).exp()).unwrap();
            let c = f.implied_covariance();
            for i in 0..16usize {
                for j in 0..16 {
                    let want = (-((i.abs_diff(j)) as f64 * 0.1).powf(alpha)).exp();
                    assert!((c[i * 16 + j] - want).abs() < 1e-10, "alpha {alpha}");
                }
            }
        }
    }

    #[test]
    fn circulant_factor_reproduces_covariance() {
        let f = AxisFactor::circulant(20, |k| (-(k as f64 * 0.3)).exp()).unwrap();
        let c = f.implied_covariance();
        for i in 0..20usize {
            for j in 0..20 {
                let want = (-(i.abs_diff(j) as f64 * 0.3)).exp();
                assert!((c[i * 20 + j] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn separable_implied_covariance_is_exact() {
        let model = SeparableStable::new(vec![1.0, 2.0]).unwrap();
        let g = grid(&[0.2, 0.15], &[16, 16]);
        let s = SeparableSampler::new(&model, &g).unwrap();
        let mut p = [0.0; 2];
        let mut q = [0.0; 2];
        for a in (0..256).step_by(7) {
            for b in (0..256).step_by(5) {
                g.point(a, &mut p);
                g.point(b, &mut q);
                let want = model.correlation(&[q[0] - p[0], q[1] - p[1]]);
                assert!((s.implied_covariance(a, b) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dense_and_circulant_paths_agree_in_law() {
        let model = SeparableStable::new(vec![1.0]).unwrap();
        let g = grid(&[0.05], &[1500]);
        let s = FieldSampler::new(&CorrelationModel::SeparableStable(model), &g).unwrap();
        let mut scratch = SamplerScratch::default();
        let mut out = vec![0.0; 1500];
        let mut acc = 0.0;
        let reps = 400;
        for r in 0..reps {
            s.sample_into(&mut replicate_rng(11, r), &mut out, &mut scratch);
            acc += out[700] * out[720];
        }
        let want = (-1.0f64).exp();
        assert!((acc / reps as f64 - want).abs() < 0.15);
    }

    #[test]
    fn mixture_blocks_are_independent_up_to_shared_shift() {
        let base = SeparableStable::new(vec![2.0, 2.0]).unwrap();
        let model = MixtureModel::new(base, 0.5, 10.0, 0).unwrap();
        let g = grid(&[0.25, 0.25], &[8, 8]);
        let s = MixtureSampler::new(&model, &g).unwrap();
        assert_eq!(s.block_count(), 4);
        let rho = model.rho();
        let mut scratch = SamplerScratch::default();
        let mut out = vec![0.0; 64];
        let reps = 4000;
        let (mut cross, mut within) = (0.0, 0.0);
        for r in 0..reps {
            s.sample_into(&mut replicate_rng(5, r), &mut out, &mut scratch);
            cross += out[0] * out[63];
            within += out[0] * out[9];
        }
        let se = 3.0 * (2.0 / reps as f64).sqrt();
        assert!((cross / reps as f64 - rho).abs() < se);
        let want = model.covariance_between(&[0.0, 0.0], &[0.25, 0.25]);
        assert!((within / reps as f64 - want).abs() < se);
    }

    #[test]
    fn stationary_sampler_matches_covariance() {
        let model = SeparableStable::new(vec![1.0, 1.0]).unwrap();
        let g = grid(&[0.5, 0.5], &[6, 6]);
        let s = FieldSampler::stationary(&model, &g).unwrap();
        let mut scratch = SamplerScratch::default();
        let mut out = vec![0.0; 36];
        let reps = 4000;
        let (mut var, mut lag) = (0.0, 0.0);
        for r in 0..reps {
            s.sample_into(&mut replicate_rng(9, r), &mut out, &mut scratch);
            var += out[14] * out[14];
            lag += out[14] * out[20];
        }
        let se = 3.0 * (2.0 / reps as f64).sqrt();
        assert!((var / reps as f64 - 1.0).abs() < se);
        assert!((lag / reps as f64 - (-0.5f64).exp()).abs() < se);
    }
}
