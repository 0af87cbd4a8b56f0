//! Seeded synthetic sample streams with known expectation `Σ`.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix, SymMatrix, Vector};
use crate::rng::{substream, DpRng};

const BASIS_KEY: u64 = 1;
const SAMPLE_KEY: u64 = 2;

/// One random matrix `A_i`, stored in factored form where possible.
#[derive(Debug, Clone)]
pub enum Sample {
    /// `x xᵀ`.
    Outer(Vector),
    /// `base + x xᵀ`, with `base` shared across a stream.
    Shifted { base: Arc<SymMatrix>, x: Vector },
    Dense(SymMatrix),
    /// Average of the listed samples.
    Mean(Arc<[Sample]>),
}

impl Sample {
    pub fn mean_of(samples: &[Sample]) -> Sample {
        Sample::Mean(samples.to_vec().into())
    }

    pub fn dim(&self) -> usize {
        match self {
            Sample::Outer(x) | Sample::Shifted { x, .. } => x.len(),
            Sample::Dense(m) => m.dim(),
            Sample::Mean(parts) => parts[0].dim(),
        }
    }

    /// `A w`.
    pub fn apply(&self, w: &Vector) -> Vector {
        match self {
            Sample::Outer(x) => x * x.dot(w),
            Sample::Shifted { base, x } => base.mul_vec(w) + x * x.dot(w),
            Sample::Dense(m) => m.mul_vec(w),
            Sample::Mean(parts) => mean_vectors(&apply_all(parts, w)),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Sample::Outer(x) => x.norm_squared(),
            Sample::Shifted { base, x } => base.trace() + x.norm_squared(),
            Sample::Dense(m) => m.trace(),
            Sample::Mean(parts) => parts.iter().map(Sample::trace).sum::<f64>() / parts.len() as f64,
        }
    }

    /// `Σ_i √A_ii`, which equals `‖x‖₁` for `A = x xᵀ`.
    pub fn sqrt_diag_sum(&self) -> f64 {
        match self {
            Sample::Outer(x) => x.lp_norm(1),
            Sample::Shifted { base, x } => (0..x.len())
                .map(|i| (base.get(i, i) + x[i] * x[i]).max(0.0).sqrt())
                .sum(),
            Sample::Dense(m) => (0..m.dim()).map(|i| m.get(i, i).max(0.0).sqrt()).sum(),
            Sample::Mean(_) => {
                let m = self.to_sym();
                (0..m.dim()).map(|i| m.get(i, i).max(0.0).sqrt()).sum()
            }
        }
    }

    pub fn to_sym(&self) -> SymMatrix {
        match self {
            Sample::Outer(x) => SymMatrix::outer(x),
            Sample::Shifted { base, x } => base.add(&SymMatrix::outer(x)),
            Sample::Dense(m) => m.clone(),
            Sample::Mean(parts) => {
                let w = vec![1.0 / parts.len() as f64; parts.len()];
                weighted_sum(parts, &w)
            }
        }
    }
}

/// Arithmetic mean of equal-length vectors as a running mean, which is
/// exact when all inputs are equal.
pub fn mean_vectors(vs: &[Vector]) -> Vector {
    let mut acc = vs[0].clone();
    for (i, v) in vs.iter().enumerate().skip(1) {
        acc += (v - &acc) / (i + 1) as f64;
    }
    acc
}

/// `A_i w` for every sample. Shared `base` products are computed once.
pub fn apply_all(samples: &[Sample], w: &Vector) -> Vec<Vector> {
    let mut cache: Option<(*const SymMatrix, Vector)> = None;
    samples
        .iter()
        .map(|s| match s {
            Sample::Shifted { base, x } => {
                let ptr = Arc::as_ptr(base);
                let bw = match &cache {
                    Some((p, v)) if *p == ptr => v.clone(),
                    _ => {
                        let v = base.mul_vec(w);
                        cache = Some((ptr, v.clone()));
                        v
                    }
                };
                bw + x * x.dot(w)
            }
            other => other.apply(w),
        })
        .collect()
}

/// `Σ c_i A_i` for nonnegative weights `c_i`.
pub fn weighted_sum(samples: &[Sample], weights: &[f64]) -> SymMatrix {
    assert_eq!(samples.len(), weights.len());
    let d = samples[0].dim();
    let mut total = Matrix::zeros(d, d);
    let mut bases: Vec<(Arc<SymMatrix>, f64)> = Vec::new();
    let mut factors: Vec<Vector> = Vec::new();
    let flush = |factors: &mut Vec<Vector>, total: &mut Matrix| {
        if factors.is_empty() {
            return;
        }
        let g = Matrix::from_columns(factors);
        total.gemm(1.0, &g, &g.transpose(), 1.0);
        factors.clear();
    };
    for (s, &c) in samples.iter().zip(weights) {
        assert!(c >= 0.0, "weights must be nonnegative");
        match s {
            Sample::Outer(x) => factors.push(x * c.sqrt()),
            Sample::Shifted { base, x } => {
                factors.push(x * c.sqrt());
                match bases.iter_mut().find(|(b, _)| Arc::ptr_eq(b, base)) {
                    Some((_, acc)) => *acc += c,
                    None => bases.push((Arc::clone(base), c)),
                }
            }
            Sample::Dense(m) => total += m.matrix() * c,
            Sample::Mean(_) => total += s.to_sym().matrix() * c,
        }
        if factors.len() == 2048 {
            flush(&mut factors, &mut total);
        }
    }
    flush(&mut factors, &mut total);
    for (b, c) in bases {
        total += b.matrix() * c;
    }
    SymMatrix::symmetrize(&total)
}

/// Distribution constants of a generator, attached analytically.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// `Σ = E[A_i]`.
    pub sigma_matrix: SymMatrix,
    /// Eigenvalues of `Σ`, descending.
    pub eigenvalues: Vec<f64>,
    /// Signal rank the stream was built for.
    pub k: usize,
    /// `min_{i≤k} (λ_i − λ_{i+1})`.
    pub gap: f64,
    pub m: f64,
    pub v: f64,
    pub k_const: f64,
    pub a: f64,
    pub gamma2: f64,
    /// `λ_1 / gap`.
    pub kappa_prime: f64,
    /// Isotropic noise level `σ` of the construction (0 where not applicable).
    pub noise_sigma: f64,
}

impl ModelParams {
    fn build(sigma_matrix: SymMatrix, k: usize, noise_sigma: f64) -> Result<Self> {
        let eigenvalues = sym_eig(&sigma_matrix)?.values;
        let mut p = ModelParams {
            sigma_matrix,
            eigenvalues,
            k,
            gap: 0.0,
            m: 1.0,
            v: 1.0,
            k_const: 1.0,
            a: 1.0,
            gamma2: 1.0,
            kappa_prime: f64::INFINITY,
            noise_sigma,
        };
        p.gap = p.min_gap(k);
        p.kappa_prime = p.eigenvalues[0] / p.gap;
        Ok(p)
    }

    /// `min_{i≤k} (λ_i − λ_{i+1})`.
    pub fn min_gap(&self, k: usize) -> f64 {
        let d = self.eigenvalues.len();
        (0..k.min(d - 1))
            .map(|i| self.eigenvalues[i] - self.eigenvalues[i + 1])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    SpikedRank1,
    SpikedRankK,
    GaussianOuter,
    HeavyTailMixture,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::SpikedRank1 => "spiked-rank1",
            GeneratorKind::SpikedRankK => "spiked-rankk",
            GeneratorKind::GaussianOuter => "gaussian-outer",
            GeneratorKind::HeavyTailMixture => "heavy-tail",
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Spike { v: Vector, amplitude: f64, sigma: f64 },
    Shifted { base: Arc<SymMatrix>, sigma: f64 },
    Gaussian { factor: Matrix },
    HeavyTail { v: Vector, alpha: f64 },
}

/// Lazy, seeded iterator over samples `A_i`.
#[derive(Debug, Clone)]
pub struct SampleStream {
    kind: GeneratorKind,
    dim: usize,
    seed: u64,
    count: Option<usize>,
    produced: usize,
    model: ModelParams,
    source: Source,
    rng: DpRng,
}

impl SampleStream {
    fn new(kind: GeneratorKind, dim: usize, seed: u64, model: ModelParams, source: Source) -> Self {
        SampleStream {
            kind,
            dim,
            seed,
            count: None,
            produced: 0,
            model,
            source,
            rng: substream(seed, &[SAMPLE_KEY]),
        }
    }

    /// Stops the stream after `n` samples.
    pub fn with_count(mut self, n: usize) -> Self {
        self.count = Some(n);
        self
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn limit(&self) -> Option<usize> {
        self.count
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    /// Draws the next `n` samples.
    pub fn take_samples(&mut self, n: usize) -> Vec<Sample> {
        self.by_ref().take(n).collect()
    }

    fn draw(&mut self) -> Sample {
        let d = self.dim;
        let rng = &mut self.rng;
        match &self.source {
            Source::Spike { v, amplitude, sigma } => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut x = v * (sign * amplitude);
                if *sigma > 0.0 {
                    x += gaussian(rng, d, *sigma);
                }
                Sample::Outer(x)
            }
            Source::Shifted { base, sigma } => Sample::Shifted {
                base: Arc::clone(base),
                x: gaussian(rng, d, *sigma),
            },
            Source::Gaussian { factor } => Sample::Outer(factor * gaussian(rng, d, 1.0)),
            Source::HeavyTail { v, alpha } => {
                if rng.random::<f64>() < *alpha {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    Sample::Outer(v * (sign * alpha.powf(-0.25)))
                } else {
                    Sample::Outer(gaussian(rng, d, 1.0))
                }
            }
        }
    }
}

fn gaussian(rng: &mut DpRng, d: usize, scale: f64) -> Vector {
    Vector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

impl Iterator for SampleStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.count.is_some_and(|n| self.produced >= n) {
            return None;
        }
        self.produced += 1;
        Some(self.draw())
    }
}

fn unit_direction(d: usize, seed: u64) -> Vector {
    let mut rng = substream(seed, &[BASIS_KEY]);
    crate::linalg::random_unit(d, &mut rng)
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension {d} is below 2")));
    }
    Ok(())
}

/// Rank-one spiked model: `x = s + n`, `s ∼ Unif{±√λ_1 v}`, `n ∼ N(0, σ²I)`,
/// so that `Σ = λ_1 vvᵀ + σ²I`.
pub fn spiked_rank1(d: usize, lambda1: f64, sigma: f64, seed: u64) -> Result<SampleStream> {
    spiked_rank1_scaled(d, lambda1, sigma, seed, true)
}

/// Same construction with an unscaled signal `s ∼ Unif{±v}`.
pub fn spiked_rank1_unit_signal(d: usize, sigma: f64, seed: u64) -> Result<SampleStream> {
    spiked_rank1_scaled(d, 1.0, sigma, seed, false)
}

fn spiked_rank1_scaled(
    d: usize,
    lambda1: f64,
    sigma: f64,
    seed: u64,
    scaled: bool,
) -> Result<SampleStream> {
    check_dim(d)?;
    if !(lambda1 > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need lambda1 > 0 and sigma >= 0, got {lambda1} and {sigma}"
        )));
    }
    let v = unit_direction(d, seed);
    let signal = if scaled { lambda1 } else { 1.0 };
    let s2 = sigma * sigma;
    let sigma_matrix = SymMatrix::from_upper_fn(d, |i, j| {
        signal * v[i] * v[j] + if i == j { s2 } else { 0.0 }
    });
    let mut model = ModelParams::build(sigma_matrix, 1, sigma)?;
    model.m = signal + s2 * d as f64;
    model.v = s2 * d as f64;
    model.gamma2 = s2;
    let source = Source::Spike { v, amplitude: signal.sqrt(), sigma };
    Ok(SampleStream::new(GeneratorKind::SpikedRank1, d, seed, model, source))
}

/// Rank-`k` spiked model `A_i = V_k Λ V_kᵀ + z_i z_iᵀ`, `z_i ∼ N(0, σ²I)`.
pub fn spiked_rankk(d: usize, k: usize, eigenvalues: &[f64], sigma: f64, seed: u64) -> Result<SampleStream> {
    check_dim(d)?;
    if k == 0 || k >= d || eigenvalues.len() != k {
        return Err(Error::InvalidInput(format!(
            "need 1 <= k < d with k eigenvalues, got k={k}, d={d}, {} values",
            eigenvalues.len()
        )));
    }
    if eigenvalues.iter().any(|&l| !(l > 0.0)) || eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidInput(format!(
            "eigenvalues must be positive and descending, got {eigenvalues:?}"
        )));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut rng = substream(seed, &[BASIS_KEY]);
    let vk = crate::linalg::OrthoBasis::random(d, k, &mut rng);
    let scaled = vk.matrix() * Matrix::from_diagonal(&Vector::from_column_slice(eigenvalues));
    let base = Arc::new(SymMatrix::symmetrize(&(scaled * vk.matrix().transpose())));
    let s2 = sigma * sigma;
    let mut sigma_matrix = (*base).clone().into_matrix();
    for i in 0..d {
        sigma_matrix[(i, i)] += s2;
    }
    let mut model = ModelParams::build(SymMatrix::symmetrize(&sigma_matrix), k, sigma)?;
    model.m = s2 * d as f64;
    model.v = s2 * d as f64;
    model.gamma2 = s2;
    let source = Source::Shifted { base, sigma };
    Ok(SampleStream::new(GeneratorKind::SpikedRankK, d, seed, model, source))
}

/// `A_i = x_i x_iᵀ` with `x_i ∼ N(0, Σ)`.
pub fn gaussian_outer(d: usize, sigma_matrix: &SymMatrix, seed: u64) -> Result<SampleStream> {
    check_dim(d)?;
    if sigma_matrix.dim() != d {
        return Err(Error::InvalidInput(format!(
            "covariance is {0}x{0}, expected {d}x{d}",
            sigma_matrix.dim()
        )));
    }
    let eig = sym_eig(sigma_matrix)?;
    let tol = 1e-8 * eig.values[0].abs().max(1.0);
    if eig.values[d - 1] < -tol {
        return Err(Error::InvalidInput(format!(
            "covariance is not PSD (smallest eigenvalue {})",
            eig.values[d - 1]
        )));
    }
    let roots: Vec<f64> = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let factor = &eig.vectors * Matrix::from_diagonal(&Vector::from_vec(roots));
    let mut model = ModelParams::build(sigma_matrix.clone(), 1, 0.0)?;
    model.m = d as f64;
    model.v = d as f64;
    model.k_const = 4.0;
    model.a = 1.0;
    model.gamma2 = 1.0;
    let source = Source::Gaussian { factor };
    Ok(SampleStream::new(GeneratorKind::GaussianOuter, d, seed, model, source))
}

/// With probability `α`, `x ∼ Unif{±α^{−1/4} v}`; otherwise `x ∼ N(0, I)`.
/// `Σ = (1−α)I + √α vvᵀ`.
pub fn heavy_tail_mixture(d: usize, alpha: f64, seed: u64) -> Result<SampleStream> {
    check_dim(d)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let v = unit_direction(d, seed);
    let sa = alpha.sqrt();
    let sigma_matrix = SymMatrix::from_upper_fn(d, |i, j| {
        sa * v[i] * v[j] + if i == j { 1.0 - alpha } else { 0.0 }
    });
    let mut model = ModelParams::build(sigma_matrix, 1, 0.0)?;
    model.m = 1.0 / sa;
    model.v = d as f64;
    let source = Source::HeavyTail { v, alpha };
    Ok(SampleStream::new(GeneratorKind::HeavyTailMixture, d, seed, model, source))
}

const MAGIC: &[u8; 6] = b"DPPCA1";

/// Writes samples as `{magic, u32 d, u64 n, u64 seed}` followed by each
/// matrix in row-major order. All fields are little-endian.
pub fn write_samples(out: &mut impl Write, seed: u64, samples: &[Sample]) -> Result<()> {
    let d = samples.first().map_or(0, Sample::dim);
    let d32 = u32::try_from(d).map_err(|_| Error::InvalidInput(format!("dimension {d} too large")))?;
    out.write_all(MAGIC)?;
    out.write_all(&d32.to_le_bytes())?;
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    for s in samples {
        let m = s.to_sym();
        for i in 0..d {
            for j in 0..d {
                out.write_all(&m.get(i, j).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Reads a file written by [`write_samples`]. Returns the seed and the samples.
pub fn read_samples(input: &mut impl Read) -> Result<(u64, Vec<Sample>)> {
    let mut magic = [0u8; 6];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidInput("bad sample file magic".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                input.read_exact(&mut b8)?;
                m[(i, j)] = f64::from_le_bytes(b8);
            }
        }
        samples.push(Sample::Dense(SymMatrix::try_from_matrix(m)?));
    }
    Ok((seed, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{principal_sine, subspace_sine, OrthoBasis};

    fn empirical_mean(stream: &mut SampleStream, n: usize) -> SymMatrix {
        let samples = stream.take_samples(n);
        weighted_sum(&samples, &vec![1.0 / n as f64; n])
    }

    fn relative_error(stream: &mut SampleStream, n: usize) -> f64 {
        let sigma = stream.model().sigma_matrix.clone();
        empirical_mean(stream, n).sub(&sigma).frobenius_norm() / sigma.frobenius_norm()
    }

    #[test]
    fn spiked_rank1_noiseless_is_rank_one() {
        let mut s = spiked_rank1(8, 10.0, 0.0, 3).unwrap();
        let sigma = s.model().sigma_matrix.clone();
        for a in s.take_samples(20) {
            assert!(a.to_sym().sub(&sigma).frobenius_norm() < 1e-12);
        }
        let ev = &s.model().eigenvalues;
        assert!((ev[0] - 10.0).abs() < 1e-12 && ev[1].abs() < 1e-12);
    }

    #[test]
    fn spiked_rank1_unbiased() {
        let mut s = spiked_rank1(20, 1.0, 0.1, 11).unwrap();
        assert!(relative_error(&mut s, 100_000) < 0.02);
        let mut s = spiked_rank1_unit_signal(20, 0.1, 11).unwrap();
        assert!(relative_error(&mut s, 100_000) < 0.02);
    }

    #[test]
    fn paper_defaults_build() {
        let s = spiked_rank1(200, 10.0, 0.025, 0).unwrap();
        let m = s.model();
        assert!((m.lambda1() - (10.0 + 0.025f64.powi(2))).abs() < 1e-9);
        assert!((m.gap - 10.0).abs() < 1e-9);
    }

    #[test]
    fn streams_replay_bitwise() {
        let a: Vec<_> = spiked_rankk(12, 2, &[5.0, 2.0], 0.3, 9).unwrap().take(50).collect();
        let b: Vec<_> = spiked_rankk(12, 2, &[5.0, 2.0], 0.3, 9).unwrap().take(50).collect();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_sym(), y.to_sym());
        }
        let c: Vec<_> = spiked_rankk(12, 2, &[5.0, 2.0], 0.3, 10).unwrap().take(1).collect();
        assert_ne!(a[0].to_sym(), c[0].to_sym());
    }

    #[test]
    fn count_bounds_stream() {
        let s = heavy_tail_mixture(4, 0.5, 1).unwrap().with_count(7);
        assert_eq!(s.limit(), Some(7));
        assert_eq!(s.collect::<Vec<_>>().len(), 7);
    }

    #[test]
    fn spiked_rankk_noiseless_is_constant() {
        let mut s = spiked_rankk(10, 3, &[4.0, 3.0, 1.0], 0.0, 2).unwrap();
        let sigma = s.model().sigma_matrix.clone();
        for a in s.take_samples(5) {
            assert_eq!(a.to_sym(), sigma);
        }
    }

    #[test]
    fn spiked_rankk_recovers_subspace() {
        let mut s = spiked_rankk(30, 2, &[10.0, 5.0], 0.5, 4).unwrap();
        let truth = sym_eig(&s.model().sigma_matrix).unwrap().top(2);
        let emp = empirical_mean(&mut s, 100_000);
        let est = sym_eig(&emp).unwrap();
        assert!(subspace_sine(&est.top(2), &truth) < 0.02);
        assert!(est.values[2] < est.values[1]);
        assert!(relative_error(&mut s, 100_000) < 0.03);
    }

    #[test]
    fn spiked_rankk_rejects_bad_eigenvalues() {
        assert!(spiked_rankk(5, 2, &[1.0, 2.0], 0.1, 0).is_err());
        assert!(spiked_rankk(5, 2, &[1.0, 0.0], 0.1, 0).is_err());
        assert!(spiked_rankk(5, 5, &[1.0; 5], 0.1, 0).is_err());
    }

    #[test]
    fn gaussian_outer_identity_and_diag() {
        let mut s = gaussian_outer(2, &SymMatrix::identity(2), 5).unwrap();
        assert!(relative_error(&mut s, 100_000) < 0.02);
        assert_eq!((s.model().k_const, s.model().a), (4.0, 1.0));

        let mut s = gaussian_outer(2, &SymMatrix::diagonal(&[3.0, 1.0]), 6).unwrap();
        let top = sym_eig(&empirical_mean(&mut s, 100_000)).unwrap().vector(0);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        assert!(principal_sine(&top, &e1) < 0.05);

        let mut s = gaussian_outer(20, &crate::linalg::random_psd(20, &mut crate::rng::seeded(1)), 7).unwrap();
        assert!(relative_error(&mut s, 100_000) < 0.03);
    }

    #[test]
    fn gaussian_outer_rejects_indefinite() {
        let m = SymMatrix::diagonal(&[1.0, -0.5]);
        assert!(matches!(gaussian_outer(2, &m, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn heavy_tail_covariance() {
        let alpha: f64 = 0.25;
        assert!((alpha.powf(-0.25) - 2f64.sqrt()).abs() < 1e-15);
        let mut s = heavy_tail_mixture(5, alpha, 8).unwrap();
        let v = unit_direction(5, 8);
        let vsv = v.dot(&s.model().sigma_matrix.mul_vec(&v));
        assert!((vsv - ((1.0 - alpha) + alpha.sqrt())).abs() < 1e-12);
        assert!(relative_error(&mut s, 1_000_000) < 0.03);
    }

    #[test]
    fn weighted_sum_matches_dense() {
        let mut s = spiked_rankk(6, 2, &[3.0, 1.0], 0.7, 1).unwrap();
        let samples = s.take_samples(10);
        let w: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let mut direct = SymMatrix::zeros(6);
        for (a, c) in samples.iter().zip(&w) {
            direct = direct.add(&a.to_sym().scale(*c));
        }
        assert!(weighted_sum(&samples, &w).sub(&direct).frobenius_norm() < 1e-12);
        let x = Vector::from_fn(6, |i, _| i as f64 - 2.0);
        for (a, y) in samples.iter().zip(apply_all(&samples, &x)) {
            assert!((a.to_sym().mul_vec(&x) - y).norm() < 1e-12);
        }
        let mean = Sample::mean_of(&samples);
        let dense = weighted_sum(&samples, &[0.1; 10]);
        assert!((mean.apply(&x) - dense.mul_vec(&x)).norm() < 1e-12);
    }

    #[test]
    fn dump_and_load_round_trip() {
        let samples = spiked_rank1(4, 2.0, 0.1, 3).unwrap().take_samples(3);
        let mut buf = Vec::new();
        write_samples(&mut buf, 42, &samples).unwrap();
        assert_eq!(buf.len(), 6 + 4 + 8 + 8 + 3 * 16 * 8);
        let (seed, loaded) = read_samples(&mut buf.as_slice()).unwrap();
        assert_eq!(seed, 42);
        for (a, b) in samples.iter().zip(&loaded) {
            assert_eq!(a.to_sym(), b.to_sym());
        }
        buf[0] = b'X';
        assert!(read_samples(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn coordinate_basis_sine() {
        let a = OrthoBasis::coordinate(3, &[0, 1]);
        let b = OrthoBasis::coordinate(3, &[1, 0]);
        assert!(subspace_sine(&a, &b) < 1e-12);
        let c = OrthoBasis::coordinate(3, &[0, 2]);
        assert!((subspace_sine(&a, &c) - 1.0).abs() < 1e-12);
    }
}
