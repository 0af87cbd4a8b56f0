//! Private top-eigenvector oracles and the deflation driver.
//!
//! [`modified_dp_pca`] runs Oja-style updates whose per-batch gradient mean
//! is privatized by [`priv_range`] followed by [`priv_mean`]. [`dp_ojas`]
//! clips each projected gradient and adds isotropic Gaussian noise.
//! [`k_dp_pca`] calls an [`EPcaOracle`] on `k` disjoint batches and deflates
//! between rounds.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::datagen::{apply_all, mean_vectors, ModelParams, Sample};
use crate::error::{Error, Result};
use crate::linalg::{deflate, orthonormalize, sym_eig, Matrix, OrthoBasis, Projector, SymMatrix, Vector};
use crate::oja::{renormalize, random_start, run_oja, LrPolicy};
use crate::privacy::{stability_threshold, stable_histogram, BinPartition, HistogramResult, PrivacyBudget};
use crate::rng::DpRng;

/// Tolerance for the oracle output contract `‖Pu − u‖ ≤ 1e−8`.
pub const ORACLE_TOL: f64 = 1e-8;

/// Batch size rule for [`modified_dp_pca`], as a function of the sample count `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchRule {
    /// `⌈√m⌉`.
    Sqrt,
    /// `⌊m / ln³ m⌋`.
    Theoretical,
    Fixed(usize),
}

/// Parameters shared by the private oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub batch: BatchRule,
    /// Failure probability `τ`. Also used as `ζ` in the DP-Oja clip.
    pub tau: f64,
    pub k_const: f64,
    pub a: f64,
    /// `γ`, the square root of the model's `γ²`.
    pub gamma: f64,
    pub lambda1: f64,
    /// Noise level `σ` used by the experimental schedule.
    pub noise_sigma: f64,
    /// Eigenvalues of `Σ`, used by the per-round schedules.
    pub eigenvalues: Vec<f64>,
    pub schedule: LrPolicy,
    /// `C`, the DP-Oja clip multiplier.
    pub c_clip: f64,
    /// `C1`, the PrivRange subset-count multiplier.
    pub c_range: f64,
    /// `C′`, the DP-Oja noise multiplier.
    pub c_noise: f64,
    /// Feed PrivMean the same half-batch as PrivRange instead of the second half.
    pub reuse_first_half: bool,
}

impl OracleConfig {
    /// Defaults with the model constants filled in from `model`.
    pub fn from_model(model: &ModelParams) -> Self {
        OracleConfig {
            batch: BatchRule::Sqrt,
            tau: 0.01,
            k_const: model.k_const,
            a: model.a,
            gamma: model.gamma2.sqrt(),
            lambda1: model.lambda1(),
            noise_sigma: model.noise_sigma,
            eigenvalues: model.eigenvalues.clone(),
            schedule: LrPolicy::KdppcaExperimental,
            c_clip: 1.0,
            c_range: 1.0,
            c_noise: 1.0,
            reuse_first_half: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau must be in (0, 1), got {}", self.tau)));
        }
        if let BatchRule::Fixed(b) = self.batch {
            if b < 4 {
                return Err(Error::InvalidInput(format!("batch size must be >= 4, got {b}")));
            }
        }
        for (name, v) in [
            ("K", self.k_const),
            ("a", self.a),
            ("C", self.c_clip),
            ("C1", self.c_range),
            ("C'", self.c_noise),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.lambda1 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need gamma >= 0 and lambda1 > 0, got {} and {}",
                self.gamma, self.lambda1
            )));
        }
        Ok(())
    }

    /// Batch size `B ≥ 4` for `m` samples.
    pub fn batch_size(&self, m: usize) -> usize {
        let b = match self.batch {
            BatchRule::Sqrt => (m as f64).sqrt().ceil() as usize,
            BatchRule::Theoretical => {
                let l = (m.max(2) as f64).ln();
                (m as f64 / (l * l * l)).floor() as usize
            }
            BatchRule::Fixed(b) => b,
        };
        b.max(4)
    }
}

/// Result of one oracle call.
#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub direction: Vector,
    /// Steps skipped because a private histogram returned no bin.
    pub bottoms: usize,
    /// Noise resamples (DP-Gauss-2 style retries); zero for the Oja oracles.
    pub retries: usize,
}

/// A stochastic top-eigenvector oracle: returns a unit vector in `Im(P)`.
pub trait EPcaOracle: Sync {
    fn name(&self) -> &'static str;

    /// Smallest batch the oracle accepts.
    fn min_samples(&self) -> usize {
        1
    }

    /// Estimate for deflation round `round` (0-based).
    fn estimate(
        &self,
        samples: &[Sample],
        p: &Projector,
        budget: PrivacyBudget,
        round: usize,
        rng: &mut DpRng,
    ) -> Result<OracleOutput>;
}

/// Non-private oracle returning the top eigenvector of `P Σ P` for a known `Σ`.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    pub sigma: SymMatrix,
}

impl EPcaOracle for ExactOracle {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn estimate(&self, _: &[Sample], p: &Projector, _: PrivacyBudget, _: usize, _: &mut DpRng) -> Result<OracleOutput> {
        let eig = sym_eig(&self.sigma.sandwich(p))?;
        Ok(OracleOutput { direction: eig.vector(0), bottoms: 0, retries: 0 })
    }
}

/// Non-private Oja on the batch.
#[derive(Debug, Clone)]
pub struct OjaOracle {
    pub cfg: OracleConfig,
}

impl EPcaOracle for OjaOracle {
    fn name(&self) -> &'static str {
        "oja"
    }

    fn estimate(&self, samples: &[Sample], p: &Projector, _: PrivacyBudget, round: usize, rng: &mut DpRng) -> Result<OracleOutput> {
        let cfg = &self.cfg;
        let schedule = cfg.schedule.schedule(&cfg.eigenvalues, round, samples.len(), cfg.noise_sigma)?;
        let direction = run_oja(samples, p, &schedule, rng)?;
        Ok(OracleOutput { direction, bottoms: 0, retries: 0 })
    }
}

/// [`modified_dp_pca`] as an oracle.
#[derive(Debug, Clone)]
pub struct ModifiedDpPca {
    pub cfg: OracleConfig,
}

impl EPcaOracle for ModifiedDpPca {
    fn name(&self) -> &'static str {
        "modified-dp-pca"
    }

    fn min_samples(&self) -> usize {
        8
    }

    fn estimate(&self, samples: &[Sample], p: &Projector, budget: PrivacyBudget, round: usize, rng: &mut DpRng) -> Result<OracleOutput> {
        modified_dp_pca(samples, p, budget, &self.cfg, round, rng)
    }
}

/// [`dp_ojas`] as an oracle.
#[derive(Debug, Clone)]
pub struct DpOjas {
    pub cfg: OracleConfig,
}

impl EPcaOracle for DpOjas {
    fn name(&self) -> &'static str {
        "dp-ojas"
    }

    fn estimate(&self, samples: &[Sample], p: &Projector, budget: PrivacyBudget, round: usize, rng: &mut DpRng) -> Result<OracleOutput> {
        dp_ojas(samples, p, budget, &self.cfg, round, rng)
    }
}

/// Private estimate of the gradient spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RangeEstimate {
    Value(f64),
    Bottom,
}

/// Number of PrivRange subsets: `⌈C1 ln(1/(δτ)) / ε⌉`, raised if needed to
/// `⌊t⌋ + 1` where `t` is the histogram's stability threshold, so that a
/// unanimous vote can survive suppression.
pub fn range_subsets(budget: PrivacyBudget, tau: f64, c1: f64) -> usize {
    let k = (c1 * (1.0 / (budget.delta() * tau)).ln() / budget.epsilon()).ceil();
    let floor = stability_threshold(budget).floor() + 1.0;
    k.max(floor) as usize
}

/// Top eigenvalue of `(1/b) G Gᵀ` for each of the `k_sub` consecutive subsets
/// of pairwise differences `g_{2i+1} − g_{2i}`.
pub fn subset_eigenvalues(gradients: &[Vector], k_sub: usize) -> Result<Vec<f64>> {
    let diffs: Vec<Vector> = gradients.chunks_exact(2).map(|p| &p[1] - &p[0]).collect();
    if k_sub == 0 || diffs.len() < k_sub {
        return Err(Error::InsufficientData { needed: 2 * k_sub.max(1), got: gradients.len() });
    }
    let b = diffs.len() / k_sub;
    diffs
        .chunks_exact(b)
        .take(k_sub)
        .map(|g| top_gram_eigenvalue(g))
        .collect()
}

fn top_gram_eigenvalue(cols: &[Vector]) -> Result<f64> {
    let b = cols.len();
    let d = cols[0].len();
    let top = if b == 1 {
        cols[0].norm_squared()
    } else if b <= d {
        let gram = SymMatrix::from_upper_fn(b, |i, j| cols[i].dot(&cols[j]));
        sym_eig(&gram)?.values[0]
    } else {
        let g = Matrix::from_columns(cols);
        sym_eig(&SymMatrix::symmetrize(&(&g * g.transpose())))?.values[0]
    };
    Ok((top / b as f64).max(0.0))
}

/// Private top eigenvalue of the pairwise-difference covariance, binned on
/// the quarter-octave grid. Returns the left edge of the heaviest bin.
pub fn priv_range(
    gradients: &[Vector],
    budget: PrivacyBudget,
    tau: f64,
    c1: f64,
    rng: &mut DpRng,
) -> Result<RangeEstimate> {
    let k_sub = range_subsets(budget, tau, c1);
    let values = subset_eigenvalues(gradients, k_sub)?;
    Ok(match stable_histogram(&values, BinPartition::Geometric, budget, rng) {
        HistogramResult::Bottom => RangeEstimate::Bottom,
        HistogramResult::Bin { left_edge, .. } => RangeEstimate::Value(left_edge),
    })
}

/// Calibration quantities of [`priv_mean`] for a batch of `b` gradients in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCalibration {
    /// Histogram bucket width `υ = 2^{1/4} K √Λ̂ ln^a(2B/τ)`.
    pub bucket_width: f64,
    /// Truncation half-width `3 K √Λ̂ ln^a(Bd/τ)`.
    pub radius: f64,
    /// Per-coordinate noise std `12 K √Λ̂ ln^a(Bd/τ) √(2d ln(2.5/δ)) / (εB)`.
    pub noise_std: f64,
    /// Per-coordinate histogram budget `(ε / (4√(2d ln(4/δ))), δ / (4d))`.
    pub coord_budget: PrivacyBudget,
}

impl MeanCalibration {
    pub fn new(b: usize, d: usize, lambda_hat: f64, budget: PrivacyBudget, tau: f64, k_const: f64, a: f64) -> Result<Self> {
        let (bf, df) = (b as f64, d as f64);
        let (eps, delta) = (budget.epsilon(), budget.delta());
        let scale = k_const * lambda_hat.sqrt();
        let log_bd = (bf * df / tau).ln().powf(a);
        let coord_budget = PrivacyBudget::new(
            eps / (4.0 * (2.0 * df * (4.0 / delta).ln()).sqrt()),
            delta / (4.0 * df),
        )?;
        Ok(MeanCalibration {
            bucket_width: 2f64.powf(0.25) * scale * (2.0 * bf / tau).ln().powf(a),
            radius: 3.0 * scale * log_bd,
            noise_std: 12.0 * scale * log_bd * (2.0 * df * (2.5 / delta).ln()).sqrt() / (eps * bf),
            coord_budget,
        })
    }

    /// ℓ2 bound `√d · 2 · radius / B` on the change of the truncated mean
    /// between neighboring batches with fixed centers.
    pub fn sensitivity(&self, b: usize, d: usize) -> f64 {
        (d as f64).sqrt() * 2.0 * self.radius / b as f64
    }
}

/// Mean of `gradients` with coordinate `j` clamped to `[c_j − r, c_j + r]`.
pub fn truncated_mean(gradients: &[Vector], centers: &Vector, radius: f64) -> Vector {
    let clamped: Vec<Vector> = gradients
        .iter()
        .map(|g| g.zip_map(centers, |x, c| x.clamp(c - radius, c + radius)))
        .collect();
    mean_vectors(&clamped)
}

/// Private mean of `gradients` given a spread estimate `Λ̂`.
pub fn priv_mean(
    gradients: &[Vector],
    lambda_hat: f64,
    budget: PrivacyBudget,
    tau: f64,
    k_const: f64,
    a: f64,
    rng: &mut DpRng,
) -> Result<Vector> {
    if gradients.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(lambda_hat >= 0.0) {
        return Err(Error::InvalidInput(format!("range estimate must be >= 0, got {lambda_hat}")));
    }
    let (b, d) = (gradients.len(), gradients[0].len());
    let cal = MeanCalibration::new(b, d, lambda_hat, budget, tau, k_const, a)?;
    let bins = BinPartition::Linear { width: cal.bucket_width };
    let mut centers = Vector::zeros(d);
    for j in 0..d {
        let column: Vec<f64> = gradients.iter().map(|g| g[j]).collect();
        centers[j] = stable_histogram(&column, bins, cal.coord_budget, rng)
            .left_edge()
            .ok_or(Error::RangeFailure)?;
    }
    let mut mean = truncated_mean(gradients, &centers, cal.radius);
    if cal.noise_std > 0.0 {
        for v in mean.iter_mut() {
            *v += cal.noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(mean)
}

/// Index ranges `(range half, mean half)` of each step for `m` samples in
/// batches of `b`.
pub fn batch_plan(m: usize, b: usize, reuse_first_half: bool) -> Vec<(Range<usize>, Range<usize>)> {
    let h = b / 2;
    (0..m / b)
        .map(|t| {
            let start = t * b;
            let first = start..start + h;
            let second = if reuse_first_half { first.clone() } else { start + h..start + 2 * h };
            (first, second)
        })
        .collect()
}

/// One private top-eigenvector estimate in `Im(p)`.
///
/// Each step spends `(ε/2, δ/2)` on the range and `(ε/2, δ/2)` on the mean of
/// its own batch. A step whose histogram returns no bin leaves `ω` unchanged.
pub fn modified_dp_pca(
    samples: &[Sample],
    p: &Projector,
    budget: PrivacyBudget,
    cfg: &OracleConfig,
    round: usize,
    rng: &mut DpRng,
) -> Result<OracleOutput> {
    cfg.validate()?;
    let m = samples.len();
    let b = cfg.batch_size(m);
    if m < 2 * b {
        return Err(Error::InsufficientData { needed: 2 * b, got: m });
    }
    let plan = batch_plan(m, b, cfg.reuse_first_half);
    let half = budget.split(2);
    let tau_t = cfg.tau / (2.0 * plan.len() as f64);
    let k_sub = range_subsets(half, tau_t, cfg.c_range);
    if b / 2 < 2 * k_sub {
        // Every batch needs two gradients per PrivRange subset.
        return Err(Error::InsufficientData { needed: 4 * k_sub, got: b });
    }
    let schedule = cfg.schedule.schedule(&cfg.eigenvalues, round, m, cfg.noise_sigma)?;

    let mut w = random_start(p, rng)?;
    let mut bottoms = 0;
    for (t, (range_idx, mean_idx)) in plan.into_iter().enumerate() {
        let pw = p.apply(&w);
        let grads = |r: Range<usize>| -> Vec<Vector> {
            apply_all(&samples[r], &pw).iter().map(|g| p.apply(g)).collect()
        };
        let range_grads = grads(range_idx.clone());
        let lambda_hat = match priv_range(&range_grads, half, tau_t, cfg.c_range, rng)? {
            RangeEstimate::Value(v) => v,
            RangeEstimate::Bottom => {
                bottoms += 1;
                continue;
            }
        };
        let mean_grads = if mean_idx == range_idx { range_grads } else { grads(mean_idx) };
        let g_hat = match priv_mean(&mean_grads, lambda_hat, half, tau_t, cfg.k_const, cfg.a, rng) {
            Ok(g) => g,
            Err(Error::RangeFailure) => {
                bottoms += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let next = &w + p.apply(&g_hat) * schedule.lr(t + 1);
        w = renormalize(p, &next, rng)?;
    }
    Ok(OracleOutput { direction: w, bottoms, retries: 0 })
}

/// `x · min(1, β/‖x‖)`. Vectors within a relative `1e−12` of the threshold
/// are returned unchanged so that clipping is idempotent.
pub fn clip_l2(x: &Vector, beta: f64) -> Vector {
    let norm = x.norm();
    if norm <= beta * (1.0 + 1e-12) {
        x.clone()
    } else {
        x * (beta / norm)
    }
}

/// Clip threshold `β = C λ_1 √d (K γ ln^a(nd/ζ) + 1)` and noise multiplier
/// `α = C′ ln(n/δ) / (ε √n)` of [`dp_ojas`].
pub fn dp_ojas_constants(n: usize, d: usize, budget: PrivacyBudget, cfg: &OracleConfig) -> (f64, f64) {
    let (nf, df) = (n as f64, d as f64);
    let beta = cfg.c_clip
        * cfg.lambda1
        * df.sqrt()
        * (cfg.k_const * cfg.gamma * (nf * df / cfg.tau).ln().powf(cfg.a) + 1.0);
    let alpha = cfg.c_noise * (nf / budget.delta()).ln() / (budget.epsilon() * nf.sqrt());
    (beta, alpha)
}

/// Oja with clipped projected gradients and Gaussian noise `2βα z_t`.
pub fn dp_ojas(
    samples: &[Sample],
    p: &Projector,
    budget: PrivacyBudget,
    cfg: &OracleConfig,
    round: usize,
    rng: &mut DpRng,
) -> Result<OracleOutput> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let d = p.dim();
    let (beta, alpha) = dp_ojas_constants(samples.len(), d, budget, cfg);
    let noise = 2.0 * beta * alpha;
    let schedule = cfg.schedule.schedule(&cfg.eigenvalues, round, samples.len(), cfg.noise_sigma)?;
    let mut w = random_start(p, rng)?;
    for (i, a) in samples.iter().enumerate() {
        let g = p.apply(&a.apply(&p.apply(&w)));
        let mut step = clip_l2(&g, beta);
        if noise > 0.0 {
            for v in step.iter_mut() {
                *v += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let next = &w + p.apply(&step) * schedule.lr(i + 1);
        w = renormalize(p, &next, rng)?;
    }
    Ok(OracleOutput { direction: w, bottoms: 0, retries: 0 })
}

/// Subspace estimate of [`k_dp_pca`] with per-round diagnostics.
#[derive(Debug, Clone)]
pub struct DeflationOutput {
    pub basis: OrthoBasis,
    pub rounds: Vec<OracleOutput>,
}

impl DeflationOutput {
    pub fn bottoms(&self) -> usize {
        self.rounds.iter().map(|r| r.bottoms).sum()
    }

    pub fn retries(&self) -> usize {
        self.rounds.iter().map(|r| r.retries).sum()
    }
}

/// Deflation driver: round `i` runs `oracle` on the `i`-th block of
/// `⌊n/k⌋` samples with projector `P_{i−1}` and the full budget, then sets
/// `P_i = P_{i−1} − u_i u_iᵀ`.
pub fn k_dp_pca(
    samples: &[Sample],
    k: usize,
    budget: PrivacyBudget,
    oracle: &dyn EPcaOracle,
    rng: &mut DpRng,
) -> Result<DeflationOutput> {
    let d = samples.first().map(Sample::dim).unwrap_or(0);
    if k == 0 || k >= d {
        return Err(Error::InvalidInput(format!("need 1 <= k < d, got k={k}, d={d}")));
    }
    let m = samples.len() / k;
    let needed = k * oracle.min_samples();
    if m == 0 || samples.len() < needed {
        return Err(Error::InsufficientData { needed, got: samples.len() });
    }
    let mut p = Projector::identity(d);
    let mut columns = Vec::with_capacity(k);
    let mut rounds = Vec::with_capacity(k);
    for i in 0..k {
        let batch = &samples[i * m..(i + 1) * m];
        let wrap = |e: Error| Error::Oracle { round: i, source: Box::new(e) };
        let out = oracle.estimate(batch, &p, budget, i, rng).map_err(wrap)?;
        p = deflate(&p, &out.direction).map_err(wrap)?;
        columns.push(out.direction.clone());
        rounds.push(out);
    }
    let basis = orthonormalize(&Matrix::from_columns(&columns))?;
    Ok(DeflationOutput { basis, rounds })
}
