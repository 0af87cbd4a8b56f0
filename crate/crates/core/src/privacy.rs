//! Differential privacy mechanisms and budget arithmetic.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

/// An `(ε, δ)` pair. `ε = +∞` is accepted and denotes the noiseless limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidInput(format!("delta must be in (0, 1), got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `(ε / parts, δ / parts)`, for basic sequential composition.
    pub fn split(&self, parts: usize) -> Self {
        let p = parts.max(1) as f64;
        PrivacyBudget {
            epsilon: self.epsilon / p,
            delta: self.delta / p,
        }
    }
}

/// Per-access budget that makes `k` sequential accesses `(ε, δ)`-DP under
/// advanced composition: `(ε / (2√(2k ln(2/δ))), δ / (2k))`.
pub fn advanced_composition_split(budget: PrivacyBudget, k: usize) -> Result<PrivacyBudget> {
    if budget.epsilon > 0.9 {
        return Err(Error::OutOfRange(format!(
            "advanced composition needs epsilon <= 0.9, got {}",
            budget.epsilon
        )));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let kf = k as f64;
    let eps = budget.epsilon / (2.0 * (2.0 * kf * (2.0 / budget.delta).ln()).sqrt());
    Ok(PrivacyBudget {
        epsilon: eps,
        delta: budget.delta / (2.0 * kf),
    })
}

/// Noise scale of the Gaussian mechanism: `Δ₂ · sqrt(2 ln(1.25/δ)) / ε`.
pub fn gaussian_sigma(l2_sensitivity: f64, budget: PrivacyBudget) -> f64 {
    l2_sensitivity * (2.0 * (1.25 / budget.delta).ln()).sqrt() / budget.epsilon
}

/// `value + N(0, σ² I)` calibrated to the given ℓ2 sensitivity.
pub fn gaussian_mechanism(
    value: &Vector,
    l2_sensitivity: f64,
    budget: PrivacyBudget,
    rng: &mut impl Rng,
) -> Result<Vector> {
    if !(l2_sensitivity > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sensitivity must be > 0, got {l2_sensitivity}"
        )));
    }
    let sigma = gaussian_sigma(l2_sensitivity, budget);
    Ok(value.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
}

/// Symmetric matrix whose upper triangle (diagonal included) is i.i.d.
/// `N(0, σ²)`, mirrored below the diagonal.
pub fn symmetric_gaussian_matrix(dim: usize, sigma: f64, rng: &mut impl Rng) -> SymMatrix {
    SymMatrix::from_upper_fn(dim, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

/// One `Laplace(0, scale)` draw by inverse CDF.
pub fn laplace_noise(scale: f64, rng: &mut impl Rng) -> f64 {
    // u uniform on (-1/2, 1/2]; 1 - 2|u| stays in [0, 1) so we guard ln(0).
    let u: f64 = rng.random::<f64>() - 0.5;
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -scale * u.signum() * tail.ln()
}

/// Smallest bin index of the geometric partition.
pub const GEOMETRIC_MIN_INDEX: i64 = -400;
/// Largest bin index of the geometric partition.
pub const GEOMETRIC_MAX_INDEX: i64 = 400;
/// Index reserved for the underflow bin `[0, 2^-100)`.
pub const UNDERFLOW_INDEX: i64 = i64::MIN;

/// A partition of the real line into countably many bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinPartition {
    /// Quarter-octave bins `[2^(j/4), 2^((j+1)/4))` for `j ∈ [−400, 400]`,
    /// an underflow bin `[0, 2^−100)` that also absorbs negative values, and
    /// the outermost bins extended to cover everything above.
    Geometric,
    /// Half-open bins `(jw, (j+1)w]`. A zero width puts every distinct value
    /// in its own bin.
    Linear { width: f64 },
}

impl BinPartition {
    /// Bin index of `x`.
    pub fn index(&self, x: f64) -> i64 {
        match *self {
            BinPartition::Geometric => {
                if !(x >= 2f64.powi(-100)) {
                    UNDERFLOW_INDEX
                } else {
                    let edge = |j: i64| 2f64.powf(j as f64 / 4.0);
                    let mut j = ((4.0 * x.log2()).floor() as i64)
                        .clamp(GEOMETRIC_MIN_INDEX, GEOMETRIC_MAX_INDEX);
                    // Snap to the edges returned by `left_edge`.
                    while j < GEOMETRIC_MAX_INDEX && edge(j + 1) <= x {
                        j += 1;
                    }
                    while j > GEOMETRIC_MIN_INDEX && edge(j) > x {
                        j -= 1;
                    }
                    j
                }
            }
            BinPartition::Linear { width } => {
                if width > 0.0 {
                    ((x / width).ceil() - 1.0) as i64
                } else {
                    // Order-preserving key for exact values.
                    let bits = x.to_bits() as i64;
                    if bits < 0 { bits ^ i64::MAX } else { bits }
                }
            }
        }
    }

    /// Left edge of bin `index`.
    pub fn left_edge(&self, index: i64) -> f64 {
        match *self {
            BinPartition::Geometric => {
                if index == UNDERFLOW_INDEX {
                    0.0
                } else {
                    2f64.powf(index as f64 / 4.0)
                }
            }
            BinPartition::Linear { width } => {
                if width > 0.0 {
                    index as f64 * width
                } else {
                    let bits = if index < 0 { index ^ i64::MAX } else { index };
                    f64::from_bits(bits as u64)
                }
            }
        }
    }
}

/// Outcome of [`stable_histogram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistogramResult {
    Bottom,
    Bin {
        index: i64,
        left_edge: f64,
        noisy_count: f64,
    },
}

impl HistogramResult {
    pub fn left_edge(&self) -> Option<f64> {
        match self {
            HistogramResult::Bottom => None,
            HistogramResult::Bin { left_edge, .. } => Some(*left_edge),
        }
    }
}

/// Suppression threshold `1 + 2 ln(2/δ) / ε` of the stability histogram.
pub fn stability_threshold(budget: PrivacyBudget) -> f64 {
    1.0 + 2.0 * (2.0 / budget.delta).ln() / budget.epsilon
}

/// Stability-based `(ε, δ)`-DP histogram returning the heaviest bin.
///
/// Each occupied bin gets `Laplace(2/ε)` noise on its count (bins visited in
/// index order); bins whose noisy count falls below
/// [`stability_threshold`] are suppressed. Returns the surviving bin with the
/// largest noisy count, or `Bottom` when none survive.
pub fn stable_histogram(
    points: &[f64],
    bins: BinPartition,
    budget: PrivacyBudget,
    rng: &mut impl Rng,
) -> HistogramResult {
    if points.is_empty() {
        return HistogramResult::Bottom;
    }
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &x in points {
        *counts.entry(bins.index(x)).or_default() += 1;
    }
    let threshold = stability_threshold(budget);
    let scale = 2.0 / budget.epsilon;
    let mut best = HistogramResult::Bottom;
    let mut best_count = f64::NEG_INFINITY;
    for (&index, &count) in &counts {
        let noise = if scale > 0.0 { laplace_noise(scale, rng) } else { 0.0 };
        let noisy = count as f64 + noise;
        if noisy < threshold {
            continue;
        }
        if noisy > best_count {
            best_count = noisy;
            best = HistogramResult::Bin {
                index,
                left_edge: bins.left_edge(index),
                noisy_count: noisy,
            };
        }
    }
    best
}
