//! Comparison algorithms: input perturbation (DP-Gauss-1), output
//! perturbation with a privatized eigengap (DP-Gauss-2) and the noisy
//! power method.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::datagen::{weighted_sum, Sample};
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, sym_eig, Matrix, OrthoBasis, SymMatrix};
use crate::privacy::{
    advanced_composition_split, gaussian_sigma, laplace_noise, symmetric_gaussian_matrix, PrivacyBudget,
};
use crate::rng::DpRng;

/// Relative slack under which a value counts as already within its clip.
const CLIP_SLACK: f64 = 1e-12;

/// Clipping thresholds shared by the baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipThresholds {
    /// ℓ2 clip `β = C√λ_1 + σ√(d ln(n/ϑ))`.
    pub beta: f64,
    /// ℓ1 clip `α = σd + √(λ_1 d) + σ√(d ln(n/ϑ))`.
    pub alpha_l1: f64,
    /// Confidence `ϑ`.
    pub confidence: f64,
}

impl ClipThresholds {
    pub fn new(lambda1: f64, sigma: f64, d: usize, n: usize, confidence: f64, c: f64) -> Result<Self> {
        if !(lambda1 > 0.0 && sigma >= 0.0 && confidence > 0.0 && confidence < 1.0 && c > 0.0) || n == 0 {
            return Err(Error::InvalidInput(format!(
                "bad clip inputs: lambda1={lambda1}, sigma={sigma}, n={n}, confidence={confidence}, C={c}"
            )));
        }
        let df = d as f64;
        let tail = sigma * (df * (n as f64 / confidence).ln()).sqrt();
        Ok(ClipThresholds {
            beta: c * lambda1.sqrt() + tail,
            alpha_l1: sigma * df + (lambda1 * df).sqrt() + tail,
            confidence,
        })
    }
}

/// Output of a baseline.
#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub basis: OrthoBasis,
    /// Laplace resamples spent by DP-Gauss-2.
    pub retries: usize,
}

/// Factor `min(1, limit / value)`, equal to 1 within the clip slack.
fn shrink(value: f64, limit: f64) -> f64 {
    if value <= limit * (1.0 + CLIP_SLACK) {
        1.0
    } else {
        limit / value
    }
}

/// Weight `min(1, β²/Tr A)` of the trace clip.
pub fn trace_clip_weight(sample: &Sample, beta: f64) -> f64 {
    shrink(sample.trace(), beta * beta)
}

/// Weight `f²` with `f = min(1, β/√Tr A, α/Σ√A_ii)`; for `A = x xᵀ` this
/// clips `x` to `‖x‖₂ ≤ β` and `‖x‖₁ ≤ α`.
pub fn power_clip_weight(sample: &Sample, clips: &ClipThresholds) -> f64 {
    let f = shrink(sample.trace().sqrt(), clips.beta).min(shrink(sample.sqrt_diag_sum(), clips.alpha_l1));
    f * f
}

/// `Σ_i w_i A_i` with trace-clip weights.
pub fn trace_clipped_sum(samples: &[Sample], beta: f64) -> SymMatrix {
    let w: Vec<f64> = samples.iter().map(|s| trace_clip_weight(s, beta)).collect();
    weighted_sum(samples, &w)
}

fn check_k(samples: &[Sample], k: usize) -> Result<usize> {
    let d = samples.first().map(Sample::dim).unwrap_or(0);
    if samples.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if k == 0 || k >= d {
        return Err(Error::InvalidInput(format!("need 1 <= k < d, got k={k}, d={d}")));
    }
    Ok(d)
}

/// Noise scale `Δ_1 = β² √(2 ln(1.25/δ)) / ε` of DP-Gauss-1.
pub fn gauss1_scale(beta: f64, budget: PrivacyBudget) -> f64 {
    gaussian_sigma(beta * beta, budget)
}

/// Input perturbation: top-`k` eigenvectors of the trace-clipped sum plus a
/// symmetric Gaussian matrix of scale `Δ_1`.
pub fn dp_gauss_1(
    samples: &[Sample],
    k: usize,
    budget: PrivacyBudget,
    clips: &ClipThresholds,
    rng: &mut DpRng,
) -> Result<BaselineOutput> {
    let d = check_k(samples, k)?;
    let x = trace_clipped_sum(samples, clips.beta);
    let noise = symmetric_gaussian_matrix(d, gauss1_scale(clips.beta, budget), rng);
    let basis = sym_eig(&x.add(&noise))?.top(k);
    Ok(BaselineOutput { basis, retries: 0 })
}

/// Noise scale `Δ_2 = β² (1 + √(2 ln(1/δ))) / ε / |g − 2(1 + ln(1/δ)/ε)|` of
/// DP-Gauss-2 for a privatized gap `g`.
pub fn gauss2_scale(beta: f64, gap: f64, budget: PrivacyBudget) -> f64 {
    let (eps, l) = (budget.epsilon(), (1.0 / budget.delta()).ln());
    let numerator = beta * beta * (1.0 + (2.0 * l).sqrt()) / eps;
    if numerator == 0.0 {
        return 0.0;
    }
    numerator / (gap - 2.0 * (1.0 + l / eps)).abs()
}

/// Output perturbation: privatize the `k`-th eigengap of the clipped sum with
/// `Laplace(2/ε)` (resampled while nonpositive, at most `max_retries` times),
/// perturb `V_k V_kᵀ` by a symmetric Gaussian of scale `Δ_2` and return the
/// top-`k` eigenvectors of the result.
pub fn dp_gauss_2(
    samples: &[Sample],
    k: usize,
    budget: PrivacyBudget,
    clips: &ClipThresholds,
    max_retries: usize,
    rng: &mut DpRng,
) -> Result<BaselineOutput> {
    let d = check_k(samples, k)?;
    if max_retries == 0 {
        return Err(Error::InvalidInput("max_retries must be >= 1".into()));
    }
    let x = trace_clipped_sum(samples, clips.beta);
    let eig = sym_eig(&x)?;
    let raw_gap = eig.gap(k);
    let scale = 2.0 / budget.epsilon();
    let mut retries = 0;
    let gap = loop {
        let noise = if scale > 0.0 { laplace_noise(scale, rng) } else { 0.0 };
        let g = raw_gap + noise;
        if g > 0.0 {
            break g;
        }
        if retries == max_retries {
            return Err(Error::GapFailure { retries });
        }
        retries += 1;
    };
    let vk = eig.top(k);
    let proj = SymMatrix::symmetrize(&(vk.matrix() * vk.matrix().transpose()));
    let noise = symmetric_gaussian_matrix(d, gauss2_scale(clips.beta, gap, budget), rng);
    let basis = sym_eig(&proj.add(&noise))?.top(k);
    Ok(BaselineOutput { basis, retries })
}

/// How the power method's per-iteration noise is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerCalibration {
    /// Per-entry std `βα √(4L ln(1/δ)) / ε`.
    Formula,
    /// Gaussian mechanism with sensitivity `βα` at the advanced-composition
    /// budget for `L` accesses. Requires `ε ≤ 0.9`.
    AdvancedComposition,
}

/// Per-entry noise std of the power method.
pub fn power_noise_std(clips: &ClipThresholds, budget: PrivacyBudget, iterations: usize, calibration: PowerCalibration) -> Result<f64> {
    let sens = clips.beta * clips.alpha_l1;
    Ok(match calibration {
        PowerCalibration::Formula => {
            sens * (4.0 * iterations as f64 * (1.0 / budget.delta()).ln()).sqrt() / budget.epsilon()
        }
        PowerCalibration::AdvancedComposition => {
            gaussian_sigma(sens, advanced_composition_split(budget, iterations)?)
        }
    })
}

/// Noisy power method `Y_{t+1} = orthonormalize(X Y_t + G_t)` on the clipped sum.
pub fn dp_power_method(
    samples: &[Sample],
    k: usize,
    budget: PrivacyBudget,
    clips: &ClipThresholds,
    iterations: usize,
    calibration: PowerCalibration,
    rng: &mut DpRng,
) -> Result<BaselineOutput> {
    let d = check_k(samples, k)?;
    if iterations == 0 {
        return Err(Error::InvalidInput("power method needs L >= 1".into()));
    }
    let std = power_noise_std(clips, budget, iterations, calibration)?;
    let w: Vec<f64> = samples.iter().map(|s| power_clip_weight(s, clips)).collect();
    let x = weighted_sum(samples, &w);
    let mut y = OrthoBasis::random(d, k, rng);
    for _ in 0..iterations {
        let g = Matrix::from_fn(d, k, |_, _| std * rng.sample::<f64, _>(StandardNormal));
        y = orthonormalize(&(x.matrix() * y.matrix() + g))?;
    }
    Ok(BaselineOutput { basis: y, retries: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::spiked_rank1;
    use crate::linalg::{subspace_sine, Projector, Vector};
    use crate::rng::{seeded, substream};

    fn budget(e: f64, d: f64) -> PrivacyBudget {
        PrivacyBudget::new(e, d).unwrap()
    }

    fn clips(beta: f64, alpha: f64) -> ClipThresholds {
        ClipThresholds { beta, alpha_l1: alpha, confidence: 0.01 }
    }

    #[test]
    fn thresholds_formula() {
        let c = ClipThresholds::new(10.0, 0.025, 200, 1000, 0.01, 1.0).unwrap();
        let tail = 0.025 * (200.0 * (1000.0f64 / 0.01).ln()).sqrt();
        assert!((c.beta - (10f64.sqrt() + tail)).abs() < 1e-12);
        assert!((c.alpha_l1 - (0.025 * 200.0 + (2000.0f64).sqrt() + tail)).abs() < 1e-12);
        assert!(c.alpha_l1 >= c.beta);
    }

    #[test]
    fn gauss1_scale_example() {
        // δ = 1.25 e^{−1} makes 2 ln(1.25/δ) = 2.
        let b = budget(1.0, 1.25 * (-1.0f64).exp());
        assert!((gauss1_scale(1.0, b) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn clipping_identity_and_idempotence() {
        let samples: Vec<Sample> = spiked_rank1(6, 4.0, 0.5, 1).unwrap().take_samples(200);
        let loose = clips(1e3, 1e4);
        for s in &samples {
            assert_eq!(trace_clip_weight(s, loose.beta), 1.0);
            assert_eq!(power_clip_weight(s, &loose), 1.0);
        }
        let tight = clips(1.0, 1.5);
        for s in &samples {
            for (w1, rule) in [
                (trace_clip_weight(s, tight.beta), 0),
                (power_clip_weight(s, &tight), 1),
            ] {
                let Sample::Outer(x) = s else { unreachable!() };
                let clipped = Sample::Outer(x * w1.sqrt());
                let w2 = if rule == 0 { trace_clip_weight(&clipped, tight.beta) } else { power_clip_weight(&clipped, &tight) };
                assert_eq!(w2, 1.0);
            }
            let Sample::Outer(x) = s else { unreachable!() };
            let f = power_clip_weight(s, &tight).sqrt();
            assert!((x * f).norm() <= tight.beta * (1.0 + 1e-12));
            assert!((x * f).lp_norm(1) <= tight.alpha_l1 * (1.0 + 1e-12));
        }
        let v = Vector::from_vec(vec![3.0, 4.0]);
        let s = Sample::Dense(SymMatrix::outer(&v));
        assert!((trace_clip_weight(&s, 1.0) - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn gauss1_noiseless_is_clipped_pca() {
        let samples = spiked_rank1(8, 3.0, 0.3, 2).unwrap().take_samples(500);
        let c = clips(1.5, 10.0);
        let out = dp_gauss_1(&samples, 2, budget(f64::INFINITY, 0.01), &c, &mut seeded(0)).unwrap();
        let direct = sym_eig(&trace_clipped_sum(&samples, c.beta)).unwrap().top(2);
        let pa = Projector::onto(&out.basis);
        let pb = Projector::onto(&direct);
        assert!(pa.matrix().sub(pb.matrix()).matrix().amax() < 1e-10);
    }

    #[test]
    fn gauss2_noiseless_is_clipped_pca() {
        let samples = spiked_rank1(8, 3.0, 0.3, 2).unwrap().take_samples(500);
        let c = clips(1.5, 10.0);
        let out = dp_gauss_2(&samples, 1, budget(f64::INFINITY, 0.01), &c, 100, &mut seeded(0)).unwrap();
        let direct = sym_eig(&trace_clipped_sum(&samples, c.beta)).unwrap().top(1);
        assert!(subspace_sine(&out.basis, &direct) < 1e-10);
        assert_eq!(out.retries, 0);
    }

    #[test]
    fn gauss2_scale_reading() {
        let b = budget(1.0, 0.01);
        let l = 100f64.ln();
        let expect = 4.0 * (1.0 + (2.0 * l).sqrt()) / (50.0 - 2.0 * (1.0 + l)).abs();
        assert!((gauss2_scale(2.0, 50.0, b) - expect).abs() < 1e-12);
        assert_eq!(gauss2_scale(2.0, 50.0, budget(f64::INFINITY, 0.01)), 0.0);
    }

    #[test]
    fn gauss2_gap_failure() {
        // Identical samples have a zero gap for k = 2 in the isotropic part.
        let samples = vec![Sample::Dense(SymMatrix::identity(4)); 10];
        let c = clips(1e3, 1e3);
        let mut failures = 0;
        for seed in 0..200 {
            match dp_gauss_2(&samples, 2, budget(1e-6, 0.01), &c, 1, &mut seeded(seed)) {
                Err(Error::GapFailure { retries }) => {
                    assert_eq!(retries, 1);
                    failures += 1;
                }
                Ok(out) => assert!(out.retries <= 1),
                Err(e) => panic!("{e}"),
            }
        }
        // Two nonpositive draws in a row: probability 1/4.
        assert!((25..=75).contains(&failures), "{failures}");
    }

    #[test]
    fn gauss2_huge_gap_recovers_direction() {
        let d = 5;
        let sigma = SymMatrix::diagonal(&[50.0, 0.1, 0.1, 0.1, 0.1]);
        let mut s = crate::datagen::gaussian_outer(d, &sigma, 3).unwrap();
        let samples = s.take_samples(100_000);
        let c = ClipThresholds::new(50.0, 0.1f64.sqrt(), d, samples.len(), 0.01, 3.0).unwrap();
        let out = dp_gauss_2(&samples, 1, budget(1.0, 0.01), &c, 100, &mut seeded(4)).unwrap();
        let e1 = crate::linalg::OrthoBasis::coordinate(d, &[0]);
        assert!(subspace_sine(&out.basis, &e1) <= 0.05);
    }

    #[test]
    fn power_method_noiseless() {
        let sigma = SymMatrix::diagonal(&[5.0, 3.0, 1.0]);
        let samples = vec![Sample::Dense(sigma); 3];
        let c = clips(1e3, 1e3);
        let out = dp_power_method(&samples, 2, budget(f64::INFINITY, 0.01), &c, 50, PowerCalibration::Formula, &mut seeded(5))
            .unwrap();
        let span = crate::linalg::OrthoBasis::coordinate(3, &[0, 1]);
        assert!(subspace_sine(&out.basis, &span) <= 1e-6);
    }

    #[test]
    fn power_noise_calibrations() {
        let c = clips(2.0, 3.0);
        let b = budget(1.0, 0.01);
        let f = power_noise_std(&c, b, 10, PowerCalibration::Formula).unwrap();
        assert!((f - 6.0 * (40.0 * 100f64.ln()).sqrt()).abs() < 1e-12);
        assert!(matches!(
            power_noise_std(&c, b, 10, PowerCalibration::AdvancedComposition),
            Err(Error::OutOfRange(_))
        ));
        assert!(power_noise_std(&c, budget(0.5, 0.01), 10, PowerCalibration::AdvancedComposition).unwrap() > 0.0);
    }

    #[test]
    fn baselines_return_orthonormal_bases() {
        let samples = spiked_rank1(10, 10.0, 0.1, 6).unwrap().take_samples(300);
        let c = ClipThresholds::new(10.0, 0.1, 10, 300, 0.01, 1.0).unwrap();
        let b = budget(1.0, 0.01);
        for seed in 0..5 {
            let mut rng = substream(seed, &[1]);
            let outs = [
                dp_gauss_1(&samples, 3, b, &c, &mut rng).unwrap(),
                dp_gauss_2(&samples, 3, b, &c, 100, &mut rng).unwrap(),
                dp_power_method(&samples, 3, b, &c, 10, PowerCalibration::Formula, &mut rng).unwrap(),
            ];
            for o in outs {
                assert_eq!(o.basis.cols(), 3);
                assert!(o.basis.orthonormality_error() <= 1e-10);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn gauss2_scale_is_nonnegative_with_noiseless_limit(
            beta in 0.1f64..10.0,
            gap in 0.0f64..1e4,
            eps in 0.05f64..5.0,
        ) {
            let scale = gauss2_scale(beta, gap, PrivacyBudget::new(eps, 0.01).unwrap());
            proptest::prop_assert!(scale >= 0.0);
            proptest::prop_assert_eq!(gauss2_scale(beta, gap, PrivacyBudget::new(f64::INFINITY, 0.01).unwrap()), 0.0);
        }
    }
}
