//! Oja's algorithm with projected updates and learning-rate schedules.

use crate::datagen::Sample;
use crate::error::{Error, Result};
use crate::linalg::{project_unit, random_unit, Projector, Vector};
use crate::rng::DpRng;

/// Step-size rule `η_t` for `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrKind {
    /// `1 / (1 + t)`.
    Harmonic,
    /// `1 / (20 σ λ_i + (λ_i − λ_{i+1}) t / ln n)`.
    KdppcaExperimental {
        sigma: f64,
        lambda_i: f64,
        lambda_next: f64,
        n: f64,
    },
    /// `α / (gap (β + t))`.
    Theoretical { alpha: f64, gap: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub kind: LrKind,
    /// Factor applied to every step size.
    pub multiplier: f64,
}

impl LrSchedule {
    pub fn new(kind: LrKind) -> Result<Self> {
        match kind {
            LrKind::Harmonic => {}
            LrKind::KdppcaExperimental { sigma, lambda_i, lambda_next, n } => {
                let gap = lambda_i - lambda_next;
                if !(sigma >= 0.0 && lambda_i > 0.0 && gap >= 0.0 && n > 1.0)
                    || (sigma * lambda_i == 0.0 && gap == 0.0)
                {
                    return Err(Error::InvalidInput(format!(
                        "experimental schedule needs sigma >= 0, lambda_i > 0, a nonnegative \
                         gap, n > 1 and a positive denominator (got {kind:?})"
                    )));
                }
            }
            LrKind::Theoretical { alpha, gap, beta } => {
                if !(gap > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "theoretical schedule needs a positive eigengap, got {gap}"
                    )));
                }
                if !(alpha > 0.0 && beta >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "theoretical schedule needs alpha > 0 and beta >= 0 (got {alpha}, {beta})"
                    )));
                }
            }
        }
        Ok(LrSchedule { kind, multiplier: 1.0 })
    }

    pub fn harmonic() -> Self {
        LrSchedule { kind: LrKind::Harmonic, multiplier: 1.0 }
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.multiplier *= c;
        self
    }

    /// `η_t`.
    pub fn lr(&self, t: usize) -> f64 {
        debug_assert!(t >= 1, "step index starts at 1");
        let t = t as f64;
        let eta = match self.kind {
            LrKind::Harmonic => 1.0 / (1.0 + t),
            LrKind::KdppcaExperimental { sigma, lambda_i, lambda_next, n } => {
                1.0 / (20.0 * sigma * lambda_i + (lambda_i - lambda_next) * t / n.ln())
            }
            LrKind::Theoretical { alpha, gap, beta } => alpha / (gap * (beta + t)),
        };
        eta * self.multiplier
    }
}

/// How a deflation driver builds the schedule for each round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrPolicy {
    Harmonic,
    /// [`LrKind::KdppcaExperimental`] with `λ_i, λ_{i+1}` taken from the model.
    KdppcaExperimental,
    /// [`LrKind::Theoretical`] with the round's eigengap taken from the model.
    Theoretical { alpha: f64, beta: f64 },
}

impl LrPolicy {
    /// Schedule for deflation round `round` (0-based) with `n` samples as the
    /// horizon. `eigenvalues` are those of `Σ`, descending.
    pub fn schedule(&self, eigenvalues: &[f64], round: usize, n: usize, sigma: f64) -> Result<LrSchedule> {
        let lambda = |i: usize| eigenvalues.get(i).copied().unwrap_or(0.0);
        match *self {
            LrPolicy::Harmonic => Ok(LrSchedule::harmonic()),
            LrPolicy::KdppcaExperimental => LrSchedule::new(LrKind::KdppcaExperimental {
                sigma,
                lambda_i: lambda(round),
                lambda_next: lambda(round + 1),
                n: (n as f64).max(std::f64::consts::E),
            }),
            LrPolicy::Theoretical { alpha, beta } => LrSchedule::new(LrKind::Theoretical {
                alpha,
                gap: lambda(round) - lambda(round + 1),
                beta,
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LrPolicy::Harmonic => "harmonic",
            LrPolicy::KdppcaExperimental => "kdppca_experimental",
            LrPolicy::Theoretical { .. } => "theoretical",
        }
    }
}

/// Random unit start in `Im(p)`, redrawn once if degenerate.
pub fn random_start(p: &Projector, rng: &mut DpRng) -> Result<Vector> {
    let d = p.dim();
    match project_unit(p, &random_unit(d, rng)) {
        Ok(w) => Ok(w),
        Err(Error::DegenerateDirection { .. }) => project_unit(p, &random_unit(d, rng)),
        Err(e) => Err(e),
    }
}

/// `P w' / ‖P w'‖`, replaced by a fresh random start if `P w'` vanishes.
pub fn renormalize(p: &Projector, w: &Vector, rng: &mut DpRng) -> Result<Vector> {
    match project_unit(p, w) {
        Err(Error::DegenerateDirection { .. }) => random_start(p, rng),
        other => other,
    }
}

/// Runs `ω_t = normalize(P(ω_{t−1} + η_t P A_t P ω_{t−1}))` over `samples`.
pub fn run_oja(samples: &[Sample], p: &Projector, schedule: &LrSchedule, rng: &mut DpRng) -> Result<Vector> {
    run_oja_observed(samples, p, schedule, rng, |_, _| {})
}

/// [`run_oja`], calling `observe(t, ω_t)` after every step.
pub fn run_oja_observed(
    samples: &[Sample],
    p: &Projector,
    schedule: &LrSchedule,
    rng: &mut DpRng,
    mut observe: impl FnMut(usize, &Vector),
) -> Result<Vector> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("Oja needs at least one sample".into()));
    }
    if p.rank() == 0 {
        return Err(Error::InvalidInput("projector has rank 0".into()));
    }
    let mut w = random_start(p, rng)?;
    for (i, a) in samples.iter().enumerate() {
        let t = i + 1;
        let g = p.apply(&a.apply(&p.apply(&w)));
        let next = &w + g * schedule.lr(t);
        w = renormalize(p, &next, rng)?;
        observe(t, &w);
    }
    Ok(w)
}
