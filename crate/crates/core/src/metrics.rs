//! Utility of a subspace estimate and numerical checks of the deflation lemmas.

use crate::error::{Error, Result};
use crate::linalg::{principal_sine, sym_eig, Matrix, OrthoBasis, Projector, SymMatrix, Vector};

/// Utility of a `k`-dimensional estimate `U` against `Σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityReport {
    /// `ζ² = max(0, 1 − ⟨UUᵀ, Σ⟩ / ⟨V_kV_kᵀ, Σ⟩)`.
    pub zeta2: f64,
    /// `⟨UUᵀ, Σ⟩`.
    pub captured_energy: f64,
    /// `Σ_{i≤k} λ_i`.
    pub optimal_energy: f64,
    /// `sin ∠(u, v_1)`, for `k = 1` only.
    pub sine: Option<f64>,
    /// `‖UUᵀ − V_kV_kᵀ‖_F²`.
    pub frob_sq: f64,
}

impl UtilityReport {
    /// `captured / optimal`, the increasing-is-better utility used in plots.
    pub fn energy_ratio(&self) -> f64 {
        if self.optimal_energy == 0.0 {
            1.0
        } else {
            self.captured_energy / self.optimal_energy
        }
    }
}

/// `⟨UUᵀ, Σ⟩ = Tr(UᵀΣU)`.
pub fn captured_energy(u: &OrthoBasis, sigma: &SymMatrix) -> f64 {
    let su = sigma.matrix() * u.matrix();
    u.matrix().dot(&su)
}

pub fn zeta_utility(u: &OrthoBasis, sigma: &SymMatrix, k: usize) -> Result<UtilityReport> {
    if u.cols() != k || u.dim() != sigma.dim() {
        return Err(Error::InvalidInput(format!(
            "basis is {}x{}, expected {}x{k}",
            u.dim(),
            u.cols(),
            sigma.dim()
        )));
    }
    let eig = sym_eig(sigma)?;
    let vk = eig.top(k);
    let optimal = eig.top_sum(k);
    let captured = captured_energy(u, sigma);
    let zeta2 = if optimal == 0.0 { 0.0 } else { (1.0 - captured / optimal).clamp(0.0, 1.0) };
    let sine = (k == 1).then(|| principal_sine(&u.column(0), &eig.vector(0)));
    Ok(UtilityReport {
        zeta2,
        captured_energy: captured,
        optimal_energy: optimal,
        sine,
        frob_sq: subspace_frob_sq(u, &vk),
    })
}

/// `‖UUᵀ − VVᵀ‖_F² = 2k − 2‖UᵀV‖_F²`, clamped at 0.
pub fn subspace_frob_sq(u: &OrthoBasis, v: &OrthoBasis) -> f64 {
    assert_eq!(u.cols(), v.cols(), "bases must have equal rank");
    let c = u.matrix().transpose() * v.matrix();
    (2.0 * u.cols() as f64 - 2.0 * c.norm_squared()).max(0.0)
}

/// Two sides of an inequality `lhs ≥ rhs`, with `slack = lhs − rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Witness {
    fn new(lhs: f64, rhs: f64) -> Self {
        Witness { lhs, rhs, slack: lhs - rhs }
    }
}

/// `ζ² ≥ ‖UUᵀ − V_kV_kᵀ‖_F² Δ_k / (2 Σ_{i≤k} λ_i)`.
pub fn check_reduction_lemma(u: &OrthoBasis, sigma: &SymMatrix, k: usize) -> Result<Witness> {
    let eig = sym_eig(sigma)?;
    let gap = eig.gap(k);
    if !(gap > 0.0) {
        return Err(Error::InvalidInput(format!("eigengap Δ_{k} = {gap} is not positive")));
    }
    let report = zeta_utility(u, sigma, k)?;
    let rhs = report.frob_sq * gap / (2.0 * eig.top_sum(k));
    Ok(Witness::new(report.zeta2, rhs))
}

/// `⟨wwᵀ, Σ⟩ ≥ (1 − sin²∠(w, v)) ⟨vvᵀ, Σ⟩` for a top eigenvector `v`.
pub fn check_sin_to_epca(w: &Vector, v: &Vector, sigma: &SymMatrix) -> Result<Witness> {
    let eig = sym_eig(sigma)?;
    let sv = sigma.mul_vec(v);
    let rayleigh = v.dot(&sv);
    let scale = eig.values[0].abs().max(1.0);
    if (sv - v * rayleigh).norm() > 1e-8 * scale || rayleigh < eig.values[0] - 1e-8 * scale {
        return Err(Error::InvalidInput("v is not a top eigenvector of sigma".into()));
    }
    let s = principal_sine(w, v);
    Ok(Witness::new(w.dot(&sigma.mul_vec(w)), (1.0 - s * s) * rayleigh))
}

/// Slacks of the eigengap perturbation bounds for `P = I − uuᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigengapWitness {
    /// `Δ = 8 λ_1 √ξ (1 + √ξ)`.
    pub delta: f64,
    /// `Δ − max_i |λ̃_i − λ_{i+1}|` over the top `d − 1` eigenvalues of `PΣP`.
    pub deviation_slack: f64,
    /// `(λ̃_1 − λ̃_2) − (λ_2 − λ_3 − 2Δ)`.
    pub gap_slack: f64,
}

pub fn check_eigengap_perturbation(sigma: &SymMatrix, u: &Vector, xi: f64) -> Result<EigengapWitness> {
    let d = sigma.dim();
    if d < 3 {
        return Err(Error::InvalidInput(format!("need d >= 3, got {d}")));
    }
    let eig = sym_eig(sigma)?;
    let s = principal_sine(u, &eig.vector(0));
    if !(xi >= 0.0) || s * s > xi + 1e-12 {
        return Err(Error::InvalidInput(format!("sin² = {} exceeds xi = {xi}", s * s)));
    }
    let p = Projector::complement_of(&OrthoBasis::try_new(Matrix::from_column_slice(d, 1, u.normalize().as_slice()))?);
    let tilde = sym_eig(&sigma.sandwich(&p))?.values;
    let l = &eig.values;
    let rx = xi.sqrt();
    let delta = 8.0 * l[0] * rx * (1.0 + rx);
    let deviation = (0..d - 1).map(|i| (tilde[i] - l[i + 1]).abs()).fold(0.0, f64::max);
    Ok(EigengapWitness {
        delta,
        deviation_slack: delta - deviation,
        gap_slack: (tilde[0] - tilde[1]) - (l[1] - l[2] - 2.0 * delta),
    })
}

/// `Tr(VVᵀX) − Tr(UUᵀX) ≥ ‖UUᵀ − VVᵀ‖_F² Δ_k / 2` with `V` the top-`k`
/// eigenvectors of `X` and `Δ_k` its `k`-th eigengap.
pub fn check_trace_frobenius(u: &OrthoBasis, x: &SymMatrix) -> Result<Witness> {
    let k = u.cols();
    let eig = sym_eig(x)?;
    let v = eig.top(k);
    let lhs = captured_energy(&v, x) - captured_energy(u, x);
    Ok(Witness::new(lhs, subspace_frob_sq(u, &v) * eig.gap(k) / 2.0))
}
