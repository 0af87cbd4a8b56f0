//! Dense symmetric linear algebra: eigendecomposition, projectors,
//! orthonormal bases and principal angles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Tolerance for the projector invariants.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Tolerance for [`OrthoBasis`] orthonormality.
pub const ORTHO_TOL: f64 = 1e-10;
/// Default lower bound on `‖Pw‖` in [`project_unit`].
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Dense symmetric `d × d` matrix. Entries `(i, j)` and `(j, i)` are always
/// bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Builds a matrix from its upper triangle; `f(i, j)` is only called for `i <= j`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..=j {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymMatrix(m)
    }

    /// Wraps a matrix that is already exactly symmetric.
    pub fn try_from_matrix(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in 0..j {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// `(m + mᵀ) / 2`, which is exactly symmetric.
    pub fn symmetrize(m: &Matrix) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.nrows();
        Self::from_upper_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(Matrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(Matrix::identity(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        SymMatrix(Matrix::from_diagonal(&Vector::from_column_slice(values)))
    }

    /// `x xᵀ`.
    pub fn outer(x: &Vector) -> Self {
        Self::from_upper_fn(x.len(), |i, j| x[i] * x[j])
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        &self.0 * x
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 - &other.0)
    }

    /// Frobenius inner product `⟨A, B⟩ = Tr(AᵀB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// `P A P` for a projector `P`.
    pub fn sandwich(&self, p: &Projector) -> SymMatrix {
        let pm = p.matrix().matrix();
        Self::symmetrize(&(pm * &self.0 * pm))
    }
}

/// Orthogonal projection matrix together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: SymMatrix,
    rank: usize,
    // Orthonormal columns `R` with `P = I − R Rᵀ`, when known.
    removed: Option<Matrix>,
}

impl Projector {
    pub fn identity(dim: usize) -> Self {
        Projector {
            matrix: SymMatrix::identity(dim),
            rank: dim,
            removed: Some(Matrix::zeros(dim, 0)),
        }
    }

    /// Projector onto the span of `basis`.
    pub fn onto(basis: &OrthoBasis) -> Self {
        let u = basis.matrix();
        Projector {
            matrix: SymMatrix::symmetrize(&(u * u.transpose())),
            rank: basis.cols(),
            removed: None,
        }
    }

    /// Projector onto the orthogonal complement of `basis`.
    pub fn complement_of(basis: &OrthoBasis) -> Self {
        let d = basis.dim();
        let u = basis.matrix();
        let m = Matrix::identity(d, d) - u * u.transpose();
        Projector {
            matrix: SymMatrix::symmetrize(&m),
            rank: d - basis.cols(),
            removed: Some(u.clone()),
        }
    }

    /// Checks the projector invariants on an arbitrary symmetric matrix.
    pub fn try_from_sym(matrix: SymMatrix) -> Result<Self> {
        let residual = projector_residual(&matrix);
        if residual > PROJECTOR_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not idempotent (residual {residual:.3e})"
            )));
        }
        let trace = matrix.trace();
        let rank = trace.round();
        if (trace - rank).abs() > 1e-8 || rank < 0.0 {
            return Err(Error::InvalidInput(format!(
                "projector trace {trace} is not an integer"
            )));
        }
        Ok(Projector {
            matrix,
            rank: rank as usize,
            removed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn apply(&self, w: &Vector) -> Vector {
        match &self.removed {
            Some(r) => w - r * (r.transpose() * w),
            None => self.matrix.mul_vec(w),
        }
    }

    /// `‖Pu − u‖₂`.
    pub fn image_residual(&self, u: &Vector) -> f64 {
        (self.apply(u) - u).norm()
    }

    /// `max |P·P − P|` over all entries.
    pub fn idempotence_residual(&self) -> f64 {
        projector_residual(&self.matrix)
    }
}

fn projector_residual(m: &SymMatrix) -> f64 {
    let a = m.matrix();
    (a * a - a).amax()
}

/// `d × k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis(Matrix);

impl OrthoBasis {
    /// Wraps `m` after checking `‖UᵀU − I‖_max ≤ 1e−10`.
    pub fn try_new(m: Matrix) -> Result<Self> {
        let err = orthonormality_error(&m);
        if err > ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "columns are not orthonormal (error {err:.3e})"
            )));
        }
        Ok(OrthoBasis(m))
    }

    /// Standard basis vectors `e_i` for the given indices.
    pub fn coordinate(dim: usize, indices: &[usize]) -> Self {
        let mut m = Matrix::zeros(dim, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            m[(i, c)] = 1.0;
        }
        OrthoBasis(m)
    }

    /// Haar-distributed random basis: Gram–Schmidt of a Gaussian matrix.
    pub fn random(dim: usize, cols: usize, rng: &mut impl Rng) -> Self {
        loop {
            let g = Matrix::from_fn(dim, cols, |_, _| rng.sample(StandardNormal));
            if let Ok(b) = orthonormalize(&g) {
                return b;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector {
        self.0.column(i).into_owned()
    }

    /// `U R` for an orthogonal `k × k` matrix `R`.
    pub fn rotate(&self, r: &Matrix) -> Result<Self> {
        Self::try_new(&self.0 * r)
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }
}

fn orthonormality_error(m: &Matrix) -> f64 {
    let k = m.ncols();
    (m.transpose() * m - Matrix::identity(k, k)).amax()
}

/// Eigenvalues sorted descending with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenPairs {
    pub fn vector(&self, i: usize) -> Vector {
        self.vectors.column(i).into_owned()
    }

    /// Leading `k` eigenvectors.
    pub fn top(&self, k: usize) -> OrthoBasis {
        OrthoBasis(self.vectors.columns(0, k).into_owned())
    }

    /// `λ_k − λ_{k+1}` (1-based `k`).
    pub fn gap(&self, k: usize) -> f64 {
        self.values[k - 1] - self.values[k]
    }

    pub fn top_sum(&self, k: usize) -> f64 {
        self.values[..k].iter().sum()
    }
}

/// Full symmetric eigendecomposition, eigenvalues descending.
///
/// Each eigenvector is signed so that its entry of largest magnitude is
/// positive. Equal eigenvalues keep the solver's order.
pub fn sym_eig(m: &SymMatrix) -> Result<EigenPairs> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let d = m.dim();
    let eig = SymmetricEigen::new(m.matrix().clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Matrix::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(c, &(col * sign));
    }
    Ok(EigenPairs { values, vectors })
}

/// `P − uuᵀ`, removing the unit direction `u` from the image of `p`.
///
/// `u` is re-projected onto `Im(p)` and renormalized before the update so the
/// result stays idempotent to machine precision.
pub fn deflate(p: &Projector, u: &Vector) -> Result<Projector> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "deflation direction has norm {norm}, expected 1"
        )));
    }
    if p.rank() == 0 {
        return Err(Error::Deflation { residual: 1.0 });
    }
    let residual = p.image_residual(u);
    if residual > 1e-6 {
        return Err(Error::Deflation { residual });
    }
    let pu = p.apply(u);
    let v = &pu / pu.norm();
    let m = p.matrix().sub(&SymMatrix::outer(&v));
    let removed = p.removed.as_ref().map(|r| {
        let mut grown = r.clone().resize_horizontally(r.ncols() + 1, 0.0);
        grown.set_column(r.ncols(), &v);
        grown
    });
    Ok(Projector {
        matrix: m,
        rank: p.rank() - 1,
        removed,
    })
}

/// `Pw / ‖Pw‖`, failing with [`Error::DegenerateDirection`] when `‖Pw‖ ≤ tol`.
pub fn project_unit_tol(p: &Projector, w: &Vector, tol: f64) -> Result<Vector> {
    let pw = p.apply(w);
    let norm = pw.norm();
    if !(norm > tol) {
        return Err(Error::DegenerateDirection { norm });
    }
    Ok(pw / norm)
}

pub fn project_unit(p: &Projector, w: &Vector) -> Result<Vector> {
    project_unit_tol(p, w, DEGENERATE_TOL)
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
pub fn orthonormalize(m: &Matrix) -> Result<OrthoBasis> {
    let (d, k) = m.shape();
    if k > d {
        return Err(Error::Rank { column: d });
    }
    let mut q = Matrix::zeros(d, k);
    for c in 0..k {
        let original = m.column(c).into_owned();
        let scale = original.norm();
        let mut v = original;
        for _pass in 0..2 {
            for prev in 0..c {
                let qp = q.column(prev);
                let coeff = qp.dot(&v);
                v.axpy(-coeff, &qp, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > 1e-10 * scale.max(f64::MIN_POSITIVE)) || !norm.is_finite() {
            return Err(Error::Rank { column: c });
        }
        q.set_column(c, &(v / norm));
    }
    Ok(OrthoBasis(q))
}

/// `sin ∠(u, v) = sqrt(1 − ⟨u, v⟩²)` for unit vectors.
pub fn principal_sine(u: &Vector, v: &Vector) -> f64 {
    let c = u.dot(v);
    (1.0 - c * c).max(0.0).sqrt().min(1.0)
}

/// Sine of the largest principal angle between the spans of `a` and `b`.
pub fn subspace_sine(a: &OrthoBasis, b: &OrthoBasis) -> f64 {
    let c = a.matrix().transpose() * b.matrix();
    let gram = SymMatrix::symmetrize(&(c.transpose() * &c));
    let smallest = sym_eig(&gram)
        .map(|e| e.values.last().copied().unwrap_or(1.0))
        .unwrap_or(0.0);
    (1.0 - smallest).max(0.0).sqrt().min(1.0)
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn random_unit(dim: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let g = Vector::from_fn(dim, |_, _| rng.sample(StandardNormal));
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

/// Random PSD matrix `G Gᵀ / d` with Gaussian `G`.
pub fn random_psd(dim: usize, rng: &mut impl Rng) -> SymMatrix {
    let g = Matrix::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
    SymMatrix::symmetrize(&(&g * g.transpose() / dim as f64))
}
