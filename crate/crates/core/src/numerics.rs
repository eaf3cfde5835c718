//! Dense complex Hermitian linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexVector = DVector<Complex64>;

/// Relative eigenvalue cutoff separating the support of a PSD operator
/// from its numerical kernel.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-9;

/// Dense Hermitian matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let adj = m.adjoint();
        Self {
            m: (m + adj).scale(0.5),
        }
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    /// `|v><v|`
    pub fn projector(v: &ComplexVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.scale(s) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
        }
    }

    /// Adds `w |v><v|` in place.
    pub fn add_outer(&mut self, v: &ComplexVector, w: f64) {
        let d = self.dim();
        for c in 0..d {
            let vc = v[c].conj() * w;
            for r in 0..d {
                self.m[(r, c)] += v[r] * vc;
            }
        }
    }

    /// `A H A†` for a square `A` of matching dimension.
    pub fn congruence(&self, a: &HermitianOperator) -> Self {
        Self::symmetrized(&a.m * &self.m * a.m.adjoint())
    }

    /// Largest imaginary magnitude among the entries.
    pub fn max_imag(&self) -> f64 {
        self.m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude (used for scale-aware tolerances).
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl Eigensystem {
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = self.values.len();
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.values.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        &self.vectors * lam * self.vectors.adjoint()
    }

    /// Applies `f` to the spectrum and rebuilds the operator.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let d = self.values.len();
        let mut out = DMatrix::<Complex64>::zeros(d, d);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let col = self.vectors.column(k);
            for c in 0..d {
                let vc = col[c].conj() * w;
                for r in 0..d {
                    out[(r, c)] += col[r] * vc;
                }
            }
        }
        HermitianOperator::symmetrized(out)
    }
}

pub fn eigensystem(h: &HermitianOperator) -> Result<Eigensystem> {
    let d = h.dim();
    if d == 0 {
        return Ok(Eigensystem {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    if h.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::try_new(h.m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(h: &HermitianOperator) -> Result<Vec<f64>> {
    Ok(eigensystem(h)?.values)
}

/// Largest eigenvalue magnitude.
pub fn spectral_norm(h: &HermitianOperator) -> Result<f64> {
    let vals = eigenvalues(h)?;
    Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

pub fn min_eigenvalue(h: &HermitianOperator) -> Result<f64> {
    Ok(eigenvalues(h)?.first().copied().unwrap_or(0.0))
}

/// Pseudo-inverse square root on the support of a PSD operator.
///
/// Eigenvalues above `support_tol * lambda_max` map to `lambda^{-1/2}`, the
/// rest to zero.
pub fn pinv_sqrt(h: &HermitianOperator, support_tol: f64) -> Result<HermitianOperator> {
    let es = eigensystem(h)?;
    let scale = es.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lo) = es.values.first() {
        if lo < -support_tol * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotPsd(lo));
        }
    }
    let cut = support_tol * scale;
    Ok(es.map(|lam| if lam > cut && lam > 0.0 { lam.powf(-0.5) } else { 0.0 }))
}

/// Support projector with the same cutoff as [`pinv_sqrt`].
pub fn support_projector(h: &HermitianOperator, support_tol: f64) -> Result<HermitianOperator> {
    let es = eigensystem(h)?;
    let cut = support_tol * es.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(es.map(|lam| if lam > cut && lam > 0.0 { 1.0 } else { 0.0 }))
}

/// Vectors `v_x` of dimension `rank(G)` with `<v_x, v_y> = G_xy`.
///
/// Eigenvalues at or below `tol * lambda_max` are treated as zero; a
/// materially negative eigenvalue is an error.
pub fn gram_embed(g: &HermitianOperator, tol: f64) -> Result<Vec<ComplexVector>> {
    let es = eigensystem(g)?;
    let d = g.dim();
    let scale = es.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&lo) = es.values.first() {
        if lo < -tol.max(1e-12) * scale.max(1.0) {
            return Err(Error::NotPsd(lo));
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&k| es.values[k] > tol * scale && es.values[k] > 0.0).collect();
    // G = V diag(lam) V^dagger, so v_x[r] = sqrt(lam_r) * conj(V[x, r])
    Ok((0..d)
        .map(|x| {
            ComplexVector::from_iterator(
                kept.len(),
                kept.iter().map(|&k| es.vectors[(x, k)].conj() * es.values[k].sqrt()),
            )
        })
        .collect())
}

/// `<u, v>` with the first argument conjugated.
pub fn inner(u: &ComplexVector, v: &ComplexVector) -> Complex64 {
    u.dotc(v)
}
