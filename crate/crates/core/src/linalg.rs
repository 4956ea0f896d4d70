//! Dense complex linear algebra on top of `nalgebra`.
//!
//! Everything here works on square matrices of dimension `2^n` with `n` at
//! most about 12, so exact dense factorizations are used throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |M - M^dagger|` entrywise.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let (rows, cols) = m.shape();
    if rows != cols {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for i in 0..rows {
        for j in i..cols {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermitian_residual(m) <= tol
}

/// `(M + M^dagger) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Largest singular value of a square matrix.
///
/// Hermitian and anti-Hermitian inputs go through a Hermitian eigensolve of
/// the matrix itself; anything else through the eigenvalues of `M^dagger M`.
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(invalid(format!("spectral norm of non-square {rows}x{cols} matrix")));
    }
    if rows == 0 {
        return Ok(0.0);
    }
    let scale = max_abs(m);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let tol = 1e-12 * scale.max(1.0);
    let herm = if is_hermitian(m, tol) {
        hermitize(m)
    } else {
        let rotated = m * I;
        if is_hermitian(&rotated, tol) {
            hermitize(&rotated)
        } else {
            let gram = hermitize(&(m.adjoint() * m));
            let eig = gram.symmetric_eigen();
            return Ok(eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v)).max(0.0).sqrt());
        }
    };
    let eig = herm.symmetric_eigen();
    Ok(eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs())))
}

/// Eigendecomposition `H = V diag(values) V^dagger` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if !h.is_square() {
            return Err(invalid("eigendecomposition of non-square matrix"));
        }
        let eig = hermitize(h).symmetric_eigen();
        Ok(Self { values: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(g(lambda)) V^dagger`.
    pub fn apply_fn(&self, g: impl Fn(f64) -> Complex64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let factor = g(lambda);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= factor;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i tau H)`.
    pub fn exp_neg_i(&self, tau: f64) -> CMatrix {
        if tau == 0.0 {
            return identity(self.dim());
        }
        self.apply_fn(|lambda| Complex64::from_polar(1.0, -tau * lambda))
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }
}

/// Spectral data of a unitary: `U = Q diag(exp(i phases)) Q^dagger` with
/// phases in `(-pi, pi]`.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub phases: Vec<f64>,
    pub vectors: CMatrix,
    /// Largest off-diagonal modulus of the Schur factor, zero for an exactly normal input.
    pub schur_offdiag: f64,
}

impl UnitaryEigen {
    pub fn new(u: &CMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(invalid("unitary eigendecomposition of non-square matrix"));
        }
        let schur = nalgebra::linalg::Schur::new(u.clone());
        let (q, t) = schur.unpack();
        let n = t.nrows();
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(t[(i, j)].norm());
            }
        }
        let phases = (0..n).map(|i| t[(i, i)].arg()).collect();
        Ok(Self { phases, vectors: q, schur_offdiag: off })
    }
}

/// Least-squares fit of tabulated data to a sum of monomials.
#[derive(Debug, Clone)]
pub struct PowerFit {
    pub powers: Vec<usize>,
    /// `coefficients[(i, k)]` is the coefficient of `x^powers[i]` for series `k`.
    pub coefficients: DMatrix<f64>,
    /// Condition number of the column-scaled design matrix.
    pub condition: f64,
    /// Largest absolute misfit over all points and series.
    pub residual: f64,
}

/// Fits each column of `values` (one row per abscissa) to
/// `sum_i c_i x^powers[i]`. The design matrix is built in `x / max|x|` to
/// keep its columns comparable; `condition` refers to that scaled matrix.
pub fn fit_powers(xs: &[f64], powers: &[usize], values: &DMatrix<f64>, max_condition: f64) -> Result<PowerFit> {
    if xs.len() != values.nrows() {
        return Err(invalid("fit abscissae and values disagree in length"));
    }
    if powers.is_empty() || xs.len() < powers.len() {
        return Err(invalid(format!(
            "need at least {} points for {} powers, got {}",
            powers.len(),
            powers.len(),
            xs.len()
        )));
    }
    let scale = xs.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if scale == 0.0 {
        return Err(invalid("all fit abscissae are zero"));
    }
    let design = DMatrix::from_fn(xs.len(), powers.len(), |r, col| (xs[r] / scale).powi(powers[col] as i32));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= max_condition) {
        return Err(Error::FitFailure { context: format!("powers {powers:?}"), condition });
    }
    let scaled = svd
        .solve(values, 0.0)
        .map_err(|e| Error::FitFailure { context: e.to_string(), condition })?;
    let misfit = &design * &scaled - values;
    let residual = misfit.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let mut coefficients = scaled;
    for (i, &p) in powers.iter().enumerate() {
        let factor = scale.powi(-(p as i32));
        coefficients.row_mut(i).scale_mut(factor);
    }
    Ok(PowerFit { powers: powers.to_vec(), coefficients, condition, residual })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
