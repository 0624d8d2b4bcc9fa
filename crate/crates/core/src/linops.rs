//! Discretized linear operators on `[0, 1]`.
//!
//! Vectors live in `R^n` with the weighted inner product
//! `(u, v)_h = h * sum(u_i * v_i)`. Because the weight is the same scalar for
//! every node, the adjoint of a matrix operator is its transpose and the
//! s-values of the operator coincide with the ordinary singular values of
//! the matrix. Only the singular vectors pick up a `1/sqrt(h)` factor so that
//! they are orthonormal in `||.||_h`.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Uniform midpoint grid on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid needs at least one node"));
        }
        Ok(Grid {
            n,
            h: 1.0 / n as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// `x_i = (i - 1/2) h` for `i = 1..n`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.node(i))
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| f(self.node(i)))
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.h * u.dot(v)
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        (self.h * u.norm_squared()).sqrt()
    }

    pub fn distance(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.norm(&(u - v))
    }
}

/// Singular system of an operator, orthonormal in the weighted norm.
///
/// `A phi_j = s_j psi_j`, `A* psi_j = s_j phi_j`. The eigenvalues of
/// `B = A*A` are `s_j^2`, which is the discrete resolution of the identity.
#[derive(Debug, Clone)]
pub struct SpectralData {
    s: DVector<f64>,
    /// Columns are `psi_j`.
    left: DMatrix<f64>,
    /// Columns are `phi_j`.
    right: DMatrix<f64>,
    h: f64,
}

impl SpectralData {
    fn from_matrix(matrix: &DMatrix<f64>, h: f64) -> Option<Self> {
        let n = matrix.nrows();
        let svd = matrix
            .clone()
            .try_svd(true, true, f64::EPSILON, 1000 * n.max(10))?;
        let u = svd.u?;
        let v_t = svd.v_t?;
        let scale = 1.0 / h.sqrt();
        Some(SpectralData {
            s: svd.singular_values,
            left: u * scale,
            right: v_t.transpose() * scale,
            h,
        })
    }

    /// s-values in nonincreasing order.
    pub fn s_values(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn norm(&self) -> f64 {
        self.s[0]
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Eigenvalues `lambda_j = s_j^2` of `B = A*A`.
    pub fn eigenvalues(&self) -> DVector<f64> {
        self.s.map(|s| s * s)
    }

    pub fn psi(&self, j: usize) -> DVector<f64> {
        self.left.column(j).into_owned()
    }

    pub fn phi(&self, j: usize) -> DVector<f64> {
        self.right.column(j).into_owned()
    }

    /// Coefficients `(f, psi_j)_h`.
    pub fn data_coefficients(&self, f: &DVector<f64>) -> DVector<f64> {
        self.left.tr_mul(f) * self.h
    }

    /// Coefficients `(u, phi_j)_h`.
    pub fn solution_coefficients(&self, u: &DVector<f64>) -> DVector<f64> {
        self.right.tr_mul(u) * self.h
    }

    /// `sum_j weight(s_j) * c_j * phi_j`.
    pub fn synthesize(&self, coefficients: &DVector<f64>, weight: impl Fn(f64) -> f64) -> DVector<f64> {
        let scaled = DVector::from_fn(self.s.len(), |j, _| weight(self.s[j]) * coefficients[j]);
        &self.right * scaled
    }

    /// `sum_j c_j * psi_j`.
    pub fn synthesize_data(&self, coefficients: &DVector<f64>) -> DVector<f64> {
        &self.left * coefficients
    }

    /// Number of s-values strictly above `rel_tol * s_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.norm();
        self.s.iter().take_while(|&&s| s > cutoff).count()
    }

    /// Weighted-norm size of the component of `u` along the right singular
    /// directions with `s_j <= rel_tol * s_1`.
    pub fn null_component(&self, u: &DVector<f64>, rel_tol: f64) -> f64 {
        let rank = self.numerical_rank(rel_tol);
        let c = self.solution_coefficients(u);
        c.rows(rank, c.len() - rank).norm()
    }

    /// `max_j 1 / (lambda_j + alpha)`, the norm of `(B + alpha)^{-1}`.
    pub fn resolvent_norm(&self, alpha: f64) -> f64 {
        self.s
            .iter()
            .map(|s| 1.0 / (s * s + alpha))
            .fold(0.0, f64::max)
    }

    /// `max_j s_j / (s_j^2 + eps)`, the norm of `(B + eps)^{-1} A*`.
    pub fn smoothing_norm(&self, eps: f64) -> f64 {
        self.s.iter().map(|s| s / (s * s + eps)).fold(0.0, f64::max)
    }

    /// Max-abs entry of `A - sum_j s_j psi_j phi_j^T`, where the weighted
    /// outer product carries the factor `h` back in.
    pub fn reconstruction_error(&self, matrix: &DMatrix<f64>) -> f64 {
        let mut rebuilt = DMatrix::zeros(matrix.nrows(), matrix.ncols());
        for j in 0..self.s.len() {
            rebuilt += self.left.column(j) * self.right.column(j).transpose() * (self.s[j] * self.h);
        }
        (matrix - rebuilt).amax()
    }

    fn scaled(&self, factor: f64) -> SpectralData {
        SpectralData {
            s: &self.s / factor,
            left: self.left.clone(),
            right: self.right.clone(),
            h: self.h,
        }
    }
}

/// Matrix representation of a bounded linear operator on the grid.
#[derive(Debug)]
pub struct DiscreteOperator {
    grid: Grid,
    matrix: DMatrix<f64>,
    normal: DMatrix<f64>,
    spectral: OnceLock<Option<SpectralData>>,
}

impl Clone for DiscreteOperator {
    fn clone(&self) -> Self {
        let spectral = OnceLock::new();
        if let Some(cached) = self.spectral.get() {
            let _ = spectral.set(cached.clone());
        }
        DiscreteOperator {
            grid: self.grid,
            matrix: self.matrix.clone(),
            normal: self.normal.clone(),
            spectral,
        }
    }
}

impl DiscreteOperator {
    /// Wraps a square matrix; the grid size is the matrix dimension.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::invalid(format!(
                "operator matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numerical("operator matrix has non-finite entries".into()));
        }
        let grid = Grid::new(matrix.nrows())?;
        let normal = matrix.tr_mul(&matrix);
        Ok(DiscreteOperator {
            grid,
            matrix,
            normal,
            spectral: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `B = A*A` as a matrix.
    pub fn normal_matrix(&self) -> &DMatrix<f64> {
        &self.normal
    }

    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.matrix * u
    }

    pub fn adjoint(&self, v: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(v)
    }

    /// `Bu = A*(Au)`, evaluated through two matrix-vector products.
    pub fn apply_normal(&self, u: &DVector<f64>) -> DVector<f64> {
        self.adjoint(&self.apply(u))
    }

    /// Weighted norm of the residual `Au - f`.
    pub fn residual_norm(&self, u: &DVector<f64>, f: &DVector<f64>) -> f64 {
        self.grid.norm(&(self.apply(u) - f))
    }

    pub fn spectral(&self) -> Result<&SpectralData> {
        self.spectral
            .get_or_init(|| SpectralData::from_matrix(&self.matrix, self.grid.step()))
            .as_ref()
            .ok_or_else(|| {
                Error::Numerical(format!(
                    "SVD did not converge (n = {}, max |a_ij| = {:e}, ||A||_F = {:e})",
                    self.dim(),
                    self.matrix.amax(),
                    self.matrix.norm()
                ))
            })
    }

    /// Operator norm `s_1`.
    pub fn norm(&self) -> Result<f64> {
        Ok(self.spectral()?.norm())
    }

    /// Returns `A / s_1` and `s_1`. The spectral cache is carried over.
    pub fn scale_to_unit(&self) -> Result<(DiscreteOperator, f64)> {
        let spectral = self.spectral()?;
        let s1 = spectral.norm();
        if s1 <= 0.0 || !s1.is_finite() {
            return Err(Error::DegenerateOperator(s1));
        }
        let scaled = DiscreteOperator {
            grid: self.grid,
            matrix: &self.matrix / s1,
            normal: &self.normal / (s1 * s1),
            spectral: OnceLock::new(),
        };
        let _ = scaled.spectral.set(Some(spectral.scaled(s1)));
        Ok((scaled, s1))
    }

    /// Solves `(B + alpha) u = rhs` with a Cholesky factorization.
    ///
    /// One step of iterative refinement is applied with the residual formed
    /// through `A` rather than through the precomputed `B`.
    pub fn resolvent_solve(&self, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("resolvent parameter must be > 0, got {alpha}")));
        }
        self.shifted_solve(alpha, rhs)
    }

    /// `(B + shift) u = rhs` for any `shift >= 0` that leaves the matrix
    /// positive definite.
    pub(crate) fn shifted_solve(&self, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, operator has dimension {}",
                rhs.len(),
                self.dim()
            )));
        }
        let mut shifted = self.normal.clone();
        for i in 0..self.dim() {
            shifted[(i, i)] += alpha;
        }
        let chol = Cholesky::new(shifted).ok_or_else(|| {
            Error::Numerical(format!(
                "B + alpha not numerically positive definite (alpha = {alpha:e}, n = {})",
                self.dim()
            ))
        })?;
        let mut u = chol.solve(rhs);
        let residual = rhs - self.apply_normal(&u) - &u * alpha;
        u += chol.solve(&residual);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("resolvent solve produced non-finite values (alpha = {alpha:e})")));
        }
        Ok(u)
    }
}

/// Volterra operator `Au(x) = int_0^x u(t) dt` with the left-rectangle
/// rule: `A_ij = h` for `j <= i`.
pub fn build_integration_operator(n: usize) -> Result<DiscreteOperator> {
    let grid = Grid::new(n)?;
    let h = grid.step();
    let matrix = DMatrix::from_fn(n, n, |i, j| if j <= i { h } else { 0.0 });
    DiscreteOperator::from_matrix(matrix)
}

/// Green's function of `-u''` with Dirichlet conditions on `[0, 1]`.
pub fn dirichlet_green_kernel(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

/// Fredholm operator of the first kind: `A_ij = h K(x_i, x_j)`.
pub fn build_fredholm_operator(kernel: impl Fn(f64, f64) -> f64, n: usize) -> Result<DiscreteOperator> {
    let grid = Grid::new(n)?;
    let h = grid.step();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (grid.node(i), grid.node(j));
            let k = kernel(x, y);
            if !k.is_finite() {
                return Err(Error::InvalidKernel { x, y });
            }
            matrix[(i, j)] = h * k;
        }
    }
    DiscreteOperator::from_matrix(matrix)
}

pub fn spectral(op: &DiscreteOperator) -> Result<&SpectralData> {
    op.spectral()
}

pub fn scale_to_unit(op: &DiscreteOperator) -> Result<(DiscreteOperator, f64)> {
    op.scale_to_unit()
}

pub fn resolvent_solve(op: &DiscreteOperator, alpha: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    op.resolvent_solve(alpha, rhs)
}
