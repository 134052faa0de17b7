//! Dense SPD solves. Every system in this crate is an information matrix,
//! so a Cholesky factorization is the only solver needed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of a {}x{} matrix",
                n,
                a.ncols()
            )));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularMatrix { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        let n = self.lower.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a {n}x{n} system",
                b.len()
            )));
        }
        let l = &self.lower;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lower.nrows();
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = Vector::zeros(n);
            e[j] = 1.0;
            let col = self.solve(&e).expect("dimensions checked");
            inv.set_column(j, &col);
        }
        // exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        inv
    }
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &Matrix, b: &Vector) -> Result<Vector> {
    Cholesky::new(a)?.solve(b)
}

pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    Ok(Cholesky::new(a)?.inverse())
}
