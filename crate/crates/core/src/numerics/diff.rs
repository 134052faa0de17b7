//! Central-difference Jacobians.

use crate::numerics::linalg::Matrix;

/// Failure of the differentiated map at a perturbed point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianError<E> {
    pub coordinate: usize,
    pub source: E,
}

/// Cube root of machine epsilon, the usual central-difference step scale.
pub fn default_step_scale() -> f64 {
    f64::EPSILON.cbrt()
}

/// k×m Jacobian of `f: Rᵐ → Rᵏ` at `x` by central differences with step
/// `h_j = scale · max(1, |x_j|)`.
pub fn numeric_jacobian<F, E>(f: F, x: &[f64], scale: f64) -> Result<Matrix, JacobianError<E>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E>,
{
    let m = x.len();
    let mut point = x.to_vec();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let h = scale * x[j].abs().max(1.0);
        point[j] = x[j] + h;
        let plus = f(&point).map_err(|source| JacobianError { coordinate: j, source })?;
        point[j] = x[j] - h;
        let minus = f(&point).map_err(|source| JacobianError { coordinate: j, source })?;
        point[j] = x[j];
        // (x + h) - (x - h) is not exactly 2h in floating point
        let width = (x[j] + h) - (x[j] - h);
        columns.push(plus.iter().zip(&minus).map(|(p, q)| (p - q) / width).collect());
    }
    let k = columns.first().map_or(0, Vec::len);
    Ok(Matrix::from_fn(k, m, |i, j| columns[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::std_normal_cdf;

    #[test]
    fn identity_map() {
        let j = numeric_jacobian(|x| Ok::<_, ()>(x.to_vec()), &[0.3, -2.0], default_step_scale())
            .unwrap();
        assert!((j - Matrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn quadratic_map() {
        let f = |x: &[f64]| Ok::<_, ()>(vec![x[0] * x[0], x[0] * x[1]]);
        let j = numeric_jacobian(f, &[1.0, 2.0], default_step_scale()).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 1.0]);
        assert!((j - want).amax() < 1e-6);
    }

    #[test]
    fn normal_cdf_slope() {
        let j = numeric_jacobian(|x| Ok::<_, ()>(vec![std_normal_cdf(x[0])]), &[0.0], default_step_scale())
            .unwrap();
        assert!((j[(0, 0)] - 0.3989423).abs() < 1e-7);
    }

    #[test]
    fn linear_map_recovers_coefficients() {
        let a = Matrix::from_row_slice(3, 2, &[1.5, -2.0, 0.25, 4.0, -7.0, 0.5]);
        let f = |x: &[f64]| {
            let v = &a * nalgebra::DVector::from_column_slice(x);
            Ok::<_, ()>(v.iter().copied().collect())
        };
        let j = numeric_jacobian(f, &[10.0, -3.0], default_step_scale()).unwrap();
        assert!((j - &a).amax() < 1e-8);
    }

    #[test]
    fn failure_carries_coordinate() {
        let f = |x: &[f64]| if x[1] > 1.0 { Err("out of domain") } else { Ok(vec![x[0]]) };
        let err = numeric_jacobian(f, &[0.0, 1.0], default_step_scale()).unwrap_err();
        assert_eq!(err.coordinate, 1);
        assert_eq!(err.source, "out of domain");
    }
}
