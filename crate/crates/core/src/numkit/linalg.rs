use nalgebra::{DMatrix, DVector};

use super::{ParamVector, RngHandle};
use crate::error::{invalid, Error, Result};

pub type DenseMatrix = DMatrix<f64>;

const POWER_ITERATION_CAP: usize = 200_000;

fn check_symmetric(matrix: &DenseMatrix) -> Result<()> {
    if !matrix.is_square() {
        return invalid(format!(
            "matrix must be square, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        ));
    }
    let scale = matrix.amax().max(1.0);
    let d = matrix.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    Ok(())
}

/// Solves `matrix * x = rhs` for symmetric positive-definite `matrix` using a
/// Cholesky factorization followed by one step of iterative refinement.
pub fn solve_spd(matrix: &DenseMatrix, rhs: &ParamVector) -> Result<ParamVector> {
    check_symmetric(matrix)?;
    if matrix.nrows() != rhs.dim() {
        return invalid(format!(
            "rhs has dimension {}, matrix is {}x{}",
            rhs.dim(),
            matrix.nrows(),
            matrix.ncols()
        ));
    }
    let chol = matrix.clone().cholesky().ok_or_else(|| Error::NumericalFailure {
        message: "matrix is not positive definite".into(),
        last_value: None,
    })?;
    let b = DVector::from_column_slice(rhs.as_slice());
    let mut x = chol.solve(&b);
    let residual = &b - matrix * &x;
    x += chol.solve(&residual);
    ParamVector::new(x.as_slice().to_vec()).map_err(|_| Error::NumericalFailure {
        message: "solution is not finite".into(),
        last_value: None,
    })
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
///
/// Stops once the eigen-residual `‖A v − ρ v‖` falls below `tol · |ρ|`; for a
/// symmetric matrix that bounds the distance from `ρ` to the spectrum.
pub fn top_eigenvalue(matrix: &DenseMatrix, tol: f64) -> Result<f64> {
    check_symmetric(matrix)?;
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let d = matrix.nrows();
    if d == 0 {
        return invalid("matrix must be non-empty");
    }
    let mut rng = RngHandle::new(0x005e_ed0f_e16e, 0);
    let mut v = DVector::from_fn(d, |_, _| 1.0 + 0.5 * rng.standard_normal());
    v.normalize_mut();
    let mut rho = 0.0;
    for _ in 0..POWER_ITERATION_CAP {
        let w = matrix * &v;
        rho = v.dot(&w);
        let residual = (&w - &v * rho).norm();
        if residual <= tol * rho.abs() {
            return Ok(rho);
        }
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
    }
    Err(Error::NumericalFailure {
        message: format!("power iteration did not converge in {POWER_ITERATION_CAP} steps"),
        last_value: Some(rho),
    })
}

/// Smallest and largest eigenvalue of a symmetric matrix from a dense
/// eigendecomposition.
pub fn symmetric_extreme_eigenvalues(matrix: &DenseMatrix) -> Result<(f64, f64)> {
    check_symmetric(matrix)?;
    if matrix.nrows() == 0 {
        return invalid("matrix must be non-empty");
    }
    let eig = matrix.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    Ok((min, max))
}
