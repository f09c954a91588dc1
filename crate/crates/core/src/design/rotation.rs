use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Finds an orthogonal `U` such that `U diag(d) Uᵀ` has every diagonal entry
/// equal to the mean `Σd / p`.
///
/// Each step applies a Givens rotation to the pair holding the current
/// largest and smallest diagonal entries, choosing the angle that sets the
/// largest entry exactly to the mean. The smallest entry is below the mean
/// whenever the largest is above it, so each step fixes one entry for good
/// and at most `p − 1` steps are needed.
pub fn equal_diagonal_rotation(d: &[f64]) -> Result<DMatrix<f64>> {
    if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!(
            "diagonal entries must be finite and non-negative, got {v}"
        )));
    }
    let p = d.len();
    let mut u = DMatrix::<f64>::identity(p, p);
    let trace: f64 = d.iter().sum();
    if p < 2 || trace == 0.0 {
        return Ok(u);
    }
    let target = trace / p as f64;
    let tol = 1e-13 * trace;
    let mut s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));

    for _ in 0..p * p {
        let (imax, imin) = extreme_diagonal(&s);
        if s[(imax, imax)] - s[(imin, imin)] <= tol {
            return Ok(u);
        }
        let (a, c, b) = (s[(imax, imax)], s[(imin, imin)], s[(imax, imin)]);
        let mid = 0.5 * (a + c);
        let half = 0.5 * (a - c);
        let radius = half.hypot(b);
        let phase = b.atan2(half);
        let theta = 0.5 * (phase + ((target - mid) / radius).clamp(-1.0, 1.0).acos());
        let (sin, cos) = theta.sin_cos();
        rotate_rows(&mut s, imax, imin, cos, sin);
        rotate_cols(&mut s, imax, imin, cos, sin);
        rotate_rows(&mut u, imax, imin, cos, sin);
    }
    let (imax, imin) = extreme_diagonal(&s);
    let spread = s[(imax, imax)] - s[(imin, imin)];
    if spread <= 1e-9 * trace {
        Ok(u)
    } else {
        Err(Error::Numerical(format!(
            "equal-diagonal rotation did not converge (spread {spread:.3e})"
        )))
    }
}

fn extreme_diagonal(s: &DMatrix<f64>) -> (usize, usize) {
    let diag = s.diagonal();
    let imax = diag.imax();
    let imin = diag.imin();
    (imax, imin)
}

/// Rows i, j ← (cos·rᵢ + sin·rⱼ, −sin·rᵢ + cos·rⱼ).
fn rotate_rows(m: &mut DMatrix<f64>, i: usize, j: usize, cos: f64, sin: f64) {
    for col in 0..m.ncols() {
        let (ri, rj) = (m[(i, col)], m[(j, col)]);
        m[(i, col)] = cos * ri + sin * rj;
        m[(j, col)] = -sin * ri + cos * rj;
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, i: usize, j: usize, cos: f64, sin: f64) {
    for row in 0..m.nrows() {
        let (ci, cj) = (m[(row, i)], m[(row, j)]);
        m[(row, i)] = cos * ci + sin * cj;
        m[(row, j)] = -sin * ci + cos * cj;
    }
}
