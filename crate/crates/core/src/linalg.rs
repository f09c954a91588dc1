//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest eigenvalue, relative to the largest, accepted for an SPD matrix.
pub const SPD_CONDITION_TOL: f64 = 1e-13;

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Checks symmetry to a relative tolerance and returns the symmetrized matrix.
pub fn symmetrized(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_square(m, what)?;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "{what} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Symmetric square root and inverse square root of an SPD matrix.
pub fn symmetric_sqrt(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sym = symmetrized(sigma, "covariance")?;
    let (values, vectors) = sym_eigen_desc(&sym);
    let largest = values.first().copied().unwrap_or(0.0);
    let smallest = values.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || smallest <= SPD_CONDITION_TOL * largest {
        return Err(Error::Numerical(format!(
            "covariance is not positive definite (eigenvalues in [{smallest:.3e}, {largest:.3e}], \
             condition number {:.3e})",
            largest / smallest.max(f64::MIN_POSITIVE)
        )));
    }
    let root = scale_columns(&vectors, values.iter().map(|v| v.sqrt()));
    let inv_root = scale_columns(&vectors, values.iter().map(|v| 1.0 / v.sqrt()));
    let sqrt = &root * vectors.transpose();
    let inv = &inv_root * vectors.transpose();
    Ok((
        (&sqrt + sqrt.transpose()) * 0.5,
        (&inv + inv.transpose()) * 0.5,
    ))
}

/// Factor `L` with `L Lᵀ = m` for a symmetric PSD matrix; slightly negative
/// eigenvalues from rounding are clamped to zero.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrized(m, "covariance")?;
    let (values, vectors) = sym_eigen_desc(&sym);
    let largest = values.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&low) = values.last() {
        if low < -1e-10 * largest.max(1.0) {
            return Err(Error::Numerical(format!(
                "covariance has a negative eigenvalue {low:.3e}"
            )));
        }
    }
    Ok(scale_columns(
        &vectors,
        values.iter().map(|v| v.max(0.0).sqrt()),
    ))
}

/// Multiplies column `j` of `m` by the `j`-th item of `factors`.
pub fn scale_columns(m: &DMatrix<f64>, factors: impl IntoIterator<Item = f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, f) in factors.into_iter().enumerate() {
        out.column_mut(j).scale_mut(f);
    }
    out
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

/// Extends the orthonormal columns of `basis` (n×r) to a full n×n
/// orthonormal matrix whose first r columns are `basis`.
pub fn complete_orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let mut cols: Vec<nalgebra::DVector<f64>> =
        basis.column_iter().map(|c| c.into_owned()).collect();
    // Gram-Schmidt over the canonical vectors, taking the best remaining
    // candidate each round.
    let mut remaining: Vec<usize> = (0..n).collect();
    while cols.len() < n && !remaining.is_empty() {
        let mut best: Option<(usize, nalgebra::DVector<f64>, f64)> = None;
        for (pos, &e) in remaining.iter().enumerate() {
            let mut v = nalgebra::DVector::zeros(n);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dot(&v);
                    v.axpy(-proj, c, 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((pos, v, norm));
            }
        }
        let (pos, v, norm) = best.expect("candidates remain");
        remaining.swap_remove(pos);
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// `‖m mᵀ − I‖_max`.
pub fn orthonormality_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    max_abs(&(m * m.transpose() - DMatrix::identity(n, n)))
}
