use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Singular values below `RANK_TOL · σ_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Jointly Gaussian task/observation model in which the MMSE estimate of the
/// task is `Γx`.
///
/// Derived quantities (whitened task `Γ̃ = ΓΣx^{1/2}`, its singular values and
/// right singular basis) are computed once on construction.
#[derive(Debug, Clone)]
pub struct LinearTaskModel {
    sigma_x: DMatrix<f64>,
    task: DMatrix<f64>,
    mmse_floor: f64,
    sigma_x_sqrt: DMatrix<f64>,
    sigma_x_inv_sqrt: DMatrix<f64>,
    whitened_task: DMatrix<f64>,
    singular_values: Vec<f64>,
    right_vectors: DMatrix<f64>,
}

impl LinearTaskModel {
    /// `sigma_x` is the n×n observation covariance, `task` the k×n matrix `Γ`
    /// and `mmse_floor` the unquantized error `E‖θ − Γx‖²`.
    pub fn new(sigma_x: DMatrix<f64>, task: DMatrix<f64>, mmse_floor: f64) -> Result<Self> {
        let n = sigma_x.nrows();
        linalg::check_square(&sigma_x, "observation covariance")?;
        if n == 0 {
            return Err(Error::dims("observation dimension must be positive"));
        }
        if task.ncols() != n {
            return Err(Error::dims(format!(
                "task matrix has {} columns but the observation has dimension {n}",
                task.ncols()
            )));
        }
        let k = task.nrows();
        if k == 0 || k > n {
            return Err(Error::dims(format!(
                "task dimension must be in 1..={n}, got {k}"
            )));
        }
        if !(mmse_floor.is_finite() && mmse_floor >= 0.0) {
            return Err(Error::invalid(format!(
                "MMSE floor must be finite and non-negative, got {mmse_floor}"
            )));
        }
        if task.iter().chain(sigma_x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("model matrices contain non-finite entries"));
        }
        let sigma_x = linalg::symmetrized(&sigma_x, "observation covariance")?;
        let (sigma_x_sqrt, sigma_x_inv_sqrt) = linalg::symmetric_sqrt(&sigma_x)?;
        let whitened_task = &task * &sigma_x_sqrt;

        let svd = whitened_task.clone().svd(false, true);
        let v_t = svd
            .v_t
            .ok_or_else(|| Error::Numerical("SVD of the whitened task failed".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let thin = DMatrix::from_fn(n, k, |r, c| v_t[(order[c], r)]);
        let right_vectors = linalg::complete_orthonormal(&thin);
        if right_vectors.ncols() != n {
            return Err(Error::Numerical(
                "could not complete the right singular basis".into(),
            ));
        }

        Ok(Self {
            sigma_x,
            task,
            mmse_floor,
            sigma_x_sqrt,
            sigma_x_inv_sqrt,
            whitened_task,
            singular_values,
            right_vectors,
        })
    }

    pub fn observation_dim(&self) -> usize {
        self.sigma_x.nrows()
    }

    pub fn task_dim(&self) -> usize {
        self.task.nrows()
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sigma_x
    }

    /// `Γ`.
    pub fn task(&self) -> &DMatrix<f64> {
        &self.task
    }

    pub fn mmse_floor(&self) -> f64 {
        self.mmse_floor
    }

    pub fn sigma_x_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_x_sqrt
    }

    pub fn sigma_x_inv_sqrt(&self) -> &DMatrix<f64> {
        &self.sigma_x_inv_sqrt
    }

    /// `Γ̃ = ΓΣx^{1/2}`.
    pub fn whitened_task(&self) -> &DMatrix<f64> {
        &self.whitened_task
    }

    /// Singular values of `Γ̃` in descending order (length k).
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// n×n orthonormal matrix whose first k columns are the right singular
    /// vectors of `Γ̃`, in the order of [`Self::singular_values`].
    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right_vectors
    }

    /// Covariance of the MMSE estimate, `Σθ̃ = Γ̃Γ̃ᵀ = ΓΣxΓᵀ`.
    pub fn estimate_covariance(&self) -> DMatrix<f64> {
        let s = &self.whitened_task * self.whitened_task.transpose();
        (&s + s.transpose()) * 0.5
    }

    /// `Tr(Σθ̃)`, the error of a system that outputs zero (excluding the floor).
    pub fn estimate_energy(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum()
    }

    /// Number of singular values above the rank tolerance.
    pub fn rank(&self) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * top && s > 0.0)
            .count()
    }
}
