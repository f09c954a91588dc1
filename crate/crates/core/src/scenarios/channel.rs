use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::design::LinearTaskModel;
use crate::error::{Error, Result};
use crate::linalg;

/// `x = Hθ + w` with `θ ~ N(0, Σθ)`, `(Σθ)ᵢⱼ = e^{−|i−j|}`, unit-variance white
/// noise `w`, and `H` the convolution matrix of the training sequence
/// `aᵢ = cos(2πi/n)`.
#[derive(Debug, Clone)]
pub struct ChannelScenario {
    training: DMatrix<f64>,
    sigma_theta: DMatrix<f64>,
    theta_factor: DMatrix<f64>,
    model: LinearTaskModel,
}

/// Builds the scenario with `k` channel taps and `n` observations.
pub fn build_channel_scenario(k: usize, n: usize) -> Result<ChannelScenario> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "channel needs 1 <= taps <= observations, got k = {k}, n = {n}"
        )));
    }
    let a = |j: isize| -> f64 {
        if j > 0 {
            (2.0 * PI * j as f64 / n as f64).cos()
        } else {
            0.0
        }
    };
    let training = DMatrix::from_fn(n, k, |i, l| a(i as isize - l as isize + 1));
    let sigma_theta = DMatrix::from_fn(k, k, |i, j| (-(i.abs_diff(j) as f64)).exp());
    let sigma_x = &training * &sigma_theta * training.transpose() + DMatrix::identity(n, n);
    let sigma_x = (&sigma_x + sigma_x.transpose()) * 0.5;
    let cross = &sigma_theta * training.transpose();
    // Γ = Σθ Hᵀ Σx⁻¹, via a Cholesky solve of Σx Γᵀ = H Σθ.
    let chol = sigma_x.clone().cholesky().ok_or_else(|| {
        Error::Numerical("observation covariance is not positive definite".into())
    })?;
    let task = chol.solve(&cross.transpose()).transpose();
    let floor = (&sigma_theta - &task * &training * &sigma_theta)
        .trace()
        .max(0.0);
    let theta_factor = linalg::psd_factor(&sigma_theta)?;
    let model = LinearTaskModel::new(sigma_x, task, floor)?;
    Ok(ChannelScenario {
        training,
        sigma_theta,
        theta_factor,
        model,
    })
}

impl ChannelScenario {
    pub fn taps(&self) -> usize {
        self.sigma_theta.nrows()
    }

    pub fn observations(&self) -> usize {
        self.training.nrows()
    }

    /// n×k matrix `H`.
    pub fn training_matrix(&self) -> &DMatrix<f64> {
        &self.training
    }

    pub fn sigma_theta(&self) -> &DMatrix<f64> {
        &self.sigma_theta
    }

    pub fn model(&self) -> &LinearTaskModel {
        &self.model
    }

    /// Draws a channel `θ` and the observation `x = Hθ + w`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let k = self.taps();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let theta = &self.theta_factor * z;
        let mut x = &self.training * &theta;
        for v in x.iter_mut() {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
        (theta, x)
    }
}
