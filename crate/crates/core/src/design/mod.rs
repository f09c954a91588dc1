//! MSE-optimal hardware-limited systems and their suboptimal baselines.
//!
//! Everything here assumes the MMSE estimate of the task is linear in the
//! observation, `θ̃ = Γx`, and models each dithered scalar quantizer as an
//! additive white noise source of variance `2γ²/(3M̃²)`.

mod budget;
mod model;
mod rotation;
mod system;
mod waterfill;

pub use budget::{LevelBudget, MAX_RESOLUTION};
pub use model::{LinearTaskModel, RANK_TOL};
pub use rotation::equal_diagonal_rotation;
pub use system::{
    adc_noise_variance, design, design_digital_only, design_optimal, design_quantize_mmse,
    digital_matrix_for, dynamic_range_for, is_mmse_quantization_optimal, mse_for_combiner,
    optimal_mse_formula, select_output_dimension, DesignMethod, DesignReport,
    HardwareLimitedSystem,
};
pub use waterfill::{solve_waterfilling_zeta, waterfilling_weights};
