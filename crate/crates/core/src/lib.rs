//! Design and evaluation of hardware-limited task-based quantizers.
//!
//! A hardware-limited task-based quantizer observes `x ∈ ℝⁿ`, applies a linear
//! analog combiner `A` (p×n), quantizes each of the `p` outputs with the same
//! scalar uniform quantizer, and reconstructs the task vector `θ ∈ ℝᵏ` with a
//! linear digital matrix `B` (k×p). The crate provides
//!
//! - [`quantizer`]: the non-subtractive dithered uniform quantizer,
//! - [`design`]: the MSE-optimal combiner/estimator and the digital-only and
//!   quantize-the-estimate baselines,
//! - [`bounds`]: vector-quantizer benchmarks (distortion-rate lower bound,
//!   random-coding upper bound, task-ignorant quantization),
//! - [`scenarios`]: the ISI channel-estimation and eigen-spectrum models,
//! - [`experiments`]: the seeded Monte Carlo sweep engine and result files.

pub mod bounds;
pub mod design;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod quantizer;
pub mod scenarios;
pub mod seeding;
pub mod stats;

pub use error::{Error, Result};
