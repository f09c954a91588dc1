use crate::error::{Error, Result};

fn validate(singulars: &[f64], c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!(
            "waterfilling constant must be positive, got {c}"
        )));
    }
    if let Some(s) = singulars.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::invalid(format!(
            "singular values must be finite and non-negative, got {s}"
        )));
    }
    Ok(())
}

/// Solves `c · Σᵢ (ζσᵢ − 1)⁺ = 1` for `ζ > 0`.
///
/// The left side is piecewise linear in `ζ` with breakpoints at `1/σᵢ`, so the
/// active set is located by bisection over the breakpoints and `ζ` is then
/// solved in closed form on that segment.
pub fn solve_waterfilling_zeta(singulars: &[f64], c: f64) -> Result<f64> {
    validate(singulars, c)?;
    let mut s: Vec<f64> = singulars.iter().copied().filter(|&v| v > 0.0).collect();
    if s.is_empty() {
        return Err(Error::Infeasible(
            "the task is trivially constant: all singular values of the whitened task are zero"
                .into(),
        ));
    }
    s.sort_by(|a, b| b.total_cmp(a));
    let prefix: Vec<f64> = s
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    // Value at the m-th breakpoint 1/s[m] (0-based), where the first m values
    // are active.
    let at_breakpoint = |m: usize| c * (prefix[m - 1] / s[m] - m as f64) - 1.0;
    // The root lies past breakpoint m exactly when the value there is negative,
    // so the active count is one more than the number of such breakpoints.
    let (mut lo, mut hi) = (1usize, s.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if at_breakpoint(mid) < 0.0 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    let active = lo;
    Ok((1.0 / c + active as f64) / prefix[active - 1])
}

/// Waterfilling weights `c(ζσᵢ − 1)⁺`, one per singular value.
pub fn waterfilling_weights(singulars: &[f64], c: f64, zeta: f64) -> Vec<f64> {
    singulars
        .iter()
        .map(|&s| c * (zeta * s - 1.0).max(0.0))
        .collect()
}
