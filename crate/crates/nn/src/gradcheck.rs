//! Central finite differences for validating analytic gradients.

/// Outcome of comparing analytic and numeric gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct GradReport {
    pub checked: usize,
    pub failures: usize,
    /// Largest `|analytic - numeric| - (atol + rtol |numeric|)`.
    pub worst_excess: f64,
    pub worst_index: Option<usize>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Numeric gradient of `f` at `x` for the given coordinates, with `f`
/// evaluated (and accumulated) in `f64`.
pub fn numeric_gradient(mut f: impl FnMut(&[f32]) -> f64, x: &[f32], indices: &[usize], h: f32) -> Vec<f64> {
    let mut probe = x.to_vec();
    indices
        .iter()
        .map(|&i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            // Use the step actually representable in f32.
            let span = ((orig + h) as f64) - ((orig - h) as f64);
            (up - down) / span
        })
        .collect()
}

pub fn compare(analytic: &[f64], numeric: &[f64], indices: &[usize], atol: f64, rtol: f64) -> GradReport {
    let mut report = GradReport {
        checked: numeric.len(),
        failures: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_index: None,
    };
    for ((&a, &n), &i) in analytic.iter().zip(numeric).zip(indices) {
        let excess = (a - n).abs() - (atol + rtol * n.abs());
        if excess > 0.0 || !a.is_finite() {
            report.failures += 1;
        }
        if excess > report.worst_excess {
            report.worst_excess = excess;
            report.worst_index = Some(i);
        }
    }
    report
}

/// `sum_i w_i * y_i` in `f64`: a random linear functional that turns any
/// layer output into a scalar loss.
pub fn project(y: &[f32], w: &[f32]) -> f64 {
    y.iter().zip(w).map(|(&a, &b)| a as f64 * b as f64).sum()
}
