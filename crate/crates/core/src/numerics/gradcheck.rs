/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, REL_FLOOR)`.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub coordinates: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Compares `analytic` against central finite differences of `f` at `params`
/// over every coordinate.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64]) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let mut probe = params.to_vec();
    let mut worst = (0.0_f64, None);
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = f(&probe);
        probe[i] = orig - FD_STEP;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        let err = (a - numeric).abs() / denom;
        if err > worst.0 || err.is_nan() {
            worst = (err, Some(i));
        }
    }
    GradCheck {
        max_rel_error: worst.0,
        worst_index: worst.1,
        coordinates: params.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_zero_error() {
        let r = grad_check(|_| 4.2, &[1.0, 2.0, 3.0], &[0.0; 3]);
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn sum_has_all_ones_gradient() {
        let p = [0.3, -7.0, 11.0, 0.0];
        let r = grad_check(|x| x.iter().sum(), &p, &[1.0; 4]);
        assert!(r.passes(1e-9), "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let r = grad_check(|x| x[0] * x[0], &[1.0], &[3.0]);
        assert!(!r.passes(1e-5));
        assert_eq!(r.worst_index, Some(0));
    }
}
