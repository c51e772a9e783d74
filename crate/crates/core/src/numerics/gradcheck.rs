/// Result of a central-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdOutcome {
    /// All evaluations finite; the largest componentwise relative error.
    Finite { max_relative_error: f64, worst_index: usize },
    /// `f` or the analytic gradient was non-finite at component `index`.
    NonFinite { index: usize },
}

impl FdOutcome {
    pub fn max_relative_error(&self) -> Option<f64> {
        match *self {
            FdOutcome::Finite { max_relative_error, .. } => Some(max_relative_error),
            FdOutcome::NonFinite { .. } => None,
        }
    }

    /// True when finite and the error is strictly below `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative_error().is_some_and(|e| e < tol)
    }
}

/// Difference quotient used to estimate each partial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(x + h) - f(x - h)) / 2h`, truncation error O(h^2).
    #[default]
    Central,
    /// `(-f(x + 2h) + 8 f(x + h) - 8 f(x - h) + f(x - 2h)) / 12h`, O(h^4).
    FivePoint,
}

/// Compares `grad_f(point)` against central differences
/// `(f(x + h e_j) - f(x - h e_j)) / 2h` for every coordinate `j`.
///
/// The relative error of a component is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<F, G>(f: F, grad_f: G, point: &[f64], step: f64) -> FdOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    finite_difference_check_with(f, grad_f, point, step, Stencil::Central)
}

/// [`finite_difference_check`] with a choice of stencil. The five-point
/// quotient allows a larger step, which matters when some partials are tiny
/// and central differences at small `h` drown in cancellation.
pub fn finite_difference_check_with<F, G>(
    f: F,
    grad_f: G,
    point: &[f64],
    step: f64,
    stencil: Stencil,
) -> FdOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let analytic = grad_f(point);
    assert_eq!(analytic.len(), point.len(), "gradient length mismatch");

    let mut x = point.to_vec();
    let mut at = |j: usize, offset: f64| {
        x[j] = point[j] + offset;
        let v = f(&x);
        x[j] = point[j];
        v
    };
    let mut worst = (0.0f64, 0usize);
    for (j, &a) in analytic.iter().enumerate() {
        let numeric = match stencil {
            Stencil::Central => (at(j, step) - at(j, -step)) / (2.0 * step),
            Stencil::FivePoint => {
                (-at(j, 2.0 * step) + 8.0 * at(j, step) - 8.0 * at(j, -step) + at(j, -2.0 * step))
                    / (12.0 * step)
            }
        };
        if !numeric.is_finite() || !a.is_finite() {
            return FdOutcome::NonFinite { index: j };
        }
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        let rel = (a - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, j);
        }
    }
    FdOutcome::Finite {
        max_relative_error: worst.0,
        worst_index: worst.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cross_entropy, cross_entropy_grad, LogitVector};

    #[test]
    fn constant_function_zero_gradient() {
        let out = finite_difference_check(|_| 3.5, |x| vec![0.0; x.len()], &[1.0, 2.0], 1e-5);
        assert_eq!(out.max_relative_error(), Some(0.0));
    }

    #[test]
    fn cross_entropy_at_origin() {
        let f = |x: &[f64]| cross_entropy(&LogitVector::new(x.to_vec()).unwrap(), 1).unwrap();
        let g = |x: &[f64]| {
            cross_entropy_grad(&LogitVector::new(x.to_vec()).unwrap(), 1)
                .unwrap()
                .into_inner()
        };
        let out = finite_difference_check(f, g, &[0.0; 4], 1e-5);
        assert!(out.passes(1e-5), "{out:?}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let out = finite_difference_check(
            |x| x[0] * x[0],
            |x| vec![3.0 * x[0]],
            &[1.0],
            1e-5,
        );
        assert!(!out.passes(1e-3));
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let out = finite_difference_check_with(
            |x| x[0].powi(4),
            |x| vec![4.0 * x[0].powi(3)],
            &[1.3],
            1e-2,
            Stencil::FivePoint,
        );
        assert!(out.passes(1e-12), "{out:?}");
    }

    #[test]
    fn non_finite_evaluation_is_reported() {
        let out = finite_difference_check(|x| x[0].ln(), |x| vec![1.0 / x[0]], &[0.0], 1e-5);
        assert_eq!(out, FdOutcome::NonFinite { index: 0 });
    }
}
