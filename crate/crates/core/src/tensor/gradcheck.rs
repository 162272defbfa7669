//! Central finite-difference gradient checking.

use super::Scalar;

/// Outcome of a finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compares `analytic` against central differences of the scalar function
/// `f` at `x`. `coords` optionally restricts the check to a coordinate
/// subset (large parameter vectors are sampled rather than swept).
///
/// The step is `FD_STEP * max(1, |x_i|)`; the divisor uses the actually
/// realized (rounded) displacement. Relative error is
/// `|num - ana| / max(|num|, |ana|, FD_FLOOR)`.
pub fn grad_check<T: Scalar>(
    f: &mut dyn FnMut(&[T]) -> f64,
    x: &[T],
    analytic: &[T],
    coords: Option<&[usize]>,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len());
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut work = x.to_vec();
    let mut max_rel_err = 0.0f64;
    for &i in coords {
        let orig = x[i];
        let h = T::FD_STEP * orig.to_f64().abs().max(1.0);
        let plus = T::from_f64(orig.to_f64() + h);
        let minus = T::from_f64(orig.to_f64() - h);
        work[i] = plus;
        let f_plus = f(&work);
        work[i] = minus;
        let f_minus = f(&work);
        work[i] = orig;
        let span = plus.to_f64() - minus.to_f64();
        let numeric = (f_plus - f_minus) / span;
        let ana = analytic[i].to_f64();
        let rel = (numeric - ana).abs() / numeric.abs().max(ana.abs()).max(T::FD_FLOOR);
        if rel > max_rel_err {
            max_rel_err = rel;
        }
    }
    GradCheckReport {
        max_rel_err,
        tolerance: T::FD_TOL,
        checked: coords.len(),
    }
}
