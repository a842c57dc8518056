use super::{axpy, Counted, Objective};
use crate::error::{Error, Result};

const GOLDEN: f64 = 1.618_033_988_749_895;
const GOLDEN_SECTION: f64 = 0.381_966_011_250_105;
const MAX_EXPANSIONS: usize = 60;
const MAX_REFINEMENTS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    /// Step `t` along the direction; the minimizer is `point + t * direction`.
    pub step: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `t -> f(point + t * direction)`: golden-ratio expansion to
/// bracket a minimum, then golden-section refinement until the bracket is
/// narrower than `tol` (in units of `t`).
///
/// A flat stretch (`f(c) == f(b)`) closes the bracket, so saturating functions
/// that level off are bracketed. If no bracket is found within the expansion
/// budget, or no trial point is strictly below `f(point)`, the step is 0 and
/// the value is `f(point)`.
pub fn line_minimize<O: Objective + ?Sized>(f: &O, point: &[f64], direction: &[f64], tol: f64) -> Result<LineMinimum> {
    if point.len() != f.dimension() || direction.len() != f.dimension() {
        return Err(Error::Shape {
            what: "line search vectors",
            expected: f.dimension(),
            found: point.len().min(direction.len()),
        });
    }
    if direction.iter().all(|&d| d == 0.0) {
        return Err(Error::invalid("line search direction is zero"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "line search tolerance must be positive, got {tol}"
        )));
    }
    let counted = Counted::new(f);
    let f0 = counted.eval(point);
    if !f0.is_finite() {
        return Err(Error::NonFinite("line search start"));
    }
    let (step, value) = search(&counted, point, direction, f0, tol);
    Ok(LineMinimum {
        step,
        value,
        evaluations: counted.evaluations(),
    })
}

/// Core line search on an already-counted objective with known `f(point)`.
pub(crate) fn search<O: Objective + ?Sized>(
    f: &Counted<'_, O>,
    point: &[f64],
    direction: &[f64],
    f0: f64,
    tol: f64,
) -> (f64, f64) {
    let phi = |t: f64| f.eval(&axpy(point, t, direction));

    // Bracket: a, b, c with f(b) <= f(a) and f(b) <= f(c).
    let mut a = 0.0;
    let (mut b, mut fb) = (1.0, phi(1.0));
    if fb > f0 {
        (a, b, fb) = (1.0, 0.0, f0);
    }
    let mut bracket = None;
    for _ in 0..MAX_EXPANSIONS {
        let c = b + GOLDEN * (b - a);
        let fc = phi(c);
        if fc >= fb {
            bracket = Some((a, b, c, fb));
            break;
        }
        (a, b, fb) = (b, c, fc);
    }
    let Some((a, b, c, fb)) = bracket else {
        return (0.0, f0);
    };

    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut x, mut fx) = (b, fb);
    for _ in 0..MAX_REFINEMENTS {
        if hi - lo <= tol {
            break;
        }
        let u = if x - lo > hi - x {
            x - GOLDEN_SECTION * (x - lo)
        } else {
            x + GOLDEN_SECTION * (hi - x)
        };
        let fu = phi(u);
        if fu < fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            (x, fx) = (u, fu);
        } else if u < x {
            lo = u;
        } else {
            hi = u;
        }
    }

    if fx < f0 {
        (x, fx)
    } else {
        (0.0, f0)
    }
}
