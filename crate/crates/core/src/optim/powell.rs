use rand::Rng;

use super::{axpy, line, Counted, MinimizeResult, Objective};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PowellOptions {
    /// Stop once a full cycle lowers `f` by less than this fraction.
    pub ftol: f64,
    /// Bracket width at which each line search stops, in step units.
    pub line_tol: f64,
    /// Maximum number of direction-set cycles.
    pub max_iters: usize,
    /// Stop after the cycle in which this many evaluations were used.
    pub max_evaluations: Option<usize>,
}

impl Default for PowellOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            line_tol: 1e-8,
            max_iters: 200,
            max_evaluations: None,
        }
    }
}

/// A replacement direction whose normalized component outside the span of the
/// kept directions is at most this is treated like a zero displacement.
const DEPENDENCE_TOL: f64 = 1e-6;

/// Norm of the part of `v / |v|` orthogonal to the span of `basis`; 0 for a
/// zero vector.
fn independent_part(basis: &[Vec<f64>], v: &[f64]) -> f64 {
    let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(v);
    if nv == 0.0 {
        return 0.0;
    }
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for d in basis {
        let mut u = d.clone();
        for q in &ortho {
            let dot: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let nu = norm(&u);
        if nu > 0.0 {
            u.iter_mut().for_each(|a| *a /= nu);
            ortho.push(u);
        }
    }
    let mut r: Vec<f64> = v.iter().map(|x| x / nv).collect();
    for q in &ortho {
        let dot: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
    }
    norm(&r)
}

/// `n` directions of dimension `n`, each component uniform in
/// `[-scale, scale]`; all-zero draws are repeated.
pub fn random_directions<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
            if d.iter().any(|&x| x != 0.0) {
                break d;
            }
        })
        .collect()
}

/// Powell's direction-set method.
///
/// Each cycle saves the start `p0`, line-minimizes along every direction in
/// turn, drops the first direction, appends the net displacement `p_n - p0`,
/// and line-minimizes once more along it. A displacement that is zero, or
/// that lies (numerically) in the span of the directions it would join,
/// leaves the direction set unchanged for that cycle. A cycle that makes no
/// progress ends the search only if it ran on the initial directions;
/// otherwise the set is reset to them and cycling continues. Directions
/// default to the unit basis vectors.
pub fn powell_minimize<O: Objective + ?Sized>(
    f: &O,
    start: &[f64],
    init_directions: Option<Vec<Vec<f64>>>,
    opts: &PowellOptions,
) -> Result<MinimizeResult> {
    let n = f.dimension();
    if n == 0 {
        return Err(Error::invalid("cannot minimize a zero-dimensional objective"));
    }
    if start.len() != n {
        return Err(Error::Shape {
            what: "start point",
            expected: n,
            found: start.len(),
        });
    }
    if !(opts.ftol > 0.0) || !(opts.line_tol > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    let mut directions = match init_directions {
        Some(dirs) => {
            if dirs.len() != n || dirs.iter().any(|d| d.len() != n) {
                return Err(Error::invalid(format!("expected {n} directions of dimension {n}")));
            }
            if dirs.iter().any(|d| d.iter().all(|&x| x == 0.0)) {
                return Err(Error::invalid("initial directions must be nonzero"));
            }
            dirs
        }
        None => (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect(),
    };

    let initial = directions.clone();
    let mut fresh = true;

    let counted = Counted::new(f);
    let mut x = start.to_vec();
    let mut fx = counted.eval(&x);
    if !fx.is_finite() {
        return Err(Error::NonFinite("start point"));
    }

    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let p0 = x.clone();
        let f0 = fx;
        for dir in &directions {
            let (t, v) = line::search(&counted, &x, dir, fx, opts.line_tol);
            if t != 0.0 {
                x = axpy(&x, t, dir);
                fx = v;
            }
        }
        let displacement: Vec<f64> = x.iter().zip(&p0).map(|(a, b)| a - b).collect();
        if independent_part(&directions[1..], &displacement) > DEPENDENCE_TOL {
            directions.remove(0);
            directions.push(displacement);
            fresh = false;
            let dir = &directions[n - 1];
            let (t, v) = line::search(&counted, &x, dir, fx, opts.line_tol);
            if t != 0.0 {
                x = axpy(&x, t, dir);
                fx = v;
            }
        }
        if 2.0 * (f0 - fx) <= opts.ftol * (f0.abs() + fx.abs()) + 1e-300 {
            if fresh {
                break;
            }
            directions = initial.clone();
            fresh = true;
        }
        if opts.max_evaluations.is_some_and(|m| counted.evaluations() >= m) {
            break;
        }
    }

    let evaluations = counted.evaluations();
    Ok(MinimizeResult {
        point: x,
        value: fx,
        iterations,
        evaluations,
        trace: counted.into_trace(),
    })
}
