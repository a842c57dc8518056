use super::{Counted, MinimizeResult, Objective};
use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOptions {
    /// Offset of the initial vertices `p0 + edge * e_i`.
    pub edge: f64,
    /// Stop when the spread between the best and worst vertex values falls
    /// below this fraction of their magnitude.
    pub ftol: f64,
    /// Maximum number of simplex moves, over all restarts.
    pub max_iters: usize,
    /// After convergence, rebuild the simplex around the best vertex this many
    /// times; a restart that finds no fractional improvement ends the search.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            edge: 1.0,
            ftol: 1e-8,
            max_iters: 20_000,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub result: MinimizeResult,
    /// Final vertices, best first.
    pub simplex: Vec<Vec<f64>>,
}

fn converged(best: f64, worst: f64, ftol: f64) -> bool {
    2.0 * (worst - best).abs() <= ftol * (worst.abs() + best.abs()) + 1e-300
}

/// Nelder-Mead downhill simplex with reflection 1, expansion 2, contraction
/// 0.5 and shrink 0.5, for any dimension `>= 1`.
pub fn simplex_minimize<O: Objective + ?Sized>(f: &O, start: &[f64], opts: &SimplexOptions) -> Result<SimplexResult> {
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
    if !(opts.edge > 0.0 && opts.edge.is_finite()) || !(opts.ftol > 0.0) {
        return Err(Error::invalid("simplex edge and tolerance must be positive"));
    }

    let counted = Counted::new(f);
    let mut base = start.to_vec();
    let mut base_value = counted.eval(&base);
    if !base_value.is_finite() {
        return Err(Error::NonFinite("start point"));
    }

    let mut iterations = 0;
    let mut restarts_left = opts.restarts;
    let (mut vertices, mut values);
    loop {
        vertices = vec![base.clone()];
        values = vec![base_value];
        for i in 0..n {
            let mut v = base.clone();
            v[i] += opts.edge;
            values.push(counted.eval(&v));
            vertices.push(v);
        }
        iterations += run(
            &counted,
            &mut vertices,
            &mut values,
            opts.ftol,
            opts.max_iters - iterations,
        );
        sort(&mut vertices, &mut values);

        let improved = !converged(values[0], base_value, opts.ftol);
        base = vertices[0].clone();
        base_value = values[0];
        if !improved || restarts_left == 0 || iterations >= opts.max_iters {
            break;
        }
        restarts_left -= 1;
    }

    let evaluations = counted.evaluations();
    Ok(SimplexResult {
        result: MinimizeResult {
            point: vertices[0].clone(),
            value: values[0],
            iterations,
            evaluations,
            trace: counted.into_trace(),
        },
        simplex: vertices,
    })
}

fn sort(vertices: &mut Vec<Vec<f64>>, values: &mut Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    *vertices = order.iter().map(|&i| vertices[i].clone()).collect();
    *values = order.iter().map(|&i| values[i]).collect();
}

/// Moves the simplex until convergence or `budget` moves; returns moves made.
fn run<O: Objective + ?Sized>(
    f: &Counted<'_, O>,
    vertices: &mut Vec<Vec<f64>>,
    values: &mut Vec<f64>,
    ftol: f64,
    budget: usize,
) -> usize {
    let n = vertices.len() - 1;
    let mut moves = 0;
    while moves < budget {
        sort(vertices, values);
        if converged(values[0], values[n], ftol) {
            break;
        }
        moves += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, x)| c + coef * (x - c)).collect()
        };

        let reflected = toward(-REFLECT, &vertices[n]);
        let fr = f.eval(&reflected);
        if fr < values[0] {
            let expanded = toward(EXPAND, &reflected);
            let fe = f.eval(&expanded);
            if fe < fr {
                vertices[n] = expanded;
                values[n] = fe;
            } else {
                vertices[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            vertices[n] = reflected;
            values[n] = fr;
            continue;
        }
        // contraction: outside if the reflection beat the worst vertex
        let (contracted, bound) = if fr < values[n] {
            (toward(CONTRACT, &reflected), fr)
        } else {
            (toward(CONTRACT, &vertices[n]), values[n])
        };
        let fc = f.eval(&contracted);
        if fc < bound {
            vertices[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=n {
            vertices[i] = best
                .iter()
                .zip(&vertices[i])
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            values[i] = f.eval(&vertices[i]);
        }
    }
    moves
}
