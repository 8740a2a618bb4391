//! Multi-start projected local descent for small, dense, smooth feasibility
//! problems: squared equality residuals plus squared hinge penalties,
//! box-constrained, with an optional extra projection (used for per-cell
//! budget constraints).
//!
//! Each start runs a projected Levenberg–Marquardt descent on the residual
//! vector. Starts are generated from seeded ChaCha8 substreams (one stream
//! per start index) and run in fixed-size chunks; chunks may execute in
//! parallel, but the run set and the selected result depend only on the
//! per-start outcomes and their indices (best objective, ties broken by
//! lowest start index), never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Residual-vector filler: the objective is the squared norm of what it
/// writes, zero exactly at feasible points.
pub type ResidualFn<'a> = &'a (dyn Fn(&[f64], &mut [f64]) + Sync);
/// Extra feasibility projection applied after the box clamp.
pub type Projection<'a> = &'a (dyn Fn(&mut [f64]) + Sync);

/// A box-constrained nonlinear least-squares feasibility problem.
pub struct Problem<'a> {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Number of residual components.
    pub residual_len: usize,
    pub residuals: ResidualFn<'a>,
    pub project: Option<Projection<'a>>,
}

impl Problem<'_> {
    fn objective(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        (self.residuals)(x, scratch);
        scratch.iter().map(|r| r * r).sum()
    }

    fn clamp_and_project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
        if let Some(project) = self.project {
            project(x);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub starts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Objective value considered a solve; scanning stops after the first
    /// chunk that contains one.
    pub target: f64,
    /// Starts per sequential chunk.
    pub chunk: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            starts: 64,
            max_iters: 500,
            seed: 0,
            target: 1e-26,
            chunk: 8,
        }
    }
}

/// Outcome of a multi-start run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    pub starts_run: usize,
    pub best_start: usize,
    pub best_objective: f64,
    pub iterations: usize,
}

struct StartResult {
    index: usize,
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
}

/// Solve the damped normal equations `(H + λ·diag) δ = −g` in place by
/// Gaussian elimination with partial pivoting. `n` is tiny here.
fn solve_damped(h: &[Vec<f64>], g: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = h.to_vec();
    let mut b: Vec<f64> = g.iter().map(|v| -v).collect();
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda * row[i].abs().max(1e-12);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            let pivot_row = &upper[col];
            for (cell, pivot) in lower[0][col..].iter_mut().zip(&pivot_row[col..]) {
                *cell -= factor * pivot;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

fn levenberg_descent(problem: &Problem, mut x: Vec<f64>, opts: &Options, index: usize) -> StartResult {
    let n = x.len();
    let m = problem.residual_len;
    problem.clamp_and_project(&mut x);
    let mut r = vec![0.0; m];
    let mut f = problem.objective(&x, &mut r);
    let scale: f64 = problem
        .upper
        .iter()
        .zip(&problem.lower)
        .map(|(u, l)| u - l)
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jac = vec![vec![0.0; n]; m];
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for iter in 0..opts.max_iters {
        iterations = iter + 1;
        if f <= opts.target {
            break;
        }
        // central-difference Jacobian, honoring the box
        for col in 0..n {
            if problem.upper[col] - problem.lower[col] <= 0.0 {
                for row in jac.iter_mut() {
                    row[col] = 0.0;
                }
                continue;
            }
            let h = 1e-7 * scale.max(x[col].abs());
            let mut xp = x.clone();
            xp[col] = (x[col] + h).min(problem.upper[col]);
            let mut xm = x.clone();
            xm[col] = (x[col] - h).max(problem.lower[col]);
            let span = xp[col] - xm[col];
            if span <= 0.0 {
                for row in jac.iter_mut() {
                    row[col] = 0.0;
                }
                continue;
            }
            (problem.residuals)(&xp, &mut rp);
            (problem.residuals)(&xm, &mut rm);
            for row in 0..m {
                jac[row][col] = (rp[row] - rm[row]) / span;
            }
        }
        // normal equations
        let mut hess = vec![vec![0.0; n]; n];
        let mut grad = vec![0.0; n];
        for (row, residual) in r.iter().enumerate() {
            for a in 0..n {
                grad[a] += jac[row][a] * residual;
                for b in a..n {
                    hess[a][b] += jac[row][a] * jac[row][b];
                }
            }
        }
        for a in 1..n {
            let (head, tail) = hess.split_at_mut(a);
            for (b, row) in head.iter().enumerate() {
                tail[0][b] = row[a];
            }
        }
        if grad.iter().map(|g| g * g).sum::<f64>() <= 1e-36 {
            break;
        }
        let mut stepped = false;
        for _ in 0..25 {
            let Some(delta) = solve_damped(&hess, &grad, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi + di).collect();
            problem.clamp_and_project(&mut trial);
            let ft = problem.objective(&trial, &mut rp);
            if ft < f {
                x = trial;
                f = ft;
                r.copy_from_slice(&rp);
                lambda = (lambda / 3.0).max(1e-14);
                stepped = true;
                break;
            }
            lambda *= 8.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    StartResult {
        index,
        x,
        objective: f,
        iterations,
    }
}

/// Run the multi-start search. `extra_starts` are appended after the
/// `opts.starts` random starts and share the same selection rule.
pub fn minimize_multistart(
    problem: &Problem,
    opts: &Options,
    extra_starts: &[Vec<f64>],
) -> (Vec<f64>, Diagnostics) {
    let n = problem.lower.len();
    let total = opts.starts + extra_starts.len();
    let make_start = |index: usize| -> Vec<f64> {
        if index < opts.starts {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(index as u64 + 1);
            (0..n)
                .map(|i| {
                    let span = problem.upper[i] - problem.lower[i];
                    problem.lower[i] + rng.gen::<f64>() * span
                })
                .collect()
        } else {
            extra_starts[index - opts.starts].clone()
        }
    };

    let mut results: Vec<StartResult> = Vec::new();
    let mut next = 0;
    while next < total {
        let end = (next + opts.chunk).min(total);
        let chunk: Vec<StartResult> = (next..end)
            .into_par_iter()
            .map(|index| levenberg_descent(problem, make_start(index), opts, index))
            .collect();
        let hit = chunk.iter().any(|r| r.objective <= opts.target);
        results.extend(chunk);
        next = end;
        if hit {
            break;
        }
    }

    let best = results
        .iter()
        .min_by(|a, b| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.index.cmp(&b.index))
        })
        .expect("at least one start");
    let diagnostics = Diagnostics {
        starts_run: results.len(),
        best_start: best.index,
        best_objective: best.objective,
        iterations: best.iterations,
    };
    (best.x.clone(), diagnostics)
}

/// `max(0, x)` — used to express strict-inequality margins as penalties.
pub fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_feasibility_problem() {
        // find x in [0,1]^2 with x0·x1 = 1/8 and x0 ≥ x1 + 0.1
        let residuals = |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[1] - 0.125;
            out[1] = hinge(x[1] + 0.1 - x[0]);
        };
        let problem = Problem {
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            residual_len: 2,
            residuals: &residuals,
            project: None,
        };
        let opts = Options {
            seed: 7,
            ..Default::default()
        };
        let (x, diag) = minimize_multistart(&problem, &opts, &[]);
        assert!(diag.best_objective <= 1e-26, "best {}", diag.best_objective);
        assert!((x[0] * x[1] - 0.125).abs() < 1e-12);
        assert!(x[0] >= x[1] + 0.1 - 1e-9);
    }

    #[test]
    fn random_starts_polish_to_machine_precision() {
        // no warm start: the random starts themselves must converge
        let residuals = |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[0] + x[1] - 0.5;
            out[1] = x[0] - x[1] * x[1];
        };
        let problem = Problem {
            lower: vec![0.0; 2],
            upper: vec![1.0; 2],
            residual_len: 2,
            residuals: &residuals,
            project: None,
        };
        let opts = Options {
            seed: 3,
            starts: 8,
            ..Default::default()
        };
        let (_, diag) = minimize_multistart(&problem, &opts, &[]);
        assert!(diag.best_objective <= 1e-26, "best {}", diag.best_objective);
    }

    #[test]
    fn result_is_reproducible() {
        let residuals = |x: &[f64], out: &mut [f64]| {
            out[0] = x[0] - 0.3;
        };
        let problem = Problem {
            lower: vec![0.0],
            upper: vec![1.0],
            residual_len: 1,
            residuals: &residuals,
            project: None,
        };
        let opts = Options {
            seed: 42,
            ..Default::default()
        };
        let (x1, d1) = minimize_multistart(&problem, &opts, &[]);
        let (x2, d2) = minimize_multistart(&problem, &opts, &[]);
        assert_eq!(x1, x2);
        assert_eq!(d1.best_start, d2.best_start);
    }
}
