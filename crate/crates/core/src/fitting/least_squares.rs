//! Box-constrained Levenberg-Marquardt for small dense problems.
//!
//! Variables sitting on a bound whose gradient points outward are frozen for
//! the step; the remaining free block is solved with Marquardt-scaled damping
//! and the trial point is projected back into the box.

use nalgebra::{DMatrix, DVector};

pub(crate) trait Residuals {
    fn num_residuals(&self) -> usize;

    fn residuals(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `m x n` Jacobian of the residuals.
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at `x`.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const LAMBDA_MIN: f64 = 1e-15;

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub(crate) fn minimize<P: Residuals>(
    problem: &P,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &LmOptions,
) -> LmOutcome {
    let n = x0.len();
    let m = problem.num_residuals();
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);

    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    problem.residuals(&x, &mut r);
    let mut rss = sum_sq(&r);
    let mut lambda = LAMBDA_INIT;

    for iter in 1..=options.max_iterations {
        if rss == 0.0 {
            return LmOutcome { x, rss, iterations: iter - 1, converged: true };
        }
        problem.jacobian(&x, &mut jac);

        let mut grad = vec![0.0; n];
        let mut normal = vec![0.0; n * n];
        for row in 0..m {
            let jr = &jac[row * n..(row + 1) * n];
            for a in 0..n {
                grad[a] += jr[a] * r[row];
                for b in 0..n {
                    normal[a * n + b] += jr[a] * jr[b];
                }
            }
        }

        let free: Vec<usize> = (0..n)
            .filter(|&i| !((x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0)))
            .collect();
        let projected_grad = free.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max);
        if free.is_empty() || projected_grad <= options.gradient_tolerance {
            return LmOutcome { x, rss, iterations: iter - 1, converged: true };
        }

        let nf = free.len();
        loop {
            let mut system = DMatrix::<f64>::zeros(nf, nf);
            let mut rhs = DVector::<f64>::zeros(nf);
            for (a, &ia) in free.iter().enumerate() {
                rhs[a] = -grad[ia];
                for (b, &ib) in free.iter().enumerate() {
                    system[(a, b)] = normal[ia * n + ib];
                }
                system[(a, a)] += lambda * normal[ia * n + ia].max(1e-30);
            }
            let step = system
                .clone()
                .cholesky()
                .map(|c| c.solve(&rhs))
                .or_else(|| system.lu().solve(&rhs));

            if let Some(step) = step.filter(|s| s.iter().all(|v| v.is_finite())) {
                trial.copy_from_slice(&x);
                for (a, &ia) in free.iter().enumerate() {
                    trial[ia] += step[a];
                }
                clamp_into(&mut trial, lower, upper);
                problem.residuals(&trial, &mut r_trial);
                let rss_trial = sum_sq(&r_trial);

                if rss_trial.is_finite() && rss_trial < rss {
                    let moved = trial
                        .iter()
                        .zip(&x)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let scale = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    rss = rss_trial;
                    lambda = (lambda / 10.0).max(LAMBDA_MIN);
                    if moved <= options.step_tolerance * (scale + options.step_tolerance) {
                        return LmOutcome { x, rss, iterations: iter, converged: true };
                    }
                    break;
                }
            }

            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                // No damped step reduces the residual: stationary to machine precision.
                return LmOutcome { x, rss, iterations: iter, converged: true };
            }
        }
    }

    LmOutcome {
        x,
        rss,
        iterations: options.max_iterations,
        converged: false,
    }
}
