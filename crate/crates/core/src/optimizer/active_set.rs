//! Active-set Newton descent on the floored simplex.
//!
//! Each iteration solves the equality-constrained Newton system on the
//! entries above the floor, steps along it with a ratio test against the
//! floor and Armijo backtracking. A bound entry is released once its
//! multiplier `g_j - mu` turns negative at a subspace minimizer. Stopping on
//! a null Newton step keeps the result invariant to rescaling the objective.

use nalgebra::{DMatrix, DVector};

use super::simplex::stationarity;

/// Stationarity level that counts as a first-order point.
pub const STATIONARITY_TOLERANCE: f64 = 1e-7;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const NULL_STEP: f64 = 1e-14;
const STALL_STREAK: usize = 5;
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

pub(crate) struct LocalOutcome {
    pub h: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Settings {
    pub floor: f64,
    pub max_iterations: usize,
    pub convergence_tolerance: f64,
}

/// `f` writes the gradient into its second argument and returns the value;
/// `hess` writes the row-major Hessian.
pub(crate) fn minimize<F, H>(f: F, hess: H, start: Vec<f64>, settings: &Settings) -> LocalOutcome
where
    F: Fn(&[f64], &mut [f64]) -> f64,
    H: Fn(&[f64], &mut [f64]),
{
    let k = start.len();
    let floor = settings.floor;
    let mut h = start;
    let mut g = vec![0.0; k];
    let mut value = f(&h, &mut g);
    let mut at_floor: Vec<bool> = h.iter().map(|&x| x <= floor).collect();
    let mut small_decreases = 0;
    let mut iterations = 0;

    let mut curvature = vec![0.0; k * k];
    let mut trial = vec![0.0; k];
    let mut g_trial = vec![0.0; k];

    while iterations < settings.max_iterations {
        if k == 1 {
            break;
        }
        iterations += 1;

        let free: Vec<usize> = (0..k).filter(|&j| !at_floor[j]).collect();
        hess(&h, &mut curvature);
        let (direction, mu) = newton_step(&curvature, &g, &free, k);
        // Bound entry whose multiplier says it should leave the floor.
        let release = (0..k)
            .filter(|&j| at_floor[j] && g[j] - mu < 0.0)
            .min_by(|&a, &b| (g[a] - mu).total_cmp(&(g[b] - mu)));

        let largest = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        // Measured against `g - mu` so rounding in the sum of `d` cannot flip its sign.
        let slope: f64 = direction.iter().zip(&g).map(|(d, gj)| d * (gj - mu)).sum();
        if largest <= NULL_STEP || slope >= 0.0 {
            match release {
                Some(j) => {
                    at_floor[j] = false;
                    continue;
                }
                None => break,
            }
        }

        let (max_step, blocking) = ratio_test(&h, &direction, floor);
        let mut step = max_step.min(1.0);
        let mut accepted = None;
        // Slack of a few ulps so steps below the objective's resolution still count.
        let slack = ROUNDING_SLACK * value.abs();
        for _ in 0..MAX_BACKTRACKS {
            for j in 0..k {
                trial[j] = h[j] + step * direction[j];
            }
            if step == max_step {
                if let Some(j) = blocking {
                    trial[j] = floor;
                }
            }
            let v = f(&trial, &mut g_trial);
            if v.is_finite() && v <= value + ARMIJO_C1 * step * slope + slack {
                accepted = Some(v);
                break;
            }
            step *= 0.5;
        }

        let Some(new_value) = accepted else {
            match release {
                Some(j) => {
                    at_floor[j] = false;
                    continue;
                }
                None => break,
            }
        };

        if step == max_step {
            if let Some(j) = blocking {
                at_floor[j] = true;
            }
        }

        let decrease = value - new_value;
        let before = stationarity(&h, &g, floor);
        h.copy_from_slice(&trial);
        g.copy_from_slice(&g_trial);
        value = new_value;
        let after = stationarity(&h, &g, floor);

        // A stall needs both a negligible decrease and no progress toward stationarity.
        if decrease <= settings.convergence_tolerance * value.abs().max(1.0) && after > 0.5 * before {
            small_decreases += 1;
        } else {
            small_decreases = 0;
        }
        if small_decreases >= STALL_STREAK && after <= STATIONARITY_TOLERANCE {
            break;
        }
    }

    let stationarity = stationarity(&h, &g, floor);
    LocalOutcome {
        h,
        value,
        iterations,
        converged: stationarity <= STATIONARITY_TOLERANCE,
    }
}

/// Minimizer of the quadratic model on the free entries subject to keeping
/// the sum fixed: `d_F = -H_F^{-1} (g_F - mu 1)`. A singular `H_F` gets a
/// growing ridge; a vanishing one falls back to a scaled gradient step.
/// Returns the full-length direction and the multiplier `mu`.
fn newton_step(curvature: &[f64], g: &[f64], free: &[usize], k: usize) -> (Vec<f64>, f64) {
    let n = free.len();
    let mut sub = DMatrix::from_fn(n, n, |r, c| curvature[free[r] * k + free[c]]);
    let scale = (0..n).fold(0.0f64, |m, r| m.max(sub[(r, r)]));
    let g_free = DVector::from_iterator(n, free.iter().map(|&j| g[j]));
    let ones = DVector::from_element(n, 1.0);

    let mut ridge = if scale > 0.0 && scale.is_finite() { 0.0 } else { 1.0 };
    let base = if ridge > 0.0 { 1.0 } else { scale };
    for _ in 0..12 {
        if ridge > 0.0 {
            for r in 0..n {
                sub[(r, r)] += ridge * base;
            }
        }
        if let Some(chol) = sub.clone().cholesky() {
            let hg = chol.solve(&g_free);
            let h1 = chol.solve(&ones);
            let denom = h1.sum();
            if denom > 0.0 {
                let mu = hg.sum() / denom;
                let mut direction = vec![0.0; k];
                for (r, &j) in free.iter().enumerate() {
                    direction[j] = -(hg[r] - mu * h1[r]);
                }
                recentre(&mut direction, free);
                if direction.iter().all(|d| d.is_finite()) && mu.is_finite() {
                    return (direction, mu);
                }
            }
        }
        if ridge > 0.0 {
            for r in 0..n {
                sub[(r, r)] -= ridge * base;
            }
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
    }

    let mu = g_free.mean();
    let mut direction = vec![0.0; k];
    for &j in free {
        direction[j] = -(g[j] - mu);
    }
    (direction, mu)
}

/// Removes rounding drift so the free entries of `d` sum to zero.
fn recentre(d: &mut [f64], free: &[usize]) {
    let drift = free.iter().map(|&j| d[j]).sum::<f64>() / free.len() as f64;
    for &j in free {
        d[j] -= drift;
    }
}

/// Largest step keeping every entry at or above the floor, and the entry
/// that blocks it.
fn ratio_test(h: &[f64], d: &[f64], floor: f64) -> (f64, Option<usize>) {
    let mut best = f64::INFINITY;
    let mut blocking = None;
    for (j, (&x, &dj)) in h.iter().zip(d).enumerate() {
        if dj < 0.0 {
            let limit = ((x - floor) / -dj).max(0.0);
            if limit < best {
                best = limit;
                blocking = Some(j);
            }
        }
    }
    (best, blocking)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(floor: f64) -> Settings {
        Settings {
            floor,
            max_iterations: 500,
            convergence_tolerance: 1e-12,
        }
    }

    #[test]
    fn quadratic_with_interior_minimum() {
        let target = [0.2, 0.3, 0.5];
        let f = |h: &[f64], g: &mut [f64]| {
            let mut v = 0.0;
            for j in 0..3 {
                g[j] = 2.0 * (j + 1) as f64 * (h[j] - target[j]);
                v += (j + 1) as f64 * (h[j] - target[j]).powi(2);
            }
            v
        };
        let hess = |_: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..3 {
                out[j * 3 + j] = 2.0 * (j + 1) as f64;
            }
        };
        let out = minimize(f, hess, vec![0.6, 0.2, 0.2], &settings(0.0));
        assert!(out.converged);
        for (a, b) in out.h.iter().zip(&target) {
            assert!((a - b).abs() < 1e-8, "{:?}", out.h);
        }
    }

    #[test]
    fn linear_objective_drives_mass_to_one_vertex() {
        let f = |h: &[f64], g: &mut [f64]| {
            g.copy_from_slice(&[1.0, 2.0, 0.5]);
            h[0] + 2.0 * h[1] + 0.5 * h[2]
        };
        let flat = |_: &[f64], out: &mut [f64]| out.iter_mut().for_each(|v| *v = 0.0);
        let out = minimize(f, flat, vec![0.3, 0.3, 0.4], &settings(0.1));
        assert!((out.h[2] - 0.8).abs() < 1e-12, "{:?}", out.h);
        assert_eq!(out.h[0], 0.1);
        assert_eq!(out.h[1], 0.1);
    }

    #[test]
    fn bound_entry_is_released_when_profitable() {
        // Starts with entry 0 on the floor although the optimum is interior.
        let f = |h: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (h[0] - 0.5);
            g[1] = 2.0 * (h[1] - 0.5);
            (h[0] - 0.5).powi(2) + (h[1] - 0.5).powi(2)
        };
        let hess = |_: &[f64], out: &mut [f64]| out.copy_from_slice(&[2.0, 0.0, 0.0, 2.0]);
        let out = minimize(f, hess, vec![0.05, 0.95], &settings(0.05));
        assert!((out.h[0] - 0.5).abs() < 1e-8, "{:?}", out.h);
    }
}
