//! Geometry of the floored simplex `{h : h_j >= floor, sum h = 1}`.

use rand::Rng;
use rand_distr::Exp1;

/// Euclidean projection of `v` onto the floored simplex.
///
/// Shifts by the floor, projects onto the simplex of mass `1 - K * floor`
/// by the sort-and-threshold rule, then shifts back.
pub fn project_onto_floored_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let k = v.len();
    let mass = 1.0 - k as f64 * floor;
    let shifted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - mass) / (idx + 1) as f64;
        if u - t > 0.0 {
            threshold = t;
        }
    }
    shifted.iter().map(|x| floor + (x - threshold).max(0.0)).collect()
}

/// Norm of the projected-gradient step `P(h - g) - h`; zero exactly at
/// first-order stationary points.
pub(crate) fn stationarity(h: &[f64], grad: &[f64], floor: f64) -> f64 {
    let trial: Vec<f64> = h.iter().zip(grad).map(|(x, g)| x - g).collect();
    project_onto_floored_simplex(&trial, floor)
        .iter()
        .zip(h)
        .map(|(p, x)| (p - x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Flat Dirichlet draw mapped onto the floored simplex.
pub(crate) fn sample_interior<R: Rng + ?Sized>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1).max(1e-300)).collect();
    let total: f64 = draws.iter().sum();
    let mass = 1.0 - k as f64 * floor;
    draws.iter().map(|d| floor + mass * d / total).collect()
}

/// Clamps to the floor and puts any rounding drift in the sum on the
/// largest entry.
pub(crate) fn tidy(h: &mut [f64], floor: f64) {
    for x in h.iter_mut() {
        if *x < floor {
            *x = floor;
        }
    }
    let drift = 1.0 - h.iter().sum::<f64>();
    let largest = h
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    h[largest] += drift;
}
