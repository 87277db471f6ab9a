//! Bounded one-dimensional minimization: coarse grid bracketing followed by
//! golden-section refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[a, b]` until the bracket is narrower than `tol`.
///
/// Returns `(x_min, f_min)`.
pub(crate) fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Minimizes `f` over `[lo, hi]`: scan `points` evenly spaced nodes, bracket
/// the best node by its neighbours and refine by golden section. Endpoints are
/// returned when they are at least as good as the interior refinement.
pub(crate) fn bracketed_minimize<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    points: usize,
    tol: f64,
) -> (f64, f64) {
    debug_assert!(points >= 3 && lo < hi);
    let step = (hi - lo) / (points - 1) as f64;
    let node = |i: usize| if i + 1 == points { hi } else { lo + step * i as f64 };

    let mut best = 0;
    let mut best_f = f(lo);
    for i in 1..points {
        let v = f(node(i));
        if v < best_f {
            best = i;
            best_f = v;
        }
    }

    let a = node(best.saturating_sub(1));
    let b = node((best + 1).min(points - 1));
    let (x, fx) = golden_section(&f, a, b, tol);

    let mut out = (x, fx);
    if best_f <= out.1 {
        out = (node(best), best_f);
    }
    for edge in [lo, hi] {
        let fe = f(edge);
        if fe <= out.1 {
            out = (edge, fe);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn bracketing_escapes_a_shallow_local_minimum() {
        // Local minimum near -1.5, global near 1.2.
        let f = |x: f64| 0.5 * (x + 1.5).powi(2) * (x - 1.2).powi(2) + 0.1 * (x - 1.2).powi(2);
        let (x, _) = bracketed_minimize(f, -3.0, 3.0, 64, 1e-10);
        assert!((x - 1.2).abs() < 1e-6, "{x}");
    }

    #[test]
    fn monotone_function_returns_boundary() {
        let (x, _) = bracketed_minimize(|x| -x, 0.0, 1.0, 16, 1e-10);
        assert_eq!(x, 1.0);
    }
}
