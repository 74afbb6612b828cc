//! Finite differences, positivity diagnostics, divided differences and
//! Gauss–Hermite smoothing of final potentials.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussHermite;
use serde::Serialize;

use super::FinalPotential;
use crate::error::{domain, invalid, Result};

/// A derivative must exceed this to count as strictly positive.
pub const POSITIVITY_TOLERANCE: f64 = 1e-12;

/// Highest derivative order supported by the central stencils.
pub const MAX_DERIVATIVE_ORDER: u8 = 6;

/// Step used for an order-`order` central difference at `x`.
///
/// First derivatives use 1e-5 scaled by max(1, |x|). Higher orders use
/// ε^{1/(order+2)} with the same scaling, which keeps rounding error of a
/// width-`order` stencil at the level of the truncation error.
pub fn fd_step(x: f64, order: u8) -> f64 {
    let base = if order <= 1 {
        1e-5
    } else {
        f64::EPSILON.powf(1.0 / (f64::from(order) + 2.0))
    };
    base * x.abs().max(1.0)
}

/// Second-order accurate central difference of order 1..=6 (order 0 evaluates `f`).
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, order: u8) -> f64 {
    central_difference_with_step(f, x, order, fd_step(x, order))
}

pub fn central_difference_with_step(f: impl Fn(f64) -> f64, x: f64, order: u8, h: f64) -> f64 {
    // Stencils on x + m·h for m = −half..=half.
    let (half, coeffs): (i32, &[f64]) = match order {
        0 => return f(x),
        1 => (1, &[-0.5, 0.0, 0.5]),
        2 => (1, &[1.0, -2.0, 1.0]),
        3 => (2, &[-0.5, 1.0, 0.0, -1.0, 0.5]),
        4 => (2, &[1.0, -4.0, 6.0, -4.0, 1.0]),
        5 => (3, &[-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5]),
        _ => (3, &[1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0]),
    };
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(idx, c)| c * f(x + f64::from(idx as i32 - half) * h))
        .sum();
    sum / h.powi(i32::from(order))
}

/// Result of a strict-positivity check of degree `order_checked`.
#[derive(Clone, Debug, Serialize)]
pub struct PositivityReport {
    pub order_checked: u8,
    /// Time slice the check was taken at, when the function came from a time-indexed potential.
    pub time: Option<f64>,
    pub grid: Vec<f64>,
    /// Minimum over the grid of the derivative of each order 0..=k.
    pub min_derivative_value: Vec<f64>,
    pub passed: bool,
}

/// Checks that `f` and its first `k` derivatives exceed [`POSITIVITY_TOLERANCE`] on `grid`.
pub fn strict_positivity_report(f: impl Fn(f64) -> f64, k: u8, grid: &[f64]) -> Result<PositivityReport> {
    if grid.is_empty() {
        return Err(invalid("positivity grid is empty"));
    }
    if k > MAX_DERIVATIVE_ORDER {
        return Err(invalid(format!("positivity order must be in 0..=6, got {k}")));
    }
    let min_derivative_value: Vec<f64> = (0..=k)
        .map(|order| {
            grid.iter()
                .map(|&x| central_difference(&f, x, order))
                .fold(f64::INFINITY, |m, v| if v.is_nan() { f64::NAN } else { m.min(v) })
        })
        .collect();
    let passed = min_derivative_value.iter().all(|&v| v > POSITIVITY_TOLERANCE);
    Ok(PositivityReport {
        order_checked: k,
        time: None,
        grid: grid.to_vec(),
        min_derivative_value,
        passed,
    })
}

/// The fourth divided difference of `f` on {R−2a, …, R+2a}:
/// (f(R−2a) − 4f(R−a) + 6f(R) − 4f(R+a) + f(R+2a)) / (24a⁴).
pub fn divided_difference_g(f: impl Fn(f64) -> f64, r: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("spacing must be positive, got {a}")));
    }
    let num = f(r - 2.0 * a) - 4.0 * f(r - a) + 6.0 * f(r) - 4.0 * f(r + a) + f(r + 2.0 * a);
    Ok(num / (24.0 * a.powi(4)))
}

/// Recursive divided difference [x₀,…,xₙ; f].
pub fn divided_difference(f: impl Fn(f64) -> f64, points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("divided difference needs at least one point"));
    }
    if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(invalid(format!(
            "points must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    let mut table: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    for level in 1..points.len() {
        for i in 0..points.len() - level {
            table[i] = (table[i + 1] - table[i]) / (points[i + level] - points[i]);
        }
    }
    Ok(table[0])
}

/// True iff the n-th divided difference of `f` on `points` (n+1 of them) is nonnegative.
pub fn n_convexity_check(f: impl Fn(f64) -> f64, n: usize, points: &[f64]) -> Result<bool> {
    if points.len() != n + 1 {
        return Err(invalid(format!(
            "{n}-convexity needs {} points, got {}",
            n + 1,
            points.len()
        )));
    }
    Ok(divided_difference(f, points)? >= 0.0)
}

/// Default number of Gauss–Hermite nodes.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

fn hermite_rule(order: usize) -> Result<Arc<GaussHermite>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    let n = NonZeroUsize::new(order).ok_or_else(|| invalid("quadrature order must be at least 1"))?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(rule) = guard.get(&order) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(GaussHermite::new(n));
    guard.insert(order, Arc::clone(&rule));
    Ok(rule)
}

/// E[g(X)] for X ~ Normal(mean, variance), by Gauss–Hermite quadrature.
pub(crate) fn gaussian_expectation(
    g: impl Fn(f64) -> f64,
    mean: f64,
    variance: f64,
    order: usize,
) -> Result<f64> {
    if variance == 0.0 {
        return Ok(g(mean));
    }
    let rule = hermite_rule(order)?;
    let scale = (2.0 * variance).sqrt();
    let sum = rule.integrate(|x| g(mean + scale * x));
    Ok(sum / std::f64::consts::PI.sqrt())
}

/// E[f(X)] for X ~ Normal(R, T̄ − t); returns f(R) exactly when t = T̄.
pub fn gaussian_convolve(f: &FinalPotential, horizon: f64, t: f64, r: f64, order: usize) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(domain(format!("time {t} outside [0, {horizon}]")));
    }
    gaussian_expectation(|x| f.eval(x), r, horizon - t, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stencils_recover_exponential_derivatives() {
        // Attainable accuracy degrades with order as ε^{2/(order+2)}.
        let tol = [1e-9, 1e-6, 1e-4, 1e-3, 5e-3, 1e-2];
        for order in 1..=6u8 {
            let d = central_difference(f64::exp, 0.7, order);
            assert_relative_eq!(d, 0.7f64.exp(), max_relative = tol[order as usize - 1]);
        }
    }

    #[test]
    fn positivity_examples() {
        let grid: Vec<f64> = (0..=12).map(|i| -3.0 + 0.5 * i as f64).collect();
        assert!(strict_positivity_report(f64::exp, 4, &grid).unwrap().passed);
        let r = strict_positivity_report(|x| x, 2, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(!r.passed);
        assert!(r.min_derivative_value[0] < 0.0);
        assert!(r.min_derivative_value[2].abs() < 1e-6);
        let grid: Vec<f64> = (-2..=2).map(f64::from).collect();
        let mix = |x: f64| 0.5 * x.exp() + 0.5 * (2.0 * x).exp();
        assert!(strict_positivity_report(mix, 4, &grid).unwrap().passed);
        assert!(strict_positivity_report(f64::exp, 2, &[]).is_err());
        assert!(strict_positivity_report(f64::exp, 7, &[0.0]).is_err());
    }

    #[test]
    fn divided_difference_examples() {
        let oracle = (2.0 * 2f64.cosh() - 8.0 * 1f64.cosh() + 6.0) / 24.0;
        assert_relative_eq!(divided_difference_g(f64::exp, 0.0, 1.0).unwrap(), oracle, max_relative = 1e-14);
        assert_relative_eq!(oracle, 0.0491561, epsilon = 1e-7);
        for r in [-3.0, 0.0, 1.7] {
            assert!(divided_difference_g(|x| x.powi(3), r, 0.5).unwrap().abs() < 1e-12);
        }
        assert_eq!(divided_difference_g(|x| x.powi(4), 0.0, 1.0).unwrap(), 1.0);
        assert!(divided_difference_g(f64::exp, 0.0, 0.0).is_err());
        assert!(divided_difference_g(f64::exp, 0.0, -1.0).is_err());
    }

    #[test]
    fn n_convexity_examples() {
        assert!(n_convexity_check(f64::exp, 4, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap());
        assert!(n_convexity_check(|x| x * x, 2, &[-0.3, 0.1, 5.0]).unwrap());
        assert_relative_eq!(divided_difference(|x| x * x, &[-0.3, 0.1, 5.0]).unwrap(), 1.0, max_relative = 1e-12);
        assert!(!n_convexity_check(|x| -x * x, 2, &[0.0, 1.0, 2.0]).unwrap());
        assert!(n_convexity_check(f64::exp, 2, &[0.0, 0.0, 1.0]).is_err());
        assert!(n_convexity_check(f64::exp, 2, &[1.0, 0.0, 2.0]).is_err());
        assert!(n_convexity_check(f64::exp, 2, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_convolve_examples() {
        let e = FinalPotential::exp();
        assert_eq!(gaussian_convolve(&e, 1.0, 1.0, 0.3, 64).unwrap(), 0.3f64.exp());
        assert_relative_eq!(gaussian_convolve(&e, 1.0, 0.0, 0.0, 64).unwrap(), 0.5f64.exp(), max_relative = 1e-13);
        let q = FinalPotential::polynomial(vec![1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(gaussian_convolve(&q, 2.0, 0.0, 0.0, 64).unwrap(), 3.0, max_relative = 1e-13);
        assert!(gaussian_convolve(&e, 1.0, 1.5, 0.0, 64).is_err());
        assert!(gaussian_convolve(&e, 1.0, 0.5, 0.0, 0).is_err());
    }

    #[test]
    fn quadrature_order_insensitive() {
        let e = FinalPotential::exp();
        for &(h, r) in &[(4.0, 5.0), (4.0, -5.0), (1.0, 0.0), (0.25, 2.0)] {
            let a = gaussian_convolve(&e, h, 0.0, r, 40).unwrap();
            let b = gaussian_convolve(&e, h, 0.0, r, 80).unwrap();
            assert!((a - b).abs() < 1e-9, "h={h} r={r}: {a} vs {b}");
        }
    }
}
