//! Time-indexed potentials φ(t, R), their regret and time derivatives,
//! backward-equation residuals, and the numeric diagnostics used to validate
//! final potentials (strict positivity, divided differences, n-convexity,
//! Gaussian smoothing).

mod final_potential;
mod numeric;

pub use final_potential::{default_sp_grid, FinalPotential};
pub use numeric::{
    central_difference, central_difference_with_step, divided_difference, divided_difference_g, fd_step,
    gaussian_convolve, n_convexity_check, strict_positivity_report, PositivityReport,
    DEFAULT_QUADRATURE_ORDER, MAX_DERIVATIVE_ORDER, POSITIVITY_TOLERANCE,
};

use std::f64::consts::SQRT_2;

use crate::error::{domain, invalid, Result};
use numeric::gaussian_expectation;

/// Which family a [`Potential`] belongs to.
#[derive(Clone, Debug)]
pub enum PotentialKind {
    /// exp(√2·η·R − η²·t).
    Exponential { eta: f64 },
    /// (t+1)^{−1/2}·exp(R²/(2(t+1))) for R ≥ 0, (t+1)^{−1/2} otherwise.
    NormalHedge,
    /// φ(t, R) = E[f(X)], X ~ Normal(R, T̄ − t), defined on 0 ≤ t ≤ T̄.
    GaussianFinal {
        final_potential: FinalPotential,
        horizon: f64,
        quadrature_order: usize,
    },
}

/// An immutable potential function; cheap to clone and safe to share across threads.
#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
}

impl Potential {
    pub fn exponential(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        Ok(Self {
            kind: PotentialKind::Exponential { eta },
        })
    }

    pub fn normal_hedge() -> Self {
        Self {
            kind: PotentialKind::NormalHedge,
        }
    }

    /// Smooths `final_potential` with a Gaussian of variance T̄ − t.
    ///
    /// The final potential must pass SP{2} on [`default_sp_grid`].
    pub fn gaussian_final(final_potential: FinalPotential, horizon: f64, quadrature_order: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if quadrature_order == 0 {
            return Err(invalid("quadrature order must be at least 1"));
        }
        final_potential.require_sp(2, &default_sp_grid())?;
        Ok(Self {
            kind: PotentialKind::GaussianFinal {
                final_potential,
                horizon,
                quadrature_order,
            },
        })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// Horizon T̄ for finite-horizon potentials.
    pub fn horizon(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::GaussianFinal { horizon, .. } => Some(*horizon),
            _ => None,
        }
    }

    /// Regret at which derivatives are undefined, if any.
    pub fn kink(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::NormalHedge => Some(0.0),
            _ => None,
        }
    }

    /// Regret-derivative orders computed in closed form rather than by finite differences.
    pub fn analytic_derivative_orders(&self) -> Vec<u8> {
        match &self.kind {
            PotentialKind::Exponential { .. } | PotentialKind::NormalHedge => (1..=MAX_DERIVATIVE_ORDER).collect(),
            PotentialKind::GaussianFinal { final_potential, .. } => {
                if final_potential.has_analytic_derivatives() {
                    (1..=MAX_DERIVATIVE_ORDER).collect()
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(domain(format!("time must be finite and nonnegative, got {t}")));
        }
        if let Some(h) = self.horizon() {
            if t > h {
                return Err(domain(format!("time {t} beyond horizon {h}")));
            }
        }
        Ok(())
    }

    fn check_kink(&self, r: f64, what: &str) -> Result<()> {
        if self.kink() == Some(r) {
            return Err(domain(format!("{what} undefined at the kink R = {r}")));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, r: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.eval_unchecked(t, r))
    }

    fn eval_unchecked(&self, t: f64, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Exponential { eta } => (SQRT_2 * eta * r - eta * eta * t).exp(),
            PotentialKind::NormalHedge => {
                let c = t + 1.0;
                if r >= 0.0 {
                    (r * r / (2.0 * c)).exp() / c.sqrt()
                } else {
                    1.0 / c.sqrt()
                }
            }
            PotentialKind::GaussianFinal {
                final_potential,
                horizon,
                quadrature_order,
            } => gaussian_expectation(|x| final_potential.eval(x), r, (horizon - t).max(0.0), *quadrature_order)
                .unwrap_or(f64::NAN),
        }
    }

    /// φ(t, ·) as a plain closure; `t` must already be in the domain.
    pub fn at_time(&self, t: f64) -> Result<impl Fn(f64) -> f64 + '_> {
        self.check_time(t)?;
        Ok(move |r| self.eval_unchecked(t, r))
    }

    /// ∂^order φ / ∂R^order for order in 1..=6.
    pub fn partial_r(&self, t: f64, r: f64, order: u8) -> Result<f64> {
        if !(1..=MAX_DERIVATIVE_ORDER).contains(&order) {
            return Err(invalid(format!("derivative order must be in 1..=6, got {order}")));
        }
        self.check_time(t)?;
        self.check_kink(r, "regret derivative")?;
        Ok(match &self.kind {
            PotentialKind::Exponential { eta } => {
                (SQRT_2 * eta).powi(i32::from(order)) * (SQRT_2 * eta * r - eta * eta * t).exp()
            }
            PotentialKind::NormalHedge => {
                if r < 0.0 {
                    0.0
                } else {
                    let c = t + 1.0;
                    normal_hedge_factor(r, c, order) * self.eval_unchecked(t, r)
                }
            }
            PotentialKind::GaussianFinal {
                final_potential,
                horizon,
                quadrature_order,
            } => {
                if final_potential.has_analytic_derivatives() {
                    gaussian_expectation(
                        |x| final_potential.derivative(x, order),
                        r,
                        horizon - t,
                        *quadrature_order,
                    )?
                } else {
                    central_difference(|x| self.eval_unchecked(t, x), r, order)
                }
            }
        })
    }

    /// ∂φ/∂t.
    pub fn partial_t(&self, t: f64, r: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match &self.kind {
            PotentialKind::Exponential { eta } => -eta * eta * self.eval_unchecked(t, r),
            PotentialKind::NormalHedge => {
                let c = t + 1.0;
                let slope = if r >= 0.0 {
                    -0.5 / c - r * r / (2.0 * c * c)
                } else {
                    -0.5 / c
                };
                slope * self.eval_unchecked(t, r)
            }
            PotentialKind::GaussianFinal { horizon, .. } => {
                let h = 1e-5 * t.abs().max(1.0);
                let f = |s: f64| self.eval_unchecked(s, r);
                if t - h >= 0.0 && t + h <= *horizon {
                    (f(t + h) - f(t - h)) / (2.0 * h)
                } else if t + 2.0 * h <= *horizon {
                    (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
                } else {
                    (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h)
                }
            }
        })
    }

    /// ∂φ/∂t + ½·∂²φ/∂R²; zero for a solution of the driftless backward equation.
    pub fn kolmogorov_residual(&self, t: f64, r: f64) -> Result<f64> {
        self.check_kink(r, "backward-equation residual")?;
        Ok(self.partial_t(t, r)? + 0.5 * self.partial_r(t, r, 2)?)
    }

    /// Positivity of φ(t, ·) and its regret derivatives on `grid`.
    pub fn positivity_report(&self, t: f64, k: u8, grid: &[f64]) -> Result<PositivityReport> {
        let f = self.at_time(t)?;
        let mut report = strict_positivity_report(f, k, grid)?;
        report.time = Some(t);
        Ok(report)
    }
}

/// Pₙ(R) with ∂ⁿ/∂Rⁿ exp(R²/(2c)) = Pₙ(R)·exp(R²/(2c)), via P_{n+1} = Pₙ' + (R/c)·Pₙ.
fn normal_hedge_factor(r: f64, c: f64, order: u8) -> f64 {
    // Coefficients in increasing powers of R.
    let mut poly = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; poly.len() + 1];
        for (deg, &a) in poly.iter().enumerate() {
            if deg > 0 {
                next[deg - 1] += a * deg as f64;
            }
            next[deg + 1] += a / c;
        }
        poly = next;
    }
    poly.iter().rev().fold(0.0, |acc, &a| acc * r + a)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn exponential_solves_backward_equation(eta in 0.1..2.0f64, t in 0.0..5.0f64, r in -3.0..3.0f64) {
            let p = Potential::exponential(eta).unwrap();
            let v = p.eval(t, r).unwrap();
            prop_assert!(p.kolmogorov_residual(t, r).unwrap().abs() <= 1e-12 * v.max(1.0));
            for order in 1..=4 {
                prop_assert!(p.partial_r(t, r, order).unwrap() > 0.0);
            }
        }

        #[test]
        fn normal_hedge_is_nondecreasing(t in 0.0..10.0f64, a in -4.0..4.0f64, b in -4.0..4.0f64) {
            let p = Potential::normal_hedge();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.eval(t, lo).unwrap() <= p.eval(t, hi).unwrap());
        }

        #[test]
        fn gaussian_final_matches_closed_form(rate in 0.2..1.5f64, t in 0.0..1.0f64, r in -2.0..2.0f64) {
            // E e^{c(R + √(T−t) Z)} = e^{cR + c²(T−t)/2}
            let f = FinalPotential::scaled_exp(1.0, rate).unwrap();
            let p = Potential::gaussian_final(f, 1.0, DEFAULT_QUADRATURE_ORDER).unwrap();
            let exact = (rate * r + rate * rate * (1.0 - t) / 2.0).exp();
            prop_assert!((p.eval(t, r).unwrap() - exact).abs() <= 1e-12 * exact);
        }

        #[test]
        fn divided_difference_kills_cubics(c in prop::array::uniform4(-1.0..1.0f64), r in -2.0..2.0f64, a in 0.5..2.0f64) {
            let cubic = move |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
            prop_assert!(divided_difference_g(cubic, r, a).unwrap().abs() < 1e-12);
        }
    }
}
