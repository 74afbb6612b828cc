use std::fmt;
use std::sync::Arc;

use super::state::RegretState;
use crate::error::{domain, invalid, Result};

/// Slack on the simultaneous-regret-bound inequality.
pub const SRB_TOLERANCE: f64 = 1e-12;

/// A nonincreasing G: ℝ → [0, 1] bounding the regret tail.
#[derive(Clone)]
pub enum BoundFunction {
    Constant(f64),
    /// min(1, scale·e^{−rate·R}).
    Exponential { scale: f64, rate: f64 },
    /// 1 below the first knot; on [xᵢ, xᵢ₊₁) the value vᵢ. Knots ascending, values nonincreasing.
    Step(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Exponential { scale, rate } => write!(f, "Exponential({scale}·e^(-{rate}R))"),
            Self::Step(k) => write!(f, "Step({k:?})"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl BoundFunction {
    pub fn constant(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(invalid(format!("constant bound must lie in [0,1], got {c}")));
        }
        Ok(Self::Constant(c))
    }

    pub fn exponential(scale: f64, rate: f64) -> Result<Self> {
        if !(scale > 0.0 && rate >= 0.0 && scale.is_finite() && rate.is_finite()) {
            return Err(invalid(format!("bad exponential bound scale={scale} rate={rate}")));
        }
        Ok(Self::Exponential { scale, rate })
    }

    pub fn step(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(invalid("step bound needs at least one knot"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prev = 1.0;
        for &(x, v) in &knots {
            if !x.is_finite() || !(0.0..=prev).contains(&v) {
                return Err(invalid(format!("step bound must be nonincreasing in [0,1]; got {v} at {x}")));
            }
            prev = v;
        }
        Ok(Self::Step(knots))
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Exponential { scale, rate } => (scale * (-rate * r).exp()).min(1.0),
            Self::Step(knots) => match knots.partition_point(|k| k.0 <= r) {
                0 => 1.0,
                i => knots[i - 1].1,
            },
            Self::Custom(g) => g(r),
        }
    }

    /// φ = 1/G, the potential whose average bound is equivalent to this tail bound.
    pub fn reciprocal(&self) -> impl Fn(f64) -> f64 + '_ {
        move |r| 1.0 / self.eval(r)
    }
}

/// True iff mass{ρ ≥ R} ≤ G(R) + 1e−12 at every R of `grid`.
pub fn srb_check(state: &RegretState, g: &BoundFunction, grid: &[f64]) -> Result<bool> {
    if grid.is_empty() {
        return Err(invalid("bound grid is empty"));
    }
    Ok(grid.iter().all(|&r| state.tail_mass(r) <= g.eval(r) + SRB_TOLERANCE))
}

/// SRB over every real R. The tail is constant between atoms and G is
/// nonincreasing, so checking at the atoms suffices.
pub fn srb_check_exact(state: &RegretState, g: &BoundFunction) -> bool {
    let mut tail = 1.0;
    for a in state.atoms() {
        if tail > g.eval(a.regret) + SRB_TOLERANCE {
            return false;
        }
        tail -= a.mass;
    }
    true
}

/// SRB with a strict margin: mass{ρ ≥ R} ≤ G(R) − margin wherever the tail is
/// strictly between 0 and 1, checked at all atoms.
pub fn srb_check_with_margin(state: &RegretState, g: &BoundFunction, margin: f64) -> bool {
    let mut tail = 1.0;
    for (idx, a) in state.atoms().iter().enumerate() {
        let limit = if idx == 0 { g.eval(a.regret) + SRB_TOLERANCE } else { g.eval(a.regret) - margin };
        if tail > limit {
            return false;
        }
        tail -= a.mass;
    }
    true
}

/// Ψ ⊙ φ for the average-potential test; φ must be positive at every atom.
pub fn apb_score(state: &RegretState, phi: impl Fn(f64) -> f64) -> Result<f64> {
    let mut total = 0.0;
    for a in state.atoms() {
        let v = phi(a.regret);
        if !(v > 0.0) {
            return Err(domain(format!("potential {v} at regret {} is not positive", a.regret)));
        }
        total += a.mass * v;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dense_grid() -> Vec<f64> {
        (0..=400).map(|i| -10.0 + 0.05 * i as f64).collect()
    }

    #[test]
    fn srb_examples() {
        let g = BoundFunction::exponential(1.0, 1.0).unwrap();
        assert!(srb_check(&RegretState::point_mass(0.0), &g, &dense_grid()).unwrap());
        assert!(!srb_check(&RegretState::point_mass(1.0), &g, &[1.0]).unwrap());
        let b = super::super::binomial_dist(4, 1.0).unwrap();
        assert!(srb_check(&b, &BoundFunction::constant(1.0).unwrap(), &dense_grid()).unwrap());
        assert!(srb_check(&b, &g, &[]).is_err());
    }

    #[test]
    fn exact_check_agrees_with_dense_grid() {
        let g = BoundFunction::exponential(1.0, 1.0).unwrap();
        let s = RegretState::from_atoms([(-1.0, 0.5), (0.5, 0.5)]).unwrap();
        assert_eq!(srb_check_exact(&s, &g), srb_check(&s, &g, &dense_grid()).unwrap());
        assert!(srb_check_exact(&s, &g));
    }

    #[test]
    fn apb_examples() {
        let phi = |r: f64| r.exp().max(1.0);
        assert_eq!(apb_score(&RegretState::point_mass(0.0), phi).unwrap(), 1.0);
        assert_relative_eq!(apb_score(&RegretState::point_mass(1.0), phi).unwrap(), std::f64::consts::E);
        let s = RegretState::from_atoms([(0.0, 0.5), (2f64.ln(), 0.5)]).unwrap();
        assert_relative_eq!(apb_score(&s, f64::exp).unwrap(), 1.5, max_relative = 1e-15);
        assert!(apb_score(&s, |r| -r).is_err());
    }

    #[test]
    fn average_bound_does_not_follow_from_tail_bound() {
        // Tail bound holds with room to spare, yet E[1/G] exceeds one.
        let g = BoundFunction::exponential(1.0, 1.0).unwrap();
        let s = RegretState::from_atoms([(-1.0, 0.5), (0.5, 0.5)]).unwrap();
        assert!(srb_check_with_margin(&s, &g, 1e-6));
        let apb = apb_score(&s, g.reciprocal()).unwrap();
        assert_relative_eq!(apb, 0.5 + 0.5 * 0.5f64.exp(), max_relative = 1e-15);
        assert!(apb > 1.0 + 1e-6);
    }

    #[test]
    fn step_bound_evaluates_piecewise() {
        let g = BoundFunction::step(vec![(0.0, 0.5), (2.0, 0.1)]).unwrap();
        assert_eq!(g.eval(-1.0), 1.0);
        assert_eq!(g.eval(0.0), 0.5);
        assert_eq!(g.eval(1.9), 0.5);
        assert_eq!(g.eval(2.0), 0.1);
        assert!(BoundFunction::step(vec![(0.0, 0.5), (1.0, 0.7)]).is_err());
    }
}
