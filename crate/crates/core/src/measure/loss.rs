use serde::Serialize;

use super::state::{Atom, RegretState, MASS_TOLERANCE};
use crate::error::{invalid, Result};

/// Slack allowed when checking |y| ≤ s.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Finite-support loss distribution assigned to one atom.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossDist {
    points: Vec<(f64, f64)>,
}

impl LossDist {
    /// `(value, probability)` pairs; probabilities nonnegative and summing to one.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("loss distribution needs at least one point"));
        }
        if let Some(&(y, q)) = points
            .iter()
            .find(|(y, q)| !y.is_finite() || !(*q >= 0.0) || !q.is_finite())
        {
            return Err(invalid(format!("bad loss point {y} with probability {q}")));
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(invalid(format!("loss probabilities sum to {total}, expected 1")));
        }
        Ok(Self { points })
    }

    pub fn point(y: f64) -> Self {
        Self {
            points: vec![(y, 1.0)],
        }
    }

    /// {+s w.p. p, −s w.p. 1 − p}.
    pub fn two_point(s: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("probability must lie in [0,1], got {p}")));
        }
        Self::new(vec![(s, p), (-s, 1.0 - p)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Mean loss, the bias B(R).
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(y, q)| q * y).sum()
    }

    /// E[(y − ℓ)²].
    pub fn second_moment_about(&self, ell: f64) -> f64 {
        self.points.iter().map(|(y, q)| q * (y - ell) * (y - ell)).sum()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment_about(self.mean())
    }

    pub fn max_abs(&self) -> f64 {
        self.points.iter().map(|p| p.0.abs()).fold(0.0, f64::max)
    }

    pub fn is_point_mass(&self) -> bool {
        self.points.iter().filter(|p| p.1 > 0.0).count() == 1
    }
}

/// An adversary move: step size plus one loss distribution per atom.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossMap {
    step_size: f64,
    per_atom: Vec<LossDist>,
}

impl LossMap {
    /// Validates 0 < s ≤ 1 and that every support lies in [−s, s].
    pub fn new(step_size: f64, per_atom: Vec<LossDist>) -> Result<Self> {
        if !(step_size > 0.0 && step_size <= 1.0) {
            return Err(invalid(format!("step size must lie in (0,1], got {step_size}")));
        }
        for (idx, d) in per_atom.iter().enumerate() {
            if d.max_abs() > step_size + SUPPORT_TOLERANCE {
                return Err(invalid(format!(
                    "loss {} at atom {idx} exceeds step size {step_size}",
                    d.max_abs()
                )));
            }
        }
        Ok(Self { step_size, per_atom })
    }

    /// The same distribution at each of `n` atoms.
    pub fn uniform(step_size: f64, dist: LossDist, n: usize) -> Result<Self> {
        Self::new(step_size, vec![dist; n])
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn per_atom(&self) -> &[LossDist] {
        &self.per_atom
    }

    pub fn len(&self) -> usize {
        self.per_atom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_atom.is_empty()
    }
}

/// One game step of the state: atom (R, m) spreads to (R + ℓ − y, m·q(y)).
///
/// Regret grows when an action's loss is below the learner's. Labeled
/// states require point-mass losses so that each expert stays one atom.
pub fn convolve_step(state: &RegretState, losses: &LossMap, ell: f64) -> Result<RegretState> {
    if losses.len() != state.len() {
        return Err(invalid(format!(
            "loss map has {} entries for {} atoms",
            losses.len(),
            state.len()
        )));
    }
    if !ell.is_finite() {
        return Err(invalid(format!("aggregate loss must be finite, got {ell}")));
    }
    let mut out = Vec::with_capacity(state.len() * 2);
    for (atom, dist) in state.atoms().iter().zip(losses.per_atom()) {
        if state.is_labeled() && !dist.is_point_mass() {
            return Err(invalid(format!(
                "labeled atom {:?} needs a deterministic loss",
                atom.label
            )));
        }
        for &(y, q) in dist.points() {
            if q > 0.0 {
                out.push(Atom {
                    regret: atom.regret + (ell - y),
                    mass: atom.mass * q,
                    label: atom.label.clone(),
                });
            }
        }
    }
    RegretState::from_unnormalized(out, state.is_labeled())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_map_validation() {
        assert!(LossMap::uniform(1.5, LossDist::point(0.0), 1).is_err());
        assert!(LossMap::uniform(0.0, LossDist::point(0.0), 1).is_err());
        assert!(LossMap::uniform(0.5, LossDist::point(0.6), 1).is_err());
        assert!(LossDist::new(vec![(0.1, 0.5), (0.2, 0.4)]).is_err());
        assert!(LossDist::two_point(1.0, 1.2).is_err());
    }

    #[test]
    fn constant_losses_leave_state_unchanged() {
        let s = RegretState::from_atoms([(-1.0, 0.3), (0.5, 0.7)]).unwrap();
        let l = LossMap::uniform(1.0, LossDist::point(0.3), 2).unwrap();
        assert_eq!(convolve_step(&s, &l, 0.3).unwrap(), s);
    }

    #[test]
    fn random_walk_splits_point_mass() {
        let s = RegretState::point_mass(0.0);
        let l = LossMap::uniform(1.0, LossDist::two_point(1.0, 0.5).unwrap(), 1).unwrap();
        let next = convolve_step(&s, &l, 0.0).unwrap();
        assert_eq!(next, RegretState::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap());
    }

    #[test]
    fn misaligned_losses_rejected() {
        let s = RegretState::point_mass(0.0);
        let l = LossMap::uniform(1.0, LossDist::point(0.0), 2).unwrap();
        assert!(convolve_step(&s, &l, 0.0).is_err());
    }

    #[test]
    fn labeled_state_needs_point_losses() {
        let s = RegretState::experts(2).unwrap();
        let rw = LossMap::uniform(1.0, LossDist::two_point(1.0, 0.5).unwrap(), 2).unwrap();
        assert!(convolve_step(&s, &rw, 0.0).is_err());
        let det = LossMap::new(1.0, vec![LossDist::point(1.0), LossDist::point(-1.0)]).unwrap();
        let next = convolve_step(&s, &det, 0.0).unwrap();
        let regrets: Vec<_> = next.atoms().iter().map(|a| (a.label.clone().unwrap(), a.regret)).collect();
        assert_eq!(regrets, vec![("e0".to_string(), -1.0), ("e1".to_string(), 1.0)]);
    }
}
