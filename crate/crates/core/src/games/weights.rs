use serde::Serialize;

use crate::analysis::{table_for_geometry, LatticeGeometry, LatticePotential, LatticeTable, Side};
use crate::error::{domain, invalid, Error, Result};
use crate::measure::RegretState;
use crate::potential::{FinalPotential, Potential};

/// Allowed deviation of Ψ ⊙ P from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Anything that can be evaluated as φ(t, R).
pub trait PotentialSource: Send + Sync {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64>;
}

impl PotentialSource for Potential {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64> {
        self.eval(t, r)
    }
}

impl PotentialSource for LatticeTable {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64> {
        self.value(t, r)
    }
}

impl PotentialSource for LatticePotential {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64> {
        self.value(t, r)
    }
}

/// Wraps a plain function of (t, R).
pub struct FnSource<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Send + Sync> PotentialSource for FnSource<F> {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64> {
        Ok((self.0)(t, r))
    }
}

/// Lattice potential backed by a stored table when it fits the build budgets,
/// otherwise by closed forms.
pub enum LatticeSource {
    Table(LatticeTable),
    Closed(LatticePotential),
}

impl LatticeSource {
    pub fn build(final_potential: &FinalPotential, geometry: LatticeGeometry, side: Side) -> Result<Self> {
        match table_for_geometry(final_potential, geometry, side) {
            Ok(t) => return Ok(Self::Table(t)),
            Err(Error::Resource(_)) => {}
            Err(e) => return Err(e),
        }
        Ok(Self::Closed(LatticePotential {
            final_potential: final_potential.clone(),
            geometry,
            side,
        }))
    }
}

impl PotentialSource for LatticeSource {
    fn potential_value(&self, t: f64, r: f64) -> Result<f64> {
        match self {
            Self::Table(table) => table.value(t, r),
            Self::Closed(c) => c.value(t, r),
        }
    }
}

/// Per-atom learner weights P(R), aligned with the atoms of a state and
/// normalized so that Ψ ⊙ P = 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightFunction {
    weights: Vec<f64>,
}

impl WeightFunction {
    /// Normalizes nonnegative raw scores d(R) against `state`.
    ///
    /// Fails with [`Error::DegeneratePotential`] when Ψ ⊙ d = 0.
    pub fn from_raw(state: &RegretState, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != state.len() {
            return Err(invalid(format!("{} weights for {} atoms", raw.len(), state.len())));
        }
        if let Some((idx, v)) = raw.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(domain(format!(
                "weight {v} at regret {} is negative or not finite",
                state.atoms()[idx].regret
            )));
        }
        let z: f64 = state.masses().zip(&raw).map(|(m, d)| m * d).sum();
        if !(z > 0.0) {
            return Err(Error::DegeneratePotential(
                "normalizer is zero: the potential is flat across all atoms".into(),
            ));
        }
        Ok(Self {
            weights: raw.into_iter().map(|d| d / z).collect(),
        })
    }

    /// P ≡ 1.
    pub fn uniform(state: &RegretState) -> Self {
        Self {
            weights: vec![1.0; state.len()],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Ψ ⊙ P.
    pub fn normalization(&self, state: &RegretState) -> f64 {
        state.masses().zip(&self.weights).map(|(m, w)| m * w).sum()
    }

    /// Probability each atom's action receives: mass·P(R).
    pub fn action_probabilities<'a>(&'a self, state: &'a RegretState) -> impl Iterator<Item = f64> + 'a {
        state.masses().zip(&self.weights).map(|(m, w)| m * w)
    }
}

fn shifted_differences(src: &dyn PotentialSource, t: f64, state: &RegretState, offset: f64) -> Result<Vec<f64>> {
    state
        .regrets()
        .map(|r| Ok(0.5 * (src.potential_value(t, r + offset)? - src.potential_value(t, r - offset)?)))
        .collect()
}

/// Integer-time learner: P(R) ∝ (φ(i, R+2) − φ(i, R−2))/2.
pub fn learner_weights_integer(src: &dyn PotentialSource, i: usize, state: &RegretState) -> Result<WeightFunction> {
    WeightFunction::from_raw(state, shifted_differences(src, i as f64, state, 2.0)?)
}

/// Discrete-time learner at level k: P(R) ∝ (φ(t, R+s(1+s)) − φ(t, R−s(1+s)))/2,
/// with `t` the next lattice time and s the level's step.
pub fn learner_weights_discrete(src: &dyn PotentialSource, t_next: f64, state: &RegretState, step: f64) -> Result<WeightFunction> {
    if !(step > 0.0) {
        return Err(invalid(format!("step must be positive, got {step}")));
    }
    WeightFunction::from_raw(state, shifted_differences(src, t_next, state, step * (1.0 + step))?)
}

/// Continuous-time learner: P(R) ∝ ∂φ/∂R. Atoms at a kink of the potential get weight 0.
pub fn learner_weights_continuous(p: &Potential, t: f64, state: &RegretState) -> Result<WeightFunction> {
    let raw = state
        .regrets()
        .map(|r| {
            if p.kink() == Some(r) {
                Ok(0.0)
            } else {
                p.partial_r(t, r, 1)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    WeightFunction::from_raw(state, raw)
}
