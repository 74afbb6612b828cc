use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::weights::{
    learner_weights_continuous, learner_weights_discrete, learner_weights_integer, PotentialSource, WeightFunction,
};
use crate::error::Result;
use crate::measure::RegretState;
use crate::potential::Potential;

/// What a learner sees at the start of a step.
#[derive(Clone, Copy, Debug)]
pub struct LearnerView<'a> {
    /// 1-based index of the step being played.
    pub iter: usize,
    pub t: f64,
    /// Time after this step on lattice modes; `None` in continuous time.
    pub t_next: Option<f64>,
    /// Step size the mode expects.
    pub step: f64,
    pub state: &'a RegretState,
}

pub trait Learner {
    /// Weights normalized so that Ψ ⊙ P = 1.
    fn weights(&mut self, view: &LearnerView<'_>) -> Result<WeightFunction>;

    fn name(&self) -> String;
}

/// The potential-difference learners of the three modes.
pub enum PotentialLearner {
    /// Differences at ±2 of the potential at the next integer time.
    Integer(Box<dyn PotentialSource>),
    /// Differences at ±s(1+s) of the potential at the next lattice time.
    Discrete(Box<dyn PotentialSource>),
    /// Regret derivative of the potential at the current time.
    Continuous(Potential),
}

impl Learner for PotentialLearner {
    fn weights(&mut self, view: &LearnerView<'_>) -> Result<WeightFunction> {
        match self {
            Self::Integer(src) => learner_weights_integer(src.as_ref(), view.iter, view.state),
            Self::Discrete(src) => {
                let t_next = view.t_next.unwrap_or(view.t + view.step * view.step);
                learner_weights_discrete(src.as_ref(), t_next, view.state, view.step)
            }
            Self::Continuous(p) => learner_weights_continuous(p, view.t, view.state),
        }
    }

    fn name(&self) -> String {
        "potential".to_string()
    }
}

/// P ≡ 1: every atom's action gets its own mass.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformLearner;

impl Learner for UniformLearner {
    fn weights(&mut self, view: &LearnerView<'_>) -> Result<WeightFunction> {
        Ok(WeightFunction::uniform(view.state))
    }

    fn name(&self) -> String {
        "uniform".to_string()
    }
}

/// Independent uniform raw weights per atom, normalized; seeded for reproducibility.
#[derive(Clone, Debug)]
pub struct RandomLearner {
    rng: ChaCha8Rng,
}

impl RandomLearner {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Learner for RandomLearner {
    fn weights(&mut self, view: &LearnerView<'_>) -> Result<WeightFunction> {
        let raw = (0..view.state.len()).map(|_| self.rng.gen_range(0.01..1.0)).collect();
        WeightFunction::from_raw(view.state, raw)
    }

    fn name(&self) -> String {
        "random".to_string()
    }
}
