//! Learner/adversary games on regret measures: integer, discrete-lattice and
//! continuous-time modes, with the strategies that play them.

mod adversary;
mod engine;
mod learner;
mod weights;

pub use adversary::*;
pub use engine::*;
pub use learner::*;
pub use weights::*;
