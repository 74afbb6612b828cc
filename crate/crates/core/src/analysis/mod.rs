//! Backward-induction lattices, convergence and monotonicity studies, the
//! variance clock and regret-bound verification.

mod bounds;
mod lattice;
mod report;
mod studies;
mod variance;

pub use bounds::*;
pub use lattice::*;
pub use report::*;
pub use studies::*;
pub use variance::*;
