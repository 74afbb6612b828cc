use serde::Serialize;

use crate::error::{invalid, Result};
use crate::games::GameTrace;

/// Variance clock of a recorded game.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceClock {
    /// Σ Δt over the recorded steps.
    pub v_n: f64,
    /// Per-step Var_i = Σ q_j E[y_j²] − (Σ q_j E[y_j])², with q the action probabilities.
    pub var_sequence: Vec<f64>,
}

/// Needs a trace recorded with snapshots.
pub fn variance_clock(trace: &GameTrace) -> Result<VarianceClock> {
    if trace.snapshots.len() != trace.steps() {
        return Err(invalid(format!(
            "trace has {} steps but {} snapshots; rerun with snapshots enabled",
            trace.steps(),
            trace.snapshots.len()
        )));
    }
    let var_sequence = trace
        .snapshots
        .iter()
        .map(|snap| {
            let (mut first, mut second) = (0.0, 0.0);
            for (q, d) in snap.weights.action_probabilities(&snap.state).zip(snap.losses.per_atom()) {
                first += q * d.mean();
                second += q * d.second_moment_about(0.0);
            }
            (second - first * first).max(0.0)
        })
        .collect();
    Ok(VarianceClock {
        v_n: trace.snapshots.iter().map(|s| s.dt).sum(),
        var_sequence,
    })
}
