use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::StudyReport;
use crate::error::{invalid, Result};
use crate::games::GameTrace;

/// Maximum number of individual violations listed in a report.
const LISTED_VIOLATIONS: usize = 20;

/// ε-regret bound families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundFamily {
    /// √(2t·ln(1/ε)).
    Exp,
    /// √((t+1)(2·ln(1/(2ε)) + ln(t+1))).
    NormalHedge,
    /// √((t+ν)(ln(t+ν) + 2·ln(1/ε))).
    Uniform { nu: f64 },
}

impl BoundFamily {
    pub fn name(&self) -> String {
        match self {
            Self::Exp => "exp".into(),
            Self::NormalHedge => "normal_hedge".into(),
            Self::Uniform { nu } => format!("uniform(nu={nu})"),
        }
    }
}

/// Regret bound at percentile `eps` and time `t`.
pub fn bound_value(family: BoundFamily, eps: f64, t: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1), got {eps}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    let radicand = match family {
        BoundFamily::Exp => 2.0 * t * (1.0 / eps).ln(),
        BoundFamily::NormalHedge => (t + 1.0) * (2.0 * (1.0 / (2.0 * eps)).ln() + (t + 1.0).ln()),
        BoundFamily::Uniform { nu } => {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(invalid(format!("nu must be positive, got {nu}")));
            }
            (t + nu) * ((t + nu).ln() + 2.0 * (1.0 / eps).ln())
        }
    };
    if radicand < 0.0 {
        return Err(invalid(format!(
            "{} bound undefined at eps = {eps}, t = {t}",
            family.name()
        )));
    }
    Ok(radicand.sqrt())
}

/// Checks R_ε(t) ≤ bound(ε, t) at every row of every trace, with t the game clock.
/// Each ε must have been recorded in the traces.
pub fn bound_verification(traces: &[GameTrace], family: BoundFamily, eps_grid: &[f64]) -> Result<StudyReport> {
    let mut report = StudyReport::new("bound_verification");
    report.param("family", family).param("eps_grid", eps_grid).param("traces", traces.len());
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut listed = Vec::new();
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut max_regret = vec![f64::NEG_INFINITY; eps_grid.len()];
    for (idx, trace) in traces.iter().enumerate() {
        for (e_idx, &eps) in eps_grid.iter().enumerate() {
            let column = trace
                .eps_column(eps)
                .ok_or_else(|| invalid(format!("trace {idx} did not record eps = {eps}")))?;
            for (row, regret) in trace.rows.iter().zip(column) {
                let bound = bound_value(family, eps, row.t)?;
                checks += 1;
                max_regret[e_idx] = max_regret[e_idx].max(regret);
                if bound > 0.0 {
                    worst_ratio = worst_ratio.max(regret / bound);
                }
                if regret > bound {
                    violations += 1;
                    if listed.len() < LISTED_VIOLATIONS {
                        listed.push(json!({
                            "trace": idx, "seed": trace.seed, "iter": row.iter,
                            "t": row.t, "eps": eps, "regret": regret, "bound": bound,
                        }));
                    }
                }
            }
        }
    }
    report
        .value("checks", checks)
        .value("violations", violations)
        .value("violation_examples", listed)
        .value("max_regret_per_eps", max_regret)
        .value("worst_regret_to_bound_ratio", worst_ratio)
        .verdict("no_violations", violations == 0);
    Ok(report)
}
