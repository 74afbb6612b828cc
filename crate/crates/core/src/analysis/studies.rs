use rayon::prelude::*;
use serde::Serialize;

use super::lattice::{backward_table, closed_form_value, LatticeGeometry, LatticeTable, Side};
use super::report::StudyReport;
use crate::error::{invalid, Result};
use crate::measure::binomial_expectation;
use crate::potential::{default_sp_grid, divided_difference_g, gaussian_convolve, FinalPotential, DEFAULT_QUADRATURE_ORDER};

/// Required margin for a strict increase between refinement levels.
pub const MONOTONICITY_MARGIN: f64 = 1e-12;
/// Allowance for quadrature truncation in the Gaussian limit.
pub const LIMIT_TOLERANCE: f64 = 1e-6;

fn check_probes(horizon: f64, probes: &[(f64, f64)]) -> Result<()> {
    if let Some(&(t, r)) = probes
        .iter()
        .find(|(t, r)| !(0.0..=horizon).contains(t) || !r.is_finite())
    {
        return Err(invalid(format!("probe ({t}, {r}) outside [0, {horizon}] × ℝ")));
    }
    Ok(())
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Lower and upper level-k values against the Gaussian limit at each probe, k = 0..=k_max.
pub fn convergence_study(final_potential: &FinalPotential, horizon: f64, k_max: u32, probes: &[(f64, f64)]) -> Result<StudyReport> {
    final_potential.require_sp(2, &default_sp_grid())?;
    check_probes(horizon, probes)?;
    let geoms: Vec<LatticeGeometry> = (0..=k_max)
        .map(|k| LatticeGeometry::discrete(horizon, k))
        .collect::<Result<_>>()?;

    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut limits = Vec::new();
    let mut gap_ul = Vec::new();
    let mut gap_ll = Vec::new();
    let mut decreasing = true;
    let mut upper_decreasing = true;
    let mut dominates = true;
    let mut horizon_exact = true;
    for &(t, r) in probes {
        let limit = gaussian_convolve(final_potential, horizon, t, r, DEFAULT_QUADRATURE_ORDER)?;
        let mut lo = Vec::new();
        let mut up = Vec::new();
        for g in &geoms {
            match g.time_index(t) {
                Some(i) => {
                    lo.push(Some(closed_form_value(final_potential, g, i, r, Side::Lower)?));
                    up.push(Some(closed_form_value(final_potential, g, i, r, Side::Upper)?));
                }
                None => {
                    lo.push(None);
                    up.push(None);
                }
            }
        }
        let ul: Vec<Option<f64>> = lo.iter().zip(&up).map(|(l, u)| Some((u.as_ref()? - l.as_ref()?).abs())).collect();
        let ll: Vec<Option<f64>> = lo.iter().map(|l| l.map(|l| (l - limit).abs())).collect();
        let defined_ll: Vec<f64> = ll.iter().flatten().copied().collect();
        let defined_ul: Vec<f64> = ul.iter().flatten().copied().collect();
        dominates &= lo.iter().zip(&up).all(|(l, u)| match (l, u) {
            (Some(l), Some(u)) => *u >= *l - MONOTONICITY_MARGIN,
            _ => true,
        });
        if t >= horizon {
            horizon_exact &= defined_ll.iter().chain(&defined_ul).all(|&g| g == 0.0);
        } else {
            decreasing &= strictly_decreasing(&defined_ll);
            upper_decreasing &= strictly_decreasing(&defined_ul);
        }
        lower.push(lo);
        upper.push(up);
        limits.push(limit);
        gap_ul.push(ul);
        gap_ll.push(ll);
    }

    let mut report = StudyReport::new("convergence");
    report
        .param("final", final_potential.label())
        .param("horizon", horizon)
        .param("k_max", k_max)
        .param("quadrature_order", DEFAULT_QUADRATURE_ORDER)
        .value("k", (0..=k_max).collect::<Vec<_>>())
        .value("lower", &lower)
        .value("upper", &upper)
        .value("limit", &limits)
        .value("gap_upper_lower", &gap_ul)
        .value("gap_lower_limit", &gap_ll)
        .verdict("lower_gap_strictly_decreasing", decreasing)
        .verdict("upper_lower_gap_strictly_decreasing", upper_decreasing)
        .verdict("upper_dominates_lower", dominates)
        .verdict("exact_at_horizon", horizon_exact)
        .tolerance("limit_quadrature", LIMIT_TOLERANCE)
        .tolerance("dominance", MONOTONICITY_MARGIN);
    report.probes = probes.iter().map(|p| serde_json::json!([p.0, p.1])).collect();
    Ok(report)
}

/// One step of length τ against four steps of length τ/4, both from regret `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HalfStep {
    pub tau: f64,
    pub r: f64,
    pub one_step: f64,
    pub four_step: f64,
    pub difference: f64,
    /// (3/2)·a⁴·g_a(R) with a = √τ.
    pub predicted: f64,
}

pub fn half_step_check(final_potential: &FinalPotential, tau: f64, r: f64) -> Result<HalfStep> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("step duration must be positive, got {tau}")));
    }
    let a = tau.sqrt();
    let f = |x: f64| final_potential.eval(x);
    let one_step = 0.5 * (f(r - a) + f(r + a));
    let four_step = binomial_expectation(4, a / 2.0, r, f);
    let predicted = 1.5 * a.powi(4) * divided_difference_g(f, r, a)?;
    Ok(HalfStep {
        tau,
        r,
        one_step,
        four_step,
        difference: four_step - one_step,
        predicted,
    })
}

/// Per-level outcome of the strict-increase comparison.
#[derive(Clone, Debug, Serialize)]
pub struct LevelComparison {
    pub k: u32,
    pub nodes_checked: usize,
    pub violations: usize,
    pub min_increase: f64,
    pub min_increase_at: (f64, f64),
}

fn compare_levels(coarse: &LatticeTable, fine: &LatticeTable) -> LevelComparison {
    let g = coarse.geometry();
    let mut out = LevelComparison {
        k: g.level.unwrap_or(0),
        nodes_checked: 0,
        violations: 0,
        min_increase: f64::INFINITY,
        min_increase_at: (f64::NAN, f64::NAN),
    };
    // Level-k node (i, j) is level-(k+1) node (4i, 2j + i). The last row is
    // the final potential on both levels, so it is excluded.
    for i in 0..g.steps {
        for j in 0..=i {
            let diff = fine.node(4 * i, 2 * j + i) - coarse.node(i, j);
            out.nodes_checked += 1;
            if !(diff > MONOTONICITY_MARGIN) {
                out.violations += 1;
            }
            if diff < out.min_increase {
                out.min_increase = diff;
                out.min_increase_at = (g.time(i), g.regret(i, j));
            }
        }
    }
    out
}

/// Strict increase of the lower potential under refinement, at every shared
/// lattice node for consecutive levels 0..k_max, plus the half-step identity.
pub fn monotonicity_study(final_potential: &FinalPotential, horizon: f64, k_max: u32, probes: &[(f64, f64)]) -> Result<StudyReport> {
    final_potential.require_sp(4, &default_sp_grid())?;
    if k_max == 0 {
        return Err(invalid("monotonicity needs k_max ≥ 1"));
    }
    check_probes(horizon, probes)?;
    let tables: Vec<LatticeTable> = (0..=k_max)
        .into_par_iter()
        .map(|k| backward_table(final_potential, horizon, k, Side::Lower))
        .collect::<Result<_>>()?;
    let levels: Vec<LevelComparison> = tables.windows(2).map(|w| compare_levels(&w[0], &w[1])).collect();
    let nodes_ok = levels.iter().all(|l| l.violations == 0);

    // Explicit probes: compare consecutive levels wherever the probe is a lattice time.
    let mut probe_rows = Vec::new();
    let mut probes_ok = true;
    for &(t, r) in probes {
        let mut row = Vec::new();
        for w in tables.windows(2) {
            let (c, f) = (&w[0], &w[1]);
            if t < horizon && c.geometry().time_index(t).is_some() {
                let diff = f.value(t, r)? - c.value(t, r)?;
                probes_ok &= diff > MONOTONICITY_MARGIN;
                row.push(Some(diff));
            } else {
                row.push(None);
            }
        }
        probe_rows.push(row);
    }

    let mut half_steps = vec![half_step_check(final_potential, horizon, 0.0)?];
    for &(_, r) in probes {
        if r != 0.0 {
            half_steps.push(half_step_check(final_potential, horizon, r)?);
        }
    }
    let half_positive = half_steps.iter().all(|h| h.difference > 0.0);
    let half_identity = half_steps
        .iter()
        .all(|h| (h.difference - h.predicted).abs() < 1e-10 * h.four_step.abs().max(1.0));

    let mut report = StudyReport::new("monotonicity");
    report
        .param("final", final_potential.label())
        .param("horizon", horizon)
        .param("k_max", k_max)
        .value("levels", &levels)
        .value("probe_increases", &probe_rows)
        .value("half_step", &half_steps)
        .value(
            "lower_at_origin",
            tables.iter().map(|t| t.node(0, 0)).collect::<Vec<_>>(),
        )
        .verdict("strict_increase_all_nodes", nodes_ok)
        .verdict("strict_increase_probes", probes_ok)
        .verdict("half_step_positive", half_positive)
        .verdict("half_step_matches_divided_difference", half_identity)
        .tolerance("margin", MONOTONICITY_MARGIN)
        .tolerance("half_step_identity", 1e-10);
    report.probes = probes.iter().map(|p| serde_json::json!([p.0, p.1])).collect();
    Ok(report)
}
