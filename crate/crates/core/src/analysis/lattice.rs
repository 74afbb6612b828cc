use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::measure::binomial_expectation;
use crate::potential::{default_sp_grid, FinalPotential};

/// Largest refinement level accepted by table builders.
pub const MAX_LEVEL: u32 = 12;
/// Node budget for stored tables.
pub const NODE_BUDGET: usize = 1 << 26;
/// Work budget (inner-loop updates) for the upper-side builder.
pub const UPPER_WORK_BUDGET: usize = 1 << 31;

/// Which backward recursion a value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Averaging at ±s: the value the random-walk adversary guarantees.
    Lower,
    /// Averaging at ±s(1+s): the value the potential learner guarantees.
    Upper,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

/// Geometry of a recombining game lattice: `steps` moves of ±`step` regret,
/// each lasting `dt` time, with the upper recursion averaging at ±`upper_offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LatticeGeometry {
    pub level: Option<u32>,
    pub steps: usize,
    pub step: f64,
    pub dt: f64,
    pub upper_offset: f64,
}

impl LatticeGeometry {
    /// Level-k lattice on [0, T̄]: s_k = √T̄·2^{−k}, 4^k steps of length s_k².
    pub fn discrete(horizon: f64, k: u32) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if k > MAX_LEVEL {
            return Err(Error::Resource(format!("level {k} exceeds the maximum of {MAX_LEVEL}")));
        }
        let s = horizon.sqrt() * 0.5f64.powi(k as i32);
        Ok(Self {
            level: Some(k),
            steps: 1usize << (2 * k),
            step: s,
            dt: s * s,
            upper_offset: s * (1.0 + s),
        })
    }

    /// Integer-time lattice: T unit steps, upper offset 2.
    pub fn integer(rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(invalid("need at least one round"));
        }
        Ok(Self {
            level: None,
            steps: rounds,
            step: 1.0,
            dt: 1.0,
            upper_offset: 2.0,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn regret(&self, i: usize, j: usize) -> f64 {
        (2.0 * j as f64 - i as f64) * self.step
    }

    pub fn offset(&self, side: Side) -> f64 {
        match side {
            Side::Lower => self.step,
            Side::Upper => self.upper_offset,
        }
    }

    /// Time index for `t`, when `t` is a lattice time.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        let x = t / self.dt;
        let i = x.round();
        if (x - i).abs() <= 1e-9 * x.abs().max(1.0) && i >= 0.0 && i <= self.steps as f64 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Node (i, j) at (t, R), when both coordinates lie on the lattice.
    pub fn node_for(&self, t: f64, r: f64) -> Option<(usize, usize)> {
        let i = self.time_index(t)?;
        let y = (r / self.step + i as f64) / 2.0;
        let j = y.round();
        if (y - j).abs() <= 1e-9 * y.abs().max(1.0) && j >= 0.0 && j <= i as f64 {
            Some((i, j as usize))
        } else {
            None
        }
    }
}

/// Closed-form potential: E[f(R₀ + X)] with X ~ 𝔹(n, σ) over the remaining
/// n steps, σ = s (lower) or the upper offset.
pub fn closed_form_value(final_potential: &FinalPotential, geom: &LatticeGeometry, i: usize, r0: f64, side: Side) -> Result<f64> {
    if i > geom.steps {
        return Err(invalid(format!("time index {i} beyond {} steps", geom.steps)));
    }
    Ok(binomial_expectation(geom.steps - i, geom.offset(side), r0, |x| final_potential.eval(x)))
}

/// Level-k closed form at time index `i` and regret `r0`.
pub fn closed_form_potential(
    final_potential: &FinalPotential,
    horizon: f64,
    k: u32,
    i: usize,
    r0: f64,
    side: Side,
) -> Result<f64> {
    closed_form_value(final_potential, &LatticeGeometry::discrete(horizon, k)?, i, r0, side)
}

/// Potential given by closed forms only, usable at any (t, R) with t a lattice time.
#[derive(Clone, Debug)]
pub struct LatticePotential {
    pub final_potential: FinalPotential,
    pub geometry: LatticeGeometry,
    pub side: Side,
}

impl LatticePotential {
    pub fn value(&self, t: f64, r: f64) -> Result<f64> {
        let i = self
            .geometry
            .time_index(t)
            .ok_or_else(|| domain(format!("time {t} is not a lattice time (dt = {})", self.geometry.dt)))?;
        closed_form_value(&self.final_potential, &self.geometry, i, r, self.side)
    }
}

/// Potential values at every lattice node (i, j), i = 0..=N, j = 0..=i,
/// filled by backward induction from the final potential.
#[derive(Clone, Debug)]
pub struct LatticeTable {
    final_potential: FinalPotential,
    geometry: LatticeGeometry,
    side: Side,
    values: Vec<Vec<f64>>,
}

impl LatticeTable {
    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn final_potential(&self) -> &FinalPotential {
        &self.final_potential
    }

    pub fn level(&self) -> Option<u32> {
        self.geometry.level
    }

    pub fn steps(&self) -> usize {
        self.geometry.steps
    }

    /// Value at node (i, j); panics outside the triangle.
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// φ(t, R): table lookup on the lattice, closed form for off-lattice regrets.
    pub fn value(&self, t: f64, r: f64) -> Result<f64> {
        let i = self
            .geometry
            .time_index(t)
            .ok_or_else(|| domain(format!("time {t} is not a lattice time (dt = {})", self.geometry.dt)))?;
        self.value_at_index(i, r)
    }

    pub fn value_at_index(&self, i: usize, r: f64) -> Result<f64> {
        if let Some((_, j)) = self.geometry.node_for(self.geometry.time(i), r) {
            return Ok(self.values[i][j]);
        }
        closed_form_value(&self.final_potential, &self.geometry, i, r, self.side)
    }

    /// Writes `i,j,t,R,value` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "t", "R", "value"])?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:.16e}", self.geometry.time(i)),
                    format!("{:.16e}", self.geometry.regret(i, j)),
                    format!("{v:.16e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Backward induction on the level-k lattice of horizon T̄.
///
/// The final potential must pass SP{2}. Lower values average the next row at
/// ±s_k. Upper values average at ±s_k(1+s_k); those points leave the R-lattice,
/// so each lattice regret is carried through its own one-dimensional cone of
/// offsets, exactly, with no interpolation.
pub fn backward_table(final_potential: &FinalPotential, horizon: f64, k: u32, side: Side) -> Result<LatticeTable> {
    table_for_geometry(final_potential, LatticeGeometry::discrete(horizon, k)?, side)
}

/// Integer-time tables: lower recursion at ±1, upper at ±2.
pub fn backward_table_integer(final_potential: &FinalPotential, rounds: usize, side: Side) -> Result<LatticeTable> {
    table_for_geometry(final_potential, LatticeGeometry::integer(rounds)?, side)
}

/// Backward induction on an arbitrary lattice geometry; the final potential must pass SP{2}.
pub fn table_for_geometry(final_potential: &FinalPotential, geom: LatticeGeometry, side: Side) -> Result<LatticeTable> {
    final_potential.require_sp(2, &default_sp_grid())?;
    build_table(final_potential, geom, side)
}

fn build_table(final_potential: &FinalPotential, geom: LatticeGeometry, side: Side) -> Result<LatticeTable> {
    let n = geom.steps;
    let nodes = (n + 1) * (n + 2) / 2;
    if nodes > NODE_BUDGET {
        return Err(Error::Resource(format!("{nodes} lattice nodes exceed the budget of {NODE_BUDGET}")));
    }
    let values = match side {
        Side::Lower => lower_values(final_potential, &geom),
        Side::Upper => {
            // Σ over regret classes p of the cone size (N − |p|)²/2.
            let work: usize = (0..=n).map(|p| (n - p) * (n - p) / 2 * if p == 0 { 1 } else { 2 }).sum();
            if work > UPPER_WORK_BUDGET {
                return Err(Error::Resource(format!(
                    "upper table needs ~{work} updates, budget is {UPPER_WORK_BUDGET}"
                )));
            }
            upper_values(final_potential, &geom)
        }
    };
    Ok(LatticeTable {
        final_potential: final_potential.clone(),
        geometry: geom,
        side,
        values,
    })
}

fn lower_values(f: &FinalPotential, geom: &LatticeGeometry) -> Vec<Vec<f64>> {
    let n = geom.steps;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    values[n] = (0..=n).map(|j| f.eval(geom.regret(n, j))).collect();
    for i in (0..n).rev() {
        let next = &values[i + 1];
        let row: Vec<f64> = (0..=i).map(|j| 0.5 * (next[j] + next[j + 1])).collect();
        values[i] = row;
    }
    values
}

fn upper_values(f: &FinalPotential, geom: &LatticeGeometry) -> Vec<Vec<f64>> {
    let n = geom.steps;
    let a = geom.upper_offset;
    let mut values: Vec<Vec<f64>> = (0..=n).map(|i| vec![f64::NAN; i + 1]).collect();
    // Lattice regrets are p·s with p = 2j − i; the upper recursion keeps p and
    // moves q in R = p·s + q·a. Rows i ≡ p (mod 2), i ≥ |p| need q = 0.
    for p in -(n as i64)..=(n as i64) {
        let i_min = p.unsigned_abs() as usize;
        let depth = n - i_min;
        let base = p as f64 * geom.step;
        // Row n holds q = −depth, −depth+2, …, depth.
        let mut cone: Vec<f64> = (0..=depth)
            .map(|m| f.eval(base + (2.0 * m as f64 - depth as f64) * a))
            .collect();
        let mut i = n;
        loop {
            let d = i - i_min;
            if d % 2 == 0 {
                let j = ((p + i as i64) / 2) as usize;
                values[i][j] = cone[d / 2];
            }
            if i == i_min {
                break;
            }
            for m in 0..d {
                cone[m] = 0.5 * (cone[m] + cone[m + 1]);
            }
            cone.truncate(d);
            i -= 1;
        }
    }
    values
}
