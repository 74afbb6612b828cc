use std::io::Write;

use serde::Serialize;

use super::adversary::{Adversary, RoundView};
use super::learner::{Learner, LearnerView, PotentialLearner, RandomLearner, UniformLearner};
use super::weights::{LatticeSource, PotentialSource, WeightFunction, NORMALIZATION_TOLERANCE};
use crate::analysis::{LatticeGeometry, Side, MAX_LEVEL};
use crate::error::{invalid, Error, Result};
use crate::measure::{convolve_step, epsilon_regret, score, LossMap, RegretState};
use crate::potential::{FinalPotential, Potential};

/// Slack on the |ℓ| ≤ c·s² rule.
pub const AGGREGATE_TOLERANCE: f64 = 1e-12;
/// Iteration cap for continuous runs bounded only by their horizon.
pub const CONTINUOUS_ITERATION_CAP: usize = 1_000_000;

/// ℓ = Σ mass·P(R)·B(R), with B the mean loss at each atom.
pub fn aggregate_loss(state: &RegretState, weights: &WeightFunction, losses: &LossMap) -> Result<f64> {
    if weights.len() != state.len() || losses.len() != state.len() {
        return Err(invalid(format!(
            "{} atoms, {} weights, {} loss distributions",
            state.len(),
            weights.len(),
            losses.len()
        )));
    }
    Ok(weights
        .action_probabilities(state)
        .zip(losses.per_atom())
        .map(|(q, d)| q * d.mean())
        .sum())
}

/// Enforces |ℓ| ≤ c·s² for the step numbered `step`.
pub fn check_aggregate_loss(ell: f64, s: f64, c: f64, step: usize) -> Result<()> {
    let bound = c * s * s;
    if ell.abs() > bound + AGGREGATE_TOLERANCE {
        return Err(Error::RuleViolation {
            step,
            reason: format!("adversary produced aggregate loss {ell:.6e}, beyond c·s² = {bound:.6e}"),
        });
    }
    Ok(())
}

/// Δt = Σ mass·H(R)·E[(y − ℓ)²] with H = ∂²φ/∂R² normalized over the state.
/// Atoms at a kink of the potential get H = 0.
pub fn time_increment(state: &RegretState, losses: &LossMap, ell: f64, p: &Potential, t: f64) -> Result<f64> {
    if losses.len() != state.len() {
        return Err(invalid(format!("{} loss distributions for {} atoms", losses.len(), state.len())));
    }
    let h = state
        .regrets()
        .map(|r| if p.kink() == Some(r) { Ok(0.0) } else { p.partial_r(t, r, 2) })
        .collect::<Result<Vec<f64>>>()?;
    let z: f64 = state.masses().zip(&h).map(|(m, h)| m * h).sum();
    if !(z > 0.0) {
        return Err(Error::DegeneratePotential(
            "second-derivative normalizer is zero across all atoms".into(),
        ));
    }
    Ok(state
        .masses()
        .zip(&h)
        .zip(losses.per_atom())
        .map(|((m, h), d)| m * h / z * d.second_moment_about(ell))
        .sum())
}

/// Unweighted fallback clock: Σ mass·E[(y − ℓ)²].
fn unweighted_increment(state: &RegretState, losses: &LossMap, ell: f64) -> f64 {
    state
        .masses()
        .zip(losses.per_atom())
        .map(|(m, d)| m * d.second_moment_about(ell))
        .sum()
}

#[derive(Clone, Debug)]
pub enum GameMode {
    /// T unit steps with losses in [−1, 1].
    Integer { rounds: usize, final_potential: FinalPotential },
    /// 4^k steps of size s_k = √T̄·2^{−k}.
    Discrete {
        horizon: f64,
        level: u32,
        final_potential: FinalPotential,
    },
    /// Steps of size at most `max_step`; the clock advances by Δt.
    Continuous {
        potential: Potential,
        max_step: f64,
        horizon: Option<f64>,
        max_iterations: Option<usize>,
    },
}

impl GameMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Integer { .. } => "integer",
            Self::Discrete { .. } => "discrete",
            Self::Continuous { .. } => "continuous",
        }
    }

    fn geometry(&self) -> Result<Option<LatticeGeometry>> {
        match self {
            Self::Integer { rounds, .. } => Ok(Some(LatticeGeometry::integer(*rounds)?)),
            Self::Discrete { horizon, level, .. } => Ok(Some(LatticeGeometry::discrete(*horizon, *level)?)),
            Self::Continuous { .. } => Ok(None),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GameConfig {
    pub mode: GameMode,
    /// Percentiles whose regrets are recorded each step.
    pub eps: Vec<f64>,
    /// Lattice potential used for the recorded score in integer and discrete modes.
    pub score_side: Side,
    /// Constant in |ℓ| ≤ c·s² (discrete and continuous modes).
    pub c: f64,
    pub record_snapshots: bool,
    /// Defaults to a point mass at zero.
    pub initial_state: Option<RegretState>,
    /// Recorded in the trace; strategies carry their own generators.
    pub seed: u64,
}

impl GameConfig {
    pub fn new(mode: GameMode) -> Self {
        Self {
            mode,
            eps: vec![0.1, 0.01],
            score_side: Side::Lower,
            c: 1.0,
            record_snapshots: false,
            initial_state: None,
            seed: 0,
        }
    }

    pub fn integer(rounds: usize, final_potential: FinalPotential) -> Self {
        Self::new(GameMode::Integer { rounds, final_potential })
    }

    pub fn discrete(horizon: f64, level: u32, final_potential: FinalPotential) -> Self {
        Self::new(GameMode::Discrete {
            horizon,
            level,
            final_potential,
        })
    }

    pub fn continuous(potential: Potential, max_step: f64, horizon: Option<f64>, max_iterations: Option<usize>) -> Self {
        Self::new(GameMode::Continuous {
            potential,
            max_step,
            horizon,
            max_iterations,
        })
    }

    /// Finite-expert game: `n` labeled experts at regret zero, unit steps, `rounds` iterations.
    pub fn experts(potential: Potential, n: usize, rounds: usize) -> Result<Self> {
        let mut cfg = Self::continuous(potential, 1.0, None, Some(rounds));
        cfg.initial_state = Some(RegretState::experts(n)?);
        Ok(cfg)
    }

    pub fn with_eps(mut self, eps: Vec<f64>) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_snapshots(mut self) -> Self {
        self.record_snapshots = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(invalid(format!("epsilon must lie in (0,1], got {e}")));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("c must be positive, got {}", self.c)));
        }
        match &self.mode {
            GameMode::Integer { rounds, .. } if *rounds == 0 => Err(invalid("integer game needs at least one round")),
            GameMode::Discrete { level, .. } if *level > MAX_LEVEL => Err(Error::Resource(format!(
                "level {level} exceeds the maximum of {MAX_LEVEL}"
            ))),
            GameMode::Discrete { horizon, .. } if !(*horizon > 0.0) => {
                Err(invalid(format!("horizon must be positive, got {horizon}")))
            }
            GameMode::Continuous {
                potential,
                max_step,
                horizon,
                max_iterations,
            } => {
                if !(*max_step > 0.0 && *max_step <= 1.0) {
                    return Err(invalid(format!("max step must lie in (0,1], got {max_step}")));
                }
                if horizon.is_none() && max_iterations.is_none() {
                    return Err(invalid("continuous game needs a horizon or an iteration limit"));
                }
                if let Some(h) = horizon {
                    if !(*h > 0.0) {
                        return Err(invalid(format!("horizon must be positive, got {h}")));
                    }
                    if let Some(ph) = potential.horizon() {
                        if *h > ph {
                            return Err(invalid(format!("horizon {h} beyond the potential's horizon {ph}")));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Learner selection for [`run_game`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerKind {
    /// The mode's potential learner: ±2 upper-table differences (integer),
    /// ±s(1+s) upper-table differences (discrete), or ∂φ/∂R (continuous).
    Potential,
    Uniform,
    Random { seed: u64 },
}

impl LearnerKind {
    pub fn build(self, config: &GameConfig) -> Result<Box<dyn Learner>> {
        Ok(match self {
            Self::Uniform => Box::new(UniformLearner),
            Self::Random { seed } => Box::new(RandomLearner::new(seed)),
            Self::Potential => match &config.mode {
                GameMode::Integer { final_potential, .. } => {
                    let geom = config.mode.geometry()?.expect("lattice mode");
                    Box::new(PotentialLearner::Integer(Box::new(LatticeSource::build(
                        final_potential,
                        geom,
                        Side::Upper,
                    )?)))
                }
                GameMode::Discrete { final_potential, .. } => {
                    let geom = config.mode.geometry()?.expect("lattice mode");
                    Box::new(PotentialLearner::Discrete(Box::new(LatticeSource::build(
                        final_potential,
                        geom,
                        Side::Upper,
                    )?)))
                }
                GameMode::Continuous { potential, .. } => Box::new(PotentialLearner::Continuous(potential.clone())),
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub t: f64,
    pub s: f64,
    pub ell: f64,
    pub dt: f64,
    pub score: f64,
    pub eps_regrets: Vec<f64>,
}

/// Full record of one step, kept when snapshots are enabled.
#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub iter: usize,
    pub t: f64,
    pub state: RegretState,
    pub weights: WeightFunction,
    pub losses: LossMap,
    pub ell: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GameTrace {
    pub mode: String,
    pub learner: String,
    pub adversary: String,
    pub seed: u64,
    pub eps: Vec<f64>,
    /// Row 0 is the initial state; row i follows step i.
    pub rows: Vec<TraceRow>,
    pub final_state: RegretState,
    /// Σ Δt over the run.
    pub v_n: f64,
    pub t_reached: f64,
    /// Continuous mode stopped because the next step would pass the horizon.
    pub stopped_before_overshoot: bool,
    /// Steps where the learner's normalizer vanished and uniform weights were used.
    pub uniform_weight_steps: usize,
    /// Steps where Z^H vanished and the unweighted clock was used.
    pub unweighted_clock_steps: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<Snapshot>,
}

impl GameTrace {
    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.score)
    }

    pub fn initial_score(&self) -> f64 {
        self.rows[0].score
    }

    pub fn final_score(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.score)
    }

    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    /// Largest recorded ε-regret over all rows and ε values.
    pub fn max_eps_regret(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.eps_regrets.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Column of ε-regrets for the given ε, if recorded.
    pub fn eps_column(&self, eps: f64) -> Option<Vec<f64>> {
        let idx = self.eps.iter().position(|&e| e == eps)?;
        Some(self.rows.iter().map(|r| r.eps_regrets[idx]).collect())
    }

    /// Writes `iter,t,s,ell,dt,score,eps_regret_<ε>…` with 17 significant digits.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["iter", "t", "s", "ell", "dt", "score"].map(String::from).to_vec();
        header.extend(self.eps.iter().map(|e| format!("eps_regret_{e}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.iter.to_string()];
            rec.extend([r.t, r.s, r.ell, r.dt, r.score].iter().map(|v| format!("{v:.16e}")));
            rec.extend(r.eps_regrets.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

enum Scorer<'a> {
    Lattice(LatticeSource),
    Continuous(&'a Potential),
}

impl Scorer<'_> {
    fn score(&self, state: &RegretState, t: f64) -> Result<f64> {
        match self {
            Self::Lattice(src) => state
                .atoms()
                .iter()
                .map(|a| Ok(a.mass * src.potential_value(t, a.regret)?))
                .sum(),
            Self::Continuous(p) => score(state, p, t),
        }
    }
}

fn eps_regrets(state: &RegretState, eps: &[f64]) -> Result<Vec<f64>> {
    eps.iter().map(|&e| epsilon_regret(state, e)).collect()
}

/// Plays one game: learner weights, adversary losses, aggregate loss (validated),
/// state update, clock update. Integer time advances by 1, discrete time by s_k²,
/// continuous time by Δt.
pub fn run_game(config: &GameConfig, learner: &mut dyn Learner, adversary: &mut dyn Adversary) -> Result<GameTrace> {
    config.validate()?;
    let geometry = config.mode.geometry()?;
    let scorer = match &config.mode {
        GameMode::Integer { final_potential, .. } | GameMode::Discrete { final_potential, .. } => Scorer::Lattice(
            LatticeSource::build(final_potential, geometry.expect("lattice mode"), config.score_side)?,
        ),
        GameMode::Continuous { potential, .. } => Scorer::Continuous(potential),
    };
    let (mode_step, max_iters) = match &config.mode {
        GameMode::Integer { rounds, .. } => (1.0, *rounds),
        GameMode::Discrete { .. } => {
            let g = geometry.expect("lattice mode");
            (g.step, g.steps)
        }
        GameMode::Continuous {
            max_step, max_iterations, ..
        } => (*max_step, max_iterations.unwrap_or(CONTINUOUS_ITERATION_CAP)),
    };
    let horizon = match &config.mode {
        GameMode::Continuous { horizon, .. } => *horizon,
        _ => None,
    };

    let mut state = config.initial_state.clone().unwrap_or_else(|| RegretState::point_mass(0.0));
    let mut t = 0.0;
    let mut rows = vec![TraceRow {
        iter: 0,
        t,
        s: 0.0,
        ell: 0.0,
        dt: 0.0,
        score: scorer.score(&state, t)?,
        eps_regrets: eps_regrets(&state, &config.eps)?,
    }];
    let mut snapshots = Vec::new();
    let mut v_n = 0.0;
    let mut stopped = false;
    let mut uniform_weight_steps = 0;
    let mut unweighted_clock_steps = 0;

    for iter in 1..=max_iters {
        if let Some(h) = horizon {
            if t >= h - 1e-12 * h.max(1.0) {
                break;
            }
        }
        let t_next = geometry.map(|g| g.time(iter));
        let lview = LearnerView {
            iter,
            t,
            t_next,
            step: mode_step,
            state: &state,
        };
        let weights = match learner.weights(&lview) {
            Ok(w) => w,
            Err(Error::DegeneratePotential(_)) => {
                uniform_weight_steps += 1;
                WeightFunction::uniform(&state)
            }
            Err(e) => return Err(e),
        };
        let norm = weights.normalization(&state);
        if (norm - 1.0).abs() > NORMALIZATION_TOLERANCE * 1e3 {
            return Err(invalid(format!("learner weights normalize to {norm} at step {iter}")));
        }

        let aview = RoundView {
            iter,
            t,
            step: mode_step,
            state: &state,
            weights: &weights,
        };
        let losses = adversary.play(&aview)?;
        if losses.len() != state.len() {
            return Err(Error::RuleViolation {
                step: iter,
                reason: format!("{} loss distributions for {} atoms", losses.len(), state.len()),
            });
        }
        let s = losses.step_size();
        match &config.mode {
            GameMode::Integer { .. } => {}
            GameMode::Discrete { horizon: h, .. } => {
                if (s - mode_step).abs() > 1e-12 * mode_step {
                    return Err(Error::RuleViolation {
                        step: iter,
                        reason: format!("step size {s} differs from the level step {mode_step}"),
                    });
                }
                let limit = (h - t).max(0.0).sqrt().min(1.0);
                if s > limit * (1.0 + 1e-12) {
                    return Err(Error::RuleViolation {
                        step: iter,
                        reason: format!("step size {s} exceeds min(√(T̄−t), 1) = {limit}"),
                    });
                }
            }
            GameMode::Continuous { max_step, .. } => {
                if s > max_step * (1.0 + 1e-12) {
                    return Err(Error::RuleViolation {
                        step: iter,
                        reason: format!("step size {s} exceeds the maximum {max_step}"),
                    });
                }
            }
        }

        let ell = aggregate_loss(&state, &weights, &losses)?;
        if !matches!(config.mode, GameMode::Integer { .. }) {
            check_aggregate_loss(ell, s, config.c, iter)?;
        }
        let dt = match &config.mode {
            GameMode::Integer { .. } => 1.0,
            GameMode::Discrete { .. } => s * s,
            GameMode::Continuous { potential, .. } => match time_increment(&state, &losses, ell, potential, t) {
                Ok(dt) => dt,
                Err(Error::DegeneratePotential(_)) => {
                    unweighted_clock_steps += 1;
                    unweighted_increment(&state, &losses, ell)
                }
                Err(e) => return Err(e),
            },
        };
        if let Some(h) = horizon {
            if t + dt > h + 1e-12 * h.max(1.0) {
                stopped = true;
                break;
            }
        }

        let next = convolve_step(&state, &losses, ell)?;
        if config.record_snapshots {
            snapshots.push(Snapshot {
                iter,
                t,
                state: state.clone(),
                weights,
                losses,
                ell,
                dt,
            });
        }
        state = next;
        t = match t_next {
            Some(tn) => tn,
            None => t + dt,
        };
        v_n += dt;
        rows.push(TraceRow {
            iter,
            t,
            s,
            ell,
            dt,
            score: scorer.score(&state, t)?,
            eps_regrets: eps_regrets(&state, &config.eps)?,
        });
    }

    Ok(GameTrace {
        mode: config.mode.name().to_string(),
        learner: learner.name(),
        adversary: adversary.name(),
        seed: config.seed,
        eps: config.eps.clone(),
        rows,
        final_state: state,
        v_n,
        t_reached: t,
        stopped_before_overshoot: stopped,
        uniform_weight_steps,
        unweighted_clock_steps,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::super::adversary::{AdversaryKind, MixedAdversary, ScriptedAdversary};
    use super::*;
    use approx::assert_relative_eq;

    fn rw(s: f64) -> AdversaryKind {
        AdversaryKind::RandomWalk { s }
    }

    #[test]
    fn aggregate_loss_examples() {
        let s = RegretState::from_atoms([(-1.0, 0.3), (2.0, 0.7)]).unwrap();
        let w = WeightFunction::from_raw(&s, vec![0.2, 3.0]).unwrap();
        let l = super::super::adversary_loss_map(rw(1.0), &s).unwrap();
        assert_eq!(aggregate_loss(&s, &w, &l).unwrap(), 0.0);
        let l = super::super::adversary_loss_map(AdversaryKind::Constant { l: 0.4, s: 1.0 }, &s).unwrap();
        assert_relative_eq!(aggregate_loss(&s, &w, &l).unwrap(), 0.4, max_relative = 1e-15);
        let one = RegretState::point_mass(0.0);
        let l = super::super::adversary_loss_map(AdversaryKind::Biased { s: 1.0, p: 0.75 }, &one).unwrap();
        assert_eq!(aggregate_loss(&one, &WeightFunction::uniform(&one), &l).unwrap(), 0.5);
        assert!(matches!(check_aggregate_loss(0.5, 0.5, 1.0, 4), Err(Error::RuleViolation { step: 4, .. })));
        assert!(check_aggregate_loss(0.25, 0.5, 1.0, 4).is_ok());
    }

    #[test]
    fn time_increment_examples() {
        let p = Potential::exponential(1.0).unwrap();
        let s = RegretState::from_atoms([(-1.0, 0.3), (0.5, 0.2), (2.0, 0.5)]).unwrap();
        let l = super::super::adversary_loss_map(rw(0.3), &s).unwrap();
        assert_relative_eq!(time_increment(&s, &l, 0.0, &p, 0.2).unwrap(), 0.09, max_relative = 1e-14);
        let l = super::super::adversary_loss_map(AdversaryKind::Constant { l: 0.05, s: 0.3 }, &s).unwrap();
        assert_eq!(time_increment(&s, &l, 0.05, &p, 0.2).unwrap(), 0.0);
        let one = RegretState::point_mass(0.0);
        let l = super::super::adversary_loss_map(AdversaryKind::Biased { s: 0.5, p: 0.6 }, &one).unwrap();
        let ell = 0.5 * 0.2;
        assert_relative_eq!(
            time_increment(&one, &l, ell, &p, 0.0).unwrap(),
            0.25 * (1.0 - 0.2f64.powi(2)),
            max_relative = 1e-14
        );
        let nh = Potential::normal_hedge();
        let neg = RegretState::from_atoms([(-1.0, 0.5), (0.0, 0.5)]).unwrap();
        let l = super::super::adversary_loss_map(rw(0.3), &neg).unwrap();
        assert!(matches!(time_increment(&neg, &l, 0.0, &nh, 0.0), Err(Error::DegeneratePotential(_))));
    }

    #[test]
    fn integer_game_conserves_score() {
        let cfg = GameConfig::integer(2, FinalPotential::exp());
        let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
        let trace = run_game(&cfg, learner.as_mut(), &mut rw(1.0)).unwrap();
        let target = 1f64.cosh().powi(2);
        for r in &trace.rows {
            assert_relative_eq!(r.score, target, max_relative = 1e-14);
        }
        assert_relative_eq!(trace.final_score(), 2.3810978455, epsilon = 1e-9);
        assert_eq!(trace.final_state.len(), 3);
    }

    #[test]
    fn constant_adversary_leaves_state_fixed() {
        let cfgs = vec![
            GameConfig::integer(3, FinalPotential::exp()),
            GameConfig::discrete(1.0, 1, FinalPotential::exp()),
            GameConfig::continuous(Potential::exponential(1.0).unwrap(), 0.5, None, Some(5)),
        ];
        for cfg in cfgs {
            let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
            let mut adv = super::super::adversary::FixedAdversary {
                shape: super::super::adversary::MoveShape::Constant { l: 0.0 },
                step: None,
            };
            let trace = run_game(&cfg, learner.as_mut(), &mut adv).unwrap();
            assert_eq!(trace.final_state, RegretState::point_mass(0.0));
            assert!(trace.rows.iter().all(|r| r.eps_regrets.iter().all(|&e| e == 0.0)));
        }
    }

    #[test]
    fn continuous_random_walk_clock() {
        let (tau, n) = (1.0, 16);
        let s = (tau / n as f64).sqrt();
        let cfg = GameConfig::continuous(Potential::exponential(1.0).unwrap(), s, Some(tau), Some(n));
        let moves = (1..=n).map(|i| (i, rw(s)));
        let mut script = ScriptedAdversary::new(moves).unwrap();
        let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
        let trace = run_game(&cfg, learner.as_mut(), &mut script).unwrap();
        assert_eq!(trace.steps(), n);
        assert_relative_eq!(trace.v_n, tau, max_relative = 1e-14);
        let dt_sum: f64 = trace.rows.iter().map(|r| r.dt).sum();
        assert_eq!(dt_sum, trace.v_n);
    }

    #[test]
    fn continuous_stops_before_overshoot() {
        let cfg = GameConfig::continuous(Potential::exponential(1.0).unwrap(), 0.5, Some(0.6), None);
        let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
        let trace = run_game(&cfg, learner.as_mut(), &mut rw(0.5)).unwrap();
        assert_eq!(trace.steps(), 2);
        assert!(trace.stopped_before_overshoot);
        assert_relative_eq!(trace.t_reached, 0.5);
    }

    #[test]
    fn discrete_mode_rules() {
        let cfg = GameConfig::discrete(1.0, 1, FinalPotential::exp());
        let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
        // wrong step size
        let err = run_game(&cfg, learner.as_mut(), &mut rw(0.25)).unwrap_err();
        assert!(matches!(err, Error::RuleViolation { step: 1, .. }));
        // biased beyond |ℓ| ≤ s²
        let mut biased = AdversaryKind::Biased { s: 0.5, p: 0.9 };
        let err = run_game(&cfg, learner.as_mut(), &mut biased).unwrap_err();
        assert!(matches!(err, Error::RuleViolation { step: 1, .. }));
        let trace = run_game(&cfg, learner.as_mut(), &mut rw(0.5)).unwrap();
        assert_eq!(trace.steps(), 4);
        for w in trace.rows.windows(2) {
            assert_eq!(w[1].t - w[0].t, 0.25);
        }
        for r in &trace.rows {
            assert_relative_eq!(r.score, 0.5f64.cosh().powi(4), max_relative = 1e-13);
        }
    }

    #[test]
    fn mixed_adversary_keeps_rules() {
        let n = 64;
        let s = (1.0 / n as f64).sqrt();
        let cfg = GameConfig::continuous(Potential::exponential(1.0).unwrap(), s, Some(1.0), Some(n));
        let mut learner = LearnerKind::Potential.build(&cfg).unwrap();
        let trace = run_game(&cfg, learner.as_mut(), &mut MixedAdversary::new(5, None)).unwrap();
        assert_eq!(trace.steps(), n);
        assert!(trace.rows.iter().all(|r| r.dt <= r.s * r.s + 1e-15));
    }

    #[test]
    fn trace_csv_layout() {
        let cfg = GameConfig::integer(1, FinalPotential::exp());
        let mut learner = LearnerKind::Uniform.build(&cfg).unwrap();
        let trace = run_game(&cfg, learner.as_mut(), &mut rw(1.0)).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iter,t,s,ell,dt,score,eps_regret_0.1,eps_regret_0.01");
        assert_eq!(lines.count(), 2);
    }
}
