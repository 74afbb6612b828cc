//! The `potgame` experiment runner: games, lattice studies and regret-bound checks.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 game-rule
//! violation, 4 failed positivity precondition.

mod config;
mod specs;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

pub use config::{CommandName, ExperimentConfig, Flags};
pub use specs::{parse_adversary, parse_final, parse_learner, parse_potential, AdversarySpec};

use crate::analysis::{
    bound_value, bound_verification, convergence_study, monotonicity_study, BoundFamily, Side, StudyReport,
};
use crate::error::{Error, Result};
use crate::games::{
    run_game, Adversary, ExpertLossAdversary, FixedAdversary, GameConfig, GameMode, GameTrace, LearnerKind,
    MixedAdversary, RandomPerAtomAdversary, ScriptedAdversary,
};
use crate::measure::{load_expert_losses, load_state_csv, RegretState};
use crate::potential::FinalPotential;

#[derive(Parser, Debug)]
#[command(name = "potgame", version, about = "Potential-based regret games and lattice studies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integer-time game with unit steps.
    IntegerGame(Flags),
    /// Level-k discrete-time game on the lattice of horizon T̄.
    DiscreteGame(Flags),
    /// Continuous-time game, or a finite-expert game with --experts.
    ContinuousGame(Flags),
    /// Lower/upper lattice values against the Gaussian limit.
    Convergence(Flags),
    /// Strict increase of the lower potential under refinement.
    Monotonicity(Flags),
    /// Evaluate an ε-regret bound.
    Bounds(Flags),
    /// Check ε-regret bounds over a batch of seeded expert games.
    VerifyBounds(Flags),
}

impl Command {
    fn split(&self) -> (CommandName, &Flags) {
        match self {
            Self::IntegerGame(f) => (CommandName::IntegerGame, f),
            Self::DiscreteGame(f) => (CommandName::DiscreteGame, f),
            Self::ContinuousGame(f) => (CommandName::ContinuousGame, f),
            Self::Convergence(f) => (CommandName::Convergence, f),
            Self::Monotonicity(f) => (CommandName::Monotonicity, f),
            Self::Bounds(f) => (CommandName::Bounds, f),
            Self::VerifyBounds(f) => (CommandName::VerifyBounds, f),
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::RuleViolation { .. } => 3,
        Error::Precondition(_) => 4,
        _ => 1,
    }
}

/// Parses arguments, runs, prints the summary or diagnostic; returns the exit code.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, flags) = cli.command.split();
    let result = ExperimentConfig::resolve(name, flags).and_then(|cfg| {
        let base = flags
            .config
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        execute(&cfg, &base, flags.dry_run)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("potgame {}: {e}", name.as_str());
            exit_code(&e)
        }
    }
}

/// Runs one experiment and returns its one-line summary. Relative paths in
/// specifiers resolve against `base`.
pub fn execute(cfg: &ExperimentConfig, base: &Path, dry_run: bool) -> Result<String> {
    let name = cfg
        .command
        .ok_or_else(|| Error::Config("command: missing".into()))?;
    if let Some(0) = cfg.jobs {
        return Err(Error::Config("jobs: must be at least 1".into()));
    }
    let plan = Plan::build(name, cfg, base)?;
    if dry_run {
        return Ok(format!("{}: configuration valid (dry run)", name.as_str()));
    }
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(|| plan.run(cfg)),
        None => plan.run(cfg),
    }
}

enum Plan {
    Game {
        config: GameConfig,
        learner: LearnerKind,
        adversary: AdversarySpec,
    },
    Study {
        monotonicity: bool,
        final_potential: FinalPotential,
        horizon: f64,
        k_max: u32,
        probes: Vec<(f64, f64)>,
    },
    Bounds {
        family: BoundFamily,
        eps: Vec<f64>,
        t: f64,
    },
    Verify {
        config: GameConfig,
        experts: usize,
        adversary: AdversarySpec,
        family: BoundFamily,
        eps: Vec<f64>,
        seeds: usize,
    },
}

fn cfg_err(key: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {why}"))
}

fn require<T: Copy>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| cfg_err(key, "required"))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be positive, got {v}")))
    }
}

fn parse_side(s: Option<&str>) -> Result<Side> {
    match s.unwrap_or("lower") {
        "lower" => Ok(Side::Lower),
        "upper" => Ok(Side::Upper),
        other => Err(cfg_err("side", format!("expected lower or upper, got `{other}`"))),
    }
}

fn parse_family(kind: Option<&str>, nu: Option<f64>) -> Result<BoundFamily> {
    match kind.unwrap_or("normalhedge") {
        "exp" => Ok(BoundFamily::Exp),
        "normalhedge" => Ok(BoundFamily::NormalHedge),
        "uniform" => Ok(BoundFamily::Uniform {
            nu: positive(require(nu, "nu")?, "nu")?,
        }),
        other => Err(cfg_err("kind", format!("expected exp, normalhedge or uniform, got `{other}`"))),
    }
}

fn eps_list(cfg: &ExperimentConfig, default: &[f64]) -> Result<Vec<f64>> {
    let eps = cfg.eps.clone().unwrap_or_else(|| default.to_vec());
    if eps.is_empty() {
        return Err(cfg_err("eps", "empty list"));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(cfg_err("eps", format!("values must lie in (0,1], got {e}")));
    }
    Ok(eps)
}

fn with_key<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(_) | Error::Precondition(_) => e,
        other => cfg_err(key, other),
    })
}

const DEFAULT_EPS: [f64; 2] = [0.1, 0.01];
const VERIFY_EPS: [f64; 5] = [0.5, 0.25, 0.1, 0.05, 0.02];

impl Plan {
    fn build(name: CommandName, cfg: &ExperimentConfig, base: &Path) -> Result<Self> {
        let seed = cfg.seed.unwrap_or(0);
        let final_of = || parse_final(cfg.final_spec.as_deref().unwrap_or("expfinal"), base);
        let adversary_of = |default: &str| parse_adversary(cfg.adversary.as_deref().unwrap_or(default), base);
        let learner_of = || parse_learner(cfg.learner.as_deref().unwrap_or("potential"), seed);
        let initial_state = || -> Result<Option<RegretState>> {
            cfg.state
                .as_ref()
                .map(|p| with_key("state", load_state_csv(&resolve(base, p))))
                .transpose()
        };
        let finish = |mut game: GameConfig| -> Result<GameConfig> {
            game.eps = eps_list(cfg, &DEFAULT_EPS)?;
            game.score_side = parse_side(cfg.side.as_deref())?;
            if let Some(c) = cfg.c {
                game.c = positive(c, "c")?;
            }
            if let Some(s) = initial_state()? {
                game.initial_state = Some(s);
            }
            game.seed = seed;
            with_key("config", game.validate())?;
            Ok(game)
        };

        Ok(match name {
            CommandName::IntegerGame => {
                let rounds = require(cfg.rounds, "T")?;
                if rounds == 0 {
                    return Err(cfg_err("T", "must be at least 1"));
                }
                let f = final_of()?;
                f.require_sp(2, &crate::potential::default_sp_grid())?;
                Plan::Game {
                    config: finish(GameConfig::integer(rounds, f))?,
                    learner: learner_of()?,
                    adversary: adversary_of("random-walk")?,
                }
            }
            CommandName::DiscreteGame => {
                let horizon = positive(require(cfg.horizon, "horizon")?, "horizon")?;
                let level = require(cfg.k, "k")?;
                let f = final_of()?;
                f.require_sp(2, &crate::potential::default_sp_grid())?;
                let game = GameConfig::discrete(horizon, level, f);
                Plan::Game {
                    config: finish(game).map_err(|e| match e {
                        Error::Resource(m) => cfg_err("k", m),
                        other => other,
                    })?,
                    learner: learner_of()?,
                    adversary: adversary_of("random-walk")?,
                }
            }
            CommandName::ContinuousGame => {
                let potential = parse_potential(cfg.potential.as_deref().unwrap_or("exp:eta=1"), base)?;
                if let Some(n) = cfg.experts {
                    if cfg.state.is_some() {
                        return Err(cfg_err("state", "cannot be combined with experts"));
                    }
                    let rounds = require(cfg.iterations.or(cfg.rounds), "T")?;
                    let mut game = with_key("experts", GameConfig::experts(potential, n, rounds))?;
                    if let GameMode::Continuous { horizon, .. } = &mut game.mode {
                        *horizon = cfg.horizon;
                    }
                    Plan::Game {
                        config: finish(game)?,
                        learner: learner_of()?,
                        adversary: adversary_of("iid-signs")?,
                    }
                } else {
                    let max_step = require(cfg.max_step, "max-step")?;
                    if cfg.horizon.is_none() && cfg.iterations.is_none() {
                        return Err(cfg_err("horizon", "continuous game needs a horizon or iterations"));
                    }
                    let game = GameConfig::continuous(potential, max_step, cfg.horizon, cfg.iterations);
                    Plan::Game {
                        config: finish(game)?,
                        learner: learner_of()?,
                        adversary: adversary_of("random-walk")?,
                    }
                }
            }
            CommandName::Convergence | CommandName::Monotonicity => {
                let monotonicity = name == CommandName::Monotonicity;
                let f = final_of()?;
                f.require_sp(if monotonicity { 4 } else { 2 }, &crate::potential::default_sp_grid())?;
                let horizon = positive(cfg.horizon.unwrap_or(1.0), "horizon")?;
                let k_max = cfg.kmax.unwrap_or(4);
                if k_max > crate::analysis::MAX_LEVEL {
                    return Err(cfg_err("kmax", format!("at most {}", crate::analysis::MAX_LEVEL)));
                }
                if monotonicity && k_max == 0 {
                    return Err(cfg_err("kmax", "must be at least 1"));
                }
                let probes: Vec<(f64, f64)> = cfg
                    .probe
                    .clone()
                    .unwrap_or_else(|| vec![[0.0, 0.0]])
                    .into_iter()
                    .map(|[t, r]| (t, r))
                    .collect();
                if let Some((t, r)) = probes.iter().find(|(t, r)| !(0.0..=horizon).contains(t) || !r.is_finite()) {
                    return Err(cfg_err("probe", format!("({t}, {r}) outside [0, {horizon}] × ℝ")));
                }
                Plan::Study {
                    monotonicity,
                    final_potential: f,
                    horizon,
                    k_max,
                    probes,
                }
            }
            CommandName::Bounds => {
                let family = parse_family(cfg.kind.as_deref(), cfg.nu)?;
                let t = require(cfg.t, "t")?;
                let eps = eps_list(cfg, &[0.01])?;
                for &e in &eps {
                    with_key("eps", bound_value(family, e, t))?;
                }
                Plan::Bounds { family, eps, t }
            }
            CommandName::VerifyBounds => {
                let potential = parse_potential(cfg.potential.as_deref().unwrap_or("normalhedge"), base)?;
                let experts = cfg.experts.unwrap_or(64);
                let rounds = cfg.iterations.or(cfg.rounds).unwrap_or(200);
                let seeds = cfg.seeds.unwrap_or(50);
                if seeds == 0 {
                    return Err(cfg_err("seeds", "must be at least 1"));
                }
                let eps = eps_list(cfg, &VERIFY_EPS)?;
                if eps.iter().any(|&e| e >= 1.0) {
                    return Err(cfg_err("eps", "bound checks need values below 1"));
                }
                let mut game = with_key("experts", GameConfig::experts(potential, experts, rounds))?;
                game.eps = eps.clone();
                game.seed = seed;
                with_key("config", game.validate())?;
                let adversary = adversary_of("iid-signs")?;
                if matches!(adversary, AdversarySpec::Script(_)) {
                    return Err(cfg_err("adversary", "scripted moves are not expert losses"));
                }
                Plan::Verify {
                    config: game,
                    experts,
                    adversary,
                    family: parse_family(cfg.kind.as_deref(), cfg.nu)?,
                    eps,
                    seeds,
                }
            }
        })
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<String> {
        match self {
            Plan::Game {
                config,
                learner,
                adversary,
            } => {
                let mut l = learner.build(config)?;
                let mut a = build_adversary(adversary, config, config.seed)?;
                let trace = run_game(config, l.as_mut(), a.as_mut())?;
                if let Some(out) = &cfg.out {
                    trace.write_csv(create(out)?)?;
                }
                Ok(game_summary(config, &trace))
            }
            Plan::Study {
                monotonicity,
                final_potential,
                horizon,
                k_max,
                probes,
            } => {
                let mut report = if *monotonicity {
                    monotonicity_study(final_potential, *horizon, *k_max, probes)?
                } else {
                    convergence_study(final_potential, *horizon, *k_max, probes)?
                };
                report.seed = cfg.seed;
                emit_report(&report, cfg.out.as_deref())?;
                Ok(study_summary(&report))
            }
            Plan::Bounds { family, eps, t } => {
                let values = eps
                    .iter()
                    .map(|&e| Ok(format!("eps={e} bound={:.16e}", bound_value(*family, e, *t)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(format!("bounds: kind={} t={t} {}", family.name(), values.join(" ")))
            }
            Plan::Verify {
                config,
                experts,
                adversary,
                family,
                eps,
                seeds,
            } => {
                let traces: Vec<GameTrace> = (0..*seeds as u64)
                    .into_par_iter()
                    .map(|i| {
                        let seed = config.seed.wrapping_add(i);
                        let mut game = config.clone();
                        game.seed = seed;
                        let mut l = LearnerKind::Potential.build(&game)?;
                        let mut a = build_adversary(adversary, &game, seed)?;
                        run_game(&game, l.as_mut(), a.as_mut())
                    })
                    .collect::<Result<_>>()?;
                let mut report = bound_verification(&traces, *family, eps)?;
                report.param("experts", experts).param("seeds", seeds).param("rounds", traces[0].steps());
                report.seed = Some(config.seed);
                emit_report(&report, cfg.out.as_deref())?;
                Ok(format!(
                    "verify-bounds: family={} traces={} checks={} violations={} max_eps_regret={:.6e}",
                    family.name(),
                    traces.len(),
                    report.values["checks"],
                    report.values["violations"],
                    traces.iter().map(GameTrace::max_eps_regret).fold(f64::NEG_INFINITY, f64::max)
                ))
            }
        }
    }
}

fn build_adversary(spec: &AdversarySpec, game: &GameConfig, seed: u64) -> Result<Box<dyn Adversary>> {
    let labels = || -> Result<Vec<String>> {
        let state = game
            .initial_state
            .as_ref()
            .filter(|s| s.is_labeled())
            .ok_or_else(|| cfg_err("adversary", "expert losses need a labeled expert state (use --experts)"))?;
        Ok(state.atoms().iter().map(|a| a.label.clone().unwrap_or_default()).collect())
    };
    Ok(match spec {
        AdversarySpec::Fixed { shape, step } => Box::new(FixedAdversary {
            shape: *shape,
            step: *step,
        }),
        AdversarySpec::Mixed { step } => Box::new(MixedAdversary::new(seed, *step)),
        AdversarySpec::RandomPerAtom { step } => Box::new(RandomPerAtomAdversary::new(seed, *step)),
        AdversarySpec::Script(path) => Box::new(with_key("adversary", ScriptedAdversary::from_csv(path))?),
        AdversarySpec::IidSigns => Box::new(ExpertLossAdversary::iid_signs(labels()?, seed)),
        AdversarySpec::ExpertLosses(path) => Box::new(with_key(
            "adversary",
            ExpertLossAdversary::from_matrix(labels()?, load_expert_losses(path)?),
        )?),
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit_report(report: &StudyReport, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            report.write_json(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => report.write_json(std::io::stdout().lock()),
    }
}

fn game_summary(config: &GameConfig, trace: &GameTrace) -> String {
    let mut line = format!(
        "{}-game: steps={} t={:.6} initial_score={:.10e} final_score={:.10e} max_eps_regret={:.6e}",
        trace.mode,
        trace.steps(),
        trace.t_reached,
        trace.initial_score(),
        trace.final_score(),
        trace.max_eps_regret()
    );
    if matches!(config.mode, GameMode::Continuous { .. }) {
        line.push_str(&format!(" V_n={:.10e}", trace.v_n));
    }
    line
}

fn study_summary(report: &StudyReport) -> String {
    let failed: Vec<&str> = report
        .verdicts
        .iter()
        .filter(|(_, &v)| !v)
        .map(|(k, _)| k.as_str())
        .collect();
    if failed.is_empty() {
        format!("{}: all {} verdicts passed", report.study, report.verdicts.len())
    } else {
        format!("{}: failed verdicts: {}", report.study, failed.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> i32 {
        main_with_args(std::iter::once("potgame").chain(args.iter().copied()).map(OsString::from))
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&["bounds", "--kind", "normalhedge", "--t", "100", "--eps", "0.01"]), 0);
        assert_eq!(run(&["bounds", "--kind", "hedge", "--t", "1"]), 2);
        assert_eq!(run(&["integer-game", "--dry-run"]), 2);
        assert_eq!(run(&["integer-game", "--T", "3", "--dry-run"]), 0);
        assert_eq!(run(&["integer-game", "--T", "2", "--final", "polyfinal:coeffs=1,1"]), 4);
        assert_eq!(
            run(&["discrete-game", "--horizon", "1", "--k", "1", "--adversary", "random-walk:s=0.25"]),
            3
        );
        assert_eq!(run(&["monotonicity", "--final", "polyfinal:coeffs=1,0,1", "--dry-run"]), 4);
        assert_eq!(run(&["no-such-command"]), 2);
    }

    #[test]
    fn game_writes_trace() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("trace.csv");
        let code = run(&[
            "integer-game",
            "--T",
            "2",
            "--final",
            "expfinal",
            "--adversary",
            "random-walk",
            "--learner",
            "potential",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let scores: Vec<f64> = rdr.records().map(|r| r.unwrap()[5].parse().unwrap()).collect();
        assert_eq!(scores.len(), 3);
        for s in scores {
            assert!((s - 1f64.cosh().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn expert_game_and_verification() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let code = run(&[
            "verify-bounds",
            "--experts",
            "8",
            "--T",
            "20",
            "--seeds",
            "3",
            "--jobs",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let report: StudyReport = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report.study, "bound_verification");
        assert_eq!(run(&["continuous-game", "--potential", "normalhedge", "--experts", "4", "--T", "5"]), 0);
        assert_eq!(run(&["continuous-game", "--experts", "4"]), 2);
    }
}
