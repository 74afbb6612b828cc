use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Experiment kinds; one per subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    IntegerGame,
    DiscreteGame,
    ContinuousGame,
    Convergence,
    Monotonicity,
    Bounds,
    VerifyBounds,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::IntegerGame => "integer-game",
            Self::DiscreteGame => "discrete-game",
            Self::ContinuousGame => "continuous-game",
            Self::Convergence => "convergence",
            Self::Monotonicity => "monotonicity",
            Self::Bounds => "bounds",
            Self::VerifyBounds => "verify-bounds",
        }
    }
}

/// Every experiment parameter. A config file holds the same keys; flags given
/// on the command line override file values. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    /// Integer-game rounds, or rounds of an expert game.
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<u32>,
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    pub final_spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// (t, R) probe points for studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Vec<[f64; 2]>>,
    /// Bound family: exp, normalhedge or uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts: Option<usize>,
    /// Number of seeds in a verification batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, rename = "max-step", skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Lattice side used for recorded scores: lower or upper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    /// CSV of `regret,mass[,label]` used as the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
}

/// Command-line flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// TOML or JSON config file (by extension); flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate the configuration and exit without computing.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long = "T", value_name = "ROUNDS")]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long = "final", value_name = "SPEC")]
    pub final_spec: Option<String>,
    #[arg(long, value_name = "SPEC")]
    pub potential: Option<String>,
    #[arg(long, value_name = "SPEC", allow_hyphen_values = true)]
    pub adversary: Option<String>,
    #[arg(long)]
    pub learner: Option<String>,
    /// Comma-separated percentiles.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Probe point `t,R`; repeatable.
    #[arg(long, value_name = "T,R", allow_hyphen_values = true)]
    pub probe: Vec<String>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub experts: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub max_step: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub side: Option<String>,
    #[arg(long)]
    pub state: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a config file; `.toml` and `.json` are recognized.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "toml" => toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
            "json" => serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
            other => Err(Error::Config(format!(
                "{}: unrecognized config extension `{other}` (use .toml or .json)",
                path.display()
            ))),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overlays every flag that was given.
    pub fn apply_flags(&mut self, f: &Flags) -> Result<()> {
        macro_rules! overlay {
            ($($field:ident),*) => { $( if let Some(v) = &f.$field { self.$field = Some(v.clone()); } )* };
        }
        overlay!(
            rounds, horizon, k, kmax, final_spec, potential, adversary, learner, eps, nu, seed, out, jobs, kind, t,
            experts, seeds, max_step, c, iterations, side, state
        );
        if !f.probe.is_empty() {
            self.probe = Some(f.probe.iter().map(|p| parse_probe(p)).collect::<Result<_>>()?);
        }
        Ok(())
    }

    /// Resolves the file (if any) and flags for `command`.
    pub fn resolve(command: CommandName, flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        match cfg.command {
            Some(c) if c != command => {
                return Err(Error::Config(format!(
                    "command: file says `{}` but `{}` was invoked",
                    c.as_str(),
                    command.as_str()
                )))
            }
            _ => cfg.command = Some(command),
        }
        cfg.apply_flags(flags)?;
        Ok(cfg)
    }
}

fn parse_probe(s: &str) -> Result<[f64; 2]> {
    let parsed = s
        .split_once(',')
        .and_then(|(t, r)| Some([t.trim().parse().ok()?, r.trim().parse().ok()?]));
    parsed.ok_or_else(|| Error::Config(format!("probe: expected `t,R`, got `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            command: Some(CommandName::Convergence),
            rounds: Some(3),
            horizon: Some(1.5),
            kmax: Some(4),
            final_spec: Some("expfinal".into()),
            eps: Some(vec![0.1, 0.01]),
            seed: Some(7),
            probe: Some(vec![[0.0, 0.0], [0.25, -0.5]]),
            max_step: Some(0.125),
            ..Default::default()
        }
    }

    #[test]
    fn round_trips() {
        let cfg = sample();
        let back: ExperimentConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let back: ExperimentConfig = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ExperimentConfig>("horizn = 1.0").unwrap_err();
        assert!(err.to_string().contains("horizn"));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "command = \"convergence\"\nhorizon = 2.0\nkmax = 3\n").unwrap();
        let flags = Flags {
            config: Some(path.clone()),
            kmax: Some(5),
            probe: vec!["0,-1".into()],
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(CommandName::Convergence, &flags).unwrap();
        assert_eq!(cfg.horizon, Some(2.0));
        assert_eq!(cfg.kmax, Some(5));
        assert_eq!(cfg.probe, Some(vec![[0.0, -1.0]]));
        assert!(matches!(
            ExperimentConfig::resolve(CommandName::Bounds, &flags),
            Err(Error::Config(_))
        ));
    }
}
