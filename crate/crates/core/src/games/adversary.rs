use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::weights::WeightFunction;
use crate::error::{invalid, Result};
use crate::measure::{LossDist, LossMap, RegretState};

/// What an adversary sees before it moves: the learner has already committed.
#[derive(Clone, Copy, Debug)]
pub struct RoundView<'a> {
    /// 1-based index of the step being played.
    pub iter: usize,
    pub t: f64,
    /// Step size the mode expects (1, s_k, or the continuous-mode maximum).
    pub step: f64,
    pub state: &'a RegretState,
    pub weights: &'a WeightFunction,
}

pub trait Adversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap>;

    fn name(&self) -> String;
}

/// Atom-independent adversary moves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    /// ±s with equal probability.
    RandomWalk { s: f64 },
    /// +s w.p. p, −s otherwise.
    Biased { s: f64, p: f64 },
    /// Loss l at every atom, with step size s.
    Constant { l: f64, s: f64 },
}

impl AdversaryKind {
    pub fn step_size(&self) -> f64 {
        match *self {
            Self::RandomWalk { s } | Self::Biased { s, .. } | Self::Constant { s, .. } => s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.step_size();
        if !(s > 0.0 && s <= 1.0) {
            return Err(invalid(format!("step size must lie in (0,1], got {s}")));
        }
        match *self {
            Self::Biased { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(invalid(format!("bias probability must lie in [0,1], got {p}")))
            }
            Self::Constant { l, s } if !(l.abs() <= s) => Err(invalid(format!("constant loss {l} exceeds step size {s}"))),
            _ => Ok(()),
        }
    }

    pub fn loss_dist(&self) -> Result<LossDist> {
        self.validate()?;
        match *self {
            Self::RandomWalk { s } => LossDist::two_point(s, 0.5),
            Self::Biased { s, p } => LossDist::two_point(s, p),
            Self::Constant { l, .. } => Ok(LossDist::point(l)),
        }
    }
}

/// The same distribution at every atom of `state`.
pub fn adversary_loss_map(kind: AdversaryKind, state: &RegretState) -> Result<LossMap> {
    LossMap::uniform(kind.step_size(), kind.loss_dist()?, state.len())
}

impl Adversary for AdversaryKind {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        adversary_loss_map(*self, view.state)
    }

    fn name(&self) -> String {
        match self {
            Self::RandomWalk { s } => format!("random-walk:s={s}"),
            Self::Biased { s, p } => format!("biased:p={p},s={s}"),
            Self::Constant { l, s } => format!("constant:l={l},s={s}"),
        }
    }
}

/// Shape of an atom-independent move whose step size follows the mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MoveShape {
    RandomWalk,
    Biased { p: f64 },
    Constant { l: f64 },
}

/// Plays `shape` at a fixed step size, or at the mode's step when none is given.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedAdversary {
    pub shape: MoveShape,
    pub step: Option<f64>,
}

impl FixedAdversary {
    pub fn kind_for(&self, mode_step: f64) -> AdversaryKind {
        let s = self.step.unwrap_or(mode_step);
        match self.shape {
            MoveShape::RandomWalk => AdversaryKind::RandomWalk { s },
            MoveShape::Biased { p } => AdversaryKind::Biased { s, p },
            MoveShape::Constant { l } => AdversaryKind::Constant { l, s },
        }
    }
}

impl Adversary for FixedAdversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        adversary_loss_map(self.kind_for(view.step), view.state)
    }

    fn name(&self) -> String {
        let step = self.step.map_or(String::new(), |s| format!(",s={s}"));
        match self.shape {
            MoveShape::RandomWalk => format!("random-walk{step}"),
            MoveShape::Biased { p } => format!("biased:p={p}{step}"),
            MoveShape::Constant { l } => format!("constant:l={l}{step}"),
        }
    }
}

/// A fixed move per iteration, read from an `iter,kind,param1,param2` CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptedAdversary {
    moves: HashMap<usize, AdversaryKind>,
}

impl ScriptedAdversary {
    pub fn new(moves: impl IntoIterator<Item = (usize, AdversaryKind)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (iter, kind) in moves {
            kind.validate()?;
            if map.insert(iter, kind).is_some() {
                return Err(invalid(format!("script repeats iteration {iter}")));
            }
        }
        Ok(Self { moves: map })
    }

    /// Rows `iter,kind,param1,param2`: `random-walk,s`, `biased,s,p`, `constant,l,s`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut moves = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let at = |msg: &str| invalid(format!("{}: row {}: {msg}", path.display(), line + 2));
            let iter: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| at("bad iter"))?;
            let num = |idx: usize| -> Result<f64> {
                rec.get(idx)
                    .filter(|v| !v.is_empty())
                    .ok_or_else(|| at(&format!("missing param{idx}", idx = idx - 1)))?
                    .parse::<f64>()
                    .map_err(|e| at(&e.to_string()))
            };
            let kind = match rec.get(1).unwrap_or("") {
                "random-walk" => AdversaryKind::RandomWalk { s: num(2)? },
                "biased" => AdversaryKind::Biased { s: num(2)?, p: num(3)? },
                "constant" => AdversaryKind::Constant { l: num(2)?, s: num(3)? },
                other => return Err(at(&format!("unknown kind `{other}`"))),
            };
            moves.push((iter, kind));
        }
        Self::new(moves)
    }
}

impl Adversary for ScriptedAdversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        let kind = self
            .moves
            .get(&view.iter)
            .ok_or_else(|| invalid(format!("script has no move for iteration {}", view.iter)))?;
        adversary_loss_map(*kind, view.state)
    }

    fn name(&self) -> String {
        "script".to_string()
    }
}

/// Independent random loss distribution at every atom: a fair or biased
/// two-point law at ±s, or a point mass, all supported in [−s, s].
#[derive(Clone, Debug)]
pub struct RandomPerAtomAdversary {
    rng: ChaCha8Rng,
    step: Option<f64>,
}

impl RandomPerAtomAdversary {
    pub fn new(seed: u64, step: Option<f64>) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            step,
        }
    }
}

impl Adversary for RandomPerAtomAdversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        let s = self.step.unwrap_or(view.step);
        let per_atom = (0..view.state.len())
            .map(|_| match self.rng.gen_range(0..3) {
                0 => LossDist::two_point(s, 0.5),
                1 => LossDist::two_point(s, self.rng.gen::<f64>()),
                _ => Ok(LossDist::point(self.rng.gen_range(-s..=s))),
            })
            .collect::<Result<Vec<_>>>()?;
        LossMap::new(s, per_atom)
    }

    fn name(&self) -> String {
        "random-per-atom".to_string()
    }
}

/// Each step draws one of: random walk, biased with |2p − 1| ≤ s, or a
/// constant loss in [−s², s²]. Every choice keeps |ℓ| ≤ s².
#[derive(Clone, Debug)]
pub struct MixedAdversary {
    rng: ChaCha8Rng,
    step: Option<f64>,
}

impl MixedAdversary {
    pub fn new(seed: u64, step: Option<f64>) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            step,
        }
    }

    pub fn draw(&mut self, s: f64) -> AdversaryKind {
        match self.rng.gen_range(0..3) {
            0 => AdversaryKind::RandomWalk { s },
            1 => {
                let half = (s / 2.0).min(0.5);
                AdversaryKind::Biased {
                    s,
                    p: self.rng.gen_range(0.5 - half..=0.5 + half),
                }
            }
            _ => AdversaryKind::Constant {
                l: self.rng.gen_range(-s * s..=s * s),
                s,
            },
        }
    }
}

impl Adversary for MixedAdversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        let s = self.step.unwrap_or(view.step);
        let kind = self.draw(s);
        adversary_loss_map(kind, view.state)
    }

    fn name(&self) -> String {
        "mixed".to_string()
    }
}

/// Deterministic per-expert losses for labeled states; row `iter − 1` is played at step `iter`.
#[derive(Clone, Debug)]
pub struct ExpertLossAdversary {
    columns: HashMap<String, usize>,
    source: ExpertLosses,
}

#[derive(Clone, Debug)]
enum ExpertLosses {
    Matrix(Vec<Vec<f64>>),
    /// Fresh iid ±1 losses each round.
    IidSigns(ChaCha8Rng),
}

impl ExpertLossAdversary {
    /// Expert `j` must carry label `labels[j]`.
    pub fn from_matrix(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((idx, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != labels.len()) {
            return Err(invalid(format!("loss row {idx} has {} entries for {} experts", row.len(), labels.len())));
        }
        if let Some(y) = rows.iter().flatten().find(|y| !(-1.0..=1.0).contains(*y)) {
            return Err(invalid(format!("expert loss {y} outside [-1,1]")));
        }
        Ok(Self {
            columns: labels.into_iter().enumerate().map(|(j, l)| (l, j)).collect(),
            source: ExpertLosses::Matrix(rows),
        })
    }

    pub fn iid_signs(labels: Vec<String>, seed: u64) -> Self {
        Self {
            columns: labels.into_iter().enumerate().map(|(j, l)| (l, j)).collect(),
            source: ExpertLosses::IidSigns(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Adversary for ExpertLossAdversary {
    fn play(&mut self, view: &RoundView<'_>) -> Result<LossMap> {
        let n = self.columns.len();
        let row: Vec<f64> = match &mut self.source {
            ExpertLosses::Matrix(rows) => rows
                .get(view.iter - 1)
                .cloned()
                .ok_or_else(|| invalid(format!("no expert losses for iteration {}", view.iter)))?,
            ExpertLosses::IidSigns(rng) => (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
        };
        let per_atom = view
            .state
            .atoms()
            .iter()
            .map(|a| {
                let label = a
                    .label
                    .as_ref()
                    .ok_or_else(|| invalid("expert losses need a labeled state"))?;
                let col = self
                    .columns
                    .get(label)
                    .ok_or_else(|| invalid(format!("no loss column for expert {label}")))?;
                Ok(LossDist::point(row[*col]))
            })
            .collect::<Result<Vec<_>>>()?;
        LossMap::new(1.0, per_atom)
    }

    fn name(&self) -> String {
        match self.source {
            ExpertLosses::Matrix(_) => "expert-losses".to_string(),
            ExpertLosses::IidSigns(_) => "iid-signs".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn biases(map: &LossMap) -> Vec<f64> {
        map.per_atom().iter().map(LossDist::mean).collect()
    }

    #[test]
    fn loss_map_examples() {
        let s = RegretState::from_atoms([(-1.0, 0.5), (2.0, 0.5)]).unwrap();
        let rw = adversary_loss_map(AdversaryKind::RandomWalk { s: 1.0 }, &s).unwrap();
        for d in rw.per_atom() {
            assert_eq!(d.points(), &[(1.0, 0.5), (-1.0, 0.5)]);
        }
        let b = adversary_loss_map(AdversaryKind::Biased { s: 1.0, p: 0.75 }, &s).unwrap();
        assert_eq!(biases(&b), vec![0.5, 0.5]);
        let c = adversary_loss_map(AdversaryKind::Constant { l: 0.3, s: 1.0 }, &s).unwrap();
        assert_eq!(biases(&c), vec![0.3, 0.3]);
        assert_eq!(c.per_atom()[0].variance(), 0.0);
    }

    #[test]
    fn parameters_validated() {
        let s = RegretState::point_mass(0.0);
        assert!(adversary_loss_map(AdversaryKind::RandomWalk { s: 1.5 }, &s).is_err());
        assert!(adversary_loss_map(AdversaryKind::Biased { s: 1.0, p: -0.1 }, &s).is_err());
        assert!(adversary_loss_map(AdversaryKind::Constant { l: 0.6, s: 0.5 }, &s).is_err());
    }

    #[test]
    fn mixed_moves_respect_the_aggregate_bound() {
        let mut adv = MixedAdversary::new(3, None);
        for _ in 0..500 {
            let s = 0.125;
            let kind = adv.draw(s);
            let b = kind.loss_dist().unwrap().mean();
            assert!(b.abs() <= s * s + 1e-15, "{kind:?}");
        }
    }

    #[test]
    fn script_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("adv.csv");
        std::fs::write(&p, "iter,kind,param1,param2\n1,random-walk,1,\n2,biased,0.5,0.75\n3,constant,0.1,0.5\n").unwrap();
        let script = ScriptedAdversary::from_csv(&p).unwrap();
        assert_eq!(script.moves[&2], AdversaryKind::Biased { s: 0.5, p: 0.75 });
        assert_eq!(script.moves[&3], AdversaryKind::Constant { l: 0.1, s: 0.5 });
        std::fs::write(&p, "iter,kind,param1,param2\n1,zigzag,1,\n").unwrap();
        assert!(ScriptedAdversary::from_csv(&p).is_err());
        std::fs::write(&p, "iter,kind,param1,param2\n1,biased,1,\n").unwrap();
        assert!(ScriptedAdversary::from_csv(&p).is_err());
    }

    #[test]
    fn random_per_atom_supports_within_step() {
        let state = RegretState::from_atoms([(-1.0, 0.25), (0.0, 0.5), (3.0, 0.25)]).unwrap();
        let w = WeightFunction::uniform(&state);
        let mut adv = RandomPerAtomAdversary::new(11, None);
        for iter in 1..50 {
            let view = RoundView {
                iter,
                t: 0.0,
                step: 0.5,
                state: &state,
                weights: &w,
            };
            let m = adv.play(&view).unwrap();
            assert!(m.per_atom().iter().all(|d| d.max_abs() <= 0.5));
            let total: f64 = m.per_atom().iter().map(|d| d.points().iter().map(|p| p.1).sum::<f64>()).sum();
            assert_relative_eq!(total, 3.0, max_relative = 1e-12);
        }
    }
}
