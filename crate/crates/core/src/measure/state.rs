use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Atoms closer than this in regret are merged.
pub const MERGE_TOLERANCE: f64 = 1e-9;
/// Allowed deviation of total mass from one.
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Hard cap on atoms per state.
pub const MAX_ATOMS: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub regret: f64,
    pub mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// A finite probability measure over regret values.
///
/// Unlabeled states keep atoms sorted and merge atoms within
/// [`MERGE_TOLERANCE`]. Labeled states track individual experts, so atoms
/// are sorted but never merged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretState {
    atoms: Vec<Atom>,
    labeled: bool,
}

impl RegretState {
    /// δ(r).
    pub fn point_mass(r: f64) -> Self {
        Self {
            atoms: vec![Atom {
                regret: r,
                mass: 1.0,
                label: None,
            }],
            labeled: false,
        }
    }

    /// Builds a state from `(regret, mass)` pairs; masses must be positive and sum to one.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(regret, mass)| Atom {
                regret,
                mass,
                label: None,
            })
            .collect();
        validate_atoms(&atoms)?;
        Self::finish(atoms, false)
    }

    /// Labeled atoms (one per expert); never merged.
    pub fn labeled(atoms: impl IntoIterator<Item = (String, f64, f64)>) -> Result<Self> {
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|(label, regret, mass)| Atom {
                regret,
                mass,
                label: Some(label),
            })
            .collect();
        validate_atoms(&atoms)?;
        Self::finish(atoms, true)
    }

    /// `n` experts with equal mass at regret zero, labeled `e0`, `e1`, ….
    pub fn experts(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least one expert"));
        }
        let m = 1.0 / n as f64;
        Self::labeled((0..n).map(|j| (format!("e{j}"), 0.0, m)))
    }

    /// Normalizes, sorts and (if unlabeled) merges atoms produced by an update.
    pub(crate) fn from_unnormalized(mut atoms: Vec<Atom>, labeled: bool) -> Result<Self> {
        atoms.retain(|a| a.mass > 0.0);
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid(format!("state has non-positive total mass {total}")));
        }
        for a in &mut atoms {
            a.mass /= total;
        }
        Self::finish(atoms, labeled)
    }

    fn finish(mut atoms: Vec<Atom>, labeled: bool) -> Result<Self> {
        atoms.sort_by(|a, b| a.regret.total_cmp(&b.regret));
        if !labeled {
            atoms = merge_sorted(atoms);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(Error::Resource(format!(
                "state has {} atoms, cap is {MAX_ATOMS}",
                atoms.len()
            )));
        }
        Ok(Self { atoms, labeled })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.labeled
    }

    pub fn regrets(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.regret)
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.mass)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().sum()
    }

    /// Ψ ⊙ f.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.mass * f(a.regret)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|r| r)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|r| (r - m) * (r - m))
    }

    pub fn max_regret(&self) -> f64 {
        self.atoms.last().map_or(f64::NAN, |a| a.regret)
    }

    pub fn min_regret(&self) -> f64 {
        self.atoms.first().map_or(f64::NAN, |a| a.regret)
    }

    /// mass{ρ ≥ r}.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let start = self.atoms.partition_point(|a| a.regret < r);
        self.atoms[start..].iter().map(|a| a.mass).sum()
    }
}

fn validate_atoms(atoms: &[Atom]) -> Result<()> {
    if atoms.is_empty() {
        return Err(invalid("state needs at least one atom"));
    }
    for a in atoms {
        if !a.regret.is_finite() {
            return Err(invalid(format!("regret must be finite, got {}", a.regret)));
        }
        if !(a.mass > 0.0 && a.mass.is_finite()) {
            return Err(invalid(format!("atom at {} has non-positive mass {}", a.regret, a.mass)));
        }
    }
    let total: f64 = atoms.iter().map(|a| a.mass).sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(invalid(format!("masses sum to {total}, expected 1")));
    }
    Ok(())
}

/// Merges runs of atoms within [`MERGE_TOLERANCE`] of the run's first atom.
/// The merged atom sits at the regret of the run's heaviest member.
fn merge_sorted(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut anchor = f64::NEG_INFINITY;
    let mut heaviest = 0.0;
    for a in atoms {
        match out.last_mut() {
            Some(last) if a.regret - anchor <= MERGE_TOLERANCE => {
                if a.mass > heaviest {
                    heaviest = a.mass;
                    last.regret = a.regret;
                }
                last.mass += a.mass;
            }
            _ => {
                anchor = a.regret;
                heaviest = a.mass;
                out.push(a);
            }
        }
    }
    out
}
