//! Parsers for the command-line specifier mini-language.
//!
//! Potentials: `exp:eta=<f>`, `normalhedge`, `gaussfinal:final=<final>,horizon=<f>[,order=<n>]`.
//! Finals: `expfinal[:rate=<f>,scale=<f>]`, `polyfinal:coeffs=<c0>,<c1>,...`, `table:<path>`,
//! `mix:<w>*<final>+<w>*<final>...`.
//! Adversaries: `random-walk[:s=<f>]`, `biased:p=<f>[,s=<f>]`, `constant:l=<f>[,s=<f>]`,
//! `mixed[:s=<f>]`, `random-per-atom[:s=<f>]`, `script:<path>`, `iid-signs`, `expert-losses:<path>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::games::{AdversaryKind, LearnerKind, MoveShape};
use crate::potential::{FinalPotential, Potential, DEFAULT_QUADRATURE_ORDER};

fn bad(what: &str, spec: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{what} `{spec}`: {why}"))
}

/// Splits `name[:rest]`.
fn head(spec: &str) -> (&str, &str) {
    match spec.split_once(':') {
        Some((h, rest)) => (h.trim(), rest.trim()),
        None => (spec.trim(), ""),
    }
}

/// Parses `key=value,key=value`; a comma-separated piece that does not start
/// with one of `keys` followed by `=` continues the previous value.
fn params<'a>(what: &str, spec: &str, body: &'a str, keys: &[&str]) -> Result<BTreeMap<&'a str, String>> {
    let mut out: BTreeMap<&str, String> = BTreeMap::new();
    let mut current: Option<&str> = None;
    if body.is_empty() {
        return Ok(out);
    }
    for piece in body.split(',') {
        let key = piece.split_once('=').map(|(k, _)| k.trim()).filter(|k| keys.contains(k));
        match (key, current) {
            (Some(k), _) => {
                if out.contains_key(k) {
                    return Err(bad(what, spec, format!("parameter `{k}` given twice")));
                }
                let value = piece.split_once('=').map(|(_, v)| v.trim()).unwrap_or_default();
                out.insert(k, value.to_string());
                current = Some(k);
            }
            (None, Some(k)) => {
                let v = out.get_mut(k).expect("current key present");
                v.push(',');
                v.push_str(piece.trim());
            }
            (None, None) => {
                return Err(bad(what, spec, format!("unknown parameter `{piece}` (expected one of {keys:?})")));
            }
        }
    }
    Ok(out)
}

fn number(what: &str, spec: &str, key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|e| bad(what, spec, format!("`{key}`: {e}")))
}

fn required<'a>(what: &str, spec: &str, p: &'a BTreeMap<&str, String>, key: &str) -> Result<&'a str> {
    p.get(key)
        .map(String::as_str)
        .ok_or_else(|| bad(what, spec, format!("missing `{key}`")))
}

fn no_params(what: &str, spec: &str, body: &str) -> Result<()> {
    if body.is_empty() {
        Ok(())
    } else {
        Err(bad(what, spec, "takes no parameters"))
    }
}

/// Parses a final-potential specifier; paths resolve against `base`.
pub fn parse_final(spec: &str, base: &Path) -> Result<FinalPotential> {
    const W: &str = "final";
    let (name, body) = head(spec);
    let wrap = |e: Error| bad(W, spec, e);
    match name {
        "expfinal" => {
            let p = params(W, spec, body, &["rate", "scale"])?;
            let rate = p.get("rate").map(|v| number(W, spec, "rate", v)).transpose()?.unwrap_or(1.0);
            let scale = p.get("scale").map(|v| number(W, spec, "scale", v)).transpose()?.unwrap_or(1.0);
            FinalPotential::scaled_exp(scale, rate).map_err(wrap)
        }
        "polyfinal" => {
            let p = params(W, spec, body, &["coeffs"])?;
            let coeffs = required(W, spec, &p, "coeffs")?
                .split([',', ';', ' '])
                .filter(|c| !c.is_empty())
                .map(|c| number(W, spec, "coeffs", c))
                .collect::<Result<Vec<_>>>()?;
            FinalPotential::polynomial(coeffs).map_err(wrap)
        }
        "table" => {
            if body.is_empty() {
                return Err(bad(W, spec, "missing path"));
            }
            FinalPotential::table_from_csv(&resolve(base, body)).map_err(wrap)
        }
        "mix" => {
            let parts = body
                .split('+')
                .map(|part| {
                    let (w, f) = part
                        .split_once('*')
                        .ok_or_else(|| bad(W, spec, format!("component `{part}` is not <weight>*<final>")))?;
                    Ok((number(W, spec, "weight", w)?, parse_final(f, base)?))
                })
                .collect::<Result<Vec<_>>>()?;
            FinalPotential::mixture(parts).map_err(wrap)
        }
        other => Err(bad(W, spec, format!("unknown final kind `{other}`"))),
    }
}

pub fn parse_potential(spec: &str, base: &Path) -> Result<Potential> {
    const W: &str = "potential";
    let (name, body) = head(spec);
    let wrap = |e: Error| match e {
        Error::Precondition(_) => e,
        other => bad(W, spec, other),
    };
    match name {
        "exp" => {
            let p = params(W, spec, body, &["eta"])?;
            let eta = p.get("eta").map(|v| number(W, spec, "eta", v)).transpose()?.unwrap_or(1.0);
            Potential::exponential(eta).map_err(wrap)
        }
        "normalhedge" => {
            no_params(W, spec, body)?;
            Ok(Potential::normal_hedge())
        }
        "gaussfinal" => {
            let p = params(W, spec, body, &["final", "horizon", "order"])?;
            let f = parse_final(required(W, spec, &p, "final")?, base)?;
            let horizon = number(W, spec, "horizon", required(W, spec, &p, "horizon")?)?;
            let order = p
                .get("order")
                .map(|v| v.parse::<usize>().map_err(|e| bad(W, spec, format!("`order`: {e}"))))
                .transpose()?
                .unwrap_or(DEFAULT_QUADRATURE_ORDER);
            Potential::gaussian_final(f, horizon, order).map_err(wrap)
        }
        other => Err(bad(W, spec, format!("unknown potential kind `{other}`"))),
    }
}

/// Parsed adversary specifier; strategies needing state or seeds are built later.
#[derive(Clone, Debug, PartialEq)]
pub enum AdversarySpec {
    /// Atom-independent move, step from the argument string or from the mode.
    Fixed { shape: MoveShape, step: Option<f64> },
    Mixed { step: Option<f64> },
    RandomPerAtom { step: Option<f64> },
    Script(PathBuf),
    IidSigns,
    ExpertLosses(PathBuf),
}

pub fn parse_adversary(spec: &str, base: &Path) -> Result<AdversarySpec> {
    const W: &str = "adversary";
    let (name, body) = head(spec);
    let step_of = |p: &BTreeMap<&str, String>| p.get("s").map(|v| number(W, spec, "s", v)).transpose();
    let checked_step = |step: Option<f64>| -> Result<Option<f64>> {
        match step {
            Some(s) if !(s > 0.0 && s <= 1.0) => Err(bad(W, spec, format!("step size must lie in (0,1], got {s}"))),
            other => Ok(other),
        }
    };
    let parsed = match name {
        "random-walk" => {
            let p = params(W, spec, body, &["s"])?;
            AdversarySpec::Fixed {
                shape: MoveShape::RandomWalk,
                step: checked_step(step_of(&p)?)?,
            }
        }
        "biased" => {
            let p = params(W, spec, body, &["p", "s"])?;
            let prob = number(W, spec, "p", required(W, spec, &p, "p")?)?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(bad(W, spec, format!("`p` must lie in [0,1], got {prob}")));
            }
            AdversarySpec::Fixed {
                shape: MoveShape::Biased { p: prob },
                step: checked_step(step_of(&p)?)?,
            }
        }
        "constant" => {
            let p = params(W, spec, body, &["l", "s"])?;
            let l = number(W, spec, "l", required(W, spec, &p, "l")?)?;
            let step = checked_step(step_of(&p)?)?;
            if let Some(s) = step {
                AdversaryKind::Constant { l, s }.validate().map_err(|e| bad(W, spec, e))?;
            }
            AdversarySpec::Fixed {
                shape: MoveShape::Constant { l },
                step,
            }
        }
        "mixed" => AdversarySpec::Mixed {
            step: checked_step(step_of(&params(W, spec, body, &["s"])?)?)?,
        },
        "random-per-atom" => AdversarySpec::RandomPerAtom {
            step: checked_step(step_of(&params(W, spec, body, &["s"])?)?)?,
        },
        "script" if !body.is_empty() => AdversarySpec::Script(resolve(base, body)),
        "expert-losses" if !body.is_empty() => AdversarySpec::ExpertLosses(resolve(base, body)),
        "script" | "expert-losses" => return Err(bad(W, spec, "missing path")),
        "iid-signs" => {
            no_params(W, spec, body)?;
            AdversarySpec::IidSigns
        }
        other => return Err(bad(W, spec, format!("unknown adversary kind `{other}`"))),
    };
    Ok(parsed)
}

pub fn parse_learner(spec: &str, seed: u64) -> Result<LearnerKind> {
    match spec.trim() {
        "potential" => Ok(LearnerKind::Potential),
        "uniform" => Ok(LearnerKind::Uniform),
        "random" => Ok(LearnerKind::Random { seed }),
        other => Err(Error::Config(format!(
            "learner `{other}`: expected potential, uniform or random"
        ))),
    }
}

/// Relative paths in specs resolve against the config file's directory.
fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
