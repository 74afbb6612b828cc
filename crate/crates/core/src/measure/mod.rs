//! Finite atomic regret measures and the operations the games apply to them:
//! loss convolution, scores, percentile regrets, binomial laws, and the
//! tail-bound / average-potential checks.

mod bound;
mod io;
mod loss;
mod state;

pub use bound::{apb_score, srb_check, srb_check_exact, srb_check_with_margin, BoundFunction, SRB_TOLERANCE};
pub use io::{load_expert_losses, load_state_csv};
pub use loss::{convolve_step, LossDist, LossMap, SUPPORT_TOLERANCE};
pub use state::{Atom, RegretState, MASS_TOLERANCE, MAX_ATOMS, MERGE_TOLERANCE};

use crate::error::{invalid, Result};
use crate::potential::Potential;

/// Φ = Ψ ⊙ φ(t, ·).
pub fn score(state: &RegretState, p: &Potential, t: f64) -> Result<f64> {
    let f = p.at_time(t)?;
    Ok(state.expect(f))
}

/// Regret of the atom at which the descending cumulative mass first reaches ε.
pub fn epsilon_regret(state: &RegretState, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("epsilon must lie in (0,1], got {eps}")));
    }
    let mut cumulative = 0.0;
    for a in state.atoms().iter().rev() {
        cumulative += a.mass;
        if cumulative + MASS_TOLERANCE >= eps {
            return Ok(a.regret);
        }
    }
    Ok(state.min_regret())
}

/// Above this many steps binomial weights are built from log-ratios.
const EXACT_BINOMIAL_MAX: usize = 60;

/// C(n, j)/2ⁿ for j = 0..=n.
pub fn binomial_weights(n: usize) -> Vec<f64> {
    if n <= EXACT_BINOMIAL_MAX {
        let scale = 0.5f64.powi(n as i32);
        let mut c: u128 = 1;
        let mut out = Vec::with_capacity(n + 1);
        for j in 0..=n {
            out.push(c as f64 * scale);
            c = c * (n - j) as u128 / (j + 1) as u128;
        }
        return out;
    }
    // Unnormalized log-weights relative to the mode, accumulated outward.
    let mode = n / 2;
    let mut logs = vec![0.0; n + 1];
    for j in mode..n {
        logs[j + 1] = logs[j] + (((n - j) as f64) / ((j + 1) as f64)).ln();
    }
    for j in (1..=mode).rev() {
        logs[j - 1] = logs[j] + ((j as f64) / ((n - j + 1) as f64)).ln();
    }
    let mut w: Vec<f64> = logs.into_iter().map(f64::exp).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// E[g(R₀ + X)] with X ~ 𝔹(n, σ), a sum of n fair ±σ coin flips.
pub fn binomial_expectation(n: usize, sigma: f64, r0: f64, g: impl Fn(f64) -> f64) -> f64 {
    binomial_weights(n)
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(j, w)| w * g(r0 + (2.0 * j as f64 - n as f64) * sigma))
        .sum()
}

/// 𝔹(n, s) as a regret state.
pub fn binomial_dist(n: usize, s: f64) -> Result<RegretState> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("step must be positive, got {s}")));
    }
    let atoms: Vec<(f64, f64)> = binomial_weights(n)
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(j, w)| ((2.0 * j as f64 - n as f64) * s, w))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    RegretState::from_atoms(atoms.into_iter().map(|(r, w)| (r, w / total)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn three_atoms() -> RegretState {
        RegretState::from_atoms([(3.0, 0.25), (1.0, 0.25), (-1.0, 0.5)]).unwrap()
    }

    #[test]
    fn score_examples() {
        let nh = Potential::normal_hedge();
        assert_eq!(score(&RegretState::point_mass(0.0), &nh, 0.0).unwrap(), 1.0);
        let s = RegretState::from_atoms([(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let e = Potential::exponential(1.0).unwrap();
        assert_relative_eq!(score(&s, &e, 0.0).unwrap(), 2f64.sqrt().cosh(), max_relative = 1e-15);
        assert_eq!(three_atoms().expect(|_| 1.0), 1.0);
    }

    #[test]
    fn epsilon_regret_examples() {
        let s = three_atoms();
        assert_eq!(epsilon_regret(&s, 0.25).unwrap(), 3.0);
        assert_eq!(epsilon_regret(&s, 0.5).unwrap(), 1.0);
        assert_eq!(epsilon_regret(&s, 1.0).unwrap(), -1.0);
        assert_eq!(epsilon_regret(&s, 0.3).unwrap(), 1.0);
        assert!(epsilon_regret(&s, 0.0).is_err());
        assert!(epsilon_regret(&s, 1.1).is_err());
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial_dist(0, 1.0).unwrap(), RegretState::point_mass(0.0));
        assert_eq!(
            binomial_dist(2, 1.0).unwrap(),
            RegretState::from_atoms([(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]).unwrap()
        );
        let b = binomial_dist(4, 0.5).unwrap();
        let expected = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        for (a, (m, r)) in b.atoms().iter().zip(expected.iter().zip([-2.0, -1.0, 0.0, 1.0, 2.0])) {
            assert_eq!(a.mass, *m);
            assert_eq!(a.regret, r);
        }
    }

    #[test]
    fn log_space_weights_match_exact() {
        // Exact recurrences at n = 60 against the log-ratio path on the same n.
        let exact = binomial_weights(60);
        let n = 60;
        let mode = n / 2;
        let mut logs = vec![0.0; n + 1];
        for j in mode..n {
            logs[j + 1] = logs[j] + (((n - j) as f64) / ((j + 1) as f64)).ln();
        }
        for j in (1..=mode).rev() {
            logs[j - 1] = logs[j] + ((j as f64) / ((n - j + 1) as f64)).ln();
        }
        let total: f64 = logs.iter().map(|l| l.exp()).sum();
        for (w, l) in exact.iter().zip(&logs) {
            assert_relative_eq!(*w, l.exp() / total, max_relative = 1e-12);
        }
        let big = binomial_weights(1000);
        assert_relative_eq!(big.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(big[500], 0.025225018178360, max_relative = 1e-10);
    }

    #[test]
    fn binomial_expectation_of_exponential() {
        // E[e^{X}] for X ~ 𝔹(n, σ) is cosh(σ)ⁿ.
        for &(n, sigma) in &[(1, 1.0), (4, 0.5), (64, 0.125), (1024, 1.0 / 32.0)] {
            let v = binomial_expectation(n, sigma, 0.0, f64::exp);
            assert_relative_eq!(v, sigma.cosh().powi(n as i32), max_relative = 1e-12);
        }
    }
}
