use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::numeric::{central_difference, strict_positivity_report, PositivityReport};
use crate::error::{invalid, Error, Result};

/// Grid on which final potentials are validated when no explicit grid is given.
pub fn default_sp_grid() -> Vec<f64> {
    (0..=32).map(|i| -4.0 + 0.25 * i as f64).collect()
}

/// Terminal potential φ_T̄(R) of a fixed-horizon game.
///
/// Construction does not check positivity; code that relies on the guarantees calls
/// [`FinalPotential::require_sp`] with the order its hypothesis needs.
#[derive(Clone)]
pub struct FinalPotential {
    kind: FinalKind,
    declared_sp_order: u8,
    label: String,
}

#[derive(Clone)]
enum FinalKind {
    Exp { scale: f64, rate: f64 },
    Polynomial(Vec<f64>),
    Table(LogLinearTable),
    Mixture(Vec<(f64, FinalPotential)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for FinalPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FinalPotential")
            .field("label", &self.label)
            .field("declared_sp_order", &self.declared_sp_order)
            .finish()
    }
}

impl FinalPotential {
    /// φ(R) = e^R.
    pub fn exp() -> Self {
        Self::scaled_exp(1.0, 1.0).expect("unit exponential is valid")
    }

    /// φ(R) = scale · e^{rate·R}; SP{k} for every k when both are positive.
    pub fn scaled_exp(scale: f64, rate: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!(
                "exponential final needs positive finite scale and rate, got scale={scale}, rate={rate}"
            )));
        }
        let label = if scale == 1.0 && rate == 1.0 {
            "expfinal".to_string()
        } else if scale == 1.0 {
            format!("expfinal:rate={rate}")
        } else {
            format!("{scale}*exp({rate}R)")
        };
        Ok(Self {
            kind: FinalKind::Exp { scale, rate },
            declared_sp_order: 4,
            label,
        })
    }

    /// Polynomial with coefficients in increasing degree order.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial final needs finite coefficients"));
        }
        let label = format!(
            "polyfinal:coeffs={}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
        );
        Ok(Self {
            kind: FinalKind::Polynomial(coeffs),
            declared_sp_order: 2,
            label,
        })
    }

    /// Positive combination Σ wᵢ fᵢ.
    pub fn mixture(parts: Vec<(f64, FinalPotential)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        if let Some((w, _)) = parts.iter().find(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid(format!("mixture weights must be positive, got {w}")));
        }
        let label = parts
            .iter()
            .map(|(w, f)| format!("{w}*[{}]", f.label))
            .collect::<Vec<_>>()
            .join("+");
        let declared = parts.iter().map(|(_, f)| f.declared_sp_order).min().unwrap_or(2);
        Ok(Self {
            kind: FinalKind::Mixture(parts),
            declared_sp_order: declared,
            label,
        })
    }

    /// Tabulated final potential, interpolated linearly in log-space and
    /// extrapolated along the end segments.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        let table = LogLinearTable::new(points)?;
        Ok(Self {
            kind: FinalKind::Table(table),
            declared_sp_order: 2,
            label: "table".to_string(),
        })
    }

    /// Loads a `R,value` CSV (header optional) and builds a tabulated final.
    pub fn table_from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(invalid(format!("{}: line {} needs two columns", path.display(), line + 1)));
            }
            let (r, v) = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match (r, v) {
                (Ok(r), Ok(v)) => points.push((r, v)),
                _ if line == 0 => continue,
                _ => {
                    return Err(invalid(format!(
                        "{}: line {} is not numeric",
                        path.display(),
                        line + 1
                    )))
                }
            }
        }
        let mut f = Self::table(points)?;
        f.label = format!("table:{}", path.display());
        Ok(f)
    }

    /// Arbitrary evaluator; derivatives fall back to finite differences.
    pub fn from_fn(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: FinalKind::Custom(Arc::new(f)),
            declared_sp_order: 2,
            label: label.into(),
        }
    }

    pub fn with_declared_order(mut self, order: u8) -> Result<Self> {
        if order != 2 && order != 4 {
            return Err(invalid(format!("declared SP order must be 2 or 4, got {order}")));
        }
        self.declared_sp_order = order;
        Ok(self)
    }

    pub fn declared_sp_order(&self) -> u8 {
        self.declared_sp_order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, r: f64) -> f64 {
        match &self.kind {
            FinalKind::Exp { scale, rate } => scale * (rate * r).exp(),
            FinalKind::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * r + a),
            FinalKind::Table(t) => t.eval(r),
            FinalKind::Mixture(parts) => parts.iter().map(|(w, f)| w * f.eval(r)).sum(),
            FinalKind::Custom(f) => f(r),
        }
    }

    /// True when [`FinalPotential::derivative`] is exact rather than a finite difference.
    pub fn has_analytic_derivatives(&self) -> bool {
        match &self.kind {
            FinalKind::Exp { .. } | FinalKind::Polynomial(_) => true,
            FinalKind::Mixture(parts) => parts.iter().all(|(_, f)| f.has_analytic_derivatives()),
            FinalKind::Table(_) | FinalKind::Custom(_) => false,
        }
    }

    /// d^order/dR^order φ(R).
    pub fn derivative(&self, r: f64, order: u8) -> f64 {
        if order == 0 {
            return self.eval(r);
        }
        match &self.kind {
            FinalKind::Exp { scale, rate } => scale * rate.powi(order as i32) * (rate * r).exp(),
            FinalKind::Polynomial(c) => {
                let n = order as usize;
                let mut acc = 0.0;
                for (deg, &a) in c.iter().enumerate().skip(n).rev() {
                    let falling: f64 = ((deg - n + 1)..=deg).map(|m| m as f64).product();
                    acc = acc * r + a * falling;
                }
                acc
            }
            FinalKind::Mixture(parts) => parts.iter().map(|(w, f)| w * f.derivative(r, order)).sum(),
            FinalKind::Table(_) | FinalKind::Custom(_) => central_difference(|x| self.eval(x), r, order),
        }
    }

    pub fn positivity_report(&self, k: u8, grid: &[f64]) -> Result<PositivityReport> {
        strict_positivity_report(|x| self.eval(x), k, grid)
    }

    /// Fails with [`Error::Precondition`] unless φ passes SP{k} on `grid`.
    pub fn require_sp(&self, k: u8, grid: &[f64]) -> Result<PositivityReport> {
        let report = self.positivity_report(k, grid)?;
        if !report.passed {
            let order = report
                .min_derivative_value
                .iter()
                .position(|&v| !(v > super::numeric::POSITIVITY_TOLERANCE))
                .unwrap_or(0);
            return Err(Error::Precondition(format!(
                "final potential {} is not SP{{{k}}}: derivative of order {order} reaches {:.3e}",
                self.label, report.min_derivative_value[order]
            )));
        }
        Ok(report)
    }
}

#[derive(Clone, Debug)]
struct LogLinearTable {
    knots: Vec<f64>,
    logs: Vec<f64>,
}

impl LogLinearTable {
    fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("table final needs at least two points"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(invalid(format!("duplicate regret {} in table", w[0].0)));
            }
            if !(w[1].1 > w[0].1) {
                return Err(invalid(format!(
                    "table must be strictly increasing: value {} at R={} after {}",
                    w[1].1, w[1].0, w[0].1
                )));
            }
        }
        if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.0.is_finite() || !p.1.is_finite()) {
            return Err(invalid(format!("table values must be positive and finite, got {} at R={}", p.1, p.0)));
        }
        let slopes: Vec<f64> = points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        for (i, w) in slopes.windows(2).enumerate() {
            if w[1] < w[0] {
                return Err(invalid(format!(
                    "table must be convex: slope drops from {} to {} at R={}",
                    w[0],
                    w[1],
                    points[i + 1].0
                )));
            }
        }
        Ok(Self {
            knots: points.iter().map(|p| p.0).collect(),
            logs: points.iter().map(|p| p.1.ln()).collect(),
        })
    }

    fn eval(&self, r: f64) -> f64 {
        let n = self.knots.len();
        let seg = match self.knots.partition_point(|&k| k <= r) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        };
        let (x0, x1) = (self.knots[seg], self.knots[seg + 1]);
        let (y0, y1) = (self.logs[seg], self.logs[seg + 1]);
        (y0 + (y1 - y0) * (r - x0) / (x1 - x0)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let p = FinalPotential::polynomial(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // 1 + 2R + 3R² + 4R³
        assert_eq!(p.eval(2.0), 1.0 + 4.0 + 12.0 + 32.0);
        assert_eq!(p.derivative(2.0, 1), 2.0 + 12.0 + 48.0);
        assert_eq!(p.derivative(2.0, 2), 6.0 + 48.0);
        assert_eq!(p.derivative(2.0, 3), 24.0);
        assert_eq!(p.derivative(2.0, 4), 0.0);
    }

    #[test]
    fn mixture_is_linear() {
        let m = FinalPotential::mixture(vec![
            (0.3, FinalPotential::exp()),
            (0.7, FinalPotential::scaled_exp(1.0, 0.5).unwrap()),
        ])
        .unwrap();
        let r = 0.4;
        assert_relative_eq!(m.eval(r), 0.3 * r.exp() + 0.7 * (0.5 * r).exp(), max_relative = 1e-15);
        assert_relative_eq!(
            m.derivative(r, 3),
            0.3 * r.exp() + 0.7 * 0.125 * (0.5 * r).exp(),
            max_relative = 1e-15
        );
        assert!(m.has_analytic_derivatives());
        assert_eq!(m.declared_sp_order(), 4);
    }

    #[test]
    fn table_validation() {
        assert!(FinalPotential::table(vec![(0.0, 1.0)]).is_err());
        assert!(FinalPotential::table(vec![(0.0, 1.0), (1.0, 0.5)]).is_err());
        // concave data
        assert!(FinalPotential::table(vec![(0.0, 1.0), (1.0, 3.0), (2.0, 4.0)]).is_err());
        assert!(FinalPotential::table(vec![(0.0, -1.0), (1.0, 3.0)]).is_err());
        let t = FinalPotential::table(vec![(-1.0, (-1.0f64).exp()), (0.0, 1.0), (1.0, 1.0f64.exp())]).unwrap();
        assert_relative_eq!(t.eval(0.5), 0.5f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(t.eval(3.0), 3.0f64.exp(), max_relative = 1e-12);
        assert_relative_eq!(t.eval(-2.5), (-2.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn table_from_csv_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("final.csv");
        std::fs::write(&path, "R,value\n-1,0.5\n0,1\n1,2\n2,4\n").unwrap();
        let t = FinalPotential::table_from_csv(&path).unwrap();
        assert_relative_eq!(t.eval(1.5), 8f64.sqrt(), max_relative = 1e-12);
        assert!(t.require_sp(2, &default_sp_grid()).is_ok());
    }

    #[test]
    fn require_sp_rejects_identity() {
        let f = FinalPotential::from_fn("identity", |r| r);
        let err = f.require_sp(2, &[-1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
