use serde::{Deserialize, Serialize};

use super::{annotation_complexity, run_seeds, ComplexityConfig, HarnessError, RunSetup};
use crate::environment::PreferenceSource;
use crate::preference::condorcet_winner;

/// Least-squares fit of `y = a x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub a: f64,
    pub b: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

fn least_squares(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let b = my - a * mx;
    let rss = points.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum();
    LineFit { a, b, rss }
}

/// Complexity against `k` fitted as `a k + b` and as `a k^2 + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub linear: LineFit,
    pub quadratic: LineFit,
}

impl GrowthFit {
    pub fn prefers_quadratic(&self) -> bool {
        self.quadratic.rss < self.linear.rss
    }

    pub fn preferred(&self) -> &'static str {
        if self.prefers_quadratic() {
            "quadratic"
        } else {
            "linear"
        }
    }
}

/// Fits both growth models to `(k, complexity)` points.
pub fn fit_growth(points: &[(f64, f64)]) -> Result<GrowthFit, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::Config(format!("need at least 2 points to fit, got {}", points.len())));
    }
    let squared: Vec<(f64, f64)> = points.iter().map(|&(k, y)| (k * k, y)).collect();
    Ok(GrowthFit { linear: least_squares(points), quadratic: least_squares(&squared) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub k: usize,
    pub complexity: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub fit: GrowthFit,
}

/// Complexity of one configuration across sources of growing size.
/// Points that were not identified are left out of the fit with a warning.
pub fn k_scaling(
    setup: &RunSetup,
    sources: &[&dyn PreferenceSource],
    cfg: &ComplexityConfig,
    master: u64,
) -> Result<ScalingReport, HarnessError> {
    let mut ks: Vec<usize> = sources.iter().map(|s| s.k()).collect();
    ks.dedup();
    if ks.len() < 4 {
        return Err(HarnessError::Config("need at least 4 distinct k values".into()));
    }
    let mut points = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        let truth = condorcet_winner(&src.matrix()).ok_or(HarnessError::NoTruth)?;
        let traces = run_seeds(*src, None, setup, cfg, master, i as u64)?;
        let c = annotation_complexity(&traces, truth, cfg.delta_acc)?;
        if c.last_crossing.is_none() {
            log::warn!("k = {}: not identified within {} annotations; excluded from fit", src.k(), cfg.max_budget);
        }
        points.push(ScalingPoint { k: src.k(), complexity: c.last_crossing });
    }
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.complexity.map(|c| (p.k as f64, c as f64)))
        .collect();
    Ok(ScalingReport { fit: fit_growth(&data)?, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_models_fit_exactly() {
        let quad: Vec<(f64, f64)> = [4.0, 8.0, 12.0, 16.0].iter().map(|&k| (k, 3.0 * k * k + 7.0)).collect();
        let f = fit_growth(&quad).unwrap();
        assert!(f.quadratic.rss < 1e-9);
        assert!((f.quadratic.a - 3.0).abs() < 1e-9);
        assert!(f.prefers_quadratic());
        let lin: Vec<(f64, f64)> = [4.0, 8.0, 12.0, 16.0].iter().map(|&k| (k, 50.0 * k + 2.0)).collect();
        let f = fit_growth(&lin).unwrap();
        assert!(f.linear.rss < 1e-9);
        assert_eq!(f.preferred(), "linear");
    }
}
