use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizer::RunRecord;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapeStats {
    pub n_runs: usize,
    pub n_escaped: usize,
    pub p_escape: f64,
    pub escape_threshold: f64,
    pub wilson_ci: (f64, f64),
}

impl EscapeStats {
    pub fn from_counts(n_escaped: usize, n_runs: usize, escape_threshold: f64) -> Result<Self> {
        if n_runs == 0 {
            return Err(Error::Domain(
                "escape statistics need at least one run".into(),
            ));
        }
        if n_escaped > n_runs {
            return Err(Error::Domain(format!(
                "{n_escaped} escapes out of {n_runs} runs"
            )));
        }
        Ok(Self {
            n_runs,
            n_escaped,
            p_escape: n_escaped as f64 / n_runs as f64,
            escape_threshold,
            wilson_ci: wilson_interval(n_escaped, n_runs),
        })
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

/// A run escapes when its lowest recorded loss drops below `threshold`.
pub fn escaped(record: &RunRecord, threshold: f64) -> bool {
    record.min_loss() < threshold
}

pub fn escape_probability(records: &[RunRecord], threshold: f64) -> Result<EscapeStats> {
    let n_escaped = records.iter().filter(|r| escaped(r, threshold)).count();
    EscapeStats::from_counts(n_escaped, records.len(), threshold)
}

/// `1 / (final - optimum)`.
pub fn performance_metric(final_loss: f64, opt_loss: f64) -> Result<f64> {
    if !(final_loss > opt_loss) {
        return Err(Error::Domain(format!(
            "final loss {final_loss} must exceed the optimum {opt_loss}"
        )));
    }
    Ok(1.0 / (final_loss - opt_loss))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// `y ~ prefactor / x^exponent`.
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.prefactor * x.powf(-self.exponent)
    }
}

/// Ordinary least squares of `ln y` against `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!(
            "{} x values, {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(Error::Domain(format!(
            "a power-law fit needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(
            "power-law data must be finite and strictly positive".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("x values must not all coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        exponent: -slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain(
            "spearman needs two equal-length samples of size >= 2".into(),
        ));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Domain(
            "spearman is undefined for a constant sample".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}
