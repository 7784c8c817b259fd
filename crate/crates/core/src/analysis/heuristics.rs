//! Closed-form predictions for noisy descent: kernel-regime convergence time,
//! critical noise scales, optimal shot counts and the linear toy model.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Slope of the linear fit of critical noise against `eta * delta_L` for the
/// four-qubit reference landscape.
pub const DEFAULT_C_EPS: f64 = 0.0521404;

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!(
            "{name} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

/// Parameters of the frozen-kernel model: kernel `k`, initial squared
/// residual, learning rate and the standard deviation of the per-step
/// parameter noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QntkParams {
    pub k: f64,
    pub eps0_sq: f64,
    pub eta: f64,
    pub noise_eps: f64,
}

impl QntkParams {
    pub fn new(k: f64, eps0_sq: f64, eta: f64, noise_eps: f64) -> Result<Self> {
        positive("K", k)?;
        positive("initial squared residual", eps0_sq)?;
        positive("eta", eta)?;
        if !(noise_eps >= 0.0) {
            return Err(Error::Domain(format!(
                "noise must be nonnegative, got {noise_eps}"
            )));
        }
        if eta * k >= 1.0 {
            return Err(Error::Regime(format!(
                "eta * K = {} must be below 1",
                eta * k
            )));
        }
        Ok(Self {
            k,
            eps0_sq,
            eta,
            noise_eps,
        })
    }

    /// Stationary mean squared residual `eps^2 / (eta (2 - eta K))`.
    pub fn stationary_variance(&self) -> f64 {
        self.noise_eps.powi(2) / (self.eta * (2.0 - self.eta * self.k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QntkEstimate {
    /// `ln(eps / sqrt(2 e0 eta - e0 eta^2 K + eps^2)) / ln(1 - eta K)`.
    Full,
    /// `e0 / (eps^2 K)`.
    SmallEta,
}

pub fn qntk_convergence_time(p: &QntkParams, estimate: QntkEstimate) -> Result<f64> {
    if p.eta * p.k >= 1.0 {
        return Err(Error::Regime(format!(
            "eta * K = {} must be below 1",
            p.eta * p.k
        )));
    }
    if !(p.noise_eps > 0.0) {
        return Err(Error::Domain(
            "convergence time needs positive noise".into(),
        ));
    }
    let eps2 = p.noise_eps * p.noise_eps;
    Ok(match estimate {
        QntkEstimate::SmallEta => p.eps0_sq / (eps2 * p.k),
        QntkEstimate::Full => {
            let inner = 2.0 * p.eps0_sq * p.eta - p.eps0_sq * p.eta * p.eta * p.k + eps2;
            (p.noise_eps / inner.sqrt()).ln() / (1.0 - p.eta * p.k).ln()
        }
    })
}

/// Noise-averaged squared residual after `t` steps:
/// `(1 - eta K)^{2t} (e0 - S) + S` with `S` the stationary variance.
pub fn qntk_residual_variance(p: &QntkParams, t: u32) -> f64 {
    let s = p.stationary_variance();
    (1.0 - p.eta * p.k).powi(2 * t as i32) * (p.eps0_sq - s) + s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalNoiseModel {
    /// `sqrt(4 eta delta_L)`.
    RandomWalk,
    /// `c_eps eta delta_L`.
    Phenomenological { c_eps: f64 },
}

impl Default for CriticalNoiseModel {
    fn default() -> Self {
        CriticalNoiseModel::Phenomenological {
            c_eps: DEFAULT_C_EPS,
        }
    }
}

pub fn critical_noise(eta: f64, delta_l: f64, model: CriticalNoiseModel) -> Result<f64> {
    positive("eta", eta)?;
    positive("delta_L", delta_l)?;
    match model {
        CriticalNoiseModel::RandomWalk => Ok((4.0 * eta * delta_l).sqrt()),
        CriticalNoiseModel::Phenomenological { c_eps } => {
            positive("c_eps", c_eps)?;
            Ok(c_eps * eta * delta_l)
        }
    }
}

/// `N = (c_eta / c_eps)^2 eta^{2 - 2 d} delta_L^{-2 d}` with `d = delta_cri`.
pub fn optimal_shots(
    c_eta: f64,
    c_eps: f64,
    delta_l: f64,
    delta_cri: f64,
    eta: f64,
) -> Result<f64> {
    for (name, v) in [
        ("c_eta", c_eta),
        ("c_eps", c_eps),
        ("delta_L", delta_l),
        ("delta_cri", delta_cri),
        ("eta", eta),
    ] {
        positive(name, v)?;
    }
    let c_n = (c_eta / c_eps).powi(2);
    Ok(c_n * eta.powf(2.0 - 2.0 * delta_cri) * delta_l.powf(-2.0 * delta_cri))
}

fn sum_sq(c: &[f64]) -> f64 {
    c.iter().map(|x| x * x).sum()
}

/// Mean loss of descent on `L = c . theta + b` after `t` steps; the
/// zero-mean noise leaves it at `L0 - eta t |c|^2`.
pub fn linear_model_mean_loss(l0: f64, eta: f64, c: &[f64], t: u32) -> f64 {
    l0 - eta * t as f64 * sum_sq(c)
}

/// Steps for noiseless descent to bring the linear loss from `L0` to zero.
pub fn linear_model_convergence_time(l0: f64, eta: f64, c: &[f64]) -> Result<f64> {
    positive("L0", l0)?;
    positive("eta", eta)?;
    positive("|c|^2", sum_sq(c))?;
    Ok(l0 / (eta * sum_sq(c)))
}

/// `sqrt(eta L0)`: noise whose accumulated spread at the noiseless
/// convergence time matches the loss decrease.
pub fn linear_model_critical_noise(eta: f64, l0: f64) -> Result<f64> {
    positive("eta", eta)?;
    positive("L0", l0)?;
    Ok((eta * l0).sqrt())
}

/// Simulates `theta(t+1) = theta(t) - eta c + xi`, `xi ~ N(0, sigma^2)` per
/// coordinate, and returns the loss at `t = 0..=t_max`.
pub fn simulate_linear_sgd<R: Rng + ?Sized>(
    l0: f64,
    eta: f64,
    c: &[f64],
    sigma: f64,
    t_max: u32,
    rng: &mut R,
) -> Vec<f64> {
    let drift = eta * sum_sq(c);
    let mut out = Vec::with_capacity(t_max as usize + 1);
    let mut l = l0;
    out.push(l);
    for _ in 0..t_max {
        let noise: f64 = c
            .iter()
            .map(|ci| ci * sigma * rng.sample::<f64, _>(StandardNormal))
            .sum();
        l += noise - drift;
        out.push(l);
    }
    out
}
