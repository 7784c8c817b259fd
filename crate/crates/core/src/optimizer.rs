//! Gradient descent, Gaussian-perturbed gradient descent and shot-noise
//! gradient descent, with trajectory recording and terminal classification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::AnsatzLayout;
use crate::error::{Error, Result};
use crate::gradient::{gradient_exact, gradient_shots, hessian_exact, loss};
use crate::hamiltonian::{operator_norm, PauliSum, MAX_EXACT_NORM_QUBITS};

/// Eigenvalue threshold separating minima, strict saddles and flat points.
pub const CLASSIFY_TAU: f64 = 1e-6;

/// Gradient-norm tolerance for classification when no stopping rule is given.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Pgd,
    ShotGd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Pgd => "pgd",
            Method::ShotGd => "shot_gd",
        }
    }
}

fn default_max_steps() -> usize {
    400
}

fn default_eta() -> f64 {
    0.05
}

fn default_shots() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Perturbation scale; each coordinate gets variance `r^2 / p`.
    #[serde(default)]
    pub r: f64,
    #[serde(default = "default_shots")]
    pub n_shots: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Global depolarizing strength applied after every layer.
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub seed: u64,
    /// Store a full parameter snapshot every this many steps. `None` keeps
    /// only the terminal point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

impl OptimizerConfig {
    pub fn gd(eta: f64, max_steps: usize) -> Self {
        Self {
            method: Method::Gd,
            eta,
            r: 0.0,
            n_shots: default_shots(),
            max_steps,
            q: 0.0,
            seed: 0,
            snapshot_every: None,
        }
    }

    pub fn pgd(eta: f64, r: f64, max_steps: usize, seed: u64) -> Self {
        Self {
            method: Method::Pgd,
            r,
            seed,
            ..Self::gd(eta, max_steps)
        }
    }

    pub fn shot_gd(eta: f64, n_shots: u64, max_steps: usize, seed: u64) -> Self {
        Self {
            method: Method::ShotGd,
            n_shots,
            seed,
            ..Self::gd(eta, max_steps)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Config(format!(
                "eta must be finite and nonnegative, got {}",
                self.eta
            )));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::Config(format!(
                "r must be finite and nonnegative, got {}",
                self.r
            )));
        }
        if self.method == Method::Pgd && self.r <= 0.0 {
            return Err(Error::Config("pgd requires r > 0".into()));
        }
        if self.method == Method::ShotGd && self.n_shots == 0 {
            return Err(Error::Config("shot_gd requires n_shots >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::Config(format!(
                "q must lie in [0, 1], got {}",
                self.q
            )));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot_every must be positive".into()));
        }
        Ok(())
    }
}

/// Fires at an epsilon-second-order stationary point:
/// `|grad| <= epsilon` and `lambda_min >= -sqrt(rho * epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule {
    pub epsilon: f64,
    pub rho: f64,
}

impl StoppingRule {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(rho > 0.0) {
            return Err(Error::Domain(
                "stopping rule needs epsilon > 0 and rho > 0".into(),
            ));
        }
        Ok(Self { epsilon, rho })
    }

    pub fn is_satisfied(&self, grad_norm: f64, min_eigenvalue: f64) -> bool {
        grad_norm <= self.epsilon && min_eigenvalue >= -(self.rho * self.epsilon).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalClass {
    Minimum,
    StrictSaddle,
    Flat,
    NotStationary,
}

impl TerminalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalClass::Minimum => "minimum",
            TerminalClass::StrictSaddle => "strict_saddle",
            TerminalClass::Flat => "flat",
            TerminalClass::NotStationary => "not_stationary",
        }
    }

    pub fn from_min_eigenvalue(lambda_min: f64) -> Self {
        if lambda_min > CLASSIFY_TAU {
            TerminalClass::Minimum
        } else if lambda_min < -CLASSIFY_TAU {
            TerminalClass::StrictSaddle
        } else {
            TerminalClass::Flat
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    /// `(step, theta)` snapshots; always ends with the terminal point.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub terminal_theta: Vec<f64>,
    pub terminal_classification: TerminalClass,
    /// Smallest Hessian eigenvalue at the terminal point, when it was computed.
    pub terminal_min_eigenvalue: Option<f64>,
    pub seed: u64,
    pub config: OptimizerConfig,
}

impl RunRecord {
    pub fn terminal_loss(&self) -> f64 {
        self.steps
            .last()
            .expect("a run records at least one step")
            .loss
    }

    pub fn terminal_grad_norm(&self) -> f64 {
        self.steps
            .last()
            .expect("a run records at least one step")
            .grad_norm
    }

    pub fn min_loss(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.loss)
            .fold(f64::INFINITY, f64::min)
    }

    /// First step whose loss is at or below `target`.
    pub fn first_step_below(&self, target: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.loss <= target).map(|s| s.step)
    }
}

/// `theta - eta * grad`.
pub fn step_gd(theta: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    debug_assert_eq!(theta.len(), grad.len());
    theta.iter().zip(grad).map(|(t, g)| t - eta * g).collect()
}

/// `theta - eta * (grad + zeta)` with `zeta_i ~ N(0, r^2 / p)`.
pub fn step_pgd<R: Rng + ?Sized>(
    theta: &[f64],
    grad: &[f64],
    eta: f64,
    r: f64,
    rng: &mut R,
) -> Vec<f64> {
    debug_assert_eq!(theta.len(), grad.len());
    let sigma = r / (theta.len() as f64).sqrt();
    theta
        .iter()
        .zip(grad)
        .map(|(t, g)| {
            let z: f64 = rng.sample(StandardNormal);
            t - eta * (g + sigma * z)
        })
        .collect()
}

/// `(1 - q)^layers`, the contraction of a loss under `layers` global
/// depolarizing channels.
pub fn depolarizing_factor(q: f64, n_layers: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "depolarizing q must lie in [0, 1], got {q}"
        )));
    }
    if n_layers == 0 {
        return Err(Error::Domain("at least one noisy layer is required".into()));
    }
    Ok((1.0 - q).powi(n_layers as i32))
}

/// Loss after a global depolarizing channel follows each of `n_layers`
/// layers: `(1-q)^L loss + (1 - (1-q)^L) Tr(H) / 2^n`.
pub fn depolarized_loss(
    loss_value: f64,
    h: &PauliSum,
    q: f64,
    n_layers: usize,
    n_qubits: usize,
) -> Result<f64> {
    if n_qubits != h.n_qubits() {
        return Err(Error::Dimension(format!(
            "observable has {} qubits, got {n_qubits}",
            h.n_qubits()
        )));
    }
    let f = depolarizing_factor(q, n_layers)?;
    Ok(f * loss_value + (1.0 - f) * h.normalized_trace())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessBounds {
    pub beta: f64,
    pub rho: f64,
    pub eta_recommended: f64,
    pub observable_norm: f64,
    pub n_params: usize,
}

/// Gradient-Lipschitz and Hessian-Lipschitz constants for a layout:
/// `beta = 4 p |O| g^2` and `rho = 8 p^{3/2} |O| g^3`, `g` the largest
/// generator norm.
pub fn smoothness_bounds(layout: &AnsatzLayout, h: &PauliSum) -> Result<SmoothnessBounds> {
    let norm = operator_norm(h, h.n_qubits() <= MAX_EXACT_NORM_QUBITS)?;
    let p = layout.n_params() as f64;
    let g = layout.max_generator_norm();
    let beta = 4.0 * p * norm * g * g;
    let rho = 8.0 * p.powf(1.5) * norm * g.powi(3);
    Ok(SmoothnessBounds {
        beta,
        rho,
        eta_recommended: 1.0 / beta,
        observable_norm: norm,
        n_params: layout.n_params(),
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs one trajectory from `theta0`.
///
/// The recorded loss and gradient norm are always exact (depolarized when
/// `q > 0`), so runs are comparable across methods; only the update of
/// `shot_gd` sees sampled gradients.
pub fn run(
    layout: &AnsatzLayout,
    h: &PauliSum,
    theta0: &[f64],
    cfg: &OptimizerConfig,
    stop: Option<StoppingRule>,
) -> Result<RunRecord> {
    cfg.validate()?;
    if theta0.len() != layout.n_params() {
        return Err(Error::Dimension(format!(
            "layout has {} parameters, theta0 has {}",
            layout.n_params(),
            theta0.len()
        )));
    }
    let scale = depolarizing_factor(cfg.q, layout.n_layers())?;
    let shift = (1.0 - scale) * h.normalized_trace();
    let snapshot_every = cfg.snapshot_every.unwrap_or(cfg.max_steps.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut theta = theta0.to_vec();
    let mut steps = Vec::with_capacity(cfg.max_steps + 1);
    let mut snapshots = Vec::new();
    let mut stopped_min_eig = None;

    for t in 0..=cfg.max_steps {
        let raw = loss(layout, h, &theta).map_err(|_| Error::Diverged { step: t })?;
        let value = scale * raw + shift;
        if !value.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        let grad: Vec<f64> = gradient_exact(layout, h, &theta)?
            .values
            .into_iter()
            .map(|g| g * scale)
            .collect();
        let grad_norm = norm(&grad);
        steps.push(StepRecord {
            step: t,
            loss: value,
            grad_norm,
        });

        let last = t == cfg.max_steps;
        let mut fired = false;
        if let Some(rule) = stop {
            if grad_norm <= rule.epsilon {
                let lmin = hessian_exact(layout, h, &theta)?.min_eigenvalue() * scale;
                if rule.is_satisfied(grad_norm, lmin) {
                    fired = true;
                    stopped_min_eig = Some(lmin);
                }
            }
        }
        if (t % snapshot_every == 0 && t > 0) || last || fired {
            snapshots.push((t, theta.clone()));
        }
        if last || fired {
            break;
        }

        theta = match cfg.method {
            Method::Gd => step_gd(&theta, &grad, cfg.eta),
            Method::Pgd => step_pgd(&theta, &grad, cfg.eta, cfg.r, &mut rng),
            Method::ShotGd => {
                let sampled = gradient_shots(layout, h, &theta, cfg.n_shots, &mut rng)?;
                let g: Vec<f64> = sampled.values.iter().map(|g| g * scale).collect();
                step_gd(&theta, &g, cfg.eta)
            }
        };
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { step: t + 1 });
        }
    }

    let tol = stop.map_or(DEFAULT_STATIONARY_TOL, |s| s.epsilon);
    let terminal_grad = steps
        .last()
        .map_or(f64::INFINITY, |s: &StepRecord| s.grad_norm);
    let (terminal_classification, terminal_min_eigenvalue) = if terminal_grad <= tol {
        let lmin = match stopped_min_eig {
            Some(l) => l,
            None => hessian_exact(layout, h, &theta)?.min_eigenvalue() * scale,
        };
        (TerminalClass::from_min_eigenvalue(lmin), Some(lmin))
    } else {
        (TerminalClass::NotStationary, None)
    };

    Ok(RunRecord {
        steps,
        snapshots,
        terminal_theta: theta,
        terminal_classification,
        terminal_min_eigenvalue,
        seed: cfg.seed,
        config: cfg.clone(),
    })
}
