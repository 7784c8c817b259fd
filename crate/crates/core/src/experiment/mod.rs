//! Named, seed-deterministic batch experiments.
//!
//! A run grid is built from the config (sweep values times `n_runs`, plus
//! experiment-specific extras), every run gets its own seed from
//! [`run_seed`], runs execute on the ambient rayon pool, and results are
//! collected in run order so the rendered CSV never depends on scheduling.
//!
//! Each start point has a reference loss, the terminal loss of noiseless GD
//! from it with the base `eta` and `max_steps`. A run *escapes* when its
//! minimum recorded loss drops below `reference - 0.5`, and it *converges* at
//! the first step with loss at or below `L_opt + 0.05 * gap`, where `gap` is
//! `reference - L_opt` (or `L(theta0) - L_opt` when the reference already
//! sits within 0.5 of the optimum). Both levels are mapped through the
//! depolarizing transform of the run.

mod config;
mod trapped;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::simulate_linear_sgd;
use crate::circuit::AnsatzLayout;
use crate::error::{Error, Result};
use crate::gradient::loss;
use crate::hamiltonian::PauliSum;
use crate::optimizer::{depolarizing_factor, run, Method, OptimizerConfig, StepRecord};

pub use config::{
    ExperimentConfig, ExperimentKind, InitialPoint, LinearModelConfig, Sweep, SweepParameter,
    BUILTIN_SUM_Z,
};
pub use trapped::{
    find_trapped_seeds, run_seed, search_trapped, uniform_point, TrapSearch, TrappedSeed,
};

/// Loss drop below the reference that counts as an escape.
pub const ESCAPE_MARGIN: f64 = 0.5;

/// Fraction of the gap left when a run counts as converged.
pub const CONVERGENCE_FRACTION: f64 = 0.05;

pub const TRAJECTORIES_HEADER: &str = "run_id,step,loss,grad_norm";
pub const SUMMARY_HEADER: &str =
    "run_id,method,r,n_shots,eta,q,terminal_loss,terminal_class,escaped,steps_to_converge";

/// Outcome of one run. Failed runs carry `error` and an empty trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: usize,
    pub method: &'static str,
    pub r: f64,
    pub n_shots: Option<u64>,
    pub eta: f64,
    pub q: f64,
    pub terminal_loss: Option<f64>,
    pub terminal_class: &'static str,
    pub escaped: Option<bool>,
    pub steps_to_converge: Option<usize>,
    pub escape_threshold: f64,
    pub trajectory: Vec<StepRecord>,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    /// Global minimum of the noiseless loss.
    pub opt_loss: f64,
    pub runs: Vec<RunSummary>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl ExperimentOutput {
    pub fn n_failed(&self) -> usize {
        self.runs.iter().filter(|r| r.failed()).count()
    }

    pub fn all_failed(&self) -> bool {
        self.n_failed() == self.runs.len()
    }

    pub fn trajectories_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TRAJECTORIES_HEADER);
        out.push('\n');
        for run in &self.runs {
            for s in &run.trajectory {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    run.run_id,
                    s.step,
                    fmt_f64(s.loss),
                    fmt_f64(s.grad_norm)
                );
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SUMMARY_HEADER);
        out.push('\n');
        for run in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                run.run_id,
                run.method,
                fmt_f64(run.r),
                run.n_shots.map(|n| n.to_string()).unwrap_or_default(),
                fmt_f64(run.eta),
                fmt_f64(run.q),
                run.terminal_loss.map(fmt_f64).unwrap_or_default(),
                run.terminal_class,
                run.escaped.map(|e| e.to_string()).unwrap_or_default(),
                run.steps_to_converge
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
            );
        }
        out
    }
}

struct Start {
    theta0: Vec<f64>,
    /// Noiseless GD terminal loss; `None` means compute it with the run.
    reference: Option<f64>,
}

struct Plan {
    run_id: usize,
    optimizer: OptimizerConfig,
    start: usize,
}

struct Landscape<'a> {
    layout: &'a AnsatzLayout,
    h: &'a PauliSum,
    opt_loss: f64,
    base: &'a OptimizerConfig,
}

impl Landscape<'_> {
    fn reference_config(&self) -> OptimizerConfig {
        OptimizerConfig::gd(self.base.eta, self.base.max_steps)
    }

    fn reference_loss(&self, theta0: &[f64]) -> Result<f64> {
        Ok(run(self.layout, self.h, theta0, &self.reference_config(), None)?.terminal_loss())
    }

    /// A reference that diverges is left for each run to rediscover and report.
    fn shared_reference(&self, theta0: &[f64]) -> Result<Option<f64>> {
        match self.reference_loss(theta0) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Diverged { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn execute(&self, plan: &Plan, start: &Start) -> Result<RunSummary> {
        let cfg = &plan.optimizer;
        let mut summary = RunSummary {
            run_id: plan.run_id,
            method: cfg.method.as_str(),
            r: cfg.r,
            n_shots: (cfg.method == Method::ShotGd).then_some(cfg.n_shots),
            eta: cfg.eta,
            q: cfg.q,
            terminal_loss: None,
            terminal_class: "failed",
            escaped: None,
            steps_to_converge: None,
            escape_threshold: f64::NAN,
            trajectory: Vec::new(),
            error: None,
        };
        let outcome = run(self.layout, self.h, &start.theta0, cfg, None).and_then(|rec| {
            let own_reference = cfg.method == Method::Gd
                && cfg.q == 0.0
                && cfg.eta == self.base.eta
                && cfg.max_steps == self.base.max_steps;
            let reference = match start.reference {
                Some(v) => v,
                None if own_reference => rec.terminal_loss(),
                None => self.reference_loss(&start.theta0)?,
            };
            Ok((rec, reference))
        });
        let (rec, reference) = match outcome {
            Ok(pair) => pair,
            Err(e @ Error::Diverged { .. }) => {
                summary.error = Some(e.to_string());
                return Ok(summary);
            }
            Err(e) => return Err(e),
        };
        let mut gap = reference - self.opt_loss;
        if gap < ESCAPE_MARGIN {
            gap = loss(self.layout, self.h, &start.theta0)? - self.opt_loss;
        }
        let f = depolarizing_factor(cfg.q, self.layout.n_layers())?;
        let shift = (1.0 - f) * self.h.normalized_trace();
        let threshold = f * (reference - ESCAPE_MARGIN) + shift;
        let target = f * (self.opt_loss + CONVERGENCE_FRACTION * gap) + shift;

        summary.terminal_loss = Some(rec.terminal_loss());
        summary.terminal_class = rec.terminal_classification.as_str();
        summary.escaped = Some(rec.min_loss() < threshold);
        summary.steps_to_converge = rec.first_step_below(target);
        summary.escape_threshold = threshold;
        summary.trajectory = rec.steps;
        Ok(summary)
    }
}

fn plan_grid(
    config: &ExperimentConfig,
    first_id: usize,
    start_of: impl Fn(usize) -> usize,
) -> Vec<Plan> {
    let mut plans = Vec::new();
    let mut id = first_id;
    let grid: Vec<OptimizerConfig> = if config.experiment == ExperimentKind::CriticalNoiseSweep {
        let rs = config.r_grid.clone().unwrap_or_default();
        config
            .optimizer_grid()
            .into_iter()
            .flat_map(|cfg| {
                rs.iter()
                    .map(move |&r| OptimizerConfig { r, ..cfg.clone() })
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        config.optimizer_grid()
    };
    for cfg in grid {
        for _ in 0..config.n_runs {
            let optimizer = OptimizerConfig {
                seed: run_seed(config.master_seed, id as u64),
                ..cfg.clone()
            };
            plans.push(Plan {
                run_id: id,
                optimizer,
                start: start_of(id),
            });
            id += 1;
        }
    }
    plans
}

fn resolve_start(config: &ExperimentConfig, land: &Landscape<'_>) -> Result<Start> {
    let p = land.layout.n_params();
    match &config.theta0 {
        InitialPoint::Explicit { values } => {
            if values.len() != p {
                return Err(Error::Config(format!(
                    "theta0 has {} values, the layout has {p} parameters",
                    values.len()
                )));
            }
            Ok(Start {
                reference: land.shared_reference(values)?,
                theta0: values.clone(),
            })
        }
        InitialPoint::Random { seed } => {
            let theta0 = uniform_point(p, run_seed(*seed, 0));
            Ok(Start {
                reference: land.shared_reference(&theta0)?,
                theta0,
            })
        }
        InitialPoint::Trapped {
            candidates,
            seed,
            pick,
        } => {
            let search = TrapSearch {
                candidates: *candidates,
                seed: *seed,
                eta: land.base.eta,
                max_steps: land.base.max_steps,
            };
            let found = search_trapped(land.layout, land.h, &search)?;
            let n_found = found.len();
            let hit = found.into_iter().nth(*pick).ok_or_else(|| {
                Error::Config(format!(
                    "theta0 asks for trapped seed #{pick} but {candidates} candidates gave {n_found}"
                ))
            })?;
            Ok(Start {
                theta0: hit.theta0,
                reference: Some(hit.saddle_loss),
            })
        }
    }
}

fn run_linear_model(config: &ExperimentConfig) -> ExperimentOutput {
    let lm = config.linear_model.clone().unwrap_or_default();
    let slope_norm = lm.c.iter().map(|c| c * c).sum::<f64>().sqrt();
    let plans = plan_grid(config, 0, |_| 0);
    let runs = plans
        .par_iter()
        .map(|plan| {
            let cfg = &plan.optimizer;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let losses =
                simulate_linear_sgd(lm.l0, cfg.eta, &lm.c, cfg.r, cfg.max_steps as u32, &mut rng);
            let trajectory: Vec<StepRecord> = losses
                .iter()
                .enumerate()
                .map(|(step, &loss)| StepRecord {
                    step,
                    loss,
                    grad_norm: slope_norm,
                })
                .collect();
            let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
            RunSummary {
                run_id: plan.run_id,
                method: "linear_sgd",
                r: cfg.r,
                n_shots: None,
                eta: cfg.eta,
                q: 0.0,
                terminal_loss: losses.last().copied(),
                terminal_class: "not_stationary",
                escaped: Some(min < 0.0),
                steps_to_converge: losses
                    .iter()
                    .position(|&l| l <= CONVERGENCE_FRACTION * lm.l0),
                escape_threshold: 0.0,
                trajectory,
                error: None,
            }
        })
        .collect();
    ExperimentOutput {
        kind: config.experiment,
        opt_loss: 0.0,
        runs,
    }
}

/// Runs every trajectory of a validated config on the current rayon pool.
///
/// Errors are config-level (bad Hamiltonian file, capacity, an empty trapped
/// search); a run that diverges is recorded as a failed row instead.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    if config.experiment == ExperimentKind::LinearModel {
        return Ok(run_linear_model(config));
    }
    let layout = config.layout()?;
    let h = config.observable()?;
    let land = Landscape {
        layout: &layout,
        h: &h,
        opt_loss: h.ground_energy()?,
        base: &config.optimizer,
    };

    let (starts, plans) = match config.experiment {
        ExperimentKind::SaddleCensus => {
            let InitialPoint::Random { seed } = config.theta0 else {
                unreachable!("validated census start")
            };
            let plans = plan_grid(config, 0, |id| id);
            let starts = plans
                .iter()
                .map(|plan| Start {
                    theta0: uniform_point(layout.n_params(), run_seed(seed, plan.run_id as u64)),
                    reference: None,
                })
                .collect();
            (starts, plans)
        }
        ExperimentKind::Trajectories if config.optimizer.method != Method::Gd => {
            let start = resolve_start(config, &land)?;
            let baseline = OptimizerConfig {
                seed: run_seed(config.master_seed, 0),
                ..OptimizerConfig::gd(config.optimizer.eta, config.optimizer.max_steps)
            };
            let mut plans = vec![Plan {
                run_id: 0,
                optimizer: baseline,
                start: 0,
            }];
            plans.extend(plan_grid(config, 1, |_| 0));
            (vec![start], plans)
        }
        _ => (
            vec![resolve_start(config, &land)?],
            plan_grid(config, 0, |_| 0),
        ),
    };

    let runs = plans
        .par_iter()
        .map(|plan| land.execute(plan, &starts[plan.start]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput {
        kind: config.experiment,
        opt_loss: land.opt_loss,
        runs,
    })
}
