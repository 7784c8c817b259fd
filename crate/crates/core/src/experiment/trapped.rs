use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::circuit::AnsatzLayout;
use crate::error::{Error, Result};
use crate::hamiltonian::PauliSum;
use crate::optimizer::{run, Method, OptimizerConfig, TerminalClass};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index` under `master_seed`: `splitmix64(master ^
/// splitmix64(run_index))`. Each run's seed depends only on its own index.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(run_index))
}

/// Uniform point in `[0, 2pi)^n_params`.
pub fn uniform_point(n_params: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_params).map(|_| rng.random_range(0.0..TAU)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrappedSeed {
    /// Index of the candidate start within the search.
    pub candidate: usize,
    pub theta0: Vec<f64>,
    pub saddle_loss: f64,
    pub min_eigenvalue: f64,
    pub grad_norm: f64,
}

/// Noiseless search settings: `candidates` uniform starts, each descended
/// with plain GD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapSearch {
    pub candidates: usize,
    pub seed: u64,
    pub eta: f64,
    pub max_steps: usize,
}

/// Runs GD from every candidate start and keeps those whose terminal point
/// is a strict saddle, in candidate order.
pub fn search_trapped(
    layout: &AnsatzLayout,
    h: &PauliSum,
    search: &TrapSearch,
) -> Result<Vec<TrappedSeed>> {
    let cfg = OptimizerConfig::gd(search.eta, search.max_steps);
    let hits: Vec<Option<TrappedSeed>> = (0..search.candidates)
        .into_par_iter()
        .map(|i| {
            let theta0 = uniform_point(layout.n_params(), run_seed(search.seed, i as u64));
            let rec = run(layout, h, &theta0, &cfg, None)?;
            Ok(
                (rec.terminal_classification == TerminalClass::StrictSaddle).then(|| TrappedSeed {
                    candidate: i,
                    saddle_loss: rec.terminal_loss(),
                    min_eigenvalue: rec.terminal_min_eigenvalue.unwrap_or(f64::NAN),
                    grad_norm: rec.terminal_grad_norm(),
                    theta0,
                }),
            )
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().collect())
}

/// Trapped starts for a config: `n_runs` candidates drawn under
/// `master_seed`, descended with the configured (noiseless) optimizer.
pub fn find_trapped_seeds(config: &ExperimentConfig) -> Result<Vec<TrappedSeed>> {
    let opt = &config.optimizer;
    if opt.method != Method::Gd || opt.q != 0.0 {
        return Err(Error::Config(
            "the trapped-seed search needs a noiseless gd optimizer".into(),
        ));
    }
    let layout = config.layout()?;
    let h = config.observable()?;
    let search = TrapSearch {
        candidates: config.n_runs,
        seed: config.master_seed,
        eta: opt.eta,
        max_steps: opt.max_steps,
    };
    search_trapped(&layout, &h, &search)
}
