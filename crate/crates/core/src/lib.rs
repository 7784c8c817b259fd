//! Numerical laboratory for saddle-point escape in variational quantum
//! circuits.
//!
//! The crate simulates layered parameterized circuits on dense statevectors,
//! differentiates their expectation-value losses with the parameter-shift
//! rule, and runs plain, Gaussian-perturbed and shot-noise gradient descent
//! on the resulting landscapes. [`analysis`] collects the statistics and
//! closed-form heuristics used to interpret the runs, and [`experiment`]
//! drives named, seed-deterministic batch experiments that emit CSV.
//!
//! ```
//! use vqa_lab::circuit::strongly_entangling_layout;
//! use vqa_lab::gradient::{gradient_exact, loss};
//! use vqa_lab::hamiltonian::PauliSum;
//!
//! let layout = strongly_entangling_layout(4, 2)?;
//! let h = PauliSum::sum_z(4)?;
//! let theta = vec![0.0; layout.n_params()];
//! assert_eq!(loss(&layout, &h, &theta)?, 4.0);
//! assert!(gradient_exact(&layout, &h, &theta)?.norm() < 1e-12);
//! # Ok::<(), vqa_lab::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod circuit;
mod error;
pub mod experiment;
pub mod gradient;
pub mod hamiltonian;
pub mod optimizer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
