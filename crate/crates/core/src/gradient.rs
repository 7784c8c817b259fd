//! Parameter-shift gradients and Hessians.
//!
//! Every parameter enters through a single `exp(-i theta A / 2)` rotation, so
//! the loss restricted to one parameter is `a + b cos(theta) + c sin(theta)`
//! and shifting by `±pi/2` gives the derivative exactly.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::circuit::AnsatzLayout;
use crate::error::{Error, Result};
use crate::hamiltonian::{expectation, measurement_group_count, sample_expectation, PauliSum};

/// Largest parameter count [`hessian_exact`] accepts.
pub const MAX_HESSIAN_PARAMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Exact,
    Shots(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub mode: GradientMode,
    /// Total measurement shots spent, zero for exact gradients.
    pub shots_used: u64,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianMatrix {
    pub entries: DMatrix<f64>,
    pub symmetrized: bool,
}

impl HessianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty Hessian")
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: &self.entries * factor,
            symmetrized: self.symmetrized,
        }
    }
}

fn check(layout: &AnsatzLayout, h: &PauliSum, theta: &[f64]) -> Result<()> {
    if layout.n_qubits() != h.n_qubits() {
        return Err(Error::Dimension(format!(
            "layout acts on {} qubits, observable on {}",
            layout.n_qubits(),
            h.n_qubits()
        )));
    }
    if theta.len() != layout.n_params() {
        return Err(Error::Dimension(format!(
            "layout has {} parameters, got {}",
            layout.n_params(),
            theta.len()
        )));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("parameters must be finite".into()));
    }
    Ok(())
}

/// `<0|U(theta)^dagger H U(theta)|0>`.
pub fn loss(layout: &AnsatzLayout, h: &PauliSum, theta: &[f64]) -> Result<f64> {
    check(layout, h, theta)?;
    expectation(h, &layout.prepare(theta)?)
}

fn shifted(theta: &[f64], shifts: &[(usize, f64)]) -> Vec<f64> {
    let mut t = theta.to_vec();
    for &(i, s) in shifts {
        t[i] += s;
    }
    t
}

pub fn gradient_exact(
    layout: &AnsatzLayout,
    h: &PauliSum,
    theta: &[f64],
) -> Result<GradientEstimate> {
    check(layout, h, theta)?;
    let values = (0..theta.len())
        .map(|i| {
            let plus = expectation(h, &layout.prepare(&shifted(theta, &[(i, FRAC_PI_2)]))?)?;
            let minus = expectation(h, &layout.prepare(&shifted(theta, &[(i, -FRAC_PI_2)]))?)?;
            Ok((plus - minus) / 2.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientEstimate {
        values,
        mode: GradientMode::Exact,
        shots_used: 0,
    })
}

/// Parameter-shift gradient with every shifted expectation estimated from
/// `n_shots` samples per measurement group.
pub fn gradient_shots<R: Rng + ?Sized>(
    layout: &AnsatzLayout,
    h: &PauliSum,
    theta: &[f64],
    n_shots: u64,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check(layout, h, theta)?;
    if n_shots == 0 {
        return Err(Error::Domain("n_shots must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let plus = sample_expectation(
            h,
            &layout.prepare(&shifted(theta, &[(i, FRAC_PI_2)]))?,
            n_shots,
            rng,
        )?;
        let minus = sample_expectation(
            h,
            &layout.prepare(&shifted(theta, &[(i, -FRAC_PI_2)]))?,
            n_shots,
            rng,
        )?;
        values.push((plus - minus) / 2.0);
    }
    let shots_used = 2 * theta.len() as u64 * n_shots * measurement_group_count(h) as u64;
    Ok(GradientEstimate {
        values,
        mode: GradientMode::Shots(n_shots),
        shots_used,
    })
}

/// Second derivatives by applying the shift rule twice.
///
/// Off-diagonal entries use four `±pi/2` corners; the diagonal uses
/// `(L(theta + pi e_i) - 2 L(theta) + L(theta - pi e_i)) / 4`.
pub fn hessian_exact(layout: &AnsatzLayout, h: &PauliSum, theta: &[f64]) -> Result<HessianMatrix> {
    check(layout, h, theta)?;
    let p = theta.len();
    if p > MAX_HESSIAN_PARAMS {
        return Err(Error::Capacity(format!(
            "Hessian limited to {MAX_HESSIAN_PARAMS} parameters, got {p}"
        )));
    }
    let eval = |shifts: &[(usize, f64)]| -> Result<f64> {
        expectation(h, &layout.prepare(&shifted(theta, shifts))?)
    };
    let center = eval(&[])?;
    let mut m = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        m[(i, i)] = (eval(&[(i, PI)])? - 2.0 * center + eval(&[(i, -PI)])?) / 4.0;
        for j in 0..i {
            let pp = eval(&[(i, FRAC_PI_2), (j, FRAC_PI_2)])?;
            let pm = eval(&[(i, FRAC_PI_2), (j, -FRAC_PI_2)])?;
            let mp = eval(&[(i, -FRAC_PI_2), (j, FRAC_PI_2)])?;
            let mm = eval(&[(i, -FRAC_PI_2), (j, -FRAC_PI_2)])?;
            let v = (pp - pm - mp + mm) / 4.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let entries = (&m + m.transpose()) * 0.5;
    Ok(HessianMatrix {
        entries,
        symmetrized: true,
    })
}
