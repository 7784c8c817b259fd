//! Dense statevector simulation of layered parameterized circuits.
//!
//! Rotations follow `R_A(theta) = exp(-i theta A / 2)` for `A` in `{X, Y, Z}`,
//! so every generator has operator norm `1/2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 14;

/// Operator norm of every rotation generator in the supported gate set.
pub const GENERATOR_NORM: f64 = 0.5;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// Wraps raw amplitudes. The vector must have length `2^n` and unit norm.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("state has squared norm {norm}")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a 2x2 matrix `[[a, b], [c, d]]` to `qubit`.
    fn apply_single(&mut self, qubit: usize, m: [[Complex64; 2]; 2]) {
        let stride = 1usize << (self.n_qubits - 1 - qubit);
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    fn apply_rz(&mut self, qubit: usize, theta: f64) {
        let stride = 1usize << (self.n_qubits - 1 - qubit);
        let lo = Complex64::from_polar(1.0, -theta / 2.0);
        let hi = Complex64::from_polar(1.0, theta / 2.0);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if i & stride == 0 { lo } else { hi };
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let c = 1usize << (self.n_qubits - 1 - control);
        let t = 1usize << (self.n_qubits - 1 - target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    fn apply_gate(&mut self, gate: &GateSpec, theta: &[f64]) {
        let q = gate.targets[0];
        match gate.kind {
            GateKind::Rx => {
                let (s, c) = (theta[gate.param_slots[0]] / 2.0).sin_cos();
                let mis = Complex64::new(0.0, -s);
                self.apply_single(
                    q,
                    [[Complex64::new(c, 0.0), mis], [mis, Complex64::new(c, 0.0)]],
                );
            }
            GateKind::Ry => {
                let (s, c) = (theta[gate.param_slots[0]] / 2.0).sin_cos();
                self.apply_single(
                    q,
                    [
                        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                    ],
                );
            }
            GateKind::Rz => self.apply_rz(q, theta[gate.param_slots[0]]),
            GateKind::Rot => {
                let [a, b, g] = [
                    gate.param_slots[0],
                    gate.param_slots[1],
                    gate.param_slots[2],
                ];
                self.apply_rz(q, theta[a]);
                let (s, c) = (theta[b] / 2.0).sin_cos();
                self.apply_single(
                    q,
                    [
                        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                    ],
                );
                self.apply_rz(q, theta[g]);
            }
            GateKind::Cnot => self.apply_cnot(gate.targets[0], gate.targets[1]),
        }
    }
}

fn check_qubits(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "register of {n_qubits} qubits outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// `|0...0>` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<Statevector> {
    check_qubits(n_qubits)?;
    let mut amps = vec![ZERO; 1 << n_qubits];
    amps[0] = ONE;
    Ok(Statevector { n_qubits, amps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    /// `RZ(gamma) RY(beta) RZ(alpha)`, with `alpha` applied first.
    Rot,
    Cnot,
}

impl GateKind {
    fn n_params(self) -> usize {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Rot => 3,
            GateKind::Cnot => 0,
        }
    }

    fn n_targets(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            _ => 1,
        }
    }
}

/// One gate of a layout. For CNOT, `targets = [control, target]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateSpec {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub param_slots: Vec<usize>,
}

impl GateSpec {
    pub fn rx(qubit: usize, slot: usize) -> Self {
        Self {
            kind: GateKind::Rx,
            targets: vec![qubit],
            param_slots: vec![slot],
        }
    }

    pub fn ry(qubit: usize, slot: usize) -> Self {
        Self {
            kind: GateKind::Ry,
            targets: vec![qubit],
            param_slots: vec![slot],
        }
    }

    pub fn rz(qubit: usize, slot: usize) -> Self {
        Self {
            kind: GateKind::Rz,
            targets: vec![qubit],
            param_slots: vec![slot],
        }
    }

    /// Three-angle rotation using slots `first, first + 1, first + 2`.
    pub fn rot(qubit: usize, first: usize) -> Self {
        Self {
            kind: GateKind::Rot,
            targets: vec![qubit],
            param_slots: vec![first, first + 1, first + 2],
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            targets: vec![control, target],
            param_slots: vec![],
        }
    }
}

/// Ordered gates grouped into layers, plus the parameter count they consume.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzLayout {
    n_qubits: usize,
    layers: Vec<Vec<GateSpec>>,
    n_params: usize,
}

impl AnsatzLayout {
    /// Validates gate arity, targets and slot coverage.
    pub fn new(n_qubits: usize, layers: Vec<Vec<GateSpec>>) -> Result<Self> {
        check_qubits(n_qubits)?;
        if layers.is_empty() {
            return Err(Error::Dimension("a layout needs at least one layer".into()));
        }
        let mut slots = Vec::new();
        for gate in layers.iter().flatten() {
            if gate.targets.len() != gate.kind.n_targets() {
                return Err(Error::Dimension(format!(
                    "{:?} needs {} targets",
                    gate.kind,
                    gate.kind.n_targets()
                )));
            }
            if gate.param_slots.len() != gate.kind.n_params() {
                return Err(Error::Dimension(format!(
                    "{:?} consumes {} parameters, got {}",
                    gate.kind,
                    gate.kind.n_params(),
                    gate.param_slots.len()
                )));
            }
            if gate.targets.iter().any(|&q| q >= n_qubits) {
                return Err(Error::Dimension(format!("target out of range in {gate:?}")));
            }
            if gate.targets.len() == 2 && gate.targets[0] == gate.targets[1] {
                return Err(Error::Dimension(format!("repeated target in {gate:?}")));
            }
            slots.extend_from_slice(&gate.param_slots);
        }
        slots.sort_unstable();
        if slots.iter().enumerate().any(|(i, &s)| i != s) {
            return Err(Error::Dimension(
                "parameter slots must cover 0..p exactly once".into(),
            ));
        }
        Ok(Self {
            n_qubits,
            layers,
            n_params: slots.len(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<GateSpec>] {
        &self.layers
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateSpec> {
        self.layers.iter().flatten()
    }

    /// Largest generator norm, `1/2` for every gate this simulator knows.
    pub fn max_generator_norm(&self) -> f64 {
        GENERATOR_NORM
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::Dimension(format!(
                "layout has {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        Ok(())
    }

    /// Applies one layer in place.
    pub fn apply_layer(&self, layer: usize, theta: &[f64], psi: &mut Statevector) -> Result<()> {
        self.check_theta(theta)?;
        check_state(self, psi)?;
        for gate in &self.layers[layer] {
            psi.apply_gate(gate, theta);
        }
        Ok(())
    }

    /// `U(theta)|0>`.
    pub fn prepare(&self, theta: &[f64]) -> Result<Statevector> {
        apply_circuit(self, theta, &zero_state(self.n_qubits)?)
    }
}

fn check_state(layout: &AnsatzLayout, psi: &Statevector) -> Result<()> {
    if psi.n_qubits != layout.n_qubits {
        return Err(Error::Dimension(format!(
            "layout acts on {} qubits, state has {}",
            layout.n_qubits, psi.n_qubits
        )));
    }
    Ok(())
}

/// Returns `U(theta)|psi>`.
pub fn apply_circuit(
    layout: &AnsatzLayout,
    theta: &[f64],
    psi: &Statevector,
) -> Result<Statevector> {
    layout.check_theta(theta)?;
    check_state(layout, psi)?;
    let mut out = psi.clone();
    for gate in layout.gates() {
        out.apply_gate(gate, theta);
    }
    Ok(out)
}

/// Strongly entangling layers: per layer a three-angle rotation on every
/// qubit, then a CNOT ring `i -> (i + 1) mod n`.
///
/// Layer `l`, qubit `q` uses slots `3 (l n + q) + {0, 1, 2}`.
pub fn strongly_entangling_layout(n_qubits: usize, n_layers: usize) -> Result<AnsatzLayout> {
    if n_qubits < 2 {
        return Err(Error::Dimension(format!(
            "an entangling ring needs at least 2 qubits, got {n_qubits}"
        )));
    }
    if n_layers == 0 {
        return Err(Error::Dimension("at least one layer is required".into()));
    }
    let layers = (0..n_layers)
        .map(|l| {
            let rotations = (0..n_qubits).map(|q| GateSpec::rot(q, 3 * (l * n_qubits + q)));
            let ring = (0..n_qubits).map(|q| GateSpec::cnot(q, (q + 1) % n_qubits));
            rotations.chain(ring).collect()
        })
        .collect();
    AnsatzLayout::new(n_qubits, layers)
}
