//! Pauli-sum observables: parsing, exact and sampled expectation values, and
//! operator norms.
//!
//! Qubit `q` of an axes word addresses bit `n - 1 - q` of a basis index, so the
//! leftmost letter of `"ZIII"` acts on the most significant bit.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::Statevector;
use crate::error::{Error, Result};

/// Largest register for which [`operator_norm`] will diagonalize densely.
pub const MAX_EXACT_NORM_QUBITS: usize = 12;

/// Tolerance on the imaginary part of an expectation value.
const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    coefficient: f64,
    axes: Vec<Pauli>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, axes: Vec<Pauli>) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::Domain(format!(
                "coefficient {coefficient} is not finite"
            )));
        }
        if axes.is_empty() {
            return Err(Error::Dimension(
                "a Pauli term needs at least one qubit".into(),
            ));
        }
        Ok(Self { coefficient, axes })
    }

    /// Parses an axes word such as `"XZIY"`.
    pub fn from_word(coefficient: f64, word: &str) -> Result<Self> {
        let axes = word
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| Error::Domain(format!("'{c}' is not one of I, X, Y, Z")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coefficient, axes)
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn word(&self) -> String {
        self.axes.iter().map(|p| p.as_char()).collect()
    }

    /// True when every axis is `I` or `Z`, i.e. the term is diagonal in the
    /// computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.axes.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }

    /// Bit masks `(x, z, n_y)` such that the string equals
    /// `i^{n_y} X^x Z^z` (Z applied first).
    fn masks(&self) -> (usize, usize, u32) {
        let n = self.axes.len();
        let mut x = 0usize;
        let mut z = 0usize;
        let mut n_y = 0u32;
        for (q, p) in self.axes.iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match p {
                Pauli::I => {}
                Pauli::X => x |= bit,
                Pauli::Z => z |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    n_y += 1;
                }
            }
        }
        (x, z, n_y)
    }

    /// Computes `<psi|P|psi>` for the bare Pauli string (coefficient excluded).
    fn string_expectation(&self, amps: &[Complex64]) -> Complex64 {
        let (x, z, n_y) = self.masks();
        let global = Complex64::i().powu(n_y);
        let mut acc = Complex64::new(0.0, 0.0);
        for (b, amp) in amps.iter().enumerate() {
            let sign = if (b & z).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            acc += amps[b ^ x].conj() * amp * sign;
        }
        acc * global
    }
}

/// A weighted sum of Pauli strings on a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliSum {
    /// Builds a sum, merging terms with identical axes in first-occurrence order.
    pub fn new(n_qubits: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Dimension(
                "a Pauli sum needs at least one qubit".into(),
            ));
        }
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(terms.len());
        let mut index: HashMap<Vec<Pauli>, usize> = HashMap::new();
        for term in terms {
            if term.n_qubits() != n_qubits {
                return Err(Error::Dimension(format!(
                    "term '{}' has {} axes, expected {n_qubits}",
                    term.word(),
                    term.n_qubits()
                )));
            }
            match index.get(&term.axes) {
                Some(&i) => merged[i].coefficient += term.coefficient,
                None => {
                    index.insert(term.axes.clone(), merged.len());
                    merged.push(term);
                }
            }
        }
        Ok(Self {
            n_qubits,
            terms: merged,
        })
    }

    /// `Z_0 + Z_1 + ... + Z_{n-1}`.
    pub fn sum_z(n_qubits: usize) -> Result<Self> {
        let terms = (0..n_qubits)
            .map(|q| {
                let mut axes = vec![Pauli::I; n_qubits];
                axes[q] = Pauli::Z;
                PauliTerm::new(1.0, axes)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_qubits, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `sum |c_i|`, an upper bound on the operator norm.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// `Tr(H) / 2^n`, the expectation value in the maximally mixed state.
    pub fn normalized_trace(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.axes.iter().all(|p| *p == Pauli::I))
            .map(|t| t.coefficient)
            .sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(PauliTerm::is_diagonal)
    }

    /// Diagonal of a `{I, Z}`-only sum over the computational basis.
    fn diagonal_values(terms: &[&PauliTerm], n_qubits: usize) -> Vec<f64> {
        let masks: Vec<(usize, f64)> = terms.iter().map(|t| (t.masks().1, t.coefficient)).collect();
        (0..1usize << n_qubits)
            .map(|b| {
                masks
                    .iter()
                    .map(|&(z, c)| if (b & z).count_ones() % 2 == 0 { c } else { -c })
                    .sum()
            })
            .collect()
    }

    /// Dense `2^n x 2^n` matrix of the observable.
    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        if self.n_qubits > MAX_EXACT_NORM_QUBITS {
            return Err(Error::Capacity(format!(
                "dense matrix requested for {} qubits (cap {MAX_EXACT_NORM_QUBITS})",
                self.n_qubits
            )));
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for term in &self.terms {
            let (x, z, n_y) = term.masks();
            let global = Complex64::i().powu(n_y) * term.coefficient;
            for b in 0..dim {
                let sign = if (b & z).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                m[(b ^ x, b)] += global * sign;
            }
        }
        Ok(m)
    }

    /// All eigenvalues in ascending order (dense, capped like the exact norm).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let mut values = if self.is_diagonal() {
            let refs: Vec<&PauliTerm> = self.terms.iter().collect();
            Self::diagonal_values(&refs, self.n_qubits)
        } else {
            let dense = self.to_dense()?;
            dense.symmetric_eigenvalues().iter().copied().collect()
        };
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(values)
    }

    /// Smallest eigenvalue, the global minimum of any loss built from this
    /// observable.
    pub fn ground_energy(&self) -> Result<f64> {
        if !self.is_diagonal() && self.n_qubits > MAX_EXACT_NORM_QUBITS {
            return Err(Error::Capacity(format!(
                "ground energy requested for {} qubits (cap {MAX_EXACT_NORM_QUBITS})",
                self.n_qubits
            )));
        }
        Ok(self.eigenvalues()?[0])
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for term in &self.terms {
            writeln!(f, "{} {}", term.coefficient, term.word())?;
        }
        Ok(())
    }
}

/// Parses the line-oriented Hamiltonian format: one `<coefficient> <axes>`
/// pair per line, `#` starts a comment, blank lines are ignored.
pub fn parse_pauli_sum(text: &str, n_qubits: usize) -> Result<PauliSum> {
    let mut terms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut fields = line.split_whitespace();
        let Some(coeff_field) = fields.next() else {
            continue;
        };
        let word = fields.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected '<coefficient> <axes>'".into(),
        })?;
        if let Some(extra) = fields.next() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unexpected trailing field '{extra}'"),
            });
        }
        let coefficient: f64 = coeff_field.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("'{coeff_field}' is not a real number"),
        })?;
        if !coefficient.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("coefficient '{coeff_field}' is not finite"),
            });
        }
        if !word.chars().all(|c| Pauli::from_char(c).is_some()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("'{word}' is not a word over I, X, Y, Z"),
            });
        }
        if word.chars().count() != n_qubits {
            return Err(Error::Dimension(format!(
                "line {line_no}: '{word}' has length {}, expected {n_qubits}",
                word.chars().count()
            )));
        }
        terms.push(PauliTerm::from_word(coefficient, word)?);
    }
    PauliSum::new(n_qubits, terms)
}

/// Largest absolute eigenvalue (`exact`) or the triangle-inequality bound
/// `sum |c_i|`.
pub fn operator_norm(h: &PauliSum, exact: bool) -> Result<f64> {
    if !exact {
        return Ok(h.coefficient_l1());
    }
    if h.n_qubits > MAX_EXACT_NORM_QUBITS {
        return Err(Error::Capacity(format!(
            "exact operator norm limited to {MAX_EXACT_NORM_QUBITS} qubits, got {}",
            h.n_qubits
        )));
    }
    let values = h.eigenvalues()?;
    Ok(values.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

fn check_dims(h: &PauliSum, psi: &Statevector) -> Result<()> {
    if h.n_qubits != psi.n_qubits() {
        return Err(Error::Dimension(format!(
            "observable acts on {} qubits, state has {}",
            h.n_qubits,
            psi.n_qubits()
        )));
    }
    Ok(())
}

/// Exact `<psi|H|psi>`.
pub fn expectation(h: &PauliSum, psi: &Statevector) -> Result<f64> {
    check_dims(h, psi)?;
    let amps = psi.amplitudes();
    let mut total = Complex64::new(0.0, 0.0);
    for term in &h.terms {
        total += term.string_expectation(amps) * term.coefficient;
    }
    let scale = h.coefficient_l1().max(1.0);
    debug_assert!(
        total.im.abs() < IMAG_TOL * scale,
        "expectation has imaginary part {}",
        total.im
    );
    Ok(total.re)
}

/// Measurement groups: all `{I, Z}` terms together, every other term alone.
fn measurement_groups(h: &PauliSum) -> (Vec<&PauliTerm>, Vec<&PauliTerm>) {
    h.terms.iter().partition(|t| t.is_diagonal())
}

/// Number of separately measured groups, i.e. how many `n_shots` budgets one
/// sampled expectation consumes.
pub fn measurement_group_count(h: &PauliSum) -> usize {
    let (diag, rest) = measurement_groups(h);
    usize::from(!diag.is_empty()) + rest.len()
}

/// Multinomial counts over `probs` by sequential conditional binomials.
fn multinomial_counts<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let last = probs.iter().rposition(|&p| p > 0.0);
    let Some(last) = last else {
        return counts;
    };
    let mut remaining_n = n;
    let mut remaining_p: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let k = if i == last {
            remaining_n
        } else {
            let q = (p / remaining_p).clamp(0.0, 1.0);
            if q >= 1.0 {
                remaining_n
            } else {
                Binomial::new(remaining_n, q)
                    .expect("binomial parameters are in range")
                    .sample(rng)
            }
        };
        counts[i] = k;
        remaining_n -= k;
        remaining_p -= p;
    }
    counts
}

/// Shot-noise estimate of `<psi|H|psi>` with `n_shots` per measurement group.
///
/// Each outcome is drawn from the exact Born distribution of the state. The
/// diagonal group reads every `{I, Z}` term off the same computational-basis
/// samples; every other term is measured alone and contributes a `±1`
/// binomial mean.
pub fn sample_expectation<R: Rng + ?Sized>(
    h: &PauliSum,
    psi: &Statevector,
    n_shots: u64,
    rng: &mut R,
) -> Result<f64> {
    check_dims(h, psi)?;
    if n_shots == 0 {
        return Err(Error::Domain("n_shots must be at least 1".into()));
    }
    let amps = psi.amplitudes();
    let (diag, rest) = measurement_groups(h);
    let mut estimate = 0.0;

    if !diag.is_empty() {
        let values = PauliSum::diagonal_values(&diag, h.n_qubits);
        let probs: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
        let counts = multinomial_counts(&probs, n_shots, rng);
        let sum: f64 = counts
            .iter()
            .zip(&values)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &v)| k as f64 * v)
            .sum();
        estimate += sum / n_shots as f64;
    }

    for term in rest {
        let mean = term.string_expectation(amps).re.clamp(-1.0, 1.0);
        let p_plus = (1.0 + mean) / 2.0;
        let plus = multinomial_counts(&[p_plus, 1.0 - p_plus], n_shots, rng)[0];
        let empirical = 2.0 * plus as f64 / n_shots as f64 - 1.0;
        estimate += term.coefficient * empirical;
    }
    Ok(estimate)
}
