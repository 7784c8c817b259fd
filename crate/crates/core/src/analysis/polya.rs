//! Return probability of a simple random walk on the `d`-dimensional lattice,
//! `p(d) = 1 - 1 / int_0^inf [I0(t/d) e^{-t/d}]^d dt`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 8.0;

/// Beyond this `t` the integrand is replaced by its asymptotic expansion and
/// integrated analytically.
const TAIL_START: f64 = 1.0e4;

const MAX_DEPTH: u32 = 48;

/// `I0(x) e^{-|x|}`, finite for every real `x`.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        // sum_k (x^2/4)^k / (k!)^2
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > sum * 1e-17 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // 1/sqrt(2 pi x) sum_k ((2k-1)!!)^2 / (k! (8x)^k), truncated at the
        // smallest term.
        let mut term = 1.0f64;
        let mut sum = 1.0;
        let mut k = 1.0f64;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (k * 8.0 * x);
            if next >= term || next < sum * 1e-17 {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    adaptive(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// `int_T^inf (d / (2 pi t))^{d/2} (1 + c1/t + c2/t^2) dt` from the
/// large-argument expansion `I0s(x) ~ (2 pi x)^{-1/2} (1 + 1/(8x) + 9/(128 x^2))`.
fn tail(d: f64, t0: f64) -> f64 {
    let (a, b) = (1.0 / 8.0, 9.0 / 128.0);
    let c1 = d * a * d;
    let c2 = (d * b + d * (d - 1.0) / 2.0 * a * a) * d * d;
    let h = d / 2.0;
    let scale = (d / (2.0 * PI)).powf(h);
    scale
        * (t0.powf(1.0 - h) / (h - 1.0) + c1 * t0.powf(-h) / h + c2 * t0.powf(-h - 1.0) / (h + 1.0))
}

pub fn polya_constant_with_tol(d: u32, tol: f64) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!(
            "the integral form needs d >= 3, got {d}; see return_probability for d < 3"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let df = d as f64;
    let integrand = |u: f64| {
        let one_minus = 1.0 - u;
        let t = u / one_minus;
        bessel_i0_scaled(t / df).powi(d as i32) / (one_minus * one_minus)
    };
    let u_end = TAIL_START / (1.0 + TAIL_START);
    let body = integrate(integrand, 0.0, u_end, tol);
    let total = body + tail(df, TAIL_START);
    Ok(1.0 - 1.0 / total)
}

/// Polya's return probability for `d >= 3`, integrated to `1e-6` absolute.
pub fn polya_constant(d: u32) -> Result<f64> {
    polya_constant_with_tol(d, 1e-6)
}

/// Return probability for any dimension: walks in one and two dimensions are
/// recurrent, so `p(1) = p(2) = 1`.
pub fn return_probability(d: u32) -> Result<f64> {
    match d {
        0 => Err(Error::Domain("dimension must be positive".into())),
        1 | 2 => Ok(1.0),
        _ => polya_constant(d),
    }
}
