//! Weighted q-means of two nonnegative numbers and the Hölder product
//! inequalities used to pass from rational to integer concavity indices.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rational::ConcavityIndex;

/// Orders with `|q|` below this evaluate through the geometric-mean branch.
pub const GEOMETRIC_CUTOFF: f64 = 1e-12;

/// The order `q ∈ ℝ ∪ {-∞, +∞}` of a mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeanOrder {
    NegInf,
    Finite(f64),
    PosInf,
}

impl MeanOrder {
    /// Maps infinite floats onto the symbolic orders; rejects NaN.
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() {
            return domain("mean order is NaN");
        }
        Ok(if q == f64::INFINITY {
            Self::PosInf
        } else if q == f64::NEG_INFINITY {
            Self::NegInf
        } else {
            Self::Finite(q)
        })
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Self::NegInf => f64::NEG_INFINITY,
            Self::Finite(q) => q,
            Self::PosInf => f64::INFINITY,
        }
    }
}

impl PartialOrd for MeanOrder {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

fn check_args(a: f64, b: f64, lambda: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
        return domain(format!("mean arguments must be finite and nonnegative, got {a}, {b}"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("mean weight must lie in (0,1), got {lambda}"));
    }
    Ok(())
}

/// `M_q(a, b; λ)`, with the convention `M_q(a, b; λ) = 0` whenever `ab = 0`.
pub fn q_mean(a: f64, b: f64, lambda: f64, q: MeanOrder) -> Result<f64> {
    check_args(a, b, lambda)?;
    Ok(q_mean_unchecked(a, b, lambda, q))
}

/// [`q_mean`] without argument validation, for hot loops whose inputs are
/// already known to be valid.
#[inline]
pub fn q_mean_unchecked(a: f64, b: f64, lambda: f64, q: MeanOrder) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    match q {
        MeanOrder::PosInf => a.max(b),
        MeanOrder::NegInf => a.min(b),
        MeanOrder::Finite(q) if q.abs() < GEOMETRIC_CUTOFF => {
            a.powf(1.0 - lambda) * b.powf(lambda)
        }
        MeanOrder::Finite(q) => {
            // Scale by the argument whose ratio powers stay in [0, 1].
            let scale = if q > 0.0 { a.max(b) } else { a.min(b) };
            let ra = (a / scale).powf(q);
            let rb = (b / scale).powf(q);
            scale * ((1.0 - lambda) * ra + lambda * rb).powf(1.0 / q)
        }
    }
}

type Big = FBig<HalfEven, 2>;

/// Binary precision of the reference path.
const REFERENCE_PRECISION: usize = 192;

fn big(x: f64) -> Big {
    Big::try_from(x)
        .expect("finite input")
        .with_precision(REFERENCE_PRECISION)
        .value()
}

/// [`q_mean`] evaluated in 192-bit binary floating point and rounded once to
/// `f64`. Used as an oracle for the double-precision path.
pub fn q_mean_reference(a: f64, b: f64, lambda: f64, q: MeanOrder) -> Result<f64> {
    check_args(a, b, lambda)?;
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let (ba, bb, bl) = (big(a), big(b), big(lambda));
    let one = big(1.0);
    let value = match q {
        MeanOrder::PosInf => return Ok(a.max(b)),
        MeanOrder::NegInf => return Ok(a.min(b)),
        MeanOrder::Finite(0.0) => {
            ((&one - &bl) * ba.ln() + &bl * bb.ln()).exp()
        }
        MeanOrder::Finite(q) => {
            let bq = big(q);
            let sum = (&one - &bl) * (&bq * ba.ln()).exp() + &bl * (&bq * bb.ln()).exp();
            (sum.ln() / bq).exp()
        }
    };
    Ok(value.to_f64().value())
}

fn check_sequences(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return domain("Hölder sequences must be nonempty");
    }
    if a.len() != b.len() {
        return domain(format!("Hölder sequences differ in length: {} vs {}", a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return domain("Hölder sequences must be finite");
    }
    Ok(())
}

/// Both sides of `|∏ a_j| + |∏ b_j| ≤ (∏ (|a_j|^q + |b_j|^q))^{1/q}` where
/// `q` is the common sequence length.
pub fn holder_combine(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    check_sequences(a, b)?;
    let q = a.len() as i32;
    let lhs = a.iter().product::<f64>().abs() + b.iter().product::<f64>().abs();
    let rhs = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.abs().powi(q) + y.abs().powi(q))
        .product::<f64>()
        .powf(1.0 / q as f64);
    Ok((lhs, rhs))
}

/// Both sides of the mean form of the Hölder bound for `s = p/q`:
///
/// `(1-λ) ∏ f_j^{1/p} + λ ∏ g_j^{1/p} ≤ ∏ ((1-λ) f_j^{1/s} + λ g_j^{1/s})^{1/q}`.
pub fn holder_mean_combine(
    f_vals: &[f64],
    g_vals: &[f64],
    lambda: f64,
    s: ConcavityIndex,
) -> Result<(f64, f64)> {
    check_sequences(f_vals, g_vals)?;
    if f_vals.iter().chain(g_vals).any(|&v| v < 0.0) {
        return domain("function values must be nonnegative");
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("weight must lie in (0,1), got {lambda}"));
    }
    let Some((p, q)) = s.fraction() else {
        return domain("index must be rational");
    };
    if q as usize != f_vals.len() {
        return domain(format!("index denominator {q} differs from sequence length {}", f_vals.len()));
    }
    let inv_p = 1.0 / p as f64;
    let inv_s = q as f64 / p as f64;
    let prod_f: f64 = f_vals.iter().map(|v| v.powf(inv_p)).product();
    let prod_g: f64 = g_vals.iter().map(|v| v.powf(inv_p)).product();
    let lhs = (1.0 - lambda) * prod_f + lambda * prod_g;
    let rhs = f_vals
        .iter()
        .zip(g_vals)
        .map(|(f, g)| ((1.0 - lambda) * f.powf(inv_s) + lambda * g.powf(inv_s)).powf(1.0 / q as f64))
        .product();
    Ok((lhs, rhs))
}
