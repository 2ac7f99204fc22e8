//! Exact rational parameters: the weight `λ = j/k` and the concavity index `s`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Parses `"j/k"`, `"n"` or a finite decimal such as `"1.25"` into an exact
/// reduced fraction.
pub fn parse_fraction(text: &str) -> Result<(u64, u64)> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: u64 = n
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("bad numerator in {text:?}")))?;
        let d: u64 = d
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("bad denominator in {text:?}")))?;
        if d == 0 {
            return domain(format!("zero denominator in {text:?}"));
        }
        let g = gcd(n, d).max(1);
        return Ok((n / g, d / g));
    }
    let (int_part, frac_part) = text.split_once('.').unwrap_or((text, ""));
    let digits_ok = |s: &str| s.chars().all(|c| c.is_ascii_digit());
    if int_part.is_empty() && frac_part.is_empty()
        || !digits_ok(int_part)
        || !digits_ok(frac_part)
        || frac_part.len() > 12
    {
        return domain(format!("expected a nonnegative fraction or decimal, got {text:?}"));
    }
    let den = 10u64.pow(frac_part.len() as u32);
    let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| Error::Domain(format!("number too large: {text:?}")))? };
    let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().unwrap() };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(|| Error::Domain(format!("number too large: {text:?}")))?;
    let g = gcd(num, den).max(1);
    Ok((num / g, den / g))
}

/// A weight `λ = j/k ∈ (0, 1)` kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RationalWeight {
    num: u32,
    den: u32,
}

impl RationalWeight {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || num >= den {
            return domain(format!("weight {num}/{den} is not in (0,1)"));
        }
        let g = gcd(num as u64, den as u64) as u32;
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u32 {
        self.num
    }

    pub fn den(&self) -> u32 {
        self.den
    }

    /// `k - j`, the numerator of `1 - λ`.
    pub fn complement_num(&self) -> u32 {
        self.den - self.num
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `1 - λ`, computed from the exact complement.
    pub fn complement(&self) -> f64 {
        self.complement_num() as f64 / self.den as f64
    }

    /// `τ = min(λ, 1 - λ)`.
    pub fn tau(&self) -> f64 {
        self.num.min(self.complement_num()) as f64 / self.den as f64
    }
}

impl FromStr for RationalWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !s.contains('/') {
            return domain(format!("weight must be given as j/k, got {s:?}"));
        }
        let (n, d) = parse_fraction(s)?;
        let n = u32::try_from(n).map_err(|_| Error::Domain("weight numerator too large".into()))?;
        let d = u32::try_from(d).map_err(|_| Error::Domain("weight denominator too large".into()))?;
        Self::new(n, d)
    }
}

impl TryFrom<String> for RationalWeight {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RationalWeight> for String {
    fn from(w: RationalWeight) -> String {
        w.to_string()
    }
}

impl fmt::Display for RationalWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Arithmetic classification of a concavity index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    Integer(u32),
    /// `s = p/q` with `p, q` coprime and `q > 1`.
    Rational { p: u32, q: u32 },
    Irrational,
}

/// The index `s > 0` of the BBL inequality (so that `p = 1/s`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcavityIndex {
    value: f64,
    kind: IndexKind,
}

/// Largest denominator recognised when classifying a float as rational.
const MAX_DETECTED_DEN: u64 = 64;

impl ConcavityIndex {
    pub fn integer(k: u32) -> Result<Self> {
        if k == 0 {
            return domain("concavity index must be positive");
        }
        Ok(Self { value: k as f64, kind: IndexKind::Integer(k) })
    }

    pub fn rational(p: u32, q: u32) -> Result<Self> {
        if p == 0 || q == 0 {
            return domain(format!("concavity index {p}/{q} must be positive"));
        }
        let g = gcd(p as u64, q as u64) as u32;
        let (p, q) = (p / g, q / g);
        if q == 1 {
            return Self::integer(p);
        }
        Ok(Self { value: p as f64 / q as f64, kind: IndexKind::Rational { p, q } })
    }

    /// Classifies a float; values that are not exactly `p/q` for a small
    /// denominator are treated as irrational.
    pub fn from_f64(s: f64) -> Result<Self> {
        if !s.is_finite() || s <= 0.0 {
            return domain(format!("concavity index must be a positive real, got {s}"));
        }
        for q in 1..=MAX_DETECTED_DEN {
            let p = (s * q as f64).round();
            if p >= 1.0 && p <= u32::MAX as f64 && p / q as f64 == s {
                return Self::rational(p as u32, q as u32);
            }
        }
        Ok(Self { value: s, kind: IndexKind::Irrational })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    /// `1/s`, the concavity exponent.
    pub fn exponent(&self) -> f64 {
        1.0 / self.value
    }

    /// `(p, q)` with `s = p/q`; integers report `q = 1`.
    pub fn fraction(&self) -> Option<(u32, u32)> {
        match self.kind {
            IndexKind::Integer(k) => Some((k, 1)),
            IndexKind::Rational { p, q } => Some((p, q)),
            IndexKind::Irrational => None,
        }
    }

    pub fn as_integer(&self) -> Option<u32> {
        match self.kind {
            IndexKind::Integer(k) => Some(k),
            _ => None,
        }
    }

    /// `[s]`, the integer part.
    pub fn integer_part(&self) -> u32 {
        match self.kind {
            IndexKind::Integer(k) => k,
            IndexKind::Rational { p, q } => p / q,
            IndexKind::Irrational => self.value.floor() as u32,
        }
    }
}

impl FromStr for ConcavityIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (p, q) = parse_fraction(s)?;
        let p = u32::try_from(p).map_err(|_| Error::Domain("index numerator too large".into()))?;
        let q = u32::try_from(q).map_err(|_| Error::Domain("index denominator too large".into()))?;
        Self::rational(p, q)
    }
}

impl fmt::Display for ConcavityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            IndexKind::Integer(k) => write!(f, "{k}"),
            IndexKind::Rational { p, q } => write!(f, "{p}/{q}"),
            IndexKind::Irrational => write!(f, "{}", self.value),
        }
    }
}
