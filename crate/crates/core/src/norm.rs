//! ℓp exponents and norms.

use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

/// An ℓp exponent `p ∈ [1, ∞]`.
///
/// `p = ∞` is its own variant rather than a large float so that the dual
/// exponent and the closed forms can branch on it exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);

    /// Builds an exponent from a real; `f64::INFINITY` maps to [`Exponent::Infinity`].
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(invalid("p", alloc::format!("must satisfy p >= 1, got {p}")));
        }
        if p.is_infinite() {
            Ok(Exponent::Infinity)
        } else {
            Ok(Exponent::Finite(p))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// The dual exponent `p'` with `1/p + 1/p' = 1`.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::ONE,
            Exponent::Finite(1.0) => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn is_one(self) -> bool {
        self == Exponent::ONE
    }

    /// `‖v‖_p`. Finite exponents are evaluated on `v / max|vᵢ|` to stay clear of
    /// overflow for large `p`.
    pub fn norm(self, v: &[f64]) -> f64 {
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        match self {
            Exponent::Infinity => max,
            Exponent::Finite(p) => {
                if max == 0.0 {
                    return 0.0;
                }
                if p == 1.0 {
                    return v.iter().map(|x| x.abs()).sum();
                }
                let sum: f64 = if p == 2.0 {
                    v.iter().map(|x| (x / max) * (x / max)).sum()
                } else {
                    v.iter().map(|x| (x.abs() / max).powf(p)).sum()
                };
                max * sum.powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl core::str::FromStr for Exponent {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "inf" | "Inf" | "INF" | "infinity" | "∞" => Ok(Exponent::Infinity),
            _ => {
                let p: f64 = s
                    .parse()
                    .map_err(|_| invalid("p", alloc::format!("cannot parse `{s}`")))?;
                Exponent::new(p)
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    Exponent::TWO.norm(v)
}
