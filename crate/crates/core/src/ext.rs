//! Extended nonnegative reals.
//!
//! Generalized Young functions take the value `+∞`; the marker is a variant,
//! never a large float. Any arithmetic touching [`Ext::Infinite`] stays
//! infinite.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Ext {
    Finite(f64),
    Infinite,
}

impl Ext {
    pub const ZERO: Ext = Ext::Finite(0.0);

    /// Wraps a float, mapping `+inf` (overflow) to the marker.
    pub fn from_f64(v: f64) -> Ext {
        if v == f64::INFINITY {
            Ext::Infinite
        } else {
            Ext::Finite(v)
        }
    }

    /// From a natural logarithm; `ln > ln(f64::MAX)` becomes the marker.
    pub fn from_ln(ln: f64) -> Ext {
        if ln == f64::NEG_INFINITY {
            Ext::ZERO
        } else {
            Ext::from_f64(ln.exp())
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Ext::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Ext::Finite(v) => Some(v),
            Ext::Infinite => None,
        }
    }

    /// Float view, `+inf` for the marker.
    pub fn to_f64(self) -> f64 {
        match self {
            Ext::Finite(v) => v,
            Ext::Infinite => f64::INFINITY,
        }
    }

    pub fn ln(self) -> f64 {
        match self {
            Ext::Finite(v) => v.ln(),
            Ext::Infinite => f64::INFINITY,
        }
    }

    pub fn max(self, other: Ext) -> Ext {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Ext) -> Ext {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        match (self, rhs) {
            (Ext::Finite(a), Ext::Finite(b)) => Ext::from_f64(a + b),
            _ => Ext::Infinite,
        }
    }
}

/// Scaling by a nonnegative float. `0 · ∞` is taken as `0` (measure-theoretic
/// convention for zero-mass atoms).
impl Mul<f64> for Ext {
    type Output = Ext;
    fn mul(self, rhs: f64) -> Ext {
        match self {
            Ext::Finite(a) => Ext::from_f64(a * rhs),
            Ext::Infinite if rhs == 0.0 => Ext::ZERO,
            Ext::Infinite => Ext::Infinite,
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Finite(v) => write!(f, "{v}"),
            Ext::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Ext::Finite(v) => s.serialize_f64(*v),
            Ext::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Ext::from_f64(v)),
            Repr::Str(s) if s == "inf" => Ok(Ext::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\", got {s}"
            ))),
        }
    }
}
