//! Tabulated nondecreasing functions on `[0, ∞)`.
//!
//! Knots are stored as `(x, ln y)` with `x > 0`; an implicit knot sits at
//! the origin with value 0. Between two positive knots the interpolant is
//! linear in log-log coordinates, which reproduces power laws exactly. A
//! segment touching a zero value is interpolated linearly in `(x, y)`.

use crate::error::{Error, Result};
use crate::ext::Ext;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    xs: Vec<f64>,
    ln_ys: Vec<f64>,
    ceiling: Option<f64>,
}

impl Table {
    /// Builds a table from knots `(x, ln y)`. `x` must be positive and
    /// strictly increasing; `ln y` nondecreasing (`-inf` encodes zero).
    pub fn from_ln_knots(xs: Vec<f64>, ln_ys: Vec<f64>, ceiling: Option<f64>) -> Result<Table> {
        if xs.is_empty() || xs.len() != ln_ys.len() {
            return Err(Error::Parameter(
                "table needs matching, nonempty knot vectors".into(),
            ));
        }
        if xs[0] <= 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(
                "table abscissae must be positive and strictly increasing".into(),
            ));
        }
        if ln_ys.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::Parameter(
                "table ordinates must be finite or zero".into(),
            ));
        }
        if ln_ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter(
                "table ordinates must be nondecreasing".into(),
            ));
        }
        if let Some(c) = ceiling {
            if c < *xs.last().unwrap() {
                return Err(Error::Parameter(
                    "ceiling lies inside the tabulated range".into(),
                ));
            }
        }
        Ok(Table { xs, ln_ys, ceiling })
    }

    /// Knots given in plain `(x, y)` form. A leading `(0, 0)` knot is
    /// accepted and dropped (it is implicit).
    pub fn from_knots(knots: &[(f64, f64)], ceiling: Option<f64>) -> Result<Table> {
        let mut xs = Vec::with_capacity(knots.len());
        let mut ln_ys = Vec::with_capacity(knots.len());
        for &(x, y) in knots {
            if x == 0.0 {
                if y != 0.0 {
                    return Err(Error::Parameter(
                        "tabulated function must vanish at 0".into(),
                    ));
                }
                continue;
            }
            if y < 0.0 {
                return Err(Error::Parameter(
                    "tabulated values must be nonnegative".into(),
                ));
            }
            xs.push(x);
            ln_ys.push(y.ln());
        }
        Table::from_ln_knots(xs, ln_ys, ceiling)
    }

    pub fn ceiling(&self) -> Option<f64> {
        self.ceiling
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Knots in plain `(x, f(x))` form, with the implicit origin first.
    pub fn knots(&self) -> Vec<(f64, Ext)> {
        std::iter::once((0.0, Ext::ZERO))
            .chain(
                self.xs
                    .iter()
                    .zip(&self.ln_ys)
                    .map(|(&x, &l)| (x, Ext::from_ln(l))),
            )
            .collect()
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn segment_ln(&self, i: usize, x: f64) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (l0, l1) = (self.ln_ys[i], self.ln_ys[i + 1]);
        match (l0.is_finite(), l1.is_finite()) {
            (true, true) => {
                let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
                l0 + t * (l1 - l0)
            }
            (false, true) => {
                let t = (x - x0) / (x1 - x0);
                if t <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    l1 + t.ln()
                }
            }
            _ => f64::NEG_INFINITY,
        }
    }

    /// Natural log of the interpolant at `x > 0`.
    pub fn ln_value(&self, x: f64) -> f64 {
        if let Some(c) = self.ceiling {
            if x > c {
                return f64::INFINITY;
            }
        }
        let n = self.xs.len();
        if x <= self.xs[0] {
            let l0 = self.ln_ys[0];
            if !l0.is_finite() {
                return f64::NEG_INFINITY;
            }
            // power-law continuation toward the origin, at least linear
            let k = if n >= 2 && self.ln_ys[1].is_finite() {
                ((self.ln_ys[1] - l0) / (self.xs[1].ln() - self.xs[0].ln())).max(1.0)
            } else {
                1.0
            };
            return l0 + k * (x.ln() - self.xs[0].ln());
        }
        if x >= self.xs[n - 1] {
            if n == 1 {
                return self.ln_ys[0] + (x / self.xs[0]).ln();
            }
            let (x0, x1) = (self.xs[n - 2], self.xs[n - 1]);
            let (l0, l1) = (self.ln_ys[n - 2], self.ln_ys[n - 1]);
            if !l1.is_finite() {
                return f64::NEG_INFINITY;
            }
            if l0.is_finite() {
                let k = (l1 - l0) / (x1.ln() - x0.ln());
                return l1 + k * (x.ln() - x1.ln());
            }
            // linear continuation of a segment starting at zero
            let slope = l1.exp() / (x1 - x0);
            return (l1.exp() + slope * (x - x1)).ln();
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        self.segment_ln(i, x)
    }

    pub fn value(&self, x: f64) -> Ext {
        if x <= 0.0 {
            return Ext::ZERO;
        }
        Ext::from_ln(self.ln_value(x))
    }

    /// Generalized inverse `inf{x : f(x) >= y}` of the interpolant.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let ly = y.ln();
        let n = self.xs.len();
        if let Some(c) = self.ceiling {
            let top = self.ln_value(c);
            if ly > top {
                return Err(Error::Range { value: y });
            }
        }
        // first knot with value >= y
        let j = self.ln_ys.partition_point(|&l| l < ly);
        if j == n {
            // beyond the last knot: invert the continuation
            let lx = bisect_ln(
                |lx| self.ln_value(lx.exp()) >= ly,
                self.xs[n - 1].ln(),
                self.xs[n - 1].ln() + 60.0,
            );
            return lx.ok_or(Error::Range { value: y }).map(f64::exp);
        }
        if j == 0 {
            let l0 = self.ln_ys[0];
            let k = if n >= 2 && self.ln_ys[1].is_finite() {
                ((self.ln_ys[1] - l0) / (self.xs[1].ln() - self.xs[0].ln())).max(1.0)
            } else {
                1.0
            };
            return Ok((self.xs[0].ln() + (ly - l0) / k).exp());
        }
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let (l0, l1) = (self.ln_ys[j - 1], self.ln_ys[j]);
        if l0.is_finite() {
            if l1 == l0 {
                return Ok(x1);
            }
            let t = (ly - l0) / (l1 - l0);
            Ok((x0.ln() + t * (x1.ln() - x0.ln())).exp())
        } else {
            let t = (ly - l1).exp();
            Ok(x0 + t * (x1 - x0))
        }
    }
}

impl super::YoungLike for Table {
    fn ln_value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        Table::ln_value(self, x)
    }

    fn value(&self, x: f64) -> Ext {
        Table::value(self, x)
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        Table::inverse(self, y)
    }
}

fn bisect_ln<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut tries = 0;
    while !pred(hi) {
        lo = hi;
        hi += 60.0;
        tries += 1;
        if tries > 12 {
            return None;
        }
    }
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        let m = 0.5 * (lo + hi);
        if pred(m) {
            hi = m;
        } else {
            lo = m;
        }
    }
    Some(hi)
}
