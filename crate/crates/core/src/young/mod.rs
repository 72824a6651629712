//! Young functions and their calculus.
//!
//! [`YoungFn`] covers the concrete families (powers, stretched exponentials,
//! power-log products, tabulated knots and two wrappers used for
//! normalization). [`GeneralizedYoungFn`] additionally houses functions that
//! may be `+∞`: the derived functions ρ and ζ, conjugates and compositions.
//!
//! Everything works in log space where it can: `ln_value` is the primary
//! evaluation entry point, so stretched exponentials stay usable far past
//! the range of `f64`.

mod closed_form;
mod derived;
mod domination;
mod table;

pub use closed_form::{
    closed_form_lookup, evaluate_case, fit_exponents, golden_cases, CaseParams, ClosedForm,
    FitKind, FittedExponents, GoldenCase, GoldenOutcome, Target, EXPONENT_TOL, LOG_POWER_TOL,
};
pub use derived::{
    check_assumption_a, conjugate, conjugate_numeric, eta_nu, eta_pi, improvement_factor,
    inverse_growth_constant, kappa_of, normalize_assumption_a, rho_of, tilde_phi, zeta_of,
    EtaResult, GeneralizedYoungFn, KappaResult, Normalized, SupFn, SupKind,
};
pub use domination::{dominates, DominationWitness, GridSpec};
pub use table::Table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::numeric::{bisect_log, gauss_legendre, ln_1m_exp, ln_add_exp};

/// Anything evaluable as a nondecreasing function on `[0, ∞)` vanishing at 0.
pub trait YoungLike: Send + Sync {
    /// `ln f(x)` for `x > 0`; `-inf` where `f` vanishes, `+inf` where `f`
    /// is infinite.
    fn ln_value(&self, x: f64) -> f64;

    fn value(&self, x: f64) -> Ext {
        if x <= 0.0 {
            return Ext::ZERO;
        }
        Ext::from_ln(self.ln_value(x))
    }

    fn eval(&self, x: f64) -> Result<Ext> {
        if x.is_nan() || x < 0.0 {
            return Err(Error::Domain(format!("evaluation needs x >= 0, got {x}")));
        }
        Ok(self.value(x))
    }

    /// Generalized inverse `inf{x >= 0 : f(x) >= y}`.
    fn inverse(&self, y: f64) -> Result<f64> {
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("inverse needs y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        self.inverse_ln(y.ln())
    }

    /// Generalized inverse at `y = exp(ly)`, usable far beyond `f64` range.
    fn inverse_ln(&self, ly: f64) -> Result<f64> {
        generic_inverse_ln(|x| self.ln_value(x), ly)
    }
}

/// Inverse of a nondecreasing function given through its log, by bracketing
/// and log-space bisection.
pub(crate) fn generic_inverse_ln<F: Fn(f64) -> f64>(ln_f: F, ly: f64) -> Result<f64> {
    if ly.is_nan() {
        return Err(Error::Domain("inverse of NaN".into()));
    }
    if ly == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let reaches = |x: f64| ln_f(x) >= ly;
    let mut hi = 1.0f64;
    while !reaches(hi) {
        hi *= 1e3;
        if hi > 1e300 {
            return Err(Error::Range { value: ly.exp() });
        }
    }
    let mut lo = hi;
    loop {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Ok(0.0);
        }
        if !reaches(lo) {
            break;
        }
    }
    Ok(bisect_log(reaches, lo, hi, 1e-14))
}

/// Declarative description of a [`YoungFn`]; the serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum YoungSpec {
    Power {
        p: f64,
    },
    ExpPower {
        alpha: f64,
    },
    PowerLog {
        p: f64,
        c: f64,
    },
    Linear,
    Tabulated {
        knots: Vec<(f64, f64)>,
        #[serde(default)]
        ceiling: Option<f64>,
    },
    Scaled {
        factor: f64,
        inner: Box<YoungSpec>,
    },
    /// Origin patch produced by [`normalize_assumption_a`].
    Damped {
        knee: f64,
        inner: Box<YoungSpec>,
    },
}

/// A Young function: convex, increasing, zero at zero.
///
/// Families whose nominal formula is not convex near the origin carry a
/// `patch` point `x*`: below it the function is the chord `f(x*) x / x*`,
/// with `x*` the tangency point from the origin (so the patched function is
/// the greatest convex minorant of the formula).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "YoungSpec", into = "YoungSpec")]
pub enum YoungFn {
    Power {
        p: f64,
    },
    ExpPower {
        alpha: f64,
        patch: Option<f64>,
    },
    PowerLog {
        p: f64,
        c: f64,
        patch: Option<f64>,
    },
    Linear,
    Tabulated(Table),
    Scaled {
        factor: f64,
        inner: Box<YoungFn>,
    },
    /// `ψ_A(x) = (x ψ(x) − ∫_0^x ψ) / knee` for `x <= knee`, `ψ(x) − offset`
    /// beyond; the derivative is `ψ'(t) min(1, t / knee)`.
    Damped {
        knee: f64,
        offset: f64,
        inner: Box<YoungFn>,
    },
}

impl YoungFn {
    pub fn power(p: f64) -> Result<YoungFn> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::Parameter(format!(
                "power exponent must be >= 1, got {p}"
            )));
        }
        Ok(YoungFn::Power { p })
    }

    /// `exp(x^alpha) - 1`, patched near the origin when `alpha < 1`.
    pub fn exp_power(alpha: f64) -> Result<YoungFn> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::Parameter(format!(
                "stretched exponent must be > 0, got {alpha}"
            )));
        }
        let patch = (alpha < 1.0).then(|| exp_power_tangent(alpha));
        Ok(YoungFn::ExpPower { alpha, patch })
    }

    /// `x^p (ln(e + x))^c`, patched near the origin if the formula fails to
    /// be convex there.
    pub fn power_log(p: f64, c: f64) -> Result<YoungFn> {
        if p.is_nan() || p < 1.0 || c.is_nan() {
            return Err(Error::Parameter(format!(
                "power-log needs p >= 1, got p={p}, c={c}"
            )));
        }
        if p == 1.0 && c < 0.0 {
            return Err(Error::Parameter(
                "power-log with p = 1 and c < 0 is not superlinear".into(),
            ));
        }
        let patch = power_log_tangent(p, c);
        Ok(YoungFn::PowerLog { p, c, patch })
    }

    pub fn tabulated(knots: &[(f64, f64)], ceiling: Option<f64>) -> Result<YoungFn> {
        Ok(YoungFn::Tabulated(Table::from_knots(knots, ceiling)?))
    }

    /// `factor * inner`, merging nested scalings.
    pub fn scaled(self, factor: f64) -> YoungFn {
        match self {
            YoungFn::Scaled { factor: f0, inner } => {
                let k = f0 * factor;
                if k == 1.0 {
                    *inner
                } else {
                    YoungFn::Scaled { factor: k, inner }
                }
            }
            other if factor == 1.0 => other,
            other => YoungFn::Scaled {
                factor,
                inner: Box::new(other),
            },
        }
    }

    pub(crate) fn damped(inner: YoungFn, knee: f64) -> YoungFn {
        let offset = inner.primitive(knee) / knee;
        YoungFn::Damped {
            knee,
            offset,
            inner: Box::new(inner),
        }
    }

    /// `lim_{x→0} f(x)/x`, from the structure of the family.
    pub fn origin_slope(&self) -> f64 {
        match self {
            YoungFn::Power { p } => {
                if *p > 1.0 {
                    0.0
                } else {
                    1.0
                }
            }
            YoungFn::ExpPower { alpha, patch } => match patch {
                Some(xp) => self.chord_slope(*xp),
                None if *alpha > 1.0 => 0.0,
                None => 1.0,
            },
            YoungFn::PowerLog { p, patch, .. } => match patch {
                Some(xp) => self.chord_slope(*xp),
                None if *p > 1.0 => 0.0,
                None => 1.0,
            },
            YoungFn::Linear => 1.0,
            YoungFn::Tabulated(t) => {
                let knots = t.knots();
                match (knots.get(1), knots.get(2)) {
                    (Some(&(x1, y1)), Some(&(x2, y2))) if y1.to_f64() > 0.0 => {
                        let k = (y2.ln() - y1.ln()) / (x2.ln() - x1.ln());
                        if k > 1.0 + 1e-9 {
                            0.0
                        } else {
                            y1.to_f64() / x1
                        }
                    }
                    _ => 0.0,
                }
            }
            YoungFn::Scaled { factor, inner } => factor * inner.origin_slope(),
            YoungFn::Damped { .. } => 0.0,
        }
    }

    fn chord_slope(&self, xp: f64) -> f64 {
        self.formula_ln(xp).exp() / xp
    }

    /// Log of the unpatched formula for the families carrying a patch.
    fn formula_ln(&self, x: f64) -> f64 {
        match self {
            YoungFn::ExpPower { alpha, .. } => ln_expm1_pow(x, *alpha),
            YoungFn::PowerLog { p, c, .. } => p * x.ln() + c * (std::f64::consts::E + x).ln().ln(),
            _ => self.ln_value(x),
        }
    }

    /// `∫_0^x f(t) dt`.
    pub fn primitive(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            YoungFn::Power { p } => x.powf(p + 1.0) / (p + 1.0),
            YoungFn::Linear => 0.5 * x * x,
            YoungFn::ExpPower { patch, .. } | YoungFn::PowerLog { patch, .. } => {
                let (head, start) = match patch {
                    Some(xp) => {
                        let s = self.chord_slope(*xp);
                        let a = x.min(*xp);
                        (0.5 * s * a * a, *xp)
                    }
                    None => (0.0, 0.0),
                };
                if x <= start {
                    return head;
                }
                if let (YoungFn::ExpPower { alpha, .. }, None) = (self, patch) {
                    if *alpha == 1.0 {
                        return x.exp_m1() - x;
                    }
                }
                head + gauss_legendre(|t| self.formula_ln(t).exp(), start, x, 16)
            }
            YoungFn::Tabulated(t) => gauss_legendre(|s| t.value(s).to_f64(), 0.0, x, 32),
            YoungFn::Scaled { factor, inner } => factor * inner.primitive(x),
            YoungFn::Damped {
                knee,
                offset,
                inner,
            } => {
                let k = *knee;
                if x <= k {
                    // ∫_0^x (t ψ(t) − Ψ(t)) / k dt with Ψ = ∫ψ
                    gauss_legendre(
                        |t| (t * inner.value(t).to_f64() - inner.primitive(t)) / k,
                        0.0,
                        x,
                        8,
                    )
                } else {
                    self.primitive(k) + inner.primitive(x) - inner.primitive(k) - offset * (x - k)
                }
            }
        }
    }

    pub fn spec(&self) -> YoungSpec {
        self.clone().into()
    }
}

/// `ln(exp(x^alpha) - 1)` without overflow.
fn ln_expm1_pow(x: f64, alpha: f64) -> f64 {
    let u = x.powf(alpha);
    if u < 30.0 {
        u.exp_m1().ln()
    } else {
        u + ln_1m_exp(-u)
    }
}

/// Tangency point from the origin for `exp(x^alpha) - 1`, `alpha < 1`:
/// with `u = x^alpha`, solves `e^u (alpha u - 1) + 1 = 0`.
fn exp_power_tangent(alpha: f64) -> f64 {
    let g = |u: f64| u.exp() * (alpha * u - 1.0) + 1.0;
    let (mut lo, mut hi) = (1.0 / alpha - 1.0, 1.0 / alpha);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    if lo <= 0.0 {
        lo = 1e-12;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if g(m) > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    hi.powf(1.0 / alpha)
}

/// Tangency point from the origin for `x^p (ln(e+x))^c`, if the formula has
/// a region where `x f'(x) < f(x)` (only possible for `c < 0`).
fn power_log_tangent(p: f64, c: f64) -> Option<f64> {
    if c >= 0.0 {
        return None;
    }
    // x f'/f = p + c x / ((e + x) ln(e + x))
    let elasticity = |x: f64| {
        let e = std::f64::consts::E + x;
        p + c * x / (e * e.ln())
    };
    let grid = crate::numeric::log_grid(1e-6, 1e12, 2000);
    let last_bad = grid.iter().rposition(|&x| elasticity(x) < 1.0 + 1e-3)?;
    if last_bad + 1 == grid.len() {
        return None;
    }
    Some(grid[last_bad + 1])
}

impl YoungLike for YoungFn {
    fn ln_value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            YoungFn::Power { p } => p * x.ln(),
            YoungFn::ExpPower { patch, .. } | YoungFn::PowerLog { patch, .. } => match patch {
                Some(xp) if x < *xp => self.chord_slope(*xp).ln() + x.ln(),
                _ => self.formula_ln(x),
            },
            YoungFn::Linear => x.ln(),
            YoungFn::Tabulated(t) => t.ln_value(x),
            YoungFn::Scaled { factor, inner } => factor.ln() + inner.ln_value(x),
            YoungFn::Damped {
                knee,
                offset,
                inner,
            } => {
                if x <= *knee {
                    let v = (x * inner.value(x).to_f64() - inner.primitive(x)) / knee;
                    if v > 0.0 {
                        v.ln()
                    } else {
                        // second-order expansion ψ'(0) x² / (2 knee) near 0
                        (0.5 * inner.origin_slope() * x * x / knee).ln()
                    }
                } else {
                    let l = inner.ln_value(x);
                    l + ln_1m_exp((offset.ln() - l).min(0.0))
                }
            }
        }
    }

    fn value(&self, x: f64) -> Ext {
        if x <= 0.0 {
            return Ext::ZERO;
        }
        match self {
            YoungFn::Power { p } => Ext::from_f64(x.powf(*p)),
            YoungFn::Linear => Ext::Finite(x),
            YoungFn::ExpPower { alpha, patch: None } => Ext::from_f64(x.powf(*alpha).exp_m1()),
            YoungFn::Scaled { factor, inner } => inner.value(x) * *factor,
            YoungFn::Tabulated(t) => t.value(x),
            _ => Ext::from_ln(self.ln_value(x)),
        }
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        if let YoungFn::Tabulated(t) = self {
            return t.inverse(y);
        }
        if y.is_nan() || y < 0.0 {
            return Err(Error::Domain(format!("inverse needs y >= 0, got {y}")));
        }
        match self {
            YoungFn::Power { p } => Ok(y.powf(1.0 / p)),
            YoungFn::Linear => Ok(y),
            _ if y == 0.0 => Ok(0.0),
            _ => self.inverse_ln(y.ln()),
        }
    }

    fn inverse_ln(&self, ly: f64) -> Result<f64> {
        if ly == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        match self {
            YoungFn::Power { p } => Ok((ly / p).exp()),
            YoungFn::Linear => Ok(ly.exp()),
            YoungFn::ExpPower { alpha, patch } => {
                if let Some(xp) = patch {
                    let s = self.chord_slope(*xp);
                    if ly < (s * xp).ln() {
                        return Ok((ly - s.ln()).exp());
                    }
                }
                Ok(ln_add_exp(0.0, ly).powf(1.0 / alpha))
            }
            YoungFn::Tabulated(t) if ly < 700.0 => t.inverse(ly.exp()),
            YoungFn::Scaled { factor, inner } => inner.inverse_ln(ly - factor.ln()),
            _ => generic_inverse_ln(|x| self.ln_value(x), ly),
        }
    }
}

impl TryFrom<YoungSpec> for YoungFn {
    type Error = Error;

    fn try_from(spec: YoungSpec) -> Result<YoungFn> {
        match spec {
            YoungSpec::Power { p } => YoungFn::power(p),
            YoungSpec::ExpPower { alpha } => YoungFn::exp_power(alpha),
            YoungSpec::PowerLog { p, c } => YoungFn::power_log(p, c),
            YoungSpec::Linear => Ok(YoungFn::Linear),
            YoungSpec::Tabulated { knots, ceiling } => YoungFn::tabulated(&knots, ceiling),
            YoungSpec::Scaled { factor, inner } => {
                if !(factor > 0.0 && factor.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "scale factor must be positive, got {factor}"
                    )));
                }
                Ok(YoungFn::try_from(*inner)?.scaled(factor))
            }
            YoungSpec::Damped { knee, inner } => {
                if !(knee > 0.0 && knee.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "damping knee must be positive, got {knee}"
                    )));
                }
                Ok(YoungFn::damped(YoungFn::try_from(*inner)?, knee))
            }
        }
    }
}

impl From<YoungFn> for YoungSpec {
    fn from(f: YoungFn) -> YoungSpec {
        match f {
            YoungFn::Power { p } => YoungSpec::Power { p },
            YoungFn::ExpPower { alpha, .. } => YoungSpec::ExpPower { alpha },
            YoungFn::PowerLog { p, c, .. } => YoungSpec::PowerLog { p, c },
            YoungFn::Linear => YoungSpec::Linear,
            YoungFn::Tabulated(t) => YoungSpec::Tabulated {
                knots: t
                    .knots()
                    .into_iter()
                    .map(|(x, y)| (x, y.to_f64()))
                    .collect(),
                ceiling: t.ceiling(),
            },
            YoungFn::Scaled { factor, inner } => YoungSpec::Scaled {
                factor,
                inner: Box::new((*inner).into()),
            },
            YoungFn::Damped { knee, inner, .. } => YoungSpec::Damped {
                knee,
                inner: Box::new((*inner).into()),
            },
        }
    }
}

/// Writes `(x, f(x))` rows to a two-column CSV.
pub fn write_csv<W: std::io::Write>(f: &dyn YoungLike, xs: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "value"])?;
    for &x in xs {
        w.write_record([x.to_string(), f.value(x).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slope(f: &YoungFn, a: f64, b: f64) -> f64 {
        (f.value(b).to_f64() - f.value(a).to_f64()) / (b - a)
    }

    fn assert_convex_on_grid(f: &YoungFn, lo: f64, hi: f64) {
        let g = crate::numeric::log_grid(lo, hi, 400);
        for w in g.windows(3) {
            let (s1, s2) = (slope(f, w[0], w[1]), slope(f, w[1], w[2]));
            assert!(
                s1 <= s2 * (1.0 + 1e-9) + 1e-15,
                "{f:?} not convex near {}: {s1} > {s2}",
                w[1]
            );
        }
    }

    #[test]
    fn basic_values() {
        assert_eq!(
            YoungFn::power(2.0).unwrap().eval(3.0).unwrap(),
            Ext::Finite(9.0)
        );
        let e = YoungFn::exp_power(1.0).unwrap();
        assert!((e.eval(1.0).unwrap().to_f64() - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        for f in [
            YoungFn::Linear,
            e.clone(),
            YoungFn::power_log(2.0, -1.0).unwrap(),
        ] {
            assert_eq!(f.eval(0.0).unwrap(), Ext::ZERO);
        }
        assert!(matches!(e.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn inverses() {
        let p2 = YoungFn::power(2.0).unwrap();
        assert_eq!(p2.inverse(9.0).unwrap(), 3.0);
        assert_eq!(p2.inverse(0.0).unwrap(), 0.0);
        let e = YoungFn::exp_power(1.0).unwrap();
        assert!((e.inverse(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() < 1e-9);
        let pl = YoungFn::power_log(2.0, 1.0).unwrap();
        for &x in &[0.01, 1.0, 37.0, 1e5] {
            let y = pl.value(x).to_f64();
            assert!((pl.inverse(y).unwrap() / x - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn patched_families_are_convex() {
        for alpha in [0.3, 0.5, 0.8] {
            let f = YoungFn::exp_power(alpha).unwrap();
            assert_convex_on_grid(&f, 1e-3, 200.0);
            // beyond the patch the nominal formula is untouched
            let YoungFn::ExpPower {
                patch: Some(xp), ..
            } = f
            else {
                panic!()
            };
            let x = 2.0 * xp;
            assert!((f.value(x).to_f64() / x.powf(alpha).exp_m1() - 1.0).abs() < 1e-12);
        }
        for (p, c) in [
            (2.0, -1.0),
            (2.0, -2.0),
            (1.5, -1.0),
            (2.0, 1.0),
            (1.0, 2.0),
        ] {
            assert_convex_on_grid(&YoungFn::power_log(p, c).unwrap(), 1e-3, 1e4);
        }
        assert_convex_on_grid(&YoungFn::exp_power(2.0).unwrap(), 1e-3, 5.0);
    }

    #[test]
    fn patch_point_is_a_tangent() {
        let f = YoungFn::exp_power(0.5).unwrap();
        let YoungFn::ExpPower {
            patch: Some(xp), ..
        } = f
        else {
            panic!()
        };
        let h = 1e-6 * xp;
        let deriv = (f.formula_ln(xp + h).exp() - f.formula_ln(xp - h).exp()) / (2.0 * h);
        assert!((deriv / f.chord_slope(xp) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn huge_arguments_stay_in_log_space() {
        let e = YoungFn::exp_power(1.0).unwrap();
        assert_eq!(e.value(1e4), Ext::Infinite);
        assert!((e.ln_value(1e4) - 1e4).abs() < 1e-9);
    }

    #[test]
    fn damped_linear_is_superlinear_at_origin() {
        let d = YoungFn::damped(YoungFn::Linear, 1.0);
        // x²/2 below the knee, x − 1/2 above
        assert!((d.value(0.5).to_f64() - 0.125).abs() < 1e-12);
        assert!((d.value(3.0).to_f64() - 2.5).abs() < 1e-12);
        assert!((d.value(1e-5).to_f64() - 5e-11).abs() < 1e-20);
        assert_eq!(d.origin_slope(), 0.0);
    }

    #[test]
    fn primitive_matches_quadrature() {
        for f in [
            YoungFn::exp_power(1.0).unwrap(),
            YoungFn::exp_power(0.5).unwrap(),
            YoungFn::power(3.0).unwrap(),
        ] {
            let q = gauss_legendre(|t| f.value(t).to_f64(), 0.0, 2.5, 64);
            assert!((f.primitive(2.5) / q - 1.0).abs() < 1e-6, "{f:?}");
        }
    }

    #[test]
    fn spec_round_trip() {
        let f = YoungFn::exp_power(0.5).unwrap().scaled(3.0);
        let json = serde_json::to_string(&f).unwrap();
        let g: YoungFn = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
        let bad: std::result::Result<YoungFn, _> =
            serde_json::from_str(r#"{"family":"power","p":0.5}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_csv(&YoungFn::power(2.0).unwrap(), &[0.0, 2.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,value\n0,0\n2,4\n");
    }
}
