//! Functions derived from a pair of Young functions: the suprema ρ and ζ,
//! Legendre conjugates, the auxiliary η, κ, ϑ and the composed φ̃.

use std::sync::Arc;

use serde::Serialize;

use super::domination::{dominates, DominationWitness, GridSpec};
use super::{generic_inverse_ln, Table, YoungFn, YoungLike};
use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::numeric::{grid_golden_max, ln_1m_exp, log_grid, Edge};

/// Grid size and bounds of the inner supremum searches.
const SUP_POINTS: usize = 400;
const SUP_LO: f64 = 1e-8;
const SUP_HI: f64 = 1e8;
/// Values above this are reported as the infinity marker.
const LN_CAP: f64 = 690.775_527_898_213_7; // ln(1e300)
/// Knots per tabulated derived function.
pub const TABLE_KNOTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupKind {
    /// `ρ(x) = sup_y (φ(xy) − ψ(y)) / y`
    Rho,
    /// `ζ(x) = sup_y φ(xy) − ψ(y) / y`
    Zeta,
}

#[derive(Debug)]
pub struct SupFn {
    pub kind: SupKind,
    pub phi: YoungFn,
    pub psi: YoungFn,
}

/// Supremum over `u = ln t` of `g(u)`. Searches `[lo, hi]` first and widens
/// toward whichever edge holds the maximum. Returns `(u, value, unbounded)`.
pub(crate) fn sup_widening<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    cap: f64,
) -> (f64, f64, bool) {
    let (u, v, edge) = grid_golden_max(&g, lo, hi, SUP_POINTS, 1e-11);
    match edge {
        Edge::Interior => (u, v, false),
        Edge::Upper => {
            let (u2, v2, edge2) = grid_golden_max(&g, hi * 1e-2, cap.max(hi), SUP_POINTS, 1e-11);
            if edge2 == Edge::Upper {
                (u2, f64::INFINITY, true)
            } else if v2 >= v {
                (u2, v2, false)
            } else {
                (u, v, false)
            }
        }
        Edge::Lower => {
            let (u2, v2, _) = grid_golden_max(&g, 1e-300, lo * 1e2, SUP_POINTS, 1e-11);
            if v2 >= v {
                (u2, v2, false)
            } else {
                (u, v, false)
            }
        }
    }
}

impl SupFn {
    fn ln_objective(&self, x: f64, u: f64) -> f64 {
        let y = u.exp();
        let a = self.phi.ln_value(x * y);
        let b = match self.kind {
            SupKind::Rho => self.psi.ln_value(y),
            SupKind::Zeta => self.psi.ln_value(y) - u,
        };
        if !(b < a) {
            return f64::NEG_INFINITY;
        }
        let diff = a + ln_1m_exp(b - a);
        match self.kind {
            SupKind::Rho => diff - u,
            SupKind::Zeta => diff,
        }
    }

    /// `(ln value, argmax y)` at `x > 0`.
    pub fn ln_sup(&self, x: f64) -> (f64, f64) {
        let (u, v, unbounded) = sup_widening(
            |u| self.ln_objective(x, u),
            SUP_LO,
            SUP_HI,
            1e300 / x.max(1.0),
        );
        if unbounded {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (v, u.exp())
        }
    }
}

/// A nondecreasing convex function with values in `[0, ∞]`.
#[derive(Debug, Clone)]
pub enum GeneralizedYoungFn {
    Young(YoungFn),
    /// ρ or ζ, evaluated lazily by a supremum search per point.
    Sup(Arc<SupFn>),
    Table(Table),
}

impl GeneralizedYoungFn {
    /// Samples the function on `n` log-spaced knots over `[lo, hi]`.
    pub fn tabulate(&self, lo: f64, hi: f64, n: usize) -> Result<Table> {
        tabulate(self, &log_grid(lo, hi, n))
    }

    pub fn as_young(&self) -> Option<&YoungFn> {
        match self {
            GeneralizedYoungFn::Young(f) => Some(f),
            _ => None,
        }
    }
}

impl YoungLike for GeneralizedYoungFn {
    fn ln_value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match self {
            GeneralizedYoungFn::Young(f) => f.ln_value(x),
            GeneralizedYoungFn::Sup(s) => s.ln_sup(x).0,
            GeneralizedYoungFn::Table(t) => t.ln_value(x),
        }
    }

    fn value(&self, x: f64) -> Ext {
        match self {
            GeneralizedYoungFn::Young(f) => f.value(x),
            GeneralizedYoungFn::Table(t) => t.value(x),
            GeneralizedYoungFn::Sup(_) => {
                let l = self.ln_value(x);
                if l > LN_CAP {
                    Ext::Infinite
                } else {
                    Ext::from_ln(l)
                }
            }
        }
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        match self {
            GeneralizedYoungFn::Young(f) => f.inverse(y),
            GeneralizedYoungFn::Table(t) => t.inverse(y),
            GeneralizedYoungFn::Sup(_) => {
                if y.is_nan() || y < 0.0 {
                    return Err(Error::Domain(format!("inverse needs y >= 0, got {y}")));
                }
                if y == 0.0 {
                    return Ok(0.0);
                }
                self.inverse_ln(y.ln())
            }
        }
    }

    fn inverse_ln(&self, ly: f64) -> Result<f64> {
        match self {
            GeneralizedYoungFn::Young(f) => f.inverse_ln(ly),
            _ => generic_inverse_ln(|x| self.ln_value(x), ly),
        }
    }
}

/// Tabulates `f` at the given abscissae. Small numerical dips are flattened
/// so the result is nondecreasing; the first infinite value sets the
/// ceiling at the previous knot.
pub fn tabulate(f: &dyn YoungLike, xs: &[f64]) -> Result<Table> {
    let mut kx = Vec::with_capacity(xs.len());
    let mut ky = Vec::with_capacity(xs.len());
    let mut ceiling = None;
    let mut run = f64::NEG_INFINITY;
    for &x in xs {
        let l = f.ln_value(x);
        if l == f64::INFINITY {
            ceiling = Some(kx.last().copied().unwrap_or(0.0));
            break;
        }
        if l.is_nan() {
            return Err(Error::Domain(format!("tabulation produced NaN at x={x}")));
        }
        run = run.max(l);
        kx.push(x);
        ky.push(run);
    }
    if kx.is_empty() {
        // infinite everywhere on the grid: zero up to the first knot
        return Table::from_ln_knots(
            vec![xs[0] * 0.5],
            vec![f64::NEG_INFINITY],
            Some(xs[0] * 0.5),
        );
    }
    Table::from_ln_knots(kx, ky, ceiling)
}

/// Checks `ψ(x)/x → 0` at the origin and `ψ(1) >= 1`.
pub fn check_assumption_a(psi: &YoungFn) -> Result<()> {
    if psi.origin_slope() > 0.0 {
        return Err(Error::Precondition(
            "psi must satisfy psi(x)/x -> 0 as x -> 0; normalize it first".into(),
        ));
    }
    let at_one = psi.value(1.0).to_f64();
    if at_one < 1.0 - 1e-12 {
        return Err(Error::Precondition(format!(
            "psi(1) must be >= 1, got {at_one}; normalize it first"
        )));
    }
    Ok(())
}

/// `ρ_{φ,ψ}(x) = sup_{y>0} (φ(xy) − ψ(y)) / y`, evaluated lazily.
pub fn rho_of(phi: &YoungFn, psi: &YoungFn) -> Result<GeneralizedYoungFn> {
    check_assumption_a(psi)?;
    Ok(GeneralizedYoungFn::Sup(Arc::new(SupFn {
        kind: SupKind::Rho,
        phi: phi.clone(),
        psi: psi.clone(),
    })))
}

/// `ζ_{φ,ψ}(x) = sup_{y>0} φ(xy) − ψ(y) / y`, evaluated lazily.
pub fn zeta_of(phi: &YoungFn, psi: &YoungFn) -> Result<GeneralizedYoungFn> {
    let ratio = psi.value(1e-6).to_f64() / 1e-6;
    if psi.origin_slope() > 0.0 || ratio > 1e-2 {
        return Err(Error::Precondition(format!(
            "zeta needs lim_(x->0) psi(x)/x = 0; psi(1e-6)/1e-6 = {ratio}"
        )));
    }
    Ok(GeneralizedYoungFn::Sup(Arc::new(SupFn {
        kind: SupKind::Zeta,
        phi: phi.clone(),
        psi: psi.clone(),
    })))
}

/// Legendre conjugate `f*(y) = sup_x (xy − f(x))`. Closed form for scaled
/// powers and the linear function; tabulated otherwise.
pub fn conjugate(f: &YoungFn) -> Result<GeneralizedYoungFn> {
    let (factor, base) = match f {
        YoungFn::Scaled { factor, inner } => (*factor, inner.as_ref()),
        other => (1.0, other),
    };
    match base {
        YoungFn::Power { p } if *p > 1.0 => {
            let q = p / (p - 1.0);
            let c = (p - 1.0) * p.powf(-q) * factor.powf(1.0 - q);
            Ok(GeneralizedYoungFn::Young(YoungFn::power(q)?.scaled(c)))
        }
        YoungFn::Power { .. } | YoungFn::Linear => {
            let t = Table::from_ln_knots(vec![factor], vec![f64::NEG_INFINITY], Some(factor))?;
            Ok(GeneralizedYoungFn::Table(t))
        }
        _ => Ok(GeneralizedYoungFn::Table(conjugate_numeric(
            f,
            1e-10,
            1e30,
            TABLE_KNOTS,
        )?)),
    }
}

/// Numerical conjugate tabulated at `n` log-spaced points of `[lo, hi]`.
/// Each point maximizes `xy − f(x)` over a log grid in `x` refined by
/// golden section; an objective still growing at `x = 1e300` marks the
/// ceiling.
pub fn conjugate_numeric(f: &dyn YoungLike, lo: f64, hi: f64, n: usize) -> Result<Table> {
    struct Conj<'a>(&'a dyn YoungLike);
    impl YoungLike for Conj<'_> {
        fn ln_value(&self, y: f64) -> f64 {
            let obj = |u: f64| {
                let x = u.exp();
                match self.0.value(x) {
                    Ext::Infinite => f64::NEG_INFINITY,
                    Ext::Finite(v) => x * y - v,
                }
            };
            let (_, v, unbounded) = sup_widening(obj, 1e-12, 1e12, 1e300);
            if unbounded || v == f64::INFINITY {
                f64::INFINITY
            } else if v > 0.0 {
                v.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
    tabulate(&Conj(f), &log_grid(lo, hi, n))
}

#[derive(Debug, Clone)]
pub struct EtaResult {
    pub eta: Table,
    /// The tabulation stopped early because a conjugate became infinite or
    /// the composition left the finite range.
    pub restricted: bool,
}

/// `η = (ψ*)⁻¹ ∘ φ*`, tabulated.
pub fn eta_nu(phi: &YoungFn, psi: &YoungFn) -> Result<EtaResult> {
    let phi_c = conjugate(phi)?;
    let psi_c = conjugate(psi)?;
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    let mut restricted = false;
    let mut run = f64::NEG_INFINITY;
    for z in log_grid(1e-8, 1e8, TABLE_KNOTS) {
        let l = phi_c.ln_value(z);
        if l == f64::INFINITY {
            restricted = true;
            break;
        }
        let v = match psi_c.inverse_ln(l) {
            Ok(v) => v,
            Err(Error::Range { .. }) => {
                restricted = true;
                break;
            }
            Err(e) => return Err(e),
        };
        run = run.max(v.ln());
        xs.push(z);
        ls.push(run);
    }
    if xs.is_empty() {
        return Err(Error::Precondition(
            "conjugate of phi is infinite on the whole grid".into(),
        ));
    }
    Ok(EtaResult {
        eta: Table::from_ln_knots(xs, ls, None)?,
        restricted,
    })
}

/// `η(x) = φ⁻¹(ψ(x) / x)`, tabulated; the function whose conjugate composes
/// with φ to give the size of ζ.
pub fn eta_pi(phi: &YoungFn, psi: &YoungFn) -> Result<EtaResult> {
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    let mut restricted = false;
    let mut run = f64::NEG_INFINITY;
    for x in log_grid(1e-8, 1e8, TABLE_KNOTS) {
        let v = phi.inverse_ln(psi.ln_value(x) - x.ln())?;
        if !(v.is_finite()) || v.ln() > LN_CAP {
            restricted = true;
            break;
        }
        run = run.max(v.ln());
        xs.push(x);
        ls.push(run);
    }
    Ok(EtaResult {
        eta: Table::from_ln_knots(xs, ls, None)?,
        restricted,
    })
}

/// `ψ̃(x) = ψ(x) / x`.
struct TildePsi<'a>(&'a YoungFn);

impl YoungLike for TildePsi<'_> {
    fn ln_value(&self, x: f64) -> f64 {
        self.0.ln_value(x) - x.ln()
    }
}

#[derive(Debug, Clone)]
pub struct KappaResult {
    /// κ, through its inverse `κ⁻¹(x) = ζ⁻¹(x) ψ̃⁻¹(x)`.
    pub kappa: Table,
    /// `ϑ = κ⁻¹ ∘ ψ̃`.
    pub theta: Table,
}

/// Builds κ and ϑ from ζ and ψ.
pub fn kappa_of(zeta: &dyn YoungLike, psi: &YoungFn) -> Result<KappaResult> {
    let tilde = TildePsi(psi);
    let probe = log_grid(1e-6, 1e6, 200);
    let vals: Vec<f64> = probe.iter().map(|&x| tilde.ln_value(x)).collect();
    if vals.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "psi(x)/x must be strictly increasing".into(),
        ));
    }
    if psi.origin_slope() > 0.0 {
        return Err(Error::Precondition("psi(x)/x must vanish at 0".into()));
    }
    if tilde.ln_value(1e8) - tilde.ln_value(1.0) < 10f64.ln() {
        return Err(Error::Precondition(
            "psi(x)/x must grow without bound".into(),
        ));
    }

    // ζ⁻¹ is read off a table; lazy suprema are too slow to invert per knot
    let zeta_t = tabulate(zeta, &log_grid(1e-10, 1e200, 4 * TABLE_KNOTS))?;
    let zeta_inv = |y: f64| match zeta_t.inverse(y) {
        Err(Error::Range { .. }) => Ok(None),
        other => other.map(Some),
    };

    // κ from knots (κ⁻¹(x), x)
    let mut ks = Vec::with_capacity(4 * TABLE_KNOTS);
    let mut kl = Vec::with_capacity(4 * TABLE_KNOTS);
    for x in log_grid(1e-12, 1e300, 4 * TABLE_KNOTS) {
        let lx = x.ln();
        let Some(a) = zeta_inv(x)? else { break };
        let b = tilde.inverse_ln(lx)?;
        let u = a * b;
        if !(u > 0.0 && u.is_finite()) {
            continue;
        }
        if ks.last().is_some_and(|&prev| u <= prev) {
            continue;
        }
        ks.push(u);
        kl.push(lx);
    }
    let kappa = Table::from_ln_knots(ks, kl, None)?;

    let mut ts = Vec::with_capacity(4 * TABLE_KNOTS);
    let mut tl = Vec::with_capacity(4 * TABLE_KNOTS);
    let mut run = f64::NEG_INFINITY;
    for x in log_grid(1e-8, 1e8, 4 * TABLE_KNOTS) {
        let lt = tilde.ln_value(x);
        // ϑ leaves the f64 range; the table ends here
        if lt > LN_CAP {
            break;
        }
        let Some(z) = zeta_inv(lt.exp())? else { break };
        let l = z.ln() + x.ln();
        if !l.is_finite() && l > 0.0 {
            break;
        }
        run = run.max(l);
        ts.push(x);
        tl.push(run);
    }
    let theta = Table::from_ln_knots(ts, tl, None)?;
    Ok(KappaResult { kappa, theta })
}

/// `φ̃ = (ψ* ∘ ρ*)*`, tabulated.
pub fn tilde_phi(psi: &YoungFn, rho: &YoungFn) -> Result<GeneralizedYoungFn> {
    let psi_c = conjugate(psi)?;
    let rho_c = conjugate(rho)?;
    struct Composed<'a>(&'a GeneralizedYoungFn, &'a GeneralizedYoungFn);
    impl YoungLike for Composed<'_> {
        fn ln_value(&self, z: f64) -> f64 {
            match self.1.value(z) {
                Ext::Infinite => f64::INFINITY,
                Ext::Finite(w) => self.0.ln_value(w),
            }
        }
    }
    let inner = tabulate(
        &Composed(&psi_c, &rho_c),
        &log_grid(1e-10, 1e30, TABLE_KNOTS),
    )?;
    let out = conjugate_numeric(&inner, 1e-6, 1e6, TABLE_KNOTS)?;
    Ok(GeneralizedYoungFn::Table(out))
}

/// Outcome of [`normalize_assumption_a`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub psi: YoungFn,
    pub changed: bool,
    /// original ⪯ normalized
    pub forward: DominationWitness,
    /// normalized ⪯ original
    pub backward: DominationWitness,
}

/// Replaces `ψ` by an equivalent Young function with `ψ(x)/x → 0` at the
/// origin and `ψ(1) >= 1`.
///
/// A positive slope at the origin is removed by damping the derivative on
/// `[0, 1]` (`ψ_A'(t) = ψ'(t) min(1, t)`), which changes `ψ` only by an
/// additive constant beyond 1; the result is then rescaled if `ψ(1) < 1`.
/// Equivalence is reported as domination witnesses in both directions.
pub fn normalize_assumption_a(psi: &YoungFn) -> Normalized {
    let mut out = psi.clone();
    if out.origin_slope() > 0.0 {
        out = YoungFn::damped(out, 1.0);
    }
    let at_one = out.value(1.0).to_f64();
    if at_one < 1.0 {
        out = out.scaled(1.0 / at_one);
    }
    let grid = GridSpec::default();
    let forward = dominates(psi, &out, &grid);
    let backward = dominates(&out, psi, &grid);
    Normalized {
        changed: out != *psi,
        psi: out,
        forward,
        backward,
    }
}

/// `g(r) = sup_x x / φ⁻¹(φ(x) / r)` over a log grid on `[1e-6, 1e6]`.
pub fn improvement_factor(phi: &dyn YoungLike, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!(
            "improvement factor needs r >= 1, got {r}"
        )));
    }
    let mut best = 0.0f64;
    for x in log_grid(1e-6, 1e6, 400) {
        let inv = phi.inverse_ln(phi.ln_value(x) - r.ln())?;
        if inv > 0.0 {
            best = best.max(x / inv);
        }
    }
    Ok(best)
}

/// Smallest `C` with `F(sx)/F(x) >= C⁻¹ G(sx)/G(x)` over the grid, where
/// `F = φ⁻¹` and `G = ψ⁻¹`; `x` ranges over `xs`, `s` over `ss` (all >= 1).
pub fn inverse_growth_constant(
    phi: &dyn YoungLike,
    psi: &dyn YoungLike,
    xs: &[f64],
    ss: &[f64],
) -> Result<f64> {
    let mut c = 0.0f64;
    for &x in xs {
        let (fx, gx) = (phi.inverse(x)?.ln(), psi.inverse(x)?.ln());
        for &s in ss {
            let (fs, gs) = (phi.inverse(s * x)?.ln(), psi.inverse(s * x)?.ln());
            c = c.max(((gs - gx) - (fs - fx)).exp());
        }
    }
    Ok(c)
}
