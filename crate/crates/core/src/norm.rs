//! Orlicz norms `‖X‖_φ = inf{C > 0 : E φ(|X|/C) <= 1}` of atomic laws,
//! empirical samples and truncated atom series.
//!
//! `C ↦ E φ(|X|/C)` is nonincreasing, so the norm is found by bisection in
//! `ln C`. Expectations are accumulated in log space so that huge atoms
//! (tower chains with heights in the thousands) do not overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::numeric::{bisect_log, ln_add_exp};
use crate::young::YoungLike;

/// Finite probability law on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDist {
    atoms: Vec<(f64, f64)>,
}

impl AtomicDist {
    /// Atoms `(value, prob)`: probabilities positive and summing to one
    /// within `1e-12`, values finite.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<AtomicDist> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::Distribution(format!("atom value {v} is not finite")));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Distribution(format!(
                    "atom probability {p} is not positive"
                )));
            }
        }
        let total = kahan_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Distribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(AtomicDist { atoms })
    }

    /// Normalizes nonnegative weights; zero-weight atoms are dropped.
    pub fn from_weights(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<AtomicDist> {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 != 0.0).collect();
        if pairs.iter().any(|p| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(Error::Distribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total = kahan_sum(pairs.iter().map(|a| a.1));
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        AtomicDist::new_unchecked_sum(pairs.into_iter().map(|(v, w)| (v, w / total)).collect())
    }

    fn new_unchecked_sum(atoms: Vec<(f64, f64)>) -> Result<AtomicDist> {
        if atoms.iter().any(|a| !a.0.is_finite()) {
            return Err(Error::Distribution("atom values must be finite".into()));
        }
        Ok(AtomicDist { atoms })
    }

    /// Empirical law of a sample, one atom of mass `1/n` per observation.
    pub fn empirical(sample: &[f64]) -> Result<AtomicDist> {
        AtomicDist::from_weights(sample.iter().map(|&v| (v, 1.0)))
    }

    pub fn point(v: f64) -> AtomicDist {
        AtomicDist {
            atoms: vec![(v, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        kahan_sum(self.atoms.iter().map(|&(v, p)| p * g(v)))
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn max_abs(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.0.abs()))
    }

    /// Pushforward under `f`, with equal values merged and atoms sorted.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<AtomicDist> {
        AtomicDist::new_unchecked_sum(self.atoms.iter().map(|&(v, p)| (f(v), p)).collect())
            .map(|d| d.merged())
    }

    /// Same law with atoms sorted by value and duplicates merged.
    pub fn merged(&self) -> AtomicDist {
        let mut a = self.atoms.clone();
        a.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(a.len());
        for (v, p) in a {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        AtomicDist { atoms: out }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        kahan_sum(self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1)).min(1.0)
    }
}

fn kahan_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormStatus {
    Finite,
    InfiniteCertified,
    BudgetExhausted,
}

/// Partial expectation that already exceeds the target at the largest
/// tested constant, so it exceeds it at every smaller one as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceData {
    pub c_max: f64,
    pub partial_expectation: Ext,
    pub terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: Ext,
    pub status: NormStatus,
    /// `E g(|X|/C) - target` at the returned `C`.
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DivergenceData>,
}

impl NormResult {
    fn zero() -> NormResult {
        NormResult {
            value: Ext::ZERO,
            status: NormStatus::Finite,
            residual: 0.0,
            certificate: None,
        }
    }

    /// Finite value, or `+inf` for every other status.
    pub fn to_f64(&self) -> f64 {
        match self.status {
            NormStatus::Finite => self.value.to_f64(),
            _ => f64::INFINITY,
        }
    }
}

/// `ln Σ p_i exp(ln_g(|x_i| / c))`.
fn ln_expectation<G: Fn(f64) -> f64>(atoms: &[(f64, f64)], ln_g: &G, c: f64) -> f64 {
    atoms.iter().fold(f64::NEG_INFINITY, |acc, &(v, p)| {
        ln_add_exp(acc, p.ln() + ln_g(v.abs() / c))
    })
}

/// Infimum of `C` with `E g(|X|/C) <= target`, bracketed from `[lo, hi]`
/// and widened by factors of `1e3` as needed.
fn solve<G: Fn(f64) -> f64>(
    atoms: &[(f64, f64)],
    ln_g: G,
    target: f64,
    lo: f64,
    hi: f64,
) -> NormResult {
    let lt = target.ln();
    let ok = |c: f64| ln_expectation(atoms, &ln_g, c) <= lt;
    let (mut lo, mut hi) = (lo, hi);
    while !ok(hi) && hi < 1e300 {
        lo = hi;
        hi *= 1e3;
    }
    while ok(lo) && lo > 1e-300 {
        hi = lo;
        lo /= 1e3;
    }
    if !ok(hi) {
        return NormResult {
            value: Ext::Infinite,
            status: NormStatus::BudgetExhausted,
            residual: f64::NAN,
            certificate: None,
        };
    }
    let c = bisect_log(ok, lo, hi, 1e-14);
    let residual = ln_expectation(atoms, &ln_g, c).exp() - target;
    NormResult {
        value: Ext::Finite(c),
        status: NormStatus::Finite,
        residual,
        certificate: None,
    }
}

fn check_target(target: f64) -> Result<()> {
    if target == 1.0 || target == 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "norm target must be 1 or 2, got {target}"
        )))
    }
}

fn initial_bracket(phi: &dyn YoungLike, m: f64, target: f64) -> (f64, f64) {
    let lo = phi.inverse(target * 1e3).map(|u| m / u).unwrap_or(m * 1e-3);
    let hi = phi.inverse(target * 1e-3).map(|u| m / u).unwrap_or(m * 1e3);
    let (lo, hi) = if lo.is_finite() && lo > 0.0 {
        (lo, hi)
    } else {
        (m * 1e-3, m * 1e3)
    };
    (lo.min(hi), hi.max(lo))
}

/// `inf{C > 0 : E φ(|X|/C) <= target}` for an exact atomic law.
pub fn orlicz_norm(dist: &AtomicDist, phi: &dyn YoungLike, target: f64) -> Result<NormResult> {
    check_target(target)?;
    let m = dist.max_abs();
    if m == 0.0 {
        return Ok(NormResult::zero());
    }
    let (lo, hi) = initial_bracket(phi, m, target);
    Ok(solve(dist.atoms(), |t| phi.ln_value(t), target, lo, hi))
}

/// Norm of the empirical law of `sample`.
pub fn sample_norm(sample: &[f64], phi: &dyn YoungLike, target: f64) -> Result<NormResult> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    orlicz_norm(&AtomicDist::empirical(sample)?, phi, target)
}

/// `‖f‖_{μ,ρ}` from the pushforward law of `f` under `μ`.
pub fn function_norm(f_law: &AtomicDist, rho: &dyn YoungLike) -> Result<NormResult> {
    orlicz_norm(f_law, rho, 1.0)
}

/// Solves `E exp((|X|/C)^α) = 2`. This is the customary quasi-norm for
/// `exp(x^α) - 1`; it is equivalent to the Orlicz norm of the convex patch
/// of that function but is not itself a norm when `α < 1`.
pub fn psi_alpha_norm(dist: &AtomicDist, alpha: f64) -> Result<NormResult> {
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let m = dist.max_abs();
    if m == 0.0 {
        return Ok(NormResult::zero());
    }
    // C at which a point mass at m would give 2e3 and 1 + 1e-3
    let lo = m / (2e3f64).ln().powf(1.0 / alpha);
    let hi = m / (1.0 + 1e-3f64).ln().powf(1.0 / alpha);
    Ok(solve(dist.atoms(), |t| t.powf(alpha), 2.0, lo, hi))
}

pub fn psi_alpha_sample_norm(sample: &[f64], alpha: f64) -> Result<NormResult> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    psi_alpha_norm(&AtomicDist::empirical(sample)?, alpha)
}

/// Countable law given term by term, e.g. a weak-optimality construction
/// before truncation.
pub trait AtomSeries: Sync {
    /// The `n`-th atom `(value, prob)`.
    fn atom(&self, n: usize) -> (f64, f64);

    /// Upper bound on `Σ_{k>=n} p_k φ(|x_k|/c)`, when the generator can
    /// supply one.
    fn tail_bound(&self, _n: usize, _c: f64, _phi: &dyn YoungLike) -> Option<f64> {
        None
    }
}

/// Largest constant tried when certifying divergence of a series.
pub const SERIES_C_MAX: f64 = 1e12;

/// Norm of a countable law from its first `budget` atoms.
///
/// If the partial expectation already exceeds `target` at
/// [`SERIES_C_MAX`], the norm is certified infinite on `[1e-12, 1e12]`.
/// Otherwise the partial law gives a lower bound; with a tail bound the
/// matching upper bound is computed and the result is finite when the two
/// agree to `1e-9`. Without one the lower bound is returned flagged
/// `budget_exhausted`.
pub fn series_norm(
    series: &dyn AtomSeries,
    phi: &dyn YoungLike,
    target: f64,
    budget: usize,
) -> Result<NormResult> {
    check_target(target)?;
    if budget == 0 {
        return Err(Error::EmptyInput);
    }
    let atoms: Vec<(f64, f64)> = (0..budget).map(|n| series.atom(n)).collect();
    let ln_phi = |t: f64| phi.ln_value(t);
    let at_max = ln_expectation(&atoms, &ln_phi, SERIES_C_MAX);
    if at_max > target.ln() {
        return Ok(NormResult {
            value: Ext::Infinite,
            status: NormStatus::InfiniteCertified,
            residual: f64::INFINITY,
            certificate: Some(DivergenceData {
                c_max: SERIES_C_MAX,
                partial_expectation: Ext::from_ln(at_max),
                terms: budget,
            }),
        });
    }
    let m = atoms.iter().fold(0.0f64, |m, a| m.max(a.0.abs()));
    if m == 0.0 {
        if series.tail_bound(budget, 1.0, phi) == Some(0.0) {
            return Ok(NormResult::zero());
        }
        return Ok(NormResult {
            status: NormStatus::BudgetExhausted,
            ..NormResult::zero()
        });
    }
    let (lo, hi) = initial_bracket(phi, m, target);
    let lower = solve(&atoms, ln_phi, target, lo, hi);
    let Ext::Finite(c_low) = lower.value else {
        return Ok(lower);
    };
    let upper_ok = |c: f64| match series.tail_bound(budget, c, phi) {
        Some(t) => Some(ln_expectation(&atoms, &ln_phi, c).exp() + t <= target),
        None => None,
    };
    if upper_ok(c_low).is_none() {
        return Ok(NormResult {
            status: NormStatus::BudgetExhausted,
            ..lower
        });
    }
    let mut hi = c_low;
    while !upper_ok(hi).unwrap_or(false) {
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(NormResult {
                status: NormStatus::BudgetExhausted,
                ..lower
            });
        }
    }
    let c_up = bisect_log(|c| upper_ok(c).unwrap_or(false), c_low, hi, 1e-14);
    if c_up / c_low - 1.0 <= 1e-9 {
        let residual = ln_expectation(&atoms, &ln_phi, c_up).exp() - target;
        Ok(NormResult {
            value: Ext::Finite(c_up),
            status: NormStatus::Finite,
            residual,
            certificate: None,
        })
    } else {
        Ok(NormResult {
            status: NormStatus::BudgetExhausted,
            ..lower
        })
    }
}

/// Reads a one-column CSV of reals; a non-numeric first row is treated as
/// a header.
pub fn read_sample_csv<R: std::io::Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        match field.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Io(format!(
                    "row {}: `{field}` is not a number",
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::young::YoungFn;
    use proptest::prelude::*;

    fn pw(p: f64) -> YoungFn {
        YoungFn::power(p).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn constants_and_two_atoms() {
        for &c in &[0.3, 1.0, 17.0] {
            for &p in &[1.0, 2.0, 3.5] {
                let r = orlicz_norm(&AtomicDist::point(c), &pw(p), 1.0).unwrap();
                assert!(close(r.value.to_f64(), c, 1e-12), "c={c} p={p}");
            }
        }
        let a = 5.0;
        let d = AtomicDist::new(vec![(0.0, 0.5), (a, 0.5)]).unwrap();
        let r = orlicz_norm(&d, &pw(2.0), 1.0).unwrap();
        assert!(close(r.value.to_f64(), a / 2f64.sqrt(), 1e-12));
        assert_eq!(r.status, NormStatus::Finite);
        assert!(r.residual.abs() < 1e-9);
    }

    #[test]
    fn function_norm_examples() {
        let one = AtomicDist::point(1.0);
        assert!(close(
            function_norm(&one, &pw(2.0)).unwrap().value.to_f64(),
            1.0,
            1e-12
        ));
        let two = AtomicDist::new(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
        assert!(close(
            function_norm(&two, &pw(2.0)).unwrap().value.to_f64(),
            5f64.sqrt(),
            1e-12
        ));
        assert_eq!(
            function_norm(&AtomicDist::point(0.0), &pw(2.0))
                .unwrap()
                .value,
            Ext::ZERO
        );
    }

    #[test]
    fn psi_alpha_constants() {
        let c = 3.0;
        let r = psi_alpha_sample_norm(&[c, c, c], 1.0).unwrap();
        assert!(close(r.value.to_f64(), c / 2f64.ln(), 1e-12));
        let r = psi_alpha_sample_norm(&[c], 2.0).unwrap();
        assert!(close(r.value.to_f64(), c / 2f64.ln().sqrt(), 1e-12));
        assert!(r.residual.abs() < 1e-9);
        assert_eq!(psi_alpha_sample_norm(&[], 1.0), Err(Error::EmptyInput));
        assert_eq!(sample_norm(&[], &pw(2.0), 1.0), Err(Error::EmptyInput));
    }

    #[test]
    fn target_two_and_huge_atoms() {
        let d = AtomicDist::point(4.0);
        let r = orlicz_norm(&d, &pw(2.0), 2.0).unwrap();
        assert!(close(r.value.to_f64(), 4.0 / 2f64.sqrt(), 1e-12));
        assert!(orlicz_norm(&d, &pw(2.0), 3.0).is_err());
        // exp(x) - 1 of an atom at 1e4 overflows a float but not the log
        let e = YoungFn::exp_power(1.0).unwrap();
        let d = AtomicDist::new(vec![(1e4, 1e-200), (0.0, 1.0 - 1e-200)]).unwrap();
        let r = orlicz_norm(&d, &e, 1.0).unwrap();
        // p (exp(1e4/C) - 1) = 1  =>  C ≈ 1e4 / ln(1e200)
        assert!(close(r.value.to_f64(), 1e4 / (1e200f64.ln()), 1e-9));
    }

    #[test]
    fn ceiling_jump_returns_infimum() {
        // φ = 0 on [0, 1], +inf above: the norm of |X| is max|X|
        let phi = YoungFn::tabulated(&[(0.5, 0.0), (1.0, 0.0)], Some(1.0)).unwrap();
        let d = AtomicDist::new(vec![(2.0, 0.25), (-6.0, 0.75)]).unwrap();
        let r = orlicz_norm(&d, &phi, 1.0).unwrap();
        assert!(close(r.value.to_f64(), 6.0, 1e-12));
    }

    #[test]
    fn distribution_validation() {
        assert!(AtomicDist::new(vec![(1.0, 0.5)]).is_err());
        assert!(AtomicDist::new(vec![(1.0, 0.5), (2.0, 0.5 + 1e-9)]).is_err());
        assert!(AtomicDist::new(vec![(f64::NAN, 1.0)]).is_err());
        assert!(AtomicDist::new(vec![]).is_err());
        let d = AtomicDist::from_weights([(1.0, 2.0), (1.0, 1.0), (3.0, 1.0)])
            .unwrap()
            .merged();
        assert_eq!(d.atoms(), &[(1.0, 0.75), (3.0, 0.25)]);
        assert_eq!(d.cdf(2.0), 0.75);
    }

    struct Geometric {
        ratio: f64,
    }

    // atom n sits at ratio^n with mass 2^{-n-1}
    impl AtomSeries for Geometric {
        fn atom(&self, n: usize) -> (f64, f64) {
            (self.ratio.powi(n as i32), 0.5f64.powi(n as i32 + 1))
        }
        fn tail_bound(&self, n: usize, c: f64, _phi: &dyn YoungLike) -> Option<f64> {
            // only for φ = x^2: Σ_{k>=n} 2^{-k-1} ratio^{2k} / c^2
            let q = self.ratio * self.ratio / 2.0;
            (q < 1.0).then(|| 0.5 * q.powi(n as i32) / (1.0 - q) / (c * c))
        }
    }

    #[test]
    fn series_norms() {
        // ratio 1.2: E X^2 = Σ 2^{-k-1} 1.44^k = 0.5 / (1 - 0.72)
        let g = Geometric { ratio: 1.2 };
        let r = series_norm(&g, &pw(2.0), 1.0, 200).unwrap();
        assert_eq!(r.status, NormStatus::Finite);
        assert!(close(r.value.to_f64(), (0.5f64 / 0.28).sqrt(), 1e-9));
        // ratio 2: E X^2 diverges
        let g = Geometric { ratio: 2.0 };
        let r = series_norm(&g, &pw(2.0), 1.0, 200).unwrap();
        assert_eq!(r.status, NormStatus::InfiniteCertified);
        assert_eq!(r.certificate.unwrap().terms, 200);
        // too few terms and no usable tail bound
        let r = series_norm(&g, &pw(2.0), 1.0, 5).unwrap();
        assert_eq!(r.status, NormStatus::BudgetExhausted);
    }

    #[test]
    fn sample_csv() {
        let s = read_sample_csv("x\n1.5\n-2\n".as_bytes()).unwrap();
        assert_eq!(s, vec![1.5, -2.0]);
        assert!(read_sample_csv("1\nfoo\n".as_bytes()).is_err());
    }

    #[test]
    fn json_record() {
        let r = orlicz_norm(&AtomicDist::point(2.0), &pw(2.0), 1.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "finite");
        assert!(v.get("certificate").is_none());
    }

    fn law() -> impl Strategy<Value = AtomicDist> {
        prop::collection::vec((-50.0f64..50.0, 0.01f64..1.0), 1..8)
            .prop_map(|v| AtomicDist::from_weights(v).unwrap())
    }

    fn family() -> impl Strategy<Value = YoungFn> {
        prop_oneof![
            (1.0f64..5.0).prop_map(|p| YoungFn::power(p).unwrap()),
            (0.5f64..2.0).prop_map(|a| YoungFn::exp_power(a).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn homogeneity(d in law(), phi in family()) {
            let base = orlicz_norm(&d, &phi, 1.0).unwrap().value.to_f64();
            for c in [0.0, 0.1, 1.0, 7.0] {
                let scaled = d.map(|v| c * v).unwrap();
                let r = orlicz_norm(&scaled, &phi, 1.0).unwrap().value.to_f64();
                prop_assert!((r - c * base).abs() <= 1e-9 * (c * base).max(1e-12), "c={c}: {r} vs {}", c * base);
            }
        }

        #[test]
        fn residual_within_tolerance(d in law(), phi in family()) {
            let r = orlicz_norm(&d, &phi, 1.0).unwrap();
            if r.value.to_f64() > 0.0 {
                prop_assert!(r.residual >= -1e-9 && r.residual <= 1e-6, "residual {}", r.residual);
            }
        }

        #[test]
        fn triangle_inequality(
            pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, 0.01f64..1.0), 1..8),
            phi in family(),
        ) {
            let x = AtomicDist::from_weights(pts.iter().map(|t| (t.0, t.2))).unwrap();
            let y = AtomicDist::from_weights(pts.iter().map(|t| (t.1, t.2))).unwrap();
            let s = AtomicDist::from_weights(pts.iter().map(|t| (t.0 + t.1, t.2))).unwrap();
            let n = |d: &AtomicDist| orlicz_norm(d, &phi, 1.0).unwrap().value.to_f64();
            prop_assert!(n(&s) <= n(&x) + n(&y) + 1e-9);
        }

        #[test]
        fn monotone_in_phi(d in law(), p in 1.0f64..4.0, q in 0.0f64..2.0) {
            // φ2 = (1 + q) x^p >= φ1 = x^p pointwise
            let a = orlicz_norm(&d, &pw(p), 1.0).unwrap().value.to_f64();
            let b = orlicz_norm(&d, &pw(p).scaled(1.0 + q), 1.0).unwrap().value.to_f64();
            prop_assert!(a <= b + 1e-9);
        }
    }
}
