//! Tower specs refuting a candidate integrability function.
//!
//! Given a candidate `ρ` (resp. `ζ`) that fails to dominate the optimal
//! function, a geometric sweep `x = 2^k` finds `x_n → ∞` with
//! `candidate(x_n) < opt(x_n 2^{-n})`. The maximizer `t_n` of the
//! supremum defining `opt` becomes the height of the `n`-th atom, its value
//! is `x_n`, and its mass is
//! `p_n = C 2^{-n} (ψ(τ_n)/τ_n + candidate(x_n))⁻¹`. The regeneration time
//! and `f` then have finite norms while the series for `E φ(θ|S|)`
//! diverges for every `θ > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ln_add_exp;
use crate::young::{rho_of, zeta_of, GeneralizedYoungFn, SupFn, YoungFn, YoungLike};

use super::{TowerAtom, TowerSpec};

/// Largest height kept as an atom of the generated spec; taller atoms only
/// live in the series.
const MAX_SPEC_HEIGHT: f64 = 9_007_199_254_740_992.0; // 2^53

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// Atoms `n = 1..=n_max` are searched for.
    pub n_max: usize,
    /// The sweep stops at `x = 2^k_max`.
    pub k_max: i32,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            n_max: 60,
            k_max: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `E_ν φ(θ|S|) = R Σ φ(θ x_n τ_n) / τ_n p_n`.
    Nu,
    /// `E_π φ(θ|S|) >= ½ Σ φ(θ x_n t_n / 2) p_n`.
    Pi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakOptStep {
    pub n: usize,
    pub x: f64,
    /// Maximizer of the supremum at `x 2^{-n}`.
    pub t: f64,
    /// Integer height `max(1, ⌊t⌋)`.
    pub height: f64,
    pub ln_p: f64,
}

/// Exact series generator over every atom found by the search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakOptSeries {
    pub kind: SeriesKind,
    pub phi: YoungFn,
    /// `ln R` of the law made of all found atoms plus the tail atom.
    pub ln_r: f64,
    /// `(x_n, height_n, ln p_n)` for `n = 0, 1, ...`.
    pub atoms: Vec<(f64, f64, f64)>,
}

impl WeakOptSeries {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Natural log of the `n`-th term at `θ`.
    pub fn ln_term(&self, n: usize, theta: f64) -> f64 {
        let (x, h, ln_p) = self.atoms[n];
        match self.kind {
            SeriesKind::Nu => self.ln_r + self.phi.ln_value(theta * x * h) - h.ln() + ln_p,
            SeriesKind::Pi => {
                -std::f64::consts::LN_2 + self.phi.ln_value(theta * x * h / 2.0) + ln_p
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakOptSpec {
    /// Truncated spec: atoms with height at most `2^53` plus a residual
    /// atom (`h = 1`, `f̃ = 0`) carrying the remaining mass.
    pub spec: TowerSpec,
    pub steps: Vec<WeakOptStep>,
    /// The constant `C` making the masses sum to one.
    pub normalizer: f64,
    /// Mass reserved for atoms beyond the last one found.
    pub tail_mass: f64,
    /// Whether all `n_max` atoms were found before the sweep ran out.
    pub complete: bool,
    pub series: WeakOptSeries,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum WeakOptOutcome {
    Refuted(Box<WeakOptSpec>),
    /// No `x <= 2^k_max` violates the candidate even for `n = 1`.
    NotRefuted {
        budget: SearchBudget,
    },
}

impl WeakOptOutcome {
    pub fn refuted(&self) -> Option<&WeakOptSpec> {
        match self {
            WeakOptOutcome::Refuted(s) => Some(s),
            WeakOptOutcome::NotRefuted { .. } => None,
        }
    }
}

fn sup_of(g: GeneralizedYoungFn) -> std::sync::Arc<SupFn> {
    match g {
        GeneralizedYoungFn::Sup(s) => s,
        _ => unreachable!("rho_of and zeta_of return supremum functions"),
    }
}

/// Sweep `x = 2^k`, `k` increasing across `n`, for
/// `candidate(x) < opt(x 2^{-n})`.
fn search(opt: &SupFn, candidate: &dyn YoungLike, budget: &SearchBudget) -> Vec<(usize, f64, f64)> {
    let mut found = Vec::new();
    let mut k = 0;
    'outer: for n in 1..=budget.n_max {
        loop {
            k += 1;
            if k > budget.k_max {
                break 'outer;
            }
            let x = 2f64.powi(k);
            let (ln_opt, t) = opt.ln_sup(x * 0.5f64.powi(n as i32));
            if ln_opt.is_finite() && t.is_finite() && ln_opt > candidate.ln_value(x) {
                found.push((n, x, t));
                break;
            }
        }
    }
    found
}

fn assemble(
    kind: SeriesKind,
    phi: &YoungFn,
    psi: &YoungFn,
    candidate: &dyn YoungLike,
    found: Vec<(usize, f64, f64)>,
    budget: &SearchBudget,
) -> WeakOptOutcome {
    if found.is_empty() {
        return WeakOptOutcome::NotRefuted { budget: *budget };
    }
    let ln_psi_ratio = |h: f64| psi.ln_value(h) - h.ln();
    // atom 0: x_0 = 0, height 1
    let mut raw: Vec<(usize, f64, f64, f64, f64)> = vec![(0, 0.0, 1.0, 1.0, -ln_psi_ratio(1.0))];
    for &(n, x, t) in &found {
        let h = t.floor().max(1.0);
        let ln_q = -(n as f64) * std::f64::consts::LN_2
            - ln_add_exp(ln_psi_ratio(h), candidate.ln_value(x));
        raw.push((n, x, t, h, ln_q));
    }
    // denominators are at least ψ(1), so the tail beyond the last atom has
    // mass at most 2^{-n_last} / min(1, ψ(1))
    let n_last = found.last().unwrap().0;
    let ln_tail = -(n_last as f64) * std::f64::consts::LN_2 - psi.ln_value(1.0).min(0.0);
    let ln_total = raw.iter().fold(ln_tail, |acc, r| ln_add_exp(acc, r.4));
    let steps: Vec<WeakOptStep> = raw
        .iter()
        .map(|&(n, x, t, height, ln_q)| WeakOptStep {
            n,
            x,
            t,
            height,
            ln_p: ln_q - ln_total,
        })
        .collect();
    let tail_mass = (ln_tail - ln_total).exp();

    let mut atoms: Vec<TowerAtom> = steps
        .iter()
        .filter(|s| s.height <= MAX_SPEC_HEIGHT && s.ln_p.exp() > 0.0)
        .map(|s| TowerAtom {
            label: format!("n{}", s.n),
            alpha: s.ln_p.exp(),
            f_tilde: s.x,
            h: s.height as u64,
        })
        .collect();
    let kept: f64 = atoms.iter().map(|a| a.alpha).sum();
    atoms.push(TowerAtom {
        label: "residual".into(),
        alpha: (1.0 - kept).max(0.0),
        f_tilde: 0.0,
        h: 1,
    });
    atoms.retain(|a| a.alpha > 0.0);

    // R of the untruncated law: Σ p/h over found atoms plus the tail atom
    let ln_inv_r = steps.iter().fold(ln_tail - ln_total, |acc, s| {
        ln_add_exp(acc, s.ln_p - s.height.ln())
    });
    let series = WeakOptSeries {
        kind,
        phi: phi.clone(),
        ln_r: -ln_inv_r,
        atoms: steps.iter().map(|s| (s.x, s.height, s.ln_p)).collect(),
    };
    WeakOptOutcome::Refuted(Box::new(WeakOptSpec {
        spec: TowerSpec::new(atoms),
        normalizer: (-ln_total).exp(),
        tail_mass,
        complete: found.len() == budget.n_max,
        steps,
        series,
    }))
}

/// Refutes `rho_candidate` as an integrability condition on `f` under `π`
/// for the chain started from `ν`, if the sweep finds violations.
/// `ψ` must satisfy `ψ(x)/x → 0` at the origin and `ψ(1) >= 1`.
pub fn weak_opt_nu_spec(
    phi: &YoungFn,
    psi: &YoungFn,
    rho_candidate: &dyn YoungLike,
    budget: &SearchBudget,
) -> Result<WeakOptOutcome> {
    check_budget(budget)?;
    let opt = sup_of(rho_of(phi, psi)?);
    let found = search(&opt, rho_candidate, budget);
    Ok(assemble(
        SeriesKind::Nu,
        phi,
        psi,
        rho_candidate,
        found,
        budget,
    ))
}

/// Stationary mirror of [`weak_opt_nu_spec`] using `ζ`.
pub fn weak_opt_pi_spec(
    phi: &YoungFn,
    psi: &YoungFn,
    zeta_candidate: &dyn YoungLike,
    budget: &SearchBudget,
) -> Result<WeakOptOutcome> {
    check_budget(budget)?;
    let opt = sup_of(zeta_of(phi, psi)?);
    let found = search(&opt, zeta_candidate, budget);
    Ok(assemble(
        SeriesKind::Pi,
        phi,
        psi,
        zeta_candidate,
        found,
        budget,
    ))
}

fn check_budget(b: &SearchBudget) -> Result<()> {
    if b.n_max == 0 || b.k_max < 1 || b.k_max > 1020 {
        return Err(Error::Parameter(
            "search budget needs n_max >= 1 and 1 <= k_max <= 1020".into(),
        ));
    }
    Ok(())
}
