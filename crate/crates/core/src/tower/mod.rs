//! The tower chain built from `(α, f̃, h)`.
//!
//! States are pairs `(x, k)` with `1 <= k <= h(x)`. From `(x, k)` with
//! `k < h(x)` the chain climbs deterministically to `(x, k + 1)`; from the
//! top `(x, h(x))` it restarts at `(y, 1)` with `y ~ ν`,
//! `ν(y) = R α(y) / h(y)`. The tops form an atom (`m = 1`, `δ = 1`), each
//! block from `(x, 1)` has length `h(x)` and sum `f̃(x) h(x)`, and the
//! stationary law puts mass `α(x) / h(x)` on every level of `x`.
//!
//! Everything about the chain is therefore exactly computable, which makes
//! it the reference instance for the bound checks.

mod weak_opt;

pub use weak_opt::{
    weak_opt_nu_spec, weak_opt_pi_spec, SearchBudget, SeriesKind, WeakOptOutcome, WeakOptSeries,
    WeakOptSpec, WeakOptStep,
};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::AtomicDist;
use crate::numeric::log_grid;
use crate::split_chain::MinorizedChain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerAtom {
    pub label: String,
    pub alpha: f64,
    pub f_tilde: f64,
    pub h: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerSpec {
    pub atoms: Vec<TowerAtom>,
    /// Accept specs without a height-1 atom. Such chains are periodic but
    /// still have a unique stationary law and exact block laws, which is
    /// all the exact computations need.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_periodic: bool,
}

impl TowerSpec {
    pub fn new(atoms: Vec<TowerAtom>) -> TowerSpec {
        TowerSpec {
            atoms,
            allow_periodic: false,
        }
    }

    pub fn periodic_ok(mut self) -> TowerSpec {
        self.allow_periodic = true;
        self
    }

    /// Checks that `α` is a probability, heights are at least 1, values
    /// are finite, and (unless `allow_periodic`) some atom has height 1,
    /// without which the chain is not aperiodic.
    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::TowerSpec("no atoms".into()));
        }
        for a in &self.atoms {
            if !(a.alpha > 0.0 && a.alpha.is_finite()) {
                return Err(Error::TowerSpec(format!(
                    "atom `{}`: α mass must be positive",
                    a.label
                )));
            }
            if a.h == 0 {
                return Err(Error::TowerSpec(format!(
                    "atom `{}`: height must be at least 1",
                    a.label
                )));
            }
            if !a.f_tilde.is_finite() {
                return Err(Error::TowerSpec(format!(
                    "atom `{}`: value must be finite",
                    a.label
                )));
            }
        }
        let total: f64 = self.atoms.iter().map(|a| a.alpha).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::TowerSpec(format!("α masses sum to {total}, not 1")));
        }
        if !self.allow_periodic && !self.atoms.iter().any(|a| a.h == 1) {
            return Err(Error::TowerSpec(
                "no atom of height 1: the chain is not strongly aperiodic, hence not Harris ergodic".into(),
            ));
        }
        Ok(())
    }

    /// `E_π f = Σ α(x) f̃(x)`.
    pub fn pi_mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.alpha * a.f_tilde).sum()
    }

    /// Same spec with `f̃` shifted to have mean zero under `α`.
    pub fn centered(&self) -> TowerSpec {
        let m = self.pi_mean();
        TowerSpec {
            atoms: self
                .atoms
                .iter()
                .map(|a| TowerAtom {
                    f_tilde: a.f_tilde - m,
                    ..a.clone()
                })
                .collect(),
            ..self.clone()
        }
    }

    /// Same spec with `f̃ ≡ 0`.
    pub fn with_zero_f(&self) -> TowerSpec {
        TowerSpec {
            atoms: self
                .atoms
                .iter()
                .map(|a| TowerAtom {
                    f_tilde: 0.0,
                    ..a.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

/// `α(h = n) ∝ 2^{-n}` for `n = 1..=levels`, each level split evenly
/// between `f̃ = +1` and `f̃ = -1`.
pub fn geometric_tower(levels: u64) -> TowerSpec {
    let z: f64 = (1..=levels).map(|n| 0.5f64.powi(n as i32)).sum();
    let mut atoms = Vec::new();
    for n in 1..=levels {
        let w = 0.5f64.powi(n as i32) / z / 2.0;
        atoms.push(TowerAtom {
            label: format!("h{n}+"),
            alpha: w,
            f_tilde: 1.0,
            h: n,
        });
        atoms.push(TowerAtom {
            label: format!("h{n}-"),
            alpha: w,
            f_tilde: -1.0,
            h: n,
        });
    }
    TowerSpec::new(atoms)
}

/// Random spec: `n_atoms` atoms with heights in `1..=h_max` (the first has
/// height 1), masses drawn uniformly and normalized, values in
/// `[-f_max, f_max]`.
pub fn random_spec<R: Rng + ?Sized>(
    rng: &mut R,
    n_atoms: usize,
    h_max: u64,
    f_max: f64,
) -> TowerSpec {
    let n_atoms = n_atoms.max(1);
    let w: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = w.iter().sum();
    let atoms = (0..n_atoms)
        .map(|i| TowerAtom {
            label: format!("a{i}"),
            alpha: w[i] / z,
            f_tilde: rng.random_range(-f_max..=f_max),
            h: if i == 0 {
                1
            } else {
                rng.random_range(1..=h_max)
            },
        })
        .collect();
    let mut spec = TowerSpec::new(atoms);
    // absorb rounding so the masses sum to 1 within tolerance
    let total: f64 = spec.atoms.iter().map(|a| a.alpha).sum();
    spec.atoms[0].alpha += 1.0 - total;
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TowerState {
    pub atom: usize,
    pub level: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerExactLaws {
    /// `R = (Σ α(x) / h(x))⁻¹`.
    pub r: f64,
    /// `ν` by label.
    pub nu: Vec<(String, f64)>,
    pub tau_plus_1_law: AtomicDist,
    pub s_law_under_nu: AtomicDist,
    pub pi_c: f64,
    pub f_law_under_pi: AtomicDist,
}

#[derive(Debug, Clone)]
pub struct TowerChain {
    spec: TowerSpec,
    r: f64,
    nu: Vec<f64>,
    nu_index: WeightedIndex<f64>,
    alpha_index: WeightedIndex<f64>,
}

/// Builds the chain and its exact laws.
pub fn build(spec: &TowerSpec) -> Result<(TowerChain, TowerExactLaws)> {
    spec.validate()?;
    let inv_r: f64 = spec.atoms.iter().map(|a| a.alpha / a.h as f64).sum();
    let r = 1.0 / inv_r;
    let nu: Vec<f64> = spec
        .atoms
        .iter()
        .map(|a| r * a.alpha / a.h as f64)
        .collect();
    let bad = |e: rand::distr::weighted::Error| Error::TowerSpec(format!("invalid masses: {e}"));
    let nu_index = WeightedIndex::new(nu.clone()).map_err(bad)?;
    let alpha_index = WeightedIndex::new(spec.atoms.iter().map(|a| a.alpha)).map_err(bad)?;
    let pairs = |g: &dyn Fn(&TowerAtom) -> f64, w: &[f64]| {
        AtomicDist::from_weights(spec.atoms.iter().zip(w).map(|(a, &p)| (g(a), p)))
            .map(|d| d.merged())
    };
    let alpha: Vec<f64> = spec.atoms.iter().map(|a| a.alpha).collect();
    let laws = TowerExactLaws {
        r,
        nu: spec
            .atoms
            .iter()
            .zip(&nu)
            .map(|(a, &p)| (a.label.clone(), p))
            .collect(),
        tau_plus_1_law: pairs(&|a| a.h as f64, &nu)?,
        s_law_under_nu: pairs(&|a| a.f_tilde * a.h as f64, &nu)?,
        pi_c: inv_r,
        f_law_under_pi: pairs(&|a| a.f_tilde, &alpha)?,
    };
    Ok((
        TowerChain {
            spec: spec.clone(),
            r,
            nu,
            nu_index,
            alpha_index,
        },
        laws,
    ))
}

impl TowerChain {
    pub fn spec(&self) -> &TowerSpec {
        &self.spec
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn nu_weights(&self) -> &[f64] {
        &self.nu
    }

    pub fn h(&self, x: &TowerState) -> u64 {
        self.spec.atoms[x.atom].h
    }

    /// `f((x, k)) = f̃(x)`.
    pub fn f(&self, x: &TowerState) -> f64 {
        self.spec.atoms[x.atom].f_tilde
    }

    /// Number of `(x, k)` states.
    pub fn n_states(&self) -> u64 {
        self.spec.atoms.iter().map(|a| a.h).sum()
    }

    /// Law of `S(f)` under `π`: from `(x, k)` the block remainder has
    /// `h(x) - k + 1` steps, each contributing `f̃(x)`.
    pub fn s_law_under_pi(&self) -> Result<AtomicDist> {
        let mut pairs = Vec::new();
        for a in &self.spec.atoms {
            let w = a.alpha / a.h as f64;
            for j in 1..=a.h {
                pairs.push((j as f64 * a.f_tilde, w));
            }
        }
        AtomicDist::from_weights(pairs).map(|d| d.merged())
    }

    /// Law of `τ + 1` under `π`, i.e. `h(x) - k + 1` from `(x, k)`.
    pub fn tau_plus_1_law_under_pi(&self) -> Result<AtomicDist> {
        let mut pairs = Vec::new();
        for a in &self.spec.atoms {
            let w = a.alpha / a.h as f64;
            for j in 1..=a.h {
                pairs.push((j as f64, w));
            }
        }
        AtomicDist::from_weights(pairs).map(|d| d.merged())
    }

    /// `E_ν S(f)^2 = R Σ α(x) h(x) f̃(x)^2`.
    pub fn e_nu_s2(&self) -> f64 {
        self.r
            * self
                .spec
                .atoms
                .iter()
                .map(|a| a.alpha * a.h as f64 * a.f_tilde * a.f_tilde)
                .sum::<f64>()
    }

    /// Largest `|π P(A) - π(A)|` over single states, by enumeration.
    pub fn stationarity_error(&self) -> f64 {
        let pi = |a: &TowerAtom| a.alpha / a.h as f64;
        // mass flowing into (y, 1) comes from all tops, which carry π(C)
        let pi_c: f64 = self.spec.atoms.iter().map(pi).sum();
        let mut err = 0.0f64;
        for (i, a) in self.spec.atoms.iter().enumerate() {
            // level 1 receives π(C) ν(y); level k > 1 receives π(x, k-1)
            err = err.max((pi_c * self.nu[i] - pi(a)).abs());
        }
        err
    }
}

impl MinorizedChain for TowerChain {
    type State = TowerState;

    fn delta(&self) -> f64 {
        1.0
    }

    fn in_small_set(&self, x: &TowerState) -> bool {
        x.level == self.h(x)
    }

    fn sample_nu<R: Rng + ?Sized>(&self, rng: &mut R) -> TowerState {
        TowerState {
            atom: self.nu_index.sample(rng),
            level: 1,
        }
    }

    // δ = 1: the residual kernel is never used
    fn sample_residual<R: Rng + ?Sized>(&self, _x: &TowerState, rng: &mut R) -> TowerState {
        self.sample_nu(rng)
    }

    fn sample_kernel<R: Rng + ?Sized>(&self, x: &TowerState, rng: &mut R) -> TowerState {
        if x.level < self.h(x) {
            TowerState {
                atom: x.atom,
                level: x.level + 1,
            }
        } else {
            self.sample_nu(rng)
        }
    }

    fn sample_pi<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<TowerState> {
        let atom = self.alpha_index.sample(rng);
        Some(TowerState {
            atom,
            level: rng.random_range(1..=self.spec.atoms[atom].h),
        })
    }

    fn pi_exact(&self) -> Option<Vec<(TowerState, f64)>> {
        let mut out = Vec::new();
        for (i, a) in self.spec.atoms.iter().enumerate() {
            for level in 1..=a.h {
                out.push((TowerState { atom: i, level }, a.alpha / a.h as f64));
            }
        }
        Some(out)
    }

    fn pi_c(&self) -> Option<f64> {
        Some(1.0 / self.r)
    }

    fn state_id(&self, x: &TowerState) -> String {
        format!("{}:{}", self.spec.atoms[x.atom].label, x.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryBound {
    /// `½ Σ_x F(h(x) |f̃(x)| / 2) α(x)`.
    pub lower: f64,
    /// `E_π F(|S(f)|)` by enumeration over `(x, k)`.
    pub exact: f64,
}

/// Lower bound for `E_π F(|S(f)|)` together with the exact value. `F` is
/// probed on a grid up to the largest block sum and must be nondecreasing.
pub fn stationary_f_lower_bound<F: Fn(f64) -> f64>(
    chain: &TowerChain,
    big_f: F,
) -> Result<StationaryBound> {
    let top = chain
        .spec
        .atoms
        .iter()
        .map(|a| a.h as f64 * a.f_tilde.abs())
        .fold(0.0, f64::max);
    if top > 0.0 {
        let mut probe = vec![0.0];
        probe.extend(log_grid(top * 1e-6, top, 200));
        if probe.windows(2).any(|w| big_f(w[1]) < big_f(w[0])) {
            return Err(Error::Precondition(
                "F is not nondecreasing on the probe grid".into(),
            ));
        }
    }
    let lower = 0.5
        * chain
            .spec
            .atoms
            .iter()
            .map(|a| big_f(a.h as f64 * a.f_tilde.abs() / 2.0) * a.alpha)
            .sum::<f64>();
    let exact = chain.s_law_under_pi()?.expect(|s| big_f(s.abs()));
    Ok(StationaryBound { lower, exact })
}

/// CSV of the exact laws with columns `law, value, prob`.
pub fn write_laws_csv<W: std::io::Write>(laws: &TowerExactLaws, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["law", "value", "prob"])?;
    for (name, d) in [
        ("tau_plus_1_under_nu", &laws.tau_plus_1_law),
        ("s_under_nu", &laws.s_law_under_nu),
        ("f_under_pi", &laws.f_law_under_pi),
    ] {
        for &(v, p) in d.atoms() {
            w.write_record([name.to_string(), v.to_string(), p.to_string()])?;
        }
    }
    for (label, p) in &laws.nu {
        w.write_record(["nu".to_string(), label.clone(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
