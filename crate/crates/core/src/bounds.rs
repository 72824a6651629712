//! Both sides of the block-sum integrability bounds on concrete chains.
//!
//! For a chain with regeneration blocks, `S(f) = Σ_{i<=τ} f(X_i)`:
//!
//! * `thm_nu`: `‖S(f)‖_{ν,φ} <= 2m ‖τ+1‖_{ν,ψ} ‖f‖_{π,ρ}` with `ρ = ρ_{φ,ψ}`;
//! * `thm_pi`: `‖S(f)‖_{π,φ} <= m a (1 + δπ(C) a) ‖f‖_{π,ζ}`, `a = ‖τ+1‖_{ν,ψ}`;
//! * `cor_nu`: `‖S(f)‖_{ν,φ̃} <= 4m a ‖f‖_{π,ρ}` for any Young `ρ`, with
//!   `φ̃ = (ψ* ∘ ρ*)*`;
//! * `cor_pi`: `‖S(f)‖_{π,φ} <= K a (1 + δπ(C) a) ‖f‖_{π,ζ}` when `φ ⪯ κ`;
//!   `K` is not explicit, so the report carries the ratio needed.
//!
//! Laws come either exactly from a tower chain or from Monte Carlo blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::norm::{orlicz_norm, AtomicDist};
use crate::numeric::ln_add_exp;
use crate::rng::purpose_rng;
use crate::split_chain::{nu_blocks, pi_blocks, MinorizedChain};
use crate::stats::Moments;
use crate::tower::{build, random_spec, TowerChain, TowerExactLaws, WeakOptSeries};
use crate::young::{
    dominates, improvement_factor, kappa_of, normalize_assumption_a, rho_of, tilde_phi, zeta_of,
    DominationWitness, GeneralizedYoungFn, GridSpec, YoungFn, YoungLike,
};

const SUITE: u64 = 3;
/// Batches used for the standard error of Monte Carlo norms.
const MC_BATCHES: usize = 20;
/// Slack for the rounding of the norm solver when checking `ratio <= 1`.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    ThmNu,
    ThmPi,
    CorNu,
    CorPi,
}

impl TheoremId {
    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::ThmNu => "thm_nu",
            TheoremId::ThmPi => "thm_pi",
            TheoremId::CorNu => "cor_nu",
            TheoremId::CorPi => "cor_pi",
        }
    }

    /// Whether the constant in the bound is explicit, so `ratio <= 1` is a
    /// soundness requirement.
    pub fn explicit(self) -> bool {
        self != TheoremId::CorPi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ratio {
    Value(f64),
    RhsInfinite,
    ZeroOverZero,
}

impl Ratio {
    fn of(lhs: Ext, rhs: Ext) -> Ratio {
        match (lhs, rhs) {
            (_, Ext::Infinite) => Ratio::RhsInfinite,
            (Ext::Infinite, Ext::Finite(_)) => Ratio::Value(f64::INFINITY),
            (Ext::Finite(l), Ext::Finite(r)) if r == 0.0 => {
                if l == 0.0 {
                    Ratio::ZeroOverZero
                } else {
                    Ratio::Value(f64::INFINITY)
                }
            }
            (Ext::Finite(l), Ext::Finite(r)) => Ratio::Value(l / r),
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `‖τ+1‖_{ν,ψ}`.
    pub tau_norm: Ext,
    /// `‖f‖_{π,ρ}` or `‖f‖_{π,ζ}`.
    pub f_norm: Ext,
    pub m: usize,
    pub delta: f64,
    pub pi_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { n: usize, stderr: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theorem_id: TheoremId,
    pub lhs: Ext,
    pub rhs: Ext,
    pub ratio: Ratio,
    pub inputs: BoundInputs,
    pub method: Method,
    /// `thm_pi` with `1 + δπ(C)a` replaced by `g(1 + δπ(C)a)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improved_rhs: Option<Ext>,
}

impl BoundReport {
    /// False only for an explicit bound whose ratio exceeds one.
    pub fn sound(&self) -> bool {
        !self.theorem_id.explicit() || self.ratio.value().is_none_or(|r| r <= 1.0 + RATIO_SLACK)
    }
}

fn ext_mul(a: Ext, b: Ext) -> Ext {
    match (a, b) {
        (Ext::Finite(x), Ext::Finite(y)) => Ext::Finite(x * y),
        _ => Ext::Infinite,
    }
}

/// The laws entering the bounds for one chain and one `f`.
#[derive(Debug, Clone)]
pub struct ChainLaws {
    /// `S(f)` with `X_0 ~ ν`.
    pub s_nu: AtomicDist,
    /// `S(f)` with `X_0 ~ π`.
    pub s_pi: AtomicDist,
    /// `τ + 1` with `X_0 ~ ν`.
    pub tau_nu: AtomicDist,
    /// `f(X)` with `X ~ π`.
    pub f_pi: AtomicDist,
    pub m: usize,
    pub delta: f64,
    pub pi_c: f64,
    /// Raw draws behind `s_nu` and `s_pi` for Monte Carlo laws.
    samples: Option<(Vec<f64>, Vec<f64>)>,
}

impl ChainLaws {
    /// Exact laws of a tower chain with `f((x, k)) = f̃(x)`.
    pub fn tower(chain: &TowerChain, laws: &TowerExactLaws) -> Result<ChainLaws> {
        Ok(ChainLaws {
            s_nu: laws.s_law_under_nu.clone(),
            s_pi: chain.s_law_under_pi()?,
            tau_nu: laws.tau_plus_1_law.clone(),
            f_pi: laws.f_law_under_pi.clone(),
            m: 1,
            delta: 1.0,
            pi_c: laws.pi_c,
            samples: None,
        })
    }

    /// Empirical block laws from `n` independent blocks per start law; the
    /// law of `f` under `π` is exact.
    pub fn monte_carlo<C, F>(chain: &C, f: F, n: usize, seed: u64) -> Result<ChainLaws>
    where
        C: MinorizedChain,
        F: Fn(&C::State) -> f64 + Sync,
    {
        if n < MC_BATCHES {
            return Err(Error::Parameter(format!(
                "need at least {MC_BATCHES} blocks, got {n}"
            )));
        }
        let pi = chain.pi_exact().ok_or_else(|| {
            Error::Precondition("Monte Carlo bounds need the exact stationary law".into())
        })?;
        let pi_c = chain
            .pi_c()
            .ok_or_else(|| Error::Precondition("Monte Carlo bounds need π(C)".into()))?;
        let nu = nu_blocks(chain, |x, _| f(x), n, seed)?;
        let pi_draws = pi_blocks(chain, |x, _| f(x), n, seed)?;
        let s_nu: Vec<f64> = nu.iter().map(|b| b.0).collect();
        let tau: Vec<f64> = nu.iter().map(|b| b.1 as f64).collect();
        let s_pi: Vec<f64> = pi_draws.iter().map(|b| b.0).collect();
        Ok(ChainLaws {
            s_nu: AtomicDist::empirical(&s_nu)?.merged(),
            s_pi: AtomicDist::empirical(&s_pi)?.merged(),
            tau_nu: AtomicDist::empirical(&tau)?.merged(),
            f_pi: AtomicDist::from_weights(pi.iter().map(|(x, p)| (f(x), *p)))?.merged(),
            m: chain.m(),
            delta: chain.delta(),
            pi_c,
            samples: Some((s_nu, s_pi)),
        })
    }

    fn lhs(&self, from_pi: bool, phi: &dyn YoungLike) -> Result<(Ext, Method)> {
        let law = if from_pi { &self.s_pi } else { &self.s_nu };
        let value = orlicz_norm(law, phi, 1.0)?.value;
        let method = match &self.samples {
            None => Method::Exact,
            Some((nu, pi)) => {
                let raw = if from_pi { pi } else { nu };
                let size = raw.len() / MC_BATCHES;
                let mut m = Moments::default();
                for chunk in raw.chunks_exact(size).take(MC_BATCHES) {
                    m.push(
                        orlicz_norm(&AtomicDist::empirical(chunk)?, phi, 1.0)?
                            .value
                            .to_f64(),
                    );
                }
                // batches of size n/B; the full-sample norm has B times less variance
                Method::MonteCarlo {
                    n: raw.len(),
                    stderr: (m.variance() / MC_BATCHES as f64).sqrt(),
                }
            }
        };
        Ok((value, method))
    }

    fn tau_norm(&self, psi: &dyn YoungLike) -> Result<Ext> {
        Ok(orlicz_norm(&self.tau_nu, psi, 1.0)?.value)
    }

    fn f_norm(&self, g: &dyn YoungLike) -> Result<Ext> {
        Ok(orlicz_norm(&self.f_pi.map(f64::abs)?, g, 1.0)?.value)
    }

    fn inputs(&self, tau_norm: Ext, f_norm: Ext) -> BoundInputs {
        BoundInputs {
            tau_norm,
            f_norm,
            m: self.m,
            delta: self.delta,
            pi_c: self.pi_c,
        }
    }

    /// `1 + δπ(C)a`.
    fn stationary_factor(&self, a: Ext) -> Ext {
        Ext::Finite(1.0) + a * (self.delta * self.pi_c)
    }
}

fn report(
    theorem_id: TheoremId,
    lhs: Ext,
    rhs: Ext,
    inputs: BoundInputs,
    method: Method,
) -> BoundReport {
    BoundReport {
        theorem_id,
        ratio: Ratio::of(lhs, rhs),
        lhs,
        rhs,
        inputs,
        method,
        improved_rhs: None,
    }
}

/// `‖S(f)‖_{ν,φ}` against `2m ‖τ+1‖_{ν,ψ} ‖f‖_{π,ρ_{φ,ψ}}`. `ψ` must
/// already satisfy `ψ(x)/x → 0` at 0 and `ψ(1) >= 1`.
pub fn verify_thm_nu(laws: &ChainLaws, phi: &YoungFn, psi: &YoungFn) -> Result<BoundReport> {
    let rho = rho_of(phi, psi)?;
    let (lhs, method) = laws.lhs(false, phi)?;
    let a = laws.tau_norm(psi)?;
    let fr = laws.f_norm(&rho)?;
    let rhs = ext_mul(a, fr) * (2.0 * laws.m as f64);
    Ok(report(
        TheoremId::ThmNu,
        lhs,
        rhs,
        laws.inputs(a, fr),
        method,
    ))
}

/// `‖S(f)‖_{π,φ}` against `m a (1 + δπ(C)a) ‖f‖_{π,ζ_{φ,ψ}}`; with
/// `improved` the factor `g(1 + δπ(C)a)`, `g(r) = sup_x x / φ⁻¹(φ(x)/r)`,
/// is reported alongside.
pub fn verify_thm_pi(
    laws: &ChainLaws,
    phi: &YoungFn,
    psi: &YoungFn,
    improved: bool,
) -> Result<BoundReport> {
    let zeta = zeta_of(phi, psi)?;
    let (lhs, method) = laws.lhs(true, phi)?;
    let a = laws.tau_norm(psi)?;
    let fz = laws.f_norm(&zeta)?;
    let base = ext_mul(a, fz) * laws.m as f64;
    let factor = laws.stationary_factor(a);
    let mut out = report(
        TheoremId::ThmPi,
        lhs,
        ext_mul(base, factor),
        laws.inputs(a, fz),
        method,
    );
    if improved {
        out.improved_rhs = Some(match factor {
            Ext::Finite(r) => ext_mul(base, Ext::Finite(improvement_factor(phi, r)?)),
            Ext::Infinite => Ext::Infinite,
        });
    }
    Ok(out)
}

/// `‖S(f)‖_{ν,φ̃}` against `4m ‖τ+1‖_{ν,ψ} ‖f‖_{π,ρ}` with
/// `φ̃ = (ψ* ∘ ρ*)*`.
pub fn verify_cor_nu(laws: &ChainLaws, psi: &YoungFn, rho: &YoungFn) -> Result<BoundReport> {
    let tilde = tilde_phi(psi, rho)?;
    verify_cor_nu_with(laws, psi, rho, &tilde)
}

/// [`verify_cor_nu`] with `φ̃` supplied, for suites sharing one `(ψ, ρ)`.
pub fn verify_cor_nu_with(
    laws: &ChainLaws,
    psi: &YoungFn,
    rho: &YoungFn,
    tilde: &GeneralizedYoungFn,
) -> Result<BoundReport> {
    crate::young::check_assumption_a(psi)?;
    let (lhs, method) = laws.lhs(false, tilde)?;
    let a = laws.tau_norm(psi)?;
    let fr = laws.f_norm(rho)?;
    let rhs = ext_mul(a, fr) * (4.0 * laws.m as f64);
    Ok(report(
        TheoremId::CorNu,
        lhs,
        rhs,
        laws.inputs(a, fr),
        method,
    ))
}

/// Inputs of the stationary corollary with the domination `φ ⪯ κ` already
/// checked.
#[derive(Debug, Clone)]
pub struct CorPiSetup {
    pub psi: YoungFn,
    pub zeta: YoungFn,
    pub phi: YoungFn,
    pub witness: DominationWitness,
}

impl CorPiSetup {
    pub fn new(psi: &YoungFn, zeta: &YoungFn, phi: &YoungFn) -> Result<CorPiSetup> {
        let kappa = kappa_of(zeta, psi)?;
        let witness = dominates(phi, &kappa.kappa, &GridSpec::default());
        if !witness.holds {
            return Err(Error::Precondition(format!(
                "phi is not dominated by kappa built from (zeta, psi); largest violation ratio {:.3e}, \
                 and without this domination no constant K can exist",
                witness.max_violation
            )));
        }
        Ok(CorPiSetup {
            psi: psi.clone(),
            zeta: zeta.clone(),
            phi: phi.clone(),
            witness,
        })
    }
}

/// `‖S(f)‖_{π,φ}` against `a (1 + δπ(C)a) ‖f‖_{π,ζ}`; the ratio is the
/// constant `K` this instance requires.
pub fn verify_cor_pi(
    laws: &ChainLaws,
    psi: &YoungFn,
    zeta: &YoungFn,
    phi: &YoungFn,
) -> Result<BoundReport> {
    verify_cor_pi_with(laws, &CorPiSetup::new(psi, zeta, phi)?)
}

pub fn verify_cor_pi_with(laws: &ChainLaws, setup: &CorPiSetup) -> Result<BoundReport> {
    let (lhs, method) = laws.lhs(true, &setup.phi)?;
    let a = laws.tau_norm(&setup.psi)?;
    let fz = laws.f_norm(&setup.zeta)?;
    let rhs = ext_mul(ext_mul(a, fz), laws.stationary_factor(a));
    Ok(report(
        TheoremId::CorPi,
        lhs,
        rhs,
        laws.inputs(a, fz),
        method,
    ))
}

/// Smallest `K` covering every `cor_pi` report, or `None` if none has a
/// finite ratio.
pub fn fitted_k(reports: &[BoundReport]) -> Option<f64> {
    reports
        .iter()
        .filter(|r| r.theorem_id == TheoremId::CorPi)
        .filter_map(|r| r.ratio.value())
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Exceeded,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n_terms: usize,
    pub partial_sum: Ext,
    pub exceeded: bool,
    pub status: CertificateStatus,
    /// `ln` of the partial sums after each term.
    pub ln_partial_sums: Vec<f64>,
}

/// Sums the exact terms of `series` at `theta` until the partial sum
/// exceeds `m` or `term_budget` terms (or the series) run out.
pub fn divergence_certificate(
    series: &WeakOptSeries,
    theta: f64,
    m: Ext,
    term_budget: usize,
) -> Certificate {
    let ln_m = m.ln();
    let mut acc = f64::NEG_INFINITY;
    let mut ln_partial_sums = Vec::new();
    for n in 0..term_budget.min(series.len()) {
        let t = if theta > 0.0 {
            series.ln_term(n, theta)
        } else {
            f64::NEG_INFINITY
        };
        acc = ln_add_exp(acc, t);
        ln_partial_sums.push(acc);
        if acc > ln_m {
            return Certificate {
                n_terms: n + 1,
                partial_sum: Ext::from_ln(acc),
                exceeded: true,
                status: CertificateStatus::Exceeded,
                ln_partial_sums,
            };
        }
    }
    Certificate {
        n_terms: ln_partial_sums.len(),
        partial_sum: Ext::from_ln(acc),
        exceeded: false,
        status: CertificateStatus::BudgetExhausted,
        ln_partial_sums,
    }
}

/// One `(φ, ψ)` pair of a randomized suite; `rho` is the Young function
/// used by the corollary.
#[derive(Debug, Clone)]
pub struct SuitePair {
    pub name: String,
    pub phi: YoungFn,
    /// As given; normalized before use.
    pub psi: YoungFn,
    pub rho: YoungFn,
}

/// `(x², x⁴)`, `(x², eˣ − 1)` and `(x³, x⁶)`, with corollary `ρ` of the
/// same growth as `ρ_{φ,ψ}`.
pub fn default_pairs() -> Vec<SuitePair> {
    let p = |x: f64| YoungFn::power(x).unwrap();
    vec![
        SuitePair {
            name: "x2_x4".into(),
            phi: p(2.0),
            psi: p(4.0),
            rho: p(3.0),
        },
        SuitePair {
            name: "x2_exp".into(),
            phi: p(2.0),
            psi: YoungFn::exp_power(1.0).unwrap(),
            rho: YoungFn::power_log(2.0, 1.0).unwrap(),
        },
        SuitePair {
            name: "x3_x6".into(),
            phi: p(3.0),
            psi: p(6.0),
            rho: p(5.0),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub n_specs: usize,
    pub max_atoms: usize,
    pub h_max: u64,
    pub f_max: f64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n_specs: 50,
            max_atoms: 6,
            h_max: 30,
            f_max: 4.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub instance: usize,
    pub pair: String,
    pub report: BoundReport,
}

/// `thm_nu`, `thm_pi` and `cor_nu` on `n_specs` random towers per pair,
/// evaluated exactly. Instance `i` uses its own stream, so rows do not
/// depend on scheduling.
pub fn run_suite(pairs: &[SuitePair], config: &SuiteConfig) -> Result<Vec<SuiteRow>> {
    if config.max_atoms < 1 || config.h_max < 1 {
        return Err(Error::Parameter(
            "suite needs max_atoms >= 1 and h_max >= 1".into(),
        ));
    }
    let chains: Vec<ChainLaws> = (0..config.n_specs)
        .into_par_iter()
        .map(|i| {
            let mut rng = purpose_rng(config.seed, SUITE, i as u64);
            let n_atoms = 1 + rand::Rng::random_range(&mut rng, 0..config.max_atoms);
            let spec = random_spec(&mut rng, n_atoms, config.h_max, config.f_max);
            let (chain, laws) = build(&spec)?;
            ChainLaws::tower(&chain, &laws)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for pair in pairs {
        let psi = normalize_assumption_a(&pair.psi).psi;
        let tilde = tilde_phi(&psi, &pair.rho)?;
        let batch: Vec<Vec<SuiteRow>> = chains
            .par_iter()
            .enumerate()
            .map(|(i, laws)| {
                let reports = [
                    verify_thm_nu(laws, &pair.phi, &psi)?,
                    verify_thm_pi(laws, &pair.phi, &psi, false)?,
                    verify_cor_nu_with(laws, &psi, &pair.rho, &tilde)?,
                ];
                Ok(reports
                    .into_iter()
                    .map(|report| SuiteRow {
                        instance: i,
                        pair: pair.name.clone(),
                        report,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        rows.extend(batch.into_iter().flatten());
    }
    Ok(rows)
}

/// `cor_pi` reports over `n_specs` random towers for one setup.
pub fn run_cor_pi_suite(setup: &CorPiSetup, config: &SuiteConfig) -> Result<Vec<BoundReport>> {
    (0..config.n_specs)
        .into_par_iter()
        .map(|i| {
            let mut rng = purpose_rng(config.seed, SUITE, i as u64);
            let n_atoms = 1 + rand::Rng::random_range(&mut rng, 0..config.max_atoms);
            let spec = random_spec(&mut rng, n_atoms, config.h_max, config.f_max);
            let (chain, laws) = build(&spec)?;
            verify_cor_pi_with(&ChainLaws::tower(&chain, &laws)?, setup)
        })
        .collect()
}

/// One JSON object per line.
pub fn write_jsonl<'a, W: std::io::Write>(
    reports: impl IntoIterator<Item = &'a BoundReport>,
    mut out: W,
) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Io(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Columns `instance, pair, theorem, lhs, rhs, ratio`; the ratio column is
/// empty when there is no finite ratio.
pub fn write_suite_csv<W: std::io::Write>(rows: &[SuiteRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "pair", "theorem", "lhs", "rhs", "ratio"])?;
    for r in rows {
        w.write_record([
            r.instance.to_string(),
            r.pair.clone(),
            r.report.theorem_id.as_str().to_string(),
            r.report.lhs.to_string(),
            r.report.rhs.to_string(),
            r.report
                .ratio
                .value()
                .map(|v| v.to_string())
                .unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
