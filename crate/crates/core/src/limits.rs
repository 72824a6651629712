//! Limit-theorem experiments for additive functionals `Σ_{i<n} f(X_i)`:
//! CLT with the block-formula variance, an iterated-logarithm statistic,
//! the Berry–Esseen rate and the exponential tail bound together with the
//! head / block / tail decomposition used to prove it.
//!
//! All experiments need `m = 1`. Replica `r` of every experiment draws from
//! its own stream, so reports depend only on the seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::ChainLaws;
use crate::error::{Error, Result};
use crate::norm::{orlicz_norm, psi_alpha_norm};
use crate::numeric::{bisect_log, fit_slope, log_grid};
use crate::rng::purpose_rng;
use crate::split_chain::{Init, MinorizedChain, Path};
use crate::stats::{ks_normal, quantile, Moments};
use crate::young::{conjugate_numeric, dominates, GridSpec, YoungFn, YoungLike};

const BLOCK_PAIRS: u64 = 10;
const CLT_PATHS: u64 = 11;
const LIL_PATHS: u64 = 12;
const BE_PATHS: u64 = 13;
const TAIL_NU: u64 = 14;
const TAIL_PI: u64 = 15;

/// Start law of the simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Nu,
    Pi,
}

impl Start {
    fn init<S>(self) -> Init<S> {
        match self {
            Start::Nu => Init::Nu,
            Start::Pi => Init::Pi,
        }
    }
}

fn check_chain<C: MinorizedChain, F: Fn(&C::State) -> f64>(chain: &C, f: &F) -> Result<()> {
    if chain.m() != 1 {
        return Err(Error::Unsupported(format!(
            "limit experiments need m = 1, got {}",
            chain.m()
        )));
    }
    if let Some(pi) = chain.pi_exact() {
        let mean: f64 = pi.iter().map(|(x, p)| p * f(x)).sum();
        let scale = pi.iter().map(|(x, _)| f(x).abs()).fold(0.0, f64::max);
        if mean.abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::Precondition(format!(
                "f must be centered under π, E_π f = {mean}"
            )));
        }
    }
    Ok(())
}

/// `σ_f² = δπ(C) m⁻¹ (E s₁² + 2 E s₁s₂)` from consecutive block pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockVariance {
    pub pairs: usize,
    pub e_s1_sq: f64,
    pub e_s1_sq_stderr: f64,
    pub e_s1_s2: f64,
    pub e_s1_s2_stderr: f64,
    /// `δπ(C)`: exact when the chain knows `π(C)`, else one over the mean
    /// block length.
    pub regen_rate: f64,
    pub sigma_f_sq: f64,
    pub sigma_f_sq_stderr: f64,
}

/// Estimates [`BlockVariance`] from `pairs` independent paths started from
/// `ν`, each contributing the blocks `s_1, s_2` after the first
/// regeneration.
pub fn block_variance<C, F>(chain: &C, f: F, pairs: usize, seed: u64) -> Result<BlockVariance>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    if pairs < 2 {
        return Err(Error::Parameter(
            "block variance needs at least 2 pairs".into(),
        ));
    }
    let draws: Vec<(f64, f64, usize)> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let path = Path::new(chain, &Init::Nu, purpose_rng(seed, BLOCK_PAIRS, p as u64))?;
            let mut regens = 0;
            let mut sums = [0.0; 2];
            let mut len = 0;
            for (x, y) in path {
                if regens >= 1 {
                    sums[regens - 1] += f(&x);
                    if regens == 1 {
                        len += 1;
                    }
                }
                if y {
                    regens += 1;
                    if regens == 3 {
                        break;
                    }
                }
            }
            Ok((sums[0], sums[1], len))
        })
        .collect::<Result<_>>()?;
    let sq = Moments::from_slice(&draws.iter().map(|d| d.0 * d.0).collect::<Vec<_>>());
    let cross = Moments::from_slice(&draws.iter().map(|d| d.0 * d.1).collect::<Vec<_>>());
    let comb = Moments::from_slice(
        &draws
            .iter()
            .map(|d| d.0 * d.0 + 2.0 * d.0 * d.1)
            .collect::<Vec<_>>(),
    );
    let regen_rate = match chain.pi_c() {
        Some(pc) => chain.delta() * pc,
        None => {
            1.0 / Moments::from_slice(&draws.iter().map(|d| d.2 as f64).collect::<Vec<_>>()).mean
        }
    };
    let scale = regen_rate / chain.m() as f64;
    Ok(BlockVariance {
        pairs,
        e_s1_sq: sq.mean,
        e_s1_sq_stderr: sq.stderr(),
        e_s1_s2: cross.mean,
        e_s1_s2_stderr: cross.stderr(),
        regen_rate,
        sigma_f_sq: scale * comb.mean,
        sigma_f_sq_stderr: scale * comb.stderr(),
    })
}

/// `Σ_{i<n} f(X_i)` at each checkpoint `n` (ascending) along one path.
fn sums_at<C, F>(
    chain: &C,
    f: &F,
    start: Start,
    checkpoints: &[usize],
    rng: rand_chacha::ChaCha8Rng,
) -> Result<Vec<f64>>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64,
{
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut acc = 0.0;
    let mut next = 0;
    let last = *checkpoints.last().unwrap_or(&0);
    if last == 0 {
        return Ok(vec![0.0; checkpoints.len()]);
    }
    for (k, (x, _)) in Path::new(chain, &start.init(), rng)?.enumerate() {
        acc += f(&x);
        while next < checkpoints.len() && checkpoints[next] == k + 1 {
            out.push(acc);
            next += 1;
        }
        if k + 1 == last {
            break;
        }
    }
    Ok(out)
}

fn check_n_values(n_values: &[usize]) -> Result<()> {
    if n_values.is_empty() || n_values.contains(&0) || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "n values must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Normalized sums `n^{-1/2} Σ_{i<n} f(X_i)`, indexed `[replica][n]`.
fn normalized_sums<C, F>(
    chain: &C,
    f: &F,
    start: Start,
    n_values: &[usize],
    replicas: usize,
    seed: u64,
    purpose: u64,
) -> Result<Vec<Vec<f64>>>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = sums_at(
                chain,
                f,
                start,
                n_values,
                purpose_rng(seed, purpose, r as u64),
            )?;
            Ok(s.iter()
                .zip(n_values)
                .map(|(v, &n)| v / (n as f64).sqrt())
                .collect())
        })
        .collect()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub replicas: usize,
    /// Block pairs for the variance formula.
    pub block_pairs: usize,
    pub start: Start,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub n_values: Vec<usize>,
    /// KS distance to `N(0, σ_f²)` per `n`; empty when degenerate.
    pub ks_distance: Vec<f64>,
    /// Sample variance of the normalized sums per `n`.
    pub sample_variance: Vec<f64>,
    pub sigma_f_sq: f64,
    /// Sample variance at the largest `n`.
    pub sigma_estimate: f64,
    pub block: BlockVariance,
    pub replicas: usize,
    pub start: Start,
    /// `σ_f²` indistinguishable from 0 (within three standard errors).
    pub degenerate: bool,
}

pub fn clt_experiment<C, F>(
    chain: &C,
    f: F,
    n_values: &[usize],
    params: &CltParams,
) -> Result<CltReport>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    check_chain(chain, &f)?;
    check_n_values(n_values)?;
    if params.replicas < 2 {
        return Err(Error::Parameter("CLT needs at least 2 replicas".into()));
    }
    let block = block_variance(chain, &f, params.block_pairs, params.seed)?;
    let rows = normalized_sums(
        chain,
        &f,
        params.start,
        n_values,
        params.replicas,
        params.seed,
        CLT_PATHS,
    )?;
    let sample_variance: Vec<f64> = (0..n_values.len())
        .map(|j| Moments::from_slice(&column(&rows, j)).variance())
        .collect();
    let degenerate = block.sigma_f_sq <= 3.0 * block.sigma_f_sq_stderr;
    let ks_distance = if degenerate {
        Vec::new()
    } else {
        let sigma = block.sigma_f_sq.sqrt();
        (0..n_values.len())
            .map(|j| ks_normal(&column(&rows, j), sigma))
            .collect()
    };
    Ok(CltReport {
        n_values: n_values.to_vec(),
        ks_distance,
        sigma_estimate: *sample_variance.last().unwrap(),
        sample_variance,
        sigma_f_sq: block.sigma_f_sq.max(0.0),
        block,
        replicas: params.replicas,
        start: params.start,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LilReport {
    pub n_max: usize,
    /// Per replica: `max_{e² <= n <= n_max} |Σ_{i<n} f(X_i)| / √(n log log n)`.
    pub statistic: Vec<f64>,
    pub median: f64,
    pub p95: f64,
    pub sigma_f: f64,
    /// Replicas whose statistic exceeds `3σ_f`.
    pub beyond_three_sigma: usize,
    /// The 95th percentile lies outside `[0.5σ_f, 3σ_f]`.
    pub suspicious: bool,
}

pub fn lil_statistic<C, F>(chain: &C, f: F, n_max: usize, params: &CltParams) -> Result<LilReport>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    let first = std::f64::consts::E.powi(2).ceil() as usize;
    if n_max < first {
        return Err(Error::Domain(format!(
            "n_max must be at least e² (so log log n is defined), got {n_max}"
        )));
    }
    check_chain(chain, &f)?;
    if params.replicas < 1 {
        return Err(Error::Parameter("LIL needs at least one replica".into()));
    }
    let block = block_variance(chain, &f, params.block_pairs, params.seed)?;
    let statistic: Vec<f64> = (0..params.replicas)
        .into_par_iter()
        .map(|r| {
            let path = Path::new(
                chain,
                &params.start.init(),
                purpose_rng(params.seed, LIL_PATHS, r as u64),
            )?;
            let mut acc = 0.0;
            let mut best = 0.0f64;
            for (k, (x, _)) in path.enumerate() {
                acc += f(&x);
                let n = k + 1;
                if n >= first {
                    let nf = n as f64;
                    best = best.max(acc.abs() / (nf * nf.ln().ln()).sqrt());
                }
                if n == n_max {
                    break;
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let sigma_f = block.sigma_f_sq.max(0.0).sqrt();
    let p95 = quantile(&statistic, 0.95);
    Ok(LilReport {
        n_max,
        median: quantile(&statistic, 0.5),
        p95,
        sigma_f,
        beyond_three_sigma: statistic.iter().filter(|&&s| s > 3.0 * sigma_f).count(),
        suspicious: sigma_f > 0.0 && !(p95 >= 0.5 * sigma_f && p95 <= 3.0 * sigma_f),
        statistic,
    })
}

/// Precondition data for the Berry–Esseen rate: `x³ ⪯ ψ`, `‖τ+1‖_{ν,ψ}`
/// and `‖f‖_{π,ρ}` with `ρ(x) = Ψ*(x³)`, `Ψ(x) = ψ(√x)/√x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenPrecheck {
    pub cube_dominated: bool,
    pub tau_norm: f64,
    pub f_norm: f64,
}

pub fn berry_esseen_preconditions(psi: &YoungFn, laws: &ChainLaws) -> Result<BerryEsseenPrecheck> {
    if laws.m != 1 {
        return Err(Error::Precondition(
            "the rate needs a strongly aperiodic chain (m = 1)".into(),
        ));
    }
    if psi.origin_slope() > 0.0 {
        return Err(Error::Precondition("psi(x)/x must vanish at 0".into()));
    }
    let cube = YoungFn::power(3.0)?;
    let w = dominates(&cube, psi, &GridSpec::default());
    if !w.holds {
        return Err(Error::Precondition("x^3 is not dominated by psi".into()));
    }
    struct Big<'a>(&'a YoungFn);
    impl YoungLike for Big<'_> {
        fn ln_value(&self, x: f64) -> f64 {
            let r = x.sqrt();
            self.0.ln_value(r) - r.ln()
        }
    }
    let conj = conjugate_numeric(&Big(psi), 1e-8, 1e12, 400)?;
    struct Rho(crate::young::Table);
    impl YoungLike for Rho {
        fn ln_value(&self, x: f64) -> f64 {
            self.0.ln_value(x.powi(3))
        }
    }
    let tau_norm = orlicz_norm(&laws.tau_nu, psi, 1.0)?.to_f64();
    let f_norm = orlicz_norm(&laws.f_pi.map(f64::abs)?, &Rho(conj), 1.0)?.to_f64();
    if !tau_norm.is_finite() || !f_norm.is_finite() {
        return Err(Error::Precondition(format!(
            "norms must be finite: tau {tau_norm}, f {f_norm}"
        )));
    }
    Ok(BerryEsseenPrecheck {
        cube_dominated: true,
        tau_norm,
        f_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenReport {
    pub n_values: Vec<usize>,
    /// `sup_x |P(Σ_{i<n} f(X_i) <= x σ_f √n) - Φ(x)|` per `n`.
    pub delta_n: Vec<f64>,
    /// Least-squares slope of `ln Δ_n` against `ln n`.
    pub slope: f64,
    pub sigma_f_sq: f64,
    /// Typical KS distance of an exact normal sample of this size,
    /// `0.8687 / √replicas`.
    pub monte_carlo_floor: f64,
    pub replicas: usize,
    pub degenerate: bool,
}

pub fn berry_esseen_experiment<C, F>(
    chain: &C,
    f: F,
    n_values: &[usize],
    params: &CltParams,
) -> Result<BerryEsseenReport>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    check_chain(chain, &f)?;
    check_n_values(n_values)?;
    if n_values.len() < 2 || params.replicas < 2 {
        return Err(Error::Parameter(
            "the rate fit needs at least two n values and two replicas".into(),
        ));
    }
    let block = block_variance(chain, &f, params.block_pairs, params.seed)?;
    let floor = 0.8687 / (params.replicas as f64).sqrt();
    if block.sigma_f_sq <= 3.0 * block.sigma_f_sq_stderr {
        return Ok(BerryEsseenReport {
            n_values: n_values.to_vec(),
            delta_n: Vec::new(),
            slope: f64::NAN,
            sigma_f_sq: block.sigma_f_sq.max(0.0),
            monte_carlo_floor: floor,
            replicas: params.replicas,
            degenerate: true,
        });
    }
    let rows = normalized_sums(
        chain,
        &f,
        params.start,
        n_values,
        params.replicas,
        params.seed,
        BE_PATHS,
    )?;
    let sigma = block.sigma_f_sq.sqrt();
    let delta_n: Vec<f64> = (0..n_values.len())
        .map(|j| ks_normal(&column(&rows, j), sigma))
        .collect();
    let ln_n: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ln_d: Vec<f64> = delta_n.iter().map(|d| d.ln()).collect();
    Ok(BerryEsseenReport {
        n_values: n_values.to_vec(),
        slope: fit_slope(&ln_n, &ln_d),
        delta_n,
        sigma_f_sq: block.sigma_f_sq,
        monte_carlo_floor: floor,
        replicas: params.replicas,
        degenerate: false,
    })
}

/// Terms of the exponential tail bound at one `t`, each already multiplied
/// by `K`; `total` is their sum capped at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerms {
    pub gaussian: f64,
    pub exponential: f64,
    pub stretched: f64,
    /// Stationary start only: the term with `log ‖τ+1‖`.
    pub stretched_tau: f64,
    pub total: f64,
}

/// Norms entering the tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailNorms {
    /// `‖τ+1‖_{ν,ψ_α}`.
    pub tau: f64,
    /// `‖f‖_{π,ψ_β}`.
    pub f: f64,
    pub e_nu_s2: f64,
    pub regen_rate: f64,
}

/// `K exp(-t²/(K n δπ(C) E_ν S²)) + K exp(-t/(K ‖f‖ ‖τ+1‖³))
/// + K exp(-t^γ/(K (‖f‖ ‖τ+1‖)^γ log n))`, plus for the stationary start
/// `K exp(-t^γ/(K (‖f‖ ‖τ+1‖)^γ log ‖τ+1‖))`; `log ‖τ+1‖` is floored at 1.
pub fn tail_bound_terms(
    norms: &TailNorms,
    gamma: f64,
    n: usize,
    k: f64,
    t: f64,
    stationary: bool,
) -> TailTerms {
    let e = |x: f64| if x.is_nan() { 1.0 } else { (-x).exp() };
    let var = n as f64 * norms.regen_rate * norms.e_nu_s2;
    let gaussian = k * if var > 0.0 {
        e(t * t / (k * var))
    } else {
        (t <= 0.0) as u8 as f64
    };
    let scale = norms.f * norms.tau;
    let exponential = k * e(t / (k * norms.f * norms.tau.powi(3)));
    let stretched = k * e(t.powf(gamma) / (k * scale.powf(gamma) * (n as f64).ln()));
    let stretched_tau = if stationary {
        k * e(t.powf(gamma) / (k * scale.powf(gamma) * norms.tau.ln().max(1.0)))
    } else {
        0.0
    };
    let total = (gaussian + exponential + stretched + stretched_tau).min(1.0);
    TailTerms {
        gaussian,
        exponential,
        stretched,
        stretched_tau,
        total,
    }
}

/// Pieces of `|Σ_{i<n} f(X_i)| <= I + II + III` along one path, with
/// `N = inf{i : τ(i) >= n - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPieces {
    pub sum: f64,
    /// `Σ_{i<=τ(0)} |f(X_i)|`.
    pub head: f64,
    /// `|Σ_{i=1}^N s_i|`.
    pub blocks: f64,
    /// `II₁`: centered truncated blocks `|s_i| <= a`.
    pub blocks_small: f64,
    /// `II₂`: centered blocks `|s_i| > a`.
    pub blocks_large: f64,
    /// `Σ_{i=n}^{τ(N)} |f(X_i)|`.
    pub tail: f64,
    /// `|Σ_{i<=τ(0)} f + Σ s_i - Σ_{i=n}^{τ(N)} f - sum|`.
    pub reconstruction_error: f64,
}

struct Truncation {
    a: f64,
    mean_small: f64,
    mean_large: f64,
}

fn path_pieces<C, F>(
    chain: &C,
    f: &F,
    start: Start,
    n: usize,
    trunc: &Truncation,
    rng: rand_chacha::ChaCha8Rng,
) -> Result<PathPieces>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64,
{
    let (mut sum, mut head_abs, mut head) = (0.0, 0.0, 0.0);
    let (mut tail_abs, mut tail) = (0.0, 0.0);
    let (mut blocks, mut small, mut large, mut cur) = (0.0, 0.0, 0.0, 0.0);
    let mut seen_regen = false;
    for (k, (x, y)) in Path::new(chain, &start.init(), rng)?.enumerate() {
        let v = f(&x);
        if k < n {
            sum += v;
        } else {
            tail_abs += v.abs();
            tail += v;
        }
        if !seen_regen {
            head_abs += v.abs();
            head += v;
        } else {
            cur += v;
        }
        if y {
            if seen_regen {
                blocks += cur;
                if cur.abs() <= trunc.a {
                    small += cur - trunc.mean_small;
                    large -= trunc.mean_large;
                } else {
                    small -= trunc.mean_small;
                    large += cur - trunc.mean_large;
                }
                cur = 0.0;
            }
            seen_regen = true;
            if k + 1 >= n {
                break;
            }
        }
    }
    Ok(PathPieces {
        sum,
        head: head_abs,
        blocks: blocks.abs(),
        blocks_small: small.abs(),
        blocks_large: large.abs(),
        tail: tail_abs,
        reconstruction_error: (head + blocks - tail - sum).abs(),
    })
}

/// Empirical tails `P(|X| >= t)` of each piece on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTails {
    pub head: Vec<f64>,
    pub blocks: Vec<f64>,
    pub blocks_small: Vec<f64>,
    pub blocks_large: Vec<f64>,
    pub tail: Vec<f64>,
    /// `|Σ f| <= I + II + III` on every path.
    pub inequality_holds: bool,
    pub max_reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTail {
    pub start: Start,
    pub empirical_tail: Vec<f64>,
    pub bound: Vec<TailTerms>,
    pub decomposition: DecompositionTails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub t_grid: Vec<f64>,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
    /// Whether `k` was fitted (smallest value dominating both starts).
    pub k_fitted: bool,
    pub norms: TailNorms,
    /// Truncation level `a = K ‖f‖ ‖τ+1‖ log^{1/γ} n` splitting `II`.
    pub level_a: f64,
    pub replicas: usize,
    pub nu: StartTail,
    pub pi: StartTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// Fixed `K`; fitted when absent.
    pub k: Option<f64>,
}

fn tail_of(xs: &[f64], t_grid: &[f64]) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    t_grid
        .iter()
        .map(|&t| (s.len() - s.partition_point(|&v| v < t)) as f64 / n)
        .collect()
}

/// Exponential tail bound against simulated tails from `ν` and `π`.
/// `laws` supplies `τ + 1` under `ν`, `f` under `π` and `E_ν S(f)²`.
pub fn tail_bound_experiment<C, F>(
    chain: &C,
    f: F,
    laws: &ChainLaws,
    params: &TailParams,
) -> Result<TailReport>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    check_chain(chain, &f)?;
    let TailParams {
        alpha,
        beta,
        n,
        ref t_grid,
        replicas,
        seed,
        k,
    } = *params;
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0) {
        return Err(Error::Parameter(format!(
            "need 0 < alpha <= 1 and beta > 0, got {alpha}, {beta}"
        )));
    }
    if n < 3 || replicas < 1 || t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Parameter(
            "need n >= 3, replicas >= 1 and a nonempty grid of t >= 0".into(),
        ));
    }
    if k.is_some_and(|k| !(k > 0.0)) {
        return Err(Error::Parameter("K must be positive".into()));
    }
    let tau = psi_alpha_norm(&laws.tau_nu, alpha)?.to_f64();
    let fnorm = psi_alpha_norm(&laws.f_pi, beta)?.to_f64();
    if !tau.is_finite() || !fnorm.is_finite() {
        return Err(Error::Precondition(format!(
            "norms must be finite: tau {tau}, f {fnorm}"
        )));
    }
    let norms = TailNorms {
        tau,
        f: fnorm,
        e_nu_s2: laws.s_nu.expect(|s| s * s),
        regen_rate: laws.delta * laws.pi_c / laws.m as f64,
    };
    let gamma = alpha * beta / (alpha + beta);
    let sums = |start: Start, purpose: u64| -> Result<Vec<f64>> {
        (0..replicas)
            .into_par_iter()
            .map(|r| {
                Ok(sums_at(chain, &f, start, &[n], purpose_rng(seed, purpose, r as u64))?[0].abs())
            })
            .collect()
    };
    let emp_nu = tail_of(&sums(Start::Nu, TAIL_NU)?, t_grid);
    let emp_pi = tail_of(&sums(Start::Pi, TAIL_PI)?, t_grid);
    let bounds = |k: f64, stationary: bool| -> Vec<TailTerms> {
        t_grid
            .iter()
            .map(|&t| tail_bound_terms(&norms, gamma, n, k, t, stationary))
            .collect()
    };
    let covers = |k: f64| {
        let ok = |emp: &[f64], b: Vec<TailTerms>| emp.iter().zip(b).all(|(e, b)| b.total >= *e);
        ok(&emp_nu, bounds(k, false)) && ok(&emp_pi, bounds(k, true))
    };
    let (k, k_fitted) = match k {
        Some(k) => (k, false),
        // the bound is nondecreasing in K and tends to 1 as K grows
        None => {
            let mut hi = 1.0;
            while !covers(hi) {
                hi *= 10.0;
                if hi > 1e12 {
                    return Err(Error::Precondition(
                        "no K up to 1e12 makes the bound dominate".into(),
                    ));
                }
            }
            (bisect_log(covers, 1e-6, hi, 1e-6), true)
        }
    };

    let level_a = k * fnorm * tau * (n as f64).ln().powf(1.0 / gamma);
    let small = |s: f64| if s.abs() <= level_a { s } else { 0.0 };
    let trunc = Truncation {
        a: level_a,
        mean_small: laws.s_nu.expect(small),
        mean_large: laws.s_nu.expect(|s| s - small(s)),
    };
    let start_tail = |start: Start, purpose: u64, emp: Vec<f64>| -> Result<StartTail> {
        let pieces: Vec<PathPieces> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                path_pieces(
                    chain,
                    &f,
                    start,
                    n,
                    &trunc,
                    purpose_rng(seed, purpose, r as u64),
                )
            })
            .collect::<Result<_>>()?;
        let col =
            |g: fn(&PathPieces) -> f64| tail_of(&pieces.iter().map(g).collect::<Vec<_>>(), t_grid);
        let decomposition = DecompositionTails {
            head: col(|p| p.head),
            blocks: col(|p| p.blocks),
            blocks_small: col(|p| p.blocks_small),
            blocks_large: col(|p| p.blocks_large),
            tail: col(|p| p.tail),
            inequality_holds: pieces.iter().all(|p| {
                p.sum.abs() <= (p.head + p.blocks + p.tail) * (1.0 + 1e-12)
                    && p.blocks <= p.blocks_small + p.blocks_large + 1e-9 * (1.0 + p.blocks)
            }),
            max_reconstruction_error: pieces
                .iter()
                .map(|p| p.reconstruction_error)
                .fold(0.0, f64::max),
        };
        Ok(StartTail {
            start,
            empirical_tail: emp,
            bound: bounds(k, start == Start::Pi),
            decomposition,
        })
    };
    Ok(TailReport {
        t_grid: t_grid.clone(),
        n,
        alpha,
        beta,
        gamma,
        k,
        k_fitted,
        norms,
        level_a,
        replicas,
        nu: start_tail(Start::Nu, TAIL_NU, emp_nu)?,
        pi: start_tail(Start::Pi, TAIL_PI, emp_pi)?,
    })
}

/// Evenly spaced grid `0, h, ..., count h` with `h = hi / count`.
pub fn linear_grid(hi: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| hi * i as f64 / count as f64).collect()
}

/// Log-spaced integer values, deduplicated.
pub fn log_spaced_n(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let mut v: Vec<usize> = log_grid(lo as f64, hi as f64, count)
        .into_iter()
        .map(|x| x.round() as usize)
        .collect();
    v.dedup();
    v
}
