//! Split-chain simulation for chains with a one-step minorization
//! `P(x, ·) >= δ ν(·)` on a small set `C`.
//!
//! At a step with `X_k ∈ C` a mark `Y_k ~ Bernoulli(δ)` is drawn; on
//! `Y_k = 1` the next state comes from `ν`, otherwise from the residual
//! kernel `(P(x, ·) - δν) / (1 - δ)`. Off `C`, `Y_k = 0` and the chain moves
//! by `P`. Regeneration times are the steps with `Y_k = 1`.

use std::fmt::Debug;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::purpose_rng;
use crate::stats::{z_score, Moments};

/// Stream purposes used by this module.
const TRACE: u64 = 0;
const BLOCKS: u64 = 1;
const PI_BLOCKS: u64 = 2;

pub trait MinorizedChain: Sync {
    type State: Clone + Debug + Send + Sync;

    /// Minorization lag. Simulation supports only `m = 1`.
    fn m(&self) -> usize {
        1
    }
    fn delta(&self) -> f64;
    fn in_small_set(&self, x: &Self::State) -> bool;
    fn sample_nu<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    /// Draw from `(P(x, ·) - δν) / (1 - δ)`; only called when `δ < 1`.
    fn sample_residual<R: Rng + ?Sized>(&self, x: &Self::State, rng: &mut R) -> Self::State;
    /// Draw from `P(x, ·)` for `x` off the small set.
    fn sample_kernel<R: Rng + ?Sized>(&self, x: &Self::State, rng: &mut R) -> Self::State;
    fn sample_pi<R: Rng + ?Sized>(&self, _rng: &mut R) -> Option<Self::State> {
        None
    }
    /// Exact stationary law as weighted states, when known.
    fn pi_exact(&self) -> Option<Vec<(Self::State, f64)>> {
        None
    }
    fn pi_c(&self) -> Option<f64> {
        self.pi_exact().map(|pi| {
            pi.iter()
                .filter(|(x, _)| self.in_small_set(x))
                .map(|(_, p)| p)
                .sum()
        })
    }
    /// Printable identifier used in trace exports.
    fn state_id(&self, x: &Self::State) -> String {
        format!("{x:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init<S> {
    Nu,
    Pi,
    Point(S),
}

fn check_m<C: MinorizedChain>(chain: &C) -> Result<()> {
    if chain.m() != 1 {
        return Err(Error::Unsupported(format!(
            "split-chain simulation needs m = 1, chain has m = {}",
            chain.m()
        )));
    }
    Ok(())
}

fn start_state<C: MinorizedChain>(
    chain: &C,
    init: &Init<C::State>,
    rng: &mut ChaCha8Rng,
) -> Result<C::State> {
    match init {
        Init::Nu => Ok(chain.sample_nu(rng)),
        Init::Pi => chain.sample_pi(rng).ok_or_else(|| {
            Error::Precondition("starting from π needs the exact stationary law".into())
        }),
        Init::Point(x) => Ok(x.clone()),
    }
}

/// Lazy split-chain path yielding `(X_k, Y_k)`. The mark is drawn before
/// the next state, so a path of `n` steps is a prefix of one of `n + 1`.
pub struct Path<'a, C: MinorizedChain> {
    chain: &'a C,
    rng: ChaCha8Rng,
    start: Option<C::State>,
    prev: Option<(C::State, bool)>,
}

impl<'a, C: MinorizedChain> Path<'a, C> {
    pub fn new(chain: &'a C, init: &Init<C::State>, mut rng: ChaCha8Rng) -> Result<Path<'a, C>> {
        check_m(chain)?;
        let start = start_state(chain, init, &mut rng)?;
        Ok(Path {
            chain,
            rng,
            start: Some(start),
            prev: None,
        })
    }
}

impl<C: MinorizedChain> Iterator for Path<'_, C> {
    type Item = (C::State, bool);

    fn next(&mut self) -> Option<(C::State, bool)> {
        let c = self.chain;
        let x = match self.prev.take() {
            None => self.start.take()?,
            Some((_, true)) => c.sample_nu(&mut self.rng),
            Some((x, false)) if c.in_small_set(&x) => c.sample_residual(&x, &mut self.rng),
            Some((x, false)) => c.sample_kernel(&x, &mut self.rng),
        };
        let y = c.in_small_set(&x) && {
            let d = c.delta();
            d >= 1.0 || self.rng.random::<f64>() < d
        };
        self.prev = Some((x.clone(), y));
        Some((x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenTrace<S> {
    pub states: Vec<S>,
    pub marks: Vec<bool>,
    /// Regeneration indices `τ(0) < τ(1) < ...` (steps with `Y = 1`).
    pub tau: Vec<usize>,
    pub seed: u64,
}

impl<S> RegenTrace<S> {
    /// `T_i = τ(i) - τ(i-1)` for `i >= 1`.
    pub fn block_lengths(&self) -> Vec<usize> {
        self.tau.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `[S, s_1, s_2, ...]`: the initial segment `X_0..=X_τ(0)` followed
    /// by the complete blocks `X_{τ(i-1)+1}..=X_τ(i)`.
    pub fn block_sums<F: Fn(&S) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.tau.len());
        let mut from = 0;
        for &t in &self.tau {
            out.push(self.states[from..=t].iter().map(&f).sum());
            from = t + 1;
        }
        out
    }

    /// Block id of each step; steps after the last regeneration get
    /// `tau.len()`.
    pub fn block_ids(&self) -> Vec<usize> {
        let mut ids = Vec::with_capacity(self.states.len());
        let mut b = 0;
        for k in 0..self.states.len() {
            ids.push(b);
            if self.marks[k] {
                b += 1;
            }
        }
        ids
    }

    /// CSV with columns `step, state, y, block`.
    pub fn write_csv<W: std::io::Write, I: Fn(&S) -> String>(&self, id: I, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "state", "y", "block"])?;
        for (k, (x, b)) in self.states.iter().zip(self.block_ids()).enumerate() {
            w.write_record([
                k.to_string(),
                id(x),
                (self.marks[k] as u8).to_string(),
                b.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `steps` states of the split chain.
pub fn simulate<C: MinorizedChain>(
    chain: &C,
    init: &Init<C::State>,
    steps: usize,
    seed: u64,
) -> Result<RegenTrace<C::State>> {
    let path = Path::new(chain, init, purpose_rng(seed, TRACE, 0))?;
    let mut states = Vec::with_capacity(steps);
    let mut marks = Vec::with_capacity(steps);
    let mut tau = Vec::new();
    for (k, (x, y)) in path.take(steps).enumerate() {
        states.push(x);
        marks.push(y);
        if y {
            tau.push(k);
        }
    }
    Ok(RegenTrace {
        states,
        marks,
        tau,
        seed,
    })
}

/// Sum of `g` over one block started from `ν`, up to and including the
/// first regeneration, and the block length.
fn nu_block<C: MinorizedChain, G: Fn(&C::State, bool) -> f64>(
    chain: &C,
    g: &G,
    rng: ChaCha8Rng,
) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    for (k, (x, y)) in Path::new(chain, &Init::Nu, rng)?.enumerate() {
        sum += g(&x, y);
        if y {
            return Ok((sum, k + 1));
        }
    }
    unreachable!("paths are infinite")
}

/// `n_blocks` independent `(Σ_{i<=τ} g(X_i, Y_i), τ + 1)` started from
/// `ν`; block `b` uses its own stream, so the output is independent of the
/// worker count.
pub fn nu_blocks<C, G>(chain: &C, g: G, n_blocks: usize, seed: u64) -> Result<Vec<(f64, usize)>>
where
    C: MinorizedChain,
    G: Fn(&C::State, bool) -> f64 + Sync,
{
    check_m(chain)?;
    (0..n_blocks)
        .into_par_iter()
        .map(|b| nu_block(chain, &g, purpose_rng(seed, BLOCKS, b as u64)))
        .collect()
}

/// `n_blocks` independent `(Σ_{i<=τ} g(X_i, Y_i), τ + 1)` with `X_0 ~ π`,
/// i.e. the segment up to and including the first regeneration.
pub fn pi_blocks<C, G>(chain: &C, g: G, n_blocks: usize, seed: u64) -> Result<Vec<(f64, usize)>>
where
    C: MinorizedChain,
    G: Fn(&C::State, bool) -> f64 + Sync,
{
    check_m(chain)?;
    (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let path = Path::new(chain, &Init::Pi, purpose_rng(seed, PI_BLOCKS, b as u64))?;
            let (mut sum, mut len) = (0.0, 0);
            for (x, y) in path {
                sum += g(&x, y);
                len += 1;
                if y {
                    break;
                }
            }
            Ok((sum, len))
        })
        .collect()
}

/// Independent draws of `S(f) = Σ_{i=0}^{τ} f(X_i)` with `X_0 ~ ν`.
pub fn sample_s_under_nu<C, F>(chain: &C, f: F, n_blocks: usize, seed: u64) -> Result<Vec<f64>>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    Ok(nu_blocks(chain, |x, _| f(x), n_blocks, seed)?
        .into_iter()
        .map(|b| b.0)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub estimate: f64,
    pub stderr: f64,
    pub exact: f64,
    pub z: f64,
    pub n_blocks: usize,
}

fn exact_pi<C: MinorizedChain>(chain: &C) -> Result<(Vec<(C::State, f64)>, f64)> {
    let pi = chain
        .pi_exact()
        .ok_or_else(|| Error::Precondition("this check needs the exact stationary law".into()))?;
    let pi_c = chain
        .pi_c()
        .ok_or_else(|| Error::Precondition("this check needs π(C)".into()))?;
    Ok((pi, pi_c))
}

/// Pitman's occupation formula: `E_ν Σ_{i=0}^{τ} F(X_i, Y_i)` against
/// `δ⁻¹ π(C)⁻¹ E_π F(X_0, Y_0)`, where under `π` the mark is
/// `Bernoulli(δ 1_C(X_0))`.
pub fn pitman_check<C, F>(chain: &C, big_f: F, n_blocks: usize, seed: u64) -> Result<CheckReport>
where
    C: MinorizedChain,
    F: Fn(&C::State, bool) -> f64 + Sync,
{
    let (pi, pi_c) = exact_pi(chain)?;
    let d = chain.delta();
    let e_pi: f64 = pi
        .iter()
        .map(|(x, p)| {
            if chain.in_small_set(x) {
                p * (d * big_f(x, true) + (1.0 - d) * big_f(x, false))
            } else {
                p * big_f(x, false)
            }
        })
        .sum();
    let exact = e_pi / (d * pi_c);
    let sums: Vec<f64> = nu_blocks(chain, &big_f, n_blocks, seed)?
        .into_iter()
        .map(|b| b.0)
        .collect();
    let m = Moments::from_slice(&sums);
    Ok(CheckReport {
        estimate: m.mean,
        stderr: m.stderr(),
        exact,
        z: z_score(m.mean, m.stderr(), exact),
        n_blocks,
    })
}

/// Block-mean identity on one trajectory started from `ν`: the mean of
/// the complete blocks `s_1, ..., s_n` against `δ⁻¹ π(C)⁻¹ m E_π f`.
pub fn block_mean_check<C, F>(chain: &C, f: F, n_blocks: usize, seed: u64) -> Result<CheckReport>
where
    C: MinorizedChain,
    F: Fn(&C::State) -> f64 + Sync,
{
    let (pi, pi_c) = exact_pi(chain)?;
    let exact =
        chain.m() as f64 * pi.iter().map(|(x, p)| p * f(x)).sum::<f64>() / (chain.delta() * pi_c);
    let mut sums = Vec::with_capacity(n_blocks);
    let mut seen_first = false;
    let mut acc = 0.0;
    for (x, y) in Path::new(chain, &Init::Nu, purpose_rng(seed, TRACE, 0))? {
        if seen_first {
            acc += f(&x);
        }
        if y {
            if seen_first {
                sums.push(acc);
                if sums.len() == n_blocks {
                    break;
                }
            }
            seen_first = true;
            acc = 0.0;
        }
    }
    let m = Moments::from_slice(&sums);
    Ok(CheckReport {
        estimate: m.mean,
        stderr: m.stderr(),
        exact,
        z: z_score(m.mean, m.stderr(), exact),
        n_blocks,
    })
}

/// Finite-state chain with an explicit minorization, used to exercise the
/// residual kernel (`δ < 1`).
#[derive(Debug, Clone)]
pub struct FiniteChain {
    p: Vec<Vec<f64>>,
    small: Vec<bool>,
    delta: f64,
    nu: Vec<f64>,
    pi: Vec<f64>,
    rows: Vec<WeightedIndex<f64>>,
    residual_rows: Vec<Option<WeightedIndex<f64>>>,
    nu_index: WeightedIndex<f64>,
    pi_index: WeightedIndex<f64>,
}

impl FiniteChain {
    /// Checks that `P` is stochastic, `ν` a probability, `δ ∈ (0, 1]` and
    /// `P(x, ·) >= δν` on the small set; computes the stationary law.
    pub fn new(
        p: Vec<Vec<f64>>,
        small: Vec<bool>,
        delta: f64,
        nu: Vec<f64>,
    ) -> Result<FiniteChain> {
        let n = p.len();
        if n == 0 || small.len() != n || nu.len() != n || p.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter(
                "transition matrix, small set and ν must share one dimension".into(),
            ));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Parameter(format!(
                "δ must lie in (0, 1], got {delta}"
            )));
        }
        for (i, r) in p.iter().enumerate() {
            if r.iter().any(|&v| !(v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!(
                    "row {i} is not a probability vector"
                )));
            }
        }
        if nu.iter().any(|&v| !(v >= 0.0)) || (nu.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter("ν is not a probability vector".into()));
        }
        if !small.iter().any(|&s| s) {
            return Err(Error::Parameter("small set is empty".into()));
        }
        for i in (0..n).filter(|&i| small[i]) {
            if (0..n).any(|j| p[i][j] < delta * nu[j] - 1e-12) {
                return Err(Error::Precondition(format!("P({i}, ·) >= δν fails")));
            }
        }
        let pi = stationary(&p)?;
        let rows = p
            .iter()
            .map(|r| WeightedIndex::new(r.clone()).map_err(weights))
            .collect::<Result<Vec<_>>>()?;
        let residual_rows = (0..n)
            .map(|i| {
                if !small[i] || delta >= 1.0 {
                    return Ok(None);
                }
                let r: Vec<f64> = (0..n).map(|j| (p[i][j] - delta * nu[j]).max(0.0)).collect();
                if r.iter().sum::<f64>() <= 0.0 {
                    return Ok(None);
                }
                WeightedIndex::new(r).map(Some).map_err(weights)
            })
            .collect::<Result<Vec<_>>>()?;
        let nu_index = WeightedIndex::new(nu.clone()).map_err(weights)?;
        let pi_index = WeightedIndex::new(pi.clone()).map_err(weights)?;
        Ok(FiniteChain {
            p,
            small,
            delta,
            nu,
            pi,
            rows,
            residual_rows,
            nu_index,
            pi_index,
        })
    }

    /// Largest minorization on `small`: `ν ∝ min_{x∈C} P(x, ·)` and `δ`
    /// its total mass.
    pub fn with_maximal_minorization(p: Vec<Vec<f64>>, small: Vec<bool>) -> Result<FiniteChain> {
        let n = p.len();
        let mins: Vec<f64> = (0..n)
            .map(|j| {
                (0..n)
                    .filter(|&i| small[i])
                    .map(|i| p[i][j])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let delta: f64 = mins.iter().sum();
        if !(delta > 0.0) {
            return Err(Error::Precondition(
                "rows of the small set share no mass".into(),
            ));
        }
        let nu = mins.iter().map(|m| m / delta).collect();
        FiniteChain::new(p, small, delta.min(1.0), nu)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.p
    }
}

fn weights(e: rand::distr::weighted::Error) -> Error {
    Error::Parameter(format!("invalid weights: {e}"))
}

/// Stationary law of a stochastic matrix by Gaussian elimination on
/// `π(P - I) = 0, Σπ = 1`; checked to be stationary within `1e-10`.
fn stationary(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    // rows: equations Σ_i π_i (P_ij - δ_ij) = 0 for j < n-1, plus Σ π = 1
    let mut a = vec![vec![0.0; n + 1]; n];
    for j in 0..n - 1 {
        for i in 0..n {
            a[j][i] = p[i][j] - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::Precondition("stationary law is not unique".into()));
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let k = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= k * a[col][c];
                }
            }
        }
    }
    let pi: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    for j in 0..n {
        let pj: f64 = (0..n).map(|i| pi[i] * p[i][j]).sum();
        if (pj - pi[j]).abs() > 1e-10 {
            return Err(Error::Precondition(
                "stationary solve did not converge".into(),
            ));
        }
    }
    Ok(pi)
}

impl MinorizedChain for FiniteChain {
    type State = usize;

    fn delta(&self) -> f64 {
        self.delta
    }

    fn in_small_set(&self, x: &usize) -> bool {
        self.small[*x]
    }

    fn sample_nu<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.nu_index.sample(rng)
    }

    fn sample_residual<R: Rng + ?Sized>(&self, x: &usize, rng: &mut R) -> usize {
        match &self.residual_rows[*x] {
            Some(w) => w.sample(rng),
            None => self.rows[*x].sample(rng),
        }
    }

    fn sample_kernel<R: Rng + ?Sized>(&self, x: &usize, rng: &mut R) -> usize {
        self.rows[*x].sample(rng)
    }

    fn sample_pi<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        Some(self.pi_index.sample(rng))
    }

    fn pi_exact(&self) -> Option<Vec<(usize, f64)>> {
        Some(self.pi.iter().copied().enumerate().collect())
    }

    fn state_id(&self, x: &usize) -> String {
        x.to_string()
    }
}
