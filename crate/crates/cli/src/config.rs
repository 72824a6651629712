//! Experiment configuration, read from TOML.

use std::path::PathBuf;

use clap::ValueEnum;
use orlicz_regen::limits::Start;
use orlicz_regen::tower::{geometric_tower, TowerAtom, TowerSpec};
use orlicz_regen::young::YoungFn;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ComputeRho,
    ComputeZeta,
    VerifyBounds,
    CertifyCounterexample,
    PitmanCheck,
    Clt,
    Lil,
    BerryEsseen,
    TailBound,
    GoldenExamples,
}

impl Command {
    pub fn stochastic(self) -> bool {
        matches!(
            self,
            Command::PitmanCheck
                | Command::Clt
                | Command::Lil
                | Command::BerryEsseen
                | Command::TailBound
        )
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub functions: Functions,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub run: RunParams,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Functions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<YoungFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<YoungFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<YoungFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<YoungFn>,
    /// Candidate refuted by `certify-counterexample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<YoungFn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainConfig {
    GeometricTower {
        levels: u64,
    },
    Tower {
        atoms: Vec<TowerAtom>,
        #[serde(default)]
        allow_periodic: bool,
    },
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig::GeometricTower { levels: 20 }
    }
}

impl ChainConfig {
    pub fn spec(&self) -> TowerSpec {
        match self {
            ChainConfig::GeometricTower { levels } => geometric_tower(*levels),
            ChainConfig::Tower {
                atoms,
                allow_periodic,
            } => {
                let spec = TowerSpec::new(atoms.clone());
                if *allow_periodic {
                    spec.periodic_ok()
                } else {
                    spec
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Nu,
    Pi,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    /// Subtract `E_π f` before running limit experiments.
    pub center: bool,
    // compute-rho, compute-zeta, golden-examples
    pub x_lo: f64,
    pub x_hi: f64,
    pub points: usize,
    // verify-bounds
    pub improved: bool,
    pub suite_specs: usize,
    pub suite_max_atoms: usize,
    pub suite_h_max: u64,
    pub suite_f_max: f64,
    // certify-counterexample
    pub side: Side,
    pub search_n_max: usize,
    pub search_k_max: i32,
    pub theta: f64,
    pub threshold: f64,
    pub term_budget: usize,
    // pitman-check
    pub n_blocks: usize,
    // clt, lil, berry-esseen
    pub n_values: Vec<usize>,
    pub replicas: usize,
    pub block_pairs: usize,
    pub start: Start,
    pub n_max: usize,
    /// Young function for the Berry–Esseen precondition check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub be_psi: Option<YoungFn>,
    // tail-bound
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Grid end; defaults to `6 σ_f √n` with the exact tower variance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub t_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            center: true,
            x_lo: 10.0,
            x_hi: 1e3,
            points: 60,
            improved: true,
            suite_specs: 0,
            suite_max_atoms: 6,
            suite_h_max: 30,
            suite_f_max: 4.0,
            side: Side::Nu,
            search_n_max: 60,
            search_k_max: 1000,
            theta: 1.0,
            threshold: 1e6,
            term_budget: 200,
            n_blocks: 10_000,
            n_values: vec![1_000, 10_000, 100_000],
            replicas: 2_000,
            block_pairs: 100_000,
            start: Start::Pi,
            n_max: 100_000,
            be_psi: None,
            n: 1_000,
            alpha: 1.0,
            beta: 1.0,
            t_max: None,
            t_points: 24,
            k: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("out"),
        }
    }
}
