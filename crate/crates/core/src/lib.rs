//! Orlicz integrability of additive functionals of regenerative Markov
//! chains: Young-function calculus, Orlicz norms, split-chain simulation,
//! the tower counterexample chain, bound verification and limit-theorem
//! experiments.

pub mod bounds;
pub mod error;
pub mod ext;
pub mod limits;
pub mod norm;
pub mod numeric;
pub mod rng;
pub mod split_chain;
pub mod stats;
pub mod tower;
pub mod young;

pub use error::{Error, Result};
pub use ext::Ext;
