//! Numerical thermodynamic formalism for one-sided shifts over general
//! alphabets: Ruelle transfer operators, Perron eigen-triples, pressure,
//! equilibrium states, and the Markov chains they induce.

pub mod alphabet;
pub mod error;
pub mod markov;
pub mod paths;
pub mod potential;
pub mod quadrature;
pub mod seqspace;
pub mod thermo;
pub mod transfer;

pub use error::{Error, Result};
