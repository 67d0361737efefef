//! Truncated Fock-space simulation for continuous-variable variational
//! compiling: gates, states, compiling costs, trainers, No-Free-Lunch Monte
//! Carlo over phase-space groups, and cost-landscape analysis.

pub mod costs;
pub mod error;
pub mod fock;
pub mod gates;
pub mod haar;
pub mod landscape;
pub mod nfl;
pub mod optim;
pub mod rng;
pub mod states;
pub mod trainer;

pub use error::{Error, Result};
pub use fock::{C64, CMatrix, CVector, DensityMatrix, HilbertSpec, Ket, Operator};
