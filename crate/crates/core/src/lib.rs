//! Robust low-rank plus sparse matrix decomposition, `Y = U V + S`, by
//! alternating minimization with adaptively reweighted sparse penalties.
//!
//! ```
//! use awls_rpca::{solve, SolverConfig, SynthInstance, SynthSpec, rmse};
//!
//! let inst = SynthInstance::generate(&SynthSpec::new(60, 60, 0.1, 2.0, 7)).unwrap();
//! let result = solve(&inst.y, &SolverConfig::with_rank(1)).unwrap();
//! assert!(rmse(&result.low_rank().unwrap(), &inst.x_true).unwrap() < 1e-6);
//! ```

pub mod bench;
pub mod cli;
pub mod error;
pub mod io;
pub mod matrix;
pub mod media;
pub mod solver;
pub mod synth;
pub mod weights;

pub use error::{Dims, Error, Result};
pub use matrix::DenseMatrix;
pub use solver::{solve, solve_observed, DecompositionResult, Init, SolverConfig, Termination, Variant};
pub use synth::{rmse, snr_of, SynthInstance, SynthSpec};
