//! Lightweight statistical model checking of Markov decision processes.
//!
//! Schedulers are named by integer seeds: at each simulation step the seed
//! is hashed with the trace so far and the hash seeds a PRNG that resolves
//! the nondeterministic choice. Sampling seeds uniformly therefore samples
//! schedulers uniformly, and the modules here build the full pipeline on
//! top of that idea:
//!
//! - [`model`]: guarded-command MDPs over bounded integer variables;
//! - [`property`]: bounded temporal logic with computable horizons;
//! - [`scheduler`]: the incremental hash, the PRNG and the simulator;
//! - [`stats`]: Chernoff sample sizes, multiple-test corrections, SPRT;
//! - [`algorithms`]: simple and smart estimation/hypothesis testing plus
//!   the synthetic-population convergence harness;
//! - [`oracle`]: exact ground truth at desk scale;
//! - [`pool`]: the statically allocated worker pool.

pub mod algorithms;
mod lex;
pub mod model;
pub mod oracle;
pub mod pool;
pub mod property;
pub mod scheduler;
pub mod stats;

#[cfg(any(test, feature = "testgen"))]
pub mod testgen;
