//! Tabular safe policy improvement with baseline bootstrapping (SPIBB).
//!
//! The crate covers the full offline pipeline on finite MDPs:
//!
//! * [`mdp`]: tabular MDPs, value iteration with state-dependent discounting,
//!   policy evaluation and path probabilities;
//! * [`two_successor`]: the two-successor transformation of an MDP and the
//!   checks that it preserves transition probabilities and performance;
//! * [`data`]: trajectory sampling, transition counts, maximum-likelihood MDPs,
//!   bootstrap sets and the count-level two-successor transformation;
//! * [`bounds`]: admissible performance loss / sample-count bounds, including
//!   the regularized incomplete beta function and its inverse;
//! * [`spibb`]: the constrained policy-iteration solver and the basic-RL baseline;
//! * [`envs`]: Gridworld, Wet Chicken and Resource Gathering benchmarks and
//!   their behavior policies;
//! * [`experiment`]: seeded repeat runs, mean/CVaR aggregation, CSV and SVG output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod mdp;
pub mod policy;
pub mod spibb;
pub mod two_successor;

pub use error::{Error, Result};
pub use mdp::{MdpBuilder, TabularMdp, ValueFunction};
pub use policy::StochasticPolicy;
