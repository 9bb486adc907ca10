//! Proximal sampling for semi-smooth log-densities.

// `!(x > 0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod potentials;
pub mod proxmap;
pub mod rgo;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod stepsize;

pub use concentration::{BoundQuery, BoundVariant, RGrid, TailEstimate, TailReport};
pub use error::{Error, Result};
pub use metrics::DistanceEstimate;
pub use potentials::{Potential, SemiSmoothSpec, Term};
pub use proxmap::{AgdSolver, ClosedForm, ProxResult};
pub use rgo::{DrawStats, ProxMode, RgoBatch, RgoOptions, RgoOutcome, RgoWorkspace};
pub use sampler::{Baseline, BaselineTrace, Ensemble, SamplerOptions, StepStats, Trace};
pub use scalar::Real;
pub use stepsize::{Assumption, Metric, Plan};

pub type Potential64 = Potential<f64>;
pub type Potential32 = Potential<f32>;
pub type ProxResult64 = ProxResult<f64>;
pub type Plan64 = Plan<f64>;
pub type Plan32 = Plan<f32>;
pub type Trace64 = Trace<f64>;
pub type Ensemble64 = Ensemble<f64>;
pub type Assumption64 = Assumption<f64>;
pub type RgoOptions64 = RgoOptions<f64>;
pub type BoundQuery64 = BoundQuery<f64>;
