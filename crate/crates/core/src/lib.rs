//! Tabular policy mirror descent with computable optimality certificates.
//!
//! The crate is organised around a small number of pieces:
//!
//! * [`mdp`] holds the model, exact policy evaluation, the advantage gap
//!   function and the visitation / occupancy measures.
//! * [`bregman`] provides the distance-generating functions and the
//!   closed-form prox-mappings used by every mirror-descent update.
//! * [`pmd`] runs deterministic policy mirror descent with the geometric
//!   and gap-refreshed step schedules, plus policy and value iteration.
//! * [`spmd`] is the stochastic variant driven by a Monte-Carlo Q sampler.
//! * [`certify`] turns streamed Q estimates into value estimates and
//!   lower bounds on the optimal value.
//! * [`envs`] builds GridWorld, Taxi and random instances and handles the
//!   JSON model format.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod bregman;
pub mod certify;
pub mod envs;
pub mod error;
pub mod linalg;
pub mod mdp;
pub mod pmd;
pub mod spmd;

pub use bregman::{Geometry, Step};
pub use certify::{CertificateReport, NoiseParams, OnlineAccumulator};
pub use error::{Error, Result};
pub use mdp::{Evaluation, MdpModel, OccupancyMeasure, Policy, Regularizer, RegularizerKind};
pub use pmd::{RunConfig, StepSchedule, Termination};
pub use spmd::{SamplerConfig, SpmdConfig};
