//! Degrees-of-freedom analysis for RIS-assisted MIMO links.
//!
//! Distributed surfaces are placed so that each one adds an independent
//! stream. The `harness` module runs seeded Monte Carlo sweeps over them.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod placement;
pub mod rate;
pub mod ris;
pub mod rng;

pub use channel::{ArrayGeometry, Cascade, ChannelSet, LinkBudget, LinkModel};
pub use error::{Error, ErrorKind, Result};
pub use numerics::{ComplexMatrix, SvdResult, DEFAULT_RANK_TOL};
pub use placement::{PlacementPlan, PlanRequest, RisSite, SiteReport};
pub use rate::{NoiseModel, RateResult};
pub use ris::{RisConfig, RisMode};
