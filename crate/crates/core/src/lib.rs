// `!(x > 0.0)` is used on purpose so that NaN fails every positivity check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod couplings;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod quad;
pub mod rates;
pub mod rho;
pub mod rng;
pub mod stable;
pub mod stats;
