//! Hitting times of density-dependent Markov chains.
//!
//! A chain `X^n` on a lattice jumps by `l_i` at rate `n·F_i(X^n/n)`. As
//! `n → ∞`, `X^n/n` follows the fluid ODE `x' = Σ l_i F_i(x)` and the first
//! passage time `τ_r^n` of level `r` concentrates at the fluid hitting time
//! `τ_r`. This crate computes `τ_r` and the Gaussian and moderate-deviation
//! rates of `τ_r^n - τ_r`, and checks them against exact simulation, a
//! diffusion approximation and exact small-chain computations.
//!
//! The analytic layer ([`model`], [`fluid`], [`rates`], [`numeric`]) is
//! generic over [`Scalar`] (`f32` or `f64`). Simulation and statistics work
//! in `f64` on [`Model`].

// `!(a > b)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diffusion;
pub mod experiment;
pub mod fluid;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod rates;
pub mod rng;
pub mod scalar;
pub mod ssa;
pub mod stats;

use thiserror::Error;

pub use config::ModelConfig;
pub use diffusion::{simulate_diffusion_hitting, DiffusionConfig};
pub use experiment::{
    compare_engines, run_clt_experiment, run_mdp_experiment, EmpiricalCurve, Engine, ExperimentConfig,
};
pub use fluid::{solve_fluid, tau_of_r, FluidPath};
pub use model::{ModelBuilder, ModelSpec, RateFn};
pub use oracle::{exact_mean_hitting, exact_survival, TruncatedChain};
pub use rates::{local_ld_rate, variational_minimum, PiecewiseLinearPath, RateProfile};
pub use rng::StreamKey;
pub use scalar::Scalar;
pub use ssa::{simulate_hitting, simulate_path, HittingSample};

pub type Model = ModelSpec<f64>;
pub type ModelF32 = ModelSpec<f32>;
pub type Fluid = FluidPath<f64>;
pub type FluidF32 = FluidPath<f32>;
pub type Profile = RateProfile<f64>;
pub type ProfileF32 = RateProfile<f32>;
pub type Path = PiecewiseLinearPath<f64>;

/// Any error raised by this crate, tagged with its originating module.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Fluid(#[from] fluid::FluidError),
    #[error(transparent)]
    Rates(#[from] rates::RateError),
    #[error(transparent)]
    Ssa(#[from] ssa::SsaError),
    #[error(transparent)]
    Diffusion(#[from] diffusion::DiffusionError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Experiment(#[from] experiment::ExperimentError),
    #[error(transparent)]
    Numeric(#[from] numeric::NumericError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Model(_) => "model",
            Error::Fluid(_) => "fluid",
            Error::Rates(_) => "rates",
            Error::Ssa(_) => "ssa",
            Error::Diffusion(_) => "diffusion",
            Error::Oracle(_) => "oracle",
            Error::Experiment(_) => "experiment",
            Error::Numeric(_) => "numeric",
        }
    }
}
