//! Pricing library for cliquet-style equity-indexed annuities under an
//! uncertain-volatility equity model with Hull-White stochastic rates.
//!
//! Three independent engines value the same contracts:
//! - a lattice engine that discretizes the rate factor on a recombining
//!   multiple-jumps tree and the equity index on log-uniform meshes, with a
//!   per-node worst-case volatility search ([`eia_pricer`], [`uvhw_engine`]);
//! - an exact-simulation Monte Carlo pricer for the fixed-volatility case,
//!   with Longstaff-Schwartz handling of surrender ([`mc_benchmark`]);
//! - a GPR-tree pricer that propagates value functions over simulated
//!   scenario clouds with eight-point Gaussian cubature ([`gtu_benchmark`]).

pub mod eia_contract;
pub mod eia_pricer;
pub mod equity_mesh;
pub mod error;
pub mod gtu_benchmark;
pub mod hw_math;
pub mod mc_benchmark;
pub mod rate_lattice;
pub mod term_structure;
pub mod uvhw_engine;

pub use eia_contract::{EiaContract, Surrender};
pub use eia_pricer::{ExerciseSide, Mode, RegionClass};
pub use error::{Error, Result};
pub use term_structure::{CurveSpec, HwParams, RateScale};
pub use uvhw_engine::{LatticeConfig, ModelParams, Objective, PriceResult};
