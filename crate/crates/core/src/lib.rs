//! Weighted-median opinion dynamics on influence networks.
//!
//! Agents repeatedly adopt the weighted median of the opinions they listen to.
//! The crate covers the median operator itself, network analysis (decisive
//! links, cohesive sets), simulation, equilibrium characterisation and
//! consensus-reachability decisions, plus a reduction from NAE3SAT.
//!
//! Weights are exact rationals. The generic core accepts any
//! [`scalar::Scalar`]; [`Rational`] and [`Network`] are the defaults.

pub mod cohesion;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod fixtures;
pub mod hardness;
pub mod io;
pub mod median;
pub mod network;
pub mod scalar;

pub use error::{Error, Result};
pub use network::InfluenceNetwork;
pub use scalar::Scalar;

/// Arbitrary-precision rational weight.
pub type Rational = num_rational::BigRational;
/// Rational weight on 64-bit integers.
pub type Rational64 = num_rational::Ratio<i64>;
/// Network with arbitrary-precision weights.
pub type Network = InfluenceNetwork<Rational>;
/// Network with 64-bit rational weights.
pub type Network64 = InfluenceNetwork<Rational64>;
