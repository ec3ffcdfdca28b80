//! Operator-algebra formulation of Markov chain Monte Carlo for Markov
//! random fields whose nodes hold histograms of samples.
//!
//! The crate is organised bottom-up:
//!
//! - [`fock`]: creation/annihilation operators, normal ordering, mixed states.
//! - [`mrf`]: network description, clique weights, evidence clamping.
//! - [`update`]: the update operator `H` and its conservation checks.
//! - [`exact`]: state enumeration, transition kernels, stationary vectors,
//!   and the multinomial equilibrium check.
//! - [`sampler`]: the stochastic annihilate-then-create chain.
//! - [`diagram`]: expansion of powers of `H` into ordered interaction words.
//!
//! All algebra is generic over [`Scalar`]; the aliases below fix the two
//! instantiations used in practice.

pub mod diagram;
pub mod error;
pub mod exact;
pub mod fock;
pub mod mrf;
pub mod sampler;
pub mod scalar;
pub mod update;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Arbitrary-precision rational used for exact checks.
pub type Rational = num_rational::BigRational;

pub type ExactExpr = fock::OperatorExpr<Rational>;
pub type FloatExpr = fock::OperatorExpr<f64>;
pub type ExactState = fock::MixedState<Rational>;
pub type FloatState = fock::MixedState<f64>;
pub type ExactSpec = mrf::MrfSpec<Rational>;
pub type FloatSpec = mrf::MrfSpec<f64>;
pub type ExactUpdate = update::UpdateOperator<Rational>;
pub type FloatUpdate = update::UpdateOperator<f64>;
pub type ExactKernel = exact::TransitionKernel<Rational>;
pub type FloatKernel = exact::TransitionKernel<f64>;
