//! Brute-force analysis on small canonical ensembles: state enumeration,
//! transition kernels induced by `H`, stationary vectors, and the
//! multinomial eigen-relation `HΨ = nΨ`.

mod equilibrium;
mod kernel;
mod space;
mod stationary;

pub use equilibrium::{
    check_equilibrium_multinomial, multinomial_distribution, multinomial_state, multinomial_weight, EquilibriumReport,
};
pub use kernel::{build_kernel, per_site_kernel, ScanScheme, TransitionKernel};
pub use space::{composition_count, compositions, enumerate_states, StateSpace};
pub use stationary::{
    closed_classes, expected_statistic, stationary_distribution, stationary_distribution_with, Distribution,
    StationaryOptions,
};
