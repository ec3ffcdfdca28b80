//! Fock states of multiply-occupied histograms and the creation/annihilation
//! operator algebra acting on them.

mod expr;
mod site;
mod state;
mod text;

pub use expr::{
    annihilate_any, commutator, number_node, number_site, number_total, FactorKind, OperatorExpr, OperatorFactor,
    OperatorMonomial,
};
pub use site::{Layout, Occupancy, SiteIndex};
pub use state::MixedState;
pub use text::parse_expr;
