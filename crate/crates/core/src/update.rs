//! The MCMC update operator
//! `H = Σ_s Σ_{i,j} a_i^{s†} a_j^s · P_i^s`, where `P_i^s` is the
//! operator-valued clique product over the neighbourhood of `s`.

use num_traits::Zero;

use crate::error::{check_capacity, Error, Result};
use crate::fock::{annihilate_any, commutator, number_node, number_site, Layout, MixedState, OperatorExpr, SiteIndex};
use crate::mrf::MrfSpec;
use crate::scalar::Scalar;

/// The hopping piece `H_s` of one unclamped node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePiece<T> {
    pub node: usize,
    /// `P_i^s` per bin `i`, normal-ordered; these only touch neighbour sites.
    pub creation_factors: Vec<OperatorExpr<T>>,
    /// `H_s` fully expanded and normal-ordered.
    pub expr: OperatorExpr<T>,
}

impl<T: Scalar> NodePiece<T> {
    /// Applies `H_s` through its factored form `Σ_i a_i† (Σ_j a_j) P_i`.
    pub fn apply(&self, state: &MixedState<T>) -> Result<MixedState<T>> {
        let layout = state.layout();
        let annihilate = annihilate_any::<T>(layout, self.node)?;
        let mut out = MixedState::zero(layout.clone());
        for (bin, factor) in self.creation_factors.iter().enumerate() {
            if factor.is_zero() {
                continue;
            }
            let weighted = state.apply_expr(factor)?;
            let removed = weighted.apply_expr(&annihilate)?;
            let created = removed.apply_create(SiteIndex::new(self.node, bin))?;
            out = out.add(&created);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOperator<T> {
    spec: MrfSpec<T>,
    expr: OperatorExpr<T>,
    pieces: Vec<NodePiece<T>>,
}

/// Outcome of `[H, N^u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport<T> {
    pub node: usize,
    pub conserved: bool,
    /// The normal-ordered commutator; empty when `conserved`.
    pub residual: OperatorExpr<T>,
}

impl<T: Scalar> UpdateOperator<T> {
    /// `H = Σ_i p_i a_i† Σ_j a_j` on a single node with `p.len()` bins.
    pub fn single_node(p: Vec<T>) -> Result<Self> {
        if p.iter().all(Zero::is_zero) {
            return Err(Error::Model("creation weights are all zero".into()));
        }
        if let Some(w) = p.iter().find(|w| w.is_negative()) {
            return Err(Error::Model(format!("negative creation weight {w}")));
        }
        Self::build(&MrfSpec::single_node(p)?)
    }

    /// Builds `H` for a network. Clamped nodes get no hopping piece but their
    /// number operators stay inside neighbouring clique factors.
    pub fn build(spec: &MrfSpec<T>) -> Result<Self> {
        let layout = spec.layout().clone();
        let mut estimate: u128 = 0;
        for s in spec.unclamped_nodes() {
            let m = spec.bins(s) as u128;
            let mut per_bin: u128 = 1;
            for c in spec.two_cliques_of(s) {
                per_bin = per_bin.saturating_mul(spec.bins(c.t) as u128);
            }
            for c in spec.three_cliques_of(s) {
                per_bin = per_bin.saturating_mul((spec.bins(c.t1) * spec.bins(c.t2)) as u128);
            }
            estimate = estimate.saturating_add(m.saturating_mul(m).saturating_mul(per_bin));
        }
        check_capacity("update operator monomials", estimate)?;

        let mut pieces = Vec::new();
        let mut expr = OperatorExpr::zero();
        for s in spec.unclamped_nodes() {
            let piece = build_piece(spec, &layout, s)?;
            expr = expr.sum(&piece.expr);
            pieces.push(piece);
        }
        check_capacity("update operator monomials", expr.len() as u128)?;
        Ok(UpdateOperator { spec: spec.clone(), expr, pieces })
    }

    pub fn spec(&self) -> &MrfSpec<T> {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        self.spec.layout()
    }

    /// `Σ_s H_s`, normal-ordered.
    pub fn expr(&self) -> &OperatorExpr<T> {
        &self.expr
    }

    /// Per-node pieces in node order (clamped nodes omitted).
    pub fn pieces(&self) -> &[NodePiece<T>] {
        &self.pieces
    }

    pub fn piece(&self, node: usize) -> Option<&NodePiece<T>> {
        self.pieces.iter().find(|p| p.node == node)
    }

    /// `H Ψ` through the factored pieces.
    pub fn apply(&self, state: &MixedState<T>) -> Result<MixedState<T>> {
        let mut out = MixedState::zero(state.layout().clone());
        for piece in &self.pieces {
            out = out.add(&piece.apply(state)?);
        }
        Ok(out)
    }

    /// Checks `[H, N^u] = 0`.
    pub fn verify_number_conservation(&self, node: usize) -> Result<ConservationReport<T>> {
        conservation_residual(&self.expr, self.layout(), node)
    }
}

/// `[expr, N^u]` normal-ordered, for any operator expression.
pub fn conservation_residual<T: Scalar>(
    expr: &OperatorExpr<T>,
    layout: &Layout,
    node: usize,
) -> Result<ConservationReport<T>> {
    let number = number_node::<T>(layout, node)?;
    check_capacity("commutator monomials", 2 * (expr.len() as u128) * (number.len() as u128))?;
    let residual = commutator(expr, &number);
    Ok(ConservationReport { node, conserved: residual.is_zero(), residual })
}

fn build_piece<T: Scalar>(spec: &MrfSpec<T>, layout: &Layout, s: usize) -> Result<NodePiece<T>> {
    let m = spec.bins(s);
    let mut creation_factors = Vec::with_capacity(m);
    for i in 0..m {
        let base = match spec.source(s) {
            Some(src) => src[i].clone(),
            None => T::one(),
        };
        let mut factor = OperatorExpr::constant(base);
        for c in spec.two_cliques_of(s) {
            let sum = (0..spec.bins(c.t)).fold(OperatorExpr::zero(), |acc, k| {
                acc.sum(&number_site::<T>(SiteIndex::new(c.t, k)).scale(&c.weights[i][k]))
            });
            factor = factor.product(&sum).normal_order();
        }
        for c in spec.three_cliques_of(s) {
            let mut sum = OperatorExpr::zero();
            for k1 in 0..spec.bins(c.t1) {
                for k2 in 0..spec.bins(c.t2) {
                    let term = number_site::<T>(SiteIndex::new(c.t1, k1))
                        .product(&number_site(SiteIndex::new(c.t2, k2)))
                        .scale(&c.weights[i][k1][k2]);
                    sum = sum.sum(&term);
                }
            }
            factor = factor.product(&sum).normal_order();
        }
        creation_factors.push(factor);
    }
    let annihilate = annihilate_any::<T>(layout, s)?;
    let mut expr = OperatorExpr::zero();
    for (i, factor) in creation_factors.iter().enumerate() {
        // T_{ij} · P_i, number operators to the right of the hop
        let hop = OperatorExpr::create(SiteIndex::new(s, i)).product(&annihilate);
        expr = expr.sum(&hop.product(factor));
    }
    Ok(NodePiece { node: s, creation_factors, expr: expr.normal_order() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{parse_expr, Occupancy};
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn single_node_expansion() {
        let h = UpdateOperator::single_node(vec![q(1, 2), q(1, 2)]).unwrap();
        let expected: OperatorExpr<Rational> =
            parse_expr("1/2 A'[1,1] A[1,1] + 1/2 A'[1,1] A[1,2] + 1/2 A'[1,2] A[1,1] + 1/2 A'[1,2] A[1,2]").unwrap();
        assert_eq!(h.expr(), &expected);
        assert_eq!(h.expr().len(), 4);
    }

    #[test]
    fn single_node_action() {
        let layout = Layout::single(2).unwrap();
        let (p1, p2) = (q(1, 3), q(2, 3));
        let h = UpdateOperator::single_node(vec![p1.clone(), p2.clone()]).unwrap();
        let st = MixedState::pure(layout.clone(), Occupancy::single(vec![1, 0]), q(1, 1)).unwrap();
        let expected = MixedState::from_terms(
            layout.clone(),
            [(Occupancy::single(vec![1, 0]), p1), (Occupancy::single(vec![0, 1]), p2)],
        )
        .unwrap();
        assert_eq!(h.apply(&st).unwrap(), expected);
        assert_eq!(st.apply_expr(h.expr()).unwrap(), expected);

        // (a_1†)^2|0⟩ under p = (1/2, 1/2): 2·(1/2) on each target
        let h = UpdateOperator::single_node(vec![q(1, 2), q(1, 2)]).unwrap();
        let st = MixedState::pure(layout.clone(), Occupancy::single(vec![2, 0]), q(1, 1)).unwrap();
        let expected = MixedState::from_terms(
            layout,
            [(Occupancy::single(vec![2, 0]), q(1, 1)), (Occupancy::single(vec![1, 1]), q(1, 1))],
        )
        .unwrap();
        assert_eq!(h.apply(&st).unwrap(), expected);
    }

    #[test]
    fn all_zero_weights_rejected() {
        assert!(matches!(UpdateOperator::single_node(vec![q(0, 1), q(0, 1)]), Err(Error::Model(_))));
    }

    #[test]
    fn source_only_spec_matches_single_node() {
        let p = vec![q(1, 5), q(3, 5), q(1, 5)];
        let spec = MrfSpec::builder(vec![3]).source(0, p.clone()).build().unwrap();
        assert_eq!(UpdateOperator::build(&spec).unwrap().expr(), UpdateOperator::single_node(p).unwrap().expr());
    }

    #[test]
    fn clamped_node_has_no_piece() {
        let spec = MrfSpec::builder(vec![2, 2])
            .pair_clique(0, 1, vec![vec![q(1, 1), q(1, 2)], vec![q(1, 3), q(1, 1)]])
            .clamp(1, vec![1, 0])
            .build()
            .unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        assert_eq!(h.pieces().len(), 1);
        assert_eq!(h.pieces()[0].node, 0);
        assert!(h.expr().sites().any(|site| site.node == 1));
    }

    #[test]
    fn two_node_hop_weights() {
        let w = vec![vec![q(1, 2), q(1, 3)], vec![q(1, 5), q(2, 7)]];
        let spec = MrfSpec::builder(vec![2, 2]).pair_clique(0, 1, w.clone()).build().unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        let layout = spec.layout().clone();
        // sample at node 1 in bin 1, node 2 in bin 2
        let st = MixedState::pure(layout.clone(), Occupancy::single_sample(&layout, &[0, 1]), q(1, 1)).unwrap();
        let out = h.piece(0).unwrap().apply(&st).unwrap();
        let expected = MixedState::from_terms(
            layout.clone(),
            [
                (Occupancy::single_sample(&layout, &[0, 1]), w[0][1].clone()),
                (Occupancy::single_sample(&layout, &[1, 1]), w[1][1].clone()),
            ],
        )
        .unwrap();
        assert_eq!(out, expected);
        assert_eq!(st.apply_expr(&h.piece(0).unwrap().expr).unwrap(), expected);
    }

    #[test]
    fn conservation_and_negative_control() {
        let spec = MrfSpec::builder(vec![2, 3])
            .pair_clique(0, 1, vec![vec![q(1, 1), q(1, 2), q(1, 3)], vec![q(1, 4), q(1, 5), q(1, 6)]])
            .build()
            .unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        for u in 0..2 {
            assert!(h.verify_number_conservation(u).unwrap().conserved);
        }
        let stray = h.expr().sum(&OperatorExpr::create(SiteIndex::new(0, 0)));
        let report = conservation_residual(&stray, spec.layout(), 0).unwrap();
        assert!(!report.conserved);
        // [a_1†, N^1] = -a_1†
        assert_eq!(report.residual, OperatorExpr::create(SiteIndex::new(0, 0)).scale(&q(-1, 1)));
    }

    #[test]
    fn residual_rejects_unknown_node() {
        let err = conservation_residual::<Rational>(&OperatorExpr::identity(), &Layout::single(2).unwrap(), 3);
        assert!(matches!(err, Err(Error::Index(_))));
    }
}
