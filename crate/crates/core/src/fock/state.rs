//! Probability-weighted mixtures of occupancy basis states.
//!
//! A term `n ↦ w` stands for `w · ∏_k (a_k†)^{n_k} |0⟩` with no
//! `1/√(∏ n_k!)` normalisation, so `a_i` acting on it multiplies the weight
//! by `n_i`.

use std::collections::BTreeMap;

use super::expr::{FactorKind, OperatorExpr, OperatorFactor};
use super::site::{Layout, Occupancy, SiteIndex};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedState<T> {
    layout: Layout,
    terms: BTreeMap<Occupancy, T>,
}

impl<T: Scalar> MixedState<T> {
    /// The annihilated result `0`: no terms at all.
    pub fn zero(layout: Layout) -> Self {
        MixedState { layout, terms: BTreeMap::new() }
    }

    /// `|0⟩`, the empty histogram with weight one.
    pub fn vacuum(layout: Layout) -> Self {
        let occ = Occupancy::empty(&layout);
        Self::pure(layout, occ, T::one()).expect("empty occupancy matches its layout")
    }

    pub fn pure(layout: Layout, occ: Occupancy, weight: T) -> Result<Self> {
        let mut state = Self::zero(layout);
        state.insert(occ, weight)?;
        Ok(state)
    }

    pub fn from_terms(layout: Layout, terms: impl IntoIterator<Item = (Occupancy, T)>) -> Result<Self> {
        let mut state = Self::zero(layout);
        for (occ, w) in terms {
            state.insert(occ, w)?;
        }
        Ok(state)
    }

    /// Adds `weight` to the term at `occ`, dropping it if the sum cancels.
    pub fn insert(&mut self, occ: Occupancy, weight: T) -> Result<()> {
        self.layout.check_occupancy(&occ)?;
        self.accumulate(occ, weight);
        Ok(())
    }

    fn accumulate(&mut self, occ: Occupancy, weight: T) {
        if weight.is_zero() {
            return;
        }
        let merged = match self.terms.remove(&occ) {
            Some(w) => w + weight,
            None => weight,
        };
        if !merged.is_zero() {
            self.terms.insert(occ, merged);
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Occupancy, &T)> {
        self.terms.iter()
    }

    /// Raw coefficient of the basis term, zero if absent.
    pub fn weight(&self, occ: &Occupancy) -> T {
        self.terms.get(occ).cloned().unwrap_or_else(T::zero)
    }

    pub fn total_weight(&self) -> T {
        self.terms.values().fold(T::zero(), |acc, w| acc + w.clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero(self.layout.clone());
        for (occ, w) in &self.terms {
            out.accumulate(occ.clone(), w.clone() * c.clone());
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (occ, w) in &other.terms {
            out.accumulate(occ.clone(), w.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-T::one()))
    }

    pub fn map_weights<U: Scalar>(&self, f: impl Fn(&T) -> U) -> MixedState<U> {
        let mut out = MixedState::zero(self.layout.clone());
        for (occ, w) in &self.terms {
            out.accumulate(occ.clone(), f(w));
        }
        out
    }

    /// Increments the count at `site` in every term.
    pub fn apply_create(&self, site: SiteIndex) -> Result<Self> {
        self.layout.check_site(site)?;
        Ok(self.apply_factor_unchecked(&OperatorFactor::create(site)))
    }

    /// Decrements the count at `site`, weighting each term by the count
    /// before removal; terms with an empty bin vanish.
    pub fn apply_annihilate(&self, site: SiteIndex) -> Result<Self> {
        self.layout.check_site(site)?;
        Ok(self.apply_factor_unchecked(&OperatorFactor::annihilate(site)))
    }

    fn apply_factor_unchecked(&self, factor: &OperatorFactor) -> Self {
        let mut out = Self::zero(self.layout.clone());
        for (occ, w) in &self.terms {
            if let Some((occ, w)) = apply_factor(factor, occ.clone(), w.clone()) {
                out.accumulate(occ, w);
            }
        }
        out
    }

    /// Linear action of `expr`, rightmost factor first, with identical
    /// occupancies merged.
    pub fn apply_expr(&self, expr: &OperatorExpr<T>) -> Result<Self> {
        expr.check_layout(&self.layout)?;
        let mut out = Self::zero(self.layout.clone());
        for (factors, c) in expr.terms() {
            for (occ, w) in &self.terms {
                if let Some((occ, w)) = apply_monomial(factors, occ.clone(), w.clone() * c.clone()) {
                    out.accumulate(occ, w);
                }
            }
        }
        Ok(out)
    }

    /// `⟨bra| Ψ⟩`: the raw weight of `bra` times `∏ n_k!`.
    pub fn inner_product(&self, bra: &Occupancy) -> T {
        match self.terms.get(bra) {
            Some(w) => w.clone() * bra.factorial_product::<T>(),
            None => T::zero(),
        }
    }

    /// Sum of absolute weights.
    pub fn l1_norm(&self) -> T {
        crate::scalar::abs_sum(self.terms.values())
    }
}

fn apply_factor<T: Scalar>(factor: &OperatorFactor, mut occ: Occupancy, mut weight: T) -> Option<(Occupancy, T)> {
    let count = occ.count_mut(factor.site);
    match factor.kind {
        FactorKind::Create => *count += factor.power,
        FactorKind::Annihilate => {
            if *count < factor.power {
                return None;
            }
            for _ in 0..factor.power {
                weight = weight * T::from_count(*count as u64);
                *count -= 1;
            }
        }
    }
    Some((occ, weight))
}

fn apply_monomial<T: Scalar>(factors: &[OperatorFactor], mut occ: Occupancy, mut weight: T) -> Option<(Occupancy, T)> {
    for factor in factors.iter().rev() {
        (occ, weight) = apply_factor(factor, occ, weight)?;
    }
    Some((occ, weight))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::expr::{annihilate_any, number_node, number_site, number_total};
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn one_node(m: usize) -> Layout {
        Layout::single(m).unwrap()
    }

    fn pure(counts: Vec<u32>, w: Rational) -> MixedState<Rational> {
        MixedState::pure(one_node(counts.len()), Occupancy::single(counts), w).unwrap()
    }

    #[test]
    fn create_increments() {
        let vac = MixedState::<Rational>::vacuum(one_node(4));
        assert_eq!(vac.apply_create(SiteIndex::new(0, 2)).unwrap(), pure(vec![0, 0, 1, 0], q(1, 1)));
        let zero = MixedState::<Rational>::zero(one_node(4));
        assert!(zero.apply_create(SiteIndex::new(0, 0)).unwrap().is_zero());
        assert_eq!(pure(vec![2, 0], q(1, 3)).apply_create(SiteIndex::new(0, 0)).unwrap(), pure(vec![3, 0], q(1, 3)));
        assert!(vac.apply_create(SiteIndex::new(0, 4)).is_err());
    }

    #[test]
    fn annihilate_weights_by_count() {
        let st = pure(vec![0, 0, 2, 0], q(1, 1));
        assert_eq!(st.apply_annihilate(SiteIndex::new(0, 2)).unwrap(), pure(vec![0, 0, 1, 0], q(2, 1)));
        let st = pure(vec![0, 0, 1, 0], q(1, 1));
        assert!(st.apply_annihilate(SiteIndex::new(0, 0)).unwrap().is_zero());
        let st = pure(vec![1, 0, 1, 0], q(1, 1));
        assert_eq!(st.apply_annihilate(SiteIndex::new(0, 0)).unwrap(), pure(vec![0, 0, 1, 0], q(1, 1)));
        // vacuum rule
        let vac = MixedState::<Rational>::vacuum(one_node(3));
        assert!(vac.apply_annihilate(SiteIndex::new(0, 1)).unwrap().is_zero());
    }

    #[test]
    fn annihilate_any_bin() {
        let layout = one_node(4);
        let sum_a = annihilate_any::<Rational>(&layout, 0).unwrap();
        let out = pure(vec![0, 0, 2, 0], q(1, 1)).apply_expr(&sum_a).unwrap();
        assert_eq!(out, pure(vec![0, 0, 1, 0], q(2, 1)));
        let out = pure(vec![1, 0, 1, 0], q(1, 1)).apply_expr(&sum_a).unwrap();
        let expected = MixedState::from_terms(
            layout,
            [(Occupancy::single(vec![0, 0, 1, 0]), q(1, 1)), (Occupancy::single(vec![1, 0, 0, 0]), q(1, 1))],
        )
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let st = pure(vec![1, 2], q(3, 7));
        assert_eq!(st.apply_expr(&OperatorExpr::identity()).unwrap(), st);
    }

    #[test]
    fn inner_products() {
        let st = pure(vec![2, 1], q(1, 1));
        assert_eq!(st.inner_product(&Occupancy::single(vec![2, 1])), q(2, 1));
        let st = pure(vec![0, 1], q(5, 1));
        assert_eq!(st.inner_product(&Occupancy::single(vec![1, 0])), q(0, 1));
        let vac = MixedState::<Rational>::vacuum(one_node(2));
        assert_eq!(vac.inner_product(&Occupancy::single(vec![0, 0])), q(1, 1));
    }

    #[test]
    fn number_operator_eigenvalues() {
        let layout = one_node(4);
        let n3 = number_site::<Rational>(SiteIndex::new(0, 2));
        assert_eq!(pure(vec![0, 0, 5, 0], q(1, 1)).apply_expr(&n3).unwrap(), pure(vec![0, 0, 5, 0], q(5, 1)));
        let n = number_total::<Rational>(&layout);
        assert!(MixedState::<Rational>::vacuum(layout).apply_expr(&n).unwrap().is_zero());
        let n = number_node::<Rational>(&one_node(2), 0).unwrap();
        assert_eq!(pure(vec![1, 2], q(1, 1)).apply_expr(&n).unwrap(), pure(vec![1, 2], q(3, 1)));
    }

    #[test]
    fn bad_layout_is_an_index_error() {
        let st = pure(vec![1, 0], q(1, 1));
        let e = OperatorExpr::<Rational>::create(SiteIndex::new(1, 0));
        assert!(st.apply_expr(&e).is_err());
        let mut st = st;
        assert!(st.insert(Occupancy::single(vec![1, 0, 0]), q(1, 1)).is_err());
    }
}
