//! Operator expressions: finite weighted sums of products of bosonic
//! creation and annihilation operators.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use super::site::{Layout, SiteIndex};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorKind {
    Create,
    Annihilate,
}

/// `a†^p` or `a^p` at one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OperatorFactor {
    pub kind: FactorKind,
    pub site: SiteIndex,
    pub power: u32,
}

impl OperatorFactor {
    pub fn create(site: SiteIndex) -> Self {
        OperatorFactor { kind: FactorKind::Create, site, power: 1 }
    }

    pub fn annihilate(site: SiteIndex) -> Self {
        OperatorFactor { kind: FactorKind::Annihilate, site, power: 1 }
    }

    pub fn pow(self, power: u32) -> Self {
        assert!(power >= 1, "operator factor power must be positive");
        OperatorFactor { power, ..self }
    }
}

/// One product term. Factor order is operator-product order: the rightmost
/// factor acts first on a state.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMonomial<T> {
    pub coefficient: T,
    pub factors: Vec<OperatorFactor>,
}

impl<T: Scalar> OperatorMonomial<T> {
    pub fn new(coefficient: T, factors: Vec<OperatorFactor>) -> Self {
        OperatorMonomial { coefficient, factors: merge_adjacent(factors) }
    }

    pub fn is_normal_ordered(&self) -> bool {
        is_canonical(&self.factors)
    }
}

/// Merges neighbouring factors of equal kind and site, dropping zero powers.
fn merge_adjacent(factors: Vec<OperatorFactor>) -> Vec<OperatorFactor> {
    let mut out: Vec<OperatorFactor> = Vec::with_capacity(factors.len());
    for f in factors.into_iter().filter(|f| f.power > 0) {
        match out.last_mut() {
            Some(last) if last.kind == f.kind && last.site == f.site => last.power += f.power,
            _ => out.push(f),
        }
    }
    out
}

fn is_canonical(factors: &[OperatorFactor]) -> bool {
    factors.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        match (a.kind, b.kind) {
            (FactorKind::Annihilate, FactorKind::Create) => false,
            (ka, kb) if ka == kb => a.site < b.site,
            _ => true,
        }
    })
}

/// A finite sum of operator monomials with merged, nonzero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorExpr<T> {
    terms: BTreeMap<Vec<OperatorFactor>, T>,
}

impl<T: Scalar> Default for OperatorExpr<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> OperatorExpr<T> {
    /// The empty sum.
    pub fn zero() -> Self {
        OperatorExpr { terms: BTreeMap::new() }
    }

    pub fn identity() -> Self {
        Self::constant(T::one())
    }

    pub fn constant(c: T) -> Self {
        Self::from_monomial(OperatorMonomial { coefficient: c, factors: Vec::new() })
    }

    pub fn create(site: SiteIndex) -> Self {
        Self::from_factors(T::one(), vec![OperatorFactor::create(site)])
    }

    pub fn annihilate(site: SiteIndex) -> Self {
        Self::from_factors(T::one(), vec![OperatorFactor::annihilate(site)])
    }

    pub fn from_factors(coefficient: T, factors: Vec<OperatorFactor>) -> Self {
        Self::from_monomial(OperatorMonomial::new(coefficient, factors))
    }

    pub fn from_monomial(monomial: OperatorMonomial<T>) -> Self {
        let mut expr = Self::zero();
        expr.add_term(merge_adjacent(monomial.factors), monomial.coefficient);
        expr
    }

    pub fn from_monomials(monomials: impl IntoIterator<Item = OperatorMonomial<T>>) -> Self {
        let mut expr = Self::zero();
        for m in monomials {
            expr.add_term(merge_adjacent(m.factors), m.coefficient);
        }
        expr
    }

    fn add_term(&mut self, factors: Vec<OperatorFactor>, coefficient: T) {
        if coefficient.is_zero() {
            return;
        }
        match self.terms.entry(factors) {
            Entry::Vacant(slot) => {
                slot.insert(coefficient);
            }
            Entry::Occupied(mut slot) => {
                let merged = slot.get().clone() + coefficient;
                if merged.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = merged;
                }
            }
        }
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

    pub fn terms(&self) -> impl Iterator<Item = (&[OperatorFactor], &T)> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn monomials(&self) -> impl Iterator<Item = OperatorMonomial<T>> + '_ {
        self.terms.iter().map(|(k, v)| OperatorMonomial { coefficient: v.clone(), factors: k.clone() })
    }

    /// Coefficient of the exact factor sequence `factors`, zero if absent.
    pub fn coefficient(&self, factors: &[OperatorFactor]) -> T {
        self.terms.get(factors).cloned().unwrap_or_else(T::zero)
    }

    pub fn scale(&self, c: &T) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        OperatorExpr { terms: self.terms.iter().map(|(k, v)| (k.clone(), v.clone() * c.clone())).collect() }
    }

    pub fn is_normal_ordered(&self) -> bool {
        self.terms.keys().all(|k| is_canonical(k))
    }

    /// Every site mentioned by any factor.
    pub fn sites(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        self.terms.keys().flatten().map(|f| f.site)
    }

    pub fn check_layout(&self, layout: &Layout) -> Result<()> {
        self.sites().try_for_each(|site| layout.check_site(site))
    }

    /// Rewrites into canonical form: creations left of annihilations, each
    /// group ascending by `(node, bin)`, using `a_i a_j† = a_j† a_i + δ_ij`.
    pub fn normal_order(&self) -> Self {
        let mut acc: BTreeMap<NormalKey, T> = BTreeMap::new();
        for (factors, coefficient) in &self.terms {
            for (key, c) in normal_order_monomial(factors, coefficient) {
                let slot = acc.entry(key).or_insert_with(T::zero);
                *slot = slot.clone() + c;
            }
        }
        let mut out = Self::zero();
        for (key, c) in acc {
            if !c.is_zero() {
                out.terms.insert(key.into_factors(), c);
            }
        }
        out
    }

    /// Operator product `self · other`.
    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (fa, ca) in &self.terms {
            for (fb, cb) in &other.terms {
                let mut factors = fa.clone();
                factors.extend_from_slice(fb);
                out.add_term(merge_adjacent(factors), ca.clone() * cb.clone());
            }
        }
        out
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::identity(), |acc, _| acc.product(self))
    }
}

/// Normal-ordered monomial: creation powers then annihilation powers, each keyed by site.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NormalKey {
    create: BTreeMap<SiteIndex, u32>,
    annihilate: BTreeMap<SiteIndex, u32>,
}

impl NormalKey {
    fn into_factors(self) -> Vec<OperatorFactor> {
        let creates =
            self.create.into_iter().map(|(site, power)| OperatorFactor { kind: FactorKind::Create, site, power });
        let annihilates = self.annihilate.into_iter().map(|(site, power)| OperatorFactor {
            kind: FactorKind::Annihilate,
            site,
            power,
        });
        creates.chain(annihilates).collect()
    }
}

// Right-multiplies a running normal-ordered sum one elementary factor at a time.
// For a† at site x: (C·A)·a_x† = C·a_x†·A + q_x·C·(A / a_x) where q_x is the
// power of a_x in A; every other annihilator commutes with a_x†.
fn normal_order_monomial<T: Scalar>(factors: &[OperatorFactor], coefficient: &T) -> Vec<(NormalKey, T)> {
    let mut current: BTreeMap<NormalKey, T> = BTreeMap::new();
    current.insert(NormalKey { create: BTreeMap::new(), annihilate: BTreeMap::new() }, coefficient.clone());
    for factor in factors {
        for _ in 0..factor.power {
            let mut next: BTreeMap<NormalKey, T> = BTreeMap::new();
            for (key, c) in current {
                match factor.kind {
                    FactorKind::Annihilate => {
                        let mut k = key;
                        *k.annihilate.entry(factor.site).or_insert(0) += 1;
                        accumulate(&mut next, k, c);
                    }
                    FactorKind::Create => {
                        let q = key.annihilate.get(&factor.site).copied().unwrap_or(0);
                        if q > 0 {
                            let mut contracted = key.clone();
                            if q == 1 {
                                contracted.annihilate.remove(&factor.site);
                            } else {
                                contracted.annihilate.insert(factor.site, q - 1);
                            }
                            accumulate(&mut next, contracted, c.clone() * T::from_count(q as u64));
                        }
                        let mut moved = key;
                        *moved.create.entry(factor.site).or_insert(0) += 1;
                        accumulate(&mut next, moved, c);
                    }
                }
            }
            current = next;
        }
    }
    current.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

fn accumulate<T: Scalar>(map: &mut BTreeMap<NormalKey, T>, key: NormalKey, c: T) {
    let slot = map.entry(key).or_insert_with(T::zero);
    *slot = slot.clone() + c;
}

/// `[a, b] = a·b − b·a`, normal-ordered. Empty exactly when `a` and `b` commute.
pub fn commutator<T: Scalar>(a: &OperatorExpr<T>, b: &OperatorExpr<T>) -> OperatorExpr<T> {
    (a.product(b) - b.product(a)).normal_order()
}

/// `N_i^s = a_i^{s†} a_i^s`.
pub fn number_site<T: Scalar>(site: SiteIndex) -> OperatorExpr<T> {
    OperatorExpr::from_factors(T::one(), vec![OperatorFactor::create(site), OperatorFactor::annihilate(site)])
}

/// `N^s = Σ_i N_i^s`.
pub fn number_node<T: Scalar>(layout: &Layout, node: usize) -> Result<OperatorExpr<T>> {
    layout.check_node(node)?;
    Ok((0..layout.bins(node))
        .map(|bin| number_site(SiteIndex::new(node, bin)))
        .fold(OperatorExpr::zero(), |acc, n| acc.sum(&n)))
}

/// Global `N = Σ_s N^s`.
pub fn number_total<T: Scalar>(layout: &Layout) -> OperatorExpr<T> {
    layout.sites().map(number_site).fold(OperatorExpr::zero(), |acc, n| acc.sum(&n))
}

/// `Σ_j a_j^s` over all bins of one node.
pub fn annihilate_any<T: Scalar>(layout: &Layout, node: usize) -> Result<OperatorExpr<T>> {
    layout.check_node(node)?;
    Ok((0..layout.bins(node))
        .map(|bin| OperatorExpr::annihilate(SiteIndex::new(node, bin)))
        .fold(OperatorExpr::zero(), |acc, a| acc.sum(&a)))
}

impl<T: Scalar> Add for OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn add(self, rhs: Self) -> Self::Output {
        self.sum(&rhs)
    }
}

impl<T: Scalar> Add for &OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn add(self, rhs: Self) -> Self::Output {
        self.sum(rhs)
    }
}

impl<T: Scalar> Neg for OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn neg(self) -> Self::Output {
        self.scale(&-T::one())
    }
}

impl<T: Scalar> Sub for OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.sum(&-rhs)
    }
}

impl<T: Scalar> Sub for &OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.sum(&-rhs.clone())
    }
}

impl<T: Scalar> Mul for OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.product(&rhs)
    }
}

impl<T: Scalar> Mul for &OperatorExpr<T> {
    type Output = OperatorExpr<T>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.product(rhs)
    }
}
