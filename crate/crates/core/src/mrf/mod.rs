//! Network description: nodes, bins, clique weight tables, external sources
//! and clamped evidence, plus classical evaluation of clique products.

mod json;

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{Layout, Occupancy};
use crate::scalar::Scalar;

pub use json::load_spec;

/// Pairwise weights `p[i][k]` for creation in bin `i` at `s` given bin `k` at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoClique<T> {
    pub s: usize,
    pub t: usize,
    pub weights: Vec<Vec<T>>,
}

/// Triple weights `p[i][k1][k2]` with `t1 < t2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeClique<T> {
    pub s: usize,
    pub t1: usize,
    pub t2: usize,
    pub weights: Vec<Vec<Vec<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrfSpec<T> {
    layout: Layout,
    sources: Vec<Option<Vec<T>>>,
    two_cliques: Vec<TwoClique<T>>,
    three_cliques: Vec<ThreeClique<T>>,
    clamped: BTreeMap<usize, Vec<u32>>,
    neighborhoods: Vec<Vec<usize>>,
}

/// Above this many neighbour configurations, admissibility is checked on a
/// fixed-seed random sample instead of exhaustively.
const EXHAUSTIVE_ADMISSIBILITY_LIMIT: u128 = 100_000;
const SAMPLED_ADMISSIBILITY_CHECKS: usize = 10_000;

impl<T: Scalar> MrfSpec<T> {
    pub fn builder(bins: Vec<usize>) -> MrfBuilder<T> {
        MrfBuilder {
            bins,
            sources: Vec::new(),
            two_cliques: Vec::new(),
            three_cliques: Vec::new(),
            clamped: Vec::new(),
        }
    }

    /// A single isolated node driven by an external source.
    pub fn single_node(source: Vec<T>) -> Result<Self> {
        let m = source.len();
        Self::builder(vec![m]).source(0, source).build()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_nodes(&self) -> usize {
        self.layout.num_nodes()
    }

    pub fn bins(&self, node: usize) -> usize {
        self.layout.bins(node)
    }

    pub fn source(&self, node: usize) -> Option<&[T]> {
        self.sources[node].as_deref()
    }

    pub fn two_cliques(&self) -> &[TwoClique<T>] {
        &self.two_cliques
    }

    pub fn three_cliques(&self) -> &[ThreeClique<T>] {
        &self.three_cliques
    }

    /// Ordered neighbour list `C(s)`.
    pub fn neighborhood(&self, node: usize) -> &[usize] {
        &self.neighborhoods[node]
    }

    pub fn two_cliques_of(&self, node: usize) -> impl Iterator<Item = &TwoClique<T>> {
        self.two_cliques.iter().filter(move |c| c.s == node)
    }

    pub fn three_cliques_of(&self, node: usize) -> impl Iterator<Item = &ThreeClique<T>> {
        self.three_cliques.iter().filter(move |c| c.s == node)
    }

    pub fn clamped(&self, node: usize) -> Option<&[u32]> {
        self.clamped.get(&node).map(Vec::as_slice)
    }

    pub fn is_clamped(&self, node: usize) -> bool {
        self.clamped.contains_key(&node)
    }

    pub fn clamped_nodes(&self) -> impl Iterator<Item = (usize, &[u32])> {
        self.clamped.iter().map(|(&s, v)| (s, v.as_slice()))
    }

    pub fn unclamped_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|s| !self.is_clamped(*s)).collect()
    }

    /// Unnormalised creation weights at `node` given the current occupancy:
    /// `w_i = source_i · ∏_t Σ_k p_{ik} n_k^t · ∏_{(t1,t2)} Σ_{k1,k2} p_{ik1k2} n_{k1}^{t1} n_{k2}^{t2}`.
    pub fn creation_weights(&self, node: usize, occ: &Occupancy) -> Result<Vec<T>> {
        self.layout.check_node(node)?;
        self.layout.check_occupancy(occ)?;
        if self.is_clamped(node) {
            return Err(Error::Model(format!("node {} is clamped", node + 1)));
        }
        let weights = self.creation_weights_unchecked(node, occ);
        if weights.iter().all(Zero::is_zero) {
            return Err(Error::Model(format!("no admissible creation bin at node {} for occupancy {occ}", node + 1)));
        }
        Ok(weights)
    }

    pub(crate) fn creation_weights_unchecked(&self, node: usize, occ: &Occupancy) -> Vec<T> {
        (0..self.bins(node))
            .map(|i| {
                let mut w = match &self.sources[node] {
                    Some(src) => src[i].clone(),
                    None => T::one(),
                };
                for clique in self.two_cliques_of(node) {
                    let counts = occ.node(clique.t);
                    let factor = clique.weights[i]
                        .iter()
                        .zip(counts)
                        .filter(|(_, &n)| n > 0)
                        .fold(T::zero(), |acc, (p, &n)| acc + p.clone() * T::from_count(n as u64));
                    w = w * factor;
                }
                for clique in self.three_cliques_of(node) {
                    let c1 = occ.node(clique.t1);
                    let c2 = occ.node(clique.t2);
                    let mut factor = T::zero();
                    for (k1, &n1) in c1.iter().enumerate().filter(|(_, &n)| n > 0) {
                        for (k2, &n2) in c2.iter().enumerate().filter(|(_, &n)| n > 0) {
                            factor = factor + clique.weights[i][k1][k2].clone() * T::from_count(n1 as u64 * n2 as u64);
                        }
                    }
                    w = w * factor;
                }
                w
            })
            .collect()
    }

    /// Hammersley-Clifford product for a one-sample-per-node configuration:
    /// every source factor and every clique factor, each unordered clique once.
    ///
    /// When a pair appears in both directions the table of the lower-numbered
    /// centre node is used; likewise for triples.
    pub fn hce_joint_weight(&self, occ: &Occupancy) -> Result<T> {
        self.layout.check_occupancy(occ)?;
        let bins = occ
            .single_sample_bins()
            .ok_or_else(|| Error::Mode(format!("occupancy {occ} is not one sample per node")))?;
        let mut weight = T::one();
        for (s, src) in self.sources.iter().enumerate() {
            if let Some(src) = src {
                weight = weight * src[bins[s]].clone();
            }
        }
        let mut seen_pairs = BTreeSet::new();
        let mut pairs: Vec<&TwoClique<T>> = self.two_cliques.iter().collect();
        pairs.sort_by_key(|c| (c.s, c.t));
        for c in pairs {
            if seen_pairs.insert((c.s.min(c.t), c.s.max(c.t))) {
                weight = weight * c.weights[bins[c.s]][bins[c.t]].clone();
            }
        }
        let mut seen_triples = BTreeSet::new();
        let mut triples: Vec<&ThreeClique<T>> = self.three_cliques.iter().collect();
        triples.sort_by_key(|c| (c.s, c.t1, c.t2));
        for c in triples {
            let mut key = [c.s, c.t1, c.t2];
            key.sort_unstable();
            if seen_triples.insert(key) {
                weight = weight * c.weights[bins[c.s]][bins[c.t1]][bins[c.t2]].clone();
            }
        }
        Ok(weight)
    }

    /// Converts every weight to another scalar type.
    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> MrfSpec<U> {
        MrfSpec {
            layout: self.layout.clone(),
            sources: self.sources.iter().map(|s| s.as_ref().map(|v| v.iter().map(&f).collect())).collect(),
            two_cliques: self
                .two_cliques
                .iter()
                .map(|c| TwoClique {
                    s: c.s,
                    t: c.t,
                    weights: c.weights.iter().map(|row| row.iter().map(&f).collect()).collect(),
                })
                .collect(),
            three_cliques: self
                .three_cliques
                .iter()
                .map(|c| ThreeClique {
                    s: c.s,
                    t1: c.t1,
                    t2: c.t2,
                    weights: c
                        .weights
                        .iter()
                        .map(|plane| plane.iter().map(|row| row.iter().map(&f).collect()).collect())
                        .collect(),
                })
                .collect(),
            clamped: self.clamped.clone(),
            neighborhoods: self.neighborhoods.clone(),
        }
    }

    pub fn to_f64(&self) -> MrfSpec<f64> {
        self.convert(|w| w.to_f64_lossy())
    }

    fn check_admissibility(&self) -> Result<()> {
        for s in self.unclamped_nodes() {
            let free: Vec<usize> = self.neighborhood(s).iter().copied().filter(|t| !self.is_clamped(*t)).collect();
            let configs: u128 = free.iter().map(|&t| self.bins(t) as u128).product();
            let mut occ = Occupancy::empty(&self.layout);
            for (t, counts) in &self.clamped {
                occ.0[*t] = counts.clone();
            }
            let probe = |choice: &[usize], occ: &mut Occupancy| -> Result<()> {
                for (&t, &bin) in free.iter().zip(choice) {
                    occ.0[t].iter_mut().for_each(|n| *n = 0);
                    occ.0[t][bin] = 1;
                }
                if self.creation_weights_unchecked(s, occ).iter().all(Zero::is_zero) {
                    let config: Vec<String> =
                        free.iter().zip(choice).map(|(t, b)| format!("node {} bin {}", t + 1, b + 1)).collect();
                    return Err(Error::validation(
                        format!("node {}", s + 1),
                        format!(
                            "no admissible creation bin when {}",
                            if config.is_empty() {
                                "neighbours are at their clamped values".to_string()
                            } else {
                                config.join(", ")
                            }
                        ),
                    ));
                }
                Ok(())
            };
            if configs <= EXHAUSTIVE_ADMISSIBILITY_LIMIT {
                let mut choice = vec![0usize; free.len()];
                loop {
                    probe(&choice, &mut occ)?;
                    let mut pos = 0;
                    loop {
                        if pos == choice.len() {
                            break;
                        }
                        choice[pos] += 1;
                        if choice[pos] < self.bins(free[pos]) {
                            break;
                        }
                        choice[pos] = 0;
                        pos += 1;
                    }
                    if pos == choice.len() {
                        break;
                    }
                }
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + s as u64);
                for _ in 0..SAMPLED_ADMISSIBILITY_CHECKS {
                    let choice: Vec<usize> = free.iter().map(|&t| rng.gen_range(0..self.bins(t))).collect();
                    probe(&choice, &mut occ)?;
                }
            }
        }
        Ok(())
    }
}

/// Incremental construction with full validation in [`MrfBuilder::build`].
///
/// Node and bin indices are zero-based here; validation messages use the
/// one-based document paths.
#[derive(Debug, Clone)]
pub struct MrfBuilder<T> {
    bins: Vec<usize>,
    sources: Vec<(usize, Vec<T>)>,
    two_cliques: Vec<TwoClique<T>>,
    three_cliques: Vec<ThreeClique<T>>,
    clamped: Vec<(usize, Vec<u32>)>,
}

impl<T: Scalar> MrfBuilder<T> {
    pub fn source(mut self, node: usize, weights: Vec<T>) -> Self {
        self.sources.push((node, weights));
        self
    }

    /// Directed influence of `t` on creation at `s`.
    pub fn two_clique(mut self, s: usize, t: usize, weights: Vec<Vec<T>>) -> Self {
        self.two_cliques.push(TwoClique { s, t, weights });
        self
    }

    /// Symmetric pair: `(s,t)` with `weights` and `(t,s)` with its transpose.
    pub fn pair_clique(self, s: usize, t: usize, weights: Vec<Vec<T>>) -> Self {
        let transposed = transpose(&weights);
        self.two_clique(s, t, weights).two_clique(t, s, transposed)
    }

    pub fn three_clique(mut self, s: usize, t1: usize, t2: usize, weights: Vec<Vec<Vec<T>>>) -> Self {
        self.three_cliques.push(ThreeClique { s, t1, t2, weights });
        self
    }

    pub fn clamp(mut self, node: usize, counts: Vec<u32>) -> Self {
        self.clamped.push((node, counts));
        self
    }

    pub fn build(self) -> Result<MrfSpec<T>> {
        let n = self.bins.len();
        if n == 0 {
            return Err(Error::validation("nodes", "at least one node is required"));
        }
        if let Some(s) = self.bins.iter().position(|&m| m == 0) {
            return Err(Error::validation(format!("bins[{s}]"), "bin count must be positive"));
        }
        let layout = Layout::new(self.bins.clone())?;
        let node_ok = |path: String, node: usize| -> Result<()> {
            if node >= n {
                return Err(Error::validation(path, format!("node {} out of range 1..={n}", node + 1)));
            }
            Ok(())
        };

        let mut sources: Vec<Option<Vec<T>>> = vec![None; n];
        for (node, weights) in self.sources {
            let path = format!("source.{}", node + 1);
            node_ok(path.clone(), node)?;
            if sources[node].is_some() {
                return Err(Error::validation(path, "duplicate source"));
            }
            if weights.len() != self.bins[node] {
                return Err(Error::validation(
                    path,
                    format!("bin mismatch: {} weights for {} bins", weights.len(), self.bins[node]),
                ));
            }
            for (i, w) in weights.iter().enumerate() {
                check_weight(&format!("{path}[{i}]"), w)?;
            }
            sources[node] = Some(weights);
        }

        let mut seen = BTreeSet::new();
        for (idx, c) in self.two_cliques.iter().enumerate() {
            let path = format!("two_cliques[{idx}]");
            node_ok(format!("{path}.s"), c.s)?;
            node_ok(format!("{path}.t"), c.t)?;
            if c.s == c.t {
                return Err(Error::validation(path, "self-neighborhood: s and t must differ"));
            }
            if !seen.insert((c.s, c.t)) {
                return Err(Error::validation(path, "duplicate two-clique for this (s, t)"));
            }
            if c.weights.len() != self.bins[c.s] {
                return Err(Error::validation(
                    format!("{path}.p"),
                    format!("bin mismatch: {} rows for {} bins of node s", c.weights.len(), self.bins[c.s]),
                ));
            }
            for (i, row) in c.weights.iter().enumerate() {
                if row.len() != self.bins[c.t] {
                    return Err(Error::validation(
                        format!("{path}.p[{i}]"),
                        format!("bin mismatch: {} columns for {} bins of node t", row.len(), self.bins[c.t]),
                    ));
                }
                for (k, w) in row.iter().enumerate() {
                    check_weight(&format!("{path}.p[{i}][{k}]"), w)?;
                }
            }
        }

        let mut three_cliques = Vec::with_capacity(self.three_cliques.len());
        let mut seen = BTreeSet::new();
        for (idx, c) in self.three_cliques.into_iter().enumerate() {
            let path = format!("three_cliques[{idx}]");
            node_ok(format!("{path}.s"), c.s)?;
            node_ok(format!("{path}.t1"), c.t1)?;
            node_ok(format!("{path}.t2"), c.t2)?;
            if c.s == c.t1 || c.s == c.t2 {
                return Err(Error::validation(path, "self-neighborhood: s must differ from t1 and t2"));
            }
            if c.t1 == c.t2 {
                return Err(Error::validation(path, "t1 and t2 must differ"));
            }
            if c.weights.len() != self.bins[c.s] {
                return Err(Error::validation(format!("{path}.p"), "bin mismatch on node s"));
            }
            for (i, plane) in c.weights.iter().enumerate() {
                if plane.len() != self.bins[c.t1] {
                    return Err(Error::validation(format!("{path}.p[{i}]"), "bin mismatch on node t1"));
                }
                for (k1, row) in plane.iter().enumerate() {
                    if row.len() != self.bins[c.t2] {
                        return Err(Error::validation(format!("{path}.p[{i}][{k1}]"), "bin mismatch on node t2"));
                    }
                    for (k2, w) in row.iter().enumerate() {
                        check_weight(&format!("{path}.p[{i}][{k1}][{k2}]"), w)?;
                    }
                }
            }
            // canonical orientation t1 < t2
            let c = if c.t1 < c.t2 {
                c
            } else {
                let weights = c.weights.iter().map(|p| transpose(p)).collect();
                ThreeClique { s: c.s, t1: c.t2, t2: c.t1, weights }
            };
            if !seen.insert((c.s, c.t1, c.t2)) {
                return Err(Error::validation(path, "duplicate three-clique for this (s, t1, t2)"));
            }
            three_cliques.push(c);
        }

        let mut clamped = BTreeMap::new();
        for (node, counts) in self.clamped {
            let path = format!("clamped.{}", node + 1);
            node_ok(path.clone(), node)?;
            if counts.len() != self.bins[node] {
                return Err(Error::validation(
                    path,
                    format!("bin mismatch: {} counts for {} bins", counts.len(), self.bins[node]),
                ));
            }
            if clamped.insert(node, counts).is_some() {
                return Err(Error::validation(path, "node clamped twice"));
            }
        }

        let mut neighborhoods = vec![BTreeSet::new(); n];
        for c in &self.two_cliques {
            neighborhoods[c.s].insert(c.t);
        }
        for c in &three_cliques {
            neighborhoods[c.s].insert(c.t1);
            neighborhoods[c.s].insert(c.t2);
        }

        let spec = MrfSpec {
            layout,
            sources,
            two_cliques: self.two_cliques,
            three_cliques,
            clamped,
            neighborhoods: neighborhoods.into_iter().map(|s| s.into_iter().collect()).collect(),
        };
        spec.check_admissibility()?;
        Ok(spec)
    }
}

fn check_weight<T: Scalar>(path: &str, w: &T) -> Result<()> {
    if !w.is_finite_value() {
        return Err(Error::validation(path, "weight must be finite"));
    }
    if w.is_negative() {
        return Err(Error::validation(path, format!("negative weight {w}")));
    }
    Ok(())
}

fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|k| m.iter().map(|row| row[k].clone()).collect()).collect()
}
