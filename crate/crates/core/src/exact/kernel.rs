use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::space::StateSpace;
use crate::error::{Error, Result};
use crate::fock::MixedState;
use crate::scalar::Scalar;
use crate::update::UpdateOperator;

/// How per-node updates compose into one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanScheme {
    /// Pick an unclamped node uniformly at random for each update.
    #[default]
    RandomScan,
    /// Visit unclamped nodes in index order, one per update.
    SequentialScan,
}

impl fmt::Display for ScanScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanScheme::RandomScan => "random-scan",
            ScanScheme::SequentialScan => "sequential-scan",
        })
    }
}

impl FromStr for ScanScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-scan" | "random" => Ok(ScanScheme::RandomScan),
            "sequential-scan" | "sequential" => Ok(ScanScheme::SequentialScan),
            other => Err(Error::Config(format!("unknown scan scheme `{other}`"))),
        }
    }
}

/// Row-stochastic matrix over the indices of a [`StateSpace`], stored as
/// sorted sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T> {
    rows: Vec<Vec<(usize, T)>>,
    scheme: Option<ScanScheme>,
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>, scheme: Option<ScanScheme>) -> Self {
        let rows = rows
            .into_iter()
            .map(|row| {
                let mut merged: BTreeMap<usize, T> = BTreeMap::new();
                for (j, p) in row {
                    let slot = merged.entry(j).or_insert_with(T::zero);
                    *slot = slot.clone() + p;
                }
                merged.into_iter().filter(|(_, p)| !p.is_zero()).collect()
            })
            .collect();
        TransitionKernel { rows, scheme }
    }

    pub fn identity(size: usize) -> Self {
        Self::from_rows((0..size).map(|i| vec![(i, T::one())]).collect(), None)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `None` for a single-node (per-site) kernel.
    pub fn scheme(&self) -> Option<ScanScheme> {
        self.scheme
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, T)>] {
        &self.rows
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |(k, _)| *k)
            .map(|pos| self.rows[i][pos].1.clone())
            .unwrap_or_else(|_| T::zero())
    }

    pub fn dense(&self) -> Vec<Vec<T>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![T::zero(); n];
                for (j, p) in row {
                    dense[*j] = p.clone();
                }
                dense
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.rows.iter().map(|row| row.iter().fold(T::zero(), |a, (_, p)| a + p.clone())).collect()
    }

    /// `self · other` (apply `self` first, then `other`).
    pub fn then(&self, other: &Self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out: BTreeMap<usize, T> = BTreeMap::new();
                for (k, p) in row {
                    for (j, r) in &other.rows[*k] {
                        let slot = out.entry(*j).or_insert_with(T::zero);
                        *slot = slot.clone() + p.clone() * r.clone();
                    }
                }
                out.into_iter().collect()
            })
            .collect();
        Self::from_rows(rows, self.scheme)
    }

    /// Uniform mixture of kernels over the same space.
    pub fn average(kernels: &[Self]) -> Self {
        assert!(!kernels.is_empty(), "cannot average zero kernels");
        let weight = T::one() / T::from_count(kernels.len() as u64);
        let n = kernels[0].len();
        let rows = (0..n)
            .map(|i| {
                kernels.iter().flat_map(|k| k.rows[i].iter().map(|(j, p)| (*j, p.clone() * weight.clone()))).collect()
            })
            .collect();
        Self::from_rows(rows, None)
    }

    /// `π K`.
    pub fn left_multiply(&self, pi: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if pi[i].is_zero() {
                continue;
            }
            for (j, p) in row {
                out[*j] = out[*j].clone() + pi[i].clone() * p.clone();
            }
        }
        out
    }

    pub fn to_f64(&self) -> TransitionKernel<f64> {
        TransitionKernel {
            rows: self.rows.iter().map(|row| row.iter().map(|(j, p)| (*j, p.to_f64_lossy())).collect()).collect(),
            scheme: self.scheme,
        }
    }

    fn with_scheme(mut self, scheme: ScanScheme) -> Self {
        self.scheme = Some(scheme);
        self
    }
}

/// Kernel of a single update at `node`: `H_s` applied to each basis state,
/// converted from Fock weights to histogram probabilities and row-normalised.
pub fn per_site_kernel<T: Scalar>(
    h: &UpdateOperator<T>,
    space: &StateSpace,
    node: usize,
) -> Result<TransitionKernel<T>> {
    let piece = h
        .piece(node)
        .ok_or_else(|| Error::Model(format!("node {} has no update piece (clamped or out of range)", node + 1)))?;
    let mut rows = Vec::with_capacity(space.len());
    for source in space.states() {
        let ket = MixedState::pure(space.layout().clone(), source.clone(), T::one())?;
        let out = piece.apply(&ket)?;
        let source_factor = source.factorial_product::<T>();
        let mut row = Vec::with_capacity(out.len());
        let mut total = T::zero();
        for (target, _) in out.iter() {
            // ⟨target|H_s|source⟩ / ∏ target! · ∏ source!
            let w = out.inner_product(target) / target.factorial_product::<T>() * source_factor.clone();
            let j = space
                .index_of(target)
                .ok_or_else(|| Error::Model(format!("update at node {} leaves the state space: {target}", node + 1)))?;
            total = total + w.clone();
            row.push((j, w));
        }
        if total.is_zero() || !total.is_positive() {
            return Err(Error::Model(format!("all-zero transition weight from state {source} at node {}", node + 1)));
        }
        rows.push(row.into_iter().map(|(j, w)| (j, w / total.clone())).collect());
    }
    Ok(TransitionKernel::from_rows(rows, None))
}

/// Composes per-site kernels of every unclamped node under `scheme`:
/// a uniform average for random scan, a product in node order for
/// sequential scan.
pub fn build_kernel<T: Scalar>(
    h: &UpdateOperator<T>,
    space: &StateSpace,
    scheme: ScanScheme,
) -> Result<TransitionKernel<T>> {
    if h.layout() != space.layout() {
        return Err(Error::Config("update operator and state space have different layouts".into()));
    }
    if h.pieces().is_empty() {
        return Err(Error::Model("every node is clamped; nothing to update".into()));
    }
    let kernels = h.pieces().iter().map(|p| per_site_kernel(h, space, p.node)).collect::<Result<Vec<_>>>()?;
    let kernel = match scheme {
        ScanScheme::RandomScan => TransitionKernel::average(&kernels),
        ScanScheme::SequentialScan => {
            let mut iter = kernels.into_iter();
            let first = iter.next().expect("at least one piece");
            iter.fold(first, |acc, k| acc.then(&k))
        }
    };
    Ok(kernel.with_scheme(scheme))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{Layout, Occupancy};
    use crate::mrf::MrfSpec;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn memoryless_single_sample() {
        let h = UpdateOperator::single_node(vec![q(1, 2), q(1, 2)]).unwrap();
        let space = StateSpace::new(Layout::single(2).unwrap(), vec![1], &[]).unwrap();
        let k = build_kernel(&h, &space, ScanScheme::RandomScan).unwrap();
        assert_eq!(k.dense(), vec![vec![q(1, 2), q(1, 2)], vec![q(1, 2), q(1, 2)]]);
    }

    #[test]
    fn two_samples_hop_one_at_a_time() {
        let (p1, p2) = (q(1, 3), q(2, 3));
        let h = UpdateOperator::single_node(vec![p1.clone(), p2.clone()]).unwrap();
        let space = StateSpace::new(Layout::single(2).unwrap(), vec![2], &[]).unwrap();
        let k = build_kernel(&h, &space, ScanScheme::RandomScan).unwrap();
        // states (2,0), (1,1), (0,2)
        assert_eq!(k.dense()[0], vec![p1.clone(), p2.clone(), q(0, 1)]);
        // from (1,1): annihilate either sample with prob 1/2, then create
        assert_eq!(k.dense()[1], vec![q(1, 2) * p1.clone(), q(1, 2), q(1, 2) * p2.clone()]);
        assert!(k.row_sums().iter().all(|s| *s == q(1, 1)));
        // unnormalised weights give the same kernel
        let h2 = UpdateOperator::single_node(vec![q(1, 1), q(2, 1)]).unwrap();
        assert_eq!(build_kernel(&h2, &space, ScanScheme::RandomScan).unwrap().dense(), k.dense());
    }

    #[test]
    fn clamped_occupancy_never_moves() {
        let spec = MrfSpec::builder(vec![2, 2])
            .pair_clique(0, 1, vec![vec![q(1, 1), q(1, 2)], vec![q(1, 3), q(1, 1)]])
            .clamp(1, vec![1, 1])
            .build()
            .unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        let space = StateSpace::for_spec(&spec, &[2, 2]).unwrap();
        let k = build_kernel(&h, &space, ScanScheme::SequentialScan).unwrap();
        for (i, row) in k.rows().iter().enumerate() {
            for (j, _) in row {
                assert_eq!(space.state(*j).node(1), space.state(i).node(1));
            }
        }
    }

    #[test]
    fn empty_node_row_is_an_error() {
        let spec = MrfSpec::builder(vec![2, 2])
            .pair_clique(0, 1, vec![vec![q(1, 1), q(1, 2)], vec![q(1, 3), q(1, 1)]])
            .build()
            .unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        let space = StateSpace::for_spec(&spec, &[1, 0]).unwrap();
        let err = build_kernel(&h, &space, ScanScheme::RandomScan).unwrap_err();
        assert!(matches!(err, Error::Model(_)), "{err}");
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn sequential_scan_is_product() {
        let spec = MrfSpec::builder(vec![2, 2])
            .pair_clique(0, 1, vec![vec![q(1, 1), q(1, 2)], vec![q(1, 3), q(1, 1)]])
            .build()
            .unwrap();
        let h = UpdateOperator::build(&spec).unwrap();
        let space = StateSpace::for_spec(&spec, &[1, 1]).unwrap();
        let k0 = per_site_kernel(&h, &space, 0).unwrap();
        let k1 = per_site_kernel(&h, &space, 1).unwrap();
        let seq = build_kernel(&h, &space, ScanScheme::SequentialScan).unwrap();
        let dense0 = k0.dense();
        let dense1 = k1.dense();
        for i in 0..space.len() {
            for j in 0..space.len() {
                let expected = (0..space.len()).fold(q(0, 1), |a, k| a + dense0[i][k].clone() * dense1[k][j].clone());
                assert_eq!(seq.entry(i, j), expected);
            }
        }
        assert_eq!(seq.scheme(), Some(ScanScheme::SequentialScan));
        let _ = Occupancy::empty(space.layout());
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("random-scan".parse::<ScanScheme>().unwrap(), ScanScheme::RandomScan);
        assert_eq!("sequential".parse::<ScanScheme>().unwrap(), ScanScheme::SequentialScan);
        assert!("zigzag".parse::<ScanScheme>().is_err());
        assert_eq!(ScanScheme::SequentialScan.to_string(), "sequential-scan");
    }
}
