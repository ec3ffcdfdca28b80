use std::collections::HashMap;

use crate::error::{check_capacity, Error, Result};
use crate::fock::{Layout, Occupancy};
use crate::mrf::MrfSpec;
use crate::scalar::Scalar;

/// Canonical ensemble: every multi-node occupancy with fixed per-node totals.
///
/// States are ordered descending-lexicographically on the concatenated
/// counts, so for one node with two bins and two samples the order is
/// `(2,0), (1,1), (0,2)`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    layout: Layout,
    totals: Vec<u32>,
    states: Vec<Occupancy>,
    index: HashMap<Occupancy, usize>,
}

/// `C(n + m - 1, m - 1)`: histograms of `n` samples over `m` bins.
pub fn composition_count(n: u32, m: usize) -> u128 {
    let (n, m) = (n as u128, m as u128);
    let k = (m - 1).min(n);
    let top = n + m - 1;
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(top - i) / (i + 1))
}

/// All histograms of `n` samples over `m` bins, descending-lexicographic.
pub fn compositions(n: u32, m: usize) -> Vec<Vec<u32>> {
    fn rec(n: u32, m: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if m == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=n).rev() {
            prefix.push(first);
            rec(n - first, m - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut Vec::with_capacity(m), &mut out);
    out
}

impl StateSpace {
    /// Enumerates a space over `layout`; nodes listed in `fixed` keep the
    /// given occupancy instead of ranging over all histograms.
    pub fn new(layout: Layout, totals: Vec<u32>, fixed: &[(usize, Vec<u32>)]) -> Result<Self> {
        if totals.len() != layout.num_nodes() {
            return Err(Error::Config(format!("{} totals given for {} nodes", totals.len(), layout.num_nodes())));
        }
        let mut per_node: Vec<Option<Vec<u32>>> = vec![None; layout.num_nodes()];
        for (node, counts) in fixed {
            layout.check_node(*node)?;
            let sum: u32 = counts.iter().sum();
            if sum != totals[*node] {
                return Err(Error::Config(format!(
                    "node {} is clamped with {} samples but total {} was requested",
                    node + 1,
                    sum,
                    totals[*node]
                )));
            }
            per_node[*node] = Some(counts.clone());
        }
        let size = (0..layout.num_nodes())
            .map(|s| match per_node[s] {
                Some(_) => 1,
                None => composition_count(totals[s], layout.bins(s)),
            })
            .fold(1u128, |acc, c| acc.saturating_mul(c));
        check_capacity("state space", size)?;

        let choices: Vec<Vec<Vec<u32>>> = (0..layout.num_nodes())
            .map(|s| match &per_node[s] {
                Some(c) => vec![c.clone()],
                None => compositions(totals[s], layout.bins(s)),
            })
            .collect();
        let mut states = Vec::with_capacity(size as usize);
        let mut cursor = vec![0usize; choices.len()];
        // odometer, last node fastest
        'outer: loop {
            states.push(Occupancy::new(cursor.iter().zip(&choices).map(|(&c, opts)| opts[c].clone()).collect()));
            for pos in (0..choices.len()).rev() {
                cursor[pos] += 1;
                if cursor[pos] < choices[pos].len() {
                    continue 'outer;
                }
                cursor[pos] = 0;
            }
            break;
        }
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(StateSpace { layout, totals, states, index })
    }

    /// The canonical ensemble of a spec; clamped nodes stay at their evidence.
    pub fn for_spec<T: Scalar>(spec: &MrfSpec<T>, totals: &[u32]) -> Result<Self> {
        let fixed: Vec<(usize, Vec<u32>)> = spec.clamped_nodes().map(|(s, c)| (s, c.to_vec())).collect();
        Self::new(spec.layout().clone(), totals.to_vec(), &fixed)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn totals(&self) -> &[u32] {
        &self.totals
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupancy] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &Occupancy {
        &self.states[idx]
    }

    pub fn index_of(&self, occ: &Occupancy) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

/// Enumerates the canonical ensemble of `spec` with the given per-node totals.
pub fn enumerate_states<T: Scalar>(spec: &MrfSpec<T>, totals: &[u32]) -> Result<StateSpace> {
    StateSpace::for_spec(spec, totals)
}
