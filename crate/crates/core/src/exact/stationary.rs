use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;

use super::kernel::TransitionKernel;
use super::space::StateSpace;
use crate::error::{Error, Result};
use crate::fock::Occupancy;
use crate::scalar::Scalar;

/// Probability vector over the indices of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T = f64>(Vec<T>);

impl<T: Scalar> Distribution<T> {
    /// Normalises non-negative weights; fails if they are all zero.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| w.is_negative() || !w.is_finite_value()) {
            return Err(Error::Model("distribution weights must be finite and non-negative".into()));
        }
        let total = weights.iter().fold(T::zero(), |a, w| a + w.clone());
        if total.is_zero() {
            return Err(Error::Model("distribution weights sum to zero".into()));
        }
        Ok(Distribution(weights.into_iter().map(|w| w / total.clone()).collect()))
    }

    /// Point mass on `idx` in a space of `len` states.
    pub fn point_mass(len: usize, idx: usize) -> Self {
        let mut probs = vec![T::zero(); len];
        probs[idx] = T::one();
        Distribution(probs)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prob(&self, idx: usize) -> &T {
        &self.0[idx]
    }

    pub fn to_f64(&self) -> Distribution<f64> {
        Distribution(self.0.iter().map(Scalar::to_f64_lossy).collect())
    }

    /// Total-variation distance `½ Σ |p - q|`.
    pub fn tv_distance(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "distributions over different spaces");
        let sum = self.0.iter().zip(&other.0).fold(T::zero(), |a, (p, q)| a + (p.clone() - q.clone()).abs());
        sum / T::from_count(2)
    }

    pub fn linf_distance(&self, other: &Self) -> T {
        assert_eq!(self.len(), other.len(), "distributions over different spaces");
        self.0.iter().zip(&other.0).fold(T::zero(), |a, (p, q)| {
            let d = (p.clone() - q.clone()).abs();
            if d > a {
                d
            } else {
                a
            }
        })
    }
}

/// Iteration controls for [`stationary_distribution_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// Stop once `‖πK − π‖₁` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions { tolerance: 1e-12, max_iterations: 1_000_000 }
    }
}

/// Closed communicating classes of the kernel's transition graph, each
/// sorted, in order of their smallest state.
pub fn closed_classes<T: Scalar>(kernel: &TransitionKernel<T>) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<(), ()>::with_capacity(kernel.len(), 0);
    let nodes: Vec<_> = (0..kernel.len()).map(|_| graph.add_node(())).collect();
    for (i, row) in kernel.rows().iter().enumerate() {
        for (j, _) in row {
            graph.add_edge(nodes[i], nodes[*j], ());
        }
    }
    let mut component = vec![0usize; kernel.len()];
    let sccs = kosaraju_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            component[n.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| members.iter().all(|n| kernel.row(n.index()).iter().all(|(j, _)| component[*j] == *c)))
        .map(|(_, members)| {
            let mut v: Vec<usize> = members.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    closed.sort();
    closed
}

/// [`stationary_distribution_with`] under the default tolerance and cap.
pub fn stationary_distribution<T: Scalar>(kernel: &TransitionKernel<T>) -> Result<Distribution<f64>> {
    stationary_distribution_with(kernel, StationaryOptions::default())
}

/// Fixed point of `π ↦ πK`.
///
/// The kernel must have exactly one closed class; transient states are
/// allowed and end with zero mass. Iterates the lazy kernel `½(I + K)`,
/// which shares its fixed point with `K` and converges for periodic chains
/// too, from the uniform vector.
pub fn stationary_distribution_with<T: Scalar>(
    kernel: &TransitionKernel<T>,
    options: StationaryOptions,
) -> Result<Distribution<f64>> {
    if kernel.is_empty() {
        return Err(Error::Model("empty kernel".into()));
    }
    let classes = closed_classes(kernel);
    if classes.len() > 1 {
        let listing: Vec<String> = classes.iter().take(8).map(|c| format!("{c:?}")).collect();
        let more = if classes.len() > 8 { format!(" and {} more", classes.len() - 8) } else { String::new() };
        return Err(Error::Reducible(format!("{} closed classes: {}{more}", classes.len(), listing.join(", "))));
    }
    let k = kernel.to_f64();
    let n = k.len();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    let mut converged_at = None;
    for iteration in 0..options.max_iterations {
        let next = k.left_multiply(&pi);
        let r: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        match converged_at {
            // the residual bounds the error only up to the spectral gap, so
            // run as many iterations again before stopping
            Some(start) if r == 0.0 || iteration >= 2 * start + 10 => {
                return Ok(Distribution(normalised(pi)));
            }
            None if r < options.tolerance => converged_at = Some(iteration),
            _ => {}
        }
        residual = r;
        pi = normalised(pi.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    match converged_at {
        Some(_) => Ok(Distribution(normalised(pi))),
        None => Err(Error::NonConvergence { iterations: options.max_iterations, residual }),
    }
}

fn normalised(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// `⟨S⟩ = Σ_x π(x) S(x)` for a vector-valued statistic.
pub fn expected_statistic<T: Scalar>(
    dist: &Distribution<T>,
    space: &StateSpace,
    statistic: impl Fn(&Occupancy) -> Vec<T>,
) -> Vec<T> {
    assert_eq!(dist.len(), space.len(), "distribution and space differ in size");
    let mut acc: Vec<T> = Vec::new();
    for (p, occ) in dist.probs().iter().zip(space.states()) {
        let s = statistic(occ);
        if acc.is_empty() {
            acc = vec![T::zero(); s.len()];
        }
        for (a, v) in acc.iter_mut().zip(s) {
            *a = a.clone() + p.clone() * v;
        }
    }
    acc
}
