use std::fmt;

use crate::error::{Error, Result};

/// A `(node, bin)` pair addressing one histogram bin.
///
/// Stored zero-based; rendered one-based as `[node,bin]` in text and file
/// formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteIndex {
    pub node: usize,
    pub bin: usize,
}

impl SiteIndex {
    pub const fn new(node: usize, bin: usize) -> Self {
        SiteIndex { node, bin }
    }

    /// Builds from one-based indices; `None` if either is zero.
    pub fn one_based(node: usize, bin: usize) -> Option<Self> {
        (node >= 1 && bin >= 1).then(|| SiteIndex::new(node - 1, bin - 1))
    }
}

impl fmt::Display for SiteIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.node + 1, self.bin + 1)
    }
}

/// Bin counts per node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Layout(Vec<usize>);

impl Layout {
    pub fn new(bins: Vec<usize>) -> Result<Self> {
        if let Some(node) = bins.iter().position(|&m| m == 0) {
            return Err(Error::Index(format!("node {} declares zero bins", node + 1)));
        }
        Ok(Layout(bins))
    }

    pub fn single(bins: usize) -> Result<Self> {
        Layout::new(vec![bins])
    }

    pub fn num_nodes(&self) -> usize {
        self.0.len()
    }

    pub fn bins(&self, node: usize) -> usize {
        self.0[node]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// All sites in `(node, bin)` order.
    pub fn sites(&self) -> impl Iterator<Item = SiteIndex> + '_ {
        self.0.iter().enumerate().flat_map(|(node, &m)| (0..m).map(move |bin| SiteIndex::new(node, bin)))
    }

    pub fn check_site(&self, site: SiteIndex) -> Result<()> {
        match self.0.get(site.node) {
            None => Err(Error::Index(format!(
                "site {site} refers to node {} but the layout has {} nodes",
                site.node + 1,
                self.0.len()
            ))),
            Some(&m) if site.bin >= m => {
                Err(Error::Index(format!("site {site} exceeds the {m} bins of node {}", site.node + 1)))
            }
            Some(_) => Ok(()),
        }
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.0.len() {
            return Err(Error::Index(format!("node {} out of range (layout has {} nodes)", node + 1, self.0.len())));
        }
        Ok(())
    }

    pub fn check_occupancy(&self, occ: &Occupancy) -> Result<()> {
        if occ.0.len() != self.0.len() {
            return Err(Error::Index(format!("occupancy has {} nodes, layout has {}", occ.0.len(), self.0.len())));
        }
        for (node, (counts, &m)) in occ.0.iter().zip(&self.0).enumerate() {
            if counts.len() != m {
                return Err(Error::Index(format!(
                    "occupancy of node {} has {} bins, layout declares {m}",
                    node + 1,
                    counts.len()
                )));
            }
        }
        Ok(())
    }
}

/// Per-node histogram of sample counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Occupancy(pub Vec<Vec<u32>>);

impl Occupancy {
    pub fn new(counts: Vec<Vec<u32>>) -> Self {
        Occupancy(counts)
    }

    /// Single-node occupancy.
    pub fn single(counts: Vec<u32>) -> Self {
        Occupancy(vec![counts])
    }

    pub fn empty(layout: &Layout) -> Self {
        Occupancy(layout.as_slice().iter().map(|&m| vec![0; m]).collect())
    }

    /// One sample per node, in the given zero-based bins.
    pub fn single_sample(layout: &Layout, bins: &[usize]) -> Self {
        let mut occ = Occupancy::empty(layout);
        for (node, &bin) in bins.iter().enumerate() {
            occ.0[node][bin] = 1;
        }
        occ
    }

    pub fn count(&self, site: SiteIndex) -> u32 {
        self.0[site.node][site.bin]
    }

    pub fn count_mut(&mut self, site: SiteIndex) -> &mut u32 {
        &mut self.0[site.node][site.bin]
    }

    pub fn node(&self, node: usize) -> &[u32] {
        &self.0[node]
    }

    pub fn nodes(&self) -> &[Vec<u32>] {
        &self.0
    }

    pub fn node_total(&self, node: usize) -> u32 {
        self.0[node].iter().sum()
    }

    pub fn totals(&self) -> Vec<u32> {
        (0..self.0.len()).map(|s| self.node_total(s)).collect()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().flatten().sum()
    }

    /// `∏ n_k!` over all nodes and bins.
    pub fn factorial_product<T: crate::Scalar>(&self) -> T {
        self.0.iter().flatten().fold(T::one(), |acc, &n| acc * crate::scalar::factorial::<T>(n))
    }

    /// The occupied bin of each node, if every node holds exactly one sample.
    pub fn single_sample_bins(&self) -> Option<Vec<usize>> {
        self.0
            .iter()
            .map(|counts| {
                if counts.iter().sum::<u32>() != 1 {
                    return None;
                }
                counts.iter().position(|&n| n == 1)
            })
            .collect()
    }

    pub fn flatten(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().flatten().copied()
    }
}

impl fmt::Display for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, counts) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "(")?;
            for (k, n) in counts.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{n}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}
