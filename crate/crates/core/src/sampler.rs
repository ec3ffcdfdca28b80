//! The stochastic annihilate-then-create chain.
//!
//! Each update picks a node, removes one of its samples uniformly at random
//! and creates a replacement in a bin drawn from the current creation
//! weights. Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`;
//! chain `k` of a multi-chain run uses stream `k` of the same seed, so chain 0
//! reproduces a single run exactly.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exact::{Distribution, ScanScheme, StateSpace};
use crate::fock::Occupancy;
use crate::mrf::MrfSpec;
use crate::scalar::Scalar;

/// Number of batches used by the batch-means error estimates.
pub const BATCHES: usize = 20;

/// Starting state of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Explicit(Occupancy),
    /// Scatter `totals[s]` samples uniformly over the bins of each unclamped
    /// node; clamped nodes start at their evidence.
    Random {
        totals: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub seed: u64,
    pub scheme: ScanScheme,
    /// Total number of updates, burn-in included.
    pub steps: u64,
    /// `None` selects 10 sweeps per sample in the network.
    pub burn_in: Option<u64>,
    pub thin: u64,
    pub initial: InitialState,
}

impl ChainConfig {
    pub fn new(seed: u64, steps: u64, initial: InitialState) -> Self {
        ChainConfig { seed, scheme: ScanScheme::RandomScan, steps, burn_in: None, thin: 1, initial }
    }

    pub fn with_scheme(mut self, scheme: ScanScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = Some(burn_in);
        self
    }

    pub fn with_thin(mut self, thin: u64) -> Self {
        self.thin = thin;
        self
    }
}

/// `10 × total samples × unclamped nodes`: ten sweeps per sample.
pub fn default_burn_in<T: Scalar>(spec: &MrfSpec<T>, initial: &Occupancy) -> u64 {
    10 * initial.total() as u64 * spec.unclamped_nodes().len() as u64
}

/// One recorded state, tagged with the number of updates applied so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub state: Occupancy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub config: ChainConfig,
    pub chain: u64,
    pub burn_in: u64,
    pub initial: Occupancy,
    pub records: Vec<TraceRecord>,
    /// Per-(node, bin) sums of the recorded counts.
    pub bin_sums: Vec<Vec<u64>>,
    pub updates: u64,
    /// Every update is an exact conditional draw, so this equals `updates`.
    pub accepted: u64,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &Occupancy> {
        self.records.iter().map(|r| &r.state)
    }

    /// Mean count per (node, bin) over the records.
    pub fn mean_counts(&self) -> Vec<Vec<f64>> {
        let n = self.records.len().max(1) as f64;
        self.bin_sums.iter().map(|row| row.iter().map(|&s| s as f64 / n).collect()).collect()
    }
}

/// A running chain with its own generator.
#[derive(Debug, Clone)]
pub struct Chain {
    spec: MrfSpec<f64>,
    nodes: Vec<usize>,
    scheme: ScanScheme,
    cursor: usize,
    state: Occupancy,
    rng: ChaCha8Rng,
}

impl Chain {
    pub fn new<T: Scalar>(
        spec: &MrfSpec<T>,
        scheme: ScanScheme,
        seed: u64,
        stream: u64,
        initial: InitialState,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let state = match initial {
            InitialState::Explicit(occ) => {
                spec.layout().check_occupancy(&occ)?;
                for (s, counts) in spec.clamped_nodes() {
                    if occ.node(s) != counts {
                        return Err(Error::Config(format!(
                            "initial state moves clamped node {} away from its evidence",
                            s + 1
                        )));
                    }
                }
                occ
            }
            InitialState::Random { totals } => random_state(spec, &totals, &mut rng)?,
        };
        let nodes = spec.unclamped_nodes();
        if nodes.is_empty() {
            return Err(Error::Model("every node is clamped; nothing to update".into()));
        }
        Ok(Chain { spec: spec.to_f64(), nodes, scheme, cursor: 0, state, rng })
    }

    pub fn state(&self) -> &Occupancy {
        &self.state
    }

    /// Chooses a node per the scan scheme and updates it; returns the node.
    pub fn update(&mut self) -> Result<usize> {
        let node = match self.scheme {
            ScanScheme::RandomScan => self.nodes[self.rng.gen_range(0..self.nodes.len())],
            ScanScheme::SequentialScan => {
                let node = self.nodes[self.cursor];
                self.cursor = (self.cursor + 1) % self.nodes.len();
                node
            }
        };
        step(&mut self.state, &self.spec, node, &mut self.rng)?;
        Ok(node)
    }
}

fn random_state<T: Scalar>(spec: &MrfSpec<T>, totals: &[u32], rng: &mut ChaCha8Rng) -> Result<Occupancy> {
    if totals.len() != spec.num_nodes() {
        return Err(Error::Config(format!("{} totals given for {} nodes", totals.len(), spec.num_nodes())));
    }
    let mut occ = Occupancy::empty(spec.layout());
    for (s, &n) in totals.iter().enumerate() {
        match spec.clamped(s) {
            Some(counts) => {
                if counts.iter().sum::<u32>() != n {
                    return Err(Error::Config(format!(
                        "node {} is clamped with {} samples but total {n} was requested",
                        s + 1,
                        counts.iter().sum::<u32>()
                    )));
                }
                occ.0[s] = counts.to_vec();
            }
            None => {
                for _ in 0..n {
                    occ.0[s][rng.gen_range(0..spec.bins(s))] += 1;
                }
            }
        }
    }
    Ok(occ)
}

/// One annihilate-then-create update at `node`.
pub fn step<R: Rng + ?Sized>(state: &mut Occupancy, spec: &MrfSpec<f64>, node: usize, rng: &mut R) -> Result<()> {
    let total = state.node_total(node);
    if total == 0 {
        return Err(Error::Model(format!("node {} holds no sample to annihilate in {state}", node + 1)));
    }
    // a uniformly chosen sample sits in bin j with probability n_j / n
    let mut pick = rng.gen_range(0..total);
    let counts = &mut state.0[node];
    let bin = counts
        .iter()
        .position(|&c| {
            if pick < c {
                true
            } else {
                pick -= c;
                false
            }
        })
        .expect("pick below total");
    counts[bin] -= 1;

    let weights = spec.creation_weights(node, state).inspect_err(|_| state.0[node][bin] += 1)?;
    let sum: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * sum;
    let mut chosen = weights.iter().rposition(|&w| w > 0.0).expect("positive weight");
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 && u < w {
            chosen = i;
            break;
        }
        u -= w;
    }
    state.0[node][chosen] += 1;
    Ok(())
}

/// Runs one chain (stream 0).
pub fn run<T: Scalar>(spec: &MrfSpec<T>, config: &ChainConfig) -> Result<ChainTrace> {
    run_stream(spec, config, 0)
}

/// Runs the chain on stream `chain` of the configured seed.
pub fn run_stream<T: Scalar>(spec: &MrfSpec<T>, config: &ChainConfig, chain: u64) -> Result<ChainTrace> {
    if config.thin == 0 {
        return Err(Error::Config("thin must be at least 1".into()));
    }
    let mut sampler = Chain::new(spec, config.scheme, config.seed, chain, config.initial.clone())?;
    let initial = sampler.state().clone();
    let burn_in = config.burn_in.unwrap_or_else(|| default_burn_in(spec, &initial));
    if config.steps <= burn_in {
        return Err(Error::Config(format!("steps ({}) must exceed burn-in ({burn_in})", config.steps)));
    }
    let mut bin_sums: Vec<Vec<u64>> = initial.nodes().iter().map(|c| vec![0; c.len()]).collect();
    let mut records = Vec::with_capacity(((config.steps - burn_in) / config.thin) as usize);
    for t in 1..=config.steps {
        sampler.update()?;
        if t > burn_in && (t - burn_in).is_multiple_of(config.thin) {
            let state = sampler.state();
            for (sums, counts) in bin_sums.iter_mut().zip(state.nodes()) {
                for (s, &c) in sums.iter_mut().zip(counts) {
                    *s += c as u64;
                }
            }
            records.push(TraceRecord { step: t, state: state.clone() });
        }
    }
    Ok(ChainTrace {
        config: config.clone(),
        chain,
        burn_in,
        initial,
        records,
        bin_sums,
        updates: config.steps,
        accepted: config.steps,
    })
}

/// Runs `chains` independent chains on separate threads, one stream each.
pub fn run_chains<T: Scalar>(spec: &MrfSpec<T>, config: &ChainConfig, chains: u64) -> Result<Vec<ChainTrace>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains).map(|k| scope.spawn(move || run_stream(spec, config, k))).collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}

/// Concatenates the records of several traces.
pub fn merge_states(traces: &[ChainTrace]) -> Vec<Occupancy> {
    traces.iter().flat_map(|t| t.states().cloned()).collect()
}

/// Visit frequencies of `states` over `space`.
pub fn empirical_distribution<'a>(
    states: impl IntoIterator<Item = &'a Occupancy>,
    space: &StateSpace,
) -> Result<Distribution<f64>> {
    let mut counts = vec![0.0f64; space.len()];
    for occ in states {
        let idx = space
            .index_of(occ)
            .ok_or_else(|| Error::Model(format!("recorded state {occ} is outside the state space")))?;
        counts[idx] += 1.0;
    }
    Distribution::from_weights(counts)
}

/// Monte Carlo mean with a naive standard error and a batch-means one that
/// accounts for autocorrelation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub naive_se: f64,
    pub batch_se: f64,
}

/// Estimates `⟨S⟩` from a sequence of states, splitting it into
/// [`BATCHES`] contiguous batches.
pub fn estimate_statistic<'a>(
    states: impl IntoIterator<Item = &'a Occupancy>,
    statistic: impl Fn(&Occupancy) -> Vec<f64>,
) -> Vec<Estimate> {
    let values: Vec<Vec<f64>> = states.into_iter().map(statistic).collect();
    let Some(width) = values.first().map(Vec::len) else {
        return Vec::new();
    };
    (0..width).map(|c| batch_means(&values.iter().map(|v| v[c]).collect::<Vec<_>>(), BATCHES)).collect()
}

/// Per-state visit frequencies with their errors.
pub fn state_estimates<'a>(
    states: impl IntoIterator<Item = &'a Occupancy>,
    space: &StateSpace,
) -> Result<Vec<Estimate>> {
    let idx = states
        .into_iter()
        .map(|occ| {
            space.index_of(occ).ok_or_else(|| Error::Model(format!("recorded state {occ} is outside the state space")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..space.len())
        .map(|s| batch_means(&idx.iter().map(|&i| if i == s { 1.0 } else { 0.0 }).collect::<Vec<_>>(), BATCHES))
        .collect())
}

/// Batch-means estimate of the mean of a series. With fewer values than
/// batches the batch error falls back to the naive one.
pub fn batch_means(values: &[f64], batches: usize) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, naive_se: f64::NAN, batch_se: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let naive_se = (var / n as f64).sqrt();
    let size = n / batches;
    if batches < 2 || size == 0 {
        return Estimate { mean, naive_se, batch_se: naive_se };
    }
    let batch: Vec<f64> =
        values.chunks_exact(size).take(batches).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let bm = batch.iter().sum::<f64>() / batches as f64;
    let bvar = batch.iter().map(|b| (b - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Estimate { mean, naive_se, batch_se: (bvar / batches as f64).sqrt() }
}

/// Writes the trace as CSV: `step,node1_bin1,...` then one row per record.
pub fn write_trace_csv<W: Write>(trace: &ChainTrace, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    for (s, counts) in trace.initial.nodes().iter().enumerate() {
        for b in 0..counts.len() {
            header.push(format!("node{}_bin{}", s + 1, b + 1));
        }
    }
    writer.write_record(&header)?;
    for r in &trace.records {
        let mut row = vec![r.step.to_string()];
        row.extend(r.state.flatten().map(|c| c.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// JSON sidecar describing how a trace was produced.
pub fn trace_sidecar(trace: &ChainTrace) -> serde_json::Value {
    json!({
        "seed": trace.config.seed,
        "chain": trace.chain,
        "rng": "ChaCha8Rng::seed_from_u64(seed), stream = chain",
        "scheme": trace.config.scheme,
        "steps": trace.config.steps,
        "burn_in": trace.burn_in,
        "thin": trace.config.thin,
        "initial": trace.initial,
        "records": trace.records.len(),
        "updates": trace.updates,
        "accepted": trace.accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Layout;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn coin() -> MrfSpec<Rational> {
        MrfSpec::single_node(vec![q(1, 2), q(1, 2)]).unwrap()
    }

    #[test]
    fn deterministic_creation_absorbs() {
        let spec = MrfSpec::single_node(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let config = ChainConfig::new(3, 60, InitialState::Explicit(Occupancy::single(vec![1, 2, 3]))).with_burn_in(0);
        let trace = run(&spec, &config).unwrap();
        let absorbed = Occupancy::single(vec![6, 0, 0]);
        let first = trace.records.iter().position(|r| r.state == absorbed).expect("absorbed");
        assert!(trace.records[first..].iter().all(|r| r.state == absorbed));
    }

    #[test]
    fn fair_coin_frequency() {
        let config = ChainConfig::new(11, 20_000, InitialState::Random { totals: vec![1] }).with_burn_in(0);
        let trace = run(&coin(), &config).unwrap();
        let heads = trace.states().filter(|s| s.node(0) == [1, 0]).count() as f64 / trace.len() as f64;
        // memoryless draws: binomial 3σ
        assert!((heads - 0.5).abs() < 3.0 * (0.25f64 / trace.len() as f64).sqrt(), "{heads}");
    }

    #[test]
    fn burn_in_and_thinning() {
        let config = ChainConfig::new(1, 105, InitialState::Random { totals: vec![3] }).with_burn_in(5).with_thin(10);
        let trace = run(&coin(), &config).unwrap();
        assert_eq!(trace.len(), 10);
        assert_eq!(trace.records[0].step, 15);
        assert!(trace.states().all(|s| s.total() == 3));
        let default = run(&coin(), &ChainConfig::new(1, 100, InitialState::Random { totals: vec![3] })).unwrap();
        assert_eq!(default.burn_in, 30);
        assert!(run(&coin(), &ChainConfig::new(1, 30, InitialState::Random { totals: vec![3] })).is_err());
        assert!(run(&coin(), &config.clone().with_thin(0)).is_err());
    }

    #[test]
    fn chains_use_distinct_streams() {
        let config = ChainConfig::new(5, 200, InitialState::Random { totals: vec![4] }).with_burn_in(0);
        let traces = run_chains(&coin(), &config, 3).unwrap();
        assert_eq!(traces[0], run(&coin(), &config).unwrap());
        assert_ne!(traces[0].records, traces[1].records);
        assert_eq!(merge_states(&traces).len(), 600);
    }

    #[test]
    fn clamped_node_stays_put() {
        let spec = MrfSpec::builder(vec![2, 2])
            .pair_clique(0, 1, vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(2, 1)]])
            .clamp(1, vec![2, 1])
            .build()
            .unwrap();
        let config = ChainConfig::new(9, 500, InitialState::Random { totals: vec![2, 3] })
            .with_scheme(ScanScheme::SequentialScan)
            .with_burn_in(0);
        let trace = run(&spec, &config).unwrap();
        assert!(trace.states().all(|s| s.node(1) == [2, 1] && s.node_total(0) == 2));
        let bad = ChainConfig::new(9, 10, InitialState::Explicit(Occupancy::new(vec![vec![1, 1], vec![0, 3]])));
        assert!(matches!(run(&spec, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn empty_node_is_a_model_error() {
        let config = ChainConfig::new(1, 10, InitialState::Random { totals: vec![0] }).with_burn_in(0);
        assert!(matches!(run(&coin(), &config), Err(Error::Model(_))));
    }

    #[test]
    fn point_mass_and_estimates() {
        let space = StateSpace::new(Layout::single(2).unwrap(), vec![1], &[]).unwrap();
        let states = vec![Occupancy::single(vec![0, 1]); 40];
        let d = empirical_distribution(&states, &space).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0]);
        let est = state_estimates(&states, &space).unwrap();
        assert_eq!(est[1].mean, 1.0);
        assert_eq!(est[1].batch_se, 0.0);
        let outside = [Occupancy::single(vec![2, 0])];
        assert!(empirical_distribution(&outside, &space).is_err());
    }

    #[test]
    fn batch_means_sees_correlation() {
        // long runs of identical values inflate the batch error
        let values: Vec<f64> = (0..2000).map(|i| ((i / 100) % 2) as f64).collect();
        let e = batch_means(&values, BATCHES);
        assert!((e.mean - 0.5).abs() < 1e-12);
        assert!(e.batch_se > 3.0 * e.naive_se);
    }

    #[test]
    fn csv_layout() {
        let config = ChainConfig::new(2, 4, InitialState::Random { totals: vec![2] }).with_burn_in(1);
        let trace = run(&coin(), &config).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,node1_bin1,node1_bin2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("2,"));
        assert_eq!(trace_sidecar(&trace)["burn_in"], 1);
    }
}
