use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fockmrf::diagram::{expand_power, render_words, verify_expansion};
use fockmrf::exact::{
    build_kernel, check_equilibrium_multinomial, closed_classes, stationary_distribution, ScanScheme, StateSpace,
};
use fockmrf::fock::{parse_expr, MixedState, Occupancy};
use fockmrf::mrf::{load_spec, MrfSpec};
use fockmrf::sampler::{
    default_burn_in, empirical_distribution, merge_states, run_chains, state_estimates, trace_sidecar, write_trace_csv,
    ChainConfig, InitialState,
};
use fockmrf::update::{conservation_residual, UpdateOperator};
use fockmrf::{Error, Rational, Scalar};
use serde_json::json;

/// Operator-algebra MCMC for Markov random fields with histogram nodes.
#[derive(Debug, Parser)]
#[command(name = "fockmrf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a spec document.
    Validate { spec: PathBuf },

    /// Normal-order an operator expression such as `A[1,1] A'[1,2]`.
    NormalOrder { expr: String },

    /// Exact stationary distribution of the update kernel, as JSON.
    ExactStationary {
        #[arg(long)]
        spec: PathBuf,
        /// Samples per node, comma separated; one per node when omitted.
        #[arg(long, value_delimiter = ',')]
        totals: Vec<u32>,
        #[arg(long, default_value = "random-scan")]
        scheme: ScanScheme,
    },

    /// Check HΨ = nΨ for the multinomial state of a single node.
    EquilibriumCheck {
        /// Number of bins; defaults to the number of weights.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: u32,
        /// Bin weights (`a/b` or decimal), comma separated; uniform if omitted.
        #[arg(long, value_delimiter = ',')]
        p: Vec<String>,
        /// Double one amplitude first, which must break the check.
        #[arg(long)]
        perturb: bool,
    },

    /// Check that the update operator commutes with every node's number operator.
    VerifyConservation {
        #[arg(long)]
        spec: PathBuf,
        /// Check this expression on the spec's layout instead of the update operator.
        #[arg(long)]
        expr: Option<String>,
    },

    /// Run the sampler and write the trace as CSV with a JSON sidecar.
    McmcRun {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total updates, burn-in included.
        #[arg(long)]
        steps: u64,
        /// Defaults to ten sweeps per sample.
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 1)]
        thin: u64,
        /// Samples per node, comma separated; one per node when omitted.
        #[arg(long, value_delimiter = ',')]
        totals: Vec<u32>,
        #[arg(long, default_value = "random-scan")]
        scheme: ScanScheme,
        #[arg(long, default_value_t = 1)]
        chains: u64,
        /// Trace path; stdout when omitted (single chain only).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Compare the sampler's visit frequencies against the exact stationary vector.
    Compare {
        #[arg(long)]
        spec: PathBuf,
        /// Samples per node, comma separated; one per node when omitted.
        #[arg(long, value_delimiter = ',')]
        totals: Vec<u32>,
        /// Retained records (after burn-in and thinning).
        #[arg(long, default_value_t = 100_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        burn_in: Option<u64>,
        /// Defaults to one sweep: the number of unclamped samples.
        #[arg(long)]
        thin: Option<u64>,
        #[arg(long, default_value = "random-scan")]
        scheme: ScanScheme,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },

    /// Expand (I + H_1 + … + H_N)^k into ordered words.
    DiagramExpand {
        #[arg(long)]
        pieces: usize,
        #[arg(long)]
        power: u32,
        /// Cross-check against the direct operator power on a small chain model.
        #[arg(long)]
        verify: bool,
    },
}

enum Outcome {
    Ok,
    CheckFailed,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::Capacity { .. } | Error::Reducible(_) | Error::NonConvergence { .. } | Error::Model(_) => 4,
        Error::Index(_) | Error::Parse(_) | Error::Validation { .. } | Error::Mode(_) | Error::Config(_) => 2,
    }
}

fn read_spec<T: Scalar>(path: &Path) -> fockmrf::Result<MrfSpec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_spec(&text)
}

/// Explicit totals, or one sample per free node and the clamped total elsewhere.
fn resolve_totals<T: Scalar>(spec: &MrfSpec<T>, totals: Vec<u32>) -> Vec<u32> {
    if !totals.is_empty() {
        return totals;
    }
    (0..spec.num_nodes()).map(|s| spec.clamped(s).map_or(1, |c| c.iter().sum())).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(command: Command) -> fockmrf::Result<Outcome> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Validate { spec } => {
            let spec: MrfSpec<Rational> = read_spec(&spec)?;
            writeln!(
                out,
                "ok: {} nodes, bins {:?}, {} two-cliques, {} three-cliques, {} clamped",
                spec.num_nodes(),
                spec.layout().as_slice(),
                spec.two_cliques().len(),
                spec.three_cliques().len(),
                spec.clamped_nodes().count()
            )?;
            Ok(Outcome::Ok)
        }
        Command::NormalOrder { expr } => {
            let expr = parse_expr::<Rational>(&expr)?;
            writeln!(out, "{}", expr.normal_order())?;
            Ok(Outcome::Ok)
        }
        Command::ExactStationary { spec, totals, scheme } => {
            let spec: MrfSpec<f64> = read_spec(&spec)?;
            let totals = resolve_totals(&spec, totals);
            let space = StateSpace::for_spec(&spec, &totals)?;
            let h = UpdateOperator::build(&spec)?;
            let kernel = build_kernel(&h, &space, scheme)?;
            let pi = stationary_distribution(&kernel)?;
            let rows: Vec<String> = space
                .states()
                .iter()
                .zip(pi.probs())
                .map(|(occ, p)| format!("  {}", json!({"occupancy": occ, "prob": p})))
                .collect();
            writeln!(out, "[\n{}\n]", rows.join(",\n"))?;
            Ok(Outcome::Ok)
        }
        Command::EquilibriumCheck { m, n, p, perturb } => {
            let weights: Vec<Rational> = if p.is_empty() {
                let m = m.ok_or_else(|| Error::Config("give --p or --m".into()))?;
                vec![Rational::from_integer(1.into()); m]
            } else {
                p.iter()
                    .enumerate()
                    .map(|(i, w)| {
                        Rational::parse_scalar(w).ok_or_else(|| Error::Validation {
                            path: format!("p[{i}]"),
                            message: format!("`{w}` is not a number"),
                        })
                    })
                    .collect::<fockmrf::Result<_>>()?
            };
            if let Some(m) = m {
                if m != weights.len() {
                    return Err(Error::Config(format!("--m {m} but {} weights given", weights.len())));
                }
            }
            let report = check_equilibrium_multinomial(&weights, n, perturb)?;
            let mut doc = json!({"lambda": report.lambda.to_string(), "residual": report.residual.to_string()});
            if let Some(occ) = &report.offending {
                doc["offending"] = json!(occ);
            }
            writeln!(out, "{doc}")?;
            Ok(if report.passed() { Outcome::Ok } else { Outcome::CheckFailed })
        }
        Command::VerifyConservation { spec, expr } => {
            let spec: MrfSpec<Rational> = read_spec(&spec)?;
            let target = match expr {
                Some(text) => {
                    let e = parse_expr::<Rational>(&text)?.normal_order();
                    e.check_layout(spec.layout())?;
                    e
                }
                None => UpdateOperator::build(&spec)?.expr().clone(),
            };
            let mut all = true;
            for node in 0..spec.num_nodes() {
                let report = conservation_residual(&target, spec.layout(), node)?;
                if report.conserved {
                    writeln!(out, "node {}: conserved", node + 1)?;
                } else {
                    all = false;
                    writeln!(out, "node {}: residual {}", node + 1, report.residual)?;
                }
            }
            Ok(if all { Outcome::Ok } else { Outcome::CheckFailed })
        }
        Command::McmcRun { spec, seed, steps, burn_in, thin, totals, scheme, chains, out: path, .. } => {
            let spec: MrfSpec<f64> = read_spec(&spec)?;
            if chains == 0 {
                return Err(Error::Config("--chains must be at least 1".into()));
            }
            let totals = resolve_totals(&spec, totals);
            let mut config = ChainConfig::new(seed, steps, InitialState::Random { totals }).with_scheme(scheme);
            config.burn_in = burn_in;
            config.thin = thin;
            let traces = run_chains(&spec, &config, chains)?;
            match path {
                None if chains > 1 => return Err(Error::Config("--out is required with several chains".into())),
                None => write_trace_csv(&traces[0], &mut out)?,
                Some(path) => {
                    for trace in &traces {
                        let csv_path = chain_path(&path, trace.chain, chains);
                        let file = fs::File::create(&csv_path)
                            .map_err(|e| Error::Io(format!("{}: {e}", csv_path.display())))?;
                        write_trace_csv(trace, io::BufWriter::new(file))?;
                        let mut sidecar = csv_path.clone().into_os_string();
                        sidecar.push(".json");
                        let doc = serde_json::to_string_pretty(&trace_sidecar(trace)).expect("serialisable");
                        fs::write(&sidecar, doc + "\n")?;
                        writeln!(out, "chain {}: {} records -> {}", trace.chain, trace.len(), csv_path.display())?;
                    }
                }
            }
            Ok(Outcome::Ok)
        }
        Command::Compare { spec, totals, steps, seed, burn_in, thin, scheme, tol } => {
            let spec: MrfSpec<f64> = read_spec(&spec)?;
            let totals = resolve_totals(&spec, totals);
            let space = StateSpace::for_spec(&spec, &totals)?;
            let h = UpdateOperator::build(&spec)?;
            let kernel = build_kernel(&h, &space, scheme)?;
            let classes = closed_classes(&kernel);
            let transient = space.len() - classes.iter().map(Vec::len).sum::<usize>();
            writeln!(out, "states: {}", space.len())?;
            writeln!(out, "reachability: {} closed class(es), {} transient state(s)", classes.len(), transient)?;
            if classes.len() > 1 {
                for class in &classes {
                    let members: Vec<String> = class.iter().map(|&i| format!("[{}]", space.state(i))).collect();
                    writeln!(out, "  closed class: {}", members.join(" "))?;
                }
            }
            let pi = stationary_distribution(&kernel)?;

            let initial = InitialState::Random { totals: totals.clone() };
            let probe = Occupancy::new(totals.iter().map(|&n| vec![n]).collect());
            let burn = burn_in.unwrap_or_else(|| default_burn_in(&spec, &probe));
            let sweep: u64 = spec.unclamped_nodes().iter().map(|&s| totals[s] as u64).sum();
            let thin = thin.unwrap_or(sweep.max(1));
            if thin == 0 {
                return Err(Error::Config("thin must be at least 1".into()));
            }
            let mut config = ChainConfig::new(seed, burn + steps * thin, initial).with_scheme(scheme).with_thin(thin);
            config.burn_in = Some(burn);
            let traces = run_chains(&spec, &config, 1)?;
            let states = merge_states(&traces);
            let empirical = empirical_distribution(&states, &space)?;
            let errors = state_estimates(&states, &space)?;
            let tv = pi.tv_distance(&empirical);

            writeln!(out, "records: {} (burn-in {burn}, thin {thin}, seed {seed})", states.len())?;
            writeln!(out, "{:<24} {:>12} {:>12} {:>12}", "state", "exact", "empirical", "batch_se")?;
            for (i, occ) in space.states().iter().enumerate() {
                writeln!(
                    out,
                    "{:<24} {:>12.6} {:>12.6} {:>12.6}",
                    occ.to_string(),
                    pi.probs()[i],
                    empirical.probs()[i],
                    errors[i].batch_se
                )?;
            }
            let verdict = if tv < tol { "pass" } else { "fail" };
            writeln!(out, "tv: {tv:.6} (tol {tol}) {verdict}")?;
            Ok(if tv < tol { Outcome::Ok } else { Outcome::CheckFailed })
        }
        Command::DiagramExpand { pieces, power, verify } => {
            let words = expand_power(pieces, power)?;
            write!(out, "{}", render_words(&words))?;
            if verify {
                if !(1..=3).contains(&pieces) || power > 4 {
                    return Err(Error::Config("--verify supports 1 to 3 pieces and powers up to 4".into()));
                }
                let (h, state) = toy_chain(pieces)?;
                let ok = verify_expansion(&h, &state, power)?;
                writeln!(out, "verify: {} on {}", if ok { "ok" } else { "MISMATCH" }, state_label(&state))?;
                return Ok(if ok { Outcome::Ok } else { Outcome::CheckFailed });
            }
            Ok(Outcome::Ok)
        }
    }
}

fn chain_path(path: &Path, chain: u64, chains: u64) -> PathBuf {
    if chains == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.chain{chain}.{}", ext.to_string_lossy()),
        None => format!("{stem}.chain{chain}"),
    };
    path.with_file_name(name)
}

/// Chain of `nodes` two-bin nodes with asymmetric pair tables, holding
/// two samples on the first node and one on each of the others.
fn toy_chain(nodes: usize) -> fockmrf::Result<(UpdateOperator<Rational>, MixedState<Rational>)> {
    let r = |n: i64| Rational::from_integer(n.into());
    let mut builder = MrfSpec::<Rational>::builder(vec![2; nodes]).source(0, vec![r(1), r(2)]);
    for s in 1..nodes {
        builder = builder.pair_clique(s - 1, s, vec![vec![r(3), r(1)], vec![r(1), r(2)]]);
    }
    let spec = builder.build()?;
    let h = UpdateOperator::build(&spec)?;
    let mut counts = vec![vec![1, 0]; nodes];
    counts[0] = vec![1, 1];
    let state = MixedState::pure(spec.layout().clone(), Occupancy::new(counts), r(1))?;
    Ok((h, state))
}

fn state_label(state: &MixedState<Rational>) -> String {
    state.iter().map(|(occ, _)| occ.to_string()).collect::<Vec<_>>().join(" + ")
}
