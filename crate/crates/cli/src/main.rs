//! Command-line front end: run experiments, sweep network sizes or
//! topologies, print the theoretical regret envelope, and inspect structure
//! matrices.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on IO errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use malinucb::config::{ExperimentConfig, TopologySpec, XAxis};
use malinucb::consensus::comm_length;
use malinucb::export::{export_csv, export_plot};
use malinucb::graph::{build_graph, parse_edge_list, structure_matrix, TopologyKind};
use malinucb::harness::{
    regret_envelope, run_experiment, run_experiment_observed, sweep, AggregateResult,
    ExperimentSetup, HarnessError, SweepAxis,
};

#[derive(Parser)]
#[command(
    name = "malinucb",
    about = "Decentralized multi-agent linear UCB simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Experiment configuration file (key = value lines).
    #[arg(short = 'c', long = "config")]
    config: PathBuf,
    /// Override the base seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for repetitions (defaults to all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write per-round aggregates as CSV.
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
    /// Write an SVG plot of the mean regret curves.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// X axis for the plot.
    #[arg(long, value_enum)]
    x_axis: Option<XAxisArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment configuration (all repetitions) and aggregate.
    Run {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Stream every episode record as JSON lines (forces sequential
        /// execution of the repetitions).
        #[arg(long)]
        log_episodes: Option<PathBuf>,
        /// Include per-round consensus traces in the episode log.
        #[arg(long)]
        trace_consensus: bool,
    },
    /// Run a family of experiments varying one axis.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated variants: topologies (e.g.
        /// "complete,8-regular,4-regular,cycle") or sizes (e.g. "4,16,64").
        #[arg(long)]
        values: String,
    },
    /// Compare the empirical regret against the high-probability bound.
    Envelope {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print structure-matrix statistics for a topology.
    TopoInfo {
        /// Topology kind: complete, cycle, path, k-regular:<k>, <k>-regular.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        self_loops: bool,
        /// Edge-list file for custom graphs (first line n, then "i j" pairs).
        #[arg(long)]
        edges: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Topology,
    NetworkSize,
}

#[derive(Clone, Copy, ValueEnum)]
enum XAxisArg {
    Rounds,
    Episodes,
}

enum CliError {
    Config(String),
    Io(String),
}

impl From<HarnessError> for CliError {
    fn from(err: HarnessError) -> Self {
        if err.is_io() {
            CliError::Io(err.to_string())
        } else {
            CliError::Config(err.to_string())
        }
    }
}

impl From<malinucb::config::ConfigError> for CliError {
    fn from(err: malinucb::config::ConfigError) -> Self {
        CliError::from(HarnessError::Config(err))
    }
}

impl From<malinucb::export::ExportError> for CliError {
    fn from(err: malinucb::export::ExportError) -> Self {
        CliError::Io(err.to_string())
    }
}

fn main() -> ExitCode {
    // Die quietly when the consumer of a pipe closes early (e.g. `| head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            common,
            log_episodes,
            trace_consensus,
        } => cmd_run(common, log_episodes, trace_consensus),
        Command::Sweep {
            common,
            axis,
            values,
        } => cmd_sweep(common, axis, &values),
        Command::Envelope { config, seed, jobs } => cmd_envelope(&config, seed, jobs),
        Command::TopoInfo {
            kind,
            n,
            self_loops,
            edges,
        } => cmd_topo_info(&kind, n, self_loops, edges.as_deref()),
    }
}

fn load_config(path: &std::path::Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn install_pool(jobs: Option<usize>) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    if let Some(_jobs) = jobs {
        eprintln!("note: built without the `parallel` feature; --jobs is ignored");
    }
    Ok(())
}

fn print_summary(agg: &AggregateResult) {
    let last_err = agg.stderr.last().copied().unwrap_or(0.0);
    println!(
        "{}: topology={} N={} T={} reps={} lambda2={:.6} gap={:.6} \
         final regret {:.3} +/- {:.3}",
        agg.config_id,
        agg.topology_label,
        agg.n_agents,
        agg.horizon,
        agg.repetitions,
        agg.lambda2,
        agg.spectral_gap,
        agg.mean_final_regret(),
        last_err
    );
}

fn write_outputs(
    results: &[AggregateResult],
    out: Option<&PathBuf>,
    plot: Option<&PathBuf>,
    x_axis: XAxis,
) -> Result<(), CliError> {
    if let Some(path) = out {
        export_csv(results, path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = plot {
        export_plot(results, path, x_axis)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(
    common: CommonRunArgs,
    log_episodes: Option<PathBuf>,
    trace_consensus: bool,
) -> Result<(), CliError> {
    let mut cfg = load_config(&common.config, common.seed)?;
    cfg.trace_consensus = cfg.trace_consensus || trace_consensus;
    install_pool(common.jobs)?;
    let agg = match &log_episodes {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut writer = std::io::BufWriter::new(file);
            let mut log_err = None;
            let agg = run_experiment_observed(&cfg, |_, run| {
                if log_err.is_some() {
                    return;
                }
                for record in &run.episodes {
                    if let Err(e) = serde_json::to_writer(&mut writer, record)
                        .map_err(std::io::Error::from)
                        .and_then(|()| writeln!(writer))
                    {
                        log_err = Some(format!("{}: {e}", path.display()));
                        return;
                    }
                }
            })?;
            if let Some(msg) = log_err {
                return Err(CliError::Io(msg));
            }
            writer
                .flush()
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            println!("wrote {}", path.display());
            agg
        }
        None => run_experiment(&cfg)?,
    };
    print_summary(&agg);
    let x_axis = resolve_x_axis(common.x_axis, cfg.x_axis);
    write_outputs(
        std::slice::from_ref(&agg),
        common.out.as_ref(),
        common.plot.as_ref(),
        x_axis,
    )
}

fn resolve_x_axis(flag: Option<XAxisArg>, from_config: XAxis) -> XAxis {
    match flag {
        Some(XAxisArg::Rounds) => XAxis::Rounds,
        Some(XAxisArg::Episodes) => XAxis::Episodes,
        None => from_config,
    }
}

fn cmd_sweep(common: CommonRunArgs, axis: AxisArg, values: &str) -> Result<(), CliError> {
    let cfg = load_config(&common.config, common.seed)?;
    install_pool(common.jobs)?;
    let axis = parse_axis(axis, values)?;
    let report = sweep(&cfg, &axis)?;
    for agg in &report.results {
        print_summary(agg);
    }
    for (label, msg) in &report.failures {
        eprintln!("variant {label} failed: {msg}");
    }
    let x_axis = resolve_x_axis(common.x_axis, cfg.x_axis);
    write_outputs(
        &report.results,
        common.out.as_ref(),
        common.plot.as_ref(),
        x_axis,
    )?;
    if report.results.is_empty() {
        return Err(CliError::Config("every sweep variant failed".into()));
    }
    Ok(())
}

fn parse_axis(axis: AxisArg, values: &str) -> Result<SweepAxis, CliError> {
    let items: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(CliError::Config("--values must be non-empty".into()));
    }
    Ok(match axis {
        AxisArg::Topology => SweepAxis::Topology(
            items
                .iter()
                .map(|s| TopologySpec::parse(s).map_err(CliError::Config))
                .collect::<Result<_, _>>()?,
        ),
        AxisArg::NetworkSize => SweepAxis::NetworkSize(
            items
                .iter()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| CliError::Config(format!("invalid network size {s:?}")))
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn cmd_envelope(
    config: &std::path::Path,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let cfg = load_config(config, seed)?;
    install_pool(jobs)?;
    let setup = ExperimentSetup::from_config(&cfg)?;
    let agg = run_experiment(&cfg)?;
    let env = regret_envelope(&setup, &agg);
    print_summary(&agg);
    println!(
        "high-probability regret bound at T={}: {:.3}",
        agg.horizon, env.final_bound
    );
    println!(
        "empirical final regret: mean {:.3}, max {:.3}",
        env.mean_final_regret, env.max_final_regret
    );
    println!(
        "repetitions above the bound: {:.4} (delta = {:.6})",
        env.violation_fraction, env.delta
    );
    Ok(())
}

fn cmd_topo_info(
    kind: &str,
    n: usize,
    self_loops: bool,
    edges: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let kind = if kind == "custom" {
        let path = edges
            .ok_or_else(|| CliError::Config("--kind custom requires --edges <file>".to_string()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let (file_n, pairs) =
            parse_edge_list(&text).map_err(|e| CliError::Config(e.to_string()))?;
        if file_n != n {
            return Err(CliError::Config(format!(
                "--n {n} disagrees with edge list node count {file_n}"
            )));
        }
        TopologyKind::Custom(pairs)
    } else {
        match TopologySpec::parse(kind).map_err(CliError::Config)? {
            TopologySpec::Complete => TopologyKind::Complete,
            TopologySpec::Cycle => TopologyKind::Cycle,
            TopologySpec::Path => TopologyKind::Path,
            TopologySpec::KRegular(k) => TopologyKind::KRegular(k),
            TopologySpec::CustomFile(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                let (_, pairs) =
                    parse_edge_list(&text).map_err(|e| CliError::Config(e.to_string()))?;
                TopologyKind::Custom(pairs)
            }
        }
    };
    let adjacency =
        build_graph(&kind, n, self_loops).map_err(|e| CliError::Config(e.to_string()))?;
    let topology = structure_matrix(&adjacency).map_err(|e| CliError::Config(e.to_string()))?;
    let max_row_err = (0..n)
        .map(|i| (topology.w.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    println!("kind: {}", kind.label());
    println!("nodes: {n} (self loops: {self_loops})");
    println!("max degree (non-loop): {}", adjacency.max_degree());
    println!("lambda2: {:.12}", topology.lambda2);
    println!("spectral gap: {:.12}", topology.spectral_gap);
    println!("max |row sum - 1|: {max_row_err:.3e}");
    for s in [1u64, 10, 100] {
        let q = comm_length(s, n, topology.lambda2).map_err(|e| CliError::Config(e.to_string()))?;
        println!("communication rounds q({s}): {q}");
    }
    Ok(())
}
