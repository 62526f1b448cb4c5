//! Command-line front door: load a graph, optimize its weights with either
//! eigenvalue engine, inspect distributed spectral estimates, and run the
//! consensus and output-feedback demonstrations. Trace CSVs are the
//! interface to external plotting.

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectral_weights::csvio::{
    write_eigen_trace, write_inout_trajectory, write_multiplier_trace, write_state_trajectory,
    write_weight_trace,
};
use spectral_weights::protocols::estimate_diameter;
use spectral_weights::{
    central_solve, demo_weights, laplacian, node_weighted_laplacian,
    optimal_consensus_step, outer_solve, simulate_consensus, simulate_dof_closedloop, sym_eig,
    AugLagParams, DistributedEngine, DofController, DofTrace, EigEngine, Graph, LtiPlant,
    NodeWeights, OracleEngine, RunTrace, Scheme, WeightMode, Weighting,
};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Benchmark topology used by the output-feedback demo; identical to the
/// in-repo fixture file.
const BENCH7: &str = include_str!("../../../fixtures/bench7.graph");

/// Seed applied when neither --seed nor SPECTRAL_WEIGHTS_SEED is given.
const DEFAULT_SEED: u64 = 2024;

const EXIT_BUDGET_EXHAUSTED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "spectral-weights",
    about = "Minimize the finite condition number of a weighted graph Laplacian",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the weight optimization and export its traces as CSV.
    Optimize(OptimizeArgs),
    /// Estimate the extreme eigenpairs over the network and compare them
    /// with the dense oracle.
    Estimate(EstimateArgs),
    /// Closed-loop demonstrations driven by the optimized weights.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Run both engines and report the relative gap in terminal condition
    /// number.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Node,
    Edge,
}

impl From<ModeArg> for WeightMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Node => WeightMode::Node,
            ModeArg::Edge => WeightMode::Edge,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Distributed,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum GainsArg {
    Unweighted,
    Optimized,
}

#[derive(Args)]
struct SolverArgs {
    /// Step size for the projected gradient descent.
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    /// Penalty parameter of the augmented Lagrangian.
    #[arg(long, default_value_t = 20.0)]
    rho: f64,
    /// Initial multiplier estimate.
    #[arg(long, default_value_t = 0.0)]
    sigma0: f64,
    /// Total inner-iteration budget across all subproblems.
    #[arg(long, default_value_t = 750)]
    t_max: usize,
    /// Maximum number of multiplier updates.
    #[arg(long, default_value_t = 40)]
    k_max: usize,
    /// Weight-stall threshold on the step norm.
    #[arg(long, default_value_t = 5e-2)]
    eps_w: f64,
    /// Multiplier convergence threshold.
    #[arg(long, default_value_t = 1e-1)]
    eps_sigma: f64,
    /// Objective-settling threshold on consecutive top eigenvalues.
    #[arg(long, default_value_t = 1e-3)]
    eps_lambda_n: f64,
    /// Starting weights as comma-separated values (defaults to all ones).
    #[arg(long, value_delimiter = ',')]
    w0: Option<Vec<f64>>,
}

impl SolverArgs {
    fn params(&self) -> AugLagParams {
        AugLagParams {
            gamma: self.gamma,
            rho: self.rho,
            sigma0: self.sigma0,
            t_max: self.t_max,
            k_max: self.k_max,
            eps_w: self.eps_w,
            eps_sigma: self.eps_sigma,
            eps_lambda_n: self.eps_lambda_n,
            w0: self.w0.clone(),
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Path to an edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Which weights are optimized.
    #[arg(long, value_enum, default_value_t = ModeArg::Node)]
    mode: ModeArg,
    /// Eigenvalue engine driving the descent.
    #[arg(long, value_enum, default_value_t = EngineArg::Distributed)]
    engine: EngineArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seed for the distributed engine (env SPECTRAL_WEIGHTS_SEED overrides
    /// the built-in default).
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the trace CSVs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Path to an edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Optional node weights file (whitespace-separated reals); defaults to
    /// unit weights.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seed for the distributed estimators.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Average consensus at the optimal step size, before and after weight
    /// optimization.
    Consensus(ConsensusArgs),
    /// Networked output-feedback loop on the benchmark topology.
    Dof(DofArgs),
}

#[derive(Args)]
struct ConsensusArgs {
    /// Path to an edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Seed for the random initial state.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DofArgs {
    /// Which plant/controller pairing the summary lines report.
    #[arg(long, value_enum)]
    gains: Option<GainsArg>,
    /// Drive the loop with seeded decaying noise from a zero initial state
    /// instead of decaying a random initial state.
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Seed for the random initial state of the zero-noise run.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving the four trajectory CSVs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Path to an edge-list graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Which weights are optimized.
    #[arg(long, value_enum, default_value_t = ModeArg::Node)]
    mode: ModeArg,
    #[command(flatten)]
    solver: SolverArgs,
    /// Seed for the distributed engine.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            return ExitCode::FAILURE;
        }
        Err(e) => {
            // --help and --version land here.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let run = match cli.command {
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Demo(DemoCommand::Consensus(args)) => cmd_demo_consensus(&args),
        Command::Demo(DemoCommand::Dof(args)) => cmd_demo_dof(&args),
        Command::Compare(args) => cmd_compare(&args),
    };
    match run {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// Explicit flag, then the environment, then the built-in constant.
fn resolve_seed(flag: Option<u64>) -> Result<u64, String> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("SPECTRAL_WEIGHTS_SEED") {
        Ok(text) => text
            .parse()
            .map_err(|_| format!("SPECTRAL_WEIGHTS_SEED is not an unsigned integer: {text:?}")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn load_graph(path: &Path) -> Result<Graph, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read graph file {}: {e}", path.display()))?;
    Graph::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn make_engine(engine: EngineArg, seed: u64) -> Box<dyn EigEngine> {
    match engine {
        EngineArg::Distributed => Box::new(DistributedEngine::new(seed, Scheme::Interleaved)),
        EngineArg::Oracle => Box::new(OracleEngine),
    }
}

fn create_out(dir: &Path, name: &str) -> Result<BufWriter<File>, String> {
    std::fs::create_dir_all(dir)
        .map_err(|e| format!("cannot create output directory {}: {e}", dir.display()))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))
}

fn write_run_trace(dir: &Path, trace: &RunTrace) -> Result<(), String> {
    let io = |e: std::io::Error| format!("cannot write trace: {e}");
    write_weight_trace(&mut create_out(dir, "nodeWeight.csv")?, trace).map_err(io)?;
    write_eigen_trace(&mut create_out(dir, "nodeWeightEigen.csv")?, trace).map_err(io)?;
    write_multiplier_trace(&mut create_out(dir, "nodeWeightMu.csv")?, trace).map_err(io)?;
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<ExitCode, String> {
    let g = load_graph(&args.graph)?;
    let seed = resolve_seed(args.seed)?;
    let mut engine = make_engine(args.engine, seed);
    let trace = outer_solve(&g, &args.solver.params(), args.mode.into(), engine.as_mut())
        .map_err(|e| e.to_string())?;
    write_run_trace(&args.out_dir, &trace)?;

    let term = trace.terminal();
    println!("kappa          {:.6}", term.kappa);
    println!("lambda_2       {:.6}", term.lambda_2);
    println!("lambda_N       {:.6}", term.lambda_n);
    println!("iterations     {}", trace.steps_used);
    println!("mult. updates  {}", trace.multiplier_updates.len());
    println!("inner rounds   {}", trace.total_rounds);
    println!("converged      {}", trace.converged);
    println!(
        "traces         {}",
        args.out_dir
            .join("nodeWeight{,Eigen,Mu}.csv")
            .display()
    );
    if trace.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_BUDGET_EXHAUSTED))
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<ExitCode, String> {
    let g = load_graph(&args.graph)?;
    let seed = resolve_seed(args.seed)?;
    let weights = match &args.weights {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read weights file {}: {e}", path.display()))?;
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| format!("bad weight entry {t:?} in {}", path.display()))
                })
                .collect::<Result<_, _>>()?;
            Some(NodeWeights::new(vals).map_err(|e| e.to_string())?)
        }
        None => None,
    };

    let weighting = match &weights {
        Some(w) => Weighting::Node(w),
        None => Weighting::Unit,
    };
    let mut engine = DistributedEngine::new(seed, Scheme::Interleaved);
    let est = match &weights {
        Some(w) => engine.eval(&g, Weighting::Node(w)),
        None => engine.eval(&g, Weighting::Unit),
    }
    .map_err(|e| e.to_string())?;
    let spec = sym_eig(&spectral_weights::eig::weighted_form(&g, weighting));
    let oracle_top = spec.values[g.n() - 1];
    let oracle_second = spec.values[1];
    let (d_est, d_rounds) = estimate_diameter(&g, 4 * g.n() + 4).map_err(|e| e.to_string())?;

    let rel = |est: f64, le: f64| (est - le).abs() / le.abs().max(f64::MIN_POSITIVE);
    println!("                 distributed      oracle        rel. error");
    println!(
        "lambda_N       {:>13.6} {:>13.6} {:>13.3e}",
        est.top.value,
        oracle_top,
        rel(est.top.value, oracle_top)
    );
    println!(
        "lambda_2       {:>13.6} {:>13.6} {:>13.3e}",
        est.second.value,
        oracle_second,
        rel(est.second.value, oracle_second)
    );
    println!(
        "kappa          {:>13.6} {:>13.6} {:>13.3e}",
        est.condition_number(),
        oracle_top / oracle_second,
        rel(est.condition_number(), oracle_top / oracle_second)
    );
    println!("diameter est.  {d_est} (in {d_rounds} rounds)");
    println!("eigen rounds   {}", est.rounds);
    Ok(ExitCode::SUCCESS)
}

/// Random start drawn once per demo so reruns with one seed are identical.
fn seeded_start(seed: u64, len: usize) -> Vec<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    spectral_weights::gaussian_vector(&mut rng, len)
}

/// Measured geometric decay of the disagreement with the consensus limit,
/// fitted over `[k0, k1]`.
fn measured_rate(traj: &[Vec<f64>], limit: f64, k0: usize, k1: usize) -> f64 {
    let norm = |x: &Vec<f64>| -> f64 {
        x.iter().map(|v| (v - limit).powi(2)).sum::<f64>().sqrt()
    };
    (norm(&traj[k1]) / norm(&traj[k0])).powf(1.0 / (k1 - k0) as f64)
}

fn cmd_demo_consensus(args: &ConsensusArgs) -> Result<ExitCode, String> {
    let g = load_graph(&args.graph)?;
    let seed = resolve_seed(args.seed)?;
    let x0 = seeded_start(seed, g.n());

    let spec = sym_eig(&laplacian(&g));
    let (r, rho) = optimal_consensus_step(spec.values[1], spec.values[g.n() - 1])
        .map_err(|e| e.to_string())?;
    let traj = simulate_consensus(&laplacian(&g).to_dense(), r, &x0, 50)
        .map_err(|e| e.to_string())?;
    let mean0 = x0.iter().sum::<f64>() / g.n() as f64;
    println!("unit weights      r* = {r:.4}  predicted rate = {rho:.4}  measured rate = {:.4}",
        measured_rate(&traj, mean0, 10, 50));

    let solved = central_solve(&g, &AugLagParams::default(), WeightMode::Node)
        .map_err(|e| e.to_string())?;
    let term = solved.terminal();
    let w = NodeWeights::new(term.w.clone()).map_err(|e| e.to_string())?;
    let (r, rho) =
        optimal_consensus_step(term.lambda_2, term.lambda_n).map_err(|e| e.to_string())?;
    let traj = simulate_consensus(&node_weighted_laplacian(&g, &w), r, &x0, 30)
        .map_err(|e| e.to_string())?;
    let limit = spectral_weights::weighted_consensus_limit(&x0, &w);
    println!("optimized weights r* = {r:.4}  predicted rate = {rho:.4}  measured rate = {:.4}",
        measured_rate(&traj, limit, 10, 30));
    Ok(ExitCode::SUCCESS)
}

fn cmd_demo_dof(args: &DofArgs) -> Result<ExitCode, String> {
    let g = Graph::parse(BENCH7).expect("embedded benchmark graph is valid");
    let seed = resolve_seed(args.seed)?;
    let plant = LtiPlant::fixture();
    let steps = 201;

    let x0: Vec<[f64; 2]> = if args.noise_seed.is_some() {
        vec![[0.0; 2]; g.n()]
    } else {
        seeded_start(seed, 2 * g.n())
            .chunks(2)
            .map(|c| [c[0], c[1]])
            .collect()
    };

    let run = |lap, ctrl: &DofController| -> Result<DofTrace, String> {
        simulate_dof_closedloop(lap, &plant, ctrl, &x0, args.noise_seed, steps)
            .map_err(|e| e.to_string())
    };
    let unit_lap = laplacian(&g).to_dense();
    let unweighted = run(&unit_lap, &DofController::unweighted_gains())?;
    let weighted_lap = node_weighted_laplacian(&g, &demo_weights());
    let weighted = run(&weighted_lap, &DofController::optimized_gains())?;

    let io = |e: std::io::Error| format!("cannot write trajectory: {e}");
    let dir = &args.out_dir;
    write_state_trajectory(&mut create_out(dir, "unweighted_sim.csv")?, &unweighted).map_err(io)?;
    write_inout_trajectory(&mut create_out(dir, "unweighted_sim_inout.csv")?, &unweighted)
        .map_err(io)?;
    write_state_trajectory(&mut create_out(dir, "weighted_sim.csv")?, &weighted).map_err(io)?;
    write_inout_trajectory(&mut create_out(dir, "weighted_sim_inout.csv")?, &weighted)
        .map_err(io)?;

    let report = |name: &str, trace: &DofTrace| {
        if args.noise_seed.is_some() {
            println!("{name} gains: energy ratio ||z||/||xi|| = {:.4e}", trace.energy_ratio());
        } else {
            println!(
                "{name} gains: disagreement {:.3e} at k=0, {:.3e} at k=200",
                trace.disagreement[0],
                trace.disagreement[200]
            );
        }
    };
    match args.gains {
        Some(GainsArg::Unweighted) => report("unweighted", &unweighted),
        Some(GainsArg::Optimized) => report("optimized", &weighted),
        None => {
            report("unweighted", &unweighted);
            report("optimized", &weighted);
        }
    }
    println!(
        "trajectories   {}",
        dir.join("{unweighted,weighted}_sim{,_inout}.csv").display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, String> {
    let g = load_graph(&args.graph)?;
    let seed = resolve_seed(args.seed)?;
    let params = args.solver.params();

    let oracle = outer_solve(&g, &params, args.mode.into(), &mut OracleEngine)
        .map_err(|e| e.to_string())?;
    let mut engine = DistributedEngine::new(seed, Scheme::Interleaved);
    let distributed = outer_solve(&g, &params, args.mode.into(), &mut engine)
        .map_err(|e| e.to_string())?;

    let ko = oracle.terminal().kappa;
    let kd = distributed.terminal().kappa;
    println!("oracle       kappa = {ko:.6} ({} iterations)", oracle.steps_used);
    println!("distributed  kappa = {kd:.6} ({} iterations)", distributed.steps_used);
    println!("relative gap {:.3}%", 100.0 * (kd - ko).abs() / ko);
    Ok(ExitCode::SUCCESS)
}
