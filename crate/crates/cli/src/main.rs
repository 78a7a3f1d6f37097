use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use perfstab::instances::Accounting;
use perfstab::instances::InstanceSpec;
use perfstab::reductions::{
    damping, encode_endogenous, endogenous_payoffs, fp_to_ps, vi_to_ps, GameSpec, DEFAULT_EPS_PRIME,
};
use perfstab::sperner::{Coloring, SpernerInstance};
use perfstab::stratclass::{
    build_maxcut_gadget, multi_start_search, recover_cut, GraphSpec, StartLabels,
};
use perfstab::sweep::{run_sweep, to_csv, SolverKind, SweepProvenance, SweepSpec};
use perfstab::{Error, SolveStatus};

/// Default directory for outputs written without an explicit path.
const OUT_DIR_VAR: &str = "PERFSTAB_OUT_DIR";

const EXIT_VERIFICATION: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "perfstab",
    version,
    about = "Performative stability solvers, reductions and certificates"
)]
struct Cli {
    /// Worker threads, capped at the available parallelism
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a solver on an instance and write its report
    Solve(SolveArgs),
    /// Build a performative instance (or an endogenous-cost game) from a VI, a fixed-point problem or a bimatrix game
    Reduce(ReduceArgs),
    /// Find an approximate VI solution of a Sperner operator and recover its trichromatic triangle
    Sperner(SpernerArgs),
    /// Multi-start local search on the LocalMaxCut gadget of a graph
    Stratclass(StratclassArgs),
    /// Sweep ρ and write one CSV row per (ρ, solver, seed)
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Start point, comma separated; a seeded sample of the domain otherwise
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Vi,
    Fp,
    Game,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    from: Source,
    /// Instance JSON whose shift is read as F (vi) or T (fp), or game JSON
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_PRIME)]
    eps_prime: f64,
    /// Cost scale of the endogenous-cost encoding
    #[arg(long = "m", default_value_t = 100.0)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpernerArgs {
    #[arg(long)]
    n: u32,
    #[arg(long, default_value_t = 16)]
    k: usize,
    /// `canonical`, `planted`, or a path to a coloring JSON
    #[arg(long, default_value = "planted")]
    coloring: String,
    /// Gap target; the instance default when omitted
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Starts {
    Any,
    VertexOnly,
}

#[derive(Args, Debug)]
struct StratclassArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 20)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which labels the random starts draw
    #[arg(long, value_enum, default_value_t = Starts::VertexOnly)]
    labels: Starts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV path; the provenance JSON is written next to it
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn bad_input(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: EXIT_BAD_INPUT,
            error: error.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Certificate(_)
            | Error::NoTrichromatic { .. }
            | Error::ResolutionTooCoarse { .. } => EXIT_VERIFICATION,
            Error::DegenerateEllipsoid { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_BAD_INPUT,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::bad_input)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::bad_input)
}

/// Explicit path, else `$PERFSTAB_OUT_DIR/<default_name>`, else stdout.
fn resolve_out(out: Option<PathBuf>, default_name: &str) -> Option<PathBuf> {
    out.or_else(|| std::env::var_os(OUT_DIR_VAR).map(|dir| PathBuf::from(dir).join(default_name)))
}

fn emit_text(out: Option<PathBuf>, default_name: &str, text: &str) -> Result<(), Failure> {
    match resolve_out(out, default_name) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure {
                    code: EXIT_BAD_INPUT,
                    error: e.into(),
                })?;
            }
            fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(Failure::bad_input)?;
            info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json<T: Serialize>(
    out: Option<PathBuf>,
    default_name: &str,
    value: &T,
) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Failure::bad_input)?;
    text.push('\n');
    emit_text(out, default_name, &text)
}

fn solve(args: SolveArgs) -> Outcome {
    let spec: InstanceSpec = read_json(&args.instance)?;
    let inst = spec.build()?;
    let x0 = match args.x0 {
        Some(v) => perfstab::Vector::from_vec(v),
        None => inst
            .domain()
            .sample(&mut ChaCha8Rng::seed_from_u64(args.seed)),
    };
    perfstab::linalg::check_dim(&x0, inst.dim())?;
    let report = args.solver.run(&inst, &x0, args.eps, args.max_iter)?;
    emit_json(args.out, "solve_report.json", &report)?;
    Ok(match report.status {
        SolveStatus::Converged => {
            // re-verify rather than trust the solver's own stopping test
            let gap = inst.fixed_point_gap(&report.final_vector(), Accounting::Diagnostic)?;
            if gap <= args.eps {
                0
            } else {
                eprintln!("reported convergence but the recomputed fixed-point gap is {gap:e}");
                EXIT_VERIFICATION
            }
        }
        status => {
            eprintln!(
                "{}: fixed-point gap {:e} after {} iterations",
                status.as_str(),
                report.fp_gap,
                report.iters
            );
            EXIT_NOT_CONVERGED
        }
    })
}

fn reduce(args: ReduceArgs) -> Outcome {
    let output = match args.from {
        Source::Vi | Source::Fp => {
            let spec: InstanceSpec = read_json(&args.input)?;
            let source = spec.build()?;
            let shift = source.shift();
            let dom = source.domain().clone();
            let (inst, lambda) = match args.from {
                Source::Vi => (
                    vi_to_ps(shift, shift.lipschitz(), args.eps, args.eps_prime, dom)?,
                    args.eps / args.eps_prime,
                ),
                _ => (
                    fp_to_ps(shift, shift.lipschitz(), args.eps, args.eps_prime, dom)?,
                    damping(args.eps, args.eps_prime)?,
                ),
            };
            json!({
                "instance": InstanceSpec::from(&inst),
                "rho": inst.rho(),
                "provenance": {
                    "from": format!("{:?}", args.from).to_lowercase(),
                    "eps": args.eps,
                    "epsPrime": args.eps_prime,
                    "lambda": lambda,
                    "M": Value::Null,
                },
            })
        }
        Source::Game => {
            let spec: GameSpec = read_json(&args.input)?;
            let game = spec.build()?;
            let enc = encode_endogenous(&game, args.scale)?;
            let (payoffs, offsets) = endogenous_payoffs(&enc)?;
            json!({
                "instance": enc,
                "payoffs": GameSpec::from(&payoffs),
                "columnOffsets": offsets,
                "provenance": {
                    "from": "game",
                    "eps": Value::Null,
                    "epsPrime": Value::Null,
                    "lambda": Value::Null,
                    "M": args.scale,
                },
            })
        }
    };
    emit_json(args.out, "reduction.json", &output)?;
    Ok(0)
}

fn sperner(args: SpernerArgs) -> Outcome {
    let coloring = match args.coloring.as_str() {
        "canonical" => Coloring::Canonical,
        "planted" => Coloring::Planted { center: None },
        path => read_json(Path::new(path))?,
    };
    let inst = SpernerInstance::new(args.n, args.k, coloring)?;
    let admissibility = inst.validate_admissible()?;
    let solution = inst.find_vi_solution(args.tol)?;
    let triangle = inst.recover_trichromatic(solution.point)?;
    let listed = inst.brute_force_trichromatic()?;
    let matches = listed.contains(&triangle);
    emit_json(
        args.out,
        "sperner.json",
        &json!({
            "n": args.n,
            "k": args.k,
            "admissibilityExhaustive": admissibility.exhaustive,
            "point": solution.point,
            "gap": solution.gap,
            "target": solution.target,
            "triangle": triangle,
            "bruteForce": listed,
            "matches": matches,
        }),
    )?;
    if !matches {
        eprintln!("recovered triangle {triangle:?} is not in the brute-force list");
        return Ok(EXIT_VERIFICATION);
    }
    Ok(0)
}

fn stratclass(args: StratclassArgs) -> Outcome {
    let spec: GraphSpec = read_json(&args.graph)?;
    let graph = spec.build()?;
    let inst = build_maxcut_gadget(&graph)?;
    let labels = match args.labels {
        Starts::Any => StartLabels::Any,
        Starts::VertexOnly => StartLabels::VertexOnly,
    };
    let outcomes = multi_start_search(&inst, args.starts, args.seed, labels)?;
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut all_local = true;
    for out in &outcomes {
        let side = recover_cut(&inst, &out.classifier)?;
        let local = graph.is_local_maxcut(&side);
        all_local &= local;
        runs.push((out, side, local));
    }
    let best = runs
        .iter()
        .max_by(|a, b| graph.cut_weight(&a.1).total_cmp(&graph.cut_weight(&b.1)))
        .ok_or_else(|| Failure::bad_input(anyhow!("--starts must be positive")))?;
    let cut: Vec<&Value> = graph
        .names()
        .iter()
        .zip(&best.1)
        .filter(|(_, &s)| s)
        .map(|(n, _)| n)
        .collect();
    emit_json(
        args.out,
        "stratclass.json",
        &json!({
            "classifier": best.0.classifier,
            "utility": best.0.utility,
            "cut": cut,
            "cutWeight": graph.cut_weight(&best.1),
            "localMaxCut": best.2,
            "runs": runs.iter().map(|(o, side, local)| json!({
                "utility": o.utility,
                "flips": o.path.len(),
                "cutWeight": graph.cut_weight(side),
                "localMaxCut": local,
            })).collect::<Vec<_>>(),
            "allLocalMaxCuts": all_local,
        }),
    )?;
    if !all_local {
        eprintln!("some local optima do not project to locally maximal cuts");
        return Ok(EXIT_VERIFICATION);
    }
    Ok(0)
}

fn sweep(args: SweepArgs, threads: Option<usize>) -> Outcome {
    let spec: SweepSpec = read_json(&args.spec)?;
    spec.validate()?;
    let rows = run_sweep(&spec, threads)?;
    let provenance = SweepProvenance::new(&spec);
    let out = resolve_out(args.out, "sweep.csv");
    emit_text(out.clone(), "sweep.csv", &to_csv(&rows))?;
    match out {
        Some(path) => emit_json(
            Some(path.with_extension("provenance.json")),
            "",
            &provenance,
        )?,
        None => eprintln!(
            "{}",
            serde_json::to_string(&provenance).map_err(Failure::bad_input)?
        ),
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let threads = cli.threads.map(|t| t.clamp(1, available));
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Reduce(a) => reduce(a),
        Command::Sperner(a) => sperner(a),
        Command::Stratclass(a) => stratclass(a),
        Command::Sweep(a) => sweep(a, threads),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
