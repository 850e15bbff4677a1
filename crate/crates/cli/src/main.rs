use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graphfb::bench::{run_experiment, summarize, ExperimentSpec};
use graphfb::complete_fb::{coefficients, run_complete, validate_complete, CompleteConfig};
use graphfb::graph::{algebraic_connectivity, onto_decomposition, structure_matrices};
use graphfb::io::{emit_problems, read_problem, read_triple};
use graphfb::sampling::uniform_vector;
use graphfb::verify::{format_table, run_suite, SuiteConfig};
use graphfb::{
    run, validate_config, AlgorithmicGraph, Error, GraphTriple, Preset, RunResult, SolverConfig,
    StopRule, Vector,
};

/// Graph-based forward-backward splitting.
#[derive(Debug, Parser)]
#[command(name = "graphfb", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem file with a preset method or a custom triple.
    Solve(SolveArgs),
    /// Run the random ball-constrained benchmark.
    Bench(BenchArgs),
    /// Run the self-check suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Print the matrices of an algorithmic graph.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    /// Preset name or path to a triple file.
    #[arg(long, default_value = "complete_par")]
    method: String,
    /// Stepsize, or `auto` for twice the cocoercivity constant.
    #[arg(long, default_value = "auto")]
    gamma: String,
    #[arg(long, default_value_t = 0.99)]
    theta: f64,
    /// Stepsize of the complete presets; defaults to gamma / (n - 1).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    /// Index of the stored starting point.
    #[arg(long, default_value_t = 0)]
    start: usize,
    /// Seed of the random start used when the file stores none.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write `k,residual` rows to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `successive` or `guarded`.
    #[arg(long, default_value = "successive")]
    stop: StopRule,
    /// Exit with status 2 when the run does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    n_min: usize,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    #[arg(long, default_value_t = 10)]
    problems: usize,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ring,sequential,parallel,complete_seq,complete_par"
    )]
    methods: Vec<Preset>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.99)]
    theta: f64,
    /// Stepsize as a multiple of the cocoercivity constant.
    #[arg(long, default_value_t = 2.0)]
    gamma_factor: f64,
    #[arg(long, default_value = "successive")]
    stop: StopRule,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write the instances as problem files into this directory instead of running them.
    #[arg(long)]
    emit_problems: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smaller randomized checks.
    #[arg(long)]
    quick: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphPreset {
    Sequential,
    Ring,
    Parallel,
    ParallelUp,
    ParallelDown,
    Complete,
    Biparallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Show {
    Adjacency,
    Degree,
    Incidence,
    Laplacian,
    P,
    Q,
    Onto,
    Connectivity,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    preset: Option<GraphPreset>,
    /// Edge list such as `1-2,2-3,1-3`.
    #[arg(long)]
    edges: Option<String>,
    #[arg(long)]
    n: usize,
    #[arg(long, value_enum, default_value = "all")]
    show: Show,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

/// A failure with its exit status.
struct Failure {
    status: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: 1,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(status);
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Graph(a) => graph(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status)
        }
    }
}

enum Method {
    Preset(Preset),
    Custom(Box<GraphTriple>),
}

fn parse_method(spec: &str, n: usize) -> Result<Method, Error> {
    match spec.parse::<Preset>() {
        Ok(p) => Ok(Method::Preset(p)),
        Err(parse_err) => {
            let path = Path::new(spec);
            if !path.exists() {
                return Err(parse_err);
            }
            let triple = read_triple(path)?;
            if triple.order() != n {
                return Err(Error::DimensionMismatch {
                    what: "triple order",
                    expected: n,
                    found: triple.order(),
                });
            }
            Ok(Method::Custom(Box::new(triple)))
        }
    }
}

fn format_vector(v: &Vector) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn solve(a: SolveArgs) -> CmdResult {
    let loaded = read_problem(&a.problem)?;
    let prob = loaded.instance;
    let (n, d, beta) = (prob.order(), prob.dim(), prob.beta());
    let gamma = match a.gamma.as_str() {
        "auto" => 2.0 * beta,
        s => s
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("--gamma expects a number or `auto`, got `{s}`")))?,
    };
    let w0 = if loaded.starts.is_empty() {
        uniform_vector(&mut ChaCha8Rng::seed_from_u64(a.seed), d, 5.0)
    } else {
        loaded
            .starts
            .get(a.start)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("start {} not in 0..{}", a.start, loaded.starts.len())))?
    };
    let w0 = vec![w0; n - 1];
    let method = parse_method(&a.method, n)?;
    if a.lambda.is_some() && !matches!(method, Method::Preset(p) if p.is_complete()) {
        return Err(Error::Parse("--lambda applies to complete_seq and complete_par only".into()).into());
    }
    let result: RunResult = match method {
        Method::Preset(p) if p.is_complete() => {
            let triple = p.triple(n)?;
            let mut cfg = CompleteConfig::from_generic(gamma, &a.theta.into(), n)
                .with_tol(a.tol)
                .with_max_iters(a.max_iters)
                .with_stop(a.stop)
                .with_trace(a.trace.is_some());
            if let Some(lambda) = a.lambda {
                cfg.lambda = lambda;
            }
            let cfg = validate_complete(&cfg, beta, n)?;
            run_complete(&prob, triple.predecessors(), &cfg, coefficients(n)?.u_from_w(&w0))?
        }
        other => {
            let triple = match other {
                Method::Preset(p) => p.triple(n)?,
                Method::Custom(t) => *t,
            };
            let cfg = SolverConfig::new(gamma, a.theta)
                .with_tol(a.tol)
                .with_max_iters(a.max_iters)
                .with_stop(a.stop)
                .with_trace(a.trace.is_some());
            run(&prob, &triple, &validate_config(&cfg, beta)?, w0)?
        }
    };
    if let (Some(path), Some(trace)) = (&a.trace, &result.residual_trace) {
        let mut out = String::from("k,residual\n");
        for (k, r) in trace.iter().enumerate() {
            out.push_str(&format!("{},{}\n", k + 1, r));
        }
        fs::write(path, out)?;
    }
    println!("method: {}", a.method);
    println!("n: {n}");
    println!("dim: {d}");
    println!("beta: {beta}");
    println!("gamma: {gamma}");
    println!("iterations: {}", result.iterations);
    println!("converged: {}", result.converged);
    println!("final_residual: {}", result.final_residual);
    println!("wall_time_ms: {:.3}", result.wall_time.as_secs_f64() * 1e3);
    println!("x_star: {}", format_vector(&result.x_star));
    if a.strict && !result.converged {
        return Err(Failure {
            status: 2,
            message: format!("not converged after {} iterations", result.iterations),
        });
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CmdResult {
    if a.n_min > a.n_max {
        return Err(Error::Parse(format!("--n-min {} exceeds --n-max {}", a.n_min, a.n_max)).into());
    }
    let spec = ExperimentSpec {
        dim: a.dim,
        n_range: (a.n_min..=a.n_max).collect(),
        problems_per_n: a.problems,
        starts_per_problem: a.starts,
        methods: a.methods,
        tol: a.tol,
        gamma_factor: a.gamma_factor,
        theta: a.theta,
        max_iters: a.max_iters,
        stop: a.stop,
        seed: a.seed,
    };
    if let Some(dir) = &a.emit_problems {
        let paths = emit_problems(&spec, dir)?;
        println!("wrote {} problem files to {}", paths.len(), dir.display());
        return Ok(());
    }
    let table = run_experiment(&spec)?;
    table.write_csv(&a.out)?;
    let summary = summarize(&table)?;
    if let Some(path) = &a.summary {
        summary.write_csv(path)?;
    }
    let not_converged = table.rows.iter().filter(|r| !r.converged).count();
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<14} {:>3} {:>10} {:>8} {:>8}", "method", "n", "median", "min", "max")?;
    for r in &summary.rows {
        writeln!(
            stdout,
            "{:<14} {:>3} {:>10} {:>8} {:>8}",
            r.method, r.n, r.median_iters, r.min_iters, r.max_iters
        )?;
    }
    for (n, order) in &summary.ranking {
        writeln!(stdout, "ranking n={n}: {}", order.join(" < "))?;
    }
    writeln!(stdout, "runs: {}, not converged: {not_converged}", table.rows.len())?;
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    let cfg = if a.quick {
        SuiteConfig::quick(a.seed)
    } else {
        SuiteConfig::standard(a.seed)
    };
    let checks = run_suite(&cfg)?;
    print!("{}", format_table(&checks));
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed > 0 {
        return Err(Failure {
            status: 3,
            message: format!("{failed} checks failed"),
        });
    }
    Ok(())
}

fn parse_edges(list: &str) -> Result<Vec<(usize, usize)>, Error> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|e| {
            let (a, b) = e
                .split_once('-')
                .ok_or_else(|| Error::Parse(format!("edge `{e}` is not of the form i-j")))?;
            let node = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad node `{s}` in edge `{e}`")))
            };
            Ok((node(a)?, node(b)?))
        })
        .collect()
}

fn build_graph(a: &GraphArgs) -> Result<AlgorithmicGraph, Error> {
    let n = a.n;
    match (a.preset, &a.edges) {
        (Some(p), _) => match p {
            GraphPreset::Sequential => AlgorithmicGraph::sequential(n),
            GraphPreset::Ring => AlgorithmicGraph::ring(n),
            GraphPreset::Parallel | GraphPreset::ParallelUp => AlgorithmicGraph::parallel_up(n),
            GraphPreset::ParallelDown => AlgorithmicGraph::parallel_down(n),
            GraphPreset::Complete => AlgorithmicGraph::complete(n),
            GraphPreset::Biparallel => AlgorithmicGraph::biparallel(n),
        },
        (None, Some(list)) => AlgorithmicGraph::new(n, parse_edges(list)?),
        (None, None) => Err(Error::Parse("either --preset or --edges is required".into())),
    }
}

fn format_entry(x: f64) -> String {
    if x == x.round() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.6}")
    }
}

fn render(m: &DMatrix<f64>, format: Format) -> String {
    let cells: Vec<Vec<String>> = m
        .row_iter()
        .map(|r| r.iter().map(|&x| format_entry(x)).collect())
        .collect();
    let mut out = String::new();
    match format {
        Format::Csv => {
            for row in cells {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        Format::Text => {
            let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
            for row in cells {
                let line: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
    }
    out
}

fn graph(a: GraphArgs) -> CmdResult {
    let g = build_graph(&a)?;
    let m = structure_matrices(&g);
    let named: Vec<(&str, Show)> = match a.show {
        Show::All => vec![
            ("adjacency", Show::Adjacency),
            ("degree", Show::Degree),
            ("incidence", Show::Incidence),
            ("laplacian", Show::Laplacian),
            ("p", Show::P),
            ("q", Show::Q),
            ("onto", Show::Onto),
            ("connectivity", Show::Connectivity),
        ],
        one => vec![("", one)],
    };
    let single = named.len() == 1;
    let mut out = String::new();
    for (i, (name, show)) in named.into_iter().enumerate() {
        if !single {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("# {name}\n"));
        }
        let body = match show {
            Show::Adjacency => render(&m.adjacency, a.format),
            Show::Degree => render(&m.degree, a.format),
            Show::Incidence => render(&m.incidence, a.format),
            Show::Laplacian => render(&m.laplacian, a.format),
            Show::P => render(&m.p, a.format),
            Show::Q => render(&m.q, a.format),
            Show::Onto => render(&onto_decomposition(&g)?, a.format),
            Show::Connectivity => format!("{}\n", algebraic_connectivity(&g)?),
            Show::All => unreachable!("expanded above"),
        };
        out.push_str(&body);
    }
    print!("{out}");
    Ok(())
}
