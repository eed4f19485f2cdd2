use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdwlda::evalkit::{
    load_csv, projected_csv, read_feature_csv, read_labeled_csv, run_on_data, CsvError, EvalError,
    ExperimentConfig, LabelColumn, Method, PcaBasis,
};
use sdwlda::oracle::compare_dim2;
use sdwlda::wlda::{fit_bisection, read_model, write_model, FitError, ModelIoError, WldaConfig};

#[derive(Parser)]
#[command(name = "sdwlda", version, about = "Worst-case LDA via dual SDP feasibility bisection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a projection and write it as a model file.
    Fit(FitArgs),
    /// Project a CSV with a saved model.
    Transform(TransformArgs),
    /// Repeated train/test splits with k-NN error.
    Eval(EvalArgs),
    /// Compare the solver with an exhaustive grid on random 2-D problems.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Relative bisection tolerance.
    #[arg(long, default_value_t = 1e-3)]
    sigma: f64,
    /// Infeasibility certificate threshold.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// Relative tolerance of the primal feasibility check.
    #[arg(long = "primal-tol", default_value_t = 1e-4)]
    primal_tol: f64,
    #[arg(long = "delta-cap", default_value_t = 1e6)]
    delta_cap: f64,
    /// Per-iteration solver trace on stderr.
    #[arg(long)]
    verbose: bool,
}

impl SolverArgs {
    fn config(&self, r: usize) -> WldaConfig {
        let mut c = WldaConfig::new(r);
        c.sigma = self.sigma;
        c.delta_cap = self.delta_cap;
        c.feasibility.epsilon = self.epsilon;
        c.feasibility.primal_tol = self.primal_tol;
        c.feasibility.verbose = self.verbose;
        c
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column: 0-based index or header name.
    #[arg(long = "label-col")]
    label_col: LabelColumn,
    /// Target dimension.
    #[arg(long)]
    dim: usize,
    /// Reduce to this many principal components first.
    #[arg(long)]
    pca: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column to carry through to the output.
    #[arg(long = "label-col")]
    label_col: Option<LabelColumn>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long = "label-col")]
    label_col: LabelColumn,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 30)]
    runs: usize,
    #[arg(long = "train-frac", default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long, default_value_t = 5)]
    knn: usize,
    #[arg(long)]
    pca: Option<usize>,
    /// Target dimension (default: classes - 1).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Leave wall-clock fields out of the report.
    #[arg(long = "no-timing")]
    no_timing: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct OracleArgs {
    /// Two-dimensional grid comparison (the only suite available).
    #[arg(long, required = true)]
    dim2: bool,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

enum Failure {
    Usage(String),
    Data(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        let m = e.to_string();
        match e {
            FitError::InvalidConfig(_) => Failure::Usage(m),
            FitError::Data(_) | FitError::Degenerate | FitError::WidthMismatch { .. } => Failure::Data(m),
            FitError::Linalg(_) | FitError::Solve(_) | FitError::Uncertified { .. } => Failure::Solver(m),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Fit(f) => f.into(),
            EvalError::InvalidConfig(m) => Failure::Usage(format!("invalid configuration: {m}")),
            EvalError::Linalg(l) => Failure::Solver(l.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<CsvError> for Failure {
    fn from(e: CsvError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelIoError> for Failure {
    fn from(e: ModelIoError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_failure(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn fit(args: FitArgs) -> Result<(), Failure> {
    let loaded = load_csv(&args.data, &args.label_col)?;
    let mut data = loaded.dataset;
    let mut pca = None;
    if let Some(p) = args.pca {
        let basis = PcaBasis::fit(data.samples(), p)?;
        let reduced = basis.apply(data.samples()).map_err(|e| Failure::Solver(e.to_string()))?;
        data = data.with_samples(reduced).map_err(|e| Failure::Data(e.to_string()))?;
        pca = Some(basis);
    }
    let mut model = fit_bisection(&data, &args.solver.config(args.dim))?;
    if let Some(basis) = pca {
        model = model.with_pca(basis);
    }
    let file = fs::File::create(&args.out).map_err(|e| io_failure(&args.out, e))?;
    let mut out = BufWriter::new(file);
    write_model(&model.to_saved(), &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| io_failure(&args.out, e))?;
    println!(
        "delta_star={} ratio_achieved={} projector_ratio={} unbounded={} bisection_steps={} dual_iterations={}",
        model.delta_star,
        model.ratio_achieved,
        model.projector_ratio,
        model.unbounded,
        model.history.len(),
        model.dual_iterations
    );
    Ok(())
}

fn transform(args: TransformArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.model).map_err(|e| io_failure(&args.model, e))?;
    let model = read_model(BufReader::new(file))?;
    let input = fs::File::open(&args.data).map_err(|e| io_failure(&args.data, e))?;
    let (x, labels) = match &args.label_col {
        Some(col) => {
            let loaded = read_labeled_csv(input, col)?;
            let names: Vec<String> = loaded
                .dataset
                .labels()
                .iter()
                .map(|&k| loaded.label_names[k].clone())
                .collect();
            (loaded.dataset.samples().clone(), Some(names))
        }
        None => (read_feature_csv(input)?.1, None),
    };
    let y = model.projection.transform(&x)?;
    fs::write(&args.out, projected_csv(&y, labels.as_deref())).map_err(|e| io_failure(&args.out, e))?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let mut config = ExperimentConfig::new(&args.data, args.label_col.clone(), args.method);
    config.runs = args.runs;
    config.train_fraction = args.train_frac;
    config.k = args.knn;
    config.pca = args.pca;
    config.r = args.dim;
    config.seed = args.seed;
    config.wlda = args.solver.config(1);
    let loaded = load_csv(&args.data, &args.label_col)?;
    let report = run_on_data(&loaded, &config)?;
    let timing = !args.no_timing;
    print!("{}", report.render_table(timing));
    if let Some(path) = &args.report {
        fs::write(path, report.render(timing)).map_err(|e| io_failure(path, e))?;
    }
    if report.failures == report.runs.len() {
        return Err(Failure::Solver("every run failed".into()));
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Failure> {
    debug_assert!(args.dim2);
    let results = compare_dim2(args.instances, args.seed, &args.solver.config(1))?;
    println!("{:>6} {:>7} {:>14} {:>14} {:>12} {:>10}", "seed", "classes", "grid", "solver", "deviation", "tolerance");
    for r in &results {
        println!(
            "{:>6} {:>7} {:>14.6} {:>14.6} {:>12.3e} {:>10.3e}{}",
            r.seed,
            r.classes,
            r.grid_delta,
            r.solver_delta,
            r.deviation,
            r.tolerance,
            if r.passed() { "" } else { "  EXCEEDS" }
        );
    }
    let max_dev = results.iter().map(|r| r.deviation).fold(0.0, f64::max);
    let failed = results.iter().filter(|r| !r.passed()).count();
    println!("max_deviation={max_dev:.6e} within_tolerance={}/{}", results.len() - failed, results.len());
    if failed > 0 {
        return Err(Failure::Solver(format!("{failed} instance(s) outside tolerance")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Transform(a) => transform(a),
        Command::Eval(a) => eval(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
