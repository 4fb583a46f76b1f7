//! `tbmc` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tbmc::altmin::{refine, DEFAULT_MAX_ITER};
use tbmc::eval::{eval_experiment, phase_experiment, ratio_experiment, RatioStats};
use tbmc::heuristics::{average_rank1, partition_rank1};
use tbmc::io::{
    read_movielens, read_triplets_csv, write_id_map, write_tiling, write_triplets_csv, DEFAULT_THRESHOLD,
};
use tbmc::lp::{build_lp, lp_rank1_with, LpSolver};
use tbmc::synth::{gen_block_diagonal, gen_planted, BlockDiagSpec, GroundTruth, PlantedSpec};
use tbmc::tbmc::{tbmc, Rank1Method, TbmcConfig};
use tbmc::{Error, ObservedBinaryMatrix, Tile};

#[derive(Parser)]
#[command(name = "tbmc", version, about = "Low-rank binary matrix completion by recursive tiling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best rank-one tile of a matrix, as JSON.
    Rank1(Rank1Args),
    /// Complete a matrix with TBMC; writes U.csv, V.csv and report.json.
    Complete(CompleteArgs),
    /// Generate a synthetic instance.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Approximation ratios against the exact optimum (CSV).
    Ratio(RatioArgs),
    /// Recovery proportions on block-diagonal instances (CSV).
    Phase(PhaseArgs),
    /// Held-out proportional error of TBMC (CSV).
    Eval(EvalArgs),
    /// Convert a dataset to a triplets CSV.
    #[command(subcommand)]
    Ingest(IngestCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Lp,
    Average,
    Partition,
}

impl From<Method> for Rank1Method {
    fn from(m: Method) -> Self {
        match m {
            Method::Lp => Rank1Method::Lp,
            Method::Average => Rank1Method::Average,
            Method::Partition => Rank1Method::Partition,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Simplex,
    MinCut,
    Auto,
}

impl From<Solver> for LpSolver {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Simplex => LpSolver::Simplex,
            Solver::MinCut => LpSolver::MinCut,
            Solver::Auto => LpSolver::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Triplets,
    Movielens,
}

#[derive(Args)]
struct InputArgs {
    /// Input file.
    #[arg(long)]
    input: PathBuf,
    /// Input format.
    #[arg(long, value_enum, default_value = "triplets")]
    format: Format,
    /// Ratings at or above this are ones (movielens format only).
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

impl InputArgs {
    fn load(&self) -> tbmc::Result<ObservedBinaryMatrix> {
        match self.format {
            Format::Triplets => read_triplets_csv(&self.input),
            Format::Movielens => Ok(read_movielens(&self.input, self.threshold)?.matrix),
        }
    }
}

#[derive(Args)]
struct Rank1Args {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "lp")]
    method: Method,
    /// Refine the tile by alternating minimisation.
    #[arg(long)]
    am: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    am_max_iter: usize,
    /// Seed for the partition heuristic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// LP algorithm; auto uses the simplex up to 5000 constraints.
    #[arg(long, value_enum, default_value = "auto")]
    lp_solver: Solver,
    /// Print the LP in CPLEX LP format to stderr.
    #[arg(long)]
    dump_lp: bool,
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Scaled Hamming tolerance for accepting a tile.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    /// Maximum number of tiles [default: min(rows, 256)].
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_enum, default_value = "lp")]
    method: Method,
    #[arg(long)]
    am: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    am_max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    lp_solver: Solver,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Noisy planted tiles on contiguous row blocks.
    Planted(PlantedArgs),
    /// Block-diagonal matrix with geometrically shrinking blocks.
    Blockdiag(BlockDiagArgs),
}

#[derive(Args)]
struct PlantedModel {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Number of tiles.
    #[arg(long, default_value_t = 1)]
    tiles: usize,
    /// Fraction of columns per tile.
    #[arg(long, default_value_t = 0.7)]
    tau: f64,
    /// Fraction of cells flipped.
    #[arg(long, default_value_t = 0.03)]
    eps: f64,
    /// Fraction of cells observed.
    #[arg(long, default_value_t = 0.7)]
    rho: f64,
}

#[derive(Args)]
struct PlantedArgs {
    #[command(flatten)]
    model: PlantedModel,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Observed matrix as triplets CSV.
    #[arg(long)]
    out: PathBuf,
    /// Directory for the ground truth [default: <out>.truth].
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct BlockDiagArgs {
    #[arg(long, default_value_t = 512)]
    m: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Ratio between consecutive block sizes.
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Planted,
}

#[derive(Args)]
struct RatioArgs {
    #[arg(long, value_enum, default_value = "planted")]
    model: Model,
    #[command(flatten)]
    planted: PlantedModel,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lp,average,partition")]
    methods: Vec<Method>,
    /// Also report every method refined by alternating minimisation.
    #[arg(long)]
    am: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-trial CSV.
    #[arg(long)]
    trials_out: Option<PathBuf>,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, value_delimiter = ',', default_value = "128")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    a_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    rho_grid: Vec<f64>,
    /// Number of blocks.
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Grid CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Heatmap of the 97%-accuracy proportion.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Dataset name in the report [default: input file stem].
    #[arg(long)]
    dataset: Option<String>,
    /// Fraction of observed entries used for training.
    #[arg(long, default_value_t = 0.7)]
    rho: f64,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "lp")]
    methods: Vec<Method>,
    /// Also report every method refined by alternating minimisation.
    #[arg(long)]
    am: bool,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "auto")]
    lp_solver: Solver,
    /// Report CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum IngestCommand {
    /// MovieLens `user item rating timestamp` ratings.
    Movielens(IngestArgs),
    /// Triplets CSV (validated and normalised).
    Triplets(IngestArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Ratings at or above this are ones.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Triplets CSV; id maps go next to it for movielens.
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(Error::ConfigInvalid(_) | Error::SpecInvalid(_)) => 1,
            Failure::Lib(Error::NumericalFailure(_)) => 3,
            Failure::Lib(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn write_file(path: &Path, text: &str) -> tbmc::Result<()> {
    Ok(fs::write(path, text)?)
}

fn emit(out: Option<&PathBuf>, text: &str) -> tbmc::Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

fn with_am(methods: &[Method], am: bool) -> Vec<(Rank1Method, bool)> {
    let mut out: Vec<(Rank1Method, bool)> = methods.iter().map(|&m| (m.into(), false)).collect();
    if am {
        out.extend(methods.iter().map(|&m| (m.into(), true)));
    }
    out
}

#[derive(Serialize)]
struct Rank1Report {
    method: Rank1Method,
    am: bool,
    rows: usize,
    cols: usize,
    observed: usize,
    ones: usize,
    error: usize,
    tile: Tile,
    lp: Option<LpReport>,
    am_sweeps: Option<usize>,
}

#[derive(Serialize)]
struct LpReport {
    objective: f64,
    iterations: usize,
    max_integrality_gap: f64,
}

fn rank1(a: Rank1Args) -> Outcome {
    let m = a.input.load()?;
    let view = m.view();
    if a.dump_lp {
        eprint!("{}", build_lp(&view).to_lp_text());
    }
    let method: Rank1Method = a.method.into();
    let (mut tile, lp) = match method {
        Rank1Method::Lp => {
            let sol = lp_rank1_with(&view, a.lp_solver.into())?;
            let report = LpReport {
                objective: sol.objective,
                iterations: sol.iterations,
                max_integrality_gap: sol.max_integrality_gap,
            };
            (sol.tile, Some(report))
        }
        Rank1Method::Average => (average_rank1(&view), None),
        Rank1Method::Partition => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
            (partition_rank1(&view, &mut rng), None)
        }
    };
    let mut am_sweeps = None;
    if a.am {
        let r = refine(&view, &tile, a.am_max_iter)?;
        am_sweeps = Some(r.sweeps);
        tile = r.tile;
    }
    let report = Rank1Report {
        method,
        am: a.am,
        rows: m.n_rows(),
        cols: m.n_cols(),
        observed: m.n_observed(),
        ones: m.n_ones(),
        error: tile.error_on(&view)?,
        tile,
        lp,
        am_sweeps,
    };
    emit(None, &json(&report))?;
    Ok(())
}

fn complete(a: CompleteArgs) -> Outcome {
    let m = a.input.load()?;
    let cfg = TbmcConfig {
        tolerance: a.tol,
        k_max: a.k_max,
        method: a.method.into(),
        use_am: a.am,
        am_max_iter: a.am_max_iter,
        rng_seed: a.seed,
        lp_solver: a.lp_solver.into(),
    };
    let (tiling, report) = tbmc(&m, &cfg)?;
    write_tiling(&tiling, &a.out)?;
    let text = json(&report);
    write_file(&a.out.join("report.json"), &text)?;
    emit(None, &text)?;
    Ok(())
}

fn write_truth(out: &Path, truth: Option<PathBuf>, gt: &GroundTruth, spec_kv: &str) -> tbmc::Result<()> {
    let dir = truth.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".truth");
        PathBuf::from(p)
    });
    write_tiling(&gt.tiling, &dir)?;
    let cells = gt
        .full
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &b)| (i, j, b)));
    let full = ObservedBinaryMatrix::from_triplets(gt.full.len(), gt.tiling.n_cols(), cells)?;
    write_triplets_csv(&full, dir.join("full.csv"))?;
    write_file(&dir.join("spec.txt"), spec_kv)
}

fn synth(cmd: SynthCommand) -> Outcome {
    match cmd {
        SynthCommand::Planted(a) => {
            let spec = PlantedSpec {
                m: a.model.m,
                n: a.model.n,
                k_tiles: a.model.tiles,
                tau: a.model.tau,
                eps: a.model.eps,
                rho: a.model.rho,
                seed: a.seed,
            };
            let (m, gt) = gen_planted(&spec)?;
            write_triplets_csv(&m, &a.out)?;
            write_truth(&a.out, a.truth, &gt, &spec.to_kv())?;
        }
        SynthCommand::Blockdiag(a) => {
            let spec = BlockDiagSpec {
                m: a.m,
                k: a.k,
                a: a.a,
                rho: a.rho,
                seed: a.seed,
            };
            let (m, gt) = gen_block_diagonal(&spec)?;
            write_triplets_csv(&m, &a.out)?;
            write_truth(&a.out, a.truth, &gt, &spec.to_kv())?;
        }
    }
    Ok(())
}

fn ratio(a: RatioArgs) -> Outcome {
    let Model::Planted = a.model;
    let spec = PlantedSpec {
        m: a.planted.m,
        n: a.planted.n,
        k_tiles: a.planted.tiles,
        tau: a.planted.tau,
        eps: a.planted.eps,
        rho: a.planted.rho,
        seed: 0,
    };
    let mut summary = format!("{}\n", RatioStats::SUMMARY_HEADER);
    let mut trials = format!("{}\n", RatioStats::TRIAL_HEADER);
    for (method, am) in with_am(&a.methods, a.am) {
        let stats = ratio_experiment(&spec, method, am, a.trials, a.seed, a.jobs)?;
        summary.push_str(&stats.summary_row());
        summary.push('\n');
        trials.push_str(&stats.trial_rows());
    }
    if let Some(p) = &a.trials_out {
        write_file(p, &trials)?;
    }
    emit(None, &summary)?;
    Ok(())
}

fn phase(a: PhaseArgs) -> Outcome {
    let grid = phase_experiment(&a.sizes, &a.a_grid, &a.rho_grid, a.k, a.trials, a.seed, a.jobs)?;
    if let Some(p) = &a.svg {
        write_file(p, &grid.to_svg())?;
    }
    emit(a.out.as_ref(), &grid.to_csv())?;
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    if !(a.rho > 0.0 && a.rho < 1.0) {
        return Err(Failure::Usage(format!("--rho must lie strictly between 0 and 1, got {}", a.rho)));
    }
    let m = a.input.load()?;
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.input
            .input
            .file_stem()
            .map_or("dataset".into(), |s| s.to_string_lossy().into_owned())
    });
    let base = TbmcConfig {
        tolerance: a.tol,
        k_max: a.k_max,
        lp_solver: a.lp_solver.into(),
        ..TbmcConfig::default()
    };
    let methods = with_am(&a.methods, a.am);
    let report = eval_experiment(&m, &dataset, a.rho, &base, &methods, a.trials, a.seed, a.jobs)?;
    emit(a.out.as_ref(), &report.to_csv())?;
    Ok(())
}

fn ingest(cmd: IngestCommand) -> Outcome {
    match cmd {
        IngestCommand::Movielens(a) => {
            let r = read_movielens(&a.input, a.threshold)?;
            write_triplets_csv(&r.matrix, &a.out)?;
            let sibling = |suffix: &str| {
                let mut p = a.out.as_os_str().to_owned();
                p.push(suffix);
                PathBuf::from(p)
            };
            write_id_map(&r.users, sibling(".users.csv"))?;
            write_id_map(&r.items, sibling(".items.csv"))?;
        }
        IngestCommand::Triplets(a) => {
            let m = read_triplets_csv(&a.input)?;
            write_triplets_csv(&m, &a.out)?;
        }
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
        Command::Rank1(a) => rank1(a),
        Command::Complete(a) => complete(a),
        Command::Synth(c) => synth(c),
        Command::Ratio(a) => ratio(a),
        Command::Phase(a) => phase(a),
        Command::Eval(a) => eval(a),
        Command::Ingest(c) => ingest(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}
