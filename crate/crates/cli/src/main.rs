use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entailment::embeddings::{self, EmbeddingTable, Format};
use entailment::eval::{self, make_folds, EvalRequest, Method};
use entailment::format::sig9;
use entailment::inference::{graph_infer, EntailmentGraph, SolverConfig};
use entailment::interp::{gradient_grid_with, pair_score, write_grid_csv, GradientModel, GridRange, InterpKind, DEFAULT_SHIFT};
use entailment::par::{self, Exec};
use entailment::trainer::{self, MappedOp, TrainConfig};
use entailment::{Interpretation, Operator};

#[derive(Parser)]
#[command(name = "entail", version, about = "Entailment scoring, evaluation, training and inference over word embeddings")]
struct Cli {
    /// Worker threads for batch workloads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run batch workloads on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the entailment score of W1 => W2.
    Score(ScoreArgs),
    /// Evaluate scoring methods on a labelled pair file and print a report.
    Eval(EvalArgs),
    /// Train one mapping per cross-validation fold and save the models.
    Train(TrainArgs),
    /// Run mean-field inference on an entailment graph file.
    Graph(GraphArgs),
    /// Write a one-dimensional gradient grid as CSV.
    Gradgrid(GradgridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Binary,
    Text,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Binary => Format::Binary,
            FormatArg::Text => Format::Text,
        }
    }
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Embedding file (word2vec binary, or whitespace text).
    #[arg(long, env = "ENTAIL_EMBEDDINGS")]
    embeddings: PathBuf,

    /// Embedding file format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    embeddings_format: Option<FormatArg>,
}

impl EmbeddingArgs {
    fn load(&self) -> entailment::Result<EmbeddingTable> {
        let table = embeddings::load(&self.embeddings, self.embeddings_format.map(Format::from))?;
        eprintln!("loaded {} vectors of dimension {} from {}", table.len(), table.dim(), self.embeddings.display());
        Ok(table)
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,

    #[arg(long, default_value = "unkdup")]
    interp: Interpretation,

    /// Shift for the unknown-duplicated interpretation.
    #[arg(long, default_value_t = DEFAULT_SHIFT)]
    shift: f64,

    #[arg(long, default_value = "bwd")]
    op: Operator,

    /// Hyponym.
    w1: String,
    /// Hypernym.
    w2: String,
}

#[derive(Args)]
struct TrainingArgs {
    #[arg(long, default_value_t = 10)]
    folds: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,

    #[arg(long, default_value_t = TrainConfig::default().step_size)]
    step_size: f64,

    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,

    #[arg(long, default_value_t = TrainConfig::default().l2)]
    l2: f64,

    /// Output dimension of the mapping (default: the embedding dimension).
    #[arg(long)]
    d_out: Option<usize>,
}

impl TrainingArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            step_size: self.step_size,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: 0,
            l2: self.l2,
            d_out: self.d_out,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Table,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,

    /// Tab-separated `hyponym hypernym label` file.
    #[arg(long)]
    pairs: PathBuf,

    /// Comma-separated method names, e.g. `logodds-bwd,unkdup-bwd,dot`.
    #[arg(long, default_value = "")]
    methods: String,

    /// Also evaluate every trained mapping by cross-validation.
    #[arg(long)]
    train: bool,

    #[command(flatten)]
    training: TrainingArgs,

    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormat,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    emb: EmbeddingArgs,

    #[arg(long)]
    pairs: PathBuf,

    /// Operator on top of the mapping: bwd, fwd, fact or dif.
    #[arg(long, default_value = "bwd")]
    op: MappedOp,

    #[command(flatten)]
    training: TrainingArgs,

    /// Directory for the per-fold model files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    file: PathBuf,

    #[arg(long, default_value_t = SolverConfig::default().tol)]
    tol: f64,

    #[arg(long, default_value_t = SolverConfig::default().max_sweeps)]
    max_sweeps: usize,

    #[arg(long, default_value_t = SolverConfig::default().damping)]
    damping: f64,

    #[arg(long, default_value_t = SolverConfig::default().clamp)]
    clamp: f64,
}

#[derive(Args)]
struct GradgridArgs {
    /// word2vec, logodds-bwd, dup-bwd or unkdup-bwd.
    #[arg(long)]
    model: GradientModel,

    /// Grid bounds and step, shared by both axes.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "STEP"], allow_negative_numbers = true)]
    range: Vec<f64>,

    #[arg(long, default_value_t = DEFAULT_SHIFT)]
    shift: f64,

    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<entailment::Error> for Failure {
    fn from(e: entailment::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn with_shift(interp: Interpretation, shift: f64) -> Result<Interpretation, Failure> {
    match interp.kind() {
        InterpKind::UnkDup => Interpretation::unk_dup(shift).map_err(|e| Failure::Usage(e.to_string())),
        _ => Ok(interp),
    }
}

fn lookup(table: &EmbeddingTable, word: &str) -> Result<Vec<f64>, Failure> {
    table.lookup(word).ok_or_else(|| Failure::Data(format!("{word:?} is not in the embedding vocabulary")))
}

fn score(args: ScoreArgs) -> CmdResult {
    let interp = with_shift(args.interp, args.shift)?;
    let table = args.emb.load()?;
    let hypo = lookup(&table, &args.w1)?;
    let hyper = lookup(&table, &args.w2)?;
    let s = pair_score(&hypo, &hyper, interp, args.op)?;
    println!("{}", sig9(s.value()));
    Ok(())
}

fn eval(args: EvalArgs, exec: Exec) -> CmdResult {
    let mut methods = Method::parse_list(&args.methods).map_err(|e| Failure::Usage(e.to_string()))?;
    if args.train {
        for op in MappedOp::ALL {
            let m = Method::Mapped(op);
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
    } else if let Some(m) = methods.iter().find(|m| m.is_mapped()) {
        return Err(Failure::Usage(format!("method {m} requires --train")));
    }
    if methods.is_empty() {
        return Err(Failure::Usage("no methods given; use --methods and/or --train".into()));
    }
    let table = args.emb.load()?;
    let pairs = eval::load_pairs(&args.pairs)?;
    let req = EvalRequest {
        methods,
        folds: args.training.folds,
        seed: args.training.seed,
        train: args.training.config(),
        exec,
    };
    let report = eval::run_eval(&table, &pairs, &req)?;
    let text = match args.format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Table => report.to_table(),
    };
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn train(args: TrainArgs, exec: Exec) -> CmdResult {
    let table = args.emb.load()?;
    let all = eval::load_pairs(&args.pairs)?;
    let in_vocab: Vec<_> = all
        .pairs()
        .iter()
        .filter(|p| table.contains(&p.hypo) && table.contains(&p.hyper))
        .cloned()
        .collect();
    let dropped = all.len() - in_vocab.len();
    if in_vocab.is_empty() {
        return Err(entailment::Error::AllPairsOov.into());
    }
    let folded = make_folds(&eval::WordPairDataset::new(in_vocab), args.training.folds, args.training.seed)?;
    let cfg = TrainConfig { seed: args.training.seed, ..args.training.config() };
    let models = trainer::train(&folded, &table, &cfg, args.op, exec)?;
    std::fs::create_dir_all(&args.out)?;

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "fold\ttrain\ttest\tremoved\tfinal_loss\tpath")?;
    for (fold, trained) in folded.folds().expect("folds").iter().zip(&models) {
        let path = args.out.join(format!("fold-{:02}.model", fold.index));
        let mut file = BufWriter::new(File::create(&path)?);
        trained.model.save(&mut file)?;
        file.flush()?;
        let loss = trained.history.last().copied().unwrap_or(f64::NAN);
        writeln!(
            stdout,
            "{}\t{}\t{}\t{}\t{}\t{}",
            fold.index,
            fold.train.len(),
            fold.test.len(),
            fold.removed,
            sig9(loss),
            path.display()
        )?;
    }
    eprintln!("trained {} folds; {dropped} out-of-vocabulary pairs dropped", models.len());
    Ok(())
}

fn graph(args: GraphArgs) -> CmdResult {
    let cfg = SolverConfig {
        max_sweeps: args.max_sweeps,
        tol: args.tol,
        damping: args.damping,
        clamp: args.clamp,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let g = EntailmentGraph::parse(BufReader::new(File::open(&args.file)?))?;
    let res = graph_infer(&g, &cfg)?;
    let mut stdout = io::stdout().lock();
    for (name, x) in &res.assignments {
        let values: Vec<String> = x.iter().map(|&v| sig9(v)).collect();
        writeln!(stdout, "{name}\t{}", values.join("\t"))?;
    }
    if res.converged {
        eprintln!("converged after {} sweeps (delta {})", res.sweeps_used, sig9(res.final_delta));
    } else {
        eprintln!("warning: not converged after {} sweeps (delta {})", res.sweeps_used, sig9(res.final_delta));
    }
    Ok(())
}

fn gradgrid(args: GradgridArgs, exec: Exec) -> CmdResult {
    let [lo, hi, step] = args.range[..] else {
        return Err(Failure::Usage("--range takes LO HI STEP".into()));
    };
    let range = GridRange::new(lo, hi, step).map_err(|e| Failure::Usage(e.to_string()))?;
    let grid = gradient_grid_with(exec, args.model, range, range, args.shift)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    match &args.out {
        Some(path) => write_csv_file(path, &grid)?,
        None => write_grid_csv(io::stdout().lock(), &grid)?,
    }
    Ok(())
}

fn write_csv_file(path: &Path, grid: &[entailment::interp::GridPoint]) -> io::Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write_grid_csv(&mut file, grid)?;
    file.flush()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        par::set_threads(n);
    }
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match cli.command {
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a, exec),
        Command::Train(a) => train(a, exec),
        Command::Graph(a) => graph(a),
        Command::Gradgrid(a) => gradgrid(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `entail --help` for usage");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
