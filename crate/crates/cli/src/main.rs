use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vomc::bench::{
    compare_predictors, run_experiment, verify_with_golden, write_outputs, ExperimentConfig, PriorKind, RateCurve,
    RateUnit, VerifyLevel,
};
use vomc::coder::{self, CodeStream};
use vomc::model::{CtwPrior, SourceSequence};
use vomc::predictor::{PredictorRegistry, PredictorSpec};
use vomc::stats::CountTable;
use vomc::syntf::{simulate, ConstructionConfig};

#[derive(Parser)]
#[command(name = "vomc", version, about = "Variable-order Markov chain prediction and compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a test tree and its sequence.
    Gen(GenArgs),
    /// Run predictors over a test suite and write rate curves.
    Eval(EvalArgs),
    /// Arithmetic-code a sequence file into a container.
    Compress(CompressArgs),
    /// Decode a container back into a sequence file.
    Decompress(DecompressArgs),
    /// Run the equivalence and golden suites.
    Verify(VerifyArgs),
    /// Summarize curve CSVs from one or more runs.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Ctw,
    Nonctw,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Nats,
    Bits,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

#[derive(Args, Clone)]
struct PriorArgs {
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 0.15)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    alphabet: usize,
}

impl PriorArgs {
    fn prior(&self) -> Result<CtwPrior> {
        Ok(CtwPrior::new(
            vomc::model::Alphabet::new(self.alphabet)?,
            self.depth,
            self.lambda,
            vec![self.alpha; self.alphabet],
        )?)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long = "prior", value_enum, default_value = "ctw")]
    source: PriorArg,
    /// Sequence length.
    #[arg(long, default_value_t = 512)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Index of the tree within the seeded suite.
    #[arg(long, default_value_t = 0)]
    tree_id: usize,
    /// Also write the suffix count table as CSV.
    #[arg(long)]
    counts: bool,
    /// Also write every layer of the transformer construction as JSON.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    prior_args: PriorArgs,
    #[arg(long, value_enum, default_value = "ctw")]
    prior: PriorArg,
    #[arg(long, default_value_t = 256)]
    trees: usize,
    /// Symbols generated per tree.
    #[arg(long, default_value_t = 5120)]
    len: usize,
    /// Context window; each tree yields len / window windows.
    #[arg(long, default_value_t = 512)]
    window: usize,
    /// Comma-separated predictors, e.g. ctw,blend,ppm:3,syntf,genie.
    #[arg(long, default_value = "ctw,genie")]
    predictors: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "nats")]
    unit: UnitArg,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct CompressArgs {
    /// Sequence JSON as written by `gen`.
    input: PathBuf,
    #[arg(long, default_value = "ctw")]
    predictor: String,
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DecompressArgs {
    input: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "quick")]
    level: LevelArg,
    /// PPM count table to compare against instead of the bundled one.
    #[arg(long)]
    golden: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Curve CSVs; the predictor name is taken from the file stem.
    #[arg(required = true)]
    curves: Vec<PathBuf>,
    /// Write the summary as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_sequence(path: &Path) -> Result<SourceSequence> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn gen(args: GenArgs) -> Result<()> {
    let config = ExperimentConfig {
        prior: match args.source {
            PriorArg::Ctw => PriorKind::Ctw,
            PriorArg::Nonctw => PriorKind::NonCtw,
        },
        depth: args.prior.depth,
        lambda: args.prior.lambda,
        alpha: args.prior.alpha,
        alphabet: args.prior.alphabet,
        tree_len: args.len,
        seed: args.seed,
        ..Default::default()
    };
    let prior = args.prior.prior()?;
    let (tree, padding, body) = config.sample_tree(args.tree_id, args.prior.depth)?;
    let mut seq = SourceSequence::new(prior.alphabet(), padding, body)?;
    seq.tree_id = args.tree_id as u64;
    seq.seed = args.seed;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("tree.json"), tree.to_json()? + "\n")?;
    fs::write(args.out.join("sequence.json"), serde_json::to_string(&seq)? + "\n")?;
    if args.counts {
        let mut table = CountTable::new(prior.alphabet(), prior.depth, &seq.padding)?;
        for &s in &seq.body {
            table.update(s)?;
        }
        fs::write(args.out.join("counts.csv"), table.dump_csv())?;
    }
    if args.trace {
        let (_, sim) = simulate(ConstructionConfig::new(prior, seq.len()).with_trace(), &seq)?;
        fs::write(args.out.join("trace.json"), sim.trace_json()? + "\n")?;
    }
    println!("wrote {} symbols from a {}-leaf tree to {}", seq.len(), tree.shape().leaf_count(), args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let p = &args.prior_args;
    let config = ExperimentConfig {
        prior: match args.prior {
            PriorArg::Ctw => PriorKind::Ctw,
            PriorArg::Nonctw => PriorKind::NonCtw,
        },
        depth: p.depth,
        lambda: p.lambda,
        alpha: p.alpha,
        alphabet: p.alphabet,
        trees: args.trees,
        tree_len: args.len,
        window: args.window,
        predictors: args.predictors.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        seed: args.seed,
        unit: match args.unit {
            UnitArg::Nats => RateUnit::Nats,
            UnitArg::Bits => RateUnit::Bits,
        },
    };
    let registry = PredictorRegistry::default();
    let output = run_experiment(&config, &registry)?;
    let summary = write_outputs(&args.out, &output)?;
    print_summary(&summary);
    if let Some(f) = &output.failure {
        bail!("run stopped early ({f}); partial results in {}", args.out.display());
    }
    Ok(())
}

fn print_summary(summary: &vomc::bench::Summary) {
    println!("{:<28} {:>10} {:>10} {:>10}", "predictor", "average", "early", "late");
    for r in &summary.rows {
        println!("{:<28} {:>10.4} {:>10.4} {:>10.4}", r.predictor, r.window_average, r.early, r.late);
    }
    for o in &summary.orderings {
        println!("[{}] {}", if o.holds { "ok" } else { "no" }, o.claim);
    }
}

fn compress(args: CompressArgs) -> Result<()> {
    let seq = read_sequence(&args.input)?;
    let prior = args.prior.prior()?;
    if prior.alphabet() != seq.alphabet {
        bail!("--alphabet {} does not match the sequence's {}", prior.alphabet().size(), seq.alphabet.size());
    }
    let spec: PredictorSpec = args.predictor.parse()?;
    let stream = coder::encode(&seq, &spec, &prior, &PredictorRegistry::default())?;
    let bytes = stream.to_bytes();
    fs::write(&args.out, &bytes)?;
    println!(
        "{} symbols -> {} payload bytes ({:.4} bits/symbol), {} bytes total",
        seq.len(),
        stream.payload.len(),
        8.0 * stream.payload.len() as f64 / seq.len().max(1) as f64,
        bytes.len()
    );
    Ok(())
}

fn decompress(args: DecompressArgs) -> Result<()> {
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let stream = CodeStream::from_bytes(&bytes)?;
    let seq = coder::decode(&stream, &PredictorRegistry::default())?;
    fs::write(&args.out, serde_json::to_string(&seq)? + "\n")?;
    println!("{} symbols", seq.len());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let golden = args.golden.as_deref().map(fs::read_to_string).transpose()?;
    let level = match args.level {
        LevelArg::Quick => VerifyLevel::Quick,
        LevelArg::Full => VerifyLevel::Full,
    };
    let report = verify_with_golden(level, golden.as_deref());
    for s in &report.suites {
        println!("{:<22} {} {:>7.2}s  {}", s.name, if s.passed { "PASS" } else { "FAIL" }, s.seconds, s.detail);
    }
    if !report.passed() {
        println!("failing suites: {}", report.failing().join(", "));
    }
    Ok(report.passed())
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut curves = Vec::new();
    for path in &args.curves {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
        let name = stem.strip_prefix("curve_").unwrap_or(stem);
        curves.push(RateCurve::from_csv(name, &text)?);
    }
    let summary = compare_predictors(&curves)?;
    print_summary(&summary);
    if let Some(out) = args.out {
        fs::write(out, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Compress(a) => compress(a).map(|_| true),
        Command::Decompress(a) => decompress(a).map(|_| true),
        Command::Verify(a) => verify(a),
        Command::Compare(a) => compare(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
