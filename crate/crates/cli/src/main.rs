//! `har`: synthesize, featurize, rank, train, evaluate, benchmark and stream
//! accelerometer activity data.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use har_core::eval::{
    evaluate, plan_for_preset, render_table, run_benchmark, shuffle_split, write_records, EvaluationReport,
    FeatureSubset, SplitMode, DEFAULT_TRAIN_FRACTION,
};
use har_core::features::{featurize, FeatureDataset};
use har_core::ingest::{parse_csv, synthesize_sequence, write_csv, Activity, SynthParams};
use har_core::learn::{
    load_model, rank_features_info_gain, save_model, ClassifierKind, ClassifierSpec, KnnParams, TreeParams,
};
use har_core::stream::{replay, run_stream_with, ElapsedMode, StreamConfig, StreamError};
use har_core::{DEFAULT_SAMPLE_RATE_HZ, WINDOW_LEN};

#[derive(Parser)]
#[command(name = "har", version, about = "Accelerometer human activity recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic accelerometer recording (CSV).
    Synth(SynthArgs),
    /// Median-filter a recording, cut 8-sample windows and write the 42 features (CSV).
    Featurize(FeaturizeArgs),
    /// Rank the features of a labeled feature file by information gain.
    Rank(RankArgs),
    /// Train a classifier on a labeled feature file and save the model.
    Train(TrainArgs),
    /// Score a saved model on a labeled feature file.
    Eval(EvalArgs),
    /// Run a benchmark plan (train and score every row on a shared split).
    Bench(BenchArgs),
    /// Replay a recording through a model and emit JSON-lines recognition events.
    Stream(StreamArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Seed for every random choice.
    #[arg(long, env = "HAR_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Activity to generate, by name or code; repeat for a sequence. Default: all seven in code order.
    #[arg(long = "activity", value_parser = parse_activity)]
    activities: Vec<Activity>,
    /// Seconds per activity.
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    duration: f64,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    sample_rate: f64,
    #[command(flatten)]
    seed: SeedArg,
    /// Output CSV path (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Input recording CSV (accx,accy,accz[,activity]).
    #[arg(short, long)]
    input: PathBuf,
    /// Median filter width (odd; 1 disables filtering).
    #[arg(long, default_value_t = 3)]
    filter_width: usize,
    /// Samples between window starts.
    #[arg(long, default_value_t = WINDOW_LEN)]
    stride: usize,
    /// Sampling rate of the recording in Hz.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    sample_rate: f64,
    /// Output feature CSV path (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    data: PathBuf,
    /// Print only the best N features.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Nb,
    Tree,
    Forest,
    Bagging,
    Knn,
}

impl From<Kind> for ClassifierKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Nb => ClassifierKind::Nb,
            Kind::Tree => ClassifierKind::Tree,
            Kind::Forest => ClassifierKind::Forest,
            Kind::Bagging => ClassifierKind::Bagging,
            Kind::Knn => ClassifierKind::Knn,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    /// Hold out part of the data: train on the first fraction of a seeded shuffle (eval scores the rest).
    #[arg(long)]
    train_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    data: PathBuf,
    /// Classifier to train.
    #[arg(long, value_enum, default_value_t = Kind::Nb)]
    classifier: Kind,
    /// Features to use: `all`, `@table3:<row>` (1.2, 2.2, 3.2, 4.2) or a comma-separated name list.
    #[arg(long, default_value = "all")]
    features: String,
    /// Maximum tree depth (trees, forests, bagging); 0 means unlimited.
    #[arg(long, default_value_t = 20)]
    max_depth: usize,
    /// Minimum rows per tree leaf.
    #[arg(long, default_value_t = 2)]
    min_leaf: usize,
    /// Number of forest trees.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Features tried per forest split (default ceil(sqrt(d))).
    #[arg(long)]
    m_features: Option<usize>,
    /// Number of bagged trees.
    #[arg(long, default_value_t = 10)]
    bags: usize,
    /// Grow ensemble members on the full training set instead of bootstrap samples.
    #[arg(long)]
    no_bootstrap: bool,
    /// Neighbours for k-NN.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Use raw feature scales for k-NN distances.
    #[arg(long)]
    no_standardize: bool,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Model output path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Print the report as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    data: PathBuf,
    /// Benchmark plan.
    #[arg(long, default_value = "table3")]
    preset: String,
    /// Fraction of rows used for training.
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRACTION)]
    train_fraction: f64,
    /// Give each plan row its own split (seed + row index) instead of one shared split.
    #[arg(long)]
    per_row_split: bool,
    #[command(flatten)]
    seed: SeedArg,
    /// Also write one JSON record per row to this path.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Print only the JSON records, not the table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StreamArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Recording CSV to replay.
    #[arg(short, long)]
    input: PathBuf,
    /// Body weight in kg.
    #[arg(long, default_value_t = 70.0, allow_negative_numbers = true)]
    weight: f64,
    /// Replay speed as a multiple of real time; 0 replays as fast as possible.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rate: f64,
    /// Window classifications per decision.
    #[arg(long, default_value_t = 10)]
    votes: usize,
    /// Median filter width (odd).
    #[arg(long, default_value_t = 3)]
    filter_width: usize,
    /// Sampling rate of the recording in Hz.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    sample_rate: f64,
    /// Measure each decision's elapsed time on the wall clock instead of stream time.
    #[arg(long)]
    wall_clock: bool,
    /// Output path for JSON lines (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_activity(s: &str) -> Result<Activity, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn read_features(path: &Path) -> Result<FeatureDataset> {
    FeatureDataset::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// The training or test part of `data`, or all of it without a fraction.
fn split_part(data: FeatureDataset, split: &SplitArgs, seed: u64, train: bool) -> Result<FeatureDataset> {
    match split.train_fraction {
        None => Ok(data),
        Some(f) => {
            let (tr, te) = shuffle_split(&data, f, seed)?;
            Ok(if train { tr } else { te })
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let activities = if a.activities.is_empty() { Activity::ALL.to_vec() } else { a.activities };
    let params = SynthParams { sample_rate_hz: a.sample_rate, seed: a.seed.seed, ..Default::default() };
    let segments: Vec<(Activity, f64)> = activities.into_iter().map(|x| (x, a.duration)).collect();
    let series = synthesize_sequence(&segments, &params)?;
    write_csv(output(&a.output)?, &series)?;
    Ok(())
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<()> {
    let series = parse_csv(open(&a.input)?, a.sample_rate).with_context(|| format!("reading {}", a.input.display()))?;
    let data = featurize(&series, a.filter_width, a.stride)?;
    data.write_csv(output(&a.output)?)?;
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let data = read_features(&a.data)?;
    let ranking = rank_features_info_gain(&data)?;
    let mut out = output(&None)?;
    writeln!(out, "rank\tfeature\tgain_bits")?;
    for (i, (f, g)) in ranking.entries.iter().take(a.top.unwrap_or(usize::MAX)).enumerate() {
        writeln!(out, "{}\t{f}\t{g:.6}", i + 1)?;
    }
    out.flush()?;
    Ok(())
}

fn spec_from(a: &TrainArgs) -> ClassifierSpec {
    let tree = TreeParams { max_depth: (a.max_depth > 0).then_some(a.max_depth), min_leaf: a.min_leaf };
    match a.classifier {
        Kind::Nb => ClassifierSpec::Nb,
        Kind::Tree => ClassifierSpec::Tree(tree),
        Kind::Forest => {
            ClassifierSpec::Forest { n_trees: a.trees, m_features: a.m_features, bootstrap: !a.no_bootstrap, tree }
        }
        Kind::Bagging => ClassifierSpec::Bagging { n_bags: a.bags, bootstrap: !a.no_bootstrap, tree },
        Kind::Knn => ClassifierSpec::Knn(KnnParams { k: a.k, standardize: !a.no_standardize }),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let subset = FeatureSubset::parse(&a.features)?;
    let data = read_features(&a.data)?;
    let ids = subset.resolve(&data)?;
    let data = split_part(data.select_ids(&ids)?, &a.split, a.seed.seed, true)?;
    let spec = spec_from(&a);
    let model = spec.train(&data, a.seed.seed)?;
    save_model(&model, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    eprintln!(
        "trained {} on {} rows x {} features in {:.3} s",
        ClassifierKind::from(a.classifier).as_str(),
        model.n_train,
        model.feature_names.len(),
        model.build_time_s
    );
    Ok(())
}

fn print_report(out: &mut dyn Write, r: &EvaluationReport) -> io::Result<()> {
    writeln!(out, "classifier: {}", r.classifier.as_str())?;
    writeln!(out, "features: {}", r.features.len())?;
    writeln!(out, "test rows: {}", r.n_test)?;
    writeln!(out, "accuracy: {:.4} %", r.accuracy_pct)?;
    writeln!(out, "build time: {:.3} s", r.build_time_s)?;
    writeln!(out, "confusion (rows true, columns predicted):")?;
    write!(out, "{:>15}", "")?;
    for a in Activity::ALL {
        write!(out, " {:>6}", a.code())?;
    }
    writeln!(out)?;
    for (a, row) in Activity::ALL.iter().zip(&r.confusion) {
        write!(out, "{:>15}", a.name())?;
        for c in row {
            write!(out, " {c:>6}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let data = split_part(read_features(&a.data)?, &a.split, a.seed.seed, false)?;
    let mut report = evaluate(&model, &data)?;
    if a.split.train_fraction.is_some() {
        report.seed = Some(a.seed.seed);
    }
    let mut out = output(&None)?;
    if a.json {
        serde_json::to_writer(&mut out, &report)?;
        writeln!(out)?;
    } else {
        print_report(&mut out, &report)?;
    }
    out.flush()?;
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let plan = plan_for_preset(&a.preset)?;
    let data = read_features(&a.data)?;
    let mode = if a.per_row_split { SplitMode::PerRow } else { SplitMode::Shared };
    let rows = run_benchmark(&plan, &data, a.seed.seed, a.train_fraction, mode)?;
    if let Some(p) = &a.records {
        write_records(output(&Some(p.clone()))?, &rows)?;
    }
    let mut out = output(&None)?;
    if a.json {
        write_records(&mut out, &rows)?;
    } else {
        write!(out, "{}", render_table(&rows))?;
    }
    out.flush()?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        bail!("{failed} of {} plan rows failed", rows.len());
    }
    Ok(())
}

fn stream(a: StreamArgs) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let cfg = StreamConfig {
        weight_kg: a.weight,
        votes_per_decision: a.votes,
        filter_width: a.filter_width,
        sample_rate_hz: a.sample_rate,
        replay_rate: a.rate,
        elapsed: if a.wall_clock { ElapsedMode::WallClock } else { ElapsedMode::StreamTime },
        ..Default::default()
    };
    cfg.validate()?;
    let source = replay(&a.input, cfg.sample_rate_hz, cfg.replay_rate)
        .with_context(|| format!("cannot open {}", a.input.display()))?;
    let mut out = output(&a.output)?;
    run_stream_with(source.samples(), &model, &cfg, |e| {
        writeln!(out, "{}", e.to_json_line())?;
        out.flush()?;
        Ok(())
    })
    .with_context(|| format!("streaming {}", a.input.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Featurize(a) => featurize_cmd(a),
        Command::Rank(a) => rank(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Stream(a) => stream(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("har: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    let broken = |io: &io::Error| io.kind() == io::ErrorKind::BrokenPipe;
    e.chain().any(|c| match c.downcast_ref::<StreamError>() {
        Some(StreamError::Io(io)) => broken(io),
        _ => c.downcast_ref::<io::Error>().is_some_and(broken),
    })
}
