//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{bench_predict, synthetic_model, synthetic_workload, WorkloadSpec, REPORT_HEADER};
use crate::error::{Error, ErrorClass, Result};
use crate::features::{Extractor, FeatureInstance, FeatureSpace, Vocab};
use crate::io::{load_clusters, load_embeddings, load_instances, load_model, load_templates, save_model};
use crate::model::{Form, LowRankTensor, Model, ModelDims, ModelSpec, Rank, RankSpec, Task, WordEncoding};
use crate::par::{self, Execution};
use crate::pipeline::{ModelBundle, NgramMode, Pipeline};
use crate::scoring::Scorer;
use crate::synth::{random_instance, random_model, ToySpec};
use crate::training::{finite_diff_check, max_rel_error, train, Loss, TrainConfig, TrainMode, LOG_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lrfr", version, about = "Low-rank tensor scoring of conjunctive lexical features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its epoch log.
    Train(TrainArgs),
    /// Write one prediction per instance.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Eval(PredictArgs),
    /// Report parameter counts, multiply-adds and timing on a synthetic workload.
    Bench(BenchArgs),
    /// Compare analytic gradients with central differences.
    CheckGrad(CheckGradArgs),
    /// Describe a model file.
    InspectModel(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Tucker,
    Cp,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Tucker => Form::Tucker,
            FormArg::Cp => Form::Cp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NgramArg {
    MultiTensor,
    Cluster,
}

impl From<NgramArg> for NgramMode {
    fn from(m: NgramArg) -> Self {
        match m {
            NgramArg::MultiTensor => NgramMode::MultiTensor,
            NgramArg::Cluster => NgramMode::Cluster,
        }
    }
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Label rank; a number or `d` for the label count.
    #[arg(long, default_value = "20")]
    pub r1: Rank,
    /// Property rank; a number or `d` for the property count.
    #[arg(long, default_value = "20")]
    pub r2: Rank,
    /// Lexical rank shared by all word views; a number or `d`.
    #[arg(long, default_value = "50")]
    pub r3: Rank,
    /// Rank of CP tensors.
    #[arg(long, default_value_t = 50)]
    pub cp_rank: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Development set for early stopping; training accuracy is used without one.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub templates: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Epoch log destination; standard output by default.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Pre-trained embeddings; words are one-hot without them.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Update the embeddings during training.
    #[arg(long)]
    pub fine_tune: bool,
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Keep only this many leading bits of each cluster path.
    #[arg(long)]
    pub cluster_prefix: Option<usize>,
    #[arg(long, value_enum, default_value = "multi-tensor")]
    pub ngram_mode: NgramArg,
    #[arg(long, value_enum, default_value = "tucker")]
    pub unigram_form: FormArg,
    #[arg(long, value_enum, default_value = "cp")]
    pub ngram_form: FormArg,
    #[command(flatten)]
    pub ranks: RankArgs,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.005)]
    pub lambda: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::model::INIT_SCALE)]
    pub init_scale: f64,
    /// Do not add a bias atom per ranking candidate.
    #[arg(long)]
    pub no_candidate_bias: bool,
    /// Compute gradients of K instances in parallel against one snapshot.
    #[arg(long, value_name = "K")]
    pub snapshot_batch: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Prediction destination; standard output by default.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Cluster file, needed by cluster-mode models.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Worker threads; predictions keep input order.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Forms to measure; both by default.
    #[arg(long, value_enum)]
    pub form: Vec<FormArg>,
    #[arg(long, default_value_t = 32)]
    pub labels: usize,
    #[arg(long, default_value_t = 264)]
    pub properties: usize,
    #[arg(long, default_value_t = 200)]
    pub embedding: usize,
    #[arg(long, default_value_t = 1)]
    pub arity: usize,
    #[arg(long, default_value_t = 32)]
    pub r1: usize,
    #[arg(long, default_value_t = 20)]
    pub r2: usize,
    #[arg(long, default_value_t = 200)]
    pub r3: usize,
    #[arg(long, default_value_t = 200)]
    pub cp_rank: usize,
    #[arg(long, default_value_t = 10_000)]
    pub features: usize,
    #[arg(long, default_value_t = 1000)]
    pub vocab: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: ReportFormat,
    /// Score in parallel with this many threads; single-threaded by default.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Classify,
    Rank,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    /// Check a trained model on instances from `--input` instead of a toy.
    #[arg(long, requires = "input")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tucker")]
    pub form: FormArg,
    #[arg(long, value_enum, default_value = "classify")]
    pub task: TaskArg,
    /// Toy model with embedded words of this dimension.
    #[arg(long)]
    pub embedding: Option<usize>,
    #[arg(long, requires = "embedding")]
    pub fine_tune: bool,
    /// Number of instances to check.
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::training::FD_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numeric => EXIT_NUMERIC,
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    let threads = match &cmd {
        Command::Train(a) => a.threads,
        Command::Predict(a) | Command::Eval(a) => a.threads,
        Command::Bench(a) => a.threads,
        _ => None,
    };
    match threads {
        Some(k) => {
            let mut buf = Vec::new();
            let code = par::with_threads(k, || dispatch_inner(cmd, &mut buf))?;
            out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
            code
        }
        None => dispatch_inner(cmd, out),
    }
}

fn dispatch_inner(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Train(a) => cmd_train(&a, out),
        Command::Predict(a) => cmd_predict(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Bench(a) => cmd_bench(&a, out),
        Command::CheckGrad(a) => cmd_check_grad(&a, out),
        Command::InspectModel(a) => cmd_inspect(&a, out),
    }
}

fn w(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text).map_err(|e| Error::io("<stdout>", e))
}

macro_rules! outln {
    ($out:expr, $($arg:tt)*) => {
        w($out, format_args!("{}\n", format_args!($($arg)*)))
    };
}

fn print_config(out: &mut dyn Write, command: &str, items: &[(&str, String)]) -> Result<()> {
    outln!(out, "# config")?;
    outln!(out, "# command\t{command}")?;
    for (k, v) in items {
        outln!(out, "# {k}\t{v}")?;
    }
    Ok(())
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "-".to_string(), |p| p.display().to_string())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn execution(threads: Option<usize>) -> Execution {
    match threads {
        Some(k) if k > 1 => Execution::Parallel,
        _ => Execution::Sequential,
    }
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let ngram_mode: NgramMode = a.ngram_mode.into();
    let (unigram_form, ngram_form) = match ngram_mode {
        NgramMode::MultiTensor => (a.unigram_form.into(), a.ngram_form.into()),
        NgramMode::Cluster => (a.unigram_form.into(), a.unigram_form.into()),
    };
    let mode = match a.snapshot_batch {
        Some(k) => TrainMode::SnapshotBatch(k),
        None => TrainMode::Sequential,
    };
    let spec = ModelSpec {
        unigram_form,
        ngram_form,
        tucker_ranks: [a.ranks.r1, a.ranks.r2, a.ranks.r3],
        cp_rank: a.ranks.cp_rank,
        init_scale: a.init_scale,
    };
    let mut echo: BTreeMap<String, String> = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        echo.insert(k.to_string(), v);
    };
    put("eta", a.eta.to_string());
    put("lambda", a.lambda.to_string());
    put("epochs", a.epochs.to_string());
    put("patience", a.patience.to_string());
    put("seed", a.seed.to_string());
    put("init_scale", a.init_scale.to_string());
    put("ngram_mode", ngram_mode.name().to_string());
    put("unigram_form", unigram_form.name().to_string());
    put("ngram_form", ngram_form.name().to_string());
    put("r1", a.ranks.r1.to_string());
    put("r2", a.ranks.r2.to_string());
    put("r3", a.ranks.r3.to_string());
    put("cp_rank", a.ranks.cp_rank.to_string());
    put("fine_tune", a.fine_tune.to_string());
    put("candidate_bias", (!a.no_candidate_bias).to_string());
    put(
        "cluster_prefix",
        a.cluster_prefix.map_or("none".to_string(), |p| p.to_string()),
    );
    put(
        "train_mode",
        match mode {
            TrainMode::Sequential => "sequential".to_string(),
            TrainMode::SnapshotBatch(k) => format!("snapshot-batch {k}"),
        },
    );
    let mut shown: Vec<(&str, String)> = vec![
        ("train", a.train.display().to_string()),
        ("dev", opt_path(&a.dev)),
        ("templates", a.templates.display().to_string()),
        ("model_out", a.model_out.display().to_string()),
        ("log", opt_path(&a.log)),
        ("embeddings", opt_path(&a.embeddings)),
        ("clusters", opt_path(&a.clusters)),
        (
            "threads",
            a.threads.map_or("-".to_string(), |t| t.to_string()),
        ),
    ];
    shown.extend(echo.iter().map(|(k, v)| (k.as_str(), v.clone())));
    print_config(out, "train", &shown)?;

    if a.fine_tune && a.embeddings.is_none() {
        return Err(Error::Config("--fine-tune needs --embeddings".into()));
    }
    if ngram_mode == NgramMode::Cluster && a.clusters.is_none() {
        return Err(Error::Config("--ngram-mode cluster needs --clusters".into()));
    }
    let template_text = std::fs::read_to_string(&a.templates).map_err(|e| Error::io(&a.templates, e))?;
    let templates = load_templates(&a.templates)?;
    let clusters = match &a.clusters {
        Some(p) => Some(load_clusters(p, a.cluster_prefix)?),
        None => None,
    };
    let embeddings = match &a.embeddings {
        Some(p) => Some(load_embeddings(p)?),
        None => None,
    };
    let train_raw = load_instances(&a.train)?;
    if train_raw.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{} has no instances",
            a.train.display()
        )));
    }
    let dev_raw = match &a.dev {
        Some(p) => load_instances(p)?,
        None => Vec::new(),
    };
    let ranking = train_raw[0].is_ranking();
    if let Some(i) = train_raw
        .iter()
        .chain(&dev_raw)
        .position(|x| x.is_ranking() != ranking)
    {
        return Err(Error::Config(format!(
            "instance {} mixes ranking and classification data",
            i + 1
        )));
    }
    let template_arities: BTreeSet<usize> = templates.iter().map(|t| t.arity()).collect();
    let words = match &embeddings {
        Some(e) => e.vocab.clone(),
        None => Vocab::with_unk(),
    };
    let extractor = Extractor::new(templates, !a.no_candidate_bias);
    let mut pipeline = Pipeline::new(extractor, FeatureSpace::new(words), ngram_mode, clusters)?;
    let train_set = pipeline.prepare_all(&train_raw)?;
    pipeline.space.properties.freeze();
    pipeline.space.words.freeze();
    let dev_set = pipeline.prepare_all(&dev_raw)?;
    pipeline.space.labels.freeze();

    let task = if ranking {
        Task::Rank
    } else {
        Task::Classify {
            labels: pipeline.space.labels.len(),
        }
    };
    if let Task::Classify { labels: 0 } = task {
        return Err(Error::EmptyDataset("training instances carry no labels".into()));
    }
    let mut arities: BTreeSet<usize> = train_set.iter().map(FeatureInstance::max_arity).filter(|&n| n > 0).collect();
    for inst in &train_set {
        for set in inst.feature_sets() {
            arities.extend(set.partitions().map(|(n, _)| n));
        }
    }
    match ngram_mode {
        NgramMode::MultiTensor => arities.extend(template_arities),
        NgramMode::Cluster => {
            arities.clear();
            arities.insert(1);
        }
    }
    if ranking && !a.no_candidate_bias {
        arities.insert(1);
    }
    let arities: Vec<usize> = arities.into_iter().collect();
    let word_enc = match embeddings {
        Some(e) => WordEncoding::Embedded(e.matrix),
        None => WordEncoding::OneHot {
            vocab: pipeline.space.words.len(),
        },
    };
    let mut model = Model::init(
        &spec,
        task,
        pipeline.space.properties.len(),
        word_enc,
        &arities,
        a.fine_tune,
        a.seed,
    )?;
    let config = TrainConfig {
        eta: a.eta,
        lambda: a.lambda,
        epochs: a.epochs,
        patience: a.patience,
        seed: a.seed,
        loss: Loss::for_task(task),
        mode,
    };

    let mut log: Box<dyn Write + '_> = match &a.log {
        Some(p) => Box::new(create(p)?),
        None => Box::new(&mut *out),
    };
    writeln!(log, "{LOG_HEADER}").map_err(|e| Error::io("<log>", e))?;
    let mut log_err = None;
    let history = train(&mut model, &train_set, &dev_set, &config, |r| {
        if let Err(e) = writeln!(log, "{}", r.tsv()) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(Error::io("<log>", e));
    }
    log.flush().map_err(|e| Error::io("<log>", e))?;
    drop(log);

    let bundle = ModelBundle {
        model,
        space: pipeline.space,
        templates: template_text,
        candidate_bias: !a.no_candidate_bias,
        ngram_mode,
        cluster_prefix: a.cluster_prefix,
        config: echo,
    };
    save_model(&bundle, &a.model_out)?;
    outln!(
        out,
        "# best_epoch\t{}\tdev_metric\t{:.6}\tparams\t{}",
        history.best_epoch,
        history.best_metric,
        bundle.model.num_params()
    )?;
    Ok(EXIT_OK)
}

struct Loaded {
    bundle: ModelBundle,
    insts: Vec<crate::io::AnnotatedInstance>,
    features: Vec<FeatureInstance>,
}

fn load_for_prediction(a: &PredictArgs, labelled: bool) -> Result<Loaded> {
    let bundle = load_model(&a.model)?;
    let clusters = match &a.clusters {
        Some(p) => Some(load_clusters(p, bundle.cluster_prefix)?),
        None => None,
    };
    if bundle.ngram_mode == NgramMode::Cluster && clusters.is_none() {
        return Err(Error::Config("this model needs --clusters".into()));
    }
    let mut pipeline = bundle.pipeline(clusters)?;
    let insts = load_instances(&a.input)?;
    let task_rank = bundle.model.task() == Task::Rank;
    if let Some(i) = insts.iter().position(|x| x.is_ranking() != task_rank) {
        return Err(Error::Config(format!(
            "instance {} does not match the model's task",
            i + 1
        )));
    }
    if labelled {
        if let Some(i) = insts
            .iter()
            .position(|x| if x.is_ranking() { x.gold.is_none() } else { x.label.is_none() })
        {
            return Err(Error::parse(
                a.input.display().to_string(),
                i + 1,
                "instance has no gold annotation",
            ));
        }
    }
    let features = insts
        .iter()
        .map(|x| pipeline.prepare_unlabeled(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Loaded {
        bundle,
        insts,
        features,
    })
}

fn predict_config(a: &PredictArgs) -> Vec<(&'static str, String)> {
    vec![
        ("model", a.model.display().to_string()),
        ("input", a.input.display().to_string()),
        ("output", opt_path(&a.output)),
        ("clusters", opt_path(&a.clusters)),
        (
            "threads",
            a.threads.map_or("-".to_string(), |t| t.to_string()),
        ),
    ]
}

/// Candidate order by decreasing posterior, ties to the earlier candidate.
fn ranked(posterior: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..posterior.len()).collect();
    order.sort_by(|&i, &j| posterior[j].total_cmp(&posterior[i]).then(i.cmp(&j)));
    order
}

fn cmd_predict(a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    print_config(out, "predict", &predict_config(a))?;
    let l = load_for_prediction(a, false)?;
    let scorer = Scorer::cached(&l.bundle.model, execution(a.threads));
    let preds = scorer.predict_batch(&l.features, execution(a.threads))?;
    let mut text = String::new();
    for (p, inst) in preds.iter().zip(&l.insts) {
        match &inst.candidates {
            None => {
                let label = l.bundle.space.labels.item(p.choice).unwrap_or("");
                text.push_str(label);
            }
            Some(c) => {
                let order: Vec<String> = ranked(&p.posterior).iter().map(|&k| c[k].to_string()).collect();
                text.push_str(&order.join(" "));
            }
        }
        text.push('\n');
    }
    match &a.output {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(text.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| Error::io(p, e))?;
        }
        None => w(out, format_args!("{text}"))?,
    }
    Ok(EXIT_OK)
}

/// Per-label precision, recall and F1 with micro and macro averages.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Precision, recall and F1.
pub type Prf = (f64, f64, f64);

fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Scores `(gold, predicted)` label pairs. Labels are those occurring in
/// either column, in sorted order.
pub fn label_report(pairs: &[(String, String)]) -> (Vec<LabelScores>, Prf, Prf) {
    let labels: BTreeSet<&str> = pairs
        .iter()
        .flat_map(|(g, p)| [g.as_str(), p.as_str()])
        .collect();
    let mut rows = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    for l in labels {
        let tp = pairs.iter().filter(|(g, p)| g == l && p == l).count();
        let fp = pairs.iter().filter(|(g, p)| g != l && p == l).count();
        let fn_ = pairs.iter().filter(|(g, p)| g == l && p != l).count();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let (precision, recall, f1) = prf(tp, fp, fn_);
        rows.push(LabelScores {
            label: l.to_string(),
            precision,
            recall,
            f1,
            support: tp + fn_,
        });
    }
    let micro = prf(tp_all, fp_all, fn_all);
    let k = rows.len().max(1) as f64;
    let macro_ = (
        rows.iter().map(|r| r.precision).sum::<f64>() / k,
        rows.iter().map(|r| r.recall).sum::<f64>() / k,
        rows.iter().map(|r| r.f1).sum::<f64>() / k,
    );
    (rows, micro, macro_)
}

fn cmd_eval(a: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    print_config(out, "eval", &predict_config(a))?;
    let l = load_for_prediction(a, true)?;
    let scorer = Scorer::cached(&l.bundle.model, execution(a.threads));
    let preds = scorer.predict_batch(&l.features, execution(a.threads))?;
    let n = preds.len();
    if l.bundle.model.task() == Task::Rank {
        let hits = preds
            .iter()
            .zip(&l.insts)
            .filter(|(p, i)| i.gold == Some(p.choice))
            .count();
        outln!(out, "instances\t{n}")?;
        outln!(out, "accuracy@1\t{:.6}", ratio(hits, n))?;
        return Ok(EXIT_OK);
    }
    let pairs: Vec<(String, String)> = preds
        .iter()
        .zip(&l.insts)
        .map(|(p, i)| {
            (
                i.label.clone().unwrap_or_default(),
                l.bundle.space.labels.item(p.choice).unwrap_or("").to_string(),
            )
        })
        .collect();
    let hits = pairs.iter().filter(|(g, p)| g == p).count();
    outln!(out, "instances\t{n}")?;
    outln!(out, "accuracy\t{:.6}", ratio(hits, n))?;
    let (rows, micro, macro_) = label_report(&pairs);
    outln!(out, "label\tprecision\trecall\tf1\tsupport")?;
    for r in &rows {
        outln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.label,
            r.precision,
            r.recall,
            r.f1,
            r.support
        )?;
    }
    outln!(out, "micro\t{:.6}\t{:.6}\t{:.6}\t{n}", micro.0, micro.1, micro.2)?;
    outln!(out, "macro\t{:.6}\t{:.6}\t{:.6}\t{n}", macro_.0, macro_.1, macro_.2)?;
    Ok(EXIT_OK)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    let forms: Vec<FormArg> = if a.form.is_empty() {
        vec![FormArg::Cp, FormArg::Tucker]
    } else {
        a.form.clone()
    };
    let names: Vec<&str> = forms.iter().map(|&f| Form::from(f).name()).collect();
    print_config(
        out,
        "bench",
        &[
            ("forms", names.join(",")),
            ("labels", a.labels.to_string()),
            ("properties", a.properties.to_string()),
            ("embedding", a.embedding.to_string()),
            ("arity", a.arity.to_string()),
            ("tucker_ranks", format!("{},{},{}", a.r1, a.r2, a.r3)),
            ("cp_rank", a.cp_rank.to_string()),
            ("features", a.features.to_string()),
            ("vocab", a.vocab.to_string()),
            ("seed", a.seed.to_string()),
            (
                "threads",
                a.threads.map_or("1".to_string(), |t| t.to_string()),
            ),
        ],
    )?;
    let dims = ModelDims {
        labels: a.labels,
        properties: a.properties,
        embedding: a.embedding,
        arity: a.arity,
    };
    let workload = WorkloadSpec {
        features: a.features,
        arity: a.arity,
        vocab: a.vocab,
        seed: a.seed,
    };
    if a.format == ReportFormat::Tsv {
        outln!(out, "{REPORT_HEADER}")?;
    }
    for f in forms {
        let ranks = match f {
            FormArg::Tucker => RankSpec::Tucker(a.r1, a.r2, a.r3),
            FormArg::Cp => RankSpec::Cp(a.cp_rank),
        };
        let model = synthetic_model(dims, ranks, a.vocab, a.seed)?;
        let atoms = synthetic_workload(&model, &workload);
        let report = bench_predict(&model, &atoms, execution(a.threads))?;
        match a.format {
            ReportFormat::Tsv => outln!(out, "{}", report.tsv())?,
            ReportFormat::Json => outln!(out, "{}", report.json())?,
        }
    }
    Ok(EXIT_OK)
}

fn cmd_check_grad(a: &CheckGradArgs, out: &mut dyn Write) -> Result<i32> {
    print_config(
        out,
        "check-grad",
        &[
            ("model", opt_path(&a.model)),
            ("input", opt_path(&a.input)),
            ("form", Form::from(a.form).name().to_string()),
            ("task", format!("{:?}", a.task).to_lowercase()),
            (
                "embedding",
                a.embedding.map_or("-".to_string(), |d| d.to_string()),
            ),
            ("fine_tune", a.fine_tune.to_string()),
            ("instances", a.instances.to_string()),
            ("seed", a.seed.to_string()),
            ("eps", a.eps.to_string()),
            ("tolerance", a.tolerance.to_string()),
        ],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (model, insts) = match (&a.model, &a.input) {
        (Some(m), Some(i)) => {
            let l = load_for_prediction(
                &PredictArgs {
                    model: m.clone(),
                    input: i.clone(),
                    output: None,
                    clusters: a.clusters.clone(),
                    threads: None,
                },
                true,
            )?;
            // Gold labels come from the model's vocabulary.
            let mut pipeline = l.bundle.pipeline(match &a.clusters {
                Some(p) => Some(load_clusters(p, l.bundle.cluster_prefix)?),
                None => None,
            })?;
            let feats = l
                .insts
                .iter()
                .take(a.instances)
                .map(|x| pipeline.prepare(x))
                .collect::<Result<Vec<_>>>()?;
            (l.bundle.model, feats)
        }
        _ => {
            let form: Form = a.form.into();
            let spec = ToySpec {
                task: match a.task {
                    TaskArg::Classify => Task::Classify { labels: 3 },
                    TaskArg::Rank => Task::Rank,
                },
                embedding: a.embedding,
                fine_tune: a.fine_tune,
                unigram_form: form,
                ngram_form: form,
                ..ToySpec::default()
            };
            let model = random_model(&spec, 1.0, &mut rng)?;
            let insts = (0..a.instances)
                .map(|_| random_instance(&model, &[3, 2], 3, &mut rng))
                .collect();
            (model, insts)
        }
    };
    let mut worst = 0.0f64;
    outln!(out, "instance\tblock\tsize\tmax_abs_error\trel_error")?;
    for (k, inst) in insts.iter().enumerate() {
        let checks = finite_diff_check(&model, inst, a.eps, Execution::Parallel)?;
        for c in &checks {
            outln!(
                out,
                "{}\t{}\t{}\t{:.3e}\t{:.3e}",
                k + 1,
                c.block,
                c.len,
                c.max_abs_error,
                c.rel_error
            )?;
        }
        worst = worst.max(max_rel_error(&checks));
    }
    let ok = worst < a.tolerance;
    outln!(out, "max_rel_error\t{worst:.3e}\t{}", if ok { "PASS" } else { "FAIL" })?;
    Ok(if ok { EXIT_OK } else { EXIT_NUMERIC })
}

fn cmd_inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<i32> {
    print_config(out, "inspect-model", &[("model", a.model.display().to_string())])?;
    let b = load_model(&a.model)?;
    let m = &b.model;
    outln!(out, "format_version\t{}", crate::io::FORMAT_VERSION)?;
    outln!(
        out,
        "task\t{}",
        match m.task() {
            Task::Classify { .. } => "classify",
            Task::Rank => "rank",
        }
    )?;
    outln!(out, "ngram_mode\t{}", b.ngram_mode.name())?;
    outln!(out, "labels\t{}", b.space.labels.len())?;
    outln!(out, "properties\t{}", b.space.properties.len())?;
    outln!(out, "vocabulary\t{}", b.space.words.len())?;
    match m.words() {
        WordEncoding::OneHot { .. } => outln!(out, "words\tone-hot")?,
        WordEncoding::Embedded(e) => outln!(out, "words\tembedded {}", e.dim())?,
    }
    outln!(out, "fine_tune\t{}", m.fine_tune())?;
    outln!(out, "parameters\t{}", m.num_params())?;
    for (n, t) in m.tensors() {
        let roles: Vec<String> = t
            .roles()
            .iter()
            .zip(t.dims())
            .zip(t.ranks())
            .map(|((r, d), k)| format!("{r:?}:{d}x{k}"))
            .collect();
        let form = match t {
            LowRankTensor::Tucker(_) => "tucker",
            LowRankTensor::Cp(_) => "cp",
        };
        outln!(
            out,
            "tensor\t{n}\t{form}\t{}\tparams {}",
            roles.join(" "),
            t.num_params()
        )?;
    }
    for (k, v) in &b.config {
        outln!(out, "config\t{k}\t{v}")?;
    }
    Ok(EXIT_OK)
}
