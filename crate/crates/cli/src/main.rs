use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use itinmod::bench::harness::{
    read_results, score_cells, AnswerSource, BenchConfig, BenchOutput, Metric, ResultRow,
    ScriptedAnswer, ZERO_SHOT,
};
use itinmod::bench::{
    borda_aggregate, build_tasks, run_benchmark, BenchSetting, BenchTask, RagStrategy,
};
use itinmod::disruption::{verify_intents, DEFAULT_THETA};
use itinmod::ingest::{
    parse_visits, preprocess, profile_corpus, read_jsonl, write_json, write_jsonl, Corpus,
    VisitSchema, DEFAULT_MIN_LEN, DEFAULT_WINDOW,
};
use itinmod::model::Operation;
use itinmod::oracle::verify_lemma_bounds;
use itinmod::pipeline::memory::DEFAULT_MEMORY_WINDOW;
use itinmod::pipeline::prompt::DEFAULT_MAX_CANDIDATES;
use itinmod::pipeline::{run_campaign, Backend, CampaignConfig, HttpClient, ModelConfig};
use itinmod::record::{PerturbationRecord, RecordRow};

/// Intent-driven itinerary perturbation and modification benchmark.
#[derive(Parser)]
#[command(name = "itinmod", version)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a visit CSV into a corpus bundle.
    Ingest(IngestArgs),
    /// Generate a verified perturbation dataset for one operation.
    Perturb(PerturbArgs),
    /// Re-verify a perturbation dataset against a bundle.
    Verify(VerifyArgs),
    /// Check the single-edit Hellinger closed forms and lower bounds.
    Lemmas(LemmaArgs),
    /// Build, score and aggregate modification tasks.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Borda tables and position histograms from earlier outputs.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Inline `field=column,...` mapping or a TOML/JSON schema file.
    #[arg(long, default_value = "")]
    schema: String,
    #[arg(long)]
    out: PathBuf,
    /// Corpus name (default: input file stem).
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_LEN)]
    min_len: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpArg {
    Add,
    Delete,
    Replace,
}

impl From<OpArg> for Operation {
    fn from(op: OpArg) -> Self {
        match op {
            OpArg::Add => Operation::Add,
            OpArg::Delete => Operation::Delete,
            OpArg::Replace => Operation::Replace,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Oracle,
    Model,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_enum)]
    op: OpArg,
    #[arg(long, value_enum, default_value = "oracle")]
    backend: BackendArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    /// TOML endpoint config for `--backend model`.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Process only the first N itineraries.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MEMORY_WINDOW)]
    memory_window: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_CANDIDATES)]
    max_candidates: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    records: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LemmaOp {
    All,
    Add,
    Delete,
    Replace,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long, value_enum, default_value = "all")]
    op: LemmaOp,
    #[arg(long, default_value_t = 200)]
    n_max: u64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Split perturbation datasets 7:1:2 and turn them into tasks.
    Build(BenchBuildArgs),
    /// Score tasks with scripted answers or a model.
    Score(BenchScoreArgs),
    /// Borda counts over results tables.
    Aggregate(BenchAggregateArgs),
}

#[derive(Args)]
struct BenchBuildArgs {
    /// Perturbation dataset JSONL files.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
    /// Corpus bundles the datasets refer to.
    #[arg(long = "bundle", required = true)]
    bundles: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchScoreArgs {
    /// Directory written by `bench build`.
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long = "bundle", required = true)]
    bundles: Vec<PathBuf>,
    /// Which split to score.
    #[arg(long, default_value = "test")]
    split: String,
    /// Settings to run: zero-shot, random, sparse, dense.
    #[arg(long, value_delimiter = ',', default_value = "zero-shot")]
    rag: Vec<String>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, conflicts_with = "model_config")]
    answers: Option<PathBuf>,
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Label for the `model` column (default: scripted or the configured model).
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchAggregateArgs {
    #[arg(long = "results", required = true)]
    results: Vec<PathBuf>,
    /// Settings to rank (default: every setting except the baseline).
    #[arg(long, value_delimiter = ',')]
    settings: Vec<String>,
    #[arg(long, default_value = ZERO_SHOT)]
    baseline: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "results")]
    results: Vec<PathBuf>,
    #[arg(long = "positions")]
    positions: Vec<PathBuf>,
    #[arg(long, default_value = ZERO_SHOT)]
    baseline: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let kind = e
                .downcast_ref::<itinmod::Error>()
                .map_or("cli", |x| x.kind());
            let report = ErrorReport {
                error: kind,
                message: format!("{e:#}"),
            };
            eprintln!(
                "{}",
                serde_json::to_string(&report).expect("plain strings serialize")
            );
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Perturb(a) => perturb(a),
        Command::Verify(a) => verify(a),
        Command::Lemmas(a) => lemmas(a),
        Command::Bench(BenchCommand::Build(a)) => bench_build(a),
        Command::Bench(BenchCommand::Score(a)) => bench_score(a),
        Command::Bench(BenchCommand::Aggregate(a)) => bench_aggregate(a),
        Command::Report(a) => report(a),
    }
}

fn ingest(a: IngestArgs) -> Result<ExitCode> {
    let schema = VisitSchema::load(&a.schema)?;
    let parsed = parse_visits(&a.input, &schema)?;
    let itineraries = preprocess(&parsed.itineraries, a.min_len, a.window)?;
    let name = a.name.unwrap_or_else(|| {
        a.input
            .file_stem()
            .map_or("corpus".into(), |s| s.to_string_lossy().into_owned())
    });
    let profile = profile_corpus(&name, &parsed.pois, &itineraries)?;
    let corpus = Corpus {
        name,
        pois: parsed.pois,
        itineraries,
        profile,
    };
    corpus.save(&a.out)?;
    write_jsonl(&a.out.join("rejects.jsonl"), &parsed.rejects)?;
    println!(
        "{}",
        serde_json::json!({
            "corpus": corpus.name,
            "pois": corpus.pois.len(),
            "itineraries": corpus.itineraries.len(),
            "rejected_rows": parsed.rejects.len(),
            "pop_thresholds": corpus.profile.pop_thresholds,
            "dist_thresholds": corpus.profile.dist_thresholds,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn perturb(a: PerturbArgs) -> Result<ExitCode> {
    let corpus = Corpus::load(&a.bundle)?;
    let mut config = CampaignConfig::new(a.op.into(), a.seed);
    config.theta = a.theta;
    config.max_itineraries = a.limit;
    config.memory_window = a.memory_window;
    config.max_candidates = a.max_candidates;
    let output = match a.backend {
        BackendArg::Oracle => run_campaign(&corpus, &config, Backend::Oracle)?,
        BackendArg::Model => {
            let path = a
                .model_config
                .as_deref()
                .context("--backend model requires --model-config")?;
            let mut client = HttpClient::new(ModelConfig::load(path)?)?;
            run_campaign(&corpus, &config, Backend::Model(&mut client))?
        }
    };
    output.write(&a.out)?;
    println!("{}", serde_json::to_string(&output.diagnostics)?);
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let corpus = Corpus::load(&a.bundle)?;
    let rows: Vec<RecordRow> = read_jsonl(&a.records)?;
    let mut failed = 0usize;
    for (k, row) in rows.iter().enumerate() {
        let outcome = PerturbationRecord::from_row(row, &corpus.pois).and_then(|rec| {
            if rec.perturbation.original.ids() != row.original {
                return Ok(Some("original does not round-trip".to_string()));
            }
            let (_, ok) = verify_intents(&rec.perturbation, rec.intents, &corpus.profile, a.theta)?;
            Ok((!ok).then(|| "intents not disrupted".to_string()))
        });
        match outcome {
            Ok(None) => println!("PASS {} {}", k + 1, row.seq_id),
            Ok(Some(why)) => {
                failed += 1;
                println!("FAIL {} {} {why}", k + 1, row.seq_id);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {} {} {e}", k + 1, row.seq_id);
            }
        }
    }
    println!("{} of {} records passed", rows.len() - failed, rows.len());
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn lemmas(a: LemmaArgs) -> Result<ExitCode> {
    let ops: Vec<Operation> = match a.op {
        LemmaOp::All => Operation::ALL.to_vec(),
        LemmaOp::Add => vec![Operation::Add],
        LemmaOp::Delete => vec![Operation::Delete],
        LemmaOp::Replace => vec![Operation::Replace],
    };
    let reports = ops
        .into_iter()
        .map(|op| verify_lemma_bounds(op, a.n_max, a.theta))
        .collect::<itinmod::Result<Vec<_>>>()?;
    let mut clean = true;
    for r in &reports {
        clean &= r.passed();
        println!(
            "{} cases={} violations={} max_dev={:.3e} coverage(bound)={} coverage(empirical)={}",
            r.op,
            r.cases,
            r.violations.len(),
            r.max_abs_deviation,
            r.bound_coverage_n,
            r.empirical_coverage_n
        );
    }
    if let Some(out) = &a.out {
        write_json(out, &reports)?;
    }
    Ok(if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn load_bundles(paths: &[PathBuf]) -> Result<Vec<Corpus>> {
    paths
        .iter()
        .map(|p| Corpus::load(p).with_context(|| format!("loading bundle {}", p.display())))
        .collect()
}

fn bench_build(a: BenchBuildArgs) -> Result<ExitCode> {
    let corpora = load_bundles(&a.bundles)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut records = Vec::new();
    for path in &a.datasets {
        for row in read_jsonl::<RecordRow>(path)? {
            let corpus = corpora
                .iter()
                .find(|c| c.name == row.corpus)
                .with_context(|| format!("no bundle given for corpus {}", row.corpus))?;
            records.push(PerturbationRecord::from_row(&row, &corpus.pois)?);
        }
    }
    // negatives for a record come from its own corpus
    let mut by_corpus: BTreeMap<String, Vec<PerturbationRecord>> = BTreeMap::new();
    for r in records {
        by_corpus.entry(r.corpus.clone()).or_default().push(r);
    }
    let (mut train, mut valid, mut test, mut skipped) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (name, recs) in &by_corpus {
        let corpus = corpora
            .iter()
            .find(|c| &c.name == name)
            .expect("checked above");
        let set = build_tasks(recs, &corpus.pois, a.split_seed)?;
        train.extend(set.tasks.train);
        valid.extend(set.tasks.valid);
        test.extend(set.tasks.test);
        skipped.extend(
            set.skipped
                .into_iter()
                .map(|(id, reason)| serde_json::json!({"task_id": id, "reason": reason})),
        );
    }
    write_jsonl(&a.out.join("train.jsonl"), &train)?;
    write_jsonl(&a.out.join("valid.jsonl"), &valid)?;
    write_jsonl(&a.out.join("test.jsonl"), &test)?;
    write_jsonl(&a.out.join("skipped.jsonl"), &skipped)?;
    println!(
        "{}",
        serde_json::json!({"train": train.len(), "valid": valid.len(), "test": test.len(), "skipped": skipped.len()})
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_setting(name: &str, k: usize) -> Result<BenchSetting> {
    if name == ZERO_SHOT {
        return Ok(BenchSetting::zero_shot());
    }
    Ok(BenchSetting::rag(name.parse::<RagStrategy>()?, k))
}

fn bench_score(a: BenchScoreArgs) -> Result<ExitCode> {
    let corpora = load_bundles(&a.bundles)?;
    let tasks: Vec<BenchTask> = read_jsonl(&a.tasks.join(format!("{}.jsonl", a.split)))?;
    let settings = a
        .rag
        .iter()
        .map(|s| parse_setting(s.trim(), a.k))
        .collect::<Result<Vec<_>>>()?;
    let needs_train = settings.iter().any(|s| s.rag.is_some());
    let train: Vec<BenchTask> = if needs_train {
        read_jsonl(&a.tasks.join("train.jsonl"))?
    } else {
        Vec::new()
    };
    let output: BenchOutput = match (&a.answers, &a.model_config) {
        (Some(path), _) => {
            let answers: Vec<ScriptedAnswer> = read_jsonl(path)?;
            let config = BenchConfig {
                model: a.model_name.clone().unwrap_or_else(|| "scripted".into()),
                theta: a.theta,
                seed: a.seed,
            };
            run_benchmark(
                &tasks,
                &train,
                &settings,
                AnswerSource::Scripted(&answers),
                &corpora,
                &config,
                None,
            )?
        }
        (None, Some(path)) => {
            let model_config = ModelConfig::load(path)?;
            let config = BenchConfig {
                model: a
                    .model_name
                    .clone()
                    .unwrap_or_else(|| model_config.model.clone()),
                theta: a.theta,
                seed: a.seed,
            };
            let mut client = HttpClient::new(model_config)?;
            run_benchmark(
                &tasks,
                &train,
                &settings,
                AnswerSource::Model(&mut client),
                &corpora,
                &config,
                None,
            )?
        }
        (None, None) => bail!("bench score needs --answers or --model-config"),
    };
    output.write(&a.out)?;
    for r in &output.rows {
        println!(
            "{} {} {} {} mod={:.4} apr={:.4} n={}",
            r.model, r.dataset, r.op, r.setting, r.mod_acc, r.apr, r.n
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn load_results(paths: &[PathBuf]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_results(p)?);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct BordaReport {
    #[serde(rename = "mod")]
    mod_table: itinmod::bench::BordaTable,
    apr: itinmod::bench::BordaTable,
}

fn borda_report(rows: &[ResultRow], settings: &[String], baseline: &str) -> Result<BordaReport> {
    let mut ranked: Vec<String> = settings.to_vec();
    if ranked.is_empty() {
        let present: BTreeSet<&str> = rows.iter().map(|r| r.setting.as_str()).collect();
        ranked = present
            .into_iter()
            .filter(|s| *s != baseline)
            .map(str::to_string)
            .collect();
    }
    let has_baseline = rows.iter().any(|r| r.setting == baseline);
    let baseline = has_baseline.then_some(baseline);
    Ok(BordaReport {
        mod_table: borda_aggregate(&score_cells(rows, Metric::Mod), &ranked, baseline)?,
        apr: borda_aggregate(&score_cells(rows, Metric::Apr), &ranked, baseline)?,
    })
}

fn bench_aggregate(a: BenchAggregateArgs) -> Result<ExitCode> {
    let rows = load_results(&a.results)?;
    let report = borda_report(&rows, &a.settings, &a.baseline)?;
    write_json(&a.out, &report)?;
    for (metric, table) in [("mod", &report.mod_table), ("apr", &report.apr)] {
        for s in &table.summary {
            println!(
                "{metric} {} rank={} borda={} delta={:?}",
                s.setting, s.rank, s.borda, s.delta
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report(a: ReportArgs) -> Result<ExitCode> {
    if a.results.is_empty() && a.positions.is_empty() {
        bail!("report needs --results and/or --positions");
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    if !a.results.is_empty() {
        let rows = load_results(&a.results)?;
        let report = borda_report(&rows, &[], &a.baseline)?;
        write_json(&a.out.join("borda.json"), &report)?;
        for (metric, table) in [("mod", &report.mod_table), ("apr", &report.apr)] {
            let mut csv = String::from("setting,rank,borda,delta\n");
            for s in &table.summary {
                let delta = s.delta.map_or(String::new(), |d| format!("{d}"));
                csv.push_str(&format!("{},{},{},{delta}\n", s.setting, s.rank, s.borda));
            }
            write_text(&a.out.join(format!("borda_{metric}.csv")), &csv)?;
        }
    }
    if !a.positions.is_empty() {
        let mut counts: BTreeMap<(String, usize), u64> = BTreeMap::new();
        for path in &a.positions {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            for (k, line) in text.lines().enumerate().skip(1) {
                let cols: Vec<&str> = line.split(',').collect();
                let [op, pos, count] = cols[..] else {
                    bail!("{}:{}: expected op,position,count", path.display(), k + 1);
                };
                *counts.entry((op.to_string(), pos.parse()?)).or_insert(0) +=
                    count.parse::<u64>()?;
            }
        }
        let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
        for ((op, _), c) in &counts {
            *totals.entry(op.as_str()).or_insert(0) += c;
        }
        let mut csv = String::from("op,position,count,fraction\n");
        for ((op, pos), c) in &counts {
            let frac = *c as f64 / totals[op.as_str()] as f64;
            csv.push_str(&format!("{op},{pos},{c},{frac:.6}\n"));
        }
        write_text(&a.out.join("positions_histogram.csv"), &csv)?;
    }
    println!("wrote {}", a.out.display());
    Ok(ExitCode::SUCCESS)
}
