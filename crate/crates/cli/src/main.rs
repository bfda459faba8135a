//! `geokge`: synthesize datasets, train, evaluate, check gradients, dump
//! attention and compare runs.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use geokge_core::evaluation::{
    constituent_reports, evaluate, per_relation_csv, EvalOptions, MrrAggregation, RankingReport,
};
use geokge_core::kg::{write_synthetic, SyntheticSpec};
use geokge_core::training::{
    grad_check, load_checkpoint, save_checkpoint, train, GradCheckConfig, Manifest,
};
use geokge_core::{KnowledgeGraph, Model, Split};
use serde_json::json;

use config::{resolve_dataset, RunConfig, DATA_DIR_ENV};
use report::{attention_svg, csv_table, file_stem, markdown_table, CompareRow};

const CHECKPOINT_DIR: &str = "checkpoint";
const LOG_FILE: &str = "train_log.jsonl";
const METRICS_FILE: &str = "metrics.json";

#[derive(Parser)]
#[command(name = "geokge", version, about = "Attention-combined knowledge graph embeddings")]
struct Cli {
    /// Worker threads for batch gradients and evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Folder searched for relative dataset names.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a pattern spec.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train from a run config; writes checkpoint, log and metrics.
    Train {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Filtered ranking of a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Report JSON path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-relation CSV including each constituent model on its own.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Average the two ranks of a triple instead of their reciprocals.
        #[arg(long)]
        rank_average: bool,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mean attention weights per relation, as JSON and SVG charts.
    Attn {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        no_svg: bool,
    },
    /// Tabulate run directories or train configs side by side.
    Compare {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed)?,
        Command::Train { config, seed, dataset, output_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if dataset.is_some() {
                cfg.dataset = dataset;
                cfg.base_dir = PathBuf::from(".");
            }
            if output_dir.is_some() {
                cfg.output_dir = output_dir;
            }
            cmd_train(&cfg, data_dir)?;
        }
        Command::Eval { checkpoint, dataset, split, out, csv, rank_average } => {
            let aggregation = if rank_average { MrrAggregation::Rank } else { MrrAggregation::Reciprocal };
            let opts = EvalOptions { aggregation, ..Default::default() };
            let dataset = resolve_dataset(&dataset, Path::new("."), data_dir)?;
            cmd_eval(&checkpoint, &dataset, split, &opts, out.as_deref(), csv.as_deref())?;
        }
        Command::Gradcheck { config, probes, seed } => {
            let cfg = RunConfig::load(&config)?;
            let gc = GradCheckConfig { probes_per_block: probes, seed, ..Default::default() };
            let report = grad_check(&cfg.train.model_config(), &gc)?;
            for b in &report.blocks {
                println!(
                    "{:<16} probes={:<4} max_rel_err={:.3e} max_abs_err={:.3e} {}",
                    b.block,
                    b.probes,
                    b.max_rel_error,
                    b.max_abs_error,
                    if b.passed { "ok" } else { "FAIL" }
                );
            }
            if !report.passed() {
                eprintln!("gradient check failed (threshold {:e})", report.threshold);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Attn { checkpoint, dataset, split, out, no_svg } => {
            let dataset = resolve_dataset(&dataset, Path::new("."), data_dir)?;
            cmd_attn(&checkpoint, &dataset, split, &out, !no_svg)?;
        }
        Command::Compare { runs, format, out } => {
            let rows = runs
                .iter()
                .map(|p| compare_row(p, data_dir))
                .collect::<Result<Vec<_>>>()?;
            let table = match format {
                Format::Markdown => markdown_table(&rows),
                Format::Csv => csv_table(&rows),
            };
            match out {
                Some(p) => fs::write(&p, table).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{table}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let mut spec: SyntheticSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid spec {}", spec_path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let kg = write_synthetic(&spec, out)?;
    println!(
        "wrote {}: {} entities, {} relations, {}/{}/{} train/valid/test triples",
        out.display(),
        kg.n_entities(),
        kg.n_relations(),
        kg.train.len(),
        kg.valid.len(),
        kg.test.len()
    );
    Ok(())
}

fn load_graph(dir: &Path) -> Result<KnowledgeGraph> {
    let kg = KnowledgeGraph::load_dir(dir).with_context(|| format!("loading dataset {}", dir.display()))?;
    Ok(kg.augment_reciprocal()?)
}

fn cmd_train(cfg: &RunConfig, data_dir: Option<&Path>) -> Result<()> {
    let dataset = cfg.resolve_dataset(data_dir)?;
    let Some(out) = cfg.output_dir.clone() else { bail!("no output_dir given") };
    let kg = load_graph(&dataset)?;
    let tc = &cfg.train;
    if !tc.on_reference_grid() {
        eprintln!("note: lr/negatives/batch_size are outside the reference hyperparameter grid");
    }
    fs::create_dir_all(&out)?;
    let mut log = BufWriter::new(File::create(out.join(LOG_FILE))?);
    let start = Instant::now();
    let mut io_error = None;
    let outcome = train(&kg, tc, |rec| {
        let line = serde_json::to_string(rec).expect("serializable record");
        if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
            io_error.get_or_insert(e);
        }
        match rec.val_mrr {
            Some(m) => eprintln!("epoch {:>4} loss {:.5} val_mrr {:.4}", rec.epoch, rec.loss, m),
            None => eprintln!("epoch {:>4} loss {:.5}", rec.epoch, rec.loss),
        }
    })?;
    if let Some(e) = io_error {
        return Err(e).context("writing training log");
    }
    let opts = EvalOptions::default();
    let valid = evaluate(&kg, &outcome.model, Split::Valid, &opts)?;
    let test = evaluate(&kg, &outcome.model, Split::Test, &opts)?;
    let metrics = json!({
        "dataset": dataset,
        "variant": tc.variant,
        "models": tc.models,
        "dim": tc.dim,
        "prefactor": tc.prefactor,
        "distance_power": tc.distance_power,
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.log.len(),
        "wall_ms": start.elapsed().as_millis() as u64,
        "valid": valid,
        "test": test,
    });
    save_checkpoint(
        &out.join(CHECKPOINT_DIR),
        &outcome.model,
        tc,
        outcome.best_epoch,
        json!({ "valid_mrr": valid.mrr, "test_mrr": test.mrr }),
    )?;
    fs::write(out.join(METRICS_FILE), serde_json::to_vec_pretty(&metrics)?)?;
    println!("{}", summary_line("valid", &valid));
    println!("{}", summary_line("test", &test));
    Ok(())
}

fn summary_line(name: &str, r: &RankingReport) -> String {
    let mut s = format!("{name}: MRR {:.4}", r.mrr);
    for (k, v) in &r.hits {
        s.push_str(&format!("  H@{k} {v:.4}"));
    }
    s
}

fn checkpoint_dir(path: &Path) -> PathBuf {
    let nested = path.join(CHECKPOINT_DIR);
    if nested.is_dir() {
        nested
    } else {
        path.to_path_buf()
    }
}

fn load_model(checkpoint: &Path, kg: &KnowledgeGraph) -> Result<(Model, Manifest)> {
    let dir = checkpoint_dir(checkpoint);
    let (model, manifest) =
        load_checkpoint(&dir).with_context(|| format!("loading checkpoint {}", dir.display()))?;
    if model.n_entities != kg.n_entities() || model.n_relations != kg.n_relations() {
        bail!(
            "checkpoint has {} entities / {} relations, dataset has {} / {}",
            model.n_entities,
            model.n_relations,
            kg.n_entities(),
            kg.n_relations()
        );
    }
    Ok((model, manifest))
}

fn cmd_eval(
    checkpoint: &Path,
    dataset: &Path,
    split: Split,
    opts: &EvalOptions,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<()> {
    let kg = load_graph(dataset)?;
    let (model, _) = load_model(checkpoint, &kg)?;
    let report = evaluate(&kg, &model, split, opts)?;
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(p) => fs::write(p, json)?,
        None => println!("{json}"),
    }
    if let Some(p) = csv {
        let parts = constituent_reports(&kg, &model, split, opts)?;
        fs::write(p, per_relation_csv(&report, &parts))?;
    }
    eprintln!("{}", summary_line(split.name(), &report));
    Ok(())
}

fn relation_color(name: &str) -> &'static str {
    let lower = name.to_ascii_lowercase();
    if lower.contains("antisym") {
        "steelblue"
    } else if lower.contains("sym") {
        "seagreen"
    } else {
        "gray"
    }
}

fn cmd_attn(checkpoint: &Path, dataset: &Path, split: Split, out: &Path, svg: bool) -> Result<()> {
    let kg = load_graph(dataset)?;
    let (model, _) = load_model(checkpoint, &kg)?;
    let labels: Vec<String> = model.active_models().iter().map(|m| m.to_string()).collect();
    let report = evaluate(&kg, &model, split, &EvalOptions::default())?;
    fs::create_dir_all(out)?;
    let dump: BTreeMap<&String, BTreeMap<&String, f64>> = report
        .per_relation_attention
        .iter()
        .map(|(rel, a)| (rel, labels.iter().zip(a.iter().copied()).collect()))
        .collect();
    fs::write(out.join("attention.json"), serde_json::to_vec_pretty(&dump)?)?;
    if svg {
        for (rel, a) in &report.per_relation_attention {
            let chart = attention_svg(rel, &labels, a, relation_color(rel));
            fs::write(out.join(format!("attention_{}.svg", file_stem(rel))), chart)?;
        }
    }
    println!("wrote attention for {} relations to {}", dump.len(), out.display());
    Ok(())
}

/// A run directory is read from its metrics file; a config file is trained
/// first.
fn compare_row(path: &Path, data_dir: Option<&Path>) -> Result<CompareRow> {
    let run_dir = if path.is_dir() {
        path.to_path_buf()
    } else {
        let cfg = RunConfig::load(path)?;
        cmd_train(&cfg, data_dir)?;
        cfg.output_dir.clone().expect("checked by cmd_train")
    };
    let metrics_path = run_dir.join(METRICS_FILE);
    let metrics: serde_json::Value = serde_json::from_slice(
        &fs::read(&metrics_path).with_context(|| format!("reading {}", metrics_path.display()))?,
    )?;
    let test: RankingReport = serde_json::from_value(metrics["test"].clone())?;
    let models: Vec<String> = serde_json::from_value(metrics["models"].clone())?;
    let hit = |k: usize| test.hits.get(&k).copied().unwrap_or(f64::NAN);
    Ok(CompareRow {
        name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        variant: metrics["variant"].as_str().unwrap_or("?").to_string(),
        models: models.join(","),
        dim: metrics["dim"].as_u64().unwrap_or(0) as usize,
        mrr: test.mrr,
        hits1: hit(1),
        hits3: hit(3),
        hits10: hit(10),
    })
}
