use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rldlab::data::write_csv;
use rldlab::harness::{
    ablation_cells, aggregate, decision_panels, ensure_dir, default_threads, expand_axes, format_table, generate_domains,
    make_split, prepare, read_records, read_text, run_cells, run_prepared, run_stream, score_source_model,
    slug, write_aggregate_csv, write_json, write_jsonl, write_text, Ablation, ExperimentConfig, FeedbackSplit,
    Prepared, RunRecord,
};
use rldlab::nn::MlpModel;
use rldlab::{Error, Result};

#[derive(Parser)]
#[command(name = "rldlab", version, about = "Domain adaptation from biased user feedback on 2-D toy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set adapt.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to `output_dir` from the configuration.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SeedArg {
    /// Seed for single-run commands; defaults to the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write source and target train/test splits as CSV.
    GenData {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train the source model and report source/target test accuracy.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Simulate feedback and adapt the source model once.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seed: SeedArg,
        /// Source model JSON from `pretrain`; trained from scratch when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run every configured seed over the declared sweep axes or built-in ablations.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Built-in ablation axis (k, p, batch_ratio, strategy, pf_nf, feedback_amount or all);
        /// repeatable. Replaces the axes declared in the configuration.
        #[arg(long = "ablation")]
        ablations: Vec<String>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Streaming adaptation with a bounded memory of unlabeled samples.
    Stream {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Aggregate run records into mean ± std tables.
    Report {
        /// JSON-lines file of run records written by `sweep`.
        #[arg(long)]
        input: PathBuf,
        /// Directory for aggregate.csv and aggregate.txt; printed only when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Decision-boundary SVGs: source model, baseline-adapted, retrieval-adapted.
    Plot {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path, &common.overrides)?,
        None => ExperimentConfig::from_toml_str("", &common.overrides)?,
    };
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn seed_of(cfg: &ExperimentConfig, seed: &SeedArg) -> u64 {
    seed.seed.unwrap_or(cfg.seeds[0])
}

fn write_resolved(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let text = toml::to_string_pretty(cfg).map_err(|e| Error::Parse(format!("config: {e}")))?;
    write_text(&out.join("config.resolved.toml"), &text)
}

fn gen_data(common: &Common, seed: &SeedArg) -> Result<()> {
    let (cfg, out) = load(common)?;
    let seed = seed_of(&cfg, seed);
    let d = generate_domains(&cfg.dataset, seed)?;
    write_resolved(&cfg, &out)?;
    let path = out.join("data.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_csv(
        file,
        &[
            (&d.source_train, "train"),
            (&d.source_test, "test"),
            (&d.target_train, "train"),
            (&d.target_test, "test"),
        ],
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pretrain_cmd(common: &Common, seed: &SeedArg) -> Result<()> {
    let (cfg, out) = load(common)?;
    let seed = seed_of(&cfg, seed);
    let prepared = prepare(&cfg, seed)?;
    write_resolved(&cfg, &out)?;
    write_text(&out.join("model.json"), &prepared.model.to_json())?;
    let summary = prepared.pretrain_summary();
    write_json(&out.join("pretrain.json"), &summary)?;
    println!(
        "source test accuracy {:.2}%, target test accuracy {:.2}%",
        100.0 * summary.source_acc,
        100.0 * summary.target_acc
    );
    Ok(())
}

fn prepared_for(cfg: &ExperimentConfig, seed: u64, model: Option<&Path>) -> Result<Prepared> {
    match model {
        None => prepare(cfg, seed),
        Some(path) => {
            let model = MlpModel::from_json(&read_text(path)?)?;
            if model.head() != cfg.dataset.head() {
                return Err(Error::InvalidConfig(format!(
                    "{} has a {:?} head but the dataset needs {:?}",
                    path.display(),
                    model.head(),
                    cfg.dataset.head()
                )));
            }
            score_source_model(generate_domains(&cfg.dataset, seed)?, model)
        }
    }
}

fn adapt_cmd(common: &Common, seed: &SeedArg, model: Option<&Path>) -> Result<()> {
    let (cfg, out) = load(common)?;
    let seed = seed_of(&cfg, seed);
    let prepared = prepared_for(&cfg, seed, model)?;
    let run = run_prepared(&cfg, &prepared, seed)?;
    write_resolved(&cfg, &out)?;
    let split_json = match &run.split {
        FeedbackSplit::Multiclass(s) => s.to_json(),
        FeedbackSplit::Binary(s) => serde_json::to_string_pretty(s)?,
    };
    write_text(&out.join("split.json"), &split_json)?;
    write_jsonl(&out.join("epochs.jsonl"), &run.record.epochs)?;
    write_json(&out.join("run.json"), &run.record)?;
    let metrics = run.record.final_metrics.as_ref().expect("successful run has metrics");
    write_json(&out.join("metrics.json"), metrics)?;
    write_text(&out.join("adapted_model.json"), &run.model.to_json())?;
    println!(
        "target test accuracy {:.2}% -> {:.2}%",
        100.0 * metrics.source_target_acc,
        100.0 * metrics.target_acc
    );
    Ok(())
}

fn write_sweep(records: &[RunRecord], out: &Path) -> Result<()> {
    write_jsonl(&out.join("runs.jsonl"), records)?;
    for r in records {
        let name = format!("{}_seed{}.jsonl", slug(&r.cell), r.seed);
        write_jsonl(&out.join("logs").join(name), &r.epochs)?;
    }
    write_report(records, Some(out))
}

fn write_report(records: &[RunRecord], out: Option<&Path>) -> Result<()> {
    let rows = aggregate(records);
    let table = format_table(&rows);
    if let Some(out) = out {
        ensure_dir(out)?;
        let path = out.join("aggregate.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_aggregate_csv(&rows, file)?;
        write_text(&out.join("aggregate.txt"), &table)?;
    }
    print!("{table}");
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see the `error` field in runs.jsonl");
    }
    Ok(())
}

fn sweep_cmd(common: &Common, ablations: &[String], threads: Option<usize>) -> Result<()> {
    let (cfg, out) = load(common)?;
    let threads = threads.unwrap_or_else(default_threads);
    let mut cells = Vec::new();
    if ablations.is_empty() {
        cells = expand_axes(&cfg)?;
    } else {
        for name in ablations {
            if name == "all" {
                for a in Ablation::ALL {
                    cells.extend(ablation_cells(&cfg, a)?);
                }
            } else {
                cells.extend(ablation_cells(&cfg, Ablation::parse(name)?)?);
            }
        }
    }
    let records = run_cells(&cells, &cfg.seeds, threads);
    write_resolved(&cfg, &out)?;
    write_sweep(&records, &out)?;
    println!("{} runs written to {}", records.len(), out.join("runs.jsonl").display());
    Ok(())
}

fn stream_cmd(common: &Common, seed: &SeedArg) -> Result<()> {
    let (cfg, out) = load(common)?;
    let seed = seed_of(&cfg, seed);
    let prepared = prepare(&cfg, seed)?;
    let FeedbackSplit::Multiclass(split) = make_split(&cfg, &prepared, seed)? else {
        return Err(Error::InvalidConfig("streaming supports multi-class datasets only".into()));
    };
    let d = &prepared.domains;
    let outcome = run_stream(&prepared.model, &d.target_train, &d.target_test, &split, &cfg.adapt, &cfg.stream, seed)?;
    write_resolved(&cfg, &out)?;
    write_json(&out.join("stream.json"), &outcome)?;
    for c in &outcome.checkpoints {
        println!(
            "{:>5.1}% of stream ({} items, memory {}, feedback {}): {:.2}%{}",
            100.0 * c.fraction,
            c.items_seen,
            c.occupancy,
            c.labeled,
            100.0 * c.test_acc,
            if c.skipped { " (skipped)" } else { "" }
        );
    }
    Ok(())
}

fn report_cmd(input: &Path, out: Option<&Path>) -> Result<()> {
    let file = File::open(input).map_err(|e| Error::io(input, e))?;
    let records = read_records(file)?;
    write_report(&records, out)
}

fn plot_cmd(common: &Common, seed: &SeedArg) -> Result<()> {
    let (cfg, out) = load(common)?;
    let seed = seed_of(&cfg, seed);
    let prepared = prepare(&cfg, seed)?;
    for panel in decision_panels(&cfg, &prepared, seed)? {
        let path = out.join(format!("{}.svg", panel.name));
        write_text(&path, &panel.svg)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData { common, seed } => gen_data(common, seed),
        Command::Pretrain { common, seed } => pretrain_cmd(common, seed),
        Command::Adapt { common, seed, model } => adapt_cmd(common, seed, model.as_deref()),
        Command::Sweep {
            common,
            ablations,
            threads,
        } => sweep_cmd(common, ablations, *threads),
        Command::Stream { common, seed } => stream_cmd(common, seed),
        Command::Report { input, out } => report_cmd(input, out.as_deref()),
        Command::Plot { common, seed } => plot_cmd(common, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
