use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ecg_complexity::config::RunConfig;
use ecg_complexity::features::{FeatureSet, FeatureTable};
use ecg_complexity::ingest::{load_index, SignalFormat};
use ecg_complexity::model::{
    confusion_csv, metrics_csv_line, roc_csv, train_and_evaluate, ModelError, Task, METRICS_HEADER,
};
use ecg_complexity::pipeline::extract_dataset;
use ecg_complexity::stats::{pairwise_heatmap, stats_report};
use ecg_complexity::synth::{write_dataset, SynthSpec};

#[derive(Parser)]
#[command(name = "ecgcx", version, about = "Complexity features, rank tests, and classifiers for 12-lead ECG datasets")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace); RUST_LOG overrides.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-record features into features.csv.
    Extract(Common),
    /// Rank tests and the per-class z heatmap from a feature table.
    Stats(Analyse),
    /// Train and evaluate logistic regression models.
    Train(TrainArgs),
    /// Extract, test, and train in one go.
    Report(Common),
    /// Write a synthetic dataset with the PTB-XL layout.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// baseline, complexity, cross, or meta (cumulative).
    #[arg(long)]
    feature_set: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    test_fold: Option<u8>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override any config key, e.g. `--set rqa.target_rr=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone)]
struct Analyse {
    #[command(flatten)]
    common: Common,
    /// Feature table; defaults to <out>/features.csv.
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[command(flatten)]
    analyse: Analyse,
    #[arg(long, value_enum, default_value = "both")]
    task: TaskArg,
    /// Train every cumulative feature set instead of only --feature-set.
    #[arg(long)]
    all_sets: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    records: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// 0-based positions of records whose signal file gets truncated.
    #[arg(long, value_delimiter = ',')]
    corrupt: Vec<usize>,
    /// Every n-th record gets no diagnostic superclass.
    #[arg(long)]
    unlabeled_every: Option<usize>,
    /// Every n-th record gets a second superclass.
    #[arg(long)]
    multi_label_every: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Wfdb,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum TaskArg {
    Binary,
    Five,
    Both,
}

/// Error with its exit code.
enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Data(e) | Failure::Numerical(e) => e,
        }
    }
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::NonFinite => Failure::Numerical(e.into()),
        ModelError::Param(_) | ModelError::BadFold(_) => Failure::Config(e.into()),
        _ => Failure::Data(e.into()),
    }
}

type Outcome<T> = Result<T, Failure>;

fn build_config(c: &Common) -> Outcome<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p).map_err(config_err)?,
        None => RunConfig::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_err(anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(config_err)?;
    }
    if let Some(d) = &c.data_dir {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(fs) = &c.feature_set {
        cfg.feature_set = fs.parse().map_err(|e: String| config_err(anyhow!(e)))?;
    }
    if let Some(a) = c.alpha {
        cfg.alpha = a;
    }
    if let Some(t) = c.test_fold {
        cfg.test_fold = t;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(f) = c.format {
        cfg.format = match f {
            Format::Wfdb => SignalFormat::Wfdb,
            Format::Csv => SignalFormat::Csv,
        };
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn ensure_out(cfg: &RunConfig) -> Outcome<()> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))
        .map_err(data)
}

fn cmd_extract(cfg: &RunConfig) -> Outcome<PathBuf> {
    let data_dir = cfg
        .data_dir
        .clone()
        .ok_or_else(|| config_err(anyhow!("no dataset directory (use --data-dir or data.dir)")))?;
    let meta = cfg.metadata_path().unwrap();
    let stmts = cfg.statements_path().unwrap();
    let index = load_index(&meta, &stmts).map_err(data)?;
    for skip in &index.skipped {
        log::warn!("index line {} skipped: {}", skip.line, skip.reason);
    }
    let ex = extract_dataset(&index, &data_dir, cfg);
    ensure_out(cfg)?;
    let hash = cfg.hash();
    let path = cfg.out_dir.join("features.csv");
    ex.table.write_csv(&path, Some(&hash)).map_err(data)?;
    let mut table = ex.table.clone();
    table.provenance.extend([
        ("records_indexed".into(), index.rows.len().to_string()),
        ("index_rows_skipped".into(), index.skipped.len().to_string()),
        ("records_unlabeled".into(), ex.unlabeled.to_string()),
        ("records_multi_labeled".into(), ex.multi_labeled.to_string()),
        ("records_attempted".into(), ex.attempted.to_string()),
        ("records_extracted".into(), ex.table.rows.len().to_string()),
        ("records_failed".into(), ex.failures.len().to_string()),
    ]);
    table
        .write_metadata(&cfg.out_dir.join("features.meta"))
        .map_err(data)?;
    log::info!(
        "extracted {} of {} labeled records ({} failed) into {}",
        ex.table.rows.len(),
        ex.attempted,
        ex.failures.len(),
        path.display()
    );
    if !ex.acceptable(cfg.min_success) {
        return Err(data(anyhow!(
            "only {} of {} records extracted",
            ex.table.rows.len(),
            ex.attempted
        )));
    }
    Ok(path)
}

fn load_table(cfg: &RunConfig, features: &Option<PathBuf>) -> Outcome<FeatureTable> {
    let path = features
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("features.csv"));
    let (table, hash) = FeatureTable::read_csv(&path).map_err(data)?;
    match hash {
        Some(h) if h != cfg.hash() => log::warn!(
            "{} was written under config {h}; current config is {}",
            path.display(),
            cfg.hash()
        ),
        None => log::warn!("{} carries no config hash", path.display()),
        _ => {}
    }
    Ok(table)
}

fn cmd_stats(cfg: &RunConfig, table: &FeatureTable) -> Outcome<()> {
    let table = table.select(cfg.feature_set);
    let hash = cfg.hash();
    let report = stats_report(&table, cfg.alpha).map_err(data)?;
    let heat = pairwise_heatmap(&table, cfg.alpha).map_err(data)?;
    ensure_out(cfg)?;
    write(&cfg.out_dir.join("stats.csv"), &report.to_csv_string(Some(&hash)))?;
    write(&cfg.out_dir.join("heatmap.csv"), &heat.to_csv_string(Some(&hash)))?;
    log::info!("wrote stats.csv and heatmap.csv for {} features", table.feature_names.len());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, table: &FeatureTable, task: TaskArg, all_sets: bool) -> Outcome<()> {
    let sets: Vec<FeatureSet> = if all_sets {
        FeatureSet::ALL.to_vec()
    } else {
        vec![cfg.feature_set]
    };
    let tasks: Vec<Task> = match task {
        TaskArg::Binary => vec![Task::Binary],
        TaskArg::Five => vec![Task::FiveClass],
        TaskArg::Both => vec![Task::Binary, Task::FiveClass],
    };
    let hash = cfg.hash();
    ensure_out(cfg)?;
    let mut csv = format!("# config_hash={hash}\n{METRICS_HEADER}\n");
    let mut text = format!("config_hash={hash}\n");
    for set in &sets {
        let sub = table.select(*set);
        for t in &tasks {
            let (model, m, split) =
                train_and_evaluate(&sub, *t, cfg.test_fold, &cfg.train).map_err(model_failure)?;
            csv.push_str(&metrics_csv_line(set.as_str(), &model, &m, &split));
            csv.push('\n');
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
            text.push_str(&format!(
                "\n[{set} / {t}] {} features, train {} / test {} ({})\n  accuracy {:.4}  mcc {:.4}  auc {}\n",
                model.preprocessor.kept.len(),
                split.train_ids.len(),
                m.n,
                split.rule,
                m.accuracy,
                m.mcc,
                fmt(m.auc)
            ));
            if *t == Task::FiveClass {
                text.push_str(&format!(
                    "  ovr macro {}  ovr weighted {}  ovo macro {}  ovo weighted {}\n",
                    fmt(m.ovr_macro_auc),
                    fmt(m.ovr_weighted_auc),
                    fmt(m.ovo_macro_auc),
                    fmt(m.ovo_weighted_auc)
                ));
            }
            if !model.converged {
                text.push_str(&format!("  optimiser stopped after {} iterations\n", model.iterations));
            }
            let tag = format!("{t}_{set}");
            let header = format!("# config_hash={hash}\n");
            write(
                &cfg.out_dir.join(format!("confusion_{tag}.csv")),
                &(header.clone() + &confusion_csv(*t, &m.confusion)),
            )?;
            if *t == Task::Binary {
                write(&cfg.out_dir.join(format!("roc_{tag}.csv")), &(header + &roc_csv(&m.roc)))?;
            }
            log::info!("{set}/{t}: accuracy {:.4}, mcc {:.4}, auc {}", m.accuracy, m.mcc, fmt(m.auc));
        }
    }
    write(&cfg.out_dir.join("metrics.csv"), &csv)?;
    write(&cfg.out_dir.join("metrics.txt"), &text)?;
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Outcome<()> {
    fs::create_dir_all(&a.out)
        .with_context(|| format!("creating {}", a.out.display()))
        .map_err(data)?;
    let spec = SynthSpec {
        n_records: a.records,
        seed: a.seed,
        corrupt: a.corrupt.clone(),
        unlabeled_every: a.unlabeled_every,
        multi_label_every: a.multi_label_every,
        ..SynthSpec::default()
    };
    let meta = write_dataset(&a.out, &spec).map_err(data)?;
    log::info!("wrote {} records; index at {}", a.records, meta.display());
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Extract(c) => cmd_extract(&build_config(&c)?).map(|_| ()),
        Command::Stats(a) => {
            let cfg = build_config(&a.common)?;
            let table = load_table(&cfg, &a.features)?;
            cmd_stats(&cfg, &table)
        }
        Command::Train(t) => {
            let cfg = build_config(&t.analyse.common)?;
            let table = load_table(&cfg, &t.analyse.features)?;
            cmd_train(&cfg, &table, t.task, t.all_sets)
        }
        Command::Report(c) => {
            let cfg = build_config(&c)?;
            let path = cmd_extract(&cfg)?;
            let table = load_table(&cfg, &Some(path))?;
            cmd_stats(&cfg, &table)?;
            cmd_train(&cfg, &table, TaskArg::Both, true)
        }
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
