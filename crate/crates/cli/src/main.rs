//! `longirad`: batch driver for extraction, ROI export, folds, training,
//! evaluation, prediction and phantom generation.

mod config;
mod logging;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use log::{info, warn};
use longirad::case::{CaseRecord, DatasetLayout, RanoLabel};
use longirad::eval::{cross_validate, stratified_patient_folds, FoldAssignment, OutOfFold};
use longirad::fusion::{load_deep_features, read_feature_table, write_feature_table, FeatureTable};
use longirad::gbdt::{self, Ensemble};
use longirad::phantom::gen_cohort;
use longirad::pipeline::{
    build_templates, export_rois, extract_cohort, partition_available, DeepInput, TEMPLATES_FILE,
};
use serde::Serialize;

use config::{ConfigError, Overrides, RunConfig};

const FEATURES_FILE: &str = "features.csv";
const EXTRACT_REPORT_FILE: &str = "extract_report.json";
const FOLDS_FILE: &str = "folds.csv";
const MODEL_FILE: &str = "model.json";
const IMPORTANCE_FILE: &str = "feature_importance.csv";
const METRICS_JSON: &str = "metrics.json";
const METRICS_TXT: &str = "metrics.txt";
const OOF_FILE: &str = "oof_predictions.csv";
const PREDICTIONS_FILE: &str = "predictions.csv";
const ROI_DIR: &str = "roi";

#[derive(Parser, Debug)]
#[command(name = "longirad", version, about = "Longitudinal radiomics response classification")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat any per-case failure as fatal.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Standardize scans and write the feature table.
    Extract,
    /// Export 128x128 ROI patches and their manifest.
    Roi,
    /// Write patient-wise stratified folds.
    Folds,
    /// Train one model on every labeled row.
    Train,
    /// Cross-validate over the folds and write the metrics report.
    Eval,
    /// Predict classes and probabilities for a feature table.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic cohort into the dataset root.
    Phantom,
}

/// A data problem detected after partial work (exit code 1).
#[derive(Debug)]
struct DataError(String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<DataError>()
            || cause.is::<longirad::Error>()
            || cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
        {
            return 1;
        }
    }
    3
}

fn main() -> ExitCode {
    logging::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = std::panic::catch_unwind(|| run(&cli));
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            log::error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| ConfigError("--config is required".into()))?;
    let cfg = RunConfig::load(
        path,
        Overrides {
            seed: cli.seed,
            strict: cli.strict,
        },
    )?;
    if !matches!(cli.command, Command::Predict { .. }) {
        fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    }
    match &cli.command {
        Command::Extract => cmd_extract(&cfg),
        Command::Roi => cmd_roi(&cfg),
        Command::Folds => cmd_folds(&cfg).map(|_| ()),
        Command::Train => cmd_train(&cfg),
        Command::Eval => cmd_eval(&cfg),
        Command::Predict { model, table, output } => cmd_predict(
            &cfg,
            model.clone().unwrap_or_else(|| cfg.out(MODEL_FILE)),
            table.clone().unwrap_or_else(|| cfg.out(FEATURES_FILE)),
            output.clone().unwrap_or_else(|| cfg.out(PREDICTIONS_FILE)),
        ),
        Command::Phantom => cmd_phantom(&cfg),
    }
}

fn dataset(cfg: &RunConfig) -> anyhow::Result<(DatasetLayout, Vec<CaseRecord>)> {
    cfg.require_dataset()?;
    let layout = DatasetLayout::new(&cfg.dataset_root);
    let records = layout.read_cases().context("reading the case list")?;
    Ok((layout, records))
}

#[derive(Serialize)]
struct Issue {
    case: String,
    reason: String,
}

#[derive(Serialize)]
struct ExtractReport {
    cases_listed: usize,
    extracted: usize,
    columns: usize,
    skipped: Vec<Issue>,
    failed: Vec<Issue>,
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_extract(cfg: &RunConfig) -> anyhow::Result<()> {
    let (layout, records) = dataset(cfg)?;
    let (available, _) = partition_available(&layout, &records);
    let templates = build_templates(&layout, &available)?;
    templates.save(cfg.out(TEMPLATES_FILE))?;
    let deep = match &cfg.deep_features {
        Some(p) => Some(load_deep_features(p)?),
        None => None,
    };
    let outcome = extract_cohort(
        &layout,
        &records,
        &templates,
        &cfg.features,
        deep.as_ref().map(|table| DeepInput {
            table,
            strict: cfg.strict,
        }),
    )?;
    write_feature_table(&outcome.table, cfg.out(FEATURES_FILE))?;
    let report = ExtractReport {
        cases_listed: records.len(),
        extracted: outcome.table.rows.len(),
        columns: outcome.table.columns.len(),
        skipped: outcome
            .skipped
            .iter()
            .map(|s| Issue {
                case: s.case_id.clone(),
                reason: s.reason.clone(),
            })
            .collect(),
        failed: outcome
            .failures
            .iter()
            .map(|f| Issue {
                case: f.key.case_id(),
                reason: f.error.clone(),
            })
            .collect(),
    };
    write_json(&cfg.out(EXTRACT_REPORT_FILE), &report)?;
    info!(
        extracted = report.extracted,
        skipped = report.skipped.len(),
        failed = report.failed.len(),
        columns = report.columns;
        "feature table written"
    );
    if cfg.strict && !report.failed.is_empty() {
        return Err(DataError(format!("{} case(s) failed in strict mode", report.failed.len())).into());
    }
    Ok(())
}

fn cmd_roi(cfg: &RunConfig) -> anyhow::Result<()> {
    let (layout, records) = dataset(cfg)?;
    let (available, _) = partition_available(&layout, &records);
    let templates = build_templates(&layout, &available)?;
    let outcome = export_rois(
        &layout,
        &records,
        &templates,
        &cfg.features.compartments,
        cfg.out(ROI_DIR),
    )?;
    info!(
        exported = outcome.manifest.cases.len(),
        skipped = outcome.manifest.skipped.len(),
        failed = outcome.failures.len();
        "roi manifest written"
    );
    if cfg.strict && !outcome.failures.is_empty() {
        return Err(DataError(format!("{} case(s) failed in strict mode", outcome.failures.len())).into());
    }
    Ok(())
}

fn labeled_cases(records: &[CaseRecord]) -> Vec<(String, RanoLabel)> {
    records
        .iter()
        .filter_map(|r| r.label.map(|l| (r.patient_id.clone(), l)))
        .collect()
}

fn cmd_folds(cfg: &RunConfig) -> anyhow::Result<FoldAssignment> {
    let (layout, records) = dataset(cfg)?;
    let (available, _) = partition_available(&layout, &records);
    let fa = stratified_patient_folds(&labeled_cases(&available), cfg.folds.k, cfg.seed)?;
    fa.write_csv(cfg.out(FOLDS_FILE))?;
    info!(k = fa.k, patients = fa.folds.len(); "folds written");
    Ok(fa)
}

fn labeled_table(path: &Path) -> anyhow::Result<FeatureTable> {
    let t = read_feature_table(path).with_context(|| format!("reading {}", path.display()))?;
    let unlabeled = t.rows.iter().filter(|r| r.label.is_none()).count();
    if unlabeled > 0 {
        warn!("{unlabeled} unlabeled row(s) left out of training");
    }
    let rows = t.rows.into_iter().filter(|r| r.label.is_some()).collect();
    Ok(FeatureTable::new(t.columns, rows)?)
}

fn cmd_train(cfg: &RunConfig) -> anyhow::Result<()> {
    let table = labeled_table(&cfg.out(FEATURES_FILE))?;
    let labels: Vec<usize> = table.labels()?.iter().map(|l| l.index()).collect();
    let model = gbdt::train(&table.matrix(), &labels, table.columns.clone(), &cfg.train)?;
    model.save(cfg.out(MODEL_FILE))?;
    let path = cfg.out(IMPORTANCE_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["feature", "gain"])?;
    for (name, gain) in model.feature_importance() {
        w.write_record([name, gain.to_string()])?;
    }
    w.flush()?;
    info!(rows = labels.len(), trees = model.n_trees(); "model written");
    Ok(())
}

fn write_oof(path: &Path, preds: &[OutOfFold]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "patient_id",
        "baseline_session",
        "followup_session",
        "fold",
        "label",
        "predicted",
        "p_CR",
        "p_PR",
        "p_SD",
        "p_PD",
    ])?;
    for p in preds {
        let mut rec = vec![
            p.key.patient_id.clone(),
            p.key.baseline_session.clone(),
            p.key.followup_session.clone(),
            p.fold.to_string(),
            p.label.to_string(),
            p.predicted.to_string(),
        ];
        rec.extend(p.probabilities.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval(cfg: &RunConfig) -> anyhow::Result<()> {
    let table = labeled_table(&cfg.out(FEATURES_FILE))?;
    let folds_path = cfg.out(FOLDS_FILE);
    let folds = if folds_path.is_file() {
        FoldAssignment::read_csv(&folds_path)?
    } else {
        let cases: Vec<(String, RanoLabel)> = table
            .rows
            .iter()
            .map(|r| (r.key.patient_id.clone(), r.label.expect("labeled table")))
            .collect();
        let fa = stratified_patient_folds(&cases, cfg.folds.k, cfg.seed)?;
        fa.write_csv(&folds_path)?;
        fa
    };
    let name = if cfg.deep_features.is_some() {
        "handcrafted+deep"
    } else {
        "handcrafted"
    };
    let cv = cross_validate(name, &table, &folds, &cfg.train)?;
    fs::write(cfg.out(METRICS_JSON), cv.report.to_json()? + "\n")?;
    let text = cv.report.to_text();
    fs::write(cfg.out(METRICS_TXT), &text)?;
    write_oof(&cfg.out(OOF_FILE), &cv.predictions)?;
    print!("{text}");
    Ok(())
}

fn cmd_predict(_cfg: &RunConfig, model: PathBuf, table: PathBuf, output: PathBuf) -> anyhow::Result<()> {
    let model = Ensemble::load(&model).with_context(|| format!("loading {}", model.display()))?;
    let t = read_feature_table(&table).with_context(|| format!("reading {}", table.display()))?;
    let order: Vec<usize> = model
        .feature_names
        .iter()
        .map(|n| {
            t.column_index(n)
                .ok_or_else(|| DataError(format!("feature table lacks model column {n}")))
        })
        .collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_path(&output)?;
    w.write_record([
        "patient_id",
        "baseline_session",
        "followup_session",
        "predicted",
        "p_CR",
        "p_PR",
        "p_SD",
        "p_PD",
    ])?;
    for r in &t.rows {
        let x: Vec<f64> = order.iter().map(|&i| r.values[i]).collect();
        let p = model.predict_proba(&x)?;
        let class = RanoLabel::from_index(gbdt::argmax(&p)).expect("four classes");
        let mut rec = vec![
            r.key.patient_id.clone(),
            r.key.baseline_session.clone(),
            r.key.followup_session.clone(),
            class.to_string(),
        ];
        rec.extend(p.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    info!(rows = t.rows.len(); "predictions written");
    Ok(())
}

fn cmd_phantom(cfg: &RunConfig) -> anyhow::Result<()> {
    let p = &cfg.phantom;
    let records = gen_cohort(&p.spec, p.n_patients, p.cases_per_patient, &cfg.dataset_root)?;
    info!(cases = records.len(), root:% = cfg.dataset_root.display(); "phantom cohort written");
    Ok(())
}
