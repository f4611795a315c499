//! Command-line front end. `cli_main` is callable from tests.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{correlation_matrix, CorrelationMatrix};
use crate::data::{load_dataset, write_dataset, DataError, Dataset, Property};
use crate::llm::{
    ingest_response_dir, load_endpoints, parse_llm_csv, render_prompt, write_response, LlmClient, LlmError,
    ParseMode, PromptTemplate, ReqwestTransport, ResponseContext,
};
use crate::pipeline::{make_folds, run_pls_branch, PipelineError, PlsBranch, RunConfig, DEFAULT_SEEDS, RNG_ALGORITHM};
use crate::records::{check_records, read_predictions, sort_records, write_predictions, PredictionRecord, RecordError};
use crate::report::{figure_data, rank_models, read_summary_table, FigureKind, OutputTree, Provenance, RankingTable, ReportError};
use crate::stats::{
    compare_all, compute_residuals, run_summaries, summarize_runs, CompareOptions, ComparisonResult, MethodSummary,
    ResidualRecord, RunSummary, StatsError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NETWORK: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "membench", version, about = "Leakage-free PLS vs LLM benchmarking on small membrane datasets")]
pub struct Cli {
    /// Dataset CSV; the bundled dataset when omitted.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Comma-separated run seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Number of runs; seeds 42, 43, ... when --seeds is absent.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Bootstrap-perturb each training fold (default).
    #[arg(long, global = true, overrides_with = "no_bootstrap")]
    pub bootstrap: bool,
    /// Deterministic mode: fit on the plain training fold.
    #[arg(long = "no-bootstrap", global = true, overrides_with = "bootstrap")]
    pub no_bootstrap: bool,
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Prompt template (TOML); the built-in template when omitted.
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    /// No console tables; files only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args, Clone)]
pub struct PredictionArgs {
    /// Prediction CSVs; defaults to every CSV under <out-dir>/predictions.
    #[arg(long = "predictions")]
    pub predictions: Vec<PathBuf>,
}

#[derive(Debug, clap::Args, Clone)]
pub struct CompareArgs {
    /// Restrict to one property (E, TS or EL).
    #[arg(long)]
    pub target: Option<Property>,
    #[arg(long, default_value = "PLS")]
    pub baseline: String,
    #[arg(long, default_value_t = crate::stats::effect::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = crate::stats::effect::DEFAULT_CI_SEED)]
    pub ci_seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correlation matrix of descriptors and targets.
    Correlate,
    /// Outer LOOCV PLS branch over all seeds.
    RunPls,
    /// Render one closed-book prompt per fold.
    GenPrompts,
    /// Query live endpoints and archive the raw responses.
    Query {
        /// Endpoints file (TOML, `[[endpoint]]` tables).
        #[arg(long)]
        endpoints: PathBuf,
        /// Archive root; <out-dir>/responses by default.
        #[arg(long)]
        responses: Option<PathBuf>,
        /// Only these endpoint names.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long)]
        strict: bool,
    },
    /// Parse a response archive `<model>/<run>/<fold>.csv` into predictions.
    Ingest {
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Residuals, per-run metrics and run summaries.
    Evaluate(PredictionArgs),
    /// Wilcoxon + BH and ΔRMSE with bootstrap CIs against the baseline.
    Compare {
        #[command(flatten)]
        preds: PredictionArgs,
        #[command(flatten)]
        opts: CompareArgs,
    },
    /// Rank methods by run-averaged RMSE.
    Rank {
        /// Summary table (method,property,rmse_mean,...); computed from predictions when omitted.
        #[arg(long)]
        summaries: Option<PathBuf>,
        #[command(flatten)]
        preds: PredictionArgs,
    },
    /// Figure data (CSV/JSON) and SVG.
    Figures {
        #[arg(long, value_enum)]
        kind: Option<FigureKind>,
        #[arg(long)]
        property: Option<Property>,
        #[command(flatten)]
        preds: PredictionArgs,
    },
    /// Everything that runs offline, in one go.
    Repro {
        /// Stored responses to include.
        #[arg(long)]
        responses: Option<PathBuf>,
        /// Never touch the network (repro is offline in any case).
        #[arg(long)]
        no_network: bool,
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        opts: CompareArgs,
    },
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    Network(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Network(_) => EXIT_NETWORK,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::Network(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RecordError> for CliError {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        if e.is_network() {
            CliError::Network(e.to_string())
        } else if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Parsed global state shared by every subcommand.
struct Ctx {
    ds: Dataset,
    cfg: RunConfig,
    template: PromptTemplate,
    format: Format,
    out: OutputTree,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx, CliError> {
        let ds = match &cli.data {
            Some(p) => load_dataset(p)?,
            None => Dataset::canonical(),
        };
        let seeds = match (&cli.seeds, cli.runs) {
            (Some(s), Some(r)) if s.len() != r => {
                return Err(CliError::Validation(format!("--runs {r} but {} seeds given", s.len())))
            }
            (Some(s), _) => s.clone(),
            (None, Some(r)) => (0..r as u64).map(|i| DEFAULT_SEEDS[0] + i).collect(),
            (None, None) => DEFAULT_SEEDS.to_vec(),
        };
        let cfg = RunConfig::new(seeds, !cli.no_bootstrap)?;
        let template = match &cli.template {
            Some(p) => PromptTemplate::from_toml(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
            None => PromptTemplate::default(),
        };
        let mut canon = Vec::new();
        write_dataset(&ds, &mut canon).map_err(|e| CliError::Io(e.to_string()))?;
        let provenance = Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: cfg.seeds.clone(),
            bootstrap: cfg.bootstrap,
            rng: RNG_ALGORITHM.to_string(),
            template_hash: template.hash(),
            data_sha256: crate::report::sha256_hex(&canon),
        };
        Ok(Ctx {
            ds,
            cfg,
            template,
            format: cli.format,
            out: OutputTree::new(&cli.out_dir, provenance),
        })
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    /// Writes a table either as CSV (header + rows) or as JSON (`data`).
    fn write_table<T: Serialize>(&mut self, stem: &str, header: &[&str], rows: Vec<Vec<String>>, data: &T)
        -> Result<PathBuf, CliError> {
        let rel = format!("{stem}.{}", self.ext());
        Ok(match self.format {
            Format::Csv => self.out.write_csv(&rel, &csv_text(header, &rows))?,
            Format::Json => self.out.write_json(&rel, data)?,
        })
    }

    fn write_predictions(&mut self, rel: &str, records: &[PredictionRecord]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        write_predictions(records, &[self.out.provenance.header_line()], &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(self.out.write_raw(rel, &String::from_utf8_lossy(&buf))?)
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let _ = w.write_record(header);
    for r in rows {
        let _ = w.write_record(r);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

// ---------------------------------------------------------------- steps

fn do_correlate(ctx: &mut Ctx) -> Result<CorrelationMatrix, CliError> {
    let m = correlation_matrix(&ctx.ds)?;
    let mut header = vec!["variable"];
    header.extend(m.labels.iter().map(String::as_str));
    let rows = m
        .labels
        .iter()
        .zip(&m.values)
        .map(|(l, row)| std::iter::once(l.clone()).chain(row.iter().map(|v| f6(*v))).collect())
        .collect();
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    ctx.write_table("reports/correlation", &hdr, rows, &m)?;
    Ok(m)
}

fn print_correlation(m: &CorrelationMatrix) {
    print!("{:>4}", "");
    for l in &m.labels {
        print!("{l:>8}");
    }
    println!();
    for (l, row) in m.labels.iter().zip(&m.values) {
        print!("{l:>4}");
        for v in row {
            print!("{v:>8.3}");
        }
        println!();
    }
}

fn do_run_pls(ctx: &mut Ctx) -> Result<PlsBranch, CliError> {
    let branch = run_pls_branch(&ctx.ds, &ctx.cfg)?;
    ctx.write_predictions("predictions/pls.csv", &branch.records)?;
    let header = ["run", "seed", "fold", "held_out", "property", "chosen_k", "redraws", "skipped_inner", "prediction"];
    let mut rows = Vec::new();
    for fit in &branch.fits {
        for m in &fit.models {
            rows.push(vec![
                fit.run.to_string(),
                ctx.cfg.seeds[fit.run as usize - 1].to_string(),
                fit.plan.fold_index.to_string(),
                fit.plan.held_out_id.clone(),
                m.property.to_string(),
                m.selection.chosen_k.to_string(),
                fit.plan.redraws.to_string(),
                m.selection.skipped.len().to_string(),
                f6(m.prediction),
            ]);
        }
    }
    let fits = &branch.fits;
    ctx.write_table("reports/pls_folds", &header, rows, fits)?;
    Ok(branch)
}

fn do_gen_prompts(ctx: &mut Ctx) -> Result<usize, CliError> {
    let folds = make_folds(&ctx.ds);
    let mut rows = Vec::new();
    for f in &folds {
        let text = render_prompt(&ctx.template, f, &ctx.ds)?;
        let rel = format!("prompts/fold{:02}.txt", f.fold_index);
        ctx.out.write_raw(&rel, &text)?;
        rows.push(vec![
            f.fold_index.to_string(),
            f.held_out_id.clone(),
            rel,
            crate::report::sha256_hex(text.as_bytes()),
        ]);
    }
    ctx.out
        .write_csv("prompts/index.csv", &csv_text(&["fold", "held_out", "file", "sha256"], &rows))?;
    Ok(folds.len())
}

fn do_ingest(ctx: &mut Ctx, responses: &Path, strict: bool) -> Result<Vec<PredictionRecord>, CliError> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let report = ingest_response_dir(responses, &ctx.ds, mode)?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    log::info!("{} run-column corrections while ingesting", report.warnings.len());
    ctx.write_predictions("predictions/llm.csv", &report.records)?;
    Ok(report.records)
}

fn load_predictions(ctx: &Ctx, args: &PredictionArgs) -> Result<Vec<PredictionRecord>, CliError> {
    let files: Vec<PathBuf> = if args.predictions.is_empty() {
        let dir = ctx.out.root.join("predictions");
        let mut v: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        v.sort();
        v
    } else {
        args.predictions.clone()
    };
    if files.is_empty() {
        return Err(CliError::Validation("no prediction files found".into()));
    }
    let mut all = Vec::new();
    for f in &files {
        let file = fs::File::open(f).map_err(|e| io_err(f, e))?;
        let recs = read_predictions(file).map_err(|e| match e {
            RecordError::Io(io) => io_err(f, io),
            other => CliError::Validation(format!("{}: {other}", f.display())),
        })?;
        all.extend(recs);
    }
    check_records(&all)?;
    sort_records(&mut all, &ctx.ds);
    Ok(all)
}

struct Evaluation {
    residuals: Vec<ResidualRecord>,
    runs: Vec<RunSummary>,
    summaries: Vec<MethodSummary>,
}

fn evaluate(ctx: &Ctx, records: &[PredictionRecord]) -> Result<Evaluation, CliError> {
    let residuals = compute_residuals(records, &ctx.ds)?;
    let runs = run_summaries(&residuals, &ctx.ds)?;
    let summaries = summarize_runs(&runs);
    Ok(Evaluation {
        residuals,
        runs,
        summaries,
    })
}

fn do_evaluate(ctx: &mut Ctx, records: &[PredictionRecord]) -> Result<Evaluation, CliError> {
    let ev = evaluate(ctx, records)?;
    let rows = ev
        .residuals
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.run.to_string(),
                r.sample.clone(),
                r.property.to_string(),
                f6(r.residual),
                f6(r.abs_error),
            ]
        })
        .collect();
    ctx.write_table(
        "reports/residuals",
        &["method", "run", "sample", "property", "residual", "abs_error"],
        rows,
        &ev.residuals,
    )?;
    let rows = ev
        .runs
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.property.to_string(),
                r.run.to_string(),
                f6(r.rmse),
                f6(r.mae),
                f6(r.r2),
            ]
        })
        .collect();
    ctx.write_table("reports/run_metrics", &["method", "property", "run", "rmse", "mae", "r2"], rows, &ev.runs)?;
    let rows = ev
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.method.clone(),
                s.property.to_string(),
                s.n_runs.to_string(),
                f6(s.rmse.mean),
                f6(s.rmse.sd),
                f6(s.mae.mean),
                f6(s.mae.sd),
                f6(s.r2.mean),
                f6(s.r2.sd),
            ]
        })
        .collect();
    ctx.write_table(
        "reports/summary",
        &["method", "property", "n_runs", "rmse_mean", "rmse_sd", "mae_mean", "mae_sd", "r2_mean", "r2_sd"],
        rows,
        &ev.summaries,
    )?;
    Ok(ev)
}

fn print_summaries(s: &[MethodSummary]) {
    println!("{:<14}{:>4}{:>18}{:>18}{:>16}", "method", "", "RMSE", "MAE", "R2");
    for m in s {
        println!(
            "{:<14}{:>4}{:>11.2} ± {:<5.2}{:>11.2} ± {:<5.2}{:>9.2} ± {:<5.2}",
            m.method, m.property.label(), m.rmse.mean, m.rmse.sd, m.mae.mean, m.mae.sd, m.r2.mean, m.r2.sd
        );
    }
}

fn do_compare(ctx: &mut Ctx, ev: &Evaluation, a: &CompareArgs) -> Result<Vec<ComparisonResult>, CliError> {
    if !ev.summaries.iter().any(|s| s.method == a.baseline) {
        return Err(CliError::Validation(format!("baseline {} has no predictions", a.baseline)));
    }
    let props: Vec<Property> = a.target.map_or(Property::ALL.to_vec(), |p| vec![p]);
    let opts = CompareOptions {
        baseline: a.baseline.clone(),
        replicates: a.replicates,
        seed: a.ci_seed,
        ..Default::default()
    };
    let res = compare_all(&ev.residuals, &ev.summaries, &props, &opts)?;
    let rows = res
        .iter()
        .map(|c| {
            vec![
                c.method.clone(),
                c.baseline.clone(),
                c.property.to_string(),
                c.n_pairs.to_string(),
                c.n_zero_diffs.to_string(),
                c.n_tie_groups.to_string(),
                format!("{:.1}", c.w_plus),
                format!("{:?}", c.p_method).to_lowercase(),
                format!("{:.6e}", c.p_value),
                format!("{:.6e}", c.q_value),
                c.annotation.as_str().to_string(),
                format!("{:.4}", c.delta_rmse_pct),
                format!("{:.4}", c.ci_low),
                format!("{:.4}", c.ci_high),
                format!("{:.4}", c.bootstrap_median),
                c.replicates.to_string(),
                c.seed.to_string(),
            ]
        })
        .collect();
    let stem = match a.target {
        Some(p) => format!("reports/comparison_{p}"),
        None => "reports/comparison".to_string(),
    };
    ctx.write_table(
        &stem,
        &[
            "method", "baseline", "property", "n_pairs", "n_zero_diffs", "n_tie_groups", "w_plus", "p_method", "p_value",
            "q_value", "annotation", "delta_rmse_pct", "ci_low", "ci_high", "bootstrap_median", "replicates", "ci_seed",
        ],
        rows,
        &res,
    )?;
    Ok(res)
}

fn print_comparisons(res: &[ComparisonResult]) {
    println!(
        "{:<14}{:>4}{:>11}{:>11}{:>6}{:>10}{:>22}{:>10}",
        "method", "", "p", "q", "", "dRMSE%", "95% CI", "boot.med"
    );
    for c in res {
        println!(
            "{:<14}{:>4}{:>11.4}{:>11.4}{:>6}{:>10.1}{:>22}{:>10.1}",
            c.method,
            c.property.label(),
            c.p_value,
            c.q_value,
            c.annotation.as_str(),
            c.delta_rmse_pct,
            format!("[{:.1}, {:.1}]", c.ci_low, c.ci_high),
            c.bootstrap_median
        );
    }
}

fn do_rank(ctx: &mut Ctx, summaries: &[MethodSummary], runs: Option<&[RunSummary]>) -> Result<RankingTable, CliError> {
    let t = rank_models(summaries, runs)?;
    let rows = t
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.ranks[0].to_string(),
                r.ranks[1].to_string(),
                r.ranks[2].to_string(),
                format!("{:.2}", r.overall_avg_rank),
                r.per_run_avg_rank.map_or(String::new(), |m| format!("{:.2}", m.mean)),
                r.per_run_avg_rank.map_or(String::new(), |m| format!("{:.2}", m.sd)),
            ]
        })
        .collect();
    ctx.write_table(
        "reports/ranking",
        &["method", "rank_E", "rank_TS", "rank_EL", "overall_avg_rank", "per_run_avg_rank_mean", "per_run_avg_rank_sd"],
        rows,
        &t,
    )?;
    Ok(t)
}

fn print_ranking(t: &RankingTable) {
    println!("{:<14}{:>4}{:>4}{:>4}{:>9}{:>16}", "method", "E", "TS", "EL", "overall", "per-run");
    for r in &t.rows {
        let pr = r.per_run_avg_rank.map_or(String::from("-"), |m| format!("{:.2} ± {:.2}", m.mean, m.sd));
        println!(
            "{:<14}{:>4}{:>4}{:>4}{:>9.2}{:>16}",
            r.method, r.ranks[0], r.ranks[1], r.ranks[2], r.overall_avg_rank, pr
        );
    }
    println!("ties: {}", t.tie_break);
}

fn do_figures(
    ctx: &mut Ctx,
    records: &[PredictionRecord],
    kind: Option<FigureKind>,
    property: Option<Property>,
) -> Result<usize, CliError> {
    let kinds: Vec<FigureKind> = kind.map_or(FigureKind::ALL.to_vec(), |k| vec![k]);
    let props: Vec<Property> = property.map_or(Property::ALL.to_vec(), |p| vec![p]);
    let mut n = 0;
    for &k in &kinds {
        for &p in &props {
            let fig = figure_data(records, &ctx.ds, k, p)?;
            let stem = format!("figures/{}_{}", k.name(), p);
            match ctx.format {
                Format::Csv => ctx.out.write_csv(&format!("{stem}.csv"), &fig.to_csv())?,
                Format::Json => ctx.out.write_json(&format!("{stem}.json"), &fig)?,
            };
            ctx.out.write_svg(&format!("{stem}.svg"), &fig.to_svg())?;
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Debug, Serialize)]
struct RequestLog {
    model: String,
    run: u32,
    fold: usize,
    attempts: u32,
    retries: u32,
    status: u16,
    started_at: String,
    finished_at: String,
    parsed: bool,
    error: Option<String>,
}

fn do_query(
    ctx: &mut Ctx,
    endpoints: &Path,
    responses: &Path,
    only: Option<&[String]>,
    strict: bool,
) -> Result<usize, CliError> {
    let text = fs::read_to_string(endpoints).map_err(|e| io_err(endpoints, e))?;
    let mut specs = load_endpoints(&text)?;
    if let Some(names) = only {
        specs.retain(|s| names.iter().any(|n| n == s.label()));
    }
    if specs.is_empty() {
        return Err(CliError::Validation("no endpoints selected".into()));
    }
    let folds = make_folds(&ctx.ds);
    let prompts: Vec<String> = folds
        .iter()
        .map(|f| render_prompt(&ctx.template, f, &ctx.ds))
        .collect::<Result<_, _>>()?;
    let n_runs = ctx.cfg.n_runs() as u32;
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let ds = &ctx.ds;
    let template_hash = ctx.template.hash();

    // One thread per endpoint; requests to a single endpoint go out in order
    // through its rate limiter.
    let outcomes: Vec<Result<usize, CliError>> = specs
        .par_iter()
        .map(|spec| {
            let client = LlmClient::new(spec.clone(), ReqwestTransport::new()?);
            let mut log = Vec::new();
            let mut network_failure = None;
            'runs: for run in 1..=n_runs {
                for (f, prompt) in folds.iter().zip(&prompts) {
                    let started = chrono::Utc::now().to_rfc3339();
                    let mut entry = RequestLog {
                        model: spec.label().to_string(),
                        run,
                        fold: f.fold_index,
                        attempts: 0,
                        retries: 0,
                        status: 0,
                        started_at: started,
                        finished_at: String::new(),
                        parsed: false,
                        error: None,
                    };
                    match client.query(prompt) {
                        Ok(o) => {
                            entry.attempts = o.attempts;
                            entry.retries = o.retries;
                            entry.status = o.status;
                            write_response(responses, spec.label(), run, f.fold_index, &o.text)?;
                            let ctx = ResponseContext {
                                model: spec.label(),
                                run,
                                fold_index: f.fold_index,
                                held_out_id: &f.held_out_id,
                            };
                            match parse_llm_csv(&o.text, ctx, mode) {
                                Ok(_) => entry.parsed = true,
                                Err(e) => entry.error = Some(e.to_string()),
                            }
                        }
                        Err(e) => {
                            entry.error = Some(e.to_string());
                            if e.is_network() && network_failure.is_none() {
                                network_failure = Some(format!("{} run {run} fold {}: {e}", spec.label(), f.fold_index));
                            }
                        }
                    }
                    entry.finished_at = chrono::Utc::now().to_rfc3339();
                    log.push(entry);
                    if network_failure.is_some() {
                        break 'runs;
                    }
                }
            }
            let manifest = serde_json::json!({
                "endpoint": spec,
                "template_hash": template_hash,
                "dataset_samples": ds.len(),
                "requests": log,
            });
            let path = responses.join(spec.label()).join("run_manifest.json");
            fs::create_dir_all(path.parent().unwrap_or(responses)).map_err(|e| io_err(&path, e))?;
            fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n")
                .map_err(|e| io_err(&path, e))?;
            match network_failure {
                Some(m) => Err(CliError::Network(m)),
                None => Ok(log.iter().filter(|l| l.parsed).count()),
            }
        })
        .collect();
    let mut ok = 0;
    for o in outcomes {
        ok += o?;
    }
    Ok(ok)
}

// ---------------------------------------------------------------- entry

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut ctx = Ctx::new(&cli)?;
    let quiet = cli.quiet;
    let name = match &cli.command {
        Command::Correlate => "correlate",
        Command::RunPls => "run-pls",
        Command::GenPrompts => "gen-prompts",
        Command::Query { .. } => "query",
        Command::Ingest { .. } => "ingest",
        Command::Evaluate(_) => "evaluate",
        Command::Compare { .. } => "compare",
        Command::Rank { .. } => "rank",
        Command::Figures { .. } => "figures",
        Command::Repro { .. } => "repro",
    };
    match &cli.command {
        Command::Correlate => {
            let m = do_correlate(&mut ctx)?;
            if !quiet {
                print_correlation(&m);
            }
        }
        Command::RunPls => {
            let b = do_run_pls(&mut ctx)?;
            if !quiet {
                println!("{} PLS predictions over {} run(s)", b.records.len(), ctx.cfg.n_runs());
            }
        }
        Command::GenPrompts => {
            let n = do_gen_prompts(&mut ctx)?;
            if !quiet {
                println!("{n} prompts written");
            }
        }
        Command::Query {
            endpoints,
            responses,
            models,
            strict,
        } => {
            let root = responses.clone().unwrap_or_else(|| ctx.out.root.join("responses"));
            let n = do_query(&mut ctx, endpoints, &root, models.as_deref(), *strict)?;
            if !quiet {
                println!("{n} parsed responses archived under {}", root.display());
            }
        }
        Command::Ingest { responses, strict } => {
            let r = do_ingest(&mut ctx, responses, *strict)?;
            if !quiet {
                println!("{} LLM predictions ingested", r.len());
            }
        }
        Command::Evaluate(p) => {
            let recs = load_predictions(&ctx, p)?;
            let ev = do_evaluate(&mut ctx, &recs)?;
            if !quiet {
                print_summaries(&ev.summaries);
            }
        }
        Command::Compare { preds, opts } => {
            let recs = load_predictions(&ctx, preds)?;
            let ev = evaluate(&ctx, &recs)?;
            let res = do_compare(&mut ctx, &ev, opts)?;
            if !quiet {
                print_comparisons(&res);
            }
        }
        Command::Rank { summaries, preds } => {
            let t = match summaries {
                Some(path) => {
                    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
                    let s = read_summary_table(f)?;
                    do_rank(&mut ctx, &s, None)?
                }
                None => {
                    let recs = load_predictions(&ctx, preds)?;
                    let ev = evaluate(&ctx, &recs)?;
                    do_rank(&mut ctx, &ev.summaries, Some(&ev.runs))?
                }
            };
            if !quiet {
                print_ranking(&t);
            }
        }
        Command::Figures { kind, property, preds } => {
            let recs = load_predictions(&ctx, preds)?;
            let n = do_figures(&mut ctx, &recs, *kind, *property)?;
            if !quiet {
                println!("{n} figures written");
            }
        }
        Command::Repro {
            responses,
            no_network: _,
            strict,
            opts,
        } => {
            let corr = do_correlate(&mut ctx)?;
            if !quiet {
                print_correlation(&corr);
            }
            let mut records = do_run_pls(&mut ctx)?.records;
            do_gen_prompts(&mut ctx)?;
            if let Some(dir) = responses {
                records.extend(do_ingest(&mut ctx, dir, *strict)?);
            }
            check_records(&records)?;
            sort_records(&mut records, &ctx.ds);
            let ev = do_evaluate(&mut ctx, &records)?;
            if !quiet {
                print_summaries(&ev.summaries);
            }
            if ev.summaries.iter().any(|s| s.method != opts.baseline) {
                let res = do_compare(&mut ctx, &ev, opts)?;
                if !quiet {
                    print_comparisons(&res);
                }
            }
            let ranking = do_rank(&mut ctx, &ev.summaries, Some(&ev.runs))?;
            if !quiet {
                print_ranking(&ranking);
            }
            do_figures(&mut ctx, &records, None, None)?;
        }
    }
    ctx.out.write_manifest(name)?;
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
