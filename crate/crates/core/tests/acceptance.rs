//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs as a plain binary so the lines always appear in `cargo test` output.
//! Exits non-zero on any failure not listed in `KNOWN_FAILURES`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use membench::cli::cli_main;
use membench::llm::prompt::leak_needles;
use membench::llm::{ingest_response_dir, render_prompt, ParseMode, PromptTemplate};
use membench::pipeline::{draw_bootstrap, fit_fold, fold_rng, run_pls_branch};
use membench::stats::{
    bh_adjust, compute_residuals, paired_bootstrap_ci, run_summaries, summarize_runs, wilcoxon_signed_rank,
    MethodSummary, PairedErrors,
};
use membench::{make_folds, Dataset, Property, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose failure is understood and recorded; see the README.
const KNOWN_FAILURES: [u32; 1] = [3];

type Check = Box<dyn Fn() -> Option<Outcome>>;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn cli(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["membench".to_string(), "--quiet".into(), "--out-dir".into(), out.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    cli_main(argv)
}

/// Data rows of a stamped CSV, split into fields.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

// 1 -------------------------------------------------------------------------

fn correlation_golden() -> Outcome {
    let d = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let code = cli(d.path(), &["correlate"]);
    let elapsed = t.elapsed();
    if code != 0 {
        return outcome(false, format!("correlate exited {code}"));
    }
    let rows = csv_rows(&d.path().join("reports/correlation.csv"));
    let labels = ["PD", "CA", "T", "P", "E", "TS", "EL"];
    let get = |a: &str, b: &str| -> f64 {
        let i = labels.iter().position(|l| *l == a).unwrap();
        let j = labels.iter().position(|l| *l == b).unwrap();
        rows[i][j + 1].parse().unwrap()
    };
    let golden = [
        ("P", "E", -0.86),
        ("P", "TS", -0.84),
        ("P", "EL", -0.86),
        ("CA", "E", -0.79),
        ("CA", "TS", -0.79),
        ("CA", "EL", -0.57),
        ("T", "E", -0.57),
        ("T", "TS", -0.59),
        ("PD", "E", -0.35),
        ("PD", "TS", -0.35),
        ("PD", "EL", -0.31),
        ("E", "EL", 0.748),
        ("TS", "EL", 0.750),
    ];
    let worst = golden
        .iter()
        .map(|&(a, b, v)| (get(a, b) - v).abs())
        .fold(0.0f64, f64::max);
    let ok = worst <= 0.005 && elapsed < Duration::from_secs(1);
    outcome(ok, format!("13 coefficients, max |diff| {worst:.4} (tol 0.005), {elapsed:.2?} (< 1 s)"))
}

// 2 -------------------------------------------------------------------------

fn ranking_golden() -> Outcome {
    let d = tempfile::tempdir().unwrap();
    let table = common::published_table();
    let t = Instant::now();
    let code = cli(d.path(), &["rank", "--summaries", table.to_str().unwrap()]);
    let elapsed = t.elapsed();
    if code != 0 {
        return outcome(false, format!("rank exited {code}"));
    }
    let got: Vec<(String, String, String, String, String)> = csv_rows(&d.path().join("reports/ranking.csv"))
        .into_iter()
        .map(|r| (r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone(), r[4].clone()))
        .collect();
    let want: Vec<(String, String, String, String, String)> = [
        ("GPT-5", "2", "1", "1", "1.33"),
        ("ChatGPT-4o", "1", "2", "3", "2.00"),
        ("DeepSeek-R1", "3", "3", "2", "2.67"),
        ("DeepSeek-V3", "4", "4", "4", "4.00"),
        ("PLS", "5", "5", "5", "5.00"),
    ]
    .iter()
    .map(|&(a, b, c, d, e)| (a.into(), b.into(), c.into(), d.into(), e.into()))
    .collect();
    let ok = got == want && elapsed < Duration::from_secs(1);
    let avgs: Vec<&str> = got.iter().map(|r| r.4.as_str()).collect();
    outcome(ok, format!("overall {} with per-property ranks as published, {elapsed:.2?} (< 1 s)", avgs.join(" / ")))
}

// 3 -------------------------------------------------------------------------

fn summaries(records: &[membench::PredictionRecord], ds: &Dataset) -> Vec<MethodSummary> {
    let res = compute_residuals(records, ds).unwrap();
    summarize_runs(&run_summaries(&res, ds).unwrap())
}

fn find<'a>(s: &'a [MethodSummary], method: &str, p: Property) -> &'a MethodSummary {
    s.iter().find(|m| m.method == method && m.property == p).unwrap()
}

fn pls_oracle_and_variability() -> Outcome {
    let ds = Dataset::canonical();

    let det = run_pls_branch(&ds, &RunConfig::new(vec![42], false).unwrap()).unwrap();
    let mut max_diff = 0.0f64;
    let mut k_mismatch = 0;
    for p in Property::ALL {
        let oracle = common::oracle_loocv(&ds, p);
        for fit in &det.fits {
            let m = fit.models.iter().find(|m| m.property == p).unwrap();
            let (k, pred) = oracle[fit.plan.fold_index - 1];
            k_mismatch += (k != m.selection.chosen_k) as usize;
            max_diff = max_diff.max((pred - m.prediction).abs());
        }
    }
    let oracle_ok = max_diff <= 1e-8 && k_mismatch == 0 && det.records.len() == 30;

    let boot = run_pls_branch(&ds, &RunConfig::new(vec![42, 43, 44, 45, 46], true).unwrap()).unwrap();
    let llm = ingest_response_dir(&common::fixture_dir(), &ds, ParseMode::Strict).unwrap();
    let mut all = boot.records.clone();
    all.extend(llm.records);
    let s = summaries(&all, &ds);
    let pls_el = find(&s, "PLS", Property::El).rmse;
    let pls_e = find(&s, "PLS", Property::E).rmse;
    let max_llm_sd = s
        .iter()
        .filter(|m| m.method != "PLS")
        .map(|m| m.rmse.sd)
        .fold(0.0f64, f64::max);
    let sd_ok = pls_el.sd > max_llm_sd;
    let cv_el = pls_el.sd / pls_el.mean;
    let cv_e = pls_e.sd / pls_e.mean;
    let cv_ok = cv_el > 3.0 * cv_e;

    let tag = |b: bool| if b { "ok" } else { "FAIL" };
    outcome(
        oracle_ok && sd_ok && cv_ok,
        format!(
            "oracle {} (30 preds, max |diff| {max_diff:.1e}, tol 1e-8); \
             EL RMSE SD {:.2} > max LLM SD {max_llm_sd:.2} {}; \
             EL SD/mean {cv_el:.3} > 3 x E SD/mean {cv_e:.3} {} (ratio {:.2})",
            tag(oracle_ok),
            pls_el.sd,
            tag(sd_ok),
            tag(cv_ok),
            cv_el / cv_e
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn published_responses_dir() -> Option<PathBuf> {
    let candidate = std::env::var_os("MEMBENCH_PUBLISHED_RESPONSES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/published_responses"));
    candidate.is_dir().then_some(candidate)
}

fn published_llm_cells() -> Option<Outcome> {
    let dir = published_responses_dir()?;
    let ds = Dataset::canonical();
    let report = match ingest_response_dir(&dir, &ds, ParseMode::Lenient) {
        Ok(r) => r,
        Err(e) => return Some(outcome(false, format!("ingest failed: {e}"))),
    };
    let s = summaries(&report.records, &ds);
    let published =
        membench::report::read_summary_table(fs::File::open(common::published_table()).unwrap()).unwrap();
    let mut worst = 0.0f64;
    let mut missing = Vec::new();
    for p in published.iter().filter(|p| p.method != "PLS") {
        match s.iter().find(|m| m.method == p.method && m.property == p.property) {
            None => missing.push(format!("{}/{}", p.method, p.property)),
            Some(m) => {
                for (a, b) in [
                    (m.rmse.mean, p.rmse.mean),
                    (m.rmse.sd, p.rmse.sd),
                    (m.mae.mean, p.mae.mean),
                    (m.mae.sd, p.mae.sd),
                    (m.r2.mean, p.r2.mean),
                    (m.r2.sd, p.r2.sd),
                ] {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let pls_mae = published
        .iter()
        .find(|m| m.method == "PLS" && m.property == Property::El)
        .unwrap()
        .mae
        .mean;
    let reduction = s
        .iter()
        .find(|m| m.method == "GPT-5" && m.property == Property::El)
        .map(|m| 100.0 * (1.0 - m.mae.mean / pls_mae));
    let red_ok = reduction.is_some_and(|r| (r - 100.0 * (1.0 - 5.18 / 11.63)).abs() <= 1.0);
    Some(outcome(
        missing.is_empty() && worst <= 0.01 + 1e-9 && red_ok,
        format!(
            "max |cell diff| {worst:.4} (tol 0.01), missing {missing:?}, GPT-5 EL MAE reduction {:.1}% (55 +/- 1)",
            reduction.unwrap_or(f64::NAN)
        ),
    ))
}

// 5 -------------------------------------------------------------------------

/// Doubled rank of each |d|: 2·#smaller + #equal + 1.
fn brute_force_p(diffs: &[f64]) -> Option<f64> {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    if n < 5 {
        return None;
    }
    let ranks: Vec<u64> = d
        .iter()
        .map(|a| {
            let less = d.iter().filter(|b| b.abs() < a.abs()).count() as u64;
            let eq = d.iter().filter(|b| b.abs() == a.abs()).count() as u64;
            2 * less + eq + 1
        })
        .collect();
    let observed: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        le += (w <= observed) as u64;
        ge += (w >= observed) as u64;
    }
    Some((2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0))
}

fn wilcoxon_corpus() -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut corpus = Vec::new();
    for n in 5..=12 {
        for _ in 0..6 {
            corpus.push((0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect());
            corpus.push((0..n).map(|_| rng.random_range(-3.0..3.0)).collect());
            corpus.push((0..n).map(|_| rng.random_range(-0.5..3.0f64)).collect());
        }
        corpus.push((1..=n).map(|i| i as f64).collect());
        corpus.push(vec![2.5; n]);
    }
    corpus
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn statistics_oracles() -> Outcome {
    let t = Instant::now();

    let corpus = wilcoxon_corpus();
    let mut checked = 0;
    let mut w_bad = 0;
    for d in &corpus {
        if let Some(p) = brute_force_p(d) {
            checked += 1;
            w_bad += (wilcoxon_signed_rank(d).unwrap().p_value != p) as usize;
        }
    }

    let bh: [(&[f64], &[f64]); 5] = [
        (&[0.01, 0.02, 0.03, 0.04], &[0.04, 0.04, 0.04, 0.04]),
        (&[0.001, 0.9, 0.9, 0.9], &[0.004, 0.9, 0.9, 0.9]),
        (&[0.3], &[0.3]),
        (&[0.04, 0.01, 0.5, 0.02], &[0.04 * 4.0 / 3.0, 0.04, 0.5, 0.04]),
        (&[0.02, 0.5, 0.03, 0.9], &[0.06, 0.5 * 4.0 / 3.0, 0.06, 0.9]),
    ];
    let bh_bad = bh.iter().filter(|(p, q)| bh_adjust(p).unwrap() != *q).count();

    let ds = Dataset::canonical();
    let pls = run_pls_branch(&ds, &RunConfig::new(vec![42, 43, 44, 45, 46], true).unwrap()).unwrap();
    let res = compute_residuals(&pls.records, &ds).unwrap();
    let same = PairedErrors::pair(&res, &res, Property::El).unwrap();
    let ci = paired_bootstrap_ci(&same, 10_000, 20_240_601).unwrap();
    let zero_ok = ci.low == 0.0 && ci.high == 0.0;

    // Shifted pairs m = 0.7·b·u with E[u²] = 1: population ΔRMSE is 30%.
    let trials = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = 0;
    for trial in 0..trials {
        let b: Vec<f64> = (0..50).map(|_| 1.0 + rng.random::<f64>()).collect();
        let m: Vec<f64> = b.iter().map(|v| 0.7 * v * (0.1 * normal(&mut rng) - 0.01).exp()).collect();
        let pairs = PairedErrors {
            keys: (0..50).map(|i| (format!("S{}", i % 10 + 1), i / 10 + 1)).collect(),
            method: m,
            baseline: b,
        };
        let ci = paired_bootstrap_ci(&pairs, 2000, trial).unwrap();
        hits += (ci.low <= 30.0 && 30.0 <= ci.high) as usize;
    }
    let coverage = hits as f64 / trials as f64;
    let elapsed = t.elapsed();

    outcome(
        w_bad == 0 && bh_bad == 0 && zero_ok && coverage >= 0.94 && elapsed < Duration::from_secs(60),
        format!(
            "Wilcoxon {}/{checked} exact matches; BH {}/5; identical-pairs CI [{}, {}]; coverage {:.1}% over {trials} (>= 94%); {elapsed:.1?} (< 60 s)",
            checked - w_bad,
            5 - bh_bad,
            ci.low,
            ci.high,
            100.0 * coverage
        ),
    )
}

// 6 -------------------------------------------------------------------------

fn pipeline_invariants() -> Outcome {
    let ds = Dataset::canonical();
    let tmpl = PromptTemplate::default();
    let mut leak_ok = 0;
    let mut closed_ok = 0;
    for fold in make_folds(&ds) {
        let mut other = ds.clone();
        for p in Property::ALL {
            let v = other.get(&fold.held_out_id).unwrap().target(p);
            other = other.with_target(&fold.held_out_id, p, -v + 1234.5).unwrap();
        }
        let det = fit_fold(&ds, &fold, 1).unwrap() == fit_fold(&other, &fold, 1).unwrap();
        let a = draw_bootstrap(&fold, &ds, &mut fold_rng(42, fold.fold_index)).unwrap();
        let b = draw_bootstrap(&fold, &other, &mut fold_rng(42, fold.fold_index)).unwrap();
        let boot = a == b && fit_fold(&ds, &a, 1).unwrap() == fit_fold(&other, &b, 1).unwrap();
        leak_ok += (det && boot) as usize;

        let text = render_prompt(&tmpl, &fold, &ds).unwrap();
        let held = ds.get(&fold.held_out_id).unwrap();
        let clean = Property::ALL.iter().all(|&p| {
            leak_needles(held.target(p), ds.target_decimals(p))
                .iter()
                .all(|n| !text.contains(n.as_str()))
        });
        closed_ok += clean as usize;
    }
    let pls = run_pls_branch(&ds, &RunConfig::new(vec![42, 43, 44, 45, 46], true).unwrap()).unwrap();
    let llm = ingest_response_dir(&common::fixture_dir(), &ds, ParseMode::Strict).unwrap();
    let ok = leak_ok == 10 && closed_ok == 10 && pls.records.len() == 150 && llm.records.len() == 600;
    outcome(
        ok,
        format!(
            "perturbation {leak_ok}/10 folds, closed-book {closed_ok}/10 prompts, {} PLS records (150), {} fixture records (600)",
            pls.records.len(),
            llm.records.len()
        ),
    )
}

// 7 -------------------------------------------------------------------------

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn without_timestamp(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.contains("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let fixture = common::fixture_dir();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["repro", "--no-network", "--responses", fixture.to_str().unwrap()];
    let codes = (cli(a.path(), &args), cli(b.path(), &args));
    if codes != (0, 0) {
        return outcome(false, format!("repro exited {codes:?}"));
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let mut differing: Vec<&String> = Vec::new();
    for (k, v) in &ta {
        let same = match tb.get(k) {
            Some(w) if k == "manifest.json" => without_timestamp(v) == without_timestamp(w),
            Some(w) => v == w,
            None => false,
        };
        if !same {
            differing.push(k);
        }
    }
    let ok = differing.is_empty() && ta.len() == tb.len() && ta.contains_key("predictions/llm.csv");
    outcome(
        ok,
        format!("{} files compared byte-for-byte (manifest timestamp excluded), differing: {differing:?}", ta.len()),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let start = Instant::now();
    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "correlation golden values", Box::new(|| Some(correlation_golden()))),
        (2, "ranking golden values", Box::new(|| Some(ranking_golden()))),
        (3, "PLS oracle equivalence and variability claims", Box::new(|| Some(pls_oracle_and_variability()))),
        (4, "published LLM cells from raw responses", Box::new(published_llm_cells)),
        (5, "statistics oracles", Box::new(|| Some(statistics_oracles()))),
        (6, "pipeline invariants", Box::new(|| Some(pipeline_invariants()))),
        (7, "repro determinism", Box::new(|| Some(determinism()))),
    ];
    let mut unexpected = Vec::new();
    println!("\nacceptance criteria");
    for (id, name, check) in criteria {
        let o = check().unwrap_or(Outcome {
            status: Status::Skip,
            detail: "published response files not present (set MEMBENCH_PUBLISHED_RESPONSES or add data/published_responses)".into(),
        });
        let label = match o.status {
            Status::Pass => "PASS",
            Status::Skip => "SKIP",
            Status::Fail if KNOWN_FAILURES.contains(&id) => "FAIL (known)",
            Status::Fail => "FAIL",
        };
        println!("criterion {id} {label}: {name}: {}", o.detail);
        if o.status == Status::Fail && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("acceptance suite finished in {:.1?}\n", start.elapsed());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
