//! RMSE-derived model rankings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::Serialize;

use super::ReportError;
use crate::data::Property;
use crate::stats::{MeanSd, MethodSummary, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingRow {
    pub method: String,
    /// Rank per property in E, TS, EL order; 1 = smallest run-averaged RMSE.
    pub ranks: [usize; 3],
    pub overall_avg_rank: f64,
    /// Mean ± SD over runs of the within-run average rank, when per-run
    /// RMSEs are available.
    pub per_run_avg_rank: Option<MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingTable {
    /// Sorted by overall average rank, then method name.
    pub rows: Vec<RankingRow>,
    pub tie_break: &'static str,
}

pub const TIE_BREAK: &str = "equal RMSE: lexicographic method name";

/// Ranks within one property; ties go to the lexicographically smaller name.
fn rank_one(values: &BTreeMap<String, f64>) -> BTreeMap<String, usize> {
    let mut v: Vec<(&String, f64)> = values.iter().map(|(k, v)| (k, *v)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().enumerate().map(|(i, (m, _))| (m.clone(), i + 1)).collect()
}

/// RMSE by method, one map per property in E, TS, EL order.
type PerProperty = [BTreeMap<String, f64>; 3];

fn rmse_by_property(
    items: impl Iterator<Item = (String, Property, f64)>,
) -> Result<(BTreeSet<String>, PerProperty), ReportError> {
    let mut per: PerProperty = Default::default();
    let mut methods = BTreeSet::new();
    for (m, p, v) in items {
        methods.insert(m.clone());
        per[p.index()].insert(m, v);
    }
    for p in Property::ALL {
        if let Some(m) = methods.iter().find(|m| !per[p.index()].contains_key(*m)) {
            return Err(ReportError::Completeness(format!("{m} has no {p} RMSE")));
        }
    }
    Ok((methods, per))
}

pub fn rank_models(summaries: &[MethodSummary], runs: Option<&[RunSummary]>) -> Result<RankingTable, ReportError> {
    let (methods, per) = rmse_by_property(summaries.iter().map(|s| (s.method.clone(), s.property, s.rmse.mean)))?;
    if methods.is_empty() {
        return Err(ReportError::Completeness("no methods to rank".into()));
    }
    let ranks: Vec<BTreeMap<String, usize>> = per.iter().map(rank_one).collect();

    let per_run: Option<BTreeMap<String, MeanSd>> = match runs {
        None => None,
        Some(runs) => {
            let run_ids: BTreeSet<u32> = runs.iter().map(|r| r.run).collect();
            let mut avgs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for run in &run_ids {
                let (_, per) = rmse_by_property(
                    runs.iter()
                        .filter(|r| r.run == *run && methods.contains(&r.method))
                        .map(|r| (r.method.clone(), r.property, r.rmse)),
                )?;
                let rk: Vec<BTreeMap<String, usize>> = per.iter().map(rank_one).collect();
                for m in &methods {
                    let total: usize = rk.iter().map(|r| r.get(m).copied().unwrap_or(0)).sum();
                    if rk.iter().any(|r| !r.contains_key(m)) {
                        return Err(ReportError::Completeness(format!("{m} missing from run {run}")));
                    }
                    avgs.entry(m.clone()).or_default().push(total as f64 / 3.0);
                }
            }
            Some(avgs.into_iter().map(|(m, v)| (m, MeanSd::of(&v))).collect())
        }
    };

    let mut rows: Vec<RankingRow> = methods
        .iter()
        .map(|m| {
            let r = [ranks[0][m], ranks[1][m], ranks[2][m]];
            RankingRow {
                method: m.clone(),
                ranks: r,
                overall_avg_rank: r.iter().sum::<usize>() as f64 / 3.0,
                per_run_avg_rank: per_run.as_ref().map(|p| p[m]),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.overall_avg_rank
            .total_cmp(&b.overall_avg_rank)
            .then_with(|| a.method.cmp(&b.method))
    });
    Ok(RankingTable {
        rows,
        tie_break: TIE_BREAK,
    })
}

/// Reads a summary table with columns
/// `method,property,rmse_mean,rmse_sd,mae_mean,mae_sd,r2_mean,r2_sd`
/// (the layout of `reports/summary.csv`). `#` lines are ignored.
pub fn read_summary_table<R: Read>(reader: R) -> Result<Vec<MethodSummary>, ReportError> {
    const COLS: [&str; 8] = ["method", "property", "rmse_mean", "rmse_sd", "mae_mean", "mae_sd", "r2_mean", "r2_sd"];
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let idx: Vec<usize> = COLS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| ReportError::Schema(format!("summary table lacks column {c}")))
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let num = |i: usize| {
            get(i)
                .parse::<f64>()
                .map_err(|_| ReportError::Schema(format!("row {}: {} = {:?}", row + 1, COLS[i], get(i))))
        };
        let property =
            Property::parse(get(1)).ok_or_else(|| ReportError::Schema(format!("row {}: property {:?}", row + 1, get(1))))?;
        out.push(MethodSummary {
            method: get(0).to_string(),
            property,
            n_runs: 0,
            rmse: MeanSd { mean: num(2)?, sd: num(3)? },
            mae: MeanSd { mean: num(4)?, sd: num(5)? },
            r2: MeanSd { mean: num(6)?, sd: num(7)? },
            single_run: false,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PUBLISHED: &str = include_str!("../../data/published_summary.csv");

    fn summary(method: &str, p: Property, rmse: f64) -> MethodSummary {
        MethodSummary {
            method: method.into(),
            property: p,
            n_runs: 5,
            rmse: MeanSd { mean: rmse, sd: 0.0 },
            mae: MeanSd { mean: 0.0, sd: 0.0 },
            r2: MeanSd { mean: 0.0, sd: 0.0 },
            single_run: false,
        }
    }

    #[test]
    fn published_table_ranks() {
        let s = read_summary_table(PUBLISHED.as_bytes()).unwrap();
        let t = rank_models(&s, None).unwrap();
        let got: Vec<(&str, [usize; 3], String)> = t
            .rows
            .iter()
            .map(|r| (r.method.as_str(), r.ranks, format!("{:.2}", r.overall_avg_rank)))
            .collect();
        assert_eq!(
            got,
            vec![
                ("GPT-5", [2, 1, 1], "1.33".to_string()),
                ("ChatGPT-4o", [1, 2, 3], "2.00".to_string()),
                ("DeepSeek-R1", [3, 3, 2], "2.67".to_string()),
                ("DeepSeek-V3", [4, 4, 4], "4.00".to_string()),
                ("PLS", [5, 5, 5], "5.00".to_string()),
            ]
        );
    }

    #[test]
    fn single_method_ranks_first() {
        let s: Vec<_> = Property::ALL.iter().map(|&p| summary("PLS", p, 3.0)).collect();
        let t = rank_models(&s, None).unwrap();
        assert_eq!(t.rows[0].ranks, [1, 1, 1]);
        assert_eq!(t.rows[0].overall_avg_rank, 1.0);
    }

    #[test]
    fn ties_break_by_name() {
        let mut s = Vec::new();
        for p in Property::ALL {
            s.push(summary("beta", p, 2.0));
            s.push(summary("alpha", p, 2.0));
        }
        let t = rank_models(&s, None).unwrap();
        assert_eq!(t.rows[0].method, "alpha");
        assert_eq!(t.rows[0].ranks, [1, 1, 1]);
        assert_eq!(t.rows[1].ranks, [2, 2, 2]);
    }

    #[test]
    fn missing_property_is_incomplete() {
        let s = vec![summary("PLS", Property::E, 1.0), summary("PLS", Property::Ts, 1.0)];
        assert!(matches!(rank_models(&s, None), Err(ReportError::Completeness(_))));
    }

    #[test]
    fn per_run_ranks() {
        let mk = |m: &str, p, run, rmse| RunSummary {
            method: m.into(),
            property: p,
            run,
            rmse,
            mae: 0.0,
            r2: 0.0,
        };
        let mut runs = Vec::new();
        for p in Property::ALL {
            runs.push(mk("A", p, 1, 1.0));
            runs.push(mk("B", p, 1, 2.0));
            runs.push(mk("A", p, 2, 3.0));
            runs.push(mk("B", p, 2, 2.0));
        }
        let s = crate::stats::summarize_runs(&runs);
        let t = rank_models(&s, Some(&runs)).unwrap();
        let a = t.rows.iter().find(|r| r.method == "A").unwrap();
        let pr = a.per_run_avg_rank.unwrap();
        assert_eq!(pr.mean, 1.5);
        assert!((pr.sd - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
