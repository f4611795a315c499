//! Figure data (CSV is authoritative) and native SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::ReportError;
use crate::data::{Dataset, Property};
use crate::records::PredictionRecord;
use crate::stats::{quantile_type7, MeanSd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FigureKind {
    Parity,
    Residual,
    Heatmap,
    Boxplot,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] = [FigureKind::Parity, FigureKind::Residual, FigureKind::Heatmap, FigureKind::Boxplot];

    pub fn name(self) -> &'static str {
        match self {
            FigureKind::Parity => "parity",
            FigureKind::Residual => "residual",
            FigureKind::Heatmap => "heatmap",
            FigureKind::Boxplot => "boxplot",
        }
    }
}

/// Per-sample statistics across runs for one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub method: String,
    pub sample: String,
    pub actual: f64,
    pub pred: MeanSd,
    /// Mean and SD across runs of predicted − actual.
    pub residual: MeanSd,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub method: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme observations within 1.5 × IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub samples: Vec<String>,
    pub methods: Vec<String>,
    /// `values[sample][method]`: run-mean residual.
    pub values: Vec<Vec<f64>>,
    /// Colour scale spans [−limit, +limit].
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FigureBody {
    Parity { points: Vec<SamplePoint> },
    Residual { points: Vec<SamplePoint> },
    Heatmap(Heatmap),
    Boxplot { boxes: Vec<BoxStats> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureData {
    pub kind: FigureKind,
    pub property: Property,
    pub units: &'static str,
    pub body: FigureBody,
}

/// Tukey box statistics with type-7 quartiles.
pub fn box_stats(method: &str, values: &[f64]) -> BoxStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&v, 0.25);
    let q3 = quantile_type7(&v, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
    BoxStats {
        method: method.to_string(),
        n: v.len(),
        min: v[0],
        q1,
        median: quantile_type7(&v, 0.5),
        q3,
        max: v[v.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: v.iter().copied().filter(|x| *x < lo || *x > hi).collect(),
    }
}

/// method → sample position → per-run predictions.
fn grouped(
    records: &[PredictionRecord],
    ds: &Dataset,
    property: Property,
) -> Result<BTreeMap<String, Vec<Vec<f64>>>, ReportError> {
    let mut g: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.property == property) {
        let pos = ds
            .position(&r.sample)
            .ok_or_else(|| ReportError::Completeness(format!("unknown sample {}", r.sample)))?;
        g.entry(r.method.clone()).or_insert_with(|| vec![Vec::new(); ds.len()])[pos].push(r.predicted);
    }
    if g.is_empty() {
        return Err(ReportError::Completeness(format!("no {property} predictions")));
    }
    for (m, per) in &g {
        let n = per[0].len();
        if let Some(i) = per.iter().position(|v| v.is_empty() || v.len() != n) {
            return Err(ReportError::Completeness(format!(
                "{m}/{property}: sample {} has {} runs, expected {n}",
                ds.samples()[i].id,
                per[i].len()
            )));
        }
    }
    Ok(g)
}

fn sample_points(g: &BTreeMap<String, Vec<Vec<f64>>>, ds: &Dataset, property: Property) -> Vec<SamplePoint> {
    let mut out = Vec::new();
    for (m, per) in g {
        for (i, preds) in per.iter().enumerate() {
            let s = &ds.samples()[i];
            let actual = s.target(property);
            let res: Vec<f64> = preds.iter().map(|p| p - actual).collect();
            out.push(SamplePoint {
                method: m.clone(),
                sample: s.id.clone(),
                actual,
                pred: MeanSd::of(preds),
                residual: MeanSd::of(&res),
                n_runs: preds.len(),
            });
        }
    }
    out
}

pub fn figure_data(
    records: &[PredictionRecord],
    ds: &Dataset,
    kind: FigureKind,
    property: Property,
) -> Result<FigureData, ReportError> {
    let g = grouped(records, ds, property)?;
    let body = match kind {
        FigureKind::Parity => FigureBody::Parity {
            points: sample_points(&g, ds, property),
        },
        FigureKind::Residual => FigureBody::Residual {
            points: sample_points(&g, ds, property),
        },
        FigureKind::Heatmap => {
            let pts = sample_points(&g, ds, property);
            let methods: Vec<String> = g.keys().cloned().collect();
            let values: Vec<Vec<f64>> = (0..ds.len())
                .map(|i| methods.iter().map(|m| {
                    pts.iter().find(|p| &p.method == m && p.sample == ds.samples()[i].id).map_or(0.0, |p| p.residual.mean)
                }).collect())
                .collect();
            let limit = values.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            FigureBody::Heatmap(Heatmap {
                samples: ds.ids().iter().map(|s| s.to_string()).collect(),
                methods,
                values,
                limit,
            })
        }
        FigureKind::Boxplot => FigureBody::Boxplot {
            boxes: g
                .iter()
                .map(|(m, per)| {
                    let abs: Vec<f64> = per
                        .iter()
                        .enumerate()
                        .flat_map(|(i, v)| {
                            let a = ds.samples()[i].target(property);
                            v.iter().map(move |p| (p - a).abs())
                        })
                        .collect();
                    box_stats(m, &abs)
                })
                .collect(),
        },
    };
    Ok(FigureData {
        kind,
        property,
        units: property.units(),
        body,
    })
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

impl FigureData {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        match &self.body {
            FigureBody::Parity { points } | FigureBody::Residual { points } => {
                s.push_str("method,property,sample,actual,pred_mean,pred_sd,residual_mean,residual_sd,n_runs\n");
                for p in points {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{}",
                        p.method,
                        self.property,
                        p.sample,
                        f6(p.actual),
                        f6(p.pred.mean),
                        f6(p.pred.sd),
                        f6(p.residual.mean),
                        f6(p.residual.sd),
                        p.n_runs
                    );
                }
            }
            FigureBody::Heatmap(h) => {
                let _ = writeln!(s, "# colour scale: [{}, {}]", f6(-h.limit), f6(h.limit));
                let _ = writeln!(s, "sample,{}", h.methods.join(","));
                for (i, row) in h.values.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|v| f6(*v)).collect();
                    let _ = writeln!(s, "{},{}", h.samples[i], cells.join(","));
                }
            }
            FigureBody::Boxplot { boxes } => {
                s.push_str("method,property,n,min,q1,median,q3,max,whisker_low,whisker_high,n_outliers\n");
                for b in boxes {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        b.method,
                        self.property,
                        b.n,
                        f6(b.min),
                        f6(b.q1),
                        f6(b.median),
                        f6(b.q3),
                        f6(b.max),
                        f6(b.whisker_low),
                        f6(b.whisker_high),
                        b.outliers.len()
                    );
                }
            }
        }
        s
    }

    pub fn to_svg(&self) -> String {
        let title = format!("{} {} ({})", self.kind.name(), self.property, self.units);
        match &self.body {
            FigureBody::Parity { points } => svg_parity(&title, points),
            FigureBody::Residual { points } => svg_residual(&title, points),
            FigureBody::Heatmap(h) => svg_heatmap(&title, h),
            FigureBody::Boxplot { boxes } => svg_boxplot(&title, boxes),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        W / 2.0
    )
}

/// Linear map of [lo, hi] onto [a, b].
fn scale(lo: f64, hi: f64, a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let span = if hi > lo { hi - lo } else { 1.0 };
    move |v| a + (v - lo) / span * (b - a)
}

fn methods_of(points: &[SamplePoint]) -> Vec<String> {
    let mut m: Vec<String> = points.iter().map(|p| p.method.clone()).collect();
    m.dedup();
    m
}

fn legend(s: &mut String, methods: &[String]) {
    for (i, m) in methods.iter().enumerate() {
        let y = 40.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"8\" height=\"8\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{m}</text>",
            W - 120.0,
            y - 8.0,
            PALETTE[i % PALETTE.len()],
            W - 108.0,
            y
        );
    }
}

fn svg_parity(title: &str, points: &[SamplePoint]) -> String {
    let mut s = svg_open(title);
    let lo = points.iter().map(|p| p.actual.min(p.pred.mean - p.pred.sd)).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.actual.max(p.pred.mean + p.pred.sd)).fold(f64::NEG_INFINITY, f64::max);
    let x = scale(lo, hi, PAD, W - 140.0);
    let y = scale(lo, hi, H - PAD, PAD);
    let _ = writeln!(
        s,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#4477cc\"/>",
        x(lo),
        y(lo),
        x(hi),
        y(hi)
    );
    let methods = methods_of(points);
    for p in points {
        let c = PALETTE[methods.iter().position(|m| *m == p.method).unwrap_or(0) % PALETTE.len()];
        let (cx, cy) = (x(p.actual), y(p.pred.mean));
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"{c}\"/><circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{c}\"><title>{} {}</title></circle>",
            y(p.pred.mean - p.pred.sd),
            y(p.pred.mean + p.pred.sd),
            p.method,
            p.sample
        );
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">actual</text>", W / 2.0, H - 12.0);
    let _ = writeln!(s, "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\">predicted (mean ± SD)</text>", H / 2.0, H / 2.0);
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

fn svg_residual(title: &str, points: &[SamplePoint]) -> String {
    let mut s = svg_open(title);
    let lim = points.iter().map(|p| p.residual.mean.abs() + p.residual.sd).fold(0.0f64, f64::max);
    let samples: Vec<&str> = {
        let mut v: Vec<&str> = Vec::new();
        for p in points {
            if !v.contains(&p.sample.as_str()) {
                v.push(&p.sample);
            }
        }
        v
    };
    let methods = methods_of(points);
    let band = (W - 140.0 - PAD) / samples.len().max(1) as f64;
    let y = scale(-lim, lim, H - PAD, PAD);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"#999\"/>", y(0.0), W - 140.0, y(0.0));
    for p in points {
        let i = samples.iter().position(|x| *x == p.sample).unwrap_or(0);
        let k = methods.iter().position(|m| *m == p.method).unwrap_or(0);
        let cx = PAD + band * (i as f64 + (k as f64 + 1.0) / (methods.len() as f64 + 1.0));
        let c = PALETTE[k % PALETTE.len()];
        let _ = writeln!(s, "<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{c}\"/>", y(p.residual.mean));
    }
    for (i, smp) in samples.iter().enumerate() {
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{smp}</text>", PAD + band * (i as f64 + 0.5), H - PAD + 16.0);
    }
    legend(&mut s, &methods);
    s.push_str("</svg>\n");
    s
}

/// Diverging blue–white–red colour for v in [−limit, limit].
fn diverging(v: f64, limit: f64) -> String {
    let t = if limit > 0.0 { (v / limit).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |x: f64| (255.0 * (1.0 - x.abs())).round() as u8;
    if t >= 0.0 {
        format!("#ff{:02x}{:02x}", fade(t), fade(t))
    } else {
        format!("#{:02x}{:02x}ff", fade(t), fade(t))
    }
}

fn svg_heatmap(title: &str, h: &Heatmap) -> String {
    let mut s = svg_open(title);
    let cw = (W - 2.0 * PAD - 60.0) / h.methods.len().max(1) as f64;
    let ch = (H - 2.0 * PAD - 20.0) / h.samples.len().max(1) as f64;
    for (j, m) in h.methods.iter().enumerate() {
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{m}</text>", PAD + 40.0 + cw * (j as f64 + 0.5), PAD);
    }
    for (i, smp) in h.samples.iter().enumerate() {
        let y0 = PAD + 10.0 + ch * i as f64;
        let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{:.2}\">{smp}</text>", y0 + ch * 0.65);
        for (j, v) in h.values[i].iter().enumerate() {
            let x0 = PAD + 40.0 + cw * j as f64;
            let _ = writeln!(
                s,
                "<rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{}\" stroke=\"white\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.2}</text>",
                diverging(*v, h.limit),
                x0 + cw / 2.0,
                y0 + ch * 0.65
            );
        }
    }
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">scale ±{:.2}</text>", W / 2.0, H - 12.0, h.limit);
    s.push_str("</svg>\n");
    s
}

fn svg_boxplot(title: &str, boxes: &[BoxStats]) -> String {
    let mut s = svg_open(title);
    let hi = boxes.iter().map(|b| b.max).fold(0.0f64, f64::max);
    let y = scale(0.0, hi, H - PAD, PAD);
    let band = (W - 2.0 * PAD) / boxes.len().max(1) as f64;
    for (i, b) in boxes.iter().enumerate() {
        let cx = PAD + band * (i as f64 + 0.5);
        let bw = band * 0.4;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
             <rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"{c}\" fill-opacity=\"0.5\" stroke=\"black\"/>\
             <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
            y(b.whisker_low),
            y(b.whisker_high),
            cx - bw / 2.0,
            y(b.q3),
            (y(b.q1) - y(b.q3)).max(0.5),
            cx - bw / 2.0,
            y(b.median),
            cx + bw / 2.0,
            y(b.median)
        );
        for o in &b.outliers {
            let _ = writeln!(s, "<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>", y(*o));
        }
        let _ = writeln!(s, "<text x=\"{cx:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>", H - PAD + 16.0, b.method);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(method: &str, ds: &Dataset, f: impl Fn(usize, u32, f64) -> f64) -> Vec<PredictionRecord> {
        let mut v = Vec::new();
        for run in 1..=5 {
            for (i, s) in ds.samples().iter().enumerate() {
                v.push(PredictionRecord::new(method, run, &s.id, Property::E, f(i, run, s.e), 2));
            }
        }
        v
    }

    #[test]
    fn twenty_point_box() {
        let v: Vec<f64> = (1..=20).map(|i| i as f64).chain([100.0]).collect();
        let b = box_stats("M", &v);
        // n = 21: h = 5 → q1 = 6; h = 15 → q3 = 16.
        assert_eq!((b.q1, b.median, b.q3), (6.0, 11.0, 16.0));
        assert_eq!((b.whisker_low, b.whisker_high), (1.0, 20.0));
        assert_eq!(b.outliers, vec![100.0]);
        let plain: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let b = box_stats("M", &plain);
        assert_eq!((b.q1, b.median, b.q3), (5.75, 10.5, 15.25));
        assert!(b.outliers.is_empty());
    }

    #[test]
    fn zero_residual_heatmap() {
        let ds = Dataset::canonical();
        let recs = records("M", &ds, |_, _, y| y);
        let f = figure_data(&recs, &ds, FigureKind::Heatmap, Property::E).unwrap();
        let FigureBody::Heatmap(h) = &f.body else { panic!() };
        assert!(h.values.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(h.limit, 0.0);
        assert_eq!(diverging(0.0, h.limit), "#ffffff");
        assert!(f.to_svg().starts_with("<svg"));
    }

    #[test]
    fn parity_sd_peaks_where_runs_disagree() {
        let ds = Dataset::canonical();
        // S1 gets the widest run-to-run spread.
        let recs = records("PLS", &ds, |i, run, y| y + (run as f64 - 3.0) * if i == 0 { 20.0 } else { 1.0 });
        let f = figure_data(&recs, &ds, FigureKind::Parity, Property::E).unwrap();
        let FigureBody::Parity { points } = &f.body else { panic!() };
        let top = points.iter().max_by(|a, b| a.pred.sd.total_cmp(&b.pred.sd)).unwrap();
        assert_eq!(top.sample, "S1");
        assert!((top.pred.sd - 20.0 * 2.5f64.sqrt()).abs() < 1e-9);
        assert!(f.to_csv().lines().count() == 11);
    }

    #[test]
    fn incomplete_runs_rejected() {
        let ds = Dataset::canonical();
        let mut recs = records("M", &ds, |_, _, y| y);
        recs.pop();
        assert!(matches!(
            figure_data(&recs, &ds, FigureKind::Boxplot, Property::E),
            Err(ReportError::Completeness(_))
        ));
    }
}
