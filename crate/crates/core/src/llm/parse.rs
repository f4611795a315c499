//! Validation of the CSV a model returns for one fold.

use serde::Serialize;

use super::LlmError;
use crate::data::Property;
use crate::records::{PredictionRecord, PREDICTIONS_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Only the CSV (optionally inside one code fence); exactly two decimals.
    Strict,
    /// CSV located anywhere in the text; any decimal count.
    #[default]
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmResponseBatch {
    pub raw_text: String,
    /// E, TS, EL in that order.
    pub parsed: Vec<PredictionRecord>,
    pub fold_index: usize,
    pub model: String,
    pub run: u32,
    pub warnings: Vec<String>,
}

/// What the orchestrator knows about the request a response answers.
#[derive(Debug, Clone, Copy)]
pub struct ResponseContext<'a> {
    pub model: &'a str,
    pub run: u32,
    pub fold_index: usize,
    pub held_out_id: &'a str,
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn split_fields(line: &str) -> Vec<String> {
    line.split(',').map(|f| f.trim().to_string()).collect()
}

fn is_header(line: &str) -> bool {
    split_fields(line) == PREDICTIONS_HEADER
}

/// Lines of the CSV block, header first.
fn locate_block(raw: &str, mode: ParseMode) -> Result<Vec<&str>, LlmError> {
    let lines: Vec<&str> = raw.lines().collect();
    let fences: Vec<usize> = (0..lines.len()).filter(|&i| is_fence(lines[i])).collect();
    match mode {
        ParseMode::Strict => {
            let body: Vec<&str> = match fences.as_slice() {
                [] => lines.clone(),
                [open, close] => {
                    let outside = lines[..*open].iter().chain(&lines[close + 1..]);
                    if outside.clone().any(|l| !l.trim().is_empty()) {
                        return Err(LlmError::Schema("text outside the fenced CSV block".into()));
                    }
                    lines[open + 1..*close].to_vec()
                }
                _ => return Err(LlmError::Schema("expected at most one fenced block".into())),
            };
            let body: Vec<&str> = body.into_iter().filter(|l| !l.trim().is_empty()).collect();
            match body.first() {
                Some(h) if is_header(h) => Ok(body),
                Some(h) => Err(LlmError::Schema(format!("header mismatch: {:?}", h.trim()))),
                None => Err(LlmError::Schema("no CSV found".into())),
            }
        }
        ParseMode::Lenient => {
            let start = lines.iter().position(|l| is_header(l)).ok_or_else(|| {
                let first = lines.iter().find(|l| l.contains(',')).map(|l| l.trim()).unwrap_or("");
                LlmError::Schema(format!("no line matches the header; first CSV-like line {first:?}"))
            })?;
            let mut block = vec![lines[start]];
            for l in &lines[start + 1..] {
                if is_fence(l) {
                    break;
                }
                if l.trim().is_empty() {
                    if block.len() > 1 {
                        break;
                    }
                    continue;
                }
                if !l.contains(',') {
                    break;
                }
                block.push(l);
            }
            Ok(block)
        }
    }
}

fn decimals_of(text: &str) -> usize {
    text.split_once('.').map_or(0, |(_, f)| f.len())
}

pub fn parse_llm_csv(raw: &str, ctx: ResponseContext<'_>, mode: ParseMode) -> Result<LlmResponseBatch, LlmError> {
    let block = locate_block(raw, mode)?;
    let rows = &block[1..];
    if rows.len() > 3 {
        return Err(LlmError::OverPrediction(rows.len()));
    }
    let mut warnings = Vec::new();
    let mut slots: [Option<PredictionRecord>; 3] = [None, None, None];
    for (i, line) in rows.iter().enumerate() {
        let row = i + 1;
        let f = split_fields(line);
        if f.len() != PREDICTIONS_HEADER.len() {
            return Err(LlmError::Schema(format!("row {row}: {} fields, expected 6", f.len())));
        }
        if f[2] != ctx.held_out_id {
            return Err(LlmError::Leakage {
                expected: ctx.held_out_id.to_string(),
                found: f[2].clone(),
            });
        }
        let property =
            Property::parse(&f[3]).ok_or_else(|| LlmError::Schema(format!("row {row}: unknown property {:?}", f[3])))?;
        if f[4] != property.units() {
            return Err(LlmError::Units {
                property,
                found: f[4].clone(),
            });
        }
        let value: f64 = f[5]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| LlmError::Parse(format!("row {row}: predicted {:?} is not a number", f[5])))?;
        let decimals = decimals_of(&f[5]);
        if mode == ParseMode::Strict && decimals != 2 {
            return Err(LlmError::Parse(format!(
                "row {row}: predicted {:?} must carry exactly two decimals",
                f[5]
            )));
        }
        match f[1].parse::<u32>() {
            Ok(r) if r == ctx.run => {}
            Err(_) if mode == ParseMode::Strict => {
                return Err(LlmError::Parse(format!("row {row}: run {:?} is not an integer", f[1])))
            }
            _ => warnings.push(format!("row {row}: run {:?} replaced by orchestrator run {}", f[1], ctx.run)),
        }
        if f[0] != ctx.model {
            warnings.push(format!("row {row}: model_name {:?} replaced by {}", f[0], ctx.model));
        }
        let slot = &mut slots[property.index()];
        if slot.is_some() {
            return Err(LlmError::DuplicateProperty(property));
        }
        *slot = Some(PredictionRecord::new(
            ctx.model,
            ctx.run,
            ctx.held_out_id,
            property,
            value,
            decimals.min(u8::MAX as usize) as u8,
        ));
    }
    let missing: Vec<Property> = Property::ALL.into_iter().filter(|p| slots[p.index()].is_none()).collect();
    if !missing.is_empty() {
        return Err(LlmError::Incomplete(missing));
    }
    Ok(LlmResponseBatch {
        raw_text: raw.to_string(),
        parsed: slots.into_iter().flatten().collect(),
        fold_index: ctx.fold_index,
        model: ctx.model.to_string(),
        run: ctx.run,
        warnings,
    })
}

/// Canonical CSV of a parsed batch: bare header, rows in E, TS, EL order,
/// values with their received decimals.
pub fn canonical_csv(batch: &LlmResponseBatch) -> String {
    let mut out = PREDICTIONS_HEADER.join(",");
    out.push('\n');
    for r in &batch.parsed {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.run,
            r.sample,
            r.property,
            r.units,
            r.predicted_text()
        ));
    }
    out
}
