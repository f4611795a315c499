//! Locked, fold-specific closed-book prompt.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::LlmError;
use crate::data::{Dataset, Descriptor, MembraneSample, Property};
use crate::pipeline::FoldPlan;
use crate::records::PREDICTIONS_HEADER;

pub const REFERENCE_TABLE_SLOT: &str = "{{REFERENCE_TABLE}}";
pub const TARGET_SLOT: &str = "{{TARGET}}";
pub const SAMPLE_SLOT: &str = "{{SAMPLE}}";

const DEFAULT_FRAMING: &str = "\
You are a membrane materials scientist. Predict the mechanical properties of a \
polysulfone (PSF) flat-sheet membrane from its structural descriptors. Work closed-book: \
use only the reference specimens below and your own knowledge. Do not use tools, \
retrieval or code execution.

Reference specimens (descriptors and measured properties):
{{REFERENCE_TABLE}}

Target specimen (descriptors only):
{{TARGET}}
";

const DEFAULT_CONTRACT: &str = "\
Output requirements:
- Reply with a single CSV and nothing else: no prose, no explanation.
- Header, exactly: model_name,run,sample,property,units,predicted
- Exactly three data rows for sample {{SAMPLE}}, one per property: E, TS, EL.
- model_name is your model name; run is 1.
- units, verbatim: N/mm^2 for E and TS, % for EL.
- predicted is a number rounded to two decimals.
";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    /// Task framing; must contain both slot markers.
    pub framing_text: String,
    pub reference_table_slot: String,
    pub target_slot: String,
    /// Output requirements, appended after the framing; may use `{{SAMPLE}}`.
    pub output_contract_text: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            framing_text: DEFAULT_FRAMING.to_string(),
            reference_table_slot: REFERENCE_TABLE_SLOT.to_string(),
            target_slot: TARGET_SLOT.to_string(),
            output_contract_text: DEFAULT_CONTRACT.to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn from_toml(text: &str) -> Result<Self, LlmError> {
        let t: PromptTemplate = toml::from_str(text).map_err(|e| LlmError::Template(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        for (slot, name) in [(&self.reference_table_slot, "reference table"), (&self.target_slot, "target")] {
            if slot.is_empty() {
                return Err(LlmError::Template(format!("empty {name} slot marker")));
            }
            match self.framing_text.matches(slot.as_str()).count() {
                1 => {}
                0 => return Err(LlmError::Template(format!("framing text lacks the {name} slot {slot}"))),
                _ => return Err(LlmError::Template(format!("{name} slot {slot} appears more than once"))),
            }
        }
        let header = PREDICTIONS_HEADER.join(",");
        if !self.output_contract_text.contains(&header) {
            return Err(LlmError::Template(format!("output contract must state the header {header}")));
        }
        Ok(())
    }

    /// SHA-256 over the four template fields, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            &self.framing_text,
            &self.reference_table_slot,
            &self.target_slot,
            &self.output_contract_text,
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn fmt(v: f64, decimals: usize) -> String {
    format!("{v:.decimals$}")
}

fn descriptor_phrase(s: &MembraneSample, ds: &Dataset) -> String {
    let d = |x: Descriptor| fmt(s.descriptor(x), ds.descriptor_decimals(x));
    format!(
        "a mean pore diameter of {} um, a water contact angle of {} degrees, a thickness of {} mm and a porosity of {} %",
        d(Descriptor::Pd),
        d(Descriptor::Ca),
        d(Descriptor::T),
        d(Descriptor::P)
    )
}

/// One sentence per reference specimen, descriptors and targets at source precision.
pub fn reference_row(s: &MembraneSample, ds: &Dataset) -> String {
    let t = |p: Property| fmt(s.target(p), ds.target_decimals(p));
    format!(
        "- Specimen {} has {}; its Young's modulus (E) is {} N/mm^2, tensile strength (TS) is {} N/mm^2 and elongation at break (EL) is {} %.",
        s.id,
        descriptor_phrase(s, ds),
        t(Property::E),
        t(Property::Ts),
        t(Property::El)
    )
}

pub fn target_block(s: &MembraneSample, ds: &Dataset) -> String {
    format!("- Specimen {} has {}.", s.id, descriptor_phrase(s, ds))
}

/// Renders the prompt of one fold: the training rows (never a bootstrap
/// resample) as reference, the held-out sample's descriptors as target.
pub fn render_prompt(tmpl: &PromptTemplate, fold: &FoldPlan, ds: &Dataset) -> Result<String, LlmError> {
    tmpl.validate()?;
    fold.validate(ds).map_err(|e| LlmError::Template(e.to_string()))?;
    let held = ds
        .get(&fold.held_out_id)
        .ok_or_else(|| LlmError::Template(format!("unknown sample {}", fold.held_out_id)))?;
    // Reference rows keep dataset order.
    let table: Vec<String> = ds
        .samples()
        .iter()
        .filter(|s| fold.training_ids.contains(&s.id))
        .map(|s| reference_row(s, ds))
        .collect();
    let body = tmpl
        .framing_text
        .replace(&tmpl.reference_table_slot, &table.join("\n"))
        .replace(&tmpl.target_slot, &target_block(held, ds));
    let contract = tmpl.output_contract_text.replace(SAMPLE_SLOT, &held.id);
    let mut out = body.trim_end().to_string();
    out.push_str("\n\n");
    out.push_str(contract.trim_end());
    out.push('\n');
    Ok(out)
}

/// Textual forms of a target value that must never reach its own prompt.
pub fn leak_needles(value: f64, source_decimals: usize) -> Vec<String> {
    let mut v: Vec<String> = (2..=source_decimals.max(2) + 2).map(|d| fmt(value, d)).collect();
    v.dedup();
    v
}
