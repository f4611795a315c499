//! Regenerates the synthetic four-model response archive used by the tests:
//!
//!     cargo run -p membench --example gen_fixture -- data/fixtures/llm_responses
//!
//! Each model gets a fixed per-sample error (its "opinion" about a specimen)
//! plus a small run-to-run jitter, mimicking the low run variance of
//! temperature-0 chat models. Files follow the prompt's output contract,
//! including `run` left at 1.

use std::path::PathBuf;

use membench::llm::write_response;
use membench::{Dataset, Property};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODELS: [(&str, f64, bool); 4] = [("LLM-A", 0.80, false), ("LLM-B", 0.85, true), ("LLM-C", 0.90, false), ("LLM-D", 1.00, false)];
const SCALE: [f64; 3] = [38.0, 1.6, 7.5];
const JITTER: f64 = 0.04;
const RUNS: u32 = 5;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/fixtures/llm_responses".into()));
    let ds = Dataset::canonical();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (model, factor, fenced) in MODELS {
        let bias: Vec<[f64; 3]> = (0..ds.len())
            .map(|_| std::array::from_fn(|p| factor * SCALE[p] * normal(&mut rng)))
            .collect();
        for run in 1..=RUNS {
            for (i, s) in ds.samples().iter().enumerate() {
                let mut body = String::from("model_name,run,sample,property,units,predicted\n");
                for p in Property::ALL {
                    let k = p.index();
                    let v = s.target(p) + bias[i][k] + JITTER * factor * SCALE[k] * normal(&mut rng);
                    let v = v.max(0.05 * s.target(p));
                    body += &format!("{model},1,{},{},{},{v:.2}\n", s.id, p.label(), p.units());
                }
                let text = if fenced { format!("```csv\n{body}```\n") } else { body };
                write_response(&root, model, run, i + 1, &text).expect("write response");
            }
        }
    }
    println!("wrote {} files under {}", MODELS.len() * RUNS as usize * ds.len(), root.display());
}
