//! Element extraction: one prompt per chunk, strict line grammar
//! parsing, case-insensitive name resolution, and a union across chunks
//! keyed by chunk index for claim provenance.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::backend::{complete_all, TextModelBackend};
use super::prompts;

/// Entities and relation claims pulled out of the chunked corpus.
/// Claim keys are canonical concept names; values carry the chunk
/// indices (and weights, for similarity) asserting the claim.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractedElements {
    pub entities: BTreeSet<String>,
    /// (before, after) -> chunks asserting the ordered claim.
    pub prereq_claims: BTreeMap<(String, String), BTreeSet<usize>>,
    /// Unordered pair (lexicographically normalized) -> per-assertion
    /// (chunk index, weight) observations.
    pub sim_claims: BTreeMap<(String, String), Vec<(usize, f64)>>,
    /// Claims dropped because a name did not resolve.
    pub discarded_names: usize,
    /// Lines skipped as unparseable or self-pairs.
    pub skipped_lines: usize,
}

/// Weight used when the backend omits the similarity weight field.
pub const DEFAULT_SIM_WEIGHT: f64 = 0.5;

fn resolve<'a>(name: &str, canonical: &'a BTreeMap<String, String>) -> Option<&'a str> {
    canonical.get(&name.trim().to_lowercase()).map(String::as_str)
}

/// Issues an extraction prompt per chunk (concurrently, bounded by
/// `max_in_flight`, merged in chunk order) and parses the responses.
pub fn extract_elements(
    chunks: &[String],
    kc_names: &[String],
    backend: &dyn TextModelBackend,
    max_in_flight: usize,
) -> Result<ExtractedElements> {
    if kc_names.is_empty() {
        return Err(Error::invalid_input("kc_names must be non-empty"));
    }
    let canonical: BTreeMap<String, String> = kc_names
        .iter()
        .map(|n| (n.to_lowercase(), n.clone()))
        .collect();

    let prompts: Vec<String> = chunks
        .iter()
        .map(|chunk| prompts::extraction(chunk, kc_names))
        .collect();
    let responses = complete_all(backend, &prompts, max_in_flight)?;

    let mut elements = ExtractedElements::default();
    for (chunk_idx, response) in responses.iter().enumerate() {
        // Per-chunk dedup so one chunk contributes at most one support
        // unit per claim.
        let mut seen_prereq: BTreeSet<(String, String)> = BTreeSet::new();
        let mut seen_sim: BTreeSet<(String, String)> = BTreeSet::new();
        for line in response.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(inner) = line.strip_prefix('(').and_then(|l| l.strip_suffix(')')) else {
                elements.skipped_lines += 1;
                continue;
            };
            let fields: Vec<&str> = inner.split('|').collect();
            match fields.as_slice() {
                ["entity", name] => match resolve(name, &canonical) {
                    Some(canon) => {
                        elements.entities.insert(canon.to_string());
                    }
                    None => elements.discarded_names += 1,
                },
                ["prereq", a, b] => {
                    match (resolve(a, &canonical), resolve(b, &canonical)) {
                        (Some(a), Some(b)) => {
                            if a == b {
                                elements.skipped_lines += 1;
                                continue;
                            }
                            let key = (a.to_string(), b.to_string());
                            elements.entities.insert(key.0.clone());
                            elements.entities.insert(key.1.clone());
                            if seen_prereq.insert(key.clone()) {
                                elements.prereq_claims.entry(key).or_default().insert(chunk_idx);
                            }
                        }
                        _ => elements.discarded_names += 1,
                    }
                }
                ["similar", a, b] | ["similar", a, b, _] => {
                    let weight = match fields.get(3) {
                        Some(raw) => match raw.trim().parse::<f64>() {
                            Ok(w) if w > 0.0 && w <= 1.0 => w,
                            _ => {
                                elements.skipped_lines += 1;
                                continue;
                            }
                        },
                        None => DEFAULT_SIM_WEIGHT,
                    };
                    match (resolve(a, &canonical), resolve(b, &canonical)) {
                        (Some(a), Some(b)) => {
                            if a == b {
                                elements.skipped_lines += 1;
                                continue;
                            }
                            let key = if a <= b {
                                (a.to_string(), b.to_string())
                            } else {
                                (b.to_string(), a.to_string())
                            };
                            elements.entities.insert(key.0.clone());
                            elements.entities.insert(key.1.clone());
                            if seen_sim.insert(key.clone()) {
                                elements
                                    .sim_claims
                                    .entry(key)
                                    .or_default()
                                    .push((chunk_idx, weight));
                            }
                        }
                        _ => elements.discarded_names += 1,
                    }
                }
                _ => elements.skipped_lines += 1,
            }
        }
    }
    if elements.discarded_names > 0 || elements.skipped_lines > 0 {
        log::debug!(
            "extraction discarded {} unknown-name claim(s), skipped {} line(s)",
            elements.discarded_names,
            elements.skipped_lines
        );
    }
    Ok(elements)
}
