//! Planted ontology: a ground-truth concept set with known prerequisite
//! and similarity relations plus per-concept approval schedules. It
//! drives the deterministic stub backend so every pipeline test has an
//! exact expected answer.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantedOntology {
    pub concepts: Vec<String>,
    /// (a, b): a must be learned before b.
    pub true_prereqs: Vec<(String, String)>,
    /// (a, b, weight): commonly confused pair.
    pub true_sims: Vec<(String, String, f64)>,
    /// Evaluator approves the analysis of a concept at this iteration
    /// (default 1 = immediately).
    #[serde(default)]
    pub approve_after: BTreeMap<String, u32>,
}

impl PlantedOntology {
    pub fn validate(&self) -> Result<()> {
        let known = |name: &str| self.concepts.iter().any(|c| c == name);
        for (a, b) in &self.true_prereqs {
            if !known(a) || !known(b) {
                return Err(Error::invalid_input(format!(
                    "prerequisite ({a}, {b}) references unknown concept"
                )));
            }
        }
        for (a, b, w) in &self.true_sims {
            if !known(a) || !known(b) {
                return Err(Error::invalid_input(format!(
                    "similarity ({a}, {b}) references unknown concept"
                )));
            }
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(Error::invalid_input(format!(
                    "similarity weight {w} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn concept_index(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c == name)
    }

    /// Deterministic synthetic ontology: `n_prereqs` forward edges over
    /// the concept ordering (acyclic by construction) and `n_sims`
    /// distinct unordered pairs.
    pub fn synthetic(n_concepts: usize, n_prereqs: usize, n_sims: usize, seed: u64) -> Self {
        let concepts: Vec<String> = (0..n_concepts)
            .map(|i| format!("topic_{i:02}"))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut forward: Vec<(usize, usize)> = (0..n_concepts)
            .flat_map(|a| ((a + 1)..n_concepts).map(move |b| (a, b)))
            .collect();
        forward.shuffle(&mut rng);
        let true_prereqs = forward
            .iter()
            .take(n_prereqs)
            .map(|&(a, b)| (concepts[a].clone(), concepts[b].clone()))
            .collect();

        let mut pairs: Vec<(usize, usize)> = (0..n_concepts)
            .flat_map(|a| ((a + 1)..n_concepts).map(move |b| (a, b)))
            .collect();
        pairs.shuffle(&mut rng);
        let true_sims = pairs
            .iter()
            .take(n_sims)
            .map(|&(a, b)| {
                let w = (rng.gen_range(3..=9) as f64) / 10.0;
                (concepts[a].clone(), concepts[b].clone(), w)
            })
            .collect();

        let mut approve_after = BTreeMap::new();
        for (i, name) in concepts.iter().enumerate() {
            if i % 5 == 0 {
                approve_after.insert(name.clone(), 2);
            }
        }

        PlantedOntology {
            concepts,
            true_prereqs,
            true_sims,
            approve_after,
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let ontology: PlantedOntology =
            serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("ontology: {e}")))?;
        ontology.validate()?;
        Ok(ontology)
    }
}
