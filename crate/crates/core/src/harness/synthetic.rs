//! Deterministic synthetic environments: a layered prerequisite DAG
//! (edges only run forward across layers, so the result is acyclic by
//! construction) with similarity clusters overlaid, plus a difficulty-
//! spread exercise bank.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kc_graph::{Concept, ConceptGraph};
use crate::student_sim::{Exercise, ExerciseBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticGraphSpec {
    pub concepts: usize,
    pub layers: usize,
    /// Direct prerequisites drawn from the previous layer, per node.
    pub edges_per_node: usize,
    pub sim_clusters: usize,
    /// Probability of a similarity edge between two concepts of the
    /// same cluster.
    pub sim_edge_prob: f64,
    pub exercises_per_kc: usize,
    /// Width of the difficulty range, centered on 0.5.
    pub difficulty_spread: f64,
}

impl Default for SyntheticGraphSpec {
    fn default() -> Self {
        SyntheticGraphSpec {
            concepts: 50,
            layers: 5,
            edges_per_node: 2,
            sim_clusters: 10,
            sim_edge_prob: 0.5,
            exercises_per_kc: 4,
            difficulty_spread: 0.8,
        }
    }
}

impl SyntheticGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.concepts == 0 || self.layers == 0 || self.exercises_per_kc == 0 {
            return Err(Error::invalid_config(
                "concepts, layers and exercises_per_kc must be positive",
            ));
        }
        if self.layers > self.concepts {
            return Err(Error::invalid_config("more layers than concepts"));
        }
        if !(0.0..=1.0).contains(&self.sim_edge_prob) {
            return Err(Error::invalid_config("sim_edge_prob outside [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.difficulty_spread) {
            return Err(Error::invalid_config("difficulty_spread outside [0, 1]"));
        }
        Ok(())
    }
}

/// Builds the graph and exercise bank for a spec; identical
/// (spec, seed) inputs produce identical output.
pub fn generate_synthetic_graph(
    spec: &SyntheticGraphSpec,
    seed: u64,
) -> Result<(ConceptGraph, ExerciseBank)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.concepts;

    // Contiguous, near-even layer assignment.
    let layer_of = |v: usize| v * spec.layers / n;
    let layer_members = |l: usize| -> Vec<usize> {
        (0..n).filter(|&v| layer_of(v) == l).collect()
    };

    let concepts: Vec<Concept> = (0..n)
        .map(|id| Concept {
            id,
            name: format!("concept_{id:03}"),
            description: format!("Synthetic concept {id} on layer {}", layer_of(id)),
        })
        .collect();

    // One parent from the previous layer keeps each node reachable;
    // the remaining parents may come from any earlier layer, so paths
    // of several lengths exist between a node and its ancestors.
    let mut prereqs = Vec::new();
    for v in 0..n {
        let layer = layer_of(v);
        if layer == 0 {
            continue;
        }
        let mut parents = layer_members(layer - 1);
        parents.shuffle(&mut rng);
        let mut chosen: Vec<usize> = parents.iter().take(1).copied().collect();
        let earlier: Vec<usize> = (0..n).filter(|&u| layer_of(u) < layer).collect();
        while chosen.len() < spec.edges_per_node.min(earlier.len()) {
            let candidate = earlier[rng.gen_range(0..earlier.len())];
            if !chosen.contains(&candidate) {
                chosen.push(candidate);
            }
        }
        for p in chosen {
            prereqs.push((p, v));
        }
    }

    let mut sims = Vec::new();
    if spec.sim_clusters > 0 {
        let cluster_of = |v: usize| v % spec.sim_clusters;
        for a in 0..n {
            for b in (a + 1)..n {
                if cluster_of(a) == cluster_of(b) && rng.gen_bool(spec.sim_edge_prob) {
                    let weight = (rng.gen_range(3..=9) as f64) / 10.0;
                    sims.push((a, b, weight));
                }
            }
        }
    }

    let graph = ConceptGraph::new(concepts, prereqs, sims);

    let half = spec.difficulty_spread / 2.0;
    let exercises: Vec<Exercise> = (0..n)
        .flat_map(|c| {
            (0..spec.exercises_per_kc).map(move |j| {
                let frac = (j as f64 + 0.5) / spec.exercises_per_kc as f64;
                Exercise {
                    id: c * spec.exercises_per_kc + j,
                    concept_id: c,
                    difficulty: (0.5 - half + spec.difficulty_spread * frac).clamp(0.0, 1.0),
                }
            })
        })
        .collect();
    let bank = ExerciseBank::new(n, exercises)?;
    Ok((graph, bank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kc_graph::validate_graph;

    #[test]
    fn single_layer_has_no_prerequisites() {
        let spec = SyntheticGraphSpec {
            concepts: 10,
            layers: 1,
            ..SyntheticGraphSpec::default()
        };
        let (graph, _) = generate_synthetic_graph(&spec, 1).unwrap();
        assert!(graph.prereq_edges().is_empty());
    }

    #[test]
    fn default_spec_passes_validation() {
        let (graph, bank) = generate_synthetic_graph(&SyntheticGraphSpec::default(), 5).unwrap();
        assert!(validate_graph(&graph).is_empty());
        assert_eq!(graph.n_concepts(), 50);
        assert_eq!(bank.all().count(), 200);
        for e in bank.all() {
            assert!((0.0..=1.0).contains(&e.difficulty));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticGraphSpec::default();
        let (g1, _) = generate_synthetic_graph(&spec, 9).unwrap();
        let (g2, _) = generate_synthetic_graph(&spec, 9).unwrap();
        assert_eq!(g1.to_json_string().unwrap(), g2.to_json_string().unwrap());
    }

    #[test]
    fn many_seeds_stay_acyclic() {
        let spec = SyntheticGraphSpec {
            concepts: 20,
            layers: 4,
            edges_per_node: 3,
            ..SyntheticGraphSpec::default()
        };
        for seed in 0..50 {
            let (graph, _) = generate_synthetic_graph(&spec, seed).unwrap();
            assert!(validate_graph(&graph).is_empty(), "seed {seed}");
        }
    }
}
