//! Knowledge-concept structure graph generation: an iterative
//! critique-and-refine loop produces explanatory text per concept name,
//! then a chunk / extract / summarize / assemble pipeline turns that
//! corpus into a prerequisite-plus-similarity graph against a pluggable
//! text-model backend.

mod assemble;
mod backend;
mod chunk;
mod community;
mod extract;
mod ontology;
pub mod prompts;

pub use assemble::assemble_graph;
pub use backend::{
    complete_all, HttpBackend, HttpBackendConfig, StubBackend, TextModelBackend,
};
pub use chunk::{chunk_text, reassemble};
pub use community::{communities, explain_path, summarize_communities, CommunitySummary};
pub use extract::{extract_elements, ExtractedElements, DEFAULT_SIM_WEIGHT};
pub use ontology::PlantedOntology;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kc_graph::{Concept, ConceptGraph};

/// Final explanatory text for one concept plus how it got there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub kc_name: String,
    pub text: String,
    pub iterations_used: u32,
    pub approved: bool,
}

/// Generate-evaluate-refine loop for one concept. Each round produces
/// an analysis, has the backend judge it against the evaluation
/// instruction, and either stops on an APPROVED verdict or folds the
/// critique into a refinement prompt. The last analysis is returned
/// with the approval flag; at most `max_iters` rounds run.
pub fn generate_explanation(
    kc_name: &str,
    backend: &dyn TextModelBackend,
    max_iters: u32,
) -> Result<Explanation> {
    if max_iters < 1 {
        return Err(Error::invalid_config("max_iters must be at least 1"));
    }
    let mut analysis = String::new();
    let mut critique = String::new();
    let mut approved = false;
    let mut iterations_used = 0;
    for iteration in 1..=max_iters {
        iterations_used = iteration;
        let prompt = if iteration == 1 {
            prompts::analysis(kc_name)
        } else {
            prompts::refinement(kc_name, &analysis, &critique)
        };
        analysis = backend.complete(&prompt)?;
        if analysis.trim().is_empty() {
            return Err(Error::MalformedResponse(format!(
                "empty analysis for concept {kc_name:?} at iteration {iteration}"
            )));
        }
        let verdict = backend.complete(&prompts::evaluation(kc_name, &analysis))?;
        if verdict.trim_start().starts_with("APPROVED") {
            approved = true;
            break;
        }
        critique = verdict;
    }
    Ok(Explanation {
        kc_name: kc_name.to_string(),
        text: analysis,
        iterations_used,
        approved,
    })
}

/// Pipeline knobs. Chunk sizes in characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub chunk_size: usize,
    pub overlap: usize,
    pub max_refine_iters: u32,
    pub max_in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            chunk_size: 600,
            overlap: 120,
            max_refine_iters: 4,
            max_in_flight: 4,
        }
    }
}

/// Everything the end-to-end generation run produces.
#[derive(Debug)]
pub struct PipelineOutput {
    pub graph: ConceptGraph,
    pub explanations: Vec<Explanation>,
    pub elements: ExtractedElements,
    pub summaries: Vec<CommunitySummary>,
}

/// Full generation pipeline: refine an explanation per name, join the
/// corpus, chunk it, extract elements, assemble the graph (descriptions
/// filled from the explanations), and summarize its communities.
pub fn run_pipeline(
    kc_names: &[String],
    backend: &dyn TextModelBackend,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if kc_names.is_empty() {
        return Err(Error::invalid_input("kc_names must be non-empty"));
    }
    let explanations: Vec<Explanation> = kc_names
        .iter()
        .map(|name| generate_explanation(name, backend, config.max_refine_iters))
        .collect::<Result<_>>()?;

    let corpus = explanations
        .iter()
        .map(|e| e.text.as_str())
        .collect::<Vec<_>>()
        .join("\n\n");
    let chunks = chunk_text(&corpus, config.chunk_size, config.overlap)?;
    let elements = extract_elements(&chunks, kc_names, backend, config.max_in_flight)?;
    let bare = assemble_graph(&elements, kc_names);

    let concepts = bare
        .concepts()
        .iter()
        .zip(explanations.iter())
        .map(|(c, e)| Concept {
            id: c.id,
            name: c.name.clone(),
            description: e.text.clone(),
        })
        .collect();
    let graph = ConceptGraph::new(
        concepts,
        bare.prereq_edges().to_vec(),
        bare.sim_edges().to_vec(),
    );
    let summaries = summarize_communities(&graph, backend)?;

    Ok(PipelineOutput {
        graph,
        explanations,
        elements,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ontology_with_schedule(approve: &[(&str, u32)]) -> PlantedOntology {
        PlantedOntology {
            concepts: vec!["fractions".into(), "ratios".into()],
            true_prereqs: vec![("fractions".into(), "ratios".into())],
            true_sims: Vec::new(),
            approve_after: approve
                .iter()
                .map(|&(n, k)| (n.to_string(), k))
                .collect(),
        }
    }

    #[test]
    fn immediate_approval_uses_one_iteration() {
        let backend = StubBackend::new(ontology_with_schedule(&[])).unwrap();
        let e = generate_explanation("fractions", &backend, 5).unwrap();
        assert_eq!(e.iterations_used, 1);
        assert!(e.approved);
        assert!(!e.text.is_empty());
    }

    #[test]
    fn scheduled_approval_stops_at_the_fixed_point() {
        let backend = StubBackend::new(ontology_with_schedule(&[("ratios", 3)])).unwrap();
        let e = generate_explanation("ratios", &backend, 5).unwrap();
        assert_eq!(e.iterations_used, 3);
        assert!(e.approved);
    }

    #[test]
    fn never_approved_caps_at_max_iters() {
        let backend = StubBackend::new(ontology_with_schedule(&[("ratios", 99)])).unwrap();
        let e = generate_explanation("ratios", &backend, 4).unwrap();
        assert_eq!(e.iterations_used, 4);
        assert!(!e.approved);
    }

    #[test]
    fn zero_max_iters_is_rejected() {
        let backend = StubBackend::new(ontology_with_schedule(&[])).unwrap();
        assert!(generate_explanation("fractions", &backend, 0).is_err());
    }

    struct EmptyBackend;
    impl TextModelBackend for EmptyBackend {
        fn complete(&self, _prompt: &str) -> crate::error::Result<String> {
            Ok(String::new())
        }
    }

    #[test]
    fn empty_completion_is_malformed() {
        let err = generate_explanation("fractions", &EmptyBackend, 3).unwrap_err();
        assert!(matches!(err, Error::MalformedResponse(_)));
    }

    #[test]
    fn pipeline_recovers_planted_relations_exactly() {
        let ontology = PlantedOntology::synthetic(12, 14, 6, 31);
        let backend = StubBackend::new(ontology.clone()).unwrap();
        let out = run_pipeline(&ontology.concepts, &backend, &PipelineConfig::default()).unwrap();

        let idx = |name: &str| ontology.concept_index(name).unwrap();
        let mut want_prereqs: Vec<(usize, usize)> = ontology
            .true_prereqs
            .iter()
            .map(|(a, b)| (idx(a), idx(b)))
            .collect();
        want_prereqs.sort_unstable();
        assert_eq!(out.graph.prereq_edges(), want_prereqs.as_slice());

        let mut want_sims: Vec<(usize, usize)> = ontology
            .true_sims
            .iter()
            .map(|(a, b, _)| {
                let (ia, ib) = (idx(a), idx(b));
                (ia.min(ib), ia.max(ib))
            })
            .collect();
        want_sims.sort_unstable();
        let got_sims: Vec<(usize, usize)> =
            out.graph.sim_edges().iter().map(|&(a, b, _)| (a, b)).collect();
        assert_eq!(got_sims, want_sims);

        assert_eq!(out.graph.n_concepts(), 12);
        assert!(crate::kc_graph::validate_graph(&out.graph).is_empty());
    }

    #[test]
    fn pipeline_is_byte_deterministic_with_stub() {
        let ontology = PlantedOntology::synthetic(10, 9, 4, 5);
        let backend = StubBackend::new(ontology.clone()).unwrap();
        let config = PipelineConfig::default();
        let a = run_pipeline(&ontology.concepts, &backend, &config).unwrap();
        let b = run_pipeline(&ontology.concepts, &backend, &config).unwrap();
        assert_eq!(
            a.graph.to_json_string().unwrap(),
            b.graph.to_json_string().unwrap()
        );
    }

    #[test]
    fn every_input_name_becomes_a_node() {
        let ontology = PlantedOntology {
            concepts: vec!["alone".into(), "pairless".into()],
            ..PlantedOntology::default()
        };
        let backend = StubBackend::new(ontology.clone()).unwrap();
        let out = run_pipeline(&ontology.concepts, &backend, &PipelineConfig::default()).unwrap();
        assert_eq!(out.graph.n_concepts(), 2);
        assert_eq!(out.graph.concept_name(0), "alone");
    }
}
