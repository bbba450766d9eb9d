//! Single-level community construction (connected components of the
//! union of prerequisite and similarity edges), community summaries and
//! per-step learning-path explanations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kc_graph::ConceptGraph;

use super::backend::TextModelBackend;
use super::prompts;

/// One community and its generated summary. Communities partition the
/// concepts that have at least one edge; isolated nodes belong to none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommunitySummary {
    pub community_id: usize,
    pub member_ids: Vec<usize>,
    pub summary_text: String,
}

/// Connected components of the union graph, each sorted internally and
/// ordered by smallest member.
pub fn communities(graph: &ConceptGraph) -> Vec<Vec<usize>> {
    let n = graph.n_concepts();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, v: usize) -> usize {
        let mut root = v;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = v;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    let mut has_edge = vec![false; n];
    for &(from, to) in graph.prereq_edges() {
        union(&mut parent, from, to);
        has_edge[from] = true;
        has_edge[to] = true;
    }
    for &(a, b, _) in graph.sim_edges() {
        union(&mut parent, a, b);
        has_edge[a] = true;
        has_edge[b] = true;
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 0..n {
        if has_edge[v] {
            groups.entry(find(&mut parent, v)).or_default().push(v);
        }
    }
    groups.into_values().collect()
}

/// One summary prompt per community.
pub fn summarize_communities(
    graph: &ConceptGraph,
    backend: &dyn TextModelBackend,
) -> Result<Vec<CommunitySummary>> {
    let mut out = Vec::new();
    for (community_id, member_ids) in communities(graph).into_iter().enumerate() {
        let names: Vec<&str> = member_ids.iter().map(|&id| graph.concept_name(id)).collect();
        let summary_text = backend.complete(&prompts::summary(&names))?;
        if summary_text.trim().is_empty() {
            return Err(Error::MalformedResponse(
                "empty community summary".to_string(),
            ));
        }
        out.push(CommunitySummary {
            community_id,
            member_ids,
            summary_text,
        });
    }
    Ok(out)
}

/// One explanation per path step, citing the concept's prerequisite
/// parents/children that appear in the path, its similarity neighbors
/// and its community summary.
pub fn explain_path(
    path: &[(usize, usize)],
    summaries: &[CommunitySummary],
    graph: &ConceptGraph,
    backend: &dyn TextModelBackend,
) -> Result<Vec<String>> {
    for &(_, concept) in path {
        if concept >= graph.n_concepts() {
            return Err(Error::invalid_input(format!(
                "path references unknown concept {concept}"
            )));
        }
    }
    let path_concepts: Vec<usize> = path.iter().map(|&(_, c)| c).collect();
    let mut out = Vec::with_capacity(path.len());
    for &(_, concept) in path {
        let parents: Vec<&str> = graph
            .prereqs_of(concept)
            .iter()
            .filter(|p| path_concepts.contains(p))
            .map(|&p| graph.concept_name(p))
            .collect();
        let children: Vec<&str> = graph
            .dependents_of(concept)
            .iter()
            .filter(|c| path_concepts.contains(c))
            .map(|&c| graph.concept_name(c))
            .collect();
        let neighbors: Vec<&str> = crate::kc_graph::similar_neighbors(graph, concept)?
            .iter()
            .map(|&(n, _)| graph.concept_name(n))
            .collect();
        let community = summaries
            .iter()
            .find(|s| s.member_ids.contains(&concept))
            .map(|s| s.summary_text.as_str());
        let prompt = prompts::explain_step(
            graph.concept_name(concept),
            &parents,
            &children,
            &neighbors,
            community,
        );
        let explanation = backend.complete(&prompt)?;
        if explanation.trim().is_empty() {
            return Err(Error::MalformedResponse(
                "empty path-step explanation".to_string(),
            ));
        }
        out.push(explanation);
    }
    Ok(out)
}
