//! Graph assembly from extracted claims: dense ids in input-name order,
//! deduplication, prerequisite cycle breaking by minimum support, and
//! similarity weight averaging. The output always passes validation.

use std::collections::BTreeMap;

use crate::kc_graph::{strongly_connected_components, Concept, ConceptGraph};

use super::extract::ExtractedElements;

/// Builds the concept graph. Every input name becomes a node whether or
/// not any claim mentions it. Prerequisite cycles are broken by
/// repeatedly removing the cycle edge with the lowest support count
/// (ties resolved against the lexicographically greatest endpoint-name
/// pair) until the edge set is acyclic.
pub fn assemble_graph(elements: &ExtractedElements, kc_names: &[String]) -> ConceptGraph {
    let id_of: BTreeMap<&str, usize> = kc_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let concepts: Vec<Concept> = kc_names
        .iter()
        .enumerate()
        .map(|(id, name)| Concept {
            id,
            name: name.clone(),
            description: String::new(),
        })
        .collect();

    // Prerequisite edges with support = number of distinct chunks.
    let mut prereqs: Vec<(usize, usize, usize)> = Vec::new(); // (from, to, support)
    for ((before, after), chunks) in &elements.prereq_claims {
        let (Some(&from), Some(&to)) = (id_of.get(before.as_str()), id_of.get(after.as_str()))
        else {
            continue;
        };
        if from == to {
            continue;
        }
        prereqs.push((from, to, chunks.len()));
    }

    let n = kc_names.len();
    loop {
        let edges: Vec<(usize, usize)> = prereqs.iter().map(|&(f, t, _)| (f, t)).collect();
        let cyclic: Vec<Vec<usize>> = strongly_connected_components(n, &edges)
            .into_iter()
            .filter(|scc| scc.len() > 1)
            .collect();
        if cyclic.is_empty() {
            break;
        }
        let in_cycle = |v: usize| cyclic.iter().any(|scc| scc.binary_search(&v).is_ok());
        let same_component = |f: usize, t: usize| {
            cyclic
                .iter()
                .any(|scc| scc.binary_search(&f).is_ok() && scc.binary_search(&t).is_ok())
        };
        let victim = prereqs
            .iter()
            .enumerate()
            .filter(|(_, &(f, t, _))| in_cycle(f) && in_cycle(t) && same_component(f, t))
            .min_by(|(_, a), (_, b)| {
                // Lowest support first; among ties the pair whose names
                // sort last is removed, so the smaller-named edge survives.
                let a_names = (&kc_names[a.0], &kc_names[a.1]);
                let b_names = (&kc_names[b.0], &kc_names[b.1]);
                a.2.cmp(&b.2).then_with(|| b_names.cmp(&a_names))
            })
            .map(|(i, _)| i)
            .expect("a non-trivial SCC always contains an internal edge");
        prereqs.swap_remove(victim);
    }

    // Similarity edges: weights averaged over every retained claim.
    let mut sims: Vec<(usize, usize, f64)> = Vec::new();
    for ((a, b), observations) in &elements.sim_claims {
        let (Some(&ia), Some(&ib)) = (id_of.get(a.as_str()), id_of.get(b.as_str())) else {
            continue;
        };
        if ia == ib || observations.is_empty() {
            continue;
        }
        let mean = observations.iter().map(|&(_, w)| w).sum::<f64>() / observations.len() as f64;
        sims.push((ia, ib, mean.clamp(f64::MIN_POSITIVE, 1.0)));
    }

    ConceptGraph::new(
        concepts,
        prereqs.into_iter().map(|(f, t, _)| (f, t)).collect(),
        sims,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_gen::extract::ExtractedElements;
    use crate::kc_graph::validate_graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn claim(
        elements: &mut ExtractedElements,
        from: &str,
        to: &str,
        chunks: &[usize],
    ) {
        elements
            .prereq_claims
            .entry((from.to_string(), to.to_string()))
            .or_default()
            .extend(chunks.iter().copied());
    }

    #[test]
    fn two_cycle_keeps_lexicographically_smaller_edge() {
        let mut elements = ExtractedElements::default();
        claim(&mut elements, "a", "b", &[0]);
        claim(&mut elements, "b", "a", &[1]);
        let graph = assemble_graph(&elements, &names(&["a", "b"]));
        assert_eq!(graph.prereq_edges(), &[(0, 1)]);
    }

    #[test]
    fn higher_support_edge_survives_a_cycle() {
        let mut elements = ExtractedElements::default();
        claim(&mut elements, "b", "a", &[0, 1, 2]);
        claim(&mut elements, "a", "b", &[3]);
        let graph = assemble_graph(&elements, &names(&["a", "b"]));
        // (a, b) has support 1 and is removed first.
        assert_eq!(graph.prereq_edges(), &[(1, 0)]);
    }

    #[test]
    fn no_claims_yield_nodes_without_edges() {
        let graph = assemble_graph(&ExtractedElements::default(), &names(&["x", "y", "z"]));
        assert_eq!(graph.n_concepts(), 3);
        assert!(graph.prereq_edges().is_empty());
        assert!(graph.sim_edges().is_empty());
        assert!(validate_graph(&graph).is_empty());
    }

    #[test]
    fn sim_weights_are_averaged_over_duplicates() {
        let mut elements = ExtractedElements::default();
        elements
            .sim_claims
            .entry(("a".to_string(), "b".to_string()))
            .or_default()
            .extend([(0usize, 0.4), (1usize, 0.8)]);
        let graph = assemble_graph(&elements, &names(&["a", "b"]));
        let (a, b, w) = graph.sim_edges()[0];
        assert_eq!((a, b), (0, 1));
        assert!((w - 0.6).abs() < 1e-12);
    }

    #[test]
    fn output_is_acyclic_for_random_claim_sets() {
        let kc: Vec<String> = (0..8).map(|i| format!("n{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let mut elements = ExtractedElements::default();
            for _ in 0..rng.gen_range(0..25) {
                let a = rng.gen_range(0..kc.len());
                let b = rng.gen_range(0..kc.len());
                if a == b {
                    continue;
                }
                let support: BTreeSet<usize> =
                    (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..10)).collect();
                elements
                    .prereq_claims
                    .entry((kc[a].clone(), kc[b].clone()))
                    .or_default()
                    .extend(support);
            }
            let graph = assemble_graph(&elements, &kc);
            let report = validate_graph(&graph);
            assert!(report.is_empty(), "violations: {report:?}");
        }
    }
}
