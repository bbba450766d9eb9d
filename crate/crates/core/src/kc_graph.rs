//! Dual knowledge-concept structure: a prerequisite DAG plus a weighted
//! similarity graph, with validation, initial-node identification and
//! candidate action-space construction.
//!
//! The graph is immutable after construction; every operation here is a
//! pure read and safe to call from many threads at once.

use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One knowledge concept. Ids are dense indices `0..N-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub id: usize,
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Knowledge-concept structure graph: directed prerequisite edges
/// (`from` must be learned before `to`) and undirected weighted
/// similarity edges between concepts learners commonly confuse.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptGraph {
    concepts: Vec<Concept>,
    /// Ordered (from, to) pairs, kept sorted.
    prereq_edges: Vec<(usize, usize)>,
    /// Unordered pairs stored once with a < b, kept sorted.
    sim_edges: Vec<(usize, usize, f64)>,
    // Adjacency caches; built once, edges with out-of-range endpoints are
    // kept in the edge lists (for validation) but excluded here.
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    sim_adj: Vec<Vec<(usize, f64)>>,
}

/// A single invariant violation found by [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// A representative prerequisite cycle, listed in traversal order.
    Cycle(Vec<usize>),
    /// Similarity edge joining a concept to itself.
    SelfPair(usize),
    /// Edge endpoint that is not a known concept id.
    UnknownEndpoint { edge: String, id: usize },
    /// Concept ids are not the dense range 0..N-1.
    NonDenseIds { expected: usize, found: usize },
    /// Similarity weight outside (0, 1].
    BadWeight { a: usize, b: usize, weight: f64 },
}

/// Violations are data, not errors: an empty report means every
/// invariant holds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-concept mastery levels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasteryVector {
    values: Vec<f64>,
}

impl MasteryVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid_input(format!(
                "mastery value {v} outside [0, 1]"
            )));
        }
        Ok(MasteryVector { values })
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        MasteryVector {
            values: vec![value.clamp(0.0, 1.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    /// Sets one entry, clamping into `[0, 1]`.
    pub fn set_clamped(&mut self, id: usize, value: f64) {
        self.values[id] = value.clamp(0.0, 1.0);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Non-empty set of target concepts plus its one-hot encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSet {
    ids: Vec<usize>,
    one_hot: Vec<f64>,
}

impl GoalSet {
    pub fn new(mut ids: Vec<usize>, n_concepts: usize) -> Result<Self> {
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::invalid_input("goal set must be non-empty"));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id >= n_concepts) {
            return Err(Error::invalid_input(format!(
                "goal id {bad} out of range (N = {n_concepts})"
            )));
        }
        let mut one_hot = vec![0.0; n_concepts];
        for &id in &ids {
            one_hot[id] = 1.0;
        }
        Ok(GoalSet { ids, one_hot })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn one_hot(&self) -> &[f64] {
        &self.one_hot
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

// Serde mirror of the graph JSON contract shared by the generation
// pipeline, the agents and the CLI.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    concepts: Vec<Concept>,
    prerequisites: Vec<PrereqEdge>,
    similarities: Vec<SimEdge>,
}

#[derive(Serialize, Deserialize)]
struct PrereqEdge {
    from: usize,
    to: usize,
}

#[derive(Serialize, Deserialize)]
struct SimEdge {
    a: usize,
    b: usize,
    weight: f64,
}

impl ConceptGraph {
    /// Builds a graph from parts. Edges are normalized (similarity pairs
    /// stored once with the smaller endpoint first) and sorted so that
    /// identical inputs always produce an identical structure. No
    /// invariant checking happens here; see [`validate_graph`].
    pub fn new(
        concepts: Vec<Concept>,
        prereq_edges: Vec<(usize, usize)>,
        sim_edges: Vec<(usize, usize, f64)>,
    ) -> Self {
        let n = concepts.len();
        let mut prereq: Vec<(usize, usize)> = prereq_edges;
        prereq.sort_unstable();
        prereq.dedup();
        let mut sims: Vec<(usize, usize, f64)> = sim_edges
            .into_iter()
            .map(|(a, b, w)| if a <= b { (a, b, w) } else { (b, a, w) })
            .collect();
        sims.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        sims.dedup_by(|x, y| (x.0, x.1) == (y.0, y.1));

        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(from, to) in &prereq {
            if from < n && to < n {
                parents[to].push(from);
                children[from].push(to);
            }
        }
        let mut sim_adj = vec![Vec::new(); n];
        for &(a, b, w) in &sims {
            if a < n && b < n && a != b {
                sim_adj[a].push((b, w));
                sim_adj[b].push((a, w));
            }
        }
        ConceptGraph {
            concepts,
            prereq_edges: prereq,
            sim_edges: sims,
            parents,
            children,
            sim_adj,
        }
    }

    pub fn n_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept_name(&self, id: usize) -> &str {
        &self.concepts[id].name
    }

    pub fn prereq_edges(&self) -> &[(usize, usize)] {
        &self.prereq_edges
    }

    pub fn sim_edges(&self) -> &[(usize, usize, f64)] {
        &self.sim_edges
    }

    /// Direct prerequisites of `id`.
    pub fn prereqs_of(&self, id: usize) -> &[usize] {
        &self.parents[id]
    }

    /// Concepts that have `id` as a direct prerequisite.
    pub fn dependents_of(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    fn check_id(&self, id: usize, what: &str) -> Result<()> {
        if id >= self.concepts.len() {
            return Err(Error::invalid_input(format!(
                "{what} id {id} out of range (N = {})",
                self.concepts.len()
            )));
        }
        Ok(())
    }

    /// All strict ancestors of `id` in the prerequisite DAG.
    pub fn ancestors_of(&self, id: usize) -> Vec<usize> {
        let mut seen = vec![false; self.concepts.len()];
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        (0..self.concepts.len()).filter(|&v| seen[v]).collect()
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = GraphFile {
            concepts: self.concepts.clone(),
            prerequisites: self
                .prereq_edges
                .iter()
                .map(|&(from, to)| PrereqEdge { from, to })
                .collect(),
            similarities: self
                .sim_edges
                .iter()
                .map(|&(a, b, weight)| SimEdge { a, b, weight })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Ingest(format!("graph JSON: {e}")))?;
        Ok(ConceptGraph::new(
            file.concepts,
            file.prerequisites.iter().map(|e| (e.from, e.to)).collect(),
            file.similarities
                .iter()
                .map(|e| (e.a, e.b, e.weight))
                .collect(),
        ))
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// Checks every structural invariant and reports each violation; cycle
/// violations list one representative cycle per strongly connected
/// component.
pub fn validate_graph(graph: &ConceptGraph) -> ValidationReport {
    let n = graph.concepts.len();
    let mut violations = Vec::new();

    for (i, c) in graph.concepts.iter().enumerate() {
        if c.id != i {
            violations.push(Violation::NonDenseIds {
                expected: i,
                found: c.id,
            });
        }
    }

    for &(from, to) in &graph.prereq_edges {
        for id in [from, to] {
            if id >= n {
                violations.push(Violation::UnknownEndpoint {
                    edge: format!("prerequisite ({from}, {to})"),
                    id,
                });
            }
        }
    }
    for &(a, b, w) in &graph.sim_edges {
        for id in [a, b] {
            if id >= n {
                violations.push(Violation::UnknownEndpoint {
                    edge: format!("similarity ({a}, {b})"),
                    id,
                });
            }
        }
        if a == b && a < n {
            violations.push(Violation::SelfPair(a));
        }
        if !(w > 0.0 && w <= 1.0) {
            violations.push(Violation::BadWeight { a, b, weight: w });
        }
    }

    // One representative cycle per non-trivial SCC (plus prerequisite
    // self-loops, which are 1-cycles).
    for &(from, to) in &graph.prereq_edges {
        if from == to && from < n {
            violations.push(Violation::Cycle(vec![from]));
        }
    }
    for scc in strongly_connected_components(n, &graph.prereq_edges) {
        if scc.len() > 1 {
            violations.push(Violation::Cycle(representative_cycle(&scc, graph)));
        }
    }

    ValidationReport { violations }
}

/// Tarjan's algorithm, iterative. Returns components sorted by their
/// smallest member so reports are deterministic.
pub(crate) fn strongly_connected_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(from, to) in edges {
        if from < n && to < n {
            adj[from].push(to);
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut components: Vec<Vec<usize>> = Vec::new();

    // Explicit DFS frames: (node, next child position).
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut frames: Vec<(usize, usize)> = vec![(start, 0)];
        while let Some(&mut (v, ref mut child_pos)) = frames.last_mut() {
            if *child_pos == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*child_pos) {
                *child_pos += 1;
                if index[w] == usize::MAX {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&(parent, _)) = frames.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut component = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Walks inside one SCC from its smallest member until a node repeats,
/// yielding a concrete cycle.
fn representative_cycle(scc: &[usize], graph: &ConceptGraph) -> Vec<usize> {
    let in_scc = |v: usize| scc.binary_search(&v).is_ok();
    let start = scc[0];
    let mut path = vec![start];
    let mut seen_at = vec![usize::MAX; graph.concepts.len()];
    seen_at[start] = 0;
    let mut current = start;
    loop {
        let next = *graph
            .children[current]
            .iter()
            .find(|&&w| in_scc(w))
            .expect("SCC member must have an in-component successor");
        if seen_at[next] != usize::MAX {
            return path.split_off(seen_at[next]);
        }
        seen_at[next] = path.len();
        path.push(next);
        current = next;
    }
}

/// Length of the longest chain of consecutively unmastered concepts on
/// any backward prerequisite path starting at `id` (counting `id` itself
/// when unmastered; 0 when mastered).
fn unmastered_chain_len(
    graph: &ConceptGraph,
    mastery: &MasteryVector,
    threshold: f64,
    id: usize,
    memo: &mut [Option<usize>],
) -> usize {
    if let Some(v) = memo[id] {
        return v;
    }
    let len = if mastery.get(id) >= threshold {
        0
    } else {
        1 + graph
            .prereqs_of(id)
            .iter()
            .map(|&p| unmastered_chain_len(graph, mastery, threshold, p, memo))
            .max()
            .unwrap_or(0)
    };
    memo[id] = Some(len);
    len
}

/// Identifies where learning should start for `goal`: if every direct
/// prerequisite of the goal is already mastered (mastery >= threshold)
/// the goal itself is returned; otherwise the ancestor heading the
/// longest chain of consecutively unmastered concepts is chosen, ties
/// broken by smallest concept id.
pub fn find_initial_node(
    graph: &ConceptGraph,
    goal: usize,
    mastery: &MasteryVector,
    threshold: f64,
) -> Result<usize> {
    graph.check_id(goal, "goal")?;
    if mastery.len() != graph.n_concepts() {
        return Err(Error::invalid_input(format!(
            "mastery length {} != concept count {}",
            mastery.len(),
            graph.n_concepts()
        )));
    }
    let all_mastered = graph
        .prereqs_of(goal)
        .iter()
        .all(|&p| mastery.get(p) >= threshold);
    if all_mastered {
        return Ok(goal);
    }
    let mut memo = vec![None; graph.n_concepts()];
    let mut best: Option<(usize, usize)> = None; // (chain_len, id)
    for a in graph.ancestors_of(goal) {
        let len = unmastered_chain_len(graph, mastery, threshold, a, &mut memo);
        match best {
            Some((best_len, _)) if best_len >= len => {}
            _ => best = Some((len, a)),
        }
    }
    // Ancestors are scanned in ascending id order, so `>=` above keeps
    // the smallest id among ties.
    Ok(best.expect("goal with unmastered prerequisites has ancestors").1)
}

#[derive(PartialEq)]
struct QueueEntry {
    f: usize,
    g: usize,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on f, then g, then node id.
        other
            .f
            .cmp(&self.f)
            .then(other.g.cmp(&self.g))
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Candidate action space for the prerequisite agent: every concept on
/// some directed prerequisite path from `initial` to `goal` whose length
/// is within `slack` of the shortest, found by best-first search with
/// the reverse-BFS distance-to-goal as an admissible heuristic. Returns
/// `{initial, goal}` when no path exists.
pub fn candidate_action_space(
    graph: &ConceptGraph,
    initial: usize,
    goal: usize,
    slack: usize,
) -> Result<Vec<usize>> {
    graph.check_id(initial, "initial")?;
    graph.check_id(goal, "goal")?;
    let n = graph.n_concepts();

    // h(v) = exact shortest distance v -> goal (BFS over reversed edges).
    let mut h = vec![usize::MAX; n];
    h[goal] = 0;
    let mut queue = VecDeque::from([goal]);
    while let Some(v) = queue.pop_front() {
        for &p in graph.prereqs_of(v) {
            if h[p] == usize::MAX {
                h[p] = h[v] + 1;
                queue.push_back(p);
            }
        }
    }

    if h[initial] == usize::MAX {
        let mut fallback = vec![initial, goal];
        fallback.sort_unstable();
        fallback.dedup();
        return Ok(fallback);
    }
    let shortest = h[initial];
    let budget = shortest + slack;

    // Best-first expansion from `initial`; with an exact heuristic the
    // settled g-values are shortest distances, so a node lies on some
    // admissible path iff g(v) + h(v) <= budget.
    let mut g = vec![usize::MAX; n];
    g[initial] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(QueueEntry {
        f: h[initial],
        g: 0,
        node: initial,
    });
    let mut members = Vec::new();
    while let Some(QueueEntry { f, g: gv, node }) = heap.pop() {
        if gv > g[node] || f > budget {
            continue;
        }
        if h[node] != usize::MAX && gv + h[node] <= budget {
            members.push(node);
        }
        for &child in graph.dependents_of(node) {
            let cand = gv + 1;
            if cand < g[child] && h[child] != usize::MAX && cand + h[child] <= budget {
                g[child] = cand;
                heap.push(QueueEntry {
                    f: cand + h[child],
                    g: cand,
                    node: child,
                });
            }
        }
    }
    members.sort_unstable();
    members.dedup();
    Ok(members)
}

/// Similarity neighbors of `kc`, sorted by weight descending with ties
/// broken by ascending id.
pub fn similar_neighbors(graph: &ConceptGraph, kc: usize) -> Result<Vec<(usize, f64)>> {
    graph.check_id(kc, "concept")?;
    let mut neighbors = graph.sim_adj[kc].clone();
    neighbors.sort_by(|x, y| {
        y.1.partial_cmp(&x.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.0.cmp(&y.0))
    });
    Ok(neighbors)
}
