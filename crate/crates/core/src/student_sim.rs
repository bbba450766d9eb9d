//! Simulated learning environment: hidden ground-truth mastery dynamics
//! with prerequisite gating and a confusion penalty between similar
//! concepts, an observable decayed-average mastery tracker, and the
//! normalized-improvement effectiveness metric.
//!
//! The confusion penalty is what makes discrimination practice pay off:
//! a concept's gain is cut while some similar concept is both unmastered
//! and not recently practiced. Practicing the confusable neighbors
//! inside the recency window lifts the penalty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kc_graph::{ConceptGraph, GoalSet, MasteryVector};

/// One answered exercise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub exercise_id: usize,
    pub concept_id: usize,
    /// 0 incorrect, 1 correct.
    pub score: u8,
    pub step: usize,
}

/// An exercise attached to exactly one knowledge concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exercise {
    pub id: usize,
    pub concept_id: usize,
    /// Difficulty in [0, 1].
    pub difficulty: f64,
}

/// All exercises, grouped by concept and sorted by exercise id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseBank {
    by_concept: Vec<Vec<Exercise>>,
}

impl ExerciseBank {
    pub fn new(n_concepts: usize, mut exercises: Vec<Exercise>) -> Result<Self> {
        exercises.sort_by_key(|e| e.id);
        let mut by_concept = vec![Vec::new(); n_concepts];
        for e in exercises {
            if e.concept_id >= n_concepts {
                return Err(Error::invalid_input(format!(
                    "exercise {} references unknown concept {}",
                    e.id, e.concept_id
                )));
            }
            if !(0.0..=1.0).contains(&e.difficulty) {
                return Err(Error::invalid_input(format!(
                    "exercise {} difficulty {} outside [0, 1]",
                    e.id, e.difficulty
                )));
            }
            by_concept[e.concept_id].push(e);
        }
        Ok(ExerciseBank { by_concept })
    }

    pub fn for_concept(&self, concept: usize) -> &[Exercise] {
        &self.by_concept[concept]
    }

    pub fn all(&self) -> impl Iterator<Item = &Exercise> {
        self.by_concept.iter().flatten()
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let all: Vec<&Exercise> = self.all().collect();
        std::fs::write(path, serde_json::to_string_pretty(&all)?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path, n_concepts: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let all: Vec<Exercise> =
            serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("exercises: {e}")))?;
        ExerciseBank::new(n_concepts, all)
    }
}

/// Environment parameters. Defaults give a learner that progresses
/// steadily when prerequisites are in place and stalls on confusable
/// material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub base_gain: f64,
    /// Gain multiplier while some direct prerequisite is unmastered.
    pub gate_factor: f64,
    /// Gain multiplier while some similar concept is unmastered and was
    /// not practiced within the discrimination window.
    pub confusion_factor: f64,
    pub discrimination_window: usize,
    pub slip: f64,
    pub guess: f64,
    pub mastery_threshold: f64,
    pub answer_sharpness: f64,
    /// Decay of the observable tracker's per-concept score average.
    pub tracker_decay: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            base_gain: 0.15,
            gate_factor: 0.3,
            confusion_factor: 0.2,
            discrimination_window: 3,
            slip: 0.1,
            guess: 0.2,
            mastery_threshold: 0.5,
            answer_sharpness: 5.0,
            tracker_decay: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("gate_factor", self.gate_factor, 0.0, 1.0),
            ("confusion_factor", self.confusion_factor, 0.0, 1.0),
            ("mastery_threshold", self.mastery_threshold, 0.0, 1.0),
            ("tracker_decay", self.tracker_decay, f64::MIN_POSITIVE, 1.0),
        ];
        for (name, v, lo, hi) in ranges {
            if !(lo..=hi).contains(&v) {
                return Err(Error::invalid_config(format!("{name} = {v} out of range")));
            }
        }
        for (name, v) in [("slip", self.slip), ("guess", self.guess)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid_config(format!("{name} = {v} outside [0, 1)")));
            }
        }
        if self.answer_sharpness <= 0.0 {
            return Err(Error::invalid_config("answer_sharpness must be positive"));
        }
        if self.base_gain < 0.0 {
            return Err(Error::invalid_config("base_gain must be non-negative"));
        }
        Ok(())
    }
}

/// One learner session. `true_mastery` is the environment's hidden
/// state; agents may only read `est_mastery` and `history`.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub true_mastery: MasteryVector,
    pub est_mastery: MasteryVector,
    pub history: Vec<HistoryRecord>,
    pub goals: GoalSet,
    pub step: usize,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

/// Seeds a session: ground-truth mastery is uniform on [0, 0.4] for the
/// goals and their prerequisite ancestors and uniform on [0, 0.7]
/// elsewhere; the observable estimate starts uninformative at 0.5.
pub fn init_session(
    graph: &ConceptGraph,
    goals: GoalSet,
    _config: &SimConfig,
    seed: u64,
) -> SessionState {
    let n = graph.n_concepts();
    let mut near_goal = vec![false; n];
    for &g in goals.ids() {
        near_goal[g] = true;
        for a in graph.ancestors_of(g) {
            near_goal[a] = true;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let width = if near_goal[k] { 0.4 } else { 0.7 };
        values.push(rng.gen::<f64>() * width);
    }
    SessionState {
        true_mastery: MasteryVector::new(values).expect("sampled mastery in range"),
        est_mastery: MasteryVector::uniform(n, 0.5),
        history: Vec::new(),
        goals,
        step: 0,
        rng_seed: seed,
        rng,
    }
}

/// Probability that the learner answers `exercise` correctly:
/// guess + (1 - slip - guess) * sigmoid(sharpness * (mastery - difficulty)).
pub fn success_probability(state: &SessionState, exercise: &Exercise, config: &SimConfig) -> f64 {
    let mastery = state.true_mastery.get(exercise.concept_id);
    let x = config.answer_sharpness * (mastery - exercise.difficulty);
    let sigmoid = 1.0 / (1.0 + (-x).exp());
    config.guess + (1.0 - config.slip - config.guess) * sigmoid
}

/// Draws an answer from the session's random stream and appends the
/// record at the current step index.
pub fn answer_exercise(state: &mut SessionState, exercise: &Exercise, config: &SimConfig) -> u8 {
    let p = success_probability(state, exercise, config);
    let score = u8::from(state.rng.gen::<f64>() < p);
    state.history.push(HistoryRecord {
        exercise_id: exercise.id,
        concept_id: exercise.concept_id,
        score,
        step: state.step,
    });
    score
}

fn practiced_recently(state: &SessionState, concept: usize, window: usize) -> bool {
    let cutoff = state.step.saturating_sub(window);
    state
        .history
        .iter()
        .rev()
        .take_while(|r| r.step >= cutoff)
        .any(|r| r.concept_id == concept && r.step < state.step)
}

/// Applies the ground-truth learning transition for one practice of
/// `exercise`'s concept. The gain shrinks toward zero as mastery
/// saturates, is gated while direct prerequisites are unmastered, and is
/// cut by the confusion factor while some similar concept is unmastered
/// and was not practiced within the discrimination window.
pub fn apply_learning(
    state: &mut SessionState,
    graph: &ConceptGraph,
    exercise: &Exercise,
    config: &SimConfig,
) {
    let kc = exercise.concept_id;
    let current = state.true_mastery.get(kc);
    let mut gain = config.base_gain * (1.0 - current);

    let gated = graph
        .prereqs_of(kc)
        .iter()
        .any(|&p| state.true_mastery.get(p) < config.mastery_threshold);
    if gated {
        gain *= config.gate_factor;
    }

    let confused = graph_sim_neighbors(graph, kc).any(|n| {
        state.true_mastery.get(n) < config.mastery_threshold
            && !practiced_recently(state, n, config.discrimination_window)
    });
    if confused {
        gain *= config.confusion_factor;
    }

    state.true_mastery.set_clamped(kc, current + gain);
}

fn graph_sim_neighbors(graph: &ConceptGraph, kc: usize) -> impl Iterator<Item = usize> + '_ {
    graph
        .sim_edges()
        .iter()
        .filter_map(move |&(a, b, _)| match (a == kc, b == kc) {
            (true, false) => Some(b),
            (false, true) => Some(a),
            _ => None,
        })
}

/// Answers, learns, and advances the step counter; returns the score.
pub fn practice(
    state: &mut SessionState,
    graph: &ConceptGraph,
    exercise: &Exercise,
    config: &SimConfig,
) -> u8 {
    let score = answer_exercise(state, exercise, config);
    apply_learning(state, graph, exercise, config);
    state.step += 1;
    score
}

/// Observable mastery estimate: per concept, the exponentially decayed
/// average of that concept's own attempt scores (latest attempt has age
/// zero). Concepts without attempts stay at the uninformative 0.5.
pub fn kt_estimate(history: &[HistoryRecord], graph: &ConceptGraph, decay: f64) -> MasteryVector {
    let n = graph.n_concepts();
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];
    // Iterate newest-first so the weight of each attempt is decay^age in
    // that concept's own sequence.
    let mut weight = vec![1.0f64; n];
    for record in history.iter().rev() {
        let k = record.concept_id;
        num[k] += weight[k] * f64::from(record.score);
        den[k] += weight[k];
        weight[k] *= decay;
    }
    let values = (0..n)
        .map(|k| if den[k] > 0.0 { num[k] / den[k] } else { 0.5 })
        .collect();
    MasteryVector::new(values).expect("weighted average of 0/1 scores stays in range")
}

/// Number of goals whose ground-truth mastery strictly exceeds the
/// threshold.
pub fn evaluate_goals(state: &SessionState, threshold: f64) -> usize {
    state
        .goals
        .ids()
        .iter()
        .filter(|&&g| state.true_mastery.get(g) > threshold)
        .count()
}

/// Effectiveness value plus a flag for the degenerate all-pre-mastered
/// session where no improvement was possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpOutcome {
    pub value: f64,
    pub degenerate: bool,
}

/// Normalized improvement (end - start) / (sup - start). When the
/// supremum equals the start no improvement is possible and the outcome
/// is the flagged sentinel 1.0.
pub fn compute_ep(e_start: f64, e_end: f64, e_sup: f64) -> Result<EpOutcome> {
    if e_sup < e_start {
        return Err(Error::invalid_input(format!(
            "e_sup {e_sup} < e_start {e_start}"
        )));
    }
    if e_sup == e_start {
        return Ok(EpOutcome {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(EpOutcome {
        value: (e_end - e_start) / (e_sup - e_start),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kc_graph::Concept;

    fn chain_graph(n: usize) -> ConceptGraph {
        let concepts = (0..n)
            .map(|id| Concept {
                id,
                name: format!("c{id}"),
                description: String::new(),
            })
            .collect();
        let edges = (1..n).map(|i| (i - 1, i)).collect();
        ConceptGraph::new(concepts, edges, Vec::new())
    }

    fn sim_pair_graph() -> ConceptGraph {
        let concepts = (0..2)
            .map(|id| Concept {
                id,
                name: format!("c{id}"),
                description: String::new(),
            })
            .collect();
        ConceptGraph::new(concepts, Vec::new(), vec![(0, 1, 0.8)])
    }

    fn exercise(id: usize, concept: usize, difficulty: f64) -> Exercise {
        Exercise {
            id,
            concept_id: concept,
            difficulty,
        }
    }

    #[test]
    fn init_session_is_deterministic() {
        let graph = chain_graph(5);
        let goals = GoalSet::new(vec![4], 5).unwrap();
        let config = SimConfig::default();
        let a = init_session(&graph, goals.clone(), &config, 99);
        let b = init_session(&graph, goals, &config, 99);
        assert_eq!(a.true_mastery, b.true_mastery);
        assert_eq!(a.est_mastery, b.est_mastery);
    }

    #[test]
    fn init_session_ranges_hold() {
        let graph = chain_graph(6);
        let config = SimConfig::default();
        // Goal 2: concepts 0..=2 are goal-ancestors, 3..=5 are not.
        for seed in 0..10_000u64 {
            let goals = GoalSet::new(vec![2], 6).unwrap();
            let s = init_session(&graph, goals, &config, seed);
            for k in 0..=2 {
                assert!(s.true_mastery.get(k) < 0.4);
            }
            for k in 3..=5 {
                assert!(s.true_mastery.get(k) < 0.7);
            }
        }
    }

    #[test]
    fn success_probability_matches_closed_form() {
        let graph = chain_graph(1);
        let config = SimConfig::default();
        let goals = GoalSet::new(vec![0], 1).unwrap();
        let mut s = init_session(&graph, goals, &config, 1);

        // mastery == difficulty: sigmoid(0) = 0.5.
        s.true_mastery.set_clamped(0, 0.3);
        let p = success_probability(&s, &exercise(0, 0, 0.3), &config);
        assert!((p - 0.55).abs() < 1e-12);

        // mastery 0.9, difficulty 0.3: 0.2 + 0.7 * sigmoid(3).
        s.true_mastery.set_clamped(0, 0.9);
        let p = success_probability(&s, &exercise(0, 0, 0.3), &config);
        let want = 0.2 + 0.7 / (1.0 + (-3.0f64).exp());
        assert!((p - want).abs() < 1e-12);
        assert!((p - 0.8668).abs() < 1e-4);

        // slip = guess = 0 and a huge mastery margin: probability -> 1.
        let extreme = SimConfig {
            slip: 0.0,
            guess: 0.0,
            answer_sharpness: 500.0,
            ..SimConfig::default()
        };
        s.true_mastery.set_clamped(0, 1.0);
        let p = success_probability(&s, &exercise(0, 0, 0.0), &extreme);
        assert!(p > 1.0 - 1e-12);
    }

    #[test]
    fn apply_learning_penalty_cases() {
        let config = SimConfig::default();

        // Isolated concept, mastery 0: full base gain.
        let graph = ConceptGraph::new(
            vec![Concept {
                id: 0,
                name: "solo".into(),
                description: String::new(),
            }],
            Vec::new(),
            Vec::new(),
        );
        let goals = GoalSet::new(vec![0], 1).unwrap();
        let mut s = init_session(&graph, goals, &config, 1);
        s.true_mastery.set_clamped(0, 0.0);
        apply_learning(&mut s, &graph, &exercise(0, 0, 0.5), &config);
        assert!((s.true_mastery.get(0) - 0.15).abs() < 1e-12);

        // Concept 1 with unmastered prerequisite 0 and unmastered,
        // never-practiced similar neighbor 2.
        let concepts = (0..3)
            .map(|id| Concept {
                id,
                name: format!("c{id}"),
                description: String::new(),
            })
            .collect();
        let graph = ConceptGraph::new(concepts, vec![(0, 1)], vec![(1, 2, 0.9)]);
        let goals = GoalSet::new(vec![1], 3).unwrap();
        let mut s = init_session(&graph, goals.clone(), &config, 1);
        for k in 0..3 {
            s.true_mastery.set_clamped(k, 0.0);
        }
        apply_learning(&mut s, &graph, &exercise(0, 1, 0.5), &config);
        let want = 0.15 * 0.3 * 0.2;
        assert!((s.true_mastery.get(1) - want).abs() < 1e-12);

        // Same setup but the neighbor was practiced one step ago: the
        // confusion penalty is lifted, the prerequisite gate remains.
        let mut s = init_session(&graph, goals, &config, 1);
        for k in 0..3 {
            s.true_mastery.set_clamped(k, 0.0);
        }
        s.history.push(HistoryRecord {
            exercise_id: 9,
            concept_id: 2,
            score: 0,
            step: 0,
        });
        s.step = 1;
        apply_learning(&mut s, &graph, &exercise(0, 1, 0.5), &config);
        let want = 0.15 * 0.3;
        assert!((s.true_mastery.get(1) - want).abs() < 1e-12);
    }

    #[test]
    fn true_mastery_is_monotone() {
        let graph = sim_pair_graph();
        let config = SimConfig::default();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        use rand::Rng as _;
        for seed in 0..10_000 {
            let goals = GoalSet::new(vec![0], 2).unwrap();
            let mut s = init_session(&graph, goals, &config, seed);
            let mut previous = s.true_mastery.clone();
            for step in 0..12 {
                let concept = rng.gen_range(0..2);
                let ex = exercise(step, concept, rng.gen::<f64>());
                practice(&mut s, &graph, &ex, &config);
                for k in 0..2 {
                    assert!(s.true_mastery.get(k) >= previous.get(k));
                }
                previous = s.true_mastery.clone();
            }
        }
    }

    #[test]
    fn kt_estimate_examples() {
        let graph = chain_graph(2);
        assert_eq!(kt_estimate(&[], &graph, 0.5).get(0), 0.5);

        let one = vec![HistoryRecord {
            exercise_id: 0,
            concept_id: 0,
            score: 1,
            step: 0,
        }];
        assert!((kt_estimate(&one, &graph, 0.5).get(0) - 1.0).abs() < 1e-12);

        // Scores [1, 0, 1] oldest-first with decay 0.5:
        // (0.25*1 + 0.5*0 + 1*1) / 1.75.
        let three: Vec<HistoryRecord> = [1u8, 0, 1]
            .iter()
            .enumerate()
            .map(|(step, &score)| HistoryRecord {
                exercise_id: step,
                concept_id: 0,
                score,
                step,
            })
            .collect();
        let want = 1.25 / 1.75;
        assert!((kt_estimate(&three, &graph, 0.5).get(0) - want).abs() < 1e-12);
        // Other concept untouched.
        assert_eq!(kt_estimate(&three, &graph, 0.5).get(1), 0.5);
    }

    #[test]
    fn kt_estimate_is_pure_function_of_history() {
        let graph = sim_pair_graph();
        let config = SimConfig::default();
        let goals = GoalSet::new(vec![0], 2).unwrap();
        let mut s = init_session(&graph, goals, &config, 5);
        for step in 0..10 {
            let ex = exercise(step, step % 2, 0.4);
            practice(&mut s, &graph, &ex, &config);
        }
        let a = kt_estimate(&s.history, &graph, config.tracker_decay);
        let replayed = s.history.clone();
        let b = kt_estimate(&replayed, &graph, config.tracker_decay);
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_goals_boundary_is_strict() {
        let graph = chain_graph(3);
        let config = SimConfig::default();
        let goals = GoalSet::new(vec![0, 1, 2], 3).unwrap();
        let mut s = init_session(&graph, goals, &config, 1);
        s.true_mastery.set_clamped(0, 0.9);
        s.true_mastery.set_clamped(1, 0.5); // exactly at threshold: not counted
        s.true_mastery.set_clamped(2, 0.1);
        assert_eq!(evaluate_goals(&s, 0.5), 1);
    }

    #[test]
    fn compute_ep_cases() {
        assert_eq!(compute_ep(1.0, 3.0, 5.0).unwrap().value, 0.5);
        assert_eq!(compute_ep(1.0, 1.0, 5.0).unwrap().value, 0.0);
        assert_eq!(compute_ep(1.0, 5.0, 5.0).unwrap().value, 1.0);
        let degenerate = compute_ep(2.0, 2.0, 2.0).unwrap();
        assert!(degenerate.degenerate);
        assert_eq!(degenerate.value, 1.0);
        assert!(compute_ep(3.0, 1.0, 2.0).is_err());
    }

    /// Discrimination effect: practicing the confusable neighbor twice
    /// before the target beats drilling the target three times, and the
    /// advantage disappears when confusion is off.
    #[test]
    fn discrimination_schedule_beats_drilling() {
        let graph = sim_pair_graph();
        let run = |config: &SimConfig, schedule: &[usize], seed: u64| -> f64 {
            let goals = GoalSet::new(vec![0, 1], 2).unwrap();
            let mut s = init_session(&graph, goals, config, seed);
            for (i, &concept) in schedule.iter().enumerate() {
                let ex = exercise(i, concept, 0.3);
                practice(&mut s, &graph, &ex, config);
            }
            s.true_mastery.get(0)
        };

        let confused = SimConfig::default();
        let lifted = SimConfig {
            confusion_factor: 1.0,
            ..SimConfig::default()
        };
        let sessions = 500u64;
        let mean = |config: &SimConfig, schedule: &[usize]| -> f64 {
            (0..sessions).map(|s| run(config, schedule, s)).sum::<f64>() / sessions as f64
        };

        let discr = mean(&confused, &[1, 1, 0]);
        let drill = mean(&confused, &[0, 0, 0]);
        assert!(
            discr > drill,
            "discrimination {discr} should beat drilling {drill}"
        );

        let discr_off = mean(&lifted, &[1, 1, 0]);
        let drill_off = mean(&lifted, &[0, 0, 0]);
        assert!(
            discr_off <= drill_off,
            "advantage should vanish without confusion"
        );
    }
}
