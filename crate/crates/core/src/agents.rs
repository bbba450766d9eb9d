//! Episode orchestration: the prerequisite agent picks concepts from
//! the candidate action space, the similarity agent inserts
//! discrimination sub-paths when tracked progress stalls, the
//! difficulty agent matches exercises to the tracked mastery level, and
//! the terminal reward is the session's effectiveness. Also the
//! clipped-surrogate training loop over collected episodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kc_graph::{
    candidate_action_space, find_initial_node, similar_neighbors, ConceptGraph, GoalSet,
    MasteryVector,
};
use crate::policy_core::{
    advantages, forward_policy, forward_value, optimizer_step, policy_entropy, ppo_clip_loss,
    value_loss, ApproximatorParams, LayerLayout, OptimizerState, Trajectory, TrajectoryStep,
};
use crate::seeding::{derive_seed, salt};
use crate::student_sim::{
    compute_ep, evaluate_goals, init_session, kt_estimate, practice, Exercise, ExerciseBank,
    SessionState, SimConfig,
};

/// Agent-side hyperparameters; training knobs included so a single
/// config block drives the whole recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Stall threshold for the similarity agent's trigger.
    pub tau: f64,
    pub epsilon_clip: f64,
    pub gamma: f64,
    /// Exercise budget per episode.
    pub max_steps: usize,
    /// Maximum confusable neighbors per discrimination sub-path.
    pub subpath_cap: usize,
    /// Extra path length admitted into the candidate action space.
    pub slack: usize,
    pub goals_per_episode: usize,
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_episodes: usize,
    pub ppo_epochs: usize,
    /// When set, each epoch applies one update per chunk of this many
    /// episodes instead of a single full-batch update.
    pub minibatch_episodes: Option<usize>,
    pub entropy_coef: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            tau: 0.001,
            epsilon_clip: 0.2,
            gamma: 0.99,
            max_steps: 10,
            subpath_cap: 2,
            slack: 0,
            goals_per_episode: 1,
            hidden_sizes: vec![64],
            learning_rate: 0.001,
            batch_episodes: 16,
            ppo_epochs: 1,
            minibatch_episodes: None,
            entropy_coef: 0.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 0.0 {
            return Err(Error::invalid_config("tau must be non-negative"));
        }
        if self.epsilon_clip <= 0.0 {
            return Err(Error::invalid_config("epsilon_clip must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid_config("gamma must lie in (0, 1]"));
        }
        if self.max_steps < 1 || self.subpath_cap < 1 {
            return Err(Error::invalid_config(
                "max_steps and subpath_cap must be at least 1",
            ));
        }
        if self.goals_per_episode < 1 {
            return Err(Error::invalid_config("goals_per_episode must be at least 1"));
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return Err(Error::invalid_config("hidden layer sizes must be positive"));
        }
        if self.batch_episodes < 1 || self.ppo_epochs < 1 {
            return Err(Error::invalid_config(
                "batch_episodes and ppo_epochs must be at least 1",
            ));
        }
        if self.minibatch_episodes == Some(0) {
            return Err(Error::invalid_config("minibatch_episodes must be positive"));
        }
        Ok(())
    }

    pub fn policy_layout(&self, n_concepts: usize) -> Result<LayerLayout> {
        let mut sizes = vec![2 * n_concepts];
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(n_concepts);
        LayerLayout::new(sizes)
    }

    pub fn value_layout(&self, n_concepts: usize) -> Result<LayerLayout> {
        let mut sizes = vec![2 * n_concepts];
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(1);
        LayerLayout::new(sizes)
    }
}

/// Which agent put a step on the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepSource {
    P,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub exercise_id: usize,
    pub concept_id: usize,
    pub source: StepSource,
}

/// Everything one episode produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub path: Vec<PathStep>,
    pub trajectory: Trajectory,
    pub e_p: f64,
    pub e_p_degenerate: bool,
    pub e_start: f64,
    pub e_end: f64,
    pub e_sup: f64,
    pub s_agent_activations: usize,
}

/// How the prerequisite slot is filled for an episode.
#[derive(Debug, Clone, Copy)]
pub enum ConceptSelector<'a> {
    /// Policy network; `greedy` switches sampling to argmax for
    /// evaluation (ties to the lowest concept id).
    Network {
        params: &'a ApproximatorParams,
        greedy: bool,
    },
    /// Uniform over the candidate action space.
    Random,
    /// Walks the candidate set in topological order toward the goal.
    PrereqGreedy,
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeOptions<'a> {
    pub selector: ConceptSelector<'a>,
    /// Value network used to record value estimates on the trajectory.
    pub value_params: Option<&'a ApproximatorParams>,
    pub s_agent_enabled: bool,
}

/// State encoder: tracked mastery concatenated with the goal one-hot.
pub fn encode_state(est_mastery: &MasteryVector, goals: &GoalSet) -> Result<Vec<f64>> {
    if est_mastery.len() != goals.one_hot().len() {
        return Err(Error::invalid_input(format!(
            "mastery length {} != goal one-hot length {}",
            est_mastery.len(),
            goals.one_hot().len()
        )));
    }
    let mut state = Vec::with_capacity(2 * est_mastery.len());
    state.extend_from_slice(est_mastery.as_slice());
    state.extend_from_slice(goals.one_hot());
    Ok(state)
}

/// Samples (or greedily picks) a concept from the candidate set under
/// the policy, returning the taken concept and its log-probability.
pub fn p_agent_select(
    state: &[f64],
    candidates: &[usize],
    policy_params: &ApproximatorParams,
    rng: &mut ChaCha8Rng,
    greedy: bool,
) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::invalid_input("candidate set is empty"));
    }
    let n = policy_params.layout.output_dim();
    let mut mask = vec![false; n];
    for &c in candidates {
        if c >= n {
            return Err(Error::invalid_input(format!(
                "candidate {c} outside policy output dimension {n}"
            )));
        }
        mask[c] = true;
    }
    let probs = forward_policy(policy_params, state, &mask)?;
    let chosen = if greedy {
        let mut best = candidates[0];
        for &c in candidates {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        best
    } else {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = *candidates.last().unwrap();
        for &c in candidates {
            acc += probs[c];
            if u < acc {
                chosen = c;
                break;
            }
        }
        chosen
    };
    Ok((chosen, probs[chosen].ln()))
}

/// Trigger for the similarity agent: fires when the tracked mastery of
/// the most recently practiced concept improved by less than `tau`
/// across its practice event.
pub fn s_agent_trigger(
    est_prev2: &MasteryVector,
    est_prev1: &MasteryVector,
    c_t: usize,
    tau: f64,
) -> bool {
    let p_t = est_prev1.get(c_t) - est_prev2.get(c_t);
    p_t < tau
}

/// Discrimination sub-path for `c_t`: its not-yet-mastered similarity
/// neighbors (tracked estimate at or below the threshold), strongest
/// similarity first with ties by ascending id, truncated to `cap`, and
/// closed by re-practicing `c_t` itself.
pub fn s_agent_subpath(
    graph: &ConceptGraph,
    c_t: usize,
    est_mastery: &MasteryVector,
    cap: usize,
    threshold: f64,
) -> Result<Vec<usize>> {
    let mut subpath: Vec<usize> = similar_neighbors(graph, c_t)?
        .into_iter()
        .filter(|&(n, _)| est_mastery.get(n) <= threshold)
        .take(cap)
        .map(|(n, _)| n)
        .collect();
    subpath.push(c_t);
    Ok(subpath)
}

/// Difficulty agent: the exercise whose difficulty is closest to the
/// learner's tracked mastery of the concept, ties to the lowest
/// exercise id.
pub fn d_agent_select<'a>(
    concept: usize,
    exercises_for_kc: &'a [Exercise],
    h_kc: f64,
) -> Result<&'a Exercise> {
    exercises_for_kc
        .iter()
        .min_by(|a, b| {
            let da = (a.difficulty - h_kc).abs();
            let db = (b.difficulty - h_kc).abs();
            da.partial_cmp(&db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.id.cmp(&b.id))
        })
        .ok_or(Error::NoExercise { concept })
}

fn topo_walk_order(graph: &ConceptGraph, candidates: &[usize]) -> Vec<usize> {
    // Kahn's algorithm on the candidate-induced subgraph, smallest id
    // first among ready nodes.
    let in_set = |v: usize| candidates.binary_search(&v).is_ok();
    let mut indegree: std::collections::BTreeMap<usize, usize> =
        candidates.iter().map(|&c| (c, 0)).collect();
    for &c in candidates {
        for &child in graph.dependents_of(c) {
            if in_set(child) {
                *indegree.get_mut(&child).unwrap() += 1;
            }
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&c, _)| c)
        .collect();
    let mut order = Vec::with_capacity(candidates.len());
    while let Some(&next) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &child in graph.dependents_of(next) {
            if in_set(child) {
                let d = indegree.get_mut(&child).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(child);
                }
            }
        }
    }
    order
}

/// Candidate action space for a session: per goal, the initial node is
/// identified from the environment's placement of the learner and the
/// near-shortest prerequisite paths toward that goal are admitted; the
/// union over goals is the action space.
pub fn session_candidates(
    graph: &ConceptGraph,
    session: &SessionState,
    config: &AgentConfig,
    sim_config: &SimConfig,
) -> Result<Vec<usize>> {
    let mut candidates = std::collections::BTreeSet::new();
    for &goal in session.goals.ids() {
        let initial = find_initial_node(
            graph,
            goal,
            &session.true_mastery,
            sim_config.mastery_threshold,
        )?;
        candidates.extend(candidate_action_space(graph, initial, goal, config.slack)?);
    }
    Ok(candidates.into_iter().collect())
}

/// Runs one episode against the environment session. The path may mix
/// prerequisite-agent and similarity-agent steps but never exceeds the
/// exercise budget; the trajectory records prerequisite-agent decisions
/// only, with the effectiveness as the sole (terminal) reward.
pub fn run_episode(
    session: &mut SessionState,
    graph: &ConceptGraph,
    bank: &ExerciseBank,
    options: &EpisodeOptions,
    config: &AgentConfig,
    sim_config: &SimConfig,
    action_rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult> {
    config.validate()?;
    let n = graph.n_concepts();
    if let ConceptSelector::Network { params, .. } = options.selector {
        if params.layout.input_dim() != 2 * n || params.layout.output_dim() != n {
            return Err(Error::invalid_input(format!(
                "policy layout {:?} does not fit {n} concepts",
                params.layout.sizes()
            )));
        }
    }

    let threshold = sim_config.mastery_threshold;
    let e_start = evaluate_goals(session, threshold) as f64;
    let e_sup = session.goals.len() as f64;

    let candidates = session_candidates(graph, session, config, sim_config)?;
    let topo_order = topo_walk_order(graph, &candidates);
    let mut walk_pos = 0usize;

    let mut path = Vec::new();
    let mut trajectory = Trajectory::default();
    let mut s_agent_activations = 0usize;

    let practice_concept = |session: &mut SessionState,
                                concept: usize,
                                source: StepSource,
                                path: &mut Vec<PathStep>|
     -> Result<()> {
        let est = session.est_mastery.get(concept);
        let exercise = d_agent_select(concept, bank.for_concept(concept), est)?.clone();
        practice(session, graph, &exercise, sim_config);
        session.est_mastery = kt_estimate(&session.history, graph, sim_config.tracker_decay);
        path.push(PathStep {
            exercise_id: exercise.id,
            concept_id: concept,
            source,
        });
        Ok(())
    };

    while session.step < config.max_steps {
        let state = encode_state(&session.est_mastery, &session.goals)?;
        let (concept, logprob) = match options.selector {
            ConceptSelector::Network { params, greedy } => {
                p_agent_select(&state, &candidates, params, action_rng, greedy)?
            }
            ConceptSelector::Random => {
                if candidates.is_empty() {
                    return Err(Error::invalid_input("candidate set is empty"));
                }
                let i = action_rng.gen_range(0..candidates.len());
                (candidates[i], -(candidates.len() as f64).ln())
            }
            ConceptSelector::PrereqGreedy => {
                let i = walk_pos.min(topo_order.len().saturating_sub(1));
                walk_pos += 1;
                (topo_order[i], 0.0)
            }
        };
        debug_assert!(candidates.contains(&concept));

        let value_estimate = match options.value_params {
            Some(params) => forward_value(params, &state)?,
            None => 0.0,
        };
        let est_before = session.est_mastery.clone();
        practice_concept(session, concept, StepSource::P, &mut path)?;

        let mut action_mask = vec![false; n];
        for &c in &candidates {
            action_mask[c] = true;
        }
        trajectory.steps.push(TrajectoryStep {
            state,
            action: concept,
            behavior_logprob: logprob,
            reward: 0.0,
            value_estimate,
            action_mask,
        });

        // The trigger never fires on the episode's first practice: no
        // two prior estimates exist yet.
        let first_practice = trajectory.steps.len() == 1;
        let triggered = !first_practice
            && s_agent_trigger(&est_before, &session.est_mastery, concept, config.tau);
        if triggered && options.s_agent_enabled && session.step < config.max_steps {
            s_agent_activations += 1;
            let subpath = s_agent_subpath(
                graph,
                concept,
                &session.est_mastery,
                config.subpath_cap,
                threshold,
            )?;
            for s_concept in subpath {
                if session.step >= config.max_steps {
                    break; // budget exhaustion truncates the sub-path
                }
                practice_concept(session, s_concept, StepSource::S, &mut path)?;
            }
        }
    }

    let e_end = evaluate_goals(session, threshold) as f64;
    let ep = compute_ep(e_start, e_end, e_sup)?;
    if let Some(last) = trajectory.steps.last_mut() {
        last.reward = ep.value;
    }
    trajectory.terminal_state = encode_state(&session.est_mastery, &session.goals)?;
    trajectory.terminated = true;

    Ok(EpisodeResult {
        path,
        trajectory,
        e_p: ep.value,
        e_p_degenerate: ep.degenerate,
        e_start,
        e_end,
        e_sup,
        s_agent_activations,
    })
}

/// Samples an episode's goal set: concepts that have at least one
/// prerequisite are preferred so that paths exist to walk.
pub fn sample_goals(graph: &ConceptGraph, count: usize, rng: &mut ChaCha8Rng) -> Result<GoalSet> {
    let n = graph.n_concepts();
    let eligible: Vec<usize> = (0..n).filter(|&c| !graph.prereqs_of(c).is_empty()).collect();
    let pool = if eligible.is_empty() {
        (0..n).collect::<Vec<usize>>()
    } else {
        eligible
    };
    let mut ids = Vec::new();
    let want = count.min(pool.len());
    while ids.len() < want {
        let pick = pool[rng.gen_range(0..pool.len())];
        if !ids.contains(&pick) {
            ids.push(pick);
        }
    }
    GoalSet::new(ids, n)
}

/// Per-batch training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStat {
    pub batch: usize,
    pub mean_ep: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// Trained parameters plus the learning curve.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub policy: ApproximatorParams,
    pub value: ApproximatorParams,
    pub policy_opt: OptimizerState,
    pub value_opt: OptimizerState,
    pub curve: Vec<BatchStat>,
}

/// Collects one episode with fresh goals and session derived from the
/// episode seed.
fn rollout(
    graph: &ConceptGraph,
    bank: &ExerciseBank,
    options: &EpisodeOptions,
    config: &AgentConfig,
    sim_config: &SimConfig,
    episode_seed: u64,
) -> Result<EpisodeResult> {
    let mut goal_rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, salt("goals")));
    let goals = sample_goals(graph, config.goals_per_episode, &mut goal_rng)?;
    let mut session = init_session(
        graph,
        goals,
        sim_config,
        derive_seed(episode_seed, salt("session")),
    );
    let mut action_rng = ChaCha8Rng::seed_from_u64(derive_seed(episode_seed, salt("action")));
    run_episode(
        &mut session,
        graph,
        bank,
        options,
        config,
        sim_config,
        &mut action_rng,
    )
}

/// Clipped-surrogate training: batches of episodes are collected with
/// the current parameters as the behavior policy, advantages are
/// computed against the value network, and both networks take
/// full-batch gradient steps. Emits the mean effectiveness per batch.
pub fn train(
    graph: &ConceptGraph,
    bank: &ExerciseBank,
    sim_config: &SimConfig,
    config: &AgentConfig,
    episodes: usize,
    seed: u64,
    s_agent_enabled: bool,
) -> Result<TrainOutput> {
    config.validate()?;
    sim_config.validate()?;
    if episodes < 1 {
        return Err(Error::invalid_config("episodes must be at least 1"));
    }
    let n = graph.n_concepts();
    let mut policy = ApproximatorParams::xavier(
        config.policy_layout(n)?,
        derive_seed(seed, salt("policy-init")),
    );
    let mut value = ApproximatorParams::xavier(
        config.value_layout(n)?,
        derive_seed(seed, salt("value-init")),
    );
    let mut policy_opt = OptimizerState::new(policy.values.len(), config.learning_rate);
    let mut value_opt = OptimizerState::new(value.values.len(), config.learning_rate);
    let mut curve = Vec::new();

    let mut next_episode = 0usize;
    let mut batch_index = 0usize;
    while next_episode < episodes {
        let batch_size = config.batch_episodes.min(episodes - next_episode);
        let policy_old = policy.clone();
        let results: Vec<EpisodeResult> = (0..batch_size)
            .into_par_iter()
            .map(|i| {
                let episode_seed = derive_seed(seed, (next_episode + i) as u64);
                rollout(
                    graph,
                    bank,
                    &EpisodeOptions {
                        selector: ConceptSelector::Network {
                            params: &policy_old,
                            greedy: false,
                        },
                        value_params: Some(&value),
                        s_agent_enabled,
                    },
                    config,
                    sim_config,
                    episode_seed,
                )
            })
            .collect::<Result<_>>()?;
        next_episode += batch_size;

        let trajectories: Vec<&Trajectory> = results
            .iter()
            .map(|r| &r.trajectory)
            .filter(|t| !t.steps.is_empty())
            .collect();
        let mean_ep = results.iter().map(|r| r.e_p).sum::<f64>() / results.len() as f64;
        if trajectories.is_empty() {
            curve.push(BatchStat {
                batch: batch_index,
                mean_ep,
                policy_loss: 0.0,
                value_loss: 0.0,
            });
            batch_index += 1;
            continue;
        }

        let batch_adv: Vec<Vec<f64>> = trajectories
            .iter()
            .map(|t| advantages(t, &value, config.gamma))
            .collect::<Result<_>>()?;

        let minibatch = config
            .minibatch_episodes
            .unwrap_or(trajectories.len())
            .max(1);
        let mut last_policy_loss = 0.0;
        let mut last_value_loss = 0.0;
        for _ in 0..config.ppo_epochs {
            let mut epoch_policy_loss = 0.0;
            let mut epoch_value_loss = 0.0;
            let mut updates = 0usize;
            for (traj_chunk, adv_chunk) in
                trajectories.chunks(minibatch).zip(batch_adv.chunks(minibatch))
            {
                let scale = 1.0 / traj_chunk.len() as f64;
                let mut policy_grad = vec![0.0; policy.values.len()];
                let mut policy_loss_total = 0.0;
                for (traj, adv) in traj_chunk.iter().zip(adv_chunk.iter()) {
                    let (loss, grad) =
                        ppo_clip_loss(traj, &policy, &policy_old, config.epsilon_clip, adv)?;
                    policy_loss_total += scale * loss;
                    for (acc, g) in policy_grad.iter_mut().zip(grad.iter()) {
                        *acc += scale * g;
                    }
                    if config.entropy_coef > 0.0 {
                        let (entropy, entropy_grad) = policy_entropy(traj, &policy)?;
                        policy_loss_total -= scale * config.entropy_coef * entropy;
                        for (acc, g) in policy_grad.iter_mut().zip(entropy_grad.iter()) {
                            *acc -= scale * config.entropy_coef * g;
                        }
                    }
                }

                let mut value_grad = vec![0.0; value.values.len()];
                let mut value_loss_total = 0.0;
                for traj in traj_chunk {
                    let (loss, grad) = value_loss(traj, &value, config.gamma)?;
                    value_loss_total += scale * loss;
                    for (acc, g) in value_grad.iter_mut().zip(grad.iter()) {
                        *acc += scale * g;
                    }
                }

                if !policy_loss_total.is_finite() || !value_loss_total.is_finite() {
                    return Err(Error::NumericalDegeneracy(format!(
                        "non-finite loss at batch {batch_index}: policy {policy_loss_total}, \
                         value {value_loss_total}, |policy| = {:.3e}",
                        policy.values.iter().map(|v| v * v).sum::<f64>().sqrt()
                    )));
                }
                optimizer_step(&mut policy, &policy_grad, &mut policy_opt)?;
                optimizer_step(&mut value, &value_grad, &mut value_opt)?;
                epoch_policy_loss += policy_loss_total;
                epoch_value_loss += value_loss_total;
                updates += 1;
            }
            last_policy_loss = epoch_policy_loss / updates as f64;
            last_value_loss = epoch_value_loss / updates as f64;
        }

        curve.push(BatchStat {
            batch: batch_index,
            mean_ep,
            policy_loss: last_policy_loss,
            value_loss: last_value_loss,
        });
        batch_index += 1;
    }

    Ok(TrainOutput {
        policy,
        value,
        policy_opt,
        value_opt,
        curve,
    })
}

/// Evaluates a selector over seeded episodes; episode seeds depend only
/// on `seed` and the index, so different selectors see identical
/// learners at identical indices (paired evaluation).
pub fn evaluate(
    graph: &ConceptGraph,
    bank: &ExerciseBank,
    options: &EpisodeOptions,
    config: &AgentConfig,
    sim_config: &SimConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>> {
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let episode_seed = derive_seed(seed, i as u64);
            rollout(graph, bank, options, config, sim_config, episode_seed)
        })
        .collect()
}
