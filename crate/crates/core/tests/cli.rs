//! End-to-end CLI checks: file outputs, exit codes, command wiring.

use std::path::Path;
use std::process::Command;

use pathrec::graph_gen::PlantedOntology;
use pathrec::harness::{ExperimentConfig, GraphSource, SyntheticGraphSpec, METHOD_RANDOM};
use pathrec::kc_graph::{validate_graph, ConceptGraph};

fn pathrec(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pathrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let config = ExperimentConfig {
        seeds: vec![3],
        graph: GraphSource::Synthetic {
            spec: SyntheticGraphSpec {
                concepts: 10,
                layers: 2,
                edges_per_node: 1,
                sim_clusters: 3,
                sim_edge_prob: 0.5,
                exercises_per_kc: 2,
                difficulty_spread: 0.6,
            },
        },
        steps: vec![5],
        eval_episodes: 6,
        train_episodes: 16,
        permutation_resamples: 100,
        methods: vec![METHOD_RANDOM.to_string()],
        reference: METHOD_RANDOM.to_string(),
        output_dir: dir.join("out"),
        agent: pathrec::agents::AgentConfig {
            batch_episodes: 8,
            hidden_sizes: vec![8],
            max_steps: 5,
            ..Default::default()
        },
        ..ExperimentConfig::default()
    };
    let path = dir.join("config.json");
    config.save_json(&path).unwrap();
    path
}

#[test]
fn gen_graph_from_ontology_writes_valid_graph() {
    let dir = tempfile::tempdir().unwrap();
    let ontology = PlantedOntology::synthetic(8, 6, 3, 2);
    let ontology_path = dir.path().join("ontology.json");
    ontology.save_json(&ontology_path).unwrap();

    let out = pathrec(&[
        "gen-graph",
        "--ontology",
        ontology_path.to_str().unwrap(),
        "--backend",
        "stub",
        "--chunk-size",
        "300",
        "--overlap",
        "90",
        "--out",
        dir.path().join("gen").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let graph = ConceptGraph::load_json(&dir.path().join("gen/graph.json")).unwrap();
    assert_eq!(graph.n_concepts(), 8);
    assert!(validate_graph(&graph).is_empty());
    assert!(dir.path().join("gen/explanations.json").exists());
    assert!(dir.path().join("gen/summaries.json").exists());
}

#[test]
fn gen_graph_from_spec_writes_graph_and_exercises() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        serde_json::to_string(&SyntheticGraphSpec {
            concepts: 9,
            layers: 3,
            ..SyntheticGraphSpec::default()
        })
        .unwrap(),
    )
    .unwrap();
    let out = pathrec(&[
        "gen-graph",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        dir.path().join("gen").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(dir.path().join("gen/graph.json").exists());
    assert!(dir.path().join("gen/exercises.json").exists());
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let ckpt_dir = dir.path().join("ckpt");

    let out = pathrec(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out",
        ckpt_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt_dir.join("policy_checkpoint.json").exists());
    assert!(ckpt_dir.join("value_checkpoint.json").exists());
    assert!(ckpt_dir.join("curve.csv").exists());

    let out = pathrec(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--checkpoint",
        ckpt_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean_ep"), "unexpected output: {stdout}");
}

#[test]
fn simulate_emits_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config(dir.path());
    let out = pathrec(&["simulate", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/report.json").exists());
    assert!(dir.path().join("out/report.csv").exists());
}

#[test]
fn explain_echoes_each_concept() {
    let dir = tempfile::tempdir().unwrap();
    let ontology = PlantedOntology::synthetic(6, 5, 2, 9);
    let ontology_path = dir.path().join("ontology.json");
    ontology.save_json(&ontology_path).unwrap();
    let gen_dir = dir.path().join("gen");
    assert!(pathrec(&[
        "gen-graph",
        "--ontology",
        ontology_path.to_str().unwrap(),
        "--out",
        gen_dir.to_str().unwrap(),
    ])
    .status
    .success());

    let path_file = dir.path().join("path.json");
    std::fs::write(&path_file, "[[0, 0], [1, 1]]").unwrap();
    let out = pathrec(&[
        "explain",
        "--path-file",
        path_file.to_str().unwrap(),
        "--graph",
        gen_dir.join("graph.json").to_str().unwrap(),
        "--ontology",
        ontology_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("topic_00"));
    assert!(stdout.contains("topic_01"));
}

#[test]
fn ingest_reports_summary_stats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("records.csv");
    std::fs::write(
        &csv,
        "learner_id,timestamp,exercise_id,kc_id,score\na,1,0,0,1\na,2,1,1,0\nb,1,0,0,1\n",
    )
    .unwrap();
    let out = pathrec(&["ingest", "--records", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("\"learners\": 2"));
    assert!(stdout.contains("\"records\": 3"));
}

#[test]
fn exit_codes_reflect_error_classes() {
    // Usage error: unknown flag.
    let out = pathrec(&["simulate", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));

    // Usage error: gen-graph without any source.
    let out = pathrec(&["gen-graph"]);
    assert_eq!(out.status.code(), Some(1));

    // Data error: missing config file.
    let out = pathrec(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Success: help.
    let out = pathrec(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}
