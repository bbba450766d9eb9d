//! Command-line interface. Exit codes: 0 success, 1 usage error,
//! 2 data error, 3 runtime error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::agents::{evaluate, train, ConceptSelector, EpisodeOptions};
use crate::error::{Error, Result};
use crate::graph_gen::{
    explain_path, run_pipeline, summarize_communities, HttpBackend, HttpBackendConfig,
    PipelineConfig, PlantedOntology, StubBackend, TextModelBackend,
};
use crate::harness::{
    build_environment, emit_report, load_records, run_ablation, run_experiment, stats,
    ExperimentConfig, Report, SyntheticGraphSpec,
};
use crate::kc_graph::ConceptGraph;
use crate::policy_core::Checkpoint;
use crate::seeding::{derive_seed, salt};

#[derive(Parser)]
#[command(
    name = "pathrec",
    version,
    about = "Learning path recommendation over prerequisite and similarity concept graphs"
)]
pub struct Cli {
    /// Override the first configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for episode evaluation (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Logging level: off, error, warn, info, debug, trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Stub,
    Http,
}

#[derive(Args)]
struct GenGraphArgs {
    /// Text file with one concept name per line (live backend runs).
    #[arg(long, conflicts_with_all = ["ontology", "spec"])]
    names: Option<PathBuf>,
    /// Planted ontology JSON driving the stub backend.
    #[arg(long, conflicts_with = "spec")]
    ontology: Option<PathBuf>,
    /// Synthetic graph spec JSON (no backend involved).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BackendKind::Stub)]
    backend: BackendKind,
    /// HTTP backend settings JSON (base_url, model, api_key_env, ...).
    #[arg(long)]
    http_config: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    chunk_size: usize,
    #[arg(long, default_value_t = 120)]
    overlap: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory holding policy_checkpoint.json / value_checkpoint.json.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExplainArgs {
    /// JSON file: array of [exercise_id, concept_id] pairs.
    #[arg(long)]
    path_file: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = BackendKind::Stub)]
    backend: BackendKind,
    /// Ontology for the stub backend (defaults to the graph's names).
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    http_config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// Learning-records CSV (learner_id,timestamp,exercise_id,kc_id,score).
    #[arg(long)]
    records: PathBuf,
    /// Concept graph JSON; when given, the mastery tracker is fitted to
    /// each learner's history.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Tracker decay used when fitting.
    #[arg(long, default_value_t = 0.5)]
    decay: f64,
    /// Where to write per-learner tracker estimates (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a concept graph from names, an ontology, or a synthetic spec.
    GenGraph(GenGraphArgs),
    /// Train the recommender and write checkpoints plus the learning curve.
    Train(TrainArgs),
    /// Evaluate a checkpoint against freshly seeded learners.
    Eval(EvalArgs),
    /// Compare the full system against the similarity-agent-disabled arm.
    Ablate(AblateArgs),
    /// Explain each step of a recommended path.
    Explain(ExplainArgs),
    /// Run the configured method sweep on simulated learners.
    Simulate(SimulateArgs),
    /// Summarize a learning-records CSV.
    Ingest(IngestArgs),
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };

    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .try_init();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }

    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_experiment_config(path: &Path, seed_override: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load_json(path)?;
    if let Some(seed) = seed_override {
        config.seeds = vec![seed];
    }
    Ok(config)
}

fn make_backend(
    kind: BackendKind,
    ontology: Option<&Path>,
    names: &[String],
    http_config: Option<&Path>,
) -> Result<Box<dyn TextModelBackend>> {
    match kind {
        BackendKind::Stub => {
            let ontology = match ontology {
                Some(path) => PlantedOntology::load_json(path)?,
                None => PlantedOntology {
                    concepts: names.to_vec(),
                    ..PlantedOntology::default()
                },
            };
            Ok(Box::new(StubBackend::new(ontology)?))
        }
        BackendKind::Http => {
            let config = match http_config {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<HttpBackendConfig>(&text)
                        .map_err(|e| Error::Ingest(format!("http config: {e}")))?
                }
                None => HttpBackendConfig::default(),
            };
            Ok(Box::new(HttpBackend::new(config)?))
        }
    }
}

fn cmd_gen_graph(args: GenGraphArgs, seed: Option<u64>) -> Result<()> {
    std::fs::create_dir_all(&args.out)?;
    let graph_path = args.out.join("graph.json");

    if let Some(spec_path) = &args.spec {
        let text = std::fs::read_to_string(spec_path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", spec_path.display())))?;
        let spec: SyntheticGraphSpec =
            serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("spec: {e}")))?;
        let (graph, bank) =
            crate::harness::generate_synthetic_graph(&spec, seed.unwrap_or(7))?;
        graph.save_json(&graph_path)?;
        bank.save_json(&args.out.join("exercises.json"))?;
        println!(
            "wrote {} ({} concepts, {} prerequisite edges, {} similarity edges)",
            graph_path.display(),
            graph.n_concepts(),
            graph.prereq_edges().len(),
            graph.sim_edges().len()
        );
        return Ok(());
    }

    let names: Vec<String> = match (&args.names, &args.ontology) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        (None, Some(path)) => PlantedOntology::load_json(path)?.concepts,
        (None, None) => {
            return Err(Error::invalid_input(
                "gen-graph needs one of --names, --ontology or --spec",
            ))
        }
    };

    let backend = make_backend(
        args.backend,
        args.ontology.as_deref(),
        &names,
        args.http_config.as_deref(),
    )?;
    let pipeline = PipelineConfig {
        chunk_size: args.chunk_size,
        overlap: args.overlap,
        ..PipelineConfig::default()
    };
    let output = run_pipeline(&names, backend.as_ref(), &pipeline)?;
    output.graph.save_json(&graph_path)?;
    std::fs::write(
        args.out.join("explanations.json"),
        serde_json::to_string_pretty(&output.explanations)?,
    )?;
    std::fs::write(
        args.out.join("summaries.json"),
        serde_json::to_string_pretty(&output.summaries)?,
    )?;
    println!(
        "wrote {} ({} concepts, {} prerequisite edges, {} similarity edges, {} communities)",
        graph_path.display(),
        output.graph.n_concepts(),
        output.graph.prereq_edges().len(),
        output.graph.sim_edges().len(),
        output.summaries.len()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, seed_override: Option<u64>) -> Result<()> {
    let config = load_experiment_config(&args.config, seed_override)?;
    let (graph, bank) = build_environment(&config)?;
    let seed = derive_seed(config.base_seed(), salt("train-full"));
    let output = train(
        &graph,
        &bank,
        &config.sim,
        &config.agent,
        config.train_episodes,
        seed,
        true,
    )?;

    std::fs::create_dir_all(&args.out)?;
    Checkpoint::new(&output.policy, output.policy_opt.clone(), seed, output.curve.len() as u64)
        .save_json(&args.out.join("policy_checkpoint.json"))?;
    Checkpoint::new(&output.value, output.value_opt.clone(), seed, output.curve.len() as u64)
        .save_json(&args.out.join("value_checkpoint.json"))?;

    let mut curve = String::from("batch,mean_ep,policy_loss,value_loss\n");
    for stat in &output.curve {
        curve.push_str(&format!(
            "{},{},{},{}\n",
            stat.batch, stat.mean_ep, stat.policy_loss, stat.value_loss
        ));
    }
    std::fs::write(args.out.join("curve.csv"), curve)?;

    let final_quarter = &output.curve[output.curve.len() - output.curve.len() / 4..];
    println!(
        "trained {} episodes; final-quartile mean effectiveness {:.4}",
        config.train_episodes,
        stats::mean(&final_quarter.iter().map(|s| s.mean_ep).collect::<Vec<_>>())
    );
    println!("checkpoints written to {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs, seed_override: Option<u64>) -> Result<()> {
    let config = load_experiment_config(&args.config, seed_override)?;
    let (graph, bank) = build_environment(&config)?;
    let policy = Checkpoint::load_json(&args.checkpoint.join("policy_checkpoint.json"))?
        .params()?;
    let value = Checkpoint::load_json(&args.checkpoint.join("value_checkpoint.json"))?
        .params()?;
    let options = EpisodeOptions {
        selector: ConceptSelector::Network {
            params: &policy,
            greedy: true,
        },
        value_params: Some(&value),
        s_agent_enabled: true,
    };
    let results = evaluate(
        &graph,
        &bank,
        &options,
        &config.agent,
        &config.sim,
        config.eval_episodes,
        derive_seed(config.base_seed(), salt("eval")),
    )?;
    let eps: Vec<f64> = results.iter().map(|r| r.e_p).collect();
    println!(
        "{{\"episodes\": {}, \"mean_ep\": {:.6}, \"std_ep\": {:.6}}}",
        eps.len(),
        stats::mean(&eps),
        stats::std_dev(&eps)
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs, seed_override: Option<u64>) -> Result<()> {
    let mut config = load_experiment_config(&args.config, seed_override)?;
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let report = run_ablation(&config)?;
    print_report_table(&report);
    println!("report written to {}", config.output_dir.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, seed_override: Option<u64>) -> Result<()> {
    let config = load_experiment_config(&args.config, seed_override)?;
    let report = run_experiment(&config)?;
    emit_report(&report, &config.output_dir)?;
    print_report_table(&report);
    println!("report written to {}", config.output_dir.display());
    Ok(())
}

fn cmd_explain(args: ExplainArgs) -> Result<()> {
    let graph = ConceptGraph::load_json(&args.graph)?;
    let text = std::fs::read_to_string(&args.path_file)
        .map_err(|e| Error::Ingest(format!("{}: {e}", args.path_file.display())))?;
    let path: Vec<(usize, usize)> =
        serde_json::from_str(&text).map_err(|e| Error::Ingest(format!("path file: {e}")))?;
    let names: Vec<String> = graph.concepts().iter().map(|c| c.name.clone()).collect();
    let backend = make_backend(
        args.backend,
        args.ontology.as_deref(),
        &names,
        args.http_config.as_deref(),
    )?;
    let summaries = summarize_communities(&graph, backend.as_ref())?;
    let explanations = explain_path(&path, &summaries, &graph, backend.as_ref())?;
    println!("{}", serde_json::to_string_pretty(&explanations)?);
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let loaded = load_records(&args.records)?;
    println!("{}", serde_json::to_string_pretty(&loaded.summary)?);

    // With a graph at hand, fit the observable tracker to each
    // learner's chronological history.
    if let Some(graph_path) = &args.graph {
        let graph = ConceptGraph::load_json(graph_path)?;
        if !(args.decay > 0.0 && args.decay < 1.0) {
            return Err(Error::invalid_input("decay must lie in (0, 1)"));
        }
        let mut estimates: Vec<(String, Vec<f64>)> = Vec::new();
        for group in &loaded.groups {
            let history: Vec<crate::student_sim::HistoryRecord> = group
                .rows
                .iter()
                .enumerate()
                .filter(|(_, r)| r.kc_id < graph.n_concepts())
                .map(|(step, r)| crate::student_sim::HistoryRecord {
                    exercise_id: r.exercise_id,
                    concept_id: r.kc_id,
                    score: r.score,
                    step,
                })
                .collect();
            let est = crate::student_sim::kt_estimate(&history, &graph, args.decay);
            estimates.push((group.learner_id.clone(), est.as_slice().to_vec()));
        }
        let fitted: f64 = estimates
            .iter()
            .flat_map(|(_, est)| est.iter())
            .sum::<f64>()
            / (estimates.len().max(1) * graph.n_concepts().max(1)) as f64;
        println!(
            "fitted tracker for {} learner(s); grand mean estimate {fitted:.4}",
            estimates.len()
        );
        if let Some(out) = &args.out {
            let map: std::collections::BTreeMap<&str, &Vec<f64>> = estimates
                .iter()
                .map(|(id, est)| (id.as_str(), est))
                .collect();
            std::fs::write(out, serde_json::to_string_pretty(&map)?)?;
            println!("estimates written to {}", out.display());
        }
    }
    Ok(())
}

fn print_report_table(report: &Report) {
    println!(
        "{:<14} {:>5} {:>9} {:>8} {:>5} {:>10} {:>8}",
        "method", "steps", "mean_ep", "std", "n", "p(perm)", "s/ep"
    );
    for cell in &report.cells {
        let p = cell
            .p_value_permutation
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "-".to_string());
        if let Some(err) = &cell.error {
            println!("{:<14} {:>5} failed: {err}", cell.method, cell.steps);
        } else {
            println!(
                "{:<14} {:>5} {:>9.4} {:>8.4} {:>5} {:>10} {:>8.2}",
                cell.method,
                cell.steps,
                cell.mean_ep,
                cell.std_ep,
                cell.n,
                p,
                cell.mean_s_activations
            );
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph(args) => cmd_gen_graph(args, cli.seed),
        Command::Train(args) => cmd_train(args, cli.seed),
        Command::Eval(args) => cmd_eval(args, cli.seed),
        Command::Ablate(args) => cmd_ablate(args, cli.seed),
        Command::Explain(args) => cmd_explain(args),
        Command::Simulate(args) => cmd_simulate(args, cli.seed),
        Command::Ingest(args) => cmd_ingest(args),
    }
}
