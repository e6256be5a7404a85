use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use tadil::domain::{DecisionKind, OnlineDecision, DEFAULT_DIM};
use tadil::drift::{Bandwidth, DriftParams};
use tadil::io::{self, snapshot, ReadOptions};
use tadil::signature::build_signature;
use tadil::synth::{
    default_task_specs, derive_seed, generate_batch, generate_labeled_batch, recall_report, recall_table_csv,
    run_scenario, synthetic_drift_matrix, Scenario, SyntheticTaskSpec, DEFAULT_BATCH_SIZE, DEFAULT_SPREAD,
    REPETITION_SEQUENCE,
};
use tadil::{
    ClusterParams, EmbeddingBatch, Error, HeadParams, Orchestrator, OrchestratorParams, Result, TaskClassifier,
};

#[derive(Parser)]
#[command(
    name = "tadil",
    version,
    about = "Online unsupervised task identification over embedding streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// DBSCAN neighborhood radius (cosine distance)
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// DBSCAN core-point threshold, counting the point itself
    #[arg(long, default_value_t = 10)]
    min_pts: usize,
    /// Neighbors kept per centroid
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    significance: f64,
    /// Use this drift threshold instead of permutation calibration
    #[arg(long)]
    fixed_threshold: Option<f64>,
    /// Fixed kernel bandwidth; the median heuristic is used when omitted
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Base seed; TADIL_SEED is used when the flag is absent
    #[arg(long, env = "TADIL_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl Common {
    fn params(&self) -> Result<OrchestratorParams> {
        let params = OrchestratorParams {
            cluster: ClusterParams {
                eps: self.eps,
                min_pts: self.min_pts,
            },
            drift: DriftParams {
                bandwidth: self.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
                permutations: self.permutations,
                significance: self.significance,
                fixed_threshold: self.fixed_threshold,
                rng_seed: self.seed,
            },
            k: self.k,
            head: HeadParams {
                init_seed: self.seed,
                ..HeadParams::default()
            },
        };
        params.validate()?;
        Ok(params)
    }

    fn out(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(name))
    }
}

#[derive(Args, Clone)]
struct Synthetic {
    /// Number of synthetic tasks
    #[arg(long, default_value_t = 6)]
    tasks: usize,
    /// Per-coordinate noise standard deviation
    #[arg(long, default_value_t = DEFAULT_SPREAD)]
    spread: f64,
    /// Classes per task, used to train the per-task heads
    #[arg(long, default_value_t = 4)]
    classes: u32,
}

impl Synthetic {
    /// Specs numbered 1..=tasks, matching scenario sequences.
    fn specs(&self, dim: usize) -> Result<Vec<SyntheticTaskSpec>> {
        let mut specs = default_task_specs(self.tasks, dim, self.spread, self.classes)?;
        for (i, s) in specs.iter_mut().enumerate() {
            s.task_id = i as u32 + 1;
        }
        Ok(specs)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the online loop over a synthetic scenario or an embedding file
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synthetic: Synthetic,
        /// Comma-separated task sequence (defaults to the repetition scenario)
        #[arg(long, value_delimiter = ',', conflicts_with = "input")]
        sequence: Option<Vec<u32>>,
        /// Batches drawn per sequence step
        #[arg(long, default_value_t = 1)]
        batches_per_step: usize,
        /// EMB1 or JSON-lines embedding file to stream instead
        #[arg(long)]
        input: Option<PathBuf>,
        /// Re-split file rows into --batch-size batches
        #[arg(long)]
        rechunk: bool,
        /// Continue from this snapshot instead of an empty state
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Save the final state here
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Task-by-task drift score matrix as CSV
    DriftMatrix {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synthetic: Synthetic,
    },
    /// Stage-by-task per-sample recall of the task classifier as CSV
    RecallReport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synthetic: Synthetic,
        /// Evaluation batches per stage
        #[arg(long, default_value_t = 12)]
        eval_batches: usize,
    },
    /// Stream an embedding file and save the resulting state
    Snapshot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rechunk: bool,
        /// Snapshot path (defaults to <out-dir>/state.tdsn)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Load a snapshot, verify it and print a summary
    Restore {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Write a labeled synthetic stream as an EMB1 (or .jsonl) file
    GenSynthetic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        synthetic: Synthetic,
        #[arg(long, value_delimiter = ',')]
        sequence: Option<Vec<u32>>,
        /// Output file (defaults to <out-dir>/stream.emb1)
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct StreamStep {
    batch_id: u64,
    rows: usize,
    true_task: Option<u32>,
    decision: OnlineDecision,
}

#[derive(Serialize)]
struct StreamReport {
    input: String,
    batches: usize,
    new_tasks: usize,
    known_tasks: usize,
    warnings: usize,
    tasks_in_memory: usize,
    steps: Vec<StreamStep>,
}

fn stream_file(orch: &mut Orchestrator, path: &Path, common: &Common, rechunk: bool) -> Result<StreamReport> {
    let opts = ReadOptions {
        batch_size: rechunk.then_some(common.batch_size),
        expected_dim: Some(orch.dim()),
    };
    let batches = io::read_embedding_file(path, opts)?;
    // continue batch numbering after whatever the state has already seen
    let offset = orch.event_log().last().map_or(0, |r| r.batch_id + 1);
    let mut steps = Vec::with_capacity(batches.len());
    for batch in batches {
        let batch = batch.with_batch_id(offset + steps.len() as u64);
        let decision = orch.online_step(&batch)?;
        steps.push(StreamStep {
            batch_id: batch.batch_id(),
            rows: batch.len(),
            true_task: batch.true_task(),
            decision,
        });
    }
    let count = |k: DecisionKind| steps.iter().filter(|s| s.decision.kind == k).count();
    Ok(StreamReport {
        input: path.display().to_string(),
        batches: steps.len(),
        new_tasks: count(DecisionKind::NewTask),
        known_tasks: count(DecisionKind::KnownTask),
        warnings: steps.iter().filter(|s| s.decision.warning.is_some()).count(),
        tasks_in_memory: orch.memory().len(),
        steps,
    })
}

fn load_or_new(resume: Option<&Path>, common: &Common, params: OrchestratorParams) -> Result<Orchestrator> {
    match resume {
        Some(path) => snapshot::load_snapshot(path),
        None => Orchestrator::new(common.dim, params),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            synthetic,
            sequence,
            batches_per_step,
            input,
            rechunk,
            resume,
            snapshot: snapshot_path,
        } => {
            let params = common.params()?;
            let (orch, report_json) = match input {
                Some(path) => {
                    let mut orch = load_or_new(resume.as_deref(), &common, params)?;
                    let report = stream_file(&mut orch, &path, &common, rechunk)?;
                    let json = serde_json::to_string_pretty(&report).expect("report serializes");
                    println!(
                        "{} batches: {} new, {} known, {} warnings",
                        report.batches, report.new_tasks, report.known_tasks, report.warnings
                    );
                    (orch, json)
                }
                None => {
                    if resume.is_some() {
                        return Err(Error::InvalidParameter("--resume needs --input".into()));
                    }
                    let scenario = Scenario {
                        sequence: sequence.unwrap_or_else(|| REPETITION_SEQUENCE.to_vec()),
                        batches_per_step,
                        batch_size: common.batch_size,
                        seed: common.seed,
                    };
                    let run = run_scenario(&scenario, &synthetic.specs(common.dim)?, &params)?;
                    let r = &run.report;
                    println!(
                        "{} steps: {} new, {} known, {} warnings, accuracy {:.3}",
                        r.steps.len(),
                        r.new_tasks,
                        r.known_tasks,
                        r.warnings,
                        r.accuracy
                    );
                    (run.orchestrator, r.to_json())
                }
            };
            write_text(&common.out("events.jsonl")?, &orch.event_log_jsonl())?;
            write_text(&common.out("report.json")?, &report_json)?;
            if let Some(path) = snapshot_path {
                snapshot::save_snapshot(&path, &orch)?;
                println!("wrote {}", path.display());
            }
        }
        Command::DriftMatrix { common, synthetic } => {
            let params = common.params()?;
            let m = synthetic_drift_matrix(&synthetic.specs(common.dim)?, common.batch_size, common.seed, &params)?;
            let csv = m.to_csv();
            print!("{csv}");
            println!("sign pattern holds: {}", m.sign_pattern_holds(|i, j| i == j));
            write_text(&common.out("drift_matrix.csv")?, &csv)?;
        }
        Command::RecallReport {
            common,
            synthetic,
            eval_batches,
        } => {
            let params = common.params()?;
            let specs = synthetic.specs(common.dim)?;
            let mut clf = TaskClassifier::new();
            let mut stages = Vec::new();
            let mut batch_id = 0;
            for (t, spec) in specs.iter().enumerate() {
                let train = generate_batch(
                    spec,
                    common.batch_size,
                    derive_seed(common.seed, &[0, t as u64]),
                    batch_id,
                )?;
                batch_id += 1;
                clf.fit_increment(&build_signature(&train, &params.cluster, params.k, spec.task_id)?)?;
                if t == 0 {
                    continue;
                }
                let seen = &specs[..=t];
                let eval: Vec<EmbeddingBatch> = (0..eval_batches)
                    .map(|j| {
                        let spec = &seen[j % seen.len()];
                        let seed = derive_seed(common.seed, &[1, t as u64, j as u64]);
                        generate_batch(spec, common.batch_size, seed, batch_id + j as u64)
                    })
                    .collect::<Result<_>>()?;
                batch_id += eval_batches as u64;
                let report = recall_report(&clf, &eval)?;
                let correct = eval
                    .iter()
                    .filter(|b| clf.predict_batch(b).ok() == b.true_task())
                    .count();
                println!(
                    "T={}: batch accuracy {}/{}, flagged tasks {:?}",
                    t + 1,
                    correct,
                    eval.len(),
                    report.flagged()
                );
                stages.push(report);
            }
            write_text(&common.out("recall.csv")?, &recall_table_csv(&stages))?;
        }
        Command::Snapshot {
            common,
            input,
            rechunk,
            output,
        } => {
            let params = common.params()?;
            let mut orch = Orchestrator::new(common.dim, params)?;
            let report = stream_file(&mut orch, &input, &common, rechunk)?;
            let path = match output {
                Some(p) => p,
                None => common.out("state.tdsn")?,
            };
            snapshot::save_snapshot(&path, &orch)?;
            println!(
                "{} batches, {} tasks; wrote {}",
                report.batches,
                report.tasks_in_memory,
                path.display()
            );
        }
        Command::Restore { snapshot: path } => {
            let orch = snapshot::load_snapshot(&path)?;
            println!(
                "dim {}, {} tasks, {} exemplars, {} events, active task {}",
                orch.dim(),
                orch.memory().len(),
                orch.classifier().exemplar_count(),
                orch.event_log().len(),
                orch.active_task().map_or("none".to_string(), |t| t.to_string())
            );
        }
        Command::GenSynthetic {
            common,
            synthetic,
            sequence,
            output,
        } => {
            let specs = synthetic.specs(common.dim)?;
            let sequence = sequence.unwrap_or_else(|| specs.iter().map(|s| s.task_id).collect());
            let batches: Vec<EmbeddingBatch> = sequence
                .iter()
                .enumerate()
                .map(|(step, task)| {
                    let spec = specs
                        .iter()
                        .find(|s| s.task_id == *task)
                        .ok_or(Error::UnknownTask(*task))?;
                    let seed = derive_seed(common.seed, &[step as u64, 0]);
                    generate_labeled_batch(spec, common.batch_size, seed, step as u64).map(|(b, _)| b)
                })
                .collect::<Result<_>>()?;
            let path = match output {
                Some(p) => p,
                None => common.out("stream.emb1")?,
            };
            io::write_embedding_file(&path, &batches)?;
            println!(
                "{} batches of {} rows; wrote {}",
                batches.len(),
                common.batch_size,
                path.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
