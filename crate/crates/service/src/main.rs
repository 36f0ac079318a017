use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::Duration;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tracing_subscriber::EnvFilter;
use tutorloop_core::gateway::{build_gateway, ChatGateway, Provider};
use tutorloop_core::irt::io::{read_interactions, write_interactions, ParamsDocument};
use tutorloop_core::irt::{
    calibrate, compute_auc, estimate_theta, learning_gain, mean_prob_correct, prob_correct, Ability, CalibrationConfig,
    InteractionRecord, ItemParams,
};
use tutorloop_core::item_bank::{assemble_pretest, Concept};
use tutorloop_core::sim::{run_cohort, synthetic_log, transcript_stats_from_paths, SelectionPolicy};
use tutorloop_service::api::{router, AppState};
use tutorloop_service::config::{load_bank, ServiceConfig};
use tutorloop_service::store::FileStore;

#[derive(Parser)]
#[command(name = "tutorloop", version, about = "Adaptive tutoring service and IRT tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Adaptive,
    Oracle,
    Random,
}

impl From<Policy> for SelectionPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Adaptive => SelectionPolicy::Adaptive,
            Policy::Oracle => SelectionPolicy::Oracle,
            Policy::Random => SelectionPolicy::Random,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Calibrate item parameters from a JSONL response log.
    Fit {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
        /// Plain joint maximum likelihood with no priors.
        #[arg(long)]
        no_priors: bool,
    },
    /// Score a response log against fitted parameters. Abilities are MAP
    /// estimates from the same log.
    Auc {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        params: PathBuf,
    },
    /// Change in mean predicted correctness between two abilities.
    Gain {
        #[arg(long, allow_hyphen_values = true)]
        pre: f64,
        #[arg(long, allow_hyphen_values = true)]
        post: f64,
        /// Parameters document; every item in it is used unless --concept is set.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Use the bank's items for this concept.
        #[arg(long)]
        concept: Option<Concept>,
    },
    /// Run a simulated cohort through the adaptive loop.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "adaptive")]
        policy: Policy,
        /// Write the full report with per-student trajectories here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic response log and its generating parameters.
    Synth {
        #[arg(long, default_value_t = 500)]
        students: usize,
        #[arg(long, default_value_t = 60)]
        items: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Dialogue statistics over event logs.
    Stats {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Check that a bank loads and can serve every form.
    ValidateBank {
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Serve {
            config,
            listen,
            data_dir,
        } => serve(config.as_deref(), listen, data_dir),
        Command::Fit {
            log,
            out,
            seed,
            max_iterations,
            no_priors,
        } => {
            let config = CalibrationConfig {
                seed,
                max_iterations,
                priors: !no_priors,
                ..Default::default()
            };
            fit(&log, &out, &config)
        }
        Command::Auc { log, params } => auc(&log, &params),
        Command::Gain {
            pre,
            post,
            params,
            bank,
            concept,
        } => gain(pre, post, params.as_deref(), bank.as_deref(), concept),
        Command::Simulate {
            n,
            seed,
            bank,
            params,
            policy,
            out,
        } => {
            let bank = load_bank(bank.as_deref(), params.as_deref())?;
            let mut report = run_cohort(n, &bank, seed, policy.into())?;
            if let Some(out) = out {
                std::fs::write(&out, serde_json::to_vec_pretty(&report)?)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            report.trajectories.clear();
            let mut summary = serde_json::to_value(&report)?;
            summary.as_object_mut().map(|m| m.remove("trajectories"));
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Synth {
            students,
            items,
            seed,
            out,
            truth,
        } => {
            let log = synthetic_log(students, items, seed)?;
            write_interactions(BufWriter::new(create(&out)?), &log.records)?;
            if let Some(truth) = truth {
                let doc = json!({ "seed": seed, "items": log.items, "thetas": log.thetas });
                std::fs::write(&truth, serde_json::to_vec_pretty(&doc)?)?;
            }
            println!(
                "wrote {} records for {students} students and {items} items",
                log.records.len()
            );
            Ok(())
        }
        Command::Stats { files, json } => {
            let stats = transcript_stats_from_paths(&files)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("{stats}");
            }
            Ok(())
        }
        Command::ValidateBank { bank, params } => validate_bank(bank.as_deref(), params.as_deref()),
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn read_log(path: &Path) -> Result<Vec<InteractionRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_interactions(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn read_params(path: &Path) -> Result<ParamsDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ParamsDocument::from_json(&text)?)
}

fn fit(log: &Path, out: &Path, config: &CalibrationConfig) -> Result<()> {
    let records = read_log(log)?;
    let result = calibrate(&records, config)?;
    let doc = ParamsDocument::from_calibration(&result, config);
    std::fs::write(out, doc.to_json()?).with_context(|| format!("writing {}", out.display()))?;
    let report = json!({
        "records": records.len(),
        "items": result.item_params.len(),
        "students": result.student_abilities.len(),
        "iterations": result.iterations,
        "converged": result.converged,
        "final_neg_log_posterior": result.final_neg_log_posterior,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    if !result.converged {
        eprintln!("warning: calibration stopped at the iteration limit before converging");
    }
    Ok(())
}

fn auc(log: &Path, params: &Path) -> Result<()> {
    let records = read_log(log)?;
    let doc = read_params(params)?;
    let by_id = doc.by_id();
    let mut per_student: BTreeMap<&str, Vec<(ItemParams, bool)>> = BTreeMap::new();
    let mut skipped = 0usize;
    for r in &records {
        match by_id.get(r.item_id.as_str()) {
            Some(p) => per_student
                .entry(&r.student_id)
                .or_default()
                .push(((*p).clone(), r.correct)),
            None => skipped += 1,
        }
    }
    let (mut scores, mut outcomes) = (Vec::new(), Vec::new());
    for responses in per_student.values() {
        let ability = estimate_theta(responses)?.ability;
        for (p, y) in responses {
            scores.push(prob_correct(p, &ability)?);
            outcomes.push(*y);
        }
    }
    let auc = compute_auc(&scores, &outcomes)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "auc": auc, "scored": scores.len(), "skipped": skipped }))?
    );
    Ok(())
}

fn gain(pre: f64, post: f64, params: Option<&Path>, bank: Option<&Path>, concept: Option<Concept>) -> Result<()> {
    let items = match concept {
        Some(c) => load_bank(bank, params)?.concept_params(c),
        None => match params {
            Some(p) => read_params(p)?.items,
            None => bail!("give --params, or --concept to use bank items"),
        },
    };
    let (pre, post) = (Ability::new(pre), Ability::new(post));
    let report = json!({
        "items": items.len(),
        "p_pre": mean_prob_correct(&pre, &items)?,
        "p_post": mean_prob_correct(&post, &items)?,
        "gain": learning_gain(&pre, &post, &items)?,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn validate_bank(bank: Option<&Path>, params: Option<&Path>) -> Result<()> {
    let bank = load_bank(bank, params)?;
    let mut problems = Vec::new();
    for concept in bank.concepts() {
        let total = bank.concept_items(concept).count();
        let calibrated = bank.concept_items(concept).filter(|e| e.params.is_some()).count();
        println!("{:<14}{total:>4} items{calibrated:>4} calibrated", concept.to_string());
        if calibrated < total {
            problems.push(format!("{concept}: {} items lack parameters", total - calibrated));
        }
    }
    if let Err(e) = assemble_pretest(&bank) {
        problems.push(format!("pre-test: {e}"));
    }
    for p in &problems {
        eprintln!("problem: {p}");
    }
    if problems.is_empty() {
        println!("ok: {} items", bank.len());
        Ok(())
    } else {
        bail!("{} problem(s) found", problems.len())
    }
}

fn serve(config_path: Option<&Path>, listen: Option<String>, data_dir: Option<PathBuf>) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .json()
        .with_writer(std::io::stderr)
        .init();
    let mut config = ServiceConfig::load(config_path)?;
    if let Some(l) = listen {
        config.listen = l;
    }
    if let Some(d) = data_dir {
        config.data_dir = d;
    }
    let ctx = Arc::new(config.journey_context()?);
    let script = match config.gateway.provider {
        Provider::Mock => Some(config.mock_script()?),
        Provider::Live => None,
    };
    let gateway: Arc<dyn ChatGateway> = Arc::from(build_gateway(&config.gateway, script)?);
    let store = Arc::new(FileStore::open(&config.data_dir)?);
    let (state, recovered) = AppState::recover(ctx, gateway, store, Duration::hours(config.token_ttl_hours))?;
    tracing::info!(
        students = recovered.students,
        events = recovered.events,
        snapshot_mismatches = recovered.snapshot_mismatches.len(),
        "recovered state from event logs"
    );

    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .with_context(|| format!("binding {}", config.listen))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        // Tests and scripts read the bound address from stdout.
        println!("listening on {}", listener.local_addr()?);
        std::io::stdout().flush()?;
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
