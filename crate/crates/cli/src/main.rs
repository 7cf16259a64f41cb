use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use dbgcomplete::campaign::{
    cmd_campaign, cmd_compare, cmd_generate, cmd_metrics, cmd_reduce, cmd_report, cmd_triage, render_summary,
    CampaignConfig, CampaignError, ReduceRequest, RunStore, TriageRun, ViolationFilter,
};
use dbgcomplete::reducer::run_predicate_cli;

#[derive(Parser)]
#[command(name = "dbgcomplete", version, about = "Hunt debug-information completeness bugs in optimizing compilers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate and screen the corpus of a campaign without building it.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run or resume a full campaign.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Attribute stored violations to optimization flags or passes.
    Triage {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "")]
        filter: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Single-flag rebuild budget per violation.
        #[arg(long, default_value_t = 400)]
        budget: usize,
        /// Flag-pair rebuild budget, tried when no single flag helps.
        #[arg(long, default_value_t = 0)]
        pairs: usize,
    },
    /// Reduce one triaged violation and emit its report bundle.
    Reduce {
        #[arg(long)]
        store: PathBuf,
        /// Full identity key of the violation.
        #[arg(long)]
        filter: String,
        /// Reducer command line; the test script and file name are appended.
        #[arg(long)]
        reducer: String,
        #[arg(long, default_value_t = 3600)]
        wall_budget: u64,
        #[arg(long)]
        analyzer: Option<PathBuf>,
    },
    /// Line coverage and availability against the O0 traces.
    Metrics {
        #[arg(long)]
        store: PathBuf,
    },
    /// Compare two stores that ran the same corpus.
    Compare {
        #[arg(long, num_args = 2, required = true)]
        store: Vec<PathBuf>,
        #[arg(long, num_args = 2)]
        labels: Option<Vec<String>>,
        #[arg(long, default_value_t = 50)]
        per_row: usize,
    },
    /// Write one dossier per selected violation.
    Report {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "")]
        filter: String,
    },
    /// Interestingness test entry used by reduction scripts.
    #[command(hide = true)]
    Interesting {
        #[arg(long)]
        spec: PathBuf,
        file: PathBuf,
    },
}

fn load(config: &PathBuf, jobs: Option<usize>) -> Result<CampaignConfig, CampaignError> {
    let mut cfg = CampaignConfig::load(config)?;
    if let Some(j) = jobs {
        cfg.parallelism = j;
    }
    Ok(cfg)
}

fn run(cmd: Cmd) -> Result<(), CampaignError> {
    match cmd {
        Cmd::Generate { config, jobs } => {
            let cfg = load(&config, jobs)?;
            for r in cmd_generate(&cfg)? {
                let state = if r.screen.clean { "clean" } else { "rejected" };
                println!("slot {:>4}  {}  {state}", r.slot, r.program_id);
            }
        }
        Cmd::Campaign { config, jobs } => {
            let cfg = load(&config, jobs)?;
            let summary = cmd_campaign(&cfg)?;
            print!("{}", render_summary(&summary));
            println!("store: {}", cfg.store_root.display());
        }
        Cmd::Triage { store, filter, jobs, budget, pairs } => {
            let mut run = TriageRun::new(filter.parse()?);
            run.jobs = jobs;
            run.search.budget = budget;
            run.search.pair_budget = pairs;
            let groups = cmd_triage(&RunStore::new(store), &run)?;
            print!("{}", dbgcomplete::triage::groups_text(&groups));
        }
        Cmd::Reduce { store, filter, reducer, wall_budget, analyzer } => {
            let req = ReduceRequest {
                key: filter,
                wall_budget: Duration::from_secs(wall_budget),
                reducer: reducer.split_whitespace().map(String::from).collect(),
                driver: std::env::current_exe()?,
                analyzer,
            };
            let r = cmd_reduce(&RunStore::new(store), &req)?;
            println!(
                "{} -> {} lines in {} predicate runs; verified: {}",
                r.original_lines, r.reduced_lines, r.iterations, r.final_verification
            );
            if let Some(b) = &r.bundle_path {
                println!("bundle: {}", b.display());
            }
        }
        Cmd::Metrics { store } => {
            let agg = cmd_metrics(&RunStore::new(store))?;
            print!("{}", agg.to_csv());
        }
        Cmd::Compare { store, labels, per_row } => {
            let labels = labels.unwrap_or_else(|| store.iter().map(|p| p.display().to_string()).collect());
            let (a, b) = (RunStore::new(&store[0]), RunStore::new(&store[1]));
            let report = cmd_compare(&a, &b, (&labels[0], &labels[1]), per_row)?;
            print!("{}", report.render_text());
        }
        Cmd::Report { store, filter } => {
            let filter: ViolationFilter = filter.parse()?;
            for p in cmd_report(&RunStore::new(store), &filter)? {
                println!("{}", p.display());
            }
        }
        Cmd::Interesting { .. } => unreachable!("handled before dispatch"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Cmd::Interesting { spec, file } = &cli.command {
        return match run_predicate_cli(spec, file) {
            Ok(v) if v.interesting => ExitCode::SUCCESS,
            Ok(v) => {
                eprintln!("not interesting: {}", v.reason);
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
