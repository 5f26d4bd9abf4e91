use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use taskfree_cli::config::Overrides;
use taskfree_cli::{cmd_eval, cmd_gen_stream, cmd_ingest, cmd_inspect, cmd_report, cmd_run, CliError, RunConfig};

/// Build task-free continual-learning streams from node-classification
/// graphs, run reference learners on them, and score the results.
#[derive(Parser)]
#[command(name = "taskfree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and print its structural summary.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Node CSV (`id,label,f_0,...`); replaces the config's dataset.
        #[arg(long, requires = "edges")]
        nodes: Option<PathBuf>,
        /// Edge CSV (`src,dst`).
        #[arg(long, requires = "nodes")]
        edges: Option<PathBuf>,
    },
    /// Write one stream file per seed.
    GenStream {
        #[command(flatten)]
        common: Common,
    },
    /// Report the overlap index, mixing curve, and graph statistics.
    Inspect {
        #[command(flatten)]
        common: Common,
    },
    /// Run the configured learner over each seed's stream.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Score prediction logs into metrics.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Score this external log instead of the per-seed logs.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Stream file the external log was produced from.
        #[arg(long, requires = "log")]
        stream: Option<PathBuf>,
    },
    /// Aggregate per-seed metrics into a report.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; the bundled synthetic config is used if omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output root (default: config value, then $TASKFREE_OUT, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds to run, comma separated.
    #[arg(long = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Transition mode: hard, gaussian, global-mix, boundary-local.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    mix_fraction: Option<f64>,
    /// Boundary-local half-width in batches.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// bare, er, agem, or joint.
    #[arg(long)]
    learner: Option<String>,
    /// with-replacement or without-replacement.
    #[arg(long)]
    sampling: Option<String>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    classes_per_task: Option<usize>,
    #[arg(long)]
    eval_interval: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hops: Option<usize>,
}

impl Common {
    fn resolve(&self, nodes: Option<PathBuf>, edges: Option<PathBuf>) -> Result<RunConfig, CliError> {
        let tag = |source| CliError {
            config: self.config.clone(),
            source,
        };
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).map_err(tag)?,
            None => RunConfig::default(),
        };
        Overrides {
            output_dir: self.out.clone(),
            seeds: self.seeds.clone(),
            mode: self.mode.clone(),
            sigma: self.sigma,
            mix_fraction: self.mix_fraction,
            window: self.window,
            batch_size: self.batch_size,
            learner: self.learner.clone(),
            sampling: self.sampling.clone(),
            optimizer: self.optimizer.clone(),
            classes_per_task: self.classes_per_task,
            eval_interval: self.eval_interval,
            learning_rate: self.lr,
            hops: self.hops,
            nodes,
            edges,
        }
        .apply(&mut cfg)
        .map_err(tag)?;
        Ok(cfg)
    }
}

fn dispatch(command: Command) -> Result<String, CliError> {
    let (common, result) = match command {
        Command::Ingest { common, nodes, edges } => {
            let cfg = common.resolve(nodes, edges)?;
            let r = cmd_ingest(&cfg);
            (common, r)
        }
        Command::GenStream { common } => {
            let r = cmd_gen_stream(&common.resolve(None, None)?);
            (common, r)
        }
        Command::Inspect { common } => {
            let r = cmd_inspect(&common.resolve(None, None)?);
            (common, r)
        }
        Command::Run { common } => {
            let r = cmd_run(&common.resolve(None, None)?);
            (common, r)
        }
        Command::Eval { common, log, stream } => {
            let r = cmd_eval(&common.resolve(None, None)?, log.as_deref(), stream.as_deref());
            (common, r)
        }
        Command::Report { common } => {
            let r = cmd_report(&common.resolve(None, None)?);
            (common, r)
        }
    };
    result.map_err(|source| CliError {
        config: common.config,
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
