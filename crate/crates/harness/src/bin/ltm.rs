use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ltm_core::neural::HiddenLayers;
use ltm_core::{InfoType, Labeling, MethodId, ProbModel};
use ltm_harness::report::report;
use ltm_harness::{ExperimentConfig, Harness, Result, ResultRow, DEFAULT_OUT, OUT_ENV};

/// Learning-to-manipulate experiments: generate labeled elections, train
/// networks, evaluate them against the ideal manipulator and report.
#[derive(Debug, Parser)]
#[command(name = "ltm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; flags below override its lists.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<MethodId>,

    /// uniform, spatial2d, mallows or mallows:<rel_phi>.
    #[arg(long, global = true, value_delimiter = ',')]
    model: Vec<ProbModel>,

    #[arg(long, global = true, value_delimiter = ',')]
    voters: Vec<usize>,

    #[arg(long, global = true, value_delimiter = ',')]
    candidates: Vec<usize>,

    #[arg(long, global = true, value_delimiter = ',')]
    info: Vec<InfoType>,

    #[arg(long, global = true)]
    labeling: Option<Labeling>,

    /// Hidden widths such as 128x128; comma-separated for several nets.
    #[arg(long, global = true, value_delimiter = ',')]
    hidden: Vec<HiddenLayers>,

    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,

    /// Training instances generated per cell.
    #[arg(long, global = true)]
    instances: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate labeled training datasets.
    Gen,
    /// Train every hidden-layer configuration on every dataset.
    Train,
    /// Evaluate trained networks.
    Eval,
    /// Evaluate the ideal and sincere baselines.
    Baseline,
    /// Summarize every result under the output root.
    Report,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

impl Cli {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        fn set<T: Clone>(target: &mut Vec<T>, values: &[T]) {
            if !values.is_empty() {
                *target = values.to_vec();
            }
        }
        set(&mut config.methods, &self.method);
        set(&mut config.models, &self.model);
        set(&mut config.voters, &self.voters);
        set(&mut config.candidates, &self.candidates);
        set(&mut config.infos, &self.info);
        set(&mut config.hidden, &self.hidden);
        set(&mut config.seeds, &self.seed);
        if let Some(labeling) = self.labeling {
            config.labeling = labeling;
        }
        if let Some(count) = self.instances {
            config.train_size = count;
        }
        config.validate()?;
        Ok(config)
    }

    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn print_rows(rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let config = cli.resolve()?;
    if let Command::ShowConfig = cli.command {
        print!("{}", config.to_toml());
        return Ok(());
    }
    if let Command::Report = cli.command {
        let layout = ltm_harness::Layout::new(cli.out());
        let (summary, written) = report(&layout.results_dir(), &layout.report_dir())?;
        eprintln!("{} summary rows", summary.summary.len());
        for path in written {
            println!("{}", path.display());
        }
        return Ok(());
    }
    let harness = Harness::new(config, cli.out(), cli.workers)?;
    match cli.command {
        Command::Gen => {
            for path in harness.gen_data()? {
                println!("{}", path.display());
            }
        }
        Command::Train => {
            for path in harness.train_grid()? {
                println!("{}", path.display());
            }
        }
        Command::Eval => print_rows(&harness.eval()?)?,
        Command::Baseline => print_rows(&harness.baseline()?)?,
        Command::Report | Command::ShowConfig => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ltm: {e}");
            ExitCode::from(e.code())
        }
    }
}
