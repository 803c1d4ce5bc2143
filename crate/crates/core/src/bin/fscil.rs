use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fscil::config::{LossKind, RunConfig};
use fscil::experiment::{cmd_eval, cmd_report, cmd_synth, cmd_train, CHECKPOINT_FILE};
use fscil::Error;

#[derive(Parser)]
#[command(name = "fscil", version, about = "Few-shot class-incremental learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset described by the [synth] section.
    Synth(RunArgs),
    /// Train the backbone on the base session and write a checkpoint.
    Train(RunArgs),
    /// Run the incremental protocol on a checkpoint and write reports.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint to evaluate; defaults to <out>/checkpoint.bin.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare report.csv files side by side.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Angular,
    #[value(alias = "cross-entropy")]
    Ce,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    config_pos: Option<PathBuf>,
    #[arg(long, conflicts_with = "config_pos")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    class_aug: Option<Switch>,
    #[arg(long, value_enum)]
    balance: Option<Switch>,
    /// Same as `--balance off`.
    #[arg(long, conflicts_with = "balance")]
    no_balance: bool,
    #[arg(long, value_enum)]
    projection: Option<Switch>,
    #[arg(long, value_enum)]
    two_view: Option<Switch>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let path = self.config.as_ref().or(self.config_pos.as_ref()).expect("clap enforces a config");
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(loss) = self.loss {
            cfg.flags.loss = match loss {
                LossArg::Angular => LossKind::Angular,
                LossArg::Ce => LossKind::Ce,
            };
        }
        if let Some(v) = self.class_aug {
            cfg.flags.class_aug = v.on();
        }
        if let Some(v) = self.balance {
            cfg.flags.balance = v.on();
        }
        if self.no_balance {
            cfg.flags.balance = false;
        }
        if let Some(v) = self.projection {
            cfg.flags.projection = v.on();
        }
        if let Some(v) = self.two_view {
            cfg.flags.two_view = v.on();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(args) => {
            let path = cmd_synth(&args.resolve()?)?;
            println!("wrote {}", path.display());
        }
        Command::Train(args) => {
            let out = cmd_train(&args.resolve()?)?;
            for (i, l) in out.epoch_losses.iter().enumerate() {
                println!("epoch {:>3}  loss {l:.6}", i + 1);
            }
            println!("wrote {}", out.checkpoint.display());
        }
        Command::Eval { run, checkpoint } => {
            let cfg = run.resolve()?;
            let ck = checkpoint.unwrap_or_else(|| cfg.output.join(CHECKPOINT_FILE));
            let report = cmd_eval(&cfg, &ck)?;
            print!("{}", report.to_csv());
        }
        Command::Report { reports } => print!("{}", cmd_report(&reports)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
