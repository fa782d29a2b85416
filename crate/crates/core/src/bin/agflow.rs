//! Command-line front end. All work happens in `agflow::run`; this file
//! only parses arguments and maps errors to exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use agflow::graph::GraphMode;
use agflow::run::{self, GenConfig, Overrides, Precision, RunConfig, SuiteDims};
use agflow::Result;

#[derive(Parser)]
#[command(name = "agflow", version, about = "Adaptive graph reasoning optical flow: generate, train, evaluate, check")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` configuration file (defaults apply to missing keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (output file for `viz`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Evaluation worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    graph: Option<GraphArg>,
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (images, .flo ground truth, manifest).
    Gen,
    /// Train on the dataset named by `data` in the config.
    Train,
    /// Score `checkpoint` on `data`; prints and writes eval.tsv.
    Eval,
    /// Run the 64-bit finite-difference gradient suite.
    Gradcheck,
    /// Parameter, FLOP and latency table for base / sgr / agr.
    Bench,
    /// Render a .flo file as a colour PPM.
    Viz {
        flo: PathBuf,
        /// Magnitude mapped to full saturation (default: the field's maximum).
        #[arg(long)]
        cap: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphArg {
    Base,
    Sgr,
    Agr,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    #[value(name = "32")]
    P32,
    #[value(name = "64")]
    P64,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            graph: self.graph.map(|g| match g {
                GraphArg::Base => GraphMode::Base,
                GraphArg::Sgr => GraphMode::Sgr,
                GraphArg::Agr => GraphMode::Agr,
            }),
            precision: self.precision.map(|p| match p {
                PrecisionArg::P32 => Precision::F32,
                PrecisionArg::P64 => Precision::F64,
            }),
        }
    }

    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.overrides().apply(&mut cfg)?;
        Ok(cfg)
    }
}

/// `Ok(false)` means the command ran but a check failed (exit code 1).
fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Gen => {
            let mut cfg = match &cli.config {
                Some(p) => GenConfig::load(p)?,
                None => GenConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            let ds = run::cmd_gen(&cfg, &out)?;
            println!("wrote {} pairs to {}", ds.len(), out.display());
        }
        Command::Train => {
            let cfg = cli.run_config()?;
            let s = run::train(&cfg)?;
            print!("{}", std::fs::read_to_string(s.out_dir.join(run::train::SUMMARY_FILE)).unwrap_or_default());
            println!("checkpoint\t{}", s.final_checkpoint.display());
        }
        Command::Eval => {
            let cfg = cli.run_config()?;
            print!("{}", run::cmd_eval(&cfg)?);
        }
        Command::Gradcheck => {
            let cases = run::cmd_gradcheck(SuiteDims::default(), cli.seed.unwrap_or(0), cli.out.as_deref())?;
            print!("{}", run::gradsuite::format_suite(&cases));
            let failed = cases.iter().filter(|c| !c.passes()).count();
            if failed > 0 {
                eprintln!("error: {failed} gradient checks exceeded tolerance");
                return Ok(false);
            }
        }
        Command::Bench => {
            let cfg = cli.run_config()?;
            // An explicit --graph restricts the table to that variant.
            let reports = run::cmd_bench(&cfg, cli.graph.is_some().then_some(cfg.model.graph))?;
            println!("graph\tkind\tcomponent\tvalue");
            for r in reports {
                print!("{}", r.to_tsv());
            }
        }
        Command::Viz { flo, cap } => {
            let out = cli.out.clone().unwrap_or_else(|| flo.with_extension("ppm"));
            run::cmd_viz(flo, &out, *cap)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(log::LevelFilter::Info).format_timestamp(None).init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
