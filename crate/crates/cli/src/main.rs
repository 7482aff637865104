use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_gbs_cli::{
    run_hafnian, run_probs, run_sample, run_toy_sweep, run_validate, CliError, Mode, Result, RunConfig,
};

#[derive(Parser)]
#[command(name = "hybrid-gbs", version, about = "Photon statistics of hybrid atom-photon Gaussian states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep gamma or T for the two-mode toy model and write CSV.
    ToySweep(Common),
    /// Enumerate pattern probabilities into a JSON table.
    Probs(Common),
    /// Draw seeded samples as CSV.
    Sample(Common),
    /// Print the hafnian of a symmetric matrix file as "re im".
    Hafnian(Common),
    /// Run the consistency checks and write a JSON report.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Input file: the matrix for `hafnian`, the covariance otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
}

impl Common {
    fn load(&self, mode: Mode) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = cfg.mode {
            if m != mode {
                return Err(CliError::Config(format!("config mode {m:?} does not match the subcommand")));
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output {
            cfg.output_path = Some(o.clone());
        }
        if let Some(i) = &self.input {
            match mode {
                Mode::Hafnian => cfg.matrix_path = Some(i.clone()),
                _ => cfg.covariance_path = Some(i.clone()),
            }
        }
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output_path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Run(e.into())),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (mode, common) = match &cli.command {
        Command::ToySweep(c) => (Mode::ToySweep, c),
        Command::Probs(c) => (Mode::Probs, c),
        Command::Sample(c) => (Mode::Sample, c),
        Command::Hafnian(c) => (Mode::Hafnian, c),
        Command::Validate(c) => (Mode::Validate, c),
    };
    let cfg = common.load(mode)?;
    match mode {
        Mode::ToySweep => emit(&cfg, &run_toy_sweep(&cfg)?),
        Mode::Probs => emit(&cfg, &run_probs(&cfg)?),
        Mode::Sample => emit(&cfg, &run_sample(&cfg)?),
        Mode::Hafnian => emit(&cfg, &run_hafnian(&cfg)?),
        Mode::Validate => {
            let (text, passed) = run_validate(&cfg)?;
            emit(&cfg, &text)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Validation("one or more checks failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
