use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgp_cli::config::{CommandKind, ExperimentConfig};
use qgp_cli::CliError;
use qgp_core::qkernel::KernelMode;

/// Quantum-kernel Gaussian processes: regression, Bayesian optimization and
/// oracle benchmarks.
#[derive(Parser)]
#[command(name = "qgp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a quantum-kernel GP to a synthetic 1-D dataset.
    Regress(Overrides),
    /// Run repeated paired Bayesian-optimization experiments.
    Bayesopt(Overrides),
    /// Run the oracle-equivalence and invariant suites.
    Benchmark(Overrides),
    /// Serve a built-in objective over stdin/stdout.
    #[command(hide = true)]
    EvalObjective { name: String },
}

#[derive(Args, Default)]
struct Overrides {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Shots per kernel entry; also switches regression to SAMPLED mode.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Surrogate to run; repeat for several.
    #[arg(long = "surrogate")]
    surrogates: Vec<String>,
    /// Shell command implementing the objective line protocol.
    #[arg(long)]
    objective_cmd: Option<String>,
}

impl Overrides {
    fn resolve(self, command: CommandKind) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::for_command(command),
        };
        cfg.command = command;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        if let Some(v) = self.reps {
            cfg.repetitions = v;
        }
        if let Some(v) = self.shots {
            cfg.kernel.shots = v;
            if command == CommandKind::Regress {
                cfg.kernel.mode = KernelMode::Sampled;
            }
        }
        if let Some(v) = self.qubits {
            cfg.feature_map.num_qubits = v;
        }
        if let Some(v) = self.layers {
            cfg.feature_map.num_layers = v;
        }
        if !self.surrogates.is_empty() {
            cfg.bayesopt.surrogates = self.surrogates;
        }
        if let Some(v) = self.objective_cmd {
            cfg.objective.command = Some(v);
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Regress(o) => o.resolve(CommandKind::Regress).and_then(|c| qgp_cli::execute(&c)),
        Command::Bayesopt(o) => o.resolve(CommandKind::Bayesopt).and_then(|c| qgp_cli::execute(&c)),
        Command::Benchmark(o) => o.resolve(CommandKind::Benchmark).and_then(|c| qgp_cli::execute(&c)),
        Command::EvalObjective { name } => {
            let stdin = std::io::stdin();
            qgp_cli::serve_objective(&name, stdin.lock(), std::io::stdout().lock())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qgp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
