use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrlscore::netmetrics::{LaplacianMode, Metric};
use ctrlscore::objective::ObjectiveKind;
use ctrlscore_cli::{commands, CliError, Format, RunConfig};

#[derive(Parser)]
#[command(name = "ctrlscore", version, about = "Controllability scores for linear network systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve VCS and/or AECS for a state matrix and attach diagnostics.
    Score(Flags),
    /// Turn a connectivity matrix into Laplacian dynamics −L.
    Laplacian(Flags),
    /// Score every connectivity CSV in a directory and correlate with centralities.
    Batch(Flags),
    /// Graph and controllability centralities of a connectivity matrix.
    Centrality(Flags),
    /// Per-iteration log distance to the final iterate, as CSV.
    Convergence(Flags),
    /// Uniqueness certificate for a state matrix.
    Certify(Flags),
    /// Write seeded synthetic connectivity matrices.
    Fixtures(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Vcs,
    Aecs,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Directed,
    Undirected,
}

#[derive(Args)]
struct Flags {
    /// State matrix CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Connectivity matrix CSV, Cᵢⱼ from region i to region j.
    #[arg(long)]
    connectivity: Option<PathBuf>,
    /// Directory of connectivity CSVs.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Terminal time.
    #[arg(long = "T", default_value_t = 100.0)]
    t: f64,
    #[arg(long, value_enum, default_value = "both")]
    objective: ObjectiveArg,
    /// Comma-separated metrics: indegree,outdegree,betweenness,pagerank,avg_ctrl,vce,ace,vcs,aecs.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long = "rank-tol", default_value_t = f64::EPSILON)]
    rank_tol: f64,
    /// Stop when the step norm falls to this value.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "directed")]
    mode: ModeArg,
    /// Unit edge lengths for betweenness.
    #[arg(long)]
    binarize: bool,
    /// Number of fixture individuals.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Regions per fixture individual.
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
}

impl Flags {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let metrics = if self.metrics.is_empty() {
            Metric::CLASSICAL.to_vec()
        } else {
            self.metrics
                .iter()
                .map(|m| m.parse::<Metric>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(RunConfig {
            matrix: self.matrix,
            connectivity: self.connectivity,
            dir: self.dir,
            t: self.t,
            objectives: match self.objective {
                ObjectiveArg::Vcs => vec![ObjectiveKind::Vcs],
                ObjectiveArg::Aecs => vec![ObjectiveKind::Aecs],
                ObjectiveArg::Both => ObjectiveKind::ALL.to_vec(),
            },
            metrics,
            damping: self.damping,
            rank_tol: self.rank_tol,
            tol: self.tol,
            max_iter: self.max_iter,
            format: match self.format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            },
            out: self.out,
            jobs: self.jobs,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Directed => LaplacianMode::Directed,
                ModeArg::Undirected => LaplacianMode::Undirected,
            },
            binarize_paths: self.binarize,
            count: self.count,
            nodes: self.nodes,
            density: self.density,
        })
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let (handler, flags): (fn(&RunConfig) -> Result<String, CliError>, Flags) = match cli.command {
        Command::Score(f) => (commands::cmd_score, f),
        Command::Laplacian(f) => (commands::cmd_laplacian, f),
        Command::Batch(f) => (commands::cmd_batch, f),
        Command::Centrality(f) => (commands::cmd_centrality, f),
        Command::Convergence(f) => (commands::cmd_convergence, f),
        Command::Certify(f) => (commands::cmd_certify, f),
        Command::Fixtures(f) => (commands::cmd_fixtures, f),
    };
    let to_stdout = flags.out.is_none();
    let text = handler(&flags.into_config()?)?;
    Ok(if to_stdout { text } else { String::new() })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CTRLSCORE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
