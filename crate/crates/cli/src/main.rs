use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roughflow_cli::{run, sweep, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "roughflow", version, about = "Rough-path transport experiments")]
struct Cli {
    /// JSON or TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Debug)]
enum Command {
    /// fBm batch and covariance check
    SampleFbm,
    /// Geometric lift and Chen check
    Lift,
    /// Rough integral of a composed controlled path
    Integrate,
    /// Forward flow field
    Flow,
    /// Inverse flow composition defect
    Inverse,
    /// Transport solution snapshots
    Transport,
    /// Weak residual over the test-function suite
    WeakResidual,
    /// Integration-by-parts check for the local-time functional
    Ibp,
    /// Moments of the local-time functional
    Moments,
    /// Girsanov reweighting check
    Girsanov,
    /// Permanent recursion, expansion and envelope checks
    Permanent,
    /// Every experiment above
    All,
    /// Cross product over the `sweep` table of the config
    Sweep {
        /// Experiment to sweep.
        subcommand: String,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Sweep { subcommand } => subcommand.clone(),
            other => {
                let dbg = format!("{other:?}");
                let mut out = String::new();
                for (i, c) in dbg.chars().enumerate() {
                    if c.is_ascii_uppercase() && i > 0 {
                        out.push('-');
                    }
                    out.push(c.to_ascii_lowercase());
                }
                out
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    cfg.validate()?;
    let name = cli.command.name();
    if let Command::Sweep { .. } = cli.command {
        let rep = sweep(&name, &cfg)?;
        std::fs::create_dir_all(&cfg.out)?;
        roughflow::io::write_json(std::fs::File::create(cfg.out.join("sweep.json"))?, &rep)?;
        if cli.json {
            println!("{}", serde_json::to_string_pretty(&rep)?);
        } else {
            for r in &rep.rows {
                println!("{} {:?} {:?}", if r.pass { "PASS" } else { "FAIL" }, r.params, r.failing);
            }
            println!("{} rows in {:.1}s", rep.rows.len(), rep.wall_clock_s);
        }
        return Ok(rep.passed());
    }
    let rep = run(&name, &cfg)?;
    std::fs::create_dir_all(&cfg.out)?;
    roughflow::io::write_json(std::fs::File::create(cfg.out.join(format!("{name}_report.json")))?, &rep)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        for c in &rep.checks {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        if !rep.passed() {
            eprintln!("failing checks: {}", rep.failing().join(", "));
        }
    }
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
