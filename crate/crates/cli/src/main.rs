use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dcprox::checks::Level;
use dcprox::problems::{Kind, Variant, DEFAULT_COND};
use dcprox_cli::{
    cmd_bench, cmd_check, cmd_gen, cmd_solve, exit, parse_seeds, BenchPlan, CliError, CliResult, InstanceSource,
    SolveOptions,
};

#[derive(Parser)]
#[command(name = "dcprox", version, about = "DCA with Bregman PDHG inner solvers for log-det matrix programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic instance as JSON.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_COND)]
        cond: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance and write a JSON report.
    Solve {
        /// Instance file; alternatively give --kind, --n and --seed.
        #[arg(long, conflicts_with_all = ["kind", "n", "seed"])]
        instance: Option<PathBuf>,
        #[arg(long, value_parser = parse_kind, requires_all = ["n", "seed"])]
        kind: Option<Kind>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_COND)]
        cond: f64,
        #[arg(long, value_parser = parse_variant, default_value = "bregman")]
        solver: Variant,
        #[command(flatten)]
        tol: TolArgs,
        /// Skip the reference solve behind the rate diagnostics.
        #[arg(long)]
        no_reference: bool,
        /// Check dual sign patterns at every inner iteration.
        #[arg(long)]
        check_invariants: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seed sweep and write the summary CSV plus per-run reports.
    Bench {
        /// Comma-separated problem kinds.
        #[arg(long, value_parser = parse_kind, value_delimiter = ',', required = true)]
        kind: Vec<Kind>,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Seeds such as `1..10` or `1,4,9`.
        #[arg(long)]
        seeds: String,
        #[arg(long, value_parser = parse_variant, value_delimiter = ',', default_value = "bregman,euclidean")]
        solver: Vec<Variant>,
        #[arg(long, default_value_t = DEFAULT_COND)]
        cond: f64,
        #[command(flatten)]
        tol: TolArgs,
        /// Directory for the per-run reports; defaults to `<out stem>_runs`
        /// next to the CSV.
        #[arg(long)]
        reports_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suites.
    Check {
        #[arg(long, value_enum, default_value = "fast")]
        level: CheckLevel,
        /// Also write the results as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_psi: bool,
    },
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, default_value_t = 1e-8)]
    outer_tol: f64,
    /// Final inner tolerance of the tightening schedule.
    #[arg(long, default_value_t = 1e-8)]
    inner_tol: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    #[arg(long, default_value_t = 20_000)]
    max_inner: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckLevel {
    Fast,
    Full,
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    s.parse().map_err(|e: dcprox::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: dcprox::Error| e.to_string())
}

fn options(tol: &TolArgs, variant: Variant) -> SolveOptions {
    SolveOptions {
        variant,
        outer_tol: tol.outer_tol,
        inner_tol: tol.inner_tol,
        max_outer: tol.max_outer,
        max_inner: tol.max_inner,
        ..SolveOptions::default()
    }
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("DCPROX_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("DCPROX_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<i32> {
    configure_threads()?;
    match cli.command {
        Command::Gen { kind, n, seed, cond, out } => {
            cmd_gen(kind, n, seed, cond, &out)?;
            Ok(exit::OK)
        }
        Command::Solve { instance, kind, n, seed, cond, solver, tol, no_reference, check_invariants, out } => {
            let source = match (instance, kind, n, seed) {
                (Some(path), ..) => InstanceSource::File(path),
                (None, Some(kind), Some(n), Some(seed)) => InstanceSource::Synthetic { kind, n, seed, cond },
                _ => return Err(CliError::Usage("give --instance or all of --kind, --n, --seed".into())),
            };
            let opts = SolveOptions { reference: !no_reference, check_invariants, ..options(&tol, solver) };
            let (report, code) = cmd_solve(&source, &opts, &out)?;
            eprintln!(
                "{} n={} {}: {:?} after {} outer / {} inner iterations, f = {}",
                report.instance.kind,
                report.instance.n,
                report.config.solver,
                report.status,
                report.totals.outer_iters,
                report.totals.inner_iters,
                report.final_objective
            );
            Ok(code)
        }
        Command::Bench { kind, n, seeds, solver, cond, tol, reports_dir, out } => {
            let plan = BenchPlan { kinds: kind, sizes: n, seeds: parse_seeds(&seeds)?, variants: solver, cond };
            let opts = SolveOptions { reference: false, ..options(&tol, Variant::Bregman) };
            let reports_dir = reports_dir.unwrap_or_else(|| {
                let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                out.with_file_name(format!("{stem}_runs"))
            });
            let rows = cmd_bench(&plan, &opts, &out, Some(&reports_dir))?;
            let failed: usize = rows.iter().map(|r| r.n_failed).sum();
            Ok(if failed == 0 { exit::OK } else { exit::SOLVER })
        }
        Command::Check { level, out, corrupt_psi } => {
            let level = match level {
                CheckLevel::Fast => Level::Fast,
                CheckLevel::Full => Level::Full,
            };
            let results = cmd_check(level, corrupt_psi);
            for r in &results {
                let verdict = if r.passed { "ok  " } else { "FAIL" };
                println!(
                    "{verdict} {:<32} worst {:.3e} (limit {:.0e}, {} trials)",
                    r.name, r.worst, r.threshold, r.trials
                );
                if !r.passed {
                    println!("     {}", r.detail);
                }
            }
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&results)? + "\n";
                std::fs::write(&path, text)
                    .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            }
            Ok(if results.iter().all(|r| r.passed) { exit::OK } else { exit::INVARIANT })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
