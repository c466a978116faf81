//! Library side of the `dcprox` command-line tool: instance generation,
//! single solves with reports, the benchmark harness and the check suite.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dcprox::checks::{run_suite_with, CheckResult, Level};
use dcprox::cones::psi_psd;
use dcprox::dca::{dca_solve, DcaConfig};
use dcprox::diagnostics::{reference_optimum, summarize, ConjugateH};
use dcprox::problems::{gen_synthetic, instance_to_json, read_instance, Kind, ProgramVisitor, Provenance, Variant};
use dcprox::ProblemInstanceF64;

use report::{BenchRow, ConfigEcho, DiagnosticsBlock, InstanceDescriptor, ReferenceSource, SolveReport, Status};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dcprox::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const SOLVER: i32 = 2;
    pub const INVARIANT: i32 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json(_) | CliError::Csv(_) => exit::USAGE,
            CliError::Core(dcprox::Error::InvalidInput(_) | dcprox::Error::Io { .. } | dcprox::Error::Json(_)) => {
                exit::USAGE
            }
            CliError::Core(_) => exit::SOLVER,
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Instance file contents for a synthetic instance.
pub fn gen_json(kind: Kind, n: usize, seed: u64, cond: f64) -> CliResult<String> {
    let inst = gen_synthetic::<f64>(kind, n, seed, cond)?;
    Ok(instance_to_json(&inst, Some(&Provenance { n, seed, cond }))?)
}

pub fn cmd_gen(kind: Kind, n: usize, seed: u64, cond: f64, out: &Path) -> CliResult<()> {
    write_file(out, &gen_json(kind, n, seed, cond)?)
}

/// Solver settings shared by `solve` and `bench`.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub variant: Variant,
    pub outer_tol: f64,
    /// Final (floor) inner tolerance of the schedule.
    pub inner_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Run the reference solve for the diagnostics block; otherwise the
    /// best trace objective stands in for the optimum.
    pub reference: bool,
    pub check_invariants: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        let d = DcaConfig::<f64>::default();
        Self {
            variant: Variant::Bregman,
            outer_tol: d.outer_tol,
            inner_tol: d.inner_tol_floor,
            max_outer: d.max_outer,
            max_inner: d.inner.max_iters,
            reference: true,
            check_invariants: false,
        }
    }
}

impl SolveOptions {
    pub fn dca_config(&self) -> CliResult<DcaConfig<f64>> {
        if !(self.outer_tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(CliError::Usage("iteration caps must be positive".into()));
        }
        let mut cfg = DcaConfig::<f64> { outer_tol: self.outer_tol, max_outer: self.max_outer, ..Default::default() };
        cfg.inner_tol_floor = self.inner_tol;
        cfg.inner_tol_start = cfg.inner_tol_start.max(self.inner_tol);
        cfg.inner.max_iters = self.max_inner;
        cfg.inner.check_invariants = self.check_invariants;
        Ok(cfg)
    }
}

struct SolveVisitor<'a> {
    cfg: &'a DcaConfig<f64>,
    reference: bool,
}

impl ProgramVisitor<f64> for SolveVisitor<'_> {
    type Output = dcprox::Result<(dcprox::DcaTraceF64, DiagnosticsBlock)>;

    fn visit<P: ConjugateH<f64> + Sync>(self, prog: &P) -> Self::Output {
        let trace = dca_solve(prog, self.cfg)?;
        let (source, f_ref) = if self.reference {
            let r = reference_optimum(prog, self.cfg)?;
            (ReferenceSource::ReferenceSolve, r.final_objective())
        } else {
            (ReferenceSource::Trace, f64::INFINITY)
        };
        let diag = DiagnosticsBlock::new(source, summarize(prog, &trace, f_ref));
        Ok((trace, diag))
    }
}

pub fn solve_instance(
    inst: &ProblemInstanceF64,
    descriptor: InstanceDescriptor,
    opts: &SolveOptions,
) -> CliResult<SolveReport> {
    let cfg = opts.dca_config()?;
    let (trace, diag) = inst.visit(opts.variant, SolveVisitor { cfg: &cfg, reference: opts.reference })??;
    Ok(SolveReport::from_trace(descriptor, ConfigEcho::new(opts.variant, &cfg), &trace, Some(diag)))
}

/// Where `solve` gets its instance.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    File(PathBuf),
    Synthetic { kind: Kind, n: usize, seed: u64, cond: f64 },
}

pub fn load_instance(source: &InstanceSource) -> CliResult<(ProblemInstanceF64, InstanceDescriptor)> {
    match source {
        InstanceSource::File(path) => {
            let (inst, prov) = read_instance::<f64>(path)?;
            let descriptor = InstanceDescriptor {
                kind: inst.kind(),
                n: inst.dim(),
                seed: prov.map(|p| p.seed),
                cond: prov.map(|p| p.cond),
            };
            Ok((inst, descriptor))
        }
        &InstanceSource::Synthetic { kind, n, seed, cond } => {
            let inst = gen_synthetic(kind, n, seed, cond)?;
            Ok((inst, InstanceDescriptor { kind, n, seed: Some(seed), cond: Some(cond) }))
        }
    }
}

/// Solves, writes the report and returns it with the exit code its status
/// implies.
pub fn cmd_solve(source: &InstanceSource, opts: &SolveOptions, out: &Path) -> CliResult<(SolveReport, i32)> {
    let (inst, descriptor) = load_instance(source)?;
    let report = solve_instance(&inst, descriptor, opts)?;
    write_file(out, &report.to_json()?)?;
    let code = if report.status == Status::Converged { exit::OK } else { exit::SOLVER };
    Ok((report, code))
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub kinds: Vec<Kind>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
    pub cond: f64,
}

/// Report file name of one benchmark run.
pub fn run_file_name(kind: Kind, n: usize, seed: u64, variant: Variant) -> String {
    format!("{kind}_n{n}_seed{seed}_{variant}.json")
}

/// Runs every `(kind, n, seed, variant)` cell, in parallel across cells,
/// and aggregates one row per `(kind, n, variant)`. A run that errors is
/// recorded as failed; the others still run.
pub fn run_bench(plan: &BenchPlan, opts: &SolveOptions, reports_dir: Option<&Path>) -> CliResult<Vec<BenchRow>> {
    if plan.seeds.is_empty() {
        return Err(CliError::Usage("the seed list is empty".into()));
    }
    if plan.kinds.is_empty() || plan.sizes.is_empty() || plan.variants.is_empty() {
        return Err(CliError::Usage("kinds, sizes and solvers must be nonempty".into()));
    }
    opts.dca_config()?;
    let mut cells = Vec::new();
    for &kind in &plan.kinds {
        for &n in &plan.sizes {
            for &variant in &plan.variants {
                for &seed in &plan.seeds {
                    cells.push((kind, n, variant, seed));
                }
            }
        }
    }
    let runs: Vec<Option<SolveReport>> = cells
        .par_iter()
        .map(|&(kind, n, variant, seed)| {
            let source = InstanceSource::Synthetic { kind, n, seed, cond: plan.cond };
            let opts = SolveOptions { variant, ..opts.clone() };
            let report = load_instance(&source).and_then(|(inst, d)| solve_instance(&inst, d, &opts)).ok()?;
            if let Some(dir) = reports_dir {
                let text = report.to_json().ok()?;
                write_file(&dir.join(run_file_name(kind, n, seed, variant)), &text).ok()?;
            }
            Some(report)
        })
        .collect();
    let rows = runs
        .chunks(plan.seeds.len())
        .zip(cells.chunks(plan.seeds.len()))
        .map(|(chunk, cell)| {
            let (kind, n, variant, _) = cell[0];
            BenchRow::aggregate(kind, n, variant, chunk)
        })
        .collect();
    Ok(rows)
}

pub fn cmd_bench(
    plan: &BenchPlan,
    opts: &SolveOptions,
    out_csv: &Path,
    reports_dir: Option<&Path>,
) -> CliResult<Vec<BenchRow>> {
    let rows = run_bench(plan, opts, reports_dir)?;
    let mut buf = Vec::new();
    report::write_csv(&rows, &mut buf)?;
    write_file(out_csv, &String::from_utf8(buf).expect("csv output is UTF-8"))?;
    Ok(rows)
}

/// Runs the invariant suite. `corrupt_psi` swaps in a deliberately wrong
/// PSD prox eigenvalue map to confirm the oracles catch it.
pub fn cmd_check(level: Level, corrupt_psi: bool) -> Vec<CheckResult> {
    if corrupt_psi {
        run_suite_with(level, |g| psi_psd(g) * 1.01)
    } else {
        run_suite_with(level, psi_psd)
    }
}

/// Parses `1..5` (inclusive), `1,3,7` or a mix such as `1..3,9`.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Usage(format!("bad seed list entry '{part}'"));
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Usage("the seed list is empty".into()));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("3, 1,2..3").unwrap(), vec![3, 1, 2, 3]);
        assert!(matches!(parse_seeds(""), Err(CliError::Usage(_))));
        assert!(matches!(parse_seeds("5..1"), Err(CliError::Usage(_))));
        assert!(matches!(parse_seeds("x"), Err(CliError::Usage(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), exit::USAGE);
        assert_eq!(CliError::Core(dcprox::Error::InvalidInput("x".into())).exit_code(), exit::USAGE);
        assert_eq!(CliError::Core(dcprox::Error::NotPd).exit_code(), exit::SOLVER);
    }
}
