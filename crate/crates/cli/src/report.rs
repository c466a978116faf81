//! Solve reports (JSON) and benchmark summaries (CSV).

use std::io::Write;

use serde::{Deserialize, Serialize};

use dcprox::dca::{DcaConfig, DcaStatus};
use dcprox::diagnostics::DiagnosticsSummary;
use dcprox::problems::{Kind, Variant};
use dcprox::DcaTraceF64;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDescriptor {
    pub kind: Kind,
    pub n: usize,
    pub seed: Option<u64>,
    pub cond: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigEcho {
    pub solver: Variant,
    pub outer_tol: f64,
    pub inner_tol_start: f64,
    pub inner_tol_floor: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl ConfigEcho {
    pub fn new(solver: Variant, cfg: &DcaConfig<f64>) -> Self {
        Self {
            solver,
            outer_tol: cfg.outer_tol,
            inner_tol_start: cfg.inner_tol_start,
            inner_tol_floor: cfg.inner_tol_floor,
            max_outer: cfg.max_outer,
            max_inner: cfg.inner.max_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRow {
    pub k: usize,
    pub objective: f64,
    pub inner_iters: usize,
    pub inner_residual: f64,
    pub inner_tol: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Totals {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counters {
    pub restarts: usize,
    pub resolves: usize,
    pub sign_violations: usize,
    pub operand_failures: usize,
    pub descent_violations: usize,
    pub feasibility_violations: usize,
}

/// Where the reference optimum of the diagnostics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// A separate solve with outer tolerance `1e−12` and 10× caps.
    ReferenceSolve,
    /// The best objective in the trace itself.
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    pub reference: ReferenceSource,
    pub f_star_hat: f64,
    pub mu_hat: Option<f64>,
    pub rate_bound: Option<f64>,
    pub rho_hat: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub identity_max_error: Option<f64>,
}

impl DiagnosticsBlock {
    pub fn new(reference: ReferenceSource, d: DiagnosticsSummary) -> Self {
        Self {
            reference,
            f_star_hat: d.f_star_hat,
            mu_hat: d.mu_hat,
            rate_bound: d.rate_bound,
            rho_hat: d.rho_hat,
            kkt_residual: d.kkt_residual,
            identity_max_error: d.identity_max_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Flagged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub schema_version: u32,
    pub instance: InstanceDescriptor,
    pub config: ConfigEcho,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: Vec<IterationRow>,
    pub totals: Totals,
    pub counters: Counters,
    pub diagnostics: Option<DiagnosticsBlock>,
    pub status: Status,
    pub status_reason: Option<String>,
}

fn millis(d: std::time::Duration) -> u64 {
    (d.as_secs_f64() * 1e3).round() as u64
}

impl SolveReport {
    pub fn from_trace(
        instance: InstanceDescriptor,
        config: ConfigEcho,
        trace: &DcaTraceF64,
        diagnostics: Option<DiagnosticsBlock>,
    ) -> Self {
        let iterations: Vec<IterationRow> = (0..trace.outer_iters())
            .map(|k| IterationRow {
                k: k + 1,
                objective: trace.objectives[k + 1],
                inner_iters: trace.inner_iters[k],
                inner_residual: trace.inner_residuals[k],
                inner_tol: trace.inner_tols[k],
                wall_ms: millis(trace.wall_times[k]),
            })
            .collect();
        let totals = Totals {
            outer_iters: iterations.len(),
            inner_iters: iterations.iter().map(|r| r.inner_iters).sum(),
            wall_ms: iterations.iter().map(|r| r.wall_ms).sum(),
        };
        let (status, status_reason) = match &trace.status {
            DcaStatus::Converged => (Status::Converged, None),
            DcaStatus::MaxIters => (Status::MaxIters, None),
            DcaStatus::Flagged(r) => (Status::Flagged, Some(r.clone())),
            DcaStatus::Failed(r) => (Status::Failed, Some(r.clone())),
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            instance,
            config,
            initial_objective: trace.objectives[0],
            final_objective: trace.final_objective(),
            iterations,
            totals,
            counters: Counters {
                restarts: trace.restarts,
                resolves: trace.resolves,
                sign_violations: trace.sign_violations,
                operand_failures: trace.operand_failures,
                descent_violations: trace.descent_violations,
                feasibility_violations: trace.feasibility_violations,
            },
            diagnostics,
            status,
            status_reason,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Mean inner iterations per DCA step.
    pub fn inner_per_outer(&self) -> f64 {
        if self.totals.outer_iters == 0 {
            0.0
        } else {
            self.totals.inner_iters as f64 / self.totals.outer_iters as f64
        }
    }
}

/// Header of the benchmark CSV.
pub const CSV_COLUMNS: [&str; 10] = [
    "kind",
    "n",
    "variant",
    "avg_dca_iters",
    "avg_inner_iters",
    "avg_runtime_s",
    "avg_runtime_per_dca_iter_s",
    "avg_final_obj",
    "n_seeds",
    "n_failed",
];

/// One benchmark cell: a `(kind, n, variant)` triple over the seed list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub kind: Kind,
    pub n: usize,
    pub variant: Variant,
    /// `None` when no seed produced a trace.
    pub avg_dca_iters: Option<f64>,
    /// Inner iterations per DCA step, averaged over seeds.
    pub avg_inner_iters: Option<f64>,
    pub avg_runtime_s: Option<f64>,
    pub avg_runtime_per_dca_iter_s: Option<f64>,
    pub avg_final_obj: Option<f64>,
    pub n_seeds: usize,
    /// Seeds that did not end `Converged`, including runs that errored
    /// before producing a report.
    pub n_failed: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

impl BenchRow {
    /// Aggregates one cell. `runs` holds one entry per declared seed; a
    /// run that errored is `None`. Averages cover every run that produced a
    /// report, whatever its status.
    pub fn aggregate(kind: Kind, n: usize, variant: Variant, runs: &[Option<SolveReport>]) -> Self {
        let done: Vec<&SolveReport> = runs.iter().flatten().collect();
        let secs = |r: &SolveReport| r.totals.wall_ms as f64 / 1e3;
        Self {
            kind,
            n,
            variant,
            avg_dca_iters: mean(done.iter().map(|r| r.totals.outer_iters as f64)),
            avg_inner_iters: mean(done.iter().map(|r| r.inner_per_outer())),
            avg_runtime_s: mean(done.iter().map(|r| secs(r))),
            avg_runtime_per_dca_iter_s: mean(
                done.iter().filter(|r| r.totals.outer_iters > 0).map(|r| secs(r) / r.totals.outer_iters as f64),
            ),
            avg_final_obj: mean(done.iter().map(|r| r.final_objective)),
            n_seeds: runs.len(),
            n_failed: runs.iter().filter(|r| r.as_ref().is_none_or(|r| r.status != Status::Converged)).count(),
        }
    }

    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>, prec: Option<usize>| match (x, prec) {
            (None, _) => String::new(),
            (Some(v), Some(p)) => format!("{v:.p$}"),
            (Some(v), None) => format!("{v}"),
        };
        vec![
            self.kind.to_string(),
            self.n.to_string(),
            self.variant.to_string(),
            opt(self.avg_dca_iters, None),
            opt(self.avg_inner_iters, None),
            opt(self.avg_runtime_s, Some(3)),
            opt(self.avg_runtime_per_dca_iter_s, Some(3)),
            opt(self.avg_final_obj, None),
            self.n_seeds.to_string(),
            self.n_failed.to_string(),
        ]
    }
}

/// Writes the summary; empty cells mark aggregates with no completed run.
pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}
