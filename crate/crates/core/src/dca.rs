//! DCA outer loop: linearize `h` at the current point, solve the convex
//! surrogate with PDHG, repeat.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cones::{prox_conj_indicator, CapSet, KernelSpec, Projector};
use crate::error::{Error, Result};
use crate::pdhg::{
    blocks_inner, blocks_norm, blocks_sub, pdhg_solve, stepsize_for, Blocks, LinearMapSpec, PdhgConfig, PdhgState,
    Subproblem,
};
use crate::scalar::Real;
use crate::symmat::SymMat;

/// A difference-of-convex program `min_{x ∈ C} g(x) − h(x)` over tuples of
/// symmetric matrices.
pub trait DcProgram<T: Real> {
    type Sub: Subproblem<T>;

    fn eval_g(&self, x: &[SymMat<T>]) -> Result<T>;
    fn eval_h(&self, x: &[SymMat<T>]) -> Result<T>;
    fn grad_g(&self, x: &[SymMat<T>]) -> Result<Blocks<T>>;
    fn grad_h(&self, x: &[SymMat<T>]) -> Result<Blocks<T>>;

    /// Convex surrogate at the linearization point `x_k`.
    fn build_subproblem(&self, x_k: &[SymMat<T>]) -> Result<Self::Sub>;

    fn feasible_start(&self) -> Blocks<T>;

    /// Membership in `C` up to an eigenvalue tolerance.
    fn is_feasible(&self, x: &[SymMat<T>], tol: T) -> bool;

    /// Cheap projection of a nearly feasible point towards `C` (exact
    /// membership is not required; the caller finishes along a segment to
    /// the feasible start).
    fn repair(&self, x: Blocks<T>) -> Result<Blocks<T>> {
        Ok(x)
    }

    /// Subproblem variables corresponding to a program point.
    fn point_to_primal(&self, x: &[SymMat<T>]) -> Blocks<T> {
        x.to_vec()
    }

    /// Program point corresponding to subproblem variables.
    fn primal_to_point(&self, u: &[SymMat<T>]) -> Blocks<T> {
        u.to_vec()
    }

    /// Problem-specific status flag on a final point (e.g. a recovered
    /// variable that is only approximately feasible).
    fn flag(&self, _x: &[SymMat<T>]) -> Option<String> {
        None
    }

    fn objective(&self, x: &[SymMat<T>]) -> Result<T> {
        Ok(self.eval_g(x)? - self.eval_h(x)?)
    }

    /// `d_g(x, y) = g(x) − g(y) − ⟨∇g(y), x − y⟩`.
    fn bregman_g(&self, x: &[SymMat<T>], y: &[SymMat<T>]) -> Result<T> {
        Ok(self.eval_g(x)? - self.eval_g(y)? - blocks_inner(&self.grad_g(y)?, &blocks_sub(x, y))?)
    }

    /// `d_h(x, y) = h(x) − h(y) − ⟨∇h(y), x − y⟩`.
    fn bregman_h(&self, x: &[SymMat<T>], y: &[SymMat<T>]) -> Result<T> {
        Ok(self.eval_h(x)? - self.eval_h(y)? - blocks_inner(&self.grad_h(y)?, &blocks_sub(x, y))?)
    }
}

/// `g(u) − h(x_k) − ⟨∇h(x_k), u − x_k⟩`, a global majorant of `f` that is
/// tight at `x_k`.
pub fn linearized_objective<T: Real, P: DcProgram<T> + ?Sized>(
    prog: &P,
    x_k: &[SymMat<T>],
    u: &[SymMat<T>],
) -> Result<T> {
    Ok(prog.eval_g(u)? - prog.eval_h(x_k)? - blocks_inner(&prog.grad_h(x_k)?, &blocks_sub(u, x_k))?)
}

#[derive(Debug, Clone)]
pub struct DcaConfig<T: Real> {
    pub outer_tol: T,
    pub max_outer: usize,
    /// Template for the inner solver. `tol` is overwritten by the schedule;
    /// `tau`/`sigma` are used only when `auto_stepsize` is false.
    pub inner: PdhgConfig<T>,
    pub auto_stepsize: bool,
    pub inner_tol_start: T,
    pub inner_tol_floor: T,
    pub inner_tol_factor: T,
    /// Re-solves at 0.1× tolerance allowed when the descent or feasibility
    /// check fails.
    pub max_resolves: usize,
    /// Eigenvalue tolerance for accepting an iterate as feasible (further
    /// capped by the scheduled inner tolerance over the multiplier size).
    pub feas_tol: T,
}

impl<T: Real> Default for DcaConfig<T> {
    fn default() -> Self {
        Self {
            outer_tol: T::lit(1e-8),
            max_outer: 100,
            inner: PdhgConfig::default(),
            auto_stepsize: true,
            inner_tol_start: T::lit(1e-4),
            inner_tol_floor: T::lit(1e-8),
            inner_tol_factor: T::lit(0.2),
            max_resolves: 4,
            feas_tol: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum DcaStatus {
    Converged,
    MaxIters,
    Flagged(String),
    Failed(String),
}

/// Record of one DCA run. `iterates[0]` is the starting point; entry `k` of
/// the per-step vectors describes the step `x_k → x_{k+1}`.
#[derive(Debug, Clone)]
pub struct DcaTrace<T: Real> {
    pub iterates: Vec<Blocks<T>>,
    pub objectives: Vec<T>,
    pub inner_iters: Vec<usize>,
    pub inner_residuals: Vec<T>,
    /// Inner tolerance the accepted step was solved to (after re-solves).
    pub inner_tols: Vec<T>,
    /// Scheduled inner tolerance of each step.
    pub scheduled_tols: Vec<T>,
    pub wall_times: Vec<Duration>,
    pub restarts: usize,
    pub resolves: usize,
    pub sign_violations: usize,
    pub operand_failures: usize,
    /// Accepted steps whose sufficient-decrease margin still failed after
    /// re-solves (steps that would increase `f` are dropped instead).
    pub descent_violations: usize,
    /// Steps accepted although the iterate was outside the feasible set by
    /// more than `feas_tol`.
    pub feasibility_violations: usize,
    pub status: DcaStatus,
    /// Final PDHG iterate, for KKT diagnostics on the last subproblem.
    pub last_inner: Option<PdhgState<T>>,
}

impl<T: Real> DcaTrace<T> {
    pub fn outer_iters(&self) -> usize {
        self.inner_iters.len()
    }

    pub fn final_point(&self) -> &Blocks<T> {
        self.iterates.last().expect("trace holds the starting point")
    }

    pub fn final_objective(&self) -> T {
        *self.objectives.last().expect("trace holds the starting objective")
    }

    pub fn total_inner_iters(&self) -> usize {
        self.inner_iters.iter().sum()
    }

    pub fn total_time(&self) -> Duration {
        self.wall_times.iter().sum()
    }
}

/// Slack-adjusted sufficient-decrease margin
/// `f_k − f_{k+1} − d_h(x_{k+1}, x_k) − d_g(x_k, x_{k+1})`; nonnegative for an
/// exact subproblem solution.
pub fn descent_margin<T: Real, P: DcProgram<T> + ?Sized>(
    prog: &P,
    x_k: &[SymMat<T>],
    f_k: T,
    x_next: &[SymMat<T>],
    f_next: T,
) -> Result<T> {
    Ok(f_k - f_next - prog.bregman_h(x_next, x_k)? - prog.bregman_g(x_k, x_next)?)
}

/// Moves an inexact subproblem solution onto the feasible set: the
/// program's own repair first, then along the segment towards the strictly
/// feasible `interior` with the smallest step found to about three digits. Objective values of slightly infeasible
/// points can undercut the optimum, which later steps would have to climb
/// back out of.
fn pull_inside<T: Real, P: DcProgram<T> + ?Sized>(prog: &P, interior: &[SymMat<T>], x: Blocks<T>) -> Blocks<T> {
    if prog.is_feasible(&x, T::zero()) {
        return x;
    }
    let x = match prog.repair(x.clone()) {
        Ok(r) if prog.is_feasible(&r, T::zero()) => return r,
        Ok(r) => r,
        Err(_) => x,
    };
    let blend =
        |t: T| -> Blocks<T> { x.iter().zip(interior).map(|(xi, ci)| xi.scale(T::one() - t).axpy(t, ci)).collect() };
    let ten = T::lit(10.0);
    let mut hi = T::lit(1e-12);
    while hi < T::one() && !prog.is_feasible(&blend(hi), T::zero()) {
        hi *= ten;
    }
    if hi >= T::one() {
        return interior.to_vec();
    }
    let mut lo = hi / ten;
    for _ in 0..10 {
        let mid = (lo + hi) * T::lit(0.5);
        if prog.is_feasible(&blend(mid), T::zero()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    blend(hi)
}

pub fn dca_solve<T: Real, P: DcProgram<T> + ?Sized>(prog: &P, config: &DcaConfig<T>) -> Result<DcaTrace<T>> {
    if !(config.outer_tol > T::zero()) {
        return Err(Error::invalid("outer_tol must be positive"));
    }
    let x0 = prog.feasible_start();
    let interior = x0.clone();
    let f0 = prog.objective(&x0)?;
    if !f0.is_finite() {
        return Err(Error::invalid("objective is not finite at the starting point"));
    }
    let mut trace = DcaTrace {
        iterates: vec![x0.clone()],
        objectives: vec![f0],
        inner_iters: Vec::new(),
        inner_residuals: Vec::new(),
        inner_tols: Vec::new(),
        scheduled_tols: Vec::new(),
        wall_times: Vec::new(),
        restarts: 0,
        resolves: 0,
        sign_violations: 0,
        operand_failures: 0,
        descent_violations: 0,
        feasibility_violations: 0,
        status: DcaStatus::MaxIters,
        last_inner: None,
    };

    let (mut x, mut f) = (x0, f0);
    let mut warm: Option<PdhgState<T>> = None;
    let mut steps: Option<(T, T)> =
        if config.auto_stepsize { None } else { Some((config.inner.tau, config.inner.sigma)) };
    let mut eps = config.inner_tol_start.max(config.inner_tol_floor);
    let slack = T::lit(10.0);

    for _ in 0..config.max_outer {
        let started = Instant::now();
        let mut sub = prog.build_subproblem(&x)?;
        let (tau, sigma) = match steps {
            Some(s) => s,
            None => stepsize_for(&sub)?,
        };
        let mut start = match warm.take() {
            Some(w) => w,
            None => PdhgState::cold(prog.point_to_primal(&x), sub.map()),
        };
        let mut cfg = PdhgConfig { tau, sigma, tol: eps, ..config.inner.clone() };
        let mut iters = 0;
        let mut resolves = 0;
        let accepted = loop {
            let (state, stats) = match pdhg_solve(&mut sub, &cfg, Some(&start)) {
                Ok(r) => r,
                Err(e @ Error::NoConvergence { .. }) => {
                    trace.status = DcaStatus::Failed(e.to_string());
                    trace.wall_times.push(started.elapsed());
                    return Ok(trace);
                }
                Err(e) => return Err(e),
            };
            iters += stats.iters;
            trace.restarts += stats.restarts;
            trace.sign_violations += stats.sign_violations;
            trace.operand_failures += stats.operand_failures;
            cfg.tau = T::lit(stats.tau);
            cfg.sigma = T::lit(stats.sigma);
            // A raw solution far outside the set is re-solved; the small
            // violation left after that is removed before evaluating f.
            let raw = prog.primal_to_point(&state.u);
            let allowed = config.feas_tol.min(eps / (T::one() + blocks_norm(&state.v)));
            let feasible = prog.is_feasible(&raw, allowed);
            let x_next = pull_inside(prog, &interior, raw);
            let f_next = prog.objective(&x_next)?;
            let margin_ok = descent_margin(prog, &x, f, &x_next, f_next)? >= -slack * eps;
            let descent_ok = margin_ok && f_next <= f;
            if (descent_ok && feasible) || resolves >= config.max_resolves {
                if !(f_next <= f) {
                    // Exact steps never increase f; an inexact one that still
                    // does after the re-solves is dropped.
                    break (state, x.clone(), f);
                }
                trace.descent_violations += usize::from(!margin_ok);
                trace.feasibility_violations += usize::from(!feasible);
                break (state, x_next, f_next);
            }
            resolves += 1;
            cfg.tol = T::tol((cfg.tol * T::lit(0.1)).as_f64());
            start = state;
        };
        let (state, x_next, f_next) = accepted;
        trace.resolves += resolves;
        steps = Some((cfg.tau, cfg.sigma));

        let change = (f_next - f).abs() / T::one().max(f.abs());
        trace.inner_iters.push(iters);
        trace.inner_residuals.push(state.residual);
        trace.inner_tols.push(cfg.tol);
        trace.scheduled_tols.push(eps);
        trace.iterates.push(x_next.clone());
        trace.objectives.push(f_next);
        trace.wall_times.push(started.elapsed());
        trace.last_inner = Some(state.clone());
        warm = Some(state);
        x = x_next;
        f = f_next;

        // A small change only certifies stationarity once the subproblem was
        // solved to the final accuracy; otherwise confirm with one more step
        // at the floor.
        if change <= config.outer_tol {
            if eps <= config.inner_tol_floor {
                trace.status = DcaStatus::Converged;
                break;
            }
            eps = config.inner_tol_floor;
        } else {
            eps = config.inner_tol_floor.max(config.inner_tol_factor * eps);
        }
    }

    if let Some(reason) = prog.flag(trace.final_point()) {
        if trace.status == DcaStatus::Converged || trace.status == DcaStatus::MaxIters {
            trace.status = DcaStatus::Flagged(reason);
        }
    }
    Ok(trace)
}

/// One-dimensional DC program `min_{lo ≤ x ≤ hi} a·x² − (b·x + c·x²)` with
/// `a, c ≥ 0`, split as `C₁ = [lo, ∞)` and `C₂ = (−∞, hi]`. Small enough to
/// check by hand.
#[derive(Debug, Clone)]
pub struct IntervalDc<T: Real> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub lo: T,
    pub hi: T,
    pub start: T,
}

impl<T: Real> IntervalDc<T> {
    pub fn new(a: T, b: T, c: T, lo: T, hi: T, start: T) -> Result<Self> {
        if a < T::zero() || c < T::zero() || !(lo <= hi) || start < lo || start > hi {
            return Err(Error::invalid("interval program needs a, c ≥ 0 and lo ≤ start ≤ hi"));
        }
        Ok(Self { a, b, c, lo, hi, start })
    }

    fn h_slope(&self, x: T) -> T {
        self.b + T::lit(2.0) * self.c * x
    }
}

fn scalar_of<T: Real>(x: &[SymMat<T>]) -> T {
    x[0].get(0, 0)
}

impl<T: Real> DcProgram<T> for IntervalDc<T> {
    type Sub = IntervalSub<T>;

    fn eval_g(&self, x: &[SymMat<T>]) -> Result<T> {
        let x = scalar_of(x);
        Ok(self.a * x * x)
    }

    fn eval_h(&self, x: &[SymMat<T>]) -> Result<T> {
        let x = scalar_of(x);
        Ok(self.b * x + self.c * x * x)
    }

    fn grad_g(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![SymMat::scalar(T::lit(2.0) * self.a * scalar_of(x))])
    }

    fn grad_h(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![SymMat::scalar(self.h_slope(scalar_of(x)))])
    }

    fn build_subproblem(&self, x_k: &[SymMat<T>]) -> Result<IntervalSub<T>> {
        Ok(IntervalSub {
            a: self.a,
            slope: self.h_slope(scalar_of(x_k)),
            lo: self.lo,
            cap: CapSet { cap: SymMat::scalar(self.hi) },
            map: LinearMapSpec::identity(1),
        })
    }

    fn feasible_start(&self) -> Blocks<T> {
        vec![SymMat::scalar(self.start)]
    }

    fn is_feasible(&self, x: &[SymMat<T>], tol: T) -> bool {
        let x = scalar_of(x);
        x >= self.lo - tol && x <= self.hi + tol
    }

    fn repair(&self, x: Blocks<T>) -> Result<Blocks<T>> {
        Ok(vec![SymMat::scalar(scalar_of(&x).max(self.lo).min(self.hi))])
    }
}

/// Surrogate `a·u² − slope·u` of [`IntervalDc`].
#[derive(Debug, Clone)]
pub struct IntervalSub<T: Real> {
    a: T,
    slope: T,
    lo: T,
    cap: CapSet<T>,
    map: LinearMapSpec<T>,
}

impl<T: Real> Subproblem<T> for IntervalSub<T> {
    fn map(&self) -> &LinearMapSpec<T> {
        &self.map
    }

    fn primal_kernels(&self) -> Vec<KernelSpec<T>> {
        vec![KernelSpec::Euclidean]
    }

    fn primal_upper_bounds(&self) -> Blocks<T> {
        vec![self.cap.cap.clone()]
    }

    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>> {
        let inv_tau = T::one() / tau;
        let u = (scalar_of(u_prev) * inv_tau + self.slope - scalar_of(atv)) / (T::lit(2.0) * self.a + inv_tau);
        Ok(vec![SymMat::scalar(u.max(self.lo))])
    }

    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>> {
        Ok(vec![prox_conj_indicator(&z[0], sigma, &self.cap)?])
    }

    fn objective(&self, u: &[SymMat<T>]) -> Result<T> {
        let u = scalar_of(u);
        Ok(self.a * u * u - self.slope * u)
    }

    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![SymMat::scalar(T::lit(2.0) * self.a * scalar_of(u) - self.slope)])
    }

    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![SymMat::scalar(scalar_of(u).max(self.lo))])
    }

    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![self.cap.project(&w[0])?])
    }

    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool {
        let u = scalar_of(u);
        u >= self.lo - tol && u <= self.cap.cap.get(0, 0) + tol
    }

    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool {
        scalar_of(v) < -tol
    }

    fn initial_primal(&self) -> Blocks<T> {
        vec![SymMat::scalar(self.lo.max(T::zero()).min(self.cap.cap.get(0, 0)))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdhg::kkt_residual;
    use approx::assert_abs_diff_eq;

    fn run(prog: &IntervalDc<f64>) -> DcaTrace<f64> {
        dca_solve(prog, &DcaConfig::default()).unwrap()
    }

    #[test]
    fn linear_h_on_unit_interval() {
        // g = x², h = 4x on [0, 1]
        let prog = IntervalDc::new(1.0, 4.0, 0.0, 0.0, 1.0, 0.5).unwrap();
        let trace = run(&prog);
        assert_eq!(trace.status, DcaStatus::Converged);
        assert_abs_diff_eq!(trace.iterates[1][0].get(0, 0), 1.0, epsilon = 10.0 * trace.inner_tols[0]);
        assert_abs_diff_eq!(trace.final_point()[0].get(0, 0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(trace.final_objective(), -3.0, epsilon = 1e-6);
        let sub = prog.build_subproblem(&trace.iterates[trace.iterates.len() - 2]).unwrap();
        let st = trace.last_inner.as_ref().unwrap();
        // Active cap: the dual carries the multiplier 4 − 2·1 = 2.
        assert_abs_diff_eq!(st.v[0].get(0, 0), 2.0, epsilon = 1e-5);
        assert!(kkt_residual(&sub, st).unwrap() < 1e-6);
    }

    #[test]
    fn concave_objective_jumps_to_endpoint() {
        // g = 0, h = x² on [−1, 1] from 0.3
        let prog = IntervalDc::new(0.0, 0.0, 1.0, -1.0, 1.0, 0.3).unwrap();
        let trace = run(&prog);
        for x in &trace.iterates[1..] {
            assert_abs_diff_eq!(x[0].get(0, 0), 1.0, epsilon = 1e-5);
        }
        assert_abs_diff_eq!(trace.final_point()[0].get(0, 0), 1.0, epsilon = 1e-6);
        assert_eq!(trace.status, DcaStatus::Converged);
    }

    #[test]
    fn linearization_examples() {
        let prog = IntervalDc::new(0.0, 0.0, 1.0, -1.0, 1.0, 0.3).unwrap();
        let x_k = vec![SymMat::scalar(1.0)];
        let u = vec![SymMat::scalar(0.0)];
        assert_abs_diff_eq!(linearized_objective(&prog, &x_k, &u).unwrap(), 1.0);
        assert_abs_diff_eq!(linearized_objective(&prog, &x_k, &x_k).unwrap(), prog.objective(&x_k).unwrap());
        for i in 0..=20 {
            let u = vec![SymMat::scalar(-1.0 + 0.1 * i as f64)];
            assert!(linearized_objective(&prog, &x_k, &u).unwrap() >= prog.objective(&u).unwrap() - 1e-9);
        }
    }

    #[test]
    fn trace_is_monotone_and_feasible() {
        let prog = IntervalDc::new(0.5, 1.0, 2.0, -2.0, 3.0, 0.1).unwrap();
        let trace = run(&prog);
        for (k, w) in trace.objectives.windows(2).enumerate() {
            assert!(w[1] <= w[0] + 10.0 * trace.scheduled_tols[k]);
        }
        for x in &trace.iterates {
            assert!(prog.is_feasible(x, 1e-6));
        }
        assert_eq!(trace.inner_iters.len(), trace.iterates.len() - 1);
        assert_eq!(trace.wall_times.len(), trace.inner_iters.len());
    }

    #[test]
    fn inner_schedule_tightens_to_floor() {
        let prog = IntervalDc::new(0.5, 1.0, 2.0, -2.0, 3.0, 0.1).unwrap();
        let cfg = DcaConfig { outer_tol: 1e-300, max_outer: 12, ..DcaConfig::default() };
        let trace = dca_solve(&prog, &cfg).unwrap();
        // The boundary optimum is hit exactly, so this may stop as converged;
        // either way the schedule must have reached its floor.
        assert!(matches!(trace.status, DcaStatus::MaxIters | DcaStatus::Converged));
        assert_abs_diff_eq!(trace.scheduled_tols[0], 1e-4, epsilon = 1e-20);
        assert_abs_diff_eq!(trace.scheduled_tols[1], 2e-5, epsilon = 1e-20);
        assert_abs_diff_eq!(*trace.scheduled_tols.last().unwrap(), 1e-8, epsilon = 1e-20);
        for (used, planned) in trace.inner_tols.iter().zip(&trace.scheduled_tols) {
            assert!(used <= planned);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let prog = IntervalDc::new(1.0, 4.0, 0.0, 0.0, 1.0, 0.5).unwrap();
        let cfg = DcaConfig { outer_tol: 0.0, ..DcaConfig::default() };
        assert!(dca_solve(&prog, &cfg).is_err());
        assert!(IntervalDc::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.5).is_err());
    }
}
