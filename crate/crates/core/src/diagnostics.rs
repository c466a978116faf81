//! Empirical checks of the outer-loop theory: Bregman identities through
//! closed-form conjugates, the trajectory PL constant and the observed
//! linear rate.

use serde::Serialize;

use crate::dca::{dca_solve, DcProgram, DcaConfig, DcaStatus, DcaTrace};
use crate::error::{Error, Result};
use crate::pdhg::{blocks_inner, blocks_sub, kkt_residual as subproblem_kkt, PdhgState};
use crate::problems::{BcCommon, BcPrivate, BrascampLieb};
use crate::scalar::Real;
use crate::symmat::{frob_inner, inv_pd, logdet_pd, SymMat};

/// Conjugate of `h(X) = −λ log det(X + Σ)`:
/// `h*(Y) = −λn − ⟨Σ, Y⟩ + λ log det(−λY⁻¹)` for `Y ≺ 0`.
///
/// `λ = 0` is accepted as the conjugate of the zero function (zero at
/// `Y = 0`, infinite elsewhere).
pub fn conjugate_logdet<T: Real>(y: &SymMat<T>, sigma: &SymMat<T>, lam: T) -> Result<T> {
    if y.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), got: y.dim() });
    }
    if lam < T::zero() {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    if lam == T::zero() {
        return if y.max_abs() == T::zero() {
            Ok(T::zero())
        } else {
            Err(Error::OutOfDomain("conjugate of the zero function is finite only at 0".into()))
        };
    }
    let neg = -y;
    let logdet_neg = logdet_pd(&neg)
        .map_err(|_| Error::OutOfDomain("conjugate of −λ log det needs a negative definite argument".into()))?;
    let n = T::from_count(y.dim());
    Ok(-lam * n - frob_inner(sigma, y)? + lam * (n * lam.ln() - logdet_neg))
}

/// Programs whose `h` has a closed-form conjugate on the range of `∇h`.
pub trait ConjugateH<T: Real>: DcProgram<T> {
    /// `h*(∇h(x))`, evaluated through [`conjugate_logdet`] on the gradient
    /// pieces rather than through Fenchel–Young.
    fn h_conjugate_at_gradient(&self, x: &[SymMat<T>]) -> Result<T>;
}

impl<T: Real> ConjugateH<T> for BcPrivate<T> {
    fn h_conjugate_at_gradient(&self, x: &[SymMat<T>]) -> Result<T> {
        let inst = self.instance();
        conjugate_logdet(&self.grad_h(x)?[0], &inst.sigma2, inst.lambda)
    }
}

impl<T: Real> ConjugateH<T> for BcCommon<T> {
    /// With `h(X, Y) = k₁(X + Y) + k₂(X)` the conjugate splits as
    /// `k₁*(G_Y) + k₂*(G_X − G_Y)`.
    fn h_conjugate_at_gradient(&self, x: &[SymMat<T>]) -> Result<T> {
        let inst = self.instance();
        let g = self.grad_h(x)?;
        Ok(conjugate_logdet(&g[1], &inst.sigma1, inst.alpha)?
            + conjugate_logdet(&(&g[0] - &g[1]), &inst.sigma2, inst.lambda)?)
    }
}

impl<T: Real> ConjugateH<T> for BrascampLieb<T> {
    /// `h = Σ_j k_j(A_j X)` with `k_j(S) = −α_j log det(S + ρI)`; at a
    /// gradient point the infimal convolution defining `h*` is attained at
    /// `Y_j = ∇k_j(A_j X)`, so `h*(∇h(X)) = Σ_j k_j*(Y_j)`.
    fn h_conjugate_at_gradient(&self, x: &[SymMat<T>]) -> Result<T> {
        let inst = self.instance();
        let mut total = T::zero();
        for (j, &a) in inst.alpha.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let y = inv_pd(&inst.coupling(x, j))?.scale(-a);
            total += conjugate_logdet(&y, &SymMat::scaled_identity(inst.m[j], inst.rho), a)?;
        }
        Ok(total)
    }
}

/// `|d_{h*}(∇h(a), ∇h(b)) − d_h(b, a)|`, with the conjugate side evaluated
/// from closed forms and `b ∈ ∂h*(∇h(b))`.
pub fn check_bregman_identity<T: Real, P: ConjugateH<T> + ?Sized>(
    prog: &P,
    a: &[SymMat<T>],
    b: &[SymMat<T>],
) -> Result<T> {
    let ga = prog.grad_h(a)?;
    let gb = prog.grad_h(b)?;
    let conj =
        prog.h_conjugate_at_gradient(a)? - prog.h_conjugate_at_gradient(b)? - blocks_inner(b, &blocks_sub(&ga, &gb))?;
    Ok((conj - prog.bregman_h(b, a)?).abs())
}

/// Trajectory estimate of the PL constant and the per-step contraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlEstimate {
    /// `None` when every step lands on the reference optimum, which leaves
    /// the minimum over an empty set (an unbounded constant).
    pub mu_hat: Option<f64>,
    pub per_step_ratios: Vec<f64>,
    pub f_star_hat: f64,
    pub rate_bound: f64,
}

fn gap_guard(f_star: f64) -> f64 {
    1e-10 * (1.0 + f_star.abs())
}

/// PL estimate from objective values `f_0, …, f_K` and the step distances
/// `d_h(x_{k+1}, x_k)`, `k < K`.
pub fn pl_from_sequence(objectives: &[f64], dh: &[f64], f_star_hat: f64) -> Result<PlEstimate> {
    if objectives.len() != dh.len() + 1 {
        return Err(Error::invalid("need one Bregman distance per step"));
    }
    let guard = gap_guard(f_star_hat);
    let mut mu: Option<f64> = None;
    let mut ratios = Vec::new();
    for (k, &d) in dh.iter().enumerate() {
        let prev = objectives[k] - f_star_hat;
        let next = objectives[k + 1] - f_star_hat;
        if prev <= guard {
            continue;
        }
        ratios.push(next.max(0.0) / prev);
        if next > guard {
            let m = d.max(0.0) / next;
            mu = Some(mu.map_or(m, |cur: f64| cur.min(m)));
        }
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientData("no step starts above the reference optimum".into()));
    }
    let rate_bound = mu.map_or(0.0, |m| 1.0 / (1.0 + m));
    Ok(PlEstimate { mu_hat: mu, per_step_ratios: ratios, f_star_hat, rate_bound })
}

/// `μ̂ = min_k d_h(x_{k+1}, x_k) / (f(x_{k+1}) − f̂*)` along a DCA trace.
pub fn estimate_pl<T: Real, P: DcProgram<T> + ?Sized>(
    trace: &DcaTrace<T>,
    prog: &P,
    f_star_hat: f64,
) -> Result<PlEstimate> {
    if trace.iterates.len() < 2 {
        return Err(Error::InsufficientData("trace has no steps".into()));
    }
    let dh = trace
        .iterates
        .windows(2)
        .map(|w| prog.bregman_h(&w[1], &w[0]).map(|d| d.as_f64()))
        .collect::<Result<Vec<_>>>()?;
    let objectives: Vec<f64> = trace.objectives.iter().map(|f| f.as_f64()).collect();
    pl_from_sequence(&objectives, &dh, f_star_hat)
}

/// Observed geometric rate `ρ̂`: least-squares slope of `log(f_k − f̂*)`
/// over the last half of the points above the reference optimum.
pub fn fit_rate(objectives: &[f64], f_star_hat: f64) -> Result<f64> {
    let guard = gap_guard(f_star_hat);
    let logs: Vec<(f64, f64)> = objectives
        .iter()
        .enumerate()
        .filter(|(_, &f)| f - f_star_hat > guard)
        .map(|(k, &f)| (k as f64, (f - f_star_hat).ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} objective values above the reference optimum, need 3",
            logs.len()
        )));
    }
    let keep = (logs.len().div_ceil(2)).max(2);
    let tail = &logs[logs.len() - keep..];
    let m = tail.len() as f64;
    let kx = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let ly = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - kx) * (p.1 - ly)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - kx).powi(2)).sum();
    Ok((sxy / sxx).exp())
}

/// Optimality residual of the last DCA step: the natural KKT residual of
/// the final subproblem (built at `x_k`) at its final primal–dual iterate.
/// At a fixed point this measures `∇g(x) + ŷ − ∇h(x_k)` with `ŷ` the
/// multiplier carried by the dual iterate.
pub fn kkt_residual<T: Real, P: DcProgram<T> + ?Sized>(prog: &P, x_k: &[SymMat<T>], state: &PdhgState<T>) -> Result<T> {
    let sub = prog.build_subproblem(x_k)?;
    subproblem_kkt(&sub, state)
}

/// Reference optimum `f̂*`: the same program solved with outer tolerance
/// `1e−12`, a tighter inner floor and ten times the iteration caps.
pub fn reference_optimum<T: Real, P: DcProgram<T> + ?Sized>(prog: &P, base: &DcaConfig<T>) -> Result<DcaTrace<T>> {
    let mut cfg = base.clone();
    cfg.outer_tol = T::tol(1e-12);
    cfg.inner_tol_floor = T::tol(1e-10);
    cfg.max_outer = base.max_outer * 10;
    cfg.inner.max_iters = base.inner.max_iters * 10;
    dca_solve(prog, &cfg)
}

/// Diagnostics block of a solve report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub f_star_hat: f64,
    pub mu_hat: Option<f64>,
    pub rate_bound: Option<f64>,
    pub rho_hat: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub identity_max_error: Option<f64>,
}

/// Runs every diagnostic on a finished trace. `f_star_hat` is lowered to
/// the best objective in the trace if the reference solve ended above it.
pub fn summarize<T: Real, P: ConjugateH<T> + ?Sized>(
    prog: &P,
    trace: &DcaTrace<T>,
    reference: f64,
) -> DiagnosticsSummary {
    let best = trace.objectives.iter().map(|f| f.as_f64()).fold(f64::INFINITY, f64::min);
    let f_star_hat = reference.min(best);
    let pl = estimate_pl(trace, prog, f_star_hat).ok();
    let objectives: Vec<f64> = trace.objectives.iter().map(|f| f.as_f64()).collect();
    let rho_hat = fit_rate(&objectives, f_star_hat).ok();
    let kkt = match (&trace.last_inner, trace.iterates.len()) {
        (Some(state), len) if len >= 2 => kkt_residual(prog, &trace.iterates[len - 2], state).ok().map(|r| r.as_f64()),
        _ => None,
    };
    let identity_max_error = trace
        .iterates
        .windows(2)
        .map(|w| check_bregman_identity(prog, &w[1], &w[0]).map(|e| e.as_f64()))
        .collect::<Result<Vec<_>>>()
        .ok()
        .filter(|e| !e.is_empty())
        .map(|e| e.into_iter().fold(0.0, f64::max));
    DiagnosticsSummary {
        f_star_hat,
        mu_hat: pl.as_ref().and_then(|p| p.mu_hat),
        rate_bound: pl.as_ref().map(|p| p.rate_bound),
        rho_hat,
        kkt_residual: kkt,
        identity_max_error,
    }
}

/// True when the trace ended in a state whose diagnostics are meaningful.
pub fn is_converged<T: Real>(trace: &DcaTrace<T>) -> bool {
    trace.status == DcaStatus::Converged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dca::IntervalDc;
    use crate::problems::{
        bc_common_program, bc_private_program, gbl_program, BcCommonInstance, BcPrivateInstance, BrascampLiebInstance,
        Variant,
    };
    use crate::symmat::testutil::random_pd;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn s(x: f64) -> SymMat<f64> {
        SymMat::scalar(x)
    }

    #[test]
    fn scalar_conjugate_value() {
        assert!((conjugate_logdet(&s(-1.0), &s(1.0), 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn conjugate_matches_grid_supremum() {
        for &(y, sigma, lam) in &[(-1.0, 1.0, 1.0), (-0.5, 1.0, 2.0), (-3.0, 1.0, 1.5), (-2.0, 0.5, 0.7)] {
            let mut best = f64::NEG_INFINITY;
            let steps = 2_000_000;
            for k in 0..=steps {
                let x = -0.999 + (10.0 + 0.999) * k as f64 / steps as f64;
                if x + sigma <= 0.0 {
                    continue;
                }
                best = best.max(x * y + lam * (x + sigma).ln());
            }
            let closed = conjugate_logdet(&s(y), &s(sigma), lam).unwrap();
            assert!((closed - best).abs() < 1e-4, "{y} {sigma} {lam}: {closed} vs {best}");
        }
    }

    #[test]
    fn fenchel_young_equality() {
        let n = 2;
        let x = SymMat::identity(n);
        let sigma = SymMat::identity(n);
        let lam = 2.0;
        let h = -lam * logdet_pd(&(&x + &sigma)).unwrap();
        let grad = inv_pd(&(&x + &sigma)).unwrap().scale(-lam);
        let lhs = h + conjugate_logdet(&grad, &sigma, lam).unwrap();
        let lhs: f64 = lhs - frob_inner(&x, &grad).unwrap();
        assert!(lhs.abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let sigma = random_pd(&mut rng, n);
            let x = random_pd(&mut rng, n);
            let lam = rng.gen_range(0.1..3.0);
            let h = -lam * logdet_pd(&(&x + &sigma)).unwrap();
            let grad = inv_pd(&(&x + &sigma)).unwrap().scale(-lam);
            let gap = h + conjugate_logdet(&grad, &sigma, lam).unwrap() - frob_inner(&x, &grad).unwrap();
            assert!(gap.abs() <= 1e-9 * (1.0 + h.abs()), "n={n}: {gap}");
        }
    }

    #[test]
    fn conjugate_rejects_outside_domain() {
        assert!(matches!(conjugate_logdet(&s(0.5), &s(1.0), 1.0), Err(Error::OutOfDomain(_))));
        assert!(matches!(conjugate_logdet(&s(0.5), &s(1.0), 0.0), Err(Error::OutOfDomain(_))));
        assert_eq!(conjugate_logdet(&s(0.0), &s(1.0), 0.0).unwrap(), 0.0);
    }

    fn scalar_private(lambda: f64) -> BcPrivate<f64> {
        let inst = BcPrivateInstance::new(s(1.0), s(1.0), s(1.0), lambda).unwrap();
        bc_private_program(inst, Variant::Bregman).unwrap()
    }

    #[test]
    fn scalar_identity_example() {
        // h(x) = −2 log(x + 1), a = 0, b = 1.
        let prog = scalar_private(2.0);
        let (a, b) = (vec![s(0.0)], vec![s(1.0)]);
        let dh_ba = prog.bregman_h(&b, &a).unwrap();
        assert!((dh_ba - (2.0 - 2.0 * 2f64.ln())).abs() < 1e-14);
        assert!(check_bregman_identity(&prog, &a, &b).unwrap() < 1e-14);
        // The reverse orientation pairs d_{h*}(∇h(b), ∇h(a)) with d_h(a, b).
        let dh_ab = prog.bregman_h(&a, &b).unwrap();
        assert!((dh_ab - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!(check_bregman_identity(&prog, &b, &a).unwrap() < 1e-14);
        assert_eq!(check_bregman_identity(&prog, &a, &a).unwrap(), 0.0);
    }

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identity_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = 1 + trial % 6;
            let c = random_pd(&mut rng, n);
            let (a, b) = (vec![random_pd(&mut rng, n)], vec![random_pd(&mut rng, n)]);
            let p1 = bc_private_program(
                BcPrivateInstance::new(random_pd(&mut rng, n), random_pd(&mut rng, n), c.clone(), 1.7).unwrap(),
                Variant::Bregman,
            )
            .unwrap();
            let tol = |d: f64| 1e-8 * (1.0 + d.abs());
            let e = check_bregman_identity(&p1, &a, &b).unwrap();
            assert!(e <= tol(p1.bregman_h(&b, &a).unwrap()), "p1 {e}");

            let alpha = if trial % 3 == 0 { 0.0 } else { 0.6 };
            let p2 = bc_common_program(
                BcCommonInstance::new(random_pd(&mut rng, n), random_pd(&mut rng, n), c.clone(), alpha, 0.8, 1.3)
                    .unwrap(),
                Variant::Bregman,
            )
            .unwrap();
            let (a2, b2) = (
                vec![random_pd(&mut rng, n), random_pd(&mut rng, n)],
                vec![random_pd(&mut rng, n), random_pd(&mut rng, n)],
            );
            let e = check_bregman_identity(&p2, &a2, &b2).unwrap();
            assert!(e <= tol(p2.bregman_h(&b2, &a2).unwrap()), "p2 {e}");

            let m = n.div_ceil(2);
            let a_mats = (0..2).map(|_| (0..2).map(|_| gaussian(&mut rng, m, n)).collect()).collect();
            let p3 = gbl_program(
                BrascampLiebInstance::new(a_mats, vec![c.clone(), c.clone()], vec![0.4, 0.9], vec![1.0, 0.5], 0.1)
                    .unwrap(),
                Variant::Bregman,
            )
            .unwrap();
            let (a3, b3) = (
                vec![random_pd(&mut rng, n), random_pd(&mut rng, n)],
                vec![random_pd(&mut rng, n), random_pd(&mut rng, n)],
            );
            let e = check_bregman_identity(&p3, &a3, &b3).unwrap();
            assert!(e <= tol(p3.bregman_h(&b3, &a3).unwrap()), "p3 {e}");
        }
    }

    #[test]
    fn exact_geometric_sequence() {
        let f: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
        let dh: Vec<f64> = f.windows(2).map(|w| w[0] - w[1]).collect();
        let pl = pl_from_sequence(&f, &dh, 0.0).unwrap();
        assert!(pl.per_step_ratios.iter().all(|r| (r - 0.5).abs() < 1e-12));
        assert!((pl.mu_hat.unwrap() - 1.0).abs() < 1e-12);
        assert!((pl.rate_bound - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_step_trace_gives_zero_ratio() {
        let prog = IntervalDc::new(1.0, 4.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let trace = dca_solve(&prog, &DcaConfig::default()).unwrap();
        let pl = estimate_pl(&trace, &prog, -3.0).unwrap();
        assert_eq!(pl.per_step_ratios.len(), 1);
        assert!(pl.per_step_ratios[0].abs() < 1e-12);
        assert_eq!(pl.mu_hat, None);
        assert!(matches!(pl_from_sequence(&[1.0, 1.0], &[0.0], 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rate_fit_examples() {
        assert!((fit_rate(&[1.0, 0.25, 0.0625], 0.0).unwrap() - 0.25).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rho in [0.3f64, 0.6, 0.9] {
            let f: Vec<f64> = (0..30).map(|k| 2.0 + rho.powi(k) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))).collect();
            let fit = fit_rate(&f, 2.0).unwrap();
            assert!((fit - rho).abs() < 0.02, "{rho}: {fit}");
        }
        assert!(matches!(fit_rate(&[1.0, 0.5], 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn kkt_examples() {
        // Active cap at x = 1 for g = x², h = 4x.
        let prog = IntervalDc::new(1.0, 4.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let state = PdhgState { u: vec![s(1.0)], v: vec![s(2.0)], iter: 0, residual: 0.0 };
        assert!(kkt_residual(&prog, &[s(1.0)], &state).unwrap().abs() < 1e-15);
        let wrong = PdhgState { u: vec![s(1.0)], v: vec![s(0.5)], iter: 0, residual: 0.0 };
        assert!(kkt_residual(&prog, &[s(1.0)], &wrong).unwrap() > 0.1);
        // Interior point with zero duals: the residual is the gradient size.
        let free = IntervalDc::new(1.0, 1.0, 0.0, -10.0, 10.0, 0.0).unwrap();
        let zero = PdhgState { u: vec![s(0.0)], v: vec![s(0.0)], iter: 0, residual: 0.0 };
        let r = kkt_residual(&free, &[s(0.0)], &zero).unwrap();
        assert!((r - 1.0 / 2.0).abs() < 1e-12, "{r}");
    }
}
