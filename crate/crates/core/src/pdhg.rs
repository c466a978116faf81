//! Bregman primal–dual hybrid gradient for `min F(u) + G(A u)`.
//!
//! One iteration is
//!
//! ```text
//! u⁺ = argmin_u F(u) + ⟨A* v, u⟩ + (1/τ) d_p(u, u)
//! v⁺ = prox_{σ G*}(v + σ A(2u⁺ − u))
//! ```
//!
//! where the primal Bregman prox is supplied by the [`Subproblem`] and the
//! dual kernel is always Euclidean. Iterates are tuples of symmetric
//! matrices ("blocks").

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::cones::{project_psd, prox_conj_indicator, CapSet, KernelSpec, Projector, PsdCone};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::{frob_inner, SymMat};

pub type Blocks<T> = Vec<SymMat<T>>;

/// Squared block-Frobenius norm.
pub fn blocks_norm_sq<T: Real>(b: &[SymMat<T>]) -> T {
    b.iter().fold(T::zero(), |acc, m| acc + frob_inner(m, m).unwrap_or_else(|_| T::zero()))
}

pub fn blocks_norm<T: Real>(b: &[SymMat<T>]) -> T {
    blocks_norm_sq(b).sqrt()
}

pub fn blocks_inner<T: Real>(a: &[SymMat<T>], b: &[SymMat<T>]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    a.iter().zip(b).try_fold(T::zero(), |acc, (x, y)| Ok(acc + frob_inner(x, y)?))
}

pub fn blocks_sub<T: Real>(a: &[SymMat<T>], b: &[SymMat<T>]) -> Blocks<T> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s·b`, blockwise.
pub fn blocks_axpy<T: Real>(a: &[SymMat<T>], s: T, b: &[SymMat<T>]) -> Blocks<T> {
    a.iter().zip(b).map(|(x, y)| x.axpy(s, y)).collect()
}

/// Linear map between block tuples whose blocks are combined with scalar
/// coefficients: dual block `j` is `Σ_i K[j][i] · u_i`.
///
/// This covers every splitting used here (identity, `W − U`, stacked
/// copies). Its operator norm is `‖K‖₂`, computed exactly from the small
/// coefficient matrix.
#[derive(Debug, Clone)]
pub struct LinearMapSpec<T: Real> {
    n_primal: usize,
    rows: Vec<Vec<(usize, T)>>,
    norm_bound: T,
}

impl<T: Real> LinearMapSpec<T> {
    pub fn identity(blocks: usize) -> Self {
        let rows = (0..blocks).map(|i| vec![(i, T::one())]).collect();
        Self::from_rows(blocks, rows).expect("identity map is well-formed")
    }

    pub fn from_rows(n_primal: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        if rows.is_empty() || n_primal == 0 {
            return Err(Error::invalid("linear map needs at least one block on each side"));
        }
        let mut k = DMatrix::<T>::zeros(rows.len(), n_primal);
        for (j, row) in rows.iter().enumerate() {
            for &(i, c) in row {
                if i >= n_primal {
                    return Err(Error::invalid(format!("primal block index {i} out of range")));
                }
                k[(j, i)] += c;
            }
        }
        let gram = k.transpose() * &k;
        let top = T::eigh(&gram).0.iter().fold(T::zero(), |acc, &l| acc.max(l));
        Ok(Self { n_primal, rows, norm_bound: top.sqrt() })
    }

    pub fn n_primal(&self) -> usize {
        self.n_primal
    }

    pub fn n_dual(&self) -> usize {
        self.rows.len()
    }

    pub fn norm_bound(&self) -> T {
        self.norm_bound
    }

    pub fn forward(&self, u: &[SymMat<T>]) -> Blocks<T> {
        debug_assert_eq!(u.len(), self.n_primal);
        self.rows
            .iter()
            .map(|row| {
                let n = u[row[0].0].dim();
                row.iter().fold(SymMat::zeros(n), |acc, &(i, c)| acc.axpy(c, &u[i]))
            })
            .collect()
    }

    pub fn adjoint(&self, v: &[SymMat<T>]) -> Blocks<T> {
        debug_assert_eq!(v.len(), self.rows.len());
        let mut out: Vec<Option<SymMat<T>>> = vec![None; self.n_primal];
        for (row, vj) in self.rows.iter().zip(v) {
            for &(i, c) in row {
                out[i] = Some(match out[i].take() {
                    Some(acc) => acc.axpy(c, vj),
                    None => vj.scale(c),
                });
            }
        }
        out.into_iter().map(|b| b.expect("every primal block appears in the map")).collect()
    }
}

/// Convex subproblem `min F(u) + G(A u)` in the form the engine consumes.
///
/// `F` is a smooth convex function plus the indicator of a simple set `C₁`
/// (handled inside [`primal_prox`](Subproblem::primal_prox)); `G` is the
/// indicator of a simple set `C₂`, handled through its conjugate.
pub trait Subproblem<T: Real> {
    fn map(&self) -> &LinearMapSpec<T>;

    /// Bregman kernel of each primal block.
    fn primal_kernels(&self) -> Vec<KernelSpec<T>>;

    /// Upper bounds `u_i ⪯ B_i` of the bounded feasible box, used to
    /// estimate kernel strong convexity.
    fn primal_upper_bounds(&self) -> Blocks<T>;

    /// `argmin_{u ∈ C₁} F(u) + ⟨atv, u⟩ + (1/τ) d_p(u, u_prev)`.
    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>>;

    /// `prox_{σ G*}(z)`.
    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>>;

    /// Value of the smooth part of `F`, for monitoring.
    fn objective(&self, u: &[SymMat<T>]) -> Result<T>;

    /// Gradient of the smooth part of `F`.
    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>>;

    /// Euclidean projection onto `C₁`.
    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>>;

    /// Euclidean projection onto `C₂` (in the range space of `A`).
    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>>;

    /// `u ∈ C₁` and `A u ∈ C₂` up to an eigenvalue tolerance.
    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool;

    /// True if some dual block breaks the sign pattern its conjugate prox
    /// enforces.
    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool;

    /// Starting point when no warm start is supplied.
    fn initial_primal(&self) -> Blocks<T>;
}

/// Divergence safeguard: when the residual exceeds `growth` times its
/// minimum over the last `window` iterations, both stepsizes shrink by
/// `shrink` and the solver restarts from its best iterate.
#[derive(Debug, Clone, Copy)]
pub struct Safeguard<T: Real> {
    pub shrink: T,
    pub window: usize,
    pub growth: T,
    pub max_restarts: usize,
}

impl<T: Real> Default for Safeguard<T> {
    fn default() -> Self {
        Self { shrink: T::lit(0.5), window: 100, growth: T::lit(10.0), max_restarts: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct PdhgConfig<T: Real> {
    pub tau: T,
    pub sigma: T,
    pub max_iters: usize,
    /// Threshold on the normalized fixed-point residual.
    pub tol: T,
    pub safeguard: Safeguard<T>,
    /// Check dual sign patterns at every iteration (costs one
    /// eigendecomposition per dual block).
    pub check_invariants: bool,
}

impl<T: Real> Default for PdhgConfig<T> {
    fn default() -> Self {
        Self {
            tau: T::lit(0.95),
            sigma: T::lit(0.95),
            max_iters: 20_000,
            tol: T::lit(1e-8),
            safeguard: Safeguard::default(),
            check_invariants: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PdhgState<T: Real> {
    pub u: Blocks<T>,
    pub v: Blocks<T>,
    pub iter: usize,
    pub residual: T,
}

impl<T: Real> PdhgState<T> {
    /// `v = 0`, which satisfies every dual sign pattern.
    pub fn cold(u: Blocks<T>, map: &LinearMapSpec<T>) -> Self {
        let v = map.forward(&u).iter().map(|b| SymMat::zeros(b.dim())).collect();
        Self { u, v, iter: 0, residual: T::zero() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InnerStats {
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
    pub restarts: usize,
    /// Iterations where a dual block broke its sign pattern (only counted
    /// with `check_invariants`).
    pub sign_violations: usize,
    /// Prox evaluations rejected because the operand left the domain.
    pub operand_failures: usize,
    /// Stepsizes in effect at exit (smaller than requested after restarts).
    pub tau: f64,
    pub sigma: f64,
}

/// `τ = σ = θ·√m / ‖A‖` with `θ = 0.95` and `m` the smallest strong-convexity
/// modulus of the primal kernels over the feasible box.
pub fn stepsize_init<T: Real>(kernels: &[KernelSpec<T>], upper: &[SymMat<T>], norm_bound: T) -> Result<(T, T)> {
    if kernels.len() != upper.len() {
        return Err(Error::DimensionMismatch { expected: kernels.len(), got: upper.len() });
    }
    let mut m = T::one();
    for (k, b) in kernels.iter().zip(upper) {
        m = m.min(k.strong_convexity(b)?);
    }
    let step = T::lit(0.95) * m.sqrt() / norm_bound;
    Ok((step, step))
}

/// [`stepsize_init`] for a subproblem's own kernels, box and map.
pub fn stepsize_for<T: Real, S: Subproblem<T> + ?Sized>(spec: &S) -> Result<(T, T)> {
    stepsize_init(&spec.primal_kernels(), &spec.primal_upper_bounds(), spec.map().norm_bound())
}

/// Normalized fixed-point residual
/// `(‖Δu‖/τ + ‖Δv‖/σ) / (1 + ‖u_prev‖ + ‖v_prev‖)`.
pub fn residual<T: Real>(state: &PdhgState<T>, prev: &PdhgState<T>, tau: T, sigma: T) -> T {
    residual_parts(&state.u, &state.v, &prev.u, &prev.v, tau, sigma)
}

fn residual_parts<T: Real>(
    u: &[SymMat<T>],
    v: &[SymMat<T>],
    u_prev: &[SymMat<T>],
    v_prev: &[SymMat<T>],
    tau: T,
    sigma: T,
) -> T {
    let du = blocks_norm(&blocks_sub(u, u_prev));
    let dv = blocks_norm(&blocks_sub(v, v_prev));
    (du / tau + dv / sigma) / (T::one() + blocks_norm(u_prev) + blocks_norm(v_prev))
}

/// Runs PDHG until the residual drops below `config.tol` or `max_iters`
/// iterations have been spent (restarts included). Returns the last iterate.
pub fn pdhg_solve<T: Real, S: Subproblem<T> + ?Sized>(
    spec: &mut S,
    config: &PdhgConfig<T>,
    warm: Option<&PdhgState<T>>,
) -> Result<(PdhgState<T>, InnerStats)> {
    let map = spec.map().clone();
    let start = match warm {
        Some(w) => {
            if w.u.len() != map.n_primal() || w.v.len() != map.n_dual() {
                return Err(Error::DimensionMismatch { expected: map.n_primal(), got: w.u.len() });
            }
            w.clone()
        }
        None => PdhgState::cold(spec.initial_primal(), &map),
    };
    let (mut u, mut v) = (start.u.clone(), start.v.clone());
    let (mut tau, mut sigma) = (config.tau, config.sigma);
    let guard = &config.safeguard;
    let sign_tol = T::tol(1e-9);

    let mut stats = InnerStats::default();
    let mut best: Option<(Blocks<T>, Blocks<T>, T)> = None;
    let mut recent: VecDeque<T> = VecDeque::with_capacity(guard.window + 1);
    let mut res = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));

    while stats.iters < config.max_iters {
        let step = pdhg_step(spec, &map, &u, &v, tau, sigma);
        let mut diverged = false;
        match step {
            Ok((u_next, v_next)) => {
                stats.iters += 1;
                res = residual_parts(&u_next, &v_next, &u, &v, tau, sigma);
                if !res.is_finite() {
                    diverged = true;
                } else {
                    if config.check_invariants && spec.dual_sign_violation(&v_next, sign_tol) {
                        stats.sign_violations += 1;
                    }
                    u = u_next;
                    v = v_next;
                    if best.as_ref().is_none_or(|b| res < b.2) {
                        best = Some((u.clone(), v.clone(), res));
                    }
                    if res <= config.tol {
                        stats.converged = true;
                        break;
                    }
                    let floor = recent.iter().fold(res, |acc, &r| acc.min(r));
                    if recent.len() == guard.window && res > guard.growth * floor {
                        diverged = true;
                    }
                    recent.push_back(res);
                    if recent.len() > guard.window {
                        recent.pop_front();
                    }
                }
            }
            Err(Error::Unbounded(_) | Error::NotPd | Error::OutOfDomain(_)) => {
                stats.operand_failures += 1;
                stats.iters += 1;
                diverged = true;
            }
            Err(e) => return Err(e),
        }
        if diverged {
            stats.restarts += 1;
            if stats.restarts > guard.max_restarts {
                return Err(Error::NoConvergence { restarts: guard.max_restarts, residual: res.as_f64() });
            }
            tau *= guard.shrink;
            sigma *= guard.shrink;
            match &best {
                Some((bu, bv, _)) => {
                    u = bu.clone();
                    v = bv.clone();
                }
                None => {
                    u = start.u.clone();
                    v = start.v.clone();
                }
            }
            recent.clear();
        }
    }

    stats.residual = res.as_f64();
    stats.tau = tau.as_f64();
    stats.sigma = sigma.as_f64();
    let state = PdhgState { u, v, iter: start.iter + stats.iters, residual: res };
    Ok((state, stats))
}

fn pdhg_step<T: Real, S: Subproblem<T> + ?Sized>(
    spec: &mut S,
    map: &LinearMapSpec<T>,
    u: &[SymMat<T>],
    v: &[SymMat<T>],
    tau: T,
    sigma: T,
) -> Result<(Blocks<T>, Blocks<T>)> {
    let atv = map.adjoint(v);
    let u_next = spec.primal_prox(u, &atv, tau)?;
    let extrapolated = blocks_axpy(&u_next.iter().map(|b| b.scale(T::lit(2.0))).collect::<Vec<_>>(), -T::one(), u);
    let z = blocks_axpy(v, sigma, &map.forward(&extrapolated));
    let v_next = spec.dual_prox(&z, sigma)?;
    Ok((u_next, v_next))
}

/// Natural KKT residual of the splitting at `(u, v)`:
/// `‖u − P_{C₁}(u − ∇F(u) − A*v)‖ + ‖Au − P_{C₂}(Au + v)‖`, divided by
/// `1 + ‖∇F(u)‖`. Zero exactly at a primal–dual solution.
pub fn kkt_residual<T: Real, S: Subproblem<T> + ?Sized>(spec: &S, state: &PdhgState<T>) -> Result<T> {
    let map = spec.map();
    let grad = spec.smooth_gradient(&state.u)?;
    let r = blocks_axpy(&grad, T::one(), &map.adjoint(&state.v));
    let primal = spec.project_primal_set(&blocks_sub(&state.u, &r))?;
    let primal_gap = blocks_norm(&blocks_sub(&state.u, &primal));
    let au = map.forward(&state.u);
    let dual = spec.project_dual_set(&blocks_axpy(&au, T::one(), &state.v))?;
    let dual_gap = blocks_norm(&blocks_sub(&au, &dual));
    Ok((primal_gap + dual_gap) / (T::one() + blocks_norm(&grad)))
}

/// Nearest point of `S₊ ∩ {X ⪯ C}` to a target matrix, split as
/// `F = ½‖u − target‖² + δ_{S₊}`, `G = δ_{X ⪯ C}`, `A = Id`, with Euclidean
/// kernels.
#[derive(Debug, Clone)]
pub struct NearestPoint<T: Real> {
    pub target: SymMat<T>,
    pub cap: SymMat<T>,
    map: LinearMapSpec<T>,
}

impl<T: Real> NearestPoint<T> {
    pub fn new(target: SymMat<T>, cap: SymMat<T>) -> Result<Self> {
        if target.dim() != cap.dim() {
            return Err(Error::DimensionMismatch { expected: cap.dim(), got: target.dim() });
        }
        Ok(Self { target, cap, map: LinearMapSpec::identity(1) })
    }
}

impl<T: Real> Subproblem<T> for NearestPoint<T> {
    fn map(&self) -> &LinearMapSpec<T> {
        &self.map
    }

    fn primal_kernels(&self) -> Vec<KernelSpec<T>> {
        vec![KernelSpec::Euclidean]
    }

    fn primal_upper_bounds(&self) -> Blocks<T> {
        vec![self.cap.clone()]
    }

    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>> {
        // argmin_{u ⪰ 0} ½‖u − a‖² + ⟨w, u⟩ + (1/2τ)‖u − u_prev‖²
        let inv_tau = T::one() / tau;
        let m = (&(&self.target - &atv[0]) + &u_prev[0].scale(inv_tau)).scale(T::one() / (T::one() + inv_tau));
        Ok(vec![project_psd(&m)?])
    }

    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>> {
        Ok(vec![prox_conj_indicator(&z[0], sigma, &CapSet { cap: self.cap.clone() })?])
    }

    fn objective(&self, u: &[SymMat<T>]) -> Result<T> {
        Ok(blocks_norm_sq(&[&u[0] - &self.target]) * T::lit(0.5))
    }

    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![&u[0] - &self.target])
    }

    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![PsdCone.project(&u[0])?])
    }

    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![CapSet { cap: self.cap.clone() }.project(&w[0])?])
    }

    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool {
        u[0].is_psd_within(tol) && (&self.cap - &u[0]).is_psd_within(tol)
    }

    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool {
        !v[0].is_psd_within(tol * (T::one() + v[0].frob_norm()))
    }

    fn initial_primal(&self) -> Blocks<T> {
        vec![SymMat::zeros(self.target.dim())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::testutil::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn power_iteration_norm(map: &LinearMapSpec<f64>, n: usize, rng: &mut ChaCha8Rng) -> f64 {
        let mut u: Blocks<f64> = (0..map.n_primal()).map(|_| random_sym(rng, n)).collect();
        let mut est = 0.0;
        for _ in 0..200 {
            let w = map.adjoint(&map.forward(&u));
            est = blocks_norm(&w).sqrt() / blocks_norm(&u).sqrt();
            let s = 1.0 / blocks_norm(&w);
            u = w.iter().map(|b| b.scale(s)).collect();
        }
        est
    }

    #[test]
    fn map_norms_match_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let diff = LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)]]).unwrap();
        assert_abs_diff_eq!(diff.norm_bound(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(power_iteration_norm(&diff, 3, &mut rng), 2f64.sqrt(), epsilon = 1e-8);
        let stacked =
            LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        assert_abs_diff_eq!(stacked.norm_bound(), 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(power_iteration_norm(&stacked, 2, &mut rng), 3f64.sqrt(), epsilon = 1e-8);
        assert_eq!(LinearMapSpec::<f64>::identity(3).norm_bound(), 1.0);
        assert!(LinearMapSpec::<f64>::from_rows(1, vec![vec![(2, 1.0)]]).is_err());
    }

    #[test]
    fn adjoint_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let maps = [
            LinearMapSpec::identity(2),
            LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)]]).unwrap(),
            LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap(),
        ];
        for map in &maps {
            for _ in 0..20 {
                let n = rng.gen_range(1..5);
                let u: Blocks<f64> = (0..map.n_primal()).map(|_| random_sym(&mut rng, n)).collect();
                let v: Blocks<f64> = (0..map.n_dual()).map(|_| random_sym(&mut rng, n)).collect();
                let lhs = blocks_inner(&v, &map.forward(&u)).unwrap();
                let rhs = blocks_inner(&map.adjoint(&v), &u).unwrap();
                let scale = blocks_norm(&u) * blocks_norm(&v);
                assert!((lhs - rhs).abs() <= 1e-10 * scale);
                assert!(lhs <= map.norm_bound() * scale + 1e-12);
            }
        }
    }

    #[test]
    fn stepsize_examples() {
        let i = SymMat::<f64>::identity(2);
        let (t, s) = stepsize_init(&[KernelSpec::Euclidean], std::slice::from_ref(&i), 1.0).unwrap();
        assert_abs_diff_eq!(t, 0.95);
        assert_abs_diff_eq!(s, 0.95);
        let (t, _) =
            stepsize_init(&[KernelSpec::Euclidean, KernelSpec::Euclidean], &[i.clone(), i.clone()], 2f64.sqrt())
                .unwrap();
        assert_abs_diff_eq!(t, 0.95 / 2f64.sqrt(), epsilon = 1e-15);
        let nb = 1.3;
        let (t, s) = stepsize_init(&[KernelSpec::LogDetShifted(i.clone())], std::slice::from_ref(&i), nb).unwrap();
        assert_abs_diff_eq!(t, 0.475 / nb, epsilon = 1e-15);
        assert_eq!(t, s);
    }

    #[test]
    fn residual_examples() {
        let i = SymMat::<f64>::identity(2);
        let st = PdhgState { u: vec![i.clone()], v: vec![i.clone()], iter: 0, residual: 0.0 };
        assert_eq!(residual(&st, &st, 1.0, 1.0), 0.0);
        let delta = SymMat::from_diagonal(&[0.3, 0.4]);
        let moved = PdhgState { u: vec![&i + &delta], ..st.clone() };
        let expected = 0.5 / (1.0 + i.frob_norm() + i.frob_norm());
        assert_abs_diff_eq!(residual(&moved, &st, 1.0, 1.0), expected, epsilon = 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (du, dv) = (random_sym(&mut rng, 2), random_sym(&mut rng, 2));
        let one = PdhgState { u: vec![&i + &du], v: vec![&i + &dv], ..st.clone() };
        let two = PdhgState { u: vec![i.axpy(2.0, &du)], v: vec![i.axpy(2.0, &dv)], ..st.clone() };
        assert_abs_diff_eq!(residual(&two, &st, 0.7, 1.3), 2.0 * residual(&one, &st, 0.7, 1.3), epsilon = 1e-14);
    }

    #[test]
    fn nearest_point_matches_dykstra() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..6 {
            let n = 1 + trial % 4;
            let target = random_sym(&mut rng, n).scale(2.0);
            let cap = random_pd(&mut rng, n);
            let mut spec = NearestPoint::new(target.clone(), cap.clone()).unwrap();
            let (tau, sigma) = stepsize_for(&spec).unwrap();
            let cfg = PdhgConfig { tau, sigma, max_iters: 5000, tol: 1e-12, ..Default::default() };
            let (st, stats) = pdhg_solve(&mut spec, &cfg, None).unwrap();
            let oracle = crate::checks::dykstra(&target, &cap, 100_000);
            assert!((&st.u[0] - &oracle).frob_norm() <= 1e-6, "trial {trial}: {stats:?}");
            assert!(spec.is_feasible(&st.u, 1e-6));
            assert!(kkt_residual(&spec, &st).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn inactive_constraints_give_zero_dual() {
        let target = SymMat::from_diagonal(&[0.5, 0.2]);
        let mut spec = NearestPoint::new(target.clone(), SymMat::identity(2)).unwrap();
        let cfg = PdhgConfig { max_iters: 2000, tol: 1e-12, ..Default::default() };
        let (st, _) = pdhg_solve(&mut spec, &cfg, None).unwrap();
        assert!((&st.u[0] - &target).frob_norm() <= 1e-9);
        assert!(st.v[0].frob_norm() <= 1e-9);
    }

    #[test]
    fn sign_checks_count_nothing_on_well_posed_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut spec = NearestPoint::new(random_sym(&mut rng, 3), random_pd(&mut rng, 3)).unwrap();
        let cfg = PdhgConfig { max_iters: 500, tol: 1e-10, check_invariants: true, ..Default::default() };
        let (_, stats) = pdhg_solve(&mut spec, &cfg, None).unwrap();
        assert_eq!(stats.sign_violations, 0);
    }

    #[test]
    fn oversized_steps_trigger_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut spec = NearestPoint::new(random_sym(&mut rng, 3).scale(5.0), random_pd(&mut rng, 3)).unwrap();
        let cfg = PdhgConfig {
            tau: 50.0,
            sigma: 50.0,
            max_iters: 20_000,
            tol: 1e-10,
            safeguard: Safeguard { window: 20, ..Default::default() },
            ..Default::default()
        };
        // Either the safeguard rescues the run or it reports failure; it must
        // not return a silently wrong answer.
        match pdhg_solve(&mut spec, &cfg, None) {
            Ok((st, stats)) => {
                if stats.converged {
                    assert!(kkt_residual(&spec, &st).unwrap() < 1e-6);
                }
            }
            Err(e) => assert!(matches!(e, Error::NoConvergence { .. })),
        }
    }

    #[test]
    fn warm_start_dimension_checked() {
        let mut spec = NearestPoint::new(SymMat::<f64>::identity(2), SymMat::identity(2)).unwrap();
        let bad = PdhgState { u: vec![], v: vec![], iter: 0, residual: 0.0 };
        assert!(pdhg_solve(&mut spec, &PdhgConfig::default(), Some(&bad)).is_err());
    }
}
