use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::cones::{
    project_cap, project_psd, prox_conj_indicator, prox_logdet_quadratic, CapSet, KernelSpec, Projector,
};
use crate::dca::DcProgram;
use crate::error::{Error, Result};
use crate::pdhg::{Blocks, LinearMapSpec, Subproblem};
use crate::scalar::Real;
use crate::symmat::{frob_inner, inv_pd, logdet_pd, SymMat};

use super::{check_psd, sign_tol, InvCache, Variant};

/// `min −Σ_i β_i log det X_i + Σ_j α_j log det(Σ_i A_ij X_i A_ijᵀ + ρI)`
/// subject to `0 ≺ X_i ⪯ C_i`.
///
/// `a[i][j]` is the `m_j × n_i` matrix `A_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrascampLiebInstance<T: Real> {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub a: Vec<Vec<DMatrix<T>>>,
    pub caps: Vec<SymMat<T>>,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub rho: T,
}

impl<T: Real> BrascampLiebInstance<T> {
    pub fn new(a: Vec<Vec<DMatrix<T>>>, caps: Vec<SymMat<T>>, alpha: Vec<T>, beta: Vec<T>, rho: T) -> Result<Self> {
        let n = caps.iter().map(SymMat::dim).collect();
        let m = a.first().map(|row| row.iter().map(|aij| aij.nrows()).collect()).unwrap_or_default();
        let inst = Self { n, m, a, caps, alpha, beta, rho };
        inst.validate()?;
        Ok(inst)
    }

    pub fn p(&self) -> usize {
        self.n.len()
    }

    pub fn q(&self) -> usize {
        self.m.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.p(), self.q());
        if p == 0 || q == 0 {
            return Err(Error::invalid("need at least one block and one coupling term"));
        }
        if self.caps.len() != p || self.beta.len() != p || self.a.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.caps.len().min(self.beta.len()) });
        }
        if self.alpha.len() != q {
            return Err(Error::DimensionMismatch { expected: q, got: self.alpha.len() });
        }
        if !(self.rho > T::zero()) || !self.rho.is_finite() {
            return Err(Error::invalid("rho must be positive"));
        }
        if self.alpha.iter().chain(&self.beta).any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(Error::invalid("alpha and beta must be nonnegative"));
        }
        for (i, row) in self.a.iter().enumerate() {
            if self.caps[i].dim() != self.n[i] {
                return Err(Error::DimensionMismatch { expected: self.n[i], got: self.caps[i].dim() });
            }
            check_psd(&self.caps[i], "C_i")?;
            if row.len() != q {
                return Err(Error::DimensionMismatch { expected: q, got: row.len() });
            }
            for (j, aij) in row.iter().enumerate() {
                if aij.nrows() != self.m[j] || aij.ncols() != self.n[i] {
                    return Err(Error::invalid(format!("A[{i}][{j}] has shape {}×{}", aij.nrows(), aij.ncols())));
                }
                if !aij.iter().all(|x| x.is_finite()) {
                    return Err(Error::invalid(format!("A[{i}][{j}] has non-finite entries")));
                }
                if !full_row_rank(aij) {
                    return Err(Error::invalid(format!("A[{i}][{j}] is not of full row rank")));
                }
            }
        }
        Ok(())
    }

    /// `S_j(X) = Σ_i A_ij X_i A_ijᵀ + ρI`.
    pub fn coupling(&self, x: &[SymMat<T>], j: usize) -> SymMat<T> {
        let mj = self.m[j];
        let mut s = SymMat::scaled_identity(mj, self.rho);
        for (i, xi) in x.iter().enumerate() {
            s = &s + &xi.congruence(&self.a[i][j]);
        }
        s
    }
}

/// Rank test with relative singular-value threshold `1e−10`.
pub(crate) fn full_row_rank<T: Real>(a: &DMatrix<T>) -> bool {
    if a.nrows() > a.ncols() {
        return false;
    }
    let sv = a.clone().singular_values();
    let top = sv.iter().fold(T::zero(), |acc, &s| acc.max(s));
    let low = sv.iter().fold(top, |acc, &s| acc.min(s));
    top > T::zero() && low > T::tol(1e-10) * top
}

/// DC split `g = −Σ β_i log det X_i`, `h = −Σ α_j log det S_j(X)`.
#[derive(Debug, Clone)]
pub struct BrascampLieb<T: Real> {
    inst: BrascampLiebInstance<T>,
    variant: Variant,
}

pub fn gbl_program<T: Real>(inst: BrascampLiebInstance<T>, variant: Variant) -> Result<BrascampLieb<T>> {
    inst.validate()?;
    Ok(BrascampLieb { inst, variant })
}

impl<T: Real> BrascampLieb<T> {
    pub fn instance(&self) -> &BrascampLiebInstance<T> {
        &self.inst
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// `S_j(X)⁻¹` for every `j`, skipping terms with `α_j = 0`.
    fn coupling_inverses(&self, x: &[SymMat<T>]) -> Result<Vec<Option<SymMat<T>>>> {
        (0..self.inst.q())
            .map(
                |j| {
                    if self.inst.alpha[j] > T::zero() {
                        inv_pd(&self.inst.coupling(x, j)).map(Some)
                    } else {
                        Ok(None)
                    }
                },
            )
            .collect()
    }
}

impl<T: Real> DcProgram<T> for BrascampLieb<T> {
    type Sub = BrascampLiebSub<T>;

    fn eval_g(&self, x: &[SymMat<T>]) -> Result<T> {
        let mut g = T::zero();
        for (xi, &b) in x.iter().zip(&self.inst.beta) {
            if b > T::zero() {
                g -= b * logdet_pd(xi)?;
            } else if !xi.is_pd() {
                return Err(Error::OutOfDomain("X_i must be positive definite".into()));
            }
        }
        Ok(g)
    }

    fn eval_h(&self, x: &[SymMat<T>]) -> Result<T> {
        let mut h = T::zero();
        for (j, &a) in self.inst.alpha.iter().enumerate() {
            if a > T::zero() {
                h -= a * logdet_pd(&self.inst.coupling(x, j))?;
            }
        }
        Ok(h)
    }

    fn grad_g(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        x.iter()
            .zip(&self.inst.beta)
            .map(|(xi, &b)| if b > T::zero() { Ok(inv_pd(xi)?.scale(-b)) } else { Ok(SymMat::zeros(xi.dim())) })
            .collect()
    }

    fn grad_h(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        let inv = self.coupling_inverses(x)?;
        Ok((0..self.inst.p())
            .map(|i| {
                let mut g = SymMat::zeros(self.inst.n[i]);
                for (j, sj) in inv.iter().enumerate() {
                    if let Some(sj) = sj {
                        g = g.axpy(-self.inst.alpha[j], &sj.transpose_congruence(&self.inst.a[i][j]));
                    }
                }
                g
            })
            .collect())
    }

    fn build_subproblem(&self, x_k: &[SymMat<T>]) -> Result<BrascampLiebSub<T>> {
        let lin = self.grad_h(x_k)?.iter().map(|g| -g).collect::<Vec<_>>();
        let p = self.inst.p();
        Ok(BrascampLiebSub {
            variant: self.variant,
            caps: self.inst.caps.iter().map(|c| CapSet { cap: c.clone() }).collect(),
            beta: self.inst.beta.clone(),
            lin,
            map: LinearMapSpec::identity(p),
            caches: vec![InvCache::default(); p],
        })
    }

    fn feasible_start(&self) -> Blocks<T> {
        self.inst.caps.iter().map(|c| c.scale(T::lit(0.5)).axpy(T::lit(1e-8), &SymMat::identity(c.dim()))).collect()
    }

    fn is_feasible(&self, x: &[SymMat<T>], tol: T) -> bool {
        x.iter().zip(&self.inst.caps).all(|(xi, c)| xi.is_pd() && (c - xi).is_psd_within(tol))
    }

    fn repair(&self, x: Blocks<T>) -> Result<Blocks<T>> {
        x.iter().zip(&self.inst.caps).map(|(xi, c)| project_cap(xi, c)).collect()
    }
}

/// Block-separable surrogate `Σ_i −β_i log det U_i + ⟨M_i, U_i⟩` over
/// `0 ≺ U_i ⪯ C_i`, with `M_i = Σ_j α_j A_ijᵀ S_j(X_k)⁻¹ A_ij`.
///
/// The barrier side lives in the prox operators (Bregman: `−log det`
/// kernel; Euclidean: the log-barrier itself, which keeps `U_i ≻ 0` when
/// `β_i > 0` and reduces to a PSD projection when `β_i = 0`); the caps are
/// the dual blocks, with map `Id`.
#[derive(Debug, Clone)]
pub struct BrascampLiebSub<T: Real> {
    variant: Variant,
    caps: Vec<CapSet<T>>,
    beta: Vec<T>,
    lin: Blocks<T>,
    map: LinearMapSpec<T>,
    caches: Vec<InvCache<T>>,
}

impl<T: Real> BrascampLiebSub<T> {
    pub fn linear_terms(&self) -> &[SymMat<T>] {
        &self.lin
    }
}

impl<T: Real> Subproblem<T> for BrascampLiebSub<T> {
    fn map(&self) -> &LinearMapSpec<T> {
        &self.map
    }

    fn primal_kernels(&self) -> Vec<KernelSpec<T>> {
        match self.variant {
            Variant::Bregman => vec![KernelSpec::LogDetBarrier; self.caps.len()],
            Variant::Euclidean => vec![KernelSpec::Euclidean; self.caps.len()],
        }
    }

    fn primal_upper_bounds(&self) -> Blocks<T> {
        self.caps.iter().map(|c| c.cap.clone()).collect()
    }

    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>> {
        let inv_tau = T::one() / tau;
        match self.variant {
            Variant::Bregman => {
                let results: Vec<Result<(SymMat<T>, SymMat<T>)>> = (0..self.caps.len())
                    .into_par_iter()
                    .map(|i| {
                        let inv = self.caches[i].get(&u_prev[i], None)?;
                        let operand = (&atv[i] + &self.lin[i]).axpy(inv_tau, &inv);
                        let c = self.beta[i] + inv_tau;
                        // U = c·B⁻¹ and U⁻¹ = B/c.
                        let u = inv_pd(&operand)
                            .map_err(|_| Error::Unbounded("barrier operand is not positive definite".into()))?
                            .scale(c);
                        Ok((u, operand.scale(T::one() / c)))
                    })
                    .collect();
                let mut out = Vec::with_capacity(results.len());
                for (cache, r) in self.caches.iter_mut().zip(results) {
                    let (u, inv) = r?;
                    cache.store(u.clone(), inv);
                    out.push(u);
                }
                Ok(out)
            }
            Variant::Euclidean => (0..self.caps.len())
                .into_par_iter()
                .map(|i| {
                    let m = u_prev[i].axpy(-tau, &(&atv[i] + &self.lin[i]));
                    prox_logdet_quadratic(&m, None, self.beta[i], tau)
                })
                .collect(),
        }
    }

    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>> {
        z.par_iter().zip(&self.caps).map(|(zi, cap)| prox_conj_indicator(zi, sigma, cap)).collect()
    }

    fn objective(&self, u: &[SymMat<T>]) -> Result<T> {
        let mut val = T::zero();
        for ((ui, li), &b) in u.iter().zip(&self.lin).zip(&self.beta) {
            if b > T::zero() {
                val -= b * logdet_pd(ui)?;
            }
            val += frob_inner(li, ui)?;
        }
        Ok(val)
    }

    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        u.iter()
            .zip(&self.lin)
            .zip(&self.beta)
            .map(|((ui, li), &b)| if b > T::zero() { Ok(li.axpy(-b, &inv_pd(ui)?)) } else { Ok(li.clone()) })
            .collect()
    }

    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        u.iter().map(project_psd).collect()
    }

    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>> {
        w.iter().zip(&self.caps).map(|(wi, cap)| cap.project(wi)).collect()
    }

    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool {
        u.iter().zip(&self.caps).all(|(ui, c)| ui.is_psd_within(tol) && (&c.cap - ui).is_psd_within(tol))
    }

    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool {
        v.iter().any(|vi| !vi.is_psd_within(sign_tol(tol, vi)))
    }

    fn initial_primal(&self) -> Blocks<T> {
        self.caps.iter().map(|c| c.cap.scale(T::lit(0.5)).axpy(T::lit(1e-8), &SymMat::identity(c.cap.dim()))).collect()
    }
}
