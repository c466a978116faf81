use std::sync::Arc;

use crate::cones::{
    project_cap, project_psd, prox_conj_indicator, prox_logdet_quadratic, CapSet, KernelSpec, LogDetCapProx,
    LogDetPsdProx, Projector, PsdCone,
};
use crate::dca::DcProgram;
use crate::error::{Error, Result};
use crate::pdhg::{Blocks, LinearMapSpec, Subproblem};
use crate::scalar::Real;
use crate::symmat::{frob_inner, inv_pd, logdet_pd, SymMat};

use super::{check_pd, check_psd, check_same_dim, sign_tol, InvCache, Variant};

/// `min −β log det(X+Y+Σ₂) − log det(X+Σ₁) + α log det(X+Y+Σ₁) + λ log det(X+Σ₂)`
/// subject to `X, Y ⪰ 0`, `X + Y ⪯ C`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcCommonInstance<T: Real> {
    pub sigma1: SymMat<T>,
    pub sigma2: SymMat<T>,
    pub cap: SymMat<T>,
    pub alpha: T,
    pub beta: T,
    pub lambda: T,
}

impl<T: Real> BcCommonInstance<T> {
    pub fn new(sigma1: SymMat<T>, sigma2: SymMat<T>, cap: SymMat<T>, alpha: T, beta: T, lambda: T) -> Result<Self> {
        let inst = Self { sigma1, sigma2, cap, alpha, beta, lambda };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_same_dim(&self.sigma1, &self.cap)?;
        check_same_dim(&self.sigma2, &self.cap)?;
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.lambda > T::one()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must exceed 1"));
        }
        check_pd(&self.sigma1, "Sigma1")?;
        check_pd(&self.sigma2, "Sigma2")?;
        check_psd(&self.cap, "C")
    }
}

/// DC split over `(X, Y)`:
/// `g = −β log det(X+Y+Σ₂) − log det(X+Σ₁)`,
/// `h = −α log det(X+Y+Σ₁) − λ log det(X+Σ₂)`.
///
/// Subproblems run in `(U, W) = (X, X+Y)`.
#[derive(Debug, Clone)]
pub struct BcCommon<T: Real> {
    inst: BcCommonInstance<T>,
    variant: Variant,
    u_prox: Arc<LogDetPsdProx<T>>,
    w_prox: Arc<LogDetCapProx<T>>,
}

pub fn bc_common_program<T: Real>(inst: BcCommonInstance<T>, variant: Variant) -> Result<BcCommon<T>> {
    inst.validate()?;
    let u_prox = Arc::new(LogDetPsdProx::new(&inst.sigma1)?);
    let w_prox = Arc::new(LogDetCapProx::new(&inst.sigma2, &inst.cap)?);
    Ok(BcCommon { inst, variant, u_prox, w_prox })
}

impl<T: Real> BcCommon<T> {
    pub fn instance(&self) -> &BcCommonInstance<T> {
        &self.inst
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Smallest eigenvalue of the recovered `Y`.
    pub fn y_min_eig(&self, x: &[SymMat<T>]) -> Result<T> {
        x[1].min_eig()
    }
}

impl<T: Real> DcProgram<T> for BcCommon<T> {
    type Sub = BcCommonSub<T>;

    fn eval_g(&self, x: &[SymMat<T>]) -> Result<T> {
        let s = &x[0] + &x[1];
        Ok(-self.inst.beta * logdet_pd(&(&s + &self.inst.sigma2))? - logdet_pd(&(&x[0] + &self.inst.sigma1))?)
    }

    fn eval_h(&self, x: &[SymMat<T>]) -> Result<T> {
        let mut h = -self.inst.lambda * logdet_pd(&(&x[0] + &self.inst.sigma2))?;
        if self.inst.alpha > T::zero() {
            h -= self.inst.alpha * logdet_pd(&(&(&x[0] + &x[1]) + &self.inst.sigma1))?;
        }
        Ok(h)
    }

    fn grad_g(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        let gy = inv_pd(&(&(&x[0] + &x[1]) + &self.inst.sigma2))?.scale(-self.inst.beta);
        let gx = &gy - &inv_pd(&(&x[0] + &self.inst.sigma1))?;
        Ok(vec![gx, gy])
    }

    fn grad_h(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        let n = x[0].dim();
        let hy = if self.inst.alpha > T::zero() {
            inv_pd(&(&(&x[0] + &x[1]) + &self.inst.sigma1))?.scale(-self.inst.alpha)
        } else {
            SymMat::zeros(n)
        };
        let hx = hy.axpy(-self.inst.lambda, &inv_pd(&(&x[0] + &self.inst.sigma2))?);
        Ok(vec![hx, hy])
    }

    fn build_subproblem(&self, x_k: &[SymMat<T>]) -> Result<BcCommonSub<T>> {
        let n = x_k[0].dim();
        let lin_u = inv_pd(&(&x_k[0] + &self.inst.sigma2))?.scale(self.inst.lambda);
        let lin_w = if self.inst.alpha > T::zero() {
            inv_pd(&(&(&x_k[0] + &x_k[1]) + &self.inst.sigma1))?.scale(self.inst.alpha)
        } else {
            SymMat::zeros(n)
        };
        let one = T::one();
        let diff = vec![(0, -one), (1, one)];
        let map = match self.variant {
            Variant::Bregman => LinearMapSpec::from_rows(2, vec![diff])?,
            Variant::Euclidean => LinearMapSpec::from_rows(2, vec![diff, vec![(0, one)], vec![(1, one)]])?,
        };
        Ok(BcCommonSub {
            variant: self.variant,
            sigma1: self.inst.sigma1.clone(),
            sigma2: self.inst.sigma2.clone(),
            cap: CapSet { cap: self.inst.cap.clone() },
            beta: self.inst.beta,
            lin_u,
            lin_w,
            u_prox: Arc::clone(&self.u_prox),
            w_prox: Arc::clone(&self.w_prox),
            map,
            u_cache: InvCache::default(),
            w_cache: InvCache::default(),
        })
    }

    fn feasible_start(&self) -> Blocks<T> {
        vec![self.inst.cap.scale(T::lit(0.5)), self.inst.cap.scale(T::lit(0.25))]
    }

    fn is_feasible(&self, x: &[SymMat<T>], tol: T) -> bool {
        x[0].is_psd_within(tol) && x[1].is_psd_within(tol) && (&(&self.inst.cap - &x[0]) - &x[1]).is_psd_within(tol)
    }

    fn repair(&self, x: Blocks<T>) -> Result<Blocks<T>> {
        let xs = project_psd(&x[0])?;
        let room = &self.inst.cap - &xs;
        Ok(vec![xs, project_psd(&project_cap(&x[1], &room)?)?])
    }

    fn point_to_primal(&self, x: &[SymMat<T>]) -> Blocks<T> {
        vec![x[0].clone(), &x[0] + &x[1]]
    }

    fn primal_to_point(&self, u: &[SymMat<T>]) -> Blocks<T> {
        vec![u[0].clone(), &u[1] - &u[0]]
    }

    fn flag(&self, x: &[SymMat<T>]) -> Option<String> {
        match self.y_min_eig(x) {
            Ok(m) if m >= T::lit(-1e-6) => None,
            Ok(m) => Some(format!("recovered Y has smallest eigenvalue {m}")),
            Err(e) => Some(format!("recovered Y could not be checked: {e}")),
        }
    }
}

/// Surrogate over `(U, W)`:
/// `−log det(U+Σ₁) + ⟨λ(X_k+Σ₂)⁻¹, U⟩ − β log det(W+Σ₂) + ⟨α(X_k+Y_k+Σ₁)⁻¹, W⟩`
/// subject to `U ⪰ 0`, `W ⪯ C`, `W − U ⪰ 0`.
///
/// Bregman: the first two constraints live in the two prox operators and
/// `W − U ⪰ 0` in the dual. Euclidean: all three are dual blocks of the
/// stacked map `(W − U; U; W)`.
#[derive(Debug, Clone)]
pub struct BcCommonSub<T: Real> {
    variant: Variant,
    sigma1: SymMat<T>,
    sigma2: SymMat<T>,
    cap: CapSet<T>,
    beta: T,
    lin_u: SymMat<T>,
    lin_w: SymMat<T>,
    u_prox: Arc<LogDetPsdProx<T>>,
    w_prox: Arc<LogDetCapProx<T>>,
    map: LinearMapSpec<T>,
    u_cache: InvCache<T>,
    w_cache: InvCache<T>,
}

impl<T: Real> Subproblem<T> for BcCommonSub<T> {
    fn map(&self) -> &LinearMapSpec<T> {
        &self.map
    }

    fn primal_kernels(&self) -> Vec<KernelSpec<T>> {
        match self.variant {
            Variant::Bregman => {
                vec![KernelSpec::LogDetShifted(self.sigma1.clone()), KernelSpec::LogDetShifted(self.sigma2.clone())]
            }
            Variant::Euclidean => vec![KernelSpec::Euclidean, KernelSpec::Euclidean],
        }
    }

    fn primal_upper_bounds(&self) -> Blocks<T> {
        vec![self.cap.cap.clone(), self.cap.cap.clone()]
    }

    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>> {
        let inv_tau = T::one() / tau;
        match self.variant {
            Variant::Bregman => {
                let inv_u = self.u_cache.get(&u_prev[0], Some(&self.sigma1))?;
                let op_u = (&atv[0] + &self.lin_u).axpy(inv_tau, &inv_u);
                let pu = self.u_prox.apply(&op_u, T::one() + inv_tau)?;
                let inv_w = self.w_cache.get(&u_prev[1], Some(&self.sigma2))?;
                let op_w = (&atv[1] + &self.lin_w).axpy(inv_tau, &inv_w);
                let pw = self.w_prox.apply(&op_w, self.beta + inv_tau)?;
                self.u_cache.store(pu.x.clone(), pu.shifted_inv);
                self.w_cache.store(pw.x.clone(), pw.shifted_inv);
                Ok(vec![pu.x, pw.x])
            }
            Variant::Euclidean => {
                let mu = u_prev[0].axpy(-tau, &(&atv[0] + &self.lin_u));
                let mw = u_prev[1].axpy(-tau, &(&atv[1] + &self.lin_w));
                Ok(vec![
                    prox_logdet_quadratic(&mu, Some(&self.sigma1), T::one(), tau)?,
                    prox_logdet_quadratic(&mw, Some(&self.sigma2), self.beta, tau)?,
                ])
            }
        }
    }

    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![prox_conj_indicator(&z[0], sigma, &PsdCone)?]),
            Variant::Euclidean => Ok(vec![
                prox_conj_indicator(&z[0], sigma, &PsdCone)?,
                prox_conj_indicator(&z[1], sigma, &PsdCone)?,
                prox_conj_indicator(&z[2], sigma, &self.cap)?,
            ]),
        }
    }

    fn objective(&self, u: &[SymMat<T>]) -> Result<T> {
        Ok(-logdet_pd(&(&u[0] + &self.sigma1))? + frob_inner(&self.lin_u, &u[0])?
            - self.beta * logdet_pd(&(&u[1] + &self.sigma2))?
            + frob_inner(&self.lin_w, &u[1])?)
    }

    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![
            &self.lin_u - &inv_pd(&(&u[0] + &self.sigma1))?,
            self.lin_w.axpy(-self.beta, &inv_pd(&(&u[1] + &self.sigma2))?),
        ])
    }

    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![project_psd(&u[0])?, project_cap(&u[1], &self.cap.cap)?]),
            Variant::Euclidean => Ok(u.to_vec()),
        }
    }

    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![PsdCone.project(&w[0])?]),
            Variant::Euclidean => Ok(vec![PsdCone.project(&w[0])?, PsdCone.project(&w[1])?, self.cap.project(&w[2])?]),
        }
    }

    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool {
        u[0].is_psd_within(tol) && (&u[1] - &u[0]).is_psd_within(tol) && (&self.cap.cap - &u[1]).is_psd_within(tol)
    }

    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool {
        let nonpos = |m: &SymMat<T>| (-m).is_psd_within(sign_tol(tol, m));
        match self.variant {
            Variant::Bregman => !nonpos(&v[0]),
            Variant::Euclidean => !nonpos(&v[0]) || !nonpos(&v[1]) || !v[2].is_psd_within(sign_tol(tol, &v[2])),
        }
    }

    fn initial_primal(&self) -> Blocks<T> {
        let c = &self.cap.cap;
        vec![c.scale(T::lit(0.5)), c.scale(T::lit(0.75))]
    }
}
