use std::sync::Arc;

use crate::cones::{
    project_cap, project_psd, prox_conj_indicator, prox_logdet_quadratic, CapSet, KernelSpec, LogDetPsdProx, Projector,
    PsdCone,
};
use crate::dca::DcProgram;
use crate::error::{Error, Result};
use crate::pdhg::{Blocks, LinearMapSpec, Subproblem};
use crate::scalar::Real;
use crate::symmat::{frob_inner, inv_pd, logdet_pd, SymMat};

use super::{check_pd, check_psd, check_same_dim, sign_tol, InvCache, Variant};

/// `min −log det(X + Σ₁) + λ log det(X + Σ₂)` subject to `0 ⪯ X ⪯ C`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcPrivateInstance<T: Real> {
    pub sigma1: SymMat<T>,
    pub sigma2: SymMat<T>,
    pub cap: SymMat<T>,
    pub lambda: T,
}

impl<T: Real> BcPrivateInstance<T> {
    pub fn new(sigma1: SymMat<T>, sigma2: SymMat<T>, cap: SymMat<T>, lambda: T) -> Result<Self> {
        let inst = Self { sigma1, sigma2, cap, lambda };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_same_dim(&self.sigma1, &self.cap)?;
        check_same_dim(&self.sigma2, &self.cap)?;
        if !(self.lambda > T::one()) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must exceed 1"));
        }
        check_pd(&self.sigma1, "Sigma1")?;
        check_pd(&self.sigma2, "Sigma2")?;
        check_psd(&self.cap, "C")
    }
}

/// DC split `g(X) = −log det(X+Σ₁)`, `h(X) = −λ log det(X+Σ₂)`.
#[derive(Debug, Clone)]
pub struct BcPrivate<T: Real> {
    inst: BcPrivateInstance<T>,
    variant: Variant,
    prox: Arc<LogDetPsdProx<T>>,
}

pub fn bc_private_program<T: Real>(inst: BcPrivateInstance<T>, variant: Variant) -> Result<BcPrivate<T>> {
    inst.validate()?;
    let prox = Arc::new(LogDetPsdProx::new(&inst.sigma1)?);
    Ok(BcPrivate { inst, variant, prox })
}

impl<T: Real> BcPrivate<T> {
    pub fn instance(&self) -> &BcPrivateInstance<T> {
        &self.inst
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }
}

impl<T: Real> DcProgram<T> for BcPrivate<T> {
    type Sub = BcPrivateSub<T>;

    fn eval_g(&self, x: &[SymMat<T>]) -> Result<T> {
        Ok(-logdet_pd(&(&x[0] + &self.inst.sigma1))?)
    }

    fn eval_h(&self, x: &[SymMat<T>]) -> Result<T> {
        Ok(-self.inst.lambda * logdet_pd(&(&x[0] + &self.inst.sigma2))?)
    }

    fn grad_g(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![-&inv_pd(&(&x[0] + &self.inst.sigma1))?])
    }

    fn grad_h(&self, x: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![inv_pd(&(&x[0] + &self.inst.sigma2))?.scale(-self.inst.lambda)])
    }

    fn build_subproblem(&self, x_k: &[SymMat<T>]) -> Result<BcPrivateSub<T>> {
        let lin = inv_pd(&(&x_k[0] + &self.inst.sigma2))?.scale(self.inst.lambda);
        let map = match self.variant {
            Variant::Bregman => LinearMapSpec::identity(1),
            Variant::Euclidean => LinearMapSpec::from_rows(1, vec![vec![(0, T::one())], vec![(0, T::one())]])?,
        };
        Ok(BcPrivateSub {
            variant: self.variant,
            sigma1: self.inst.sigma1.clone(),
            cap: CapSet { cap: self.inst.cap.clone() },
            lin,
            prox: Arc::clone(&self.prox),
            map,
            cache: InvCache::default(),
        })
    }

    fn feasible_start(&self) -> Blocks<T> {
        vec![self.inst.cap.scale(T::lit(0.5))]
    }

    fn is_feasible(&self, x: &[SymMat<T>], tol: T) -> bool {
        x[0].is_psd_within(tol) && (&self.inst.cap - &x[0]).is_psd_within(tol)
    }

    fn repair(&self, x: Blocks<T>) -> Result<Blocks<T>> {
        Ok(vec![project_psd(&project_cap(&x[0], &self.inst.cap)?)?])
    }
}

/// Surrogate `−log det(U+Σ₁) + ⟨λ(X_k+Σ₂)⁻¹, U⟩` over `0 ⪯ U ⪯ C`.
///
/// Bregman: `C₁ = S₊` inside the prox, `C₂ = {U ⪯ C}` in the dual, map `Id`.
/// Euclidean: no primal constraint, duals for `S₊` and the cap, map `(Id; Id)`.
#[derive(Debug, Clone)]
pub struct BcPrivateSub<T: Real> {
    variant: Variant,
    sigma1: SymMat<T>,
    cap: CapSet<T>,
    lin: SymMat<T>,
    prox: Arc<LogDetPsdProx<T>>,
    map: LinearMapSpec<T>,
    cache: InvCache<T>,
}

impl<T: Real> BcPrivateSub<T> {
    /// `λ(X_k + Σ₂)⁻¹`, the negated gradient of `h` at the linearization point.
    pub fn linear_term(&self) -> &SymMat<T> {
        &self.lin
    }
}

impl<T: Real> Subproblem<T> for BcPrivateSub<T> {
    fn map(&self) -> &LinearMapSpec<T> {
        &self.map
    }

    fn primal_kernels(&self) -> Vec<KernelSpec<T>> {
        match self.variant {
            Variant::Bregman => vec![KernelSpec::LogDetShifted(self.sigma1.clone())],
            Variant::Euclidean => vec![KernelSpec::Euclidean],
        }
    }

    fn primal_upper_bounds(&self) -> Blocks<T> {
        vec![self.cap.cap.clone()]
    }

    fn primal_prox(&mut self, u_prev: &[SymMat<T>], atv: &[SymMat<T>], tau: T) -> Result<Blocks<T>> {
        let inv_tau = T::one() / tau;
        match self.variant {
            Variant::Bregman => {
                let inv = self.cache.get(&u_prev[0], Some(&self.sigma1))?;
                let operand = (&atv[0] + &self.lin).axpy(inv_tau, &inv);
                let p = self.prox.apply(&operand, T::one() + inv_tau)?;
                self.cache.store(p.x.clone(), p.shifted_inv);
                Ok(vec![p.x])
            }
            Variant::Euclidean => {
                let m = u_prev[0].axpy(-tau, &(&atv[0] + &self.lin));
                Ok(vec![prox_logdet_quadratic(&m, Some(&self.sigma1), T::one(), tau)?])
            }
        }
    }

    fn dual_prox(&self, z: &[SymMat<T>], sigma: T) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![prox_conj_indicator(&z[0], sigma, &self.cap)?]),
            Variant::Euclidean => {
                Ok(vec![prox_conj_indicator(&z[0], sigma, &PsdCone)?, prox_conj_indicator(&z[1], sigma, &self.cap)?])
            }
        }
    }

    fn objective(&self, u: &[SymMat<T>]) -> Result<T> {
        Ok(-logdet_pd(&(&u[0] + &self.sigma1))? + frob_inner(&self.lin, &u[0])?)
    }

    fn smooth_gradient(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        Ok(vec![&self.lin - &inv_pd(&(&u[0] + &self.sigma1))?])
    }

    fn project_primal_set(&self, u: &[SymMat<T>]) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![project_psd(&u[0])?]),
            Variant::Euclidean => Ok(u.to_vec()),
        }
    }

    fn project_dual_set(&self, w: &[SymMat<T>]) -> Result<Blocks<T>> {
        match self.variant {
            Variant::Bregman => Ok(vec![self.cap.project(&w[0])?]),
            Variant::Euclidean => Ok(vec![PsdCone.project(&w[0])?, self.cap.project(&w[1])?]),
        }
    }

    fn is_feasible(&self, u: &[SymMat<T>], tol: T) -> bool {
        u[0].is_psd_within(tol) && (&self.cap.cap - &u[0]).is_psd_within(tol)
    }

    fn dual_sign_violation(&self, v: &[SymMat<T>], tol: T) -> bool {
        match self.variant {
            Variant::Bregman => !v[0].is_psd_within(sign_tol(tol, &v[0])),
            Variant::Euclidean => {
                !(-&v[0]).is_psd_within(sign_tol(tol, &v[0])) || !v[1].is_psd_within(sign_tol(tol, &v[1]))
            }
        }
    }

    fn initial_primal(&self) -> Blocks<T> {
        vec![self.cap.cap.scale(T::lit(0.5))]
    }
}
