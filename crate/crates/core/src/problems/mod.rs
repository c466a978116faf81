//! The three log-det matrix programs, their DC splittings, synthetic
//! instances and instance files.
//!
//! * [`BcPrivate`]: `min −log det(X+Σ₁) + λ log det(X+Σ₂)` over `0 ⪯ X ⪯ C`.
//! * [`BcCommon`]: two-block variant over `(X, Y)` with `X+Y ⪯ C`.
//! * [`BrascampLieb`]: `p` blocks `X_i` coupled through `Σ_j α_j log det(Σ_i A_ij X_i A_ijᵀ + ρI)`.
//!
//! Each program comes in two flavours ([`Variant`]): Bregman kernels
//! matched to the log-det terms, or plain Euclidean kernels with the
//! constraints moved into the dual blocks.

mod bc_common;
mod bc_private;
mod brascamp_lieb;
mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bc_common::{bc_common_program, BcCommon, BcCommonInstance, BcCommonSub};
pub use bc_private::{bc_private_program, BcPrivate, BcPrivateInstance, BcPrivateSub};
pub use brascamp_lieb::{gbl_program, BrascampLieb, BrascampLiebInstance, BrascampLiebSub};
pub use io::{instance_from_json, instance_to_json, read_instance, write_instance, Provenance, SCHEMA_VERSION};
pub use synth::{gen_synthetic, DEFAULT_COND};

use crate::diagnostics::ConjugateH;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::{inv_pd, SymMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    BcPrivate,
    BcCommon,
    BrascampLieb,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::BcPrivate, Kind::BcCommon, Kind::BrascampLieb];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::BcPrivate => "bc-private",
            Kind::BcCommon => "bc-common",
            Kind::BrascampLieb => "brascamp-lieb",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown problem kind '{s}'")))
    }
}

/// Kernel choice for the inner solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Bregman,
    Euclidean,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Bregman, Variant::Euclidean];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Bregman => "bregman",
            Variant::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown solver variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemInstance<T: Real> {
    BcPrivate(BcPrivateInstance<T>),
    BcCommon(BcCommonInstance<T>),
    BrascampLieb(BrascampLiebInstance<T>),
}

impl<T: Real> ProblemInstance<T> {
    pub fn kind(&self) -> Kind {
        match self {
            ProblemInstance::BcPrivate(_) => Kind::BcPrivate,
            ProblemInstance::BcCommon(_) => Kind::BcCommon,
            ProblemInstance::BrascampLieb(_) => Kind::BrascampLieb,
        }
    }

    /// Matrix dimension (of the first block for Brascamp–Lieb).
    pub fn dim(&self) -> usize {
        match self {
            ProblemInstance::BcPrivate(i) => i.cap.dim(),
            ProblemInstance::BcCommon(i) => i.cap.dim(),
            ProblemInstance::BrascampLieb(i) => i.n[0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProblemInstance::BcPrivate(i) => i.validate(),
            ProblemInstance::BcCommon(i) => i.validate(),
            ProblemInstance::BrascampLieb(i) => i.validate(),
        }
    }

    /// Builds the program for `variant` and hands it to `visitor`, which is
    /// how callers run generic code over whichever class the instance is.
    pub fn visit<V: ProgramVisitor<T>>(&self, variant: Variant, visitor: V) -> Result<V::Output> {
        Ok(match self {
            ProblemInstance::BcPrivate(i) => visitor.visit(&bc_private_program(i.clone(), variant)?),
            ProblemInstance::BcCommon(i) => visitor.visit(&bc_common_program(i.clone(), variant)?),
            ProblemInstance::BrascampLieb(i) => visitor.visit(&gbl_program(i.clone(), variant)?),
        })
    }
}

/// Generic operation over the three program types; see [`ProblemInstance::visit`].
pub trait ProgramVisitor<T: Real> {
    type Output;
    fn visit<P: ConjugateH<T> + Sync>(self, prog: &P) -> Self::Output;
}

pub(crate) fn check_pd<T: Real>(m: &SymMat<T>, name: &str) -> Result<()> {
    if m.is_pd() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive definite")))
    }
}

pub(crate) fn check_psd<T: Real>(m: &SymMat<T>, name: &str) -> Result<()> {
    let tol = T::tol(1e-10) * (T::one() + m.max_abs());
    if m.is_psd_within(tol) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive semidefinite")))
    }
}

pub(crate) fn check_same_dim<T: Real>(a: &SymMat<T>, b: &SymMat<T>) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() })
    }
}

/// `(u + shift)⁻¹` for the point the previous prox returned, which the prox
/// computes anyway; anything else is factorized.
#[derive(Debug, Clone, Default)]
pub(crate) struct InvCache<T: Real> {
    point: Option<SymMat<T>>,
    inv: Option<SymMat<T>>,
}

impl<T: Real> InvCache<T> {
    pub fn get(&self, u: &SymMat<T>, shift: Option<&SymMat<T>>) -> Result<SymMat<T>> {
        if let (Some(p), Some(inv)) = (&self.point, &self.inv) {
            if p == u {
                return Ok(inv.clone());
            }
        }
        match shift {
            Some(s) => inv_pd(&(u + s)),
            None => inv_pd(u),
        }
    }

    pub fn store(&mut self, point: SymMat<T>, inv: SymMat<T>) {
        self.point = Some(point);
        self.inv = Some(inv);
    }
}

/// Relative eigenvalue tolerance used by the dual sign checks.
pub(crate) fn sign_tol<T: Real>(tol: T, v: &SymMat<T>) -> T {
    tol * (T::one() + v.frob_norm())
}
