//! Projections and closed-form proximal operators for the constraint pieces
//! and log-det terms that appear in every inner iteration.
//!
//! The log-det operators all reduce to one symmetric eigendecomposition of a
//! congruence-transformed operand followed by a scalar map on the
//! eigenvalues. The weight `c` on the log-det term is folded into the
//! operand (`A / c`) before decomposing.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::{frob_inner, inv_pd, logdet_pd, sqrt_and_inv_sqrt, sym_eig, SymMat};

/// Kernel generating a Bregman distance on symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec<T: Real> {
    /// `½‖X‖_F²`.
    Euclidean,
    /// `-log det(X + shift)` on `X + shift ≻ 0`.
    LogDetShifted(SymMat<T>),
    /// `-log det X` on `X ≻ 0`.
    LogDetBarrier,
}

impl<T: Real> KernelSpec<T> {
    pub fn log_det_shifted(shift: SymMat<T>) -> Result<Self> {
        if !shift.is_pd() {
            return Err(Error::invalid("kernel shift must be positive definite"));
        }
        Ok(KernelSpec::LogDetShifted(shift))
    }

    pub fn value(&self, x: &SymMat<T>) -> Result<T> {
        match self {
            KernelSpec::Euclidean => Ok(frob_inner(x, x)? * T::lit(0.5)),
            KernelSpec::LogDetShifted(s) => {
                check_dim(x, s)?;
                logdet_pd(&(x + s)).map(|v| -v).map_err(|_| out_of_domain("X + shift"))
            }
            KernelSpec::LogDetBarrier => logdet_pd(x).map(|v| -v).map_err(|_| out_of_domain("X")),
        }
    }

    pub fn gradient(&self, x: &SymMat<T>) -> Result<SymMat<T>> {
        match self {
            KernelSpec::Euclidean => Ok(x.clone()),
            KernelSpec::LogDetShifted(s) => {
                check_dim(x, s)?;
                inv_pd(&(x + s)).map(|m| -&m).map_err(|_| out_of_domain("X + shift"))
            }
            KernelSpec::LogDetBarrier => inv_pd(x).map(|m| -&m).map_err(|_| out_of_domain("X")),
        }
    }

    /// Strong-convexity modulus (Frobenius norm) on the set `{X : X ⪯ upper}`
    /// intersected with the kernel domain.
    ///
    /// The Hessian of `-log det(X + S)` satisfies
    /// `⟨Δ, (X+S)⁻¹ Δ (X+S)⁻¹⟩ ≥ ‖Δ‖² / λ_max(X+S)²`, so the modulus is
    /// `1 / λ_max(upper + S)²`.
    pub fn strong_convexity(&self, upper: &SymMat<T>) -> Result<T> {
        let top = match self {
            KernelSpec::Euclidean => return Ok(T::one()),
            KernelSpec::LogDetShifted(s) => (upper + s).max_eig()?,
            KernelSpec::LogDetBarrier => upper.max_eig()?,
        };
        if top <= T::zero() {
            return Err(Error::invalid("upper bound leaves an empty kernel domain"));
        }
        Ok(T::one() / (top * top))
    }
}

fn out_of_domain(what: &str) -> Error {
    Error::OutOfDomain(format!("{what} is not positive definite"))
}

fn check_dim<T: Real>(a: &SymMat<T>, b: &SymMat<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: a.dim() });
    }
    Ok(())
}

/// `d(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩`.
pub fn bregman_distance<T: Real>(kernel: &KernelSpec<T>, x: &SymMat<T>, y: &SymMat<T>) -> Result<T> {
    check_dim(x, y)?;
    let fx = kernel.value(x)?;
    let fy = kernel.value(y)?;
    let gy = kernel.gradient(y)?;
    Ok(fx - fy - frob_inner(&gy, &(x - y))?)
}

/// Frobenius-nearest positive semidefinite matrix.
pub fn project_psd<T: Real>(m: &SymMat<T>) -> Result<SymMat<T>> {
    Ok(sym_eig(m)?.compose(|l| l.max(T::zero())))
}

/// Frobenius-nearest point of the cap set `{X : X ⪯ C}`.
pub fn project_cap<T: Real>(m: &SymMat<T>, cap: &SymMat<T>) -> Result<SymMat<T>> {
    check_dim(m, cap)?;
    Ok(cap - &project_psd(&(cap - m))?)
}

/// Euclidean projection onto a closed convex set of symmetric matrices.
pub trait Projector<T: Real>: Send + Sync {
    fn project(&self, m: &SymMat<T>) -> Result<SymMat<T>>;
}

/// The positive semidefinite cone.
#[derive(Debug, Clone, Copy, Default)]
pub struct PsdCone;

/// `{X : X ⪯ cap}`.
#[derive(Debug, Clone)]
pub struct CapSet<T: Real> {
    pub cap: SymMat<T>,
}

impl<T: Real> Projector<T> for PsdCone {
    fn project(&self, m: &SymMat<T>) -> Result<SymMat<T>> {
        project_psd(m)
    }
}

impl<T: Real> Projector<T> for CapSet<T> {
    fn project(&self, m: &SymMat<T>) -> Result<SymMat<T>> {
        project_cap(m, &self.cap)
    }
}

impl<T: Real, F> Projector<T> for F
where
    F: Fn(&SymMat<T>) -> Result<SymMat<T>> + Send + Sync,
{
    fn project(&self, m: &SymMat<T>) -> Result<SymMat<T>> {
        self(m)
    }
}

/// `prox_{σ δ*_K}(z) = z − σ · proj_K(z / σ)` (Moreau decomposition).
///
/// For the cap set the result is PSD; for the PSD cone it is NSD.
pub fn prox_conj_indicator<T: Real, P: Projector<T> + ?Sized>(z: &SymMat<T>, sigma: T, proj: &P) -> Result<SymMat<T>> {
    if sigma <= T::zero() {
        return Err(Error::invalid("sigma must be positive"));
    }
    let p = proj.project(&z.scale(T::one() / sigma))?;
    Ok(z.axpy(-sigma, &p))
}

/// Proximal output together with `(X + shift)⁻¹`, which the next inner
/// iteration needs and which falls out of the eigendecomposition for free.
#[derive(Debug, Clone)]
pub struct ProxPoint<T: Real> {
    pub x: SymMat<T>,
    pub shifted_inv: SymMat<T>,
}

/// Minimizer of `−c·log det(X + Σ) + ⟨A, X⟩` over `X ⪰ 0` with `Σ` fixed;
/// caches `Σ^{±1/2}`.
#[derive(Debug, Clone)]
pub struct LogDetPsdProx<T: Real> {
    sqrt: SymMat<T>,
    inv_sqrt: SymMat<T>,
}

impl<T: Real> LogDetPsdProx<T> {
    pub fn new(sigma: &SymMat<T>) -> Result<Self> {
        let (sqrt, inv_sqrt) = sqrt_and_inv_sqrt(sigma)?;
        Ok(Self { sqrt, inv_sqrt })
    }

    pub fn dim(&self) -> usize {
        self.sqrt.dim()
    }

    pub fn apply(&self, a: &SymMat<T>, c: T) -> Result<ProxPoint<T>> {
        self.apply_with(a, c, psi_psd)
    }

    /// Same as [`apply`](Self::apply) with a caller-supplied eigenvalue map;
    /// the check suite uses this to confirm the oracles catch a wrong map.
    pub fn apply_with(&self, a: &SymMat<T>, c: T, psi: impl Fn(T) -> T) -> Result<ProxPoint<T>> {
        check_dim(a, &self.sqrt)?;
        if c <= T::zero() {
            return Err(Error::invalid("log-det weight must be positive"));
        }
        let m = a.scale(T::one() / c).sandwich(&self.sqrt);
        let eig = sym_eig(&m)?;
        if eig.min() <= T::zero() {
            return Err(Error::Unbounded(format!("operand has eigenvalue {} ≤ 0 after congruence", eig.min())));
        }
        let x = eig.compose(&psi).sandwich(&self.sqrt);
        // (X + Σ)⁻¹ = Σ^{-1/2} Q (ψ(Λ) + I)⁻¹ Qᵀ Σ^{-1/2}
        let shifted_inv = eig.compose(|l| T::one() / (psi(l) + T::one())).sandwich(&self.inv_sqrt);
        Ok(ProxPoint { x, shifted_inv })
    }
}

/// `ψ(γ) = max{(1 − γ)/γ, 0}`.
pub fn psi_psd<T: Real>(g: T) -> T {
    ((T::one() - g) / g).max(T::zero())
}

/// `ψ(γ) = 1` for `γ ≤ 1`, `1/γ` otherwise. Covers `γ ≤ 0`, where the scalar
/// problem `min λγ − log γ` over `(0, 1]` still has its minimizer at 1.
pub fn psi_cap<T: Real>(g: T) -> T {
    if g <= T::one() {
        T::one()
    } else {
        T::one() / g
    }
}

/// Closed-form minimizer of `−c·log det(X + Σ) + ⟨A, X⟩` over `X ⪰ 0`.
pub fn prox_logdet_psd<T: Real>(a: &SymMat<T>, sigma: &SymMat<T>, c: T) -> Result<SymMat<T>> {
    Ok(LogDetPsdProx::new(sigma)?.apply(a, c)?.x)
}

/// Minimizer of `−c·log det(X + Σ) + ⟨A, X⟩` over `X ⪯ C`, with `Σ` and `C`
/// fixed; caches `(C + Σ)^{±1/2}`.
#[derive(Debug, Clone)]
pub struct LogDetCapProx<T: Real> {
    shift: SymMat<T>,
    sqrt: SymMat<T>,
    inv_sqrt: SymMat<T>,
}

impl<T: Real> LogDetCapProx<T> {
    pub fn new(sigma: &SymMat<T>, cap: &SymMat<T>) -> Result<Self> {
        check_dim(cap, sigma)?;
        let (sqrt, inv_sqrt) = sqrt_and_inv_sqrt(&(cap + sigma))?;
        Ok(Self { shift: sigma.clone(), sqrt, inv_sqrt })
    }

    pub fn apply(&self, a: &SymMat<T>, c: T) -> Result<ProxPoint<T>> {
        self.apply_with(a, c, psi_cap)
    }

    pub fn apply_with(&self, a: &SymMat<T>, c: T, psi: impl Fn(T) -> T) -> Result<ProxPoint<T>> {
        check_dim(a, &self.sqrt)?;
        if c <= T::zero() {
            return Err(Error::invalid("log-det weight must be positive"));
        }
        let m = a.scale(T::one() / c).sandwich(&self.sqrt);
        let eig = sym_eig(&m)?;
        let shifted = eig.compose(&psi).sandwich(&self.sqrt);
        let x = &shifted - &self.shift;
        let shifted_inv = eig.compose(|l| T::one() / psi(l)).sandwich(&self.inv_sqrt);
        Ok(ProxPoint { x, shifted_inv })
    }
}

/// Closed-form minimizer of `−c·log det(X + Σ) + ⟨A, X⟩` over `X ⪯ C`.
pub fn prox_logdet_cap<T: Real>(a: &SymMat<T>, sigma: &SymMat<T>, cap: &SymMat<T>, c: T) -> Result<SymMat<T>> {
    Ok(LogDetCapProx::new(sigma, cap)?.apply(a, c)?.x)
}

/// Minimizer `c·B⁻¹` of `−c·log det U + ⟨B, U⟩` over `U ≻ 0`.
pub fn prox_logdet_barrier<T: Real>(b: &SymMat<T>, c: T) -> Result<SymMat<T>> {
    if c <= T::zero() {
        return Err(Error::invalid("log-det weight must be positive"));
    }
    inv_pd(b).map(|inv| inv.scale(c)).map_err(|_| Error::Unbounded("barrier operand is not positive definite".into()))
}

/// Euclidean prox of a shifted log-det:
/// `argmin_X −c·log det(X + S) + (1/2τ)‖X − M‖²`, with `S = 0` when `shift`
/// is `None`. Each eigenvalue solves `z² − m z − τc = 0`; with `c = 0` this
/// is the projection of `M + S` onto the PSD cone.
pub fn prox_logdet_quadratic<T: Real>(m: &SymMat<T>, shift: Option<&SymMat<T>>, c: T, tau: T) -> Result<SymMat<T>> {
    let shifted = match shift {
        Some(s) => m + s,
        None => m.clone(),
    };
    let four_tc = T::lit(4.0) * tau * c;
    let half = T::lit(0.5);
    let z = sym_eig(&shifted)?.compose(|l| (l + (l * l + four_tc).sqrt()) * half);
    Ok(match shift {
        Some(s) => &z - s,
        None => z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::testutil::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> SymMat<f64> {
        SymMat::scalar(x)
    }

    fn diag(d: &[f64]) -> SymMat<f64> {
        SymMat::from_diagonal(d)
    }

    fn close(a: &SymMat<f64>, b: &SymMat<f64>, tol: f64) -> bool {
        (a - b).frob_norm() <= tol
    }

    #[test]
    fn psd_projection_examples() {
        assert_eq!(project_psd(&diag(&[1.0, -2.0])).unwrap(), diag(&[1.0, 0.0]));
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let p = random_psd(&mut r, 4, 4);
        assert!(close(&project_psd(&p).unwrap(), &p, 1e-10));
    }

    #[test]
    fn cap_projection_examples() {
        assert_eq!(project_cap(&s(3.0), &s(0.0)).unwrap(), s(0.0));
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let c = random_pd(&mut r, 3);
        let below = &c - &random_psd(&mut r, 3, 2);
        assert!(close(&project_cap(&below, &c).unwrap(), &below, 1e-10));
        assert!(project_cap(&s(1.0), &SymMat::identity(2)).is_err());
    }

    #[test]
    fn conj_indicator_examples() {
        let cap = CapSet { cap: s(1.0) };
        assert_abs_diff_eq!(prox_conj_indicator(&s(3.0), 1.0, &cap).unwrap().get(0, 0), 2.0);
        // z/σ strictly inside the cap: zero subgradient
        let big = CapSet { cap: SymMat::scaled_identity(2, 10.0) };
        let z = diag(&[0.3, -0.2]);
        assert!(close(&prox_conj_indicator(&z, 2.0, &big).unwrap(), &SymMat::zeros(2), 1e-14));
        assert!(prox_conj_indicator(&z, 0.0, &big).is_err());
        let as_fn = |m: &SymMat<f64>| project_psd(m);
        let out = prox_conj_indicator(&diag(&[2.0, -3.0]), 1.0, &as_fn).unwrap();
        assert!(close(&out, &diag(&[0.0, -3.0]), 1e-14));
    }

    #[test]
    fn logdet_psd_examples() {
        assert_abs_diff_eq!(prox_logdet_psd(&s(0.25), &s(2.0), 1.0).unwrap().get(0, 0), 2.0, epsilon = 1e-12);
        let i3 = SymMat::identity(3);
        let x = prox_logdet_psd(&SymMat::scaled_identity(3, 2.0), &i3, 1.0).unwrap();
        assert!(close(&x, &SymMat::zeros(3), 1e-14));
        let x = prox_logdet_psd(&SymMat::scaled_identity(3, 0.5), &i3, 1.0).unwrap();
        assert!(close(&x, &i3, 1e-12));
        // weight folds into the operand
        let x = prox_logdet_psd(&SymMat::scaled_identity(2, 1.0), &SymMat::identity(2), 2.0).unwrap();
        assert!(close(&x, &SymMat::identity(2), 1e-12));
        assert!(matches!(prox_logdet_psd(&diag(&[1.0, -1.0]), &SymMat::identity(2), 1.0), Err(Error::Unbounded(_))));
    }

    #[test]
    fn logdet_psd_inverse_is_consistent() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let sigma = random_pd(&mut r, 4);
        let a = random_pd(&mut r, 4);
        let p = LogDetPsdProx::new(&sigma).unwrap().apply(&a, 1.5).unwrap();
        let direct = inv_pd(&(&p.x + &sigma)).unwrap();
        assert!(close(&p.shifted_inv, &direct, 1e-9 * (1.0 + direct.frob_norm())));
    }

    #[test]
    fn logdet_cap_examples() {
        assert_abs_diff_eq!(prox_logdet_cap(&s(0.25), &s(1.0), &s(1.0), 1.0).unwrap().get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prox_logdet_cap(&s(1.0), &s(1.0), &s(1.0), 1.0).unwrap().get(0, 0), 0.0, epsilon = 1e-12);
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let sigma = random_pd(&mut r, 3);
        let cap = random_psd(&mut r, 3, 3);
        let c = 1.7;
        let a = inv_pd(&(&cap + &sigma)).unwrap().scale(c);
        let x = prox_logdet_cap(&a, &sigma, &cap, c).unwrap();
        assert!(close(&x, &cap, 1e-9));
    }

    #[test]
    fn logdet_cap_handles_indefinite_operand() {
        // scalar: min −log(x+1) − x over x ≤ 2 → x = 2
        let x = prox_logdet_cap(&s(-1.0), &s(1.0), &s(2.0), 1.0).unwrap();
        assert_abs_diff_eq!(x.get(0, 0), 2.0, epsilon = 1e-12);
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let sigma = random_pd(&mut r, 4);
        let cap = random_psd(&mut r, 4, 4);
        let a = random_sym(&mut r, 4);
        let p = LogDetCapProx::new(&sigma, &cap).unwrap().apply(&a, 1.0).unwrap();
        assert!((&cap - &p.x).min_eig().unwrap() >= -1e-9);
        assert!((&p.x + &sigma).is_pd());
        let direct = inv_pd(&(&p.x + &sigma)).unwrap();
        assert!(close(&p.shifted_inv, &direct, 1e-8 * (1.0 + direct.frob_norm())));
    }

    #[test]
    fn logdet_cap_with_huge_cap_matches_stationary_point() {
        let mut r = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let n = 3;
            let sigma = &random_pd(&mut r, n) * 0.1;
            let a = random_pd(&mut r, n);
            let c = 2.0;
            let stationary = &inv_pd(&a).unwrap().scale(c) - &sigma;
            let cap = SymMat::scaled_identity(n, 1e6);
            let x = prox_logdet_cap(&a, &sigma, &cap, c).unwrap();
            assert!((&x - &stationary).frob_norm() <= 1e-5 * stationary.frob_norm().max(1.0));
        }
    }

    #[test]
    fn barrier_examples() {
        assert_eq!(prox_logdet_barrier(&SymMat::<f64>::identity(2), 1.0).unwrap(), SymMat::identity(2));
        let u = prox_logdet_barrier(&diag(&[2.0, 4.0]), 2.0).unwrap();
        assert!(close(&u, &diag(&[1.0, 0.5]), 1e-15));
        assert!(matches!(prox_logdet_barrier(&diag(&[1.0, -1.0]), 1.0), Err(Error::Unbounded(_))));
        let mut r = ChaCha8Rng::seed_from_u64(17);
        let b = random_pd(&mut r, 5);
        let u = prox_logdet_barrier(&b, 3.0).unwrap();
        let resid = &b - &inv_pd(&u).unwrap().scale(3.0);
        assert!(resid.frob_norm() <= 1e-9);
    }

    #[test]
    fn quadratic_prox_solves_stationarity() {
        let mut r = ChaCha8Rng::seed_from_u64(19);
        let shift = random_pd(&mut r, 3);
        let m = random_sym(&mut r, 3);
        let (c, tau) = (1.3, 0.7);
        let x = prox_logdet_quadratic(&m, Some(&shift), c, tau).unwrap();
        // −c (X+S)⁻¹ + (X − M)/τ = 0
        let g = &inv_pd(&(&x + &shift)).unwrap().scale(-c) + &(&x - &m).scale(1.0 / tau);
        assert!(g.frob_norm() <= 1e-9);
        let p = prox_logdet_quadratic(&m, None, 0.0, tau).unwrap();
        assert!(close(&p, &project_psd(&m).unwrap(), 1e-12));
    }

    #[test]
    fn bregman_distance_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(23);
        let x = random_pd(&mut r, 3);
        for k in [KernelSpec::Euclidean, KernelSpec::LogDetShifted(SymMat::identity(3)), KernelSpec::LogDetBarrier] {
            assert_abs_diff_eq!(bregman_distance(&k, &x, &x).unwrap(), 0.0, epsilon = 1e-12);
        }
        let d: f64 = bregman_distance(&KernelSpec::Euclidean, &SymMat::identity(2), &SymMat::zeros(2)).unwrap();
        assert_abs_diff_eq!(d, 1.0);
        let k = KernelSpec::LogDetShifted(s(1.0));
        assert_abs_diff_eq!(bregman_distance(&k, &s(1.0), &s(0.0)).unwrap(), 1.0 - 2f64.ln(), epsilon = 1e-15);
        assert!(matches!(bregman_distance(&KernelSpec::LogDetBarrier, &s(-1.0), &s(1.0)), Err(Error::OutOfDomain(_))));
        assert!(KernelSpec::log_det_shifted(s(-1.0)).is_err());
    }

    #[test]
    fn strong_convexity_examples() {
        let k = KernelSpec::LogDetShifted(SymMat::<f64>::identity(2));
        assert_abs_diff_eq!(k.strong_convexity(&SymMat::identity(2)).unwrap(), 0.25);
        assert_eq!(KernelSpec::<f64>::Euclidean.strong_convexity(&SymMat::identity(2)).unwrap(), 1.0);
        assert_abs_diff_eq!(
            KernelSpec::LogDetBarrier.strong_convexity(&SymMat::scaled_identity(2, 2.0)).unwrap(),
            0.25
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn projections_are_idempotent_and_obtuse(seed in any::<u64>(), n in 1usize..5) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let m = random_sym(&mut r, n);
            let cap = random_pd(&mut r, n);
            let pp = project_psd(&m).unwrap();
            let pc = project_cap(&m, &cap).unwrap();
            prop_assert!(close(&project_psd(&pp).unwrap(), &pp, 1e-10));
            prop_assert!(close(&project_cap(&pc, &cap).unwrap(), &pc, 1e-10));
            prop_assert!((&cap - &pc).min_eig().unwrap() >= -1e-9);
            for _ in 0..100 {
                let xp = random_psd(&mut r, n, n);
                let xc = &cap - &random_psd(&mut r, n, n);
                prop_assert!(frob_inner(&(&m - &pp), &(&xp - &pp)).unwrap() <= 1e-8);
                prop_assert!(frob_inner(&(&m - &pc), &(&xc - &pc)).unwrap() <= 1e-8);
            }
        }

        #[test]
        fn moreau_identity_and_dual_signs(seed in any::<u64>(), n in 1usize..5, sigma in 0.05f64..5.0) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let z = random_sym(&mut r, n);
            let cap = CapSet { cap: random_psd(&mut r, n, n) };
            let v = prox_conj_indicator(&z, sigma, &cap).unwrap();
            let p = cap.project(&z.scale(1.0 / sigma)).unwrap();
            prop_assert!(close(&v.axpy(sigma, &p), &z, 1e-12 * (1.0 + z.frob_norm())));
            prop_assert!(v.min_eig().unwrap() >= -1e-9);
            let w = prox_conj_indicator(&z, sigma, &PsdCone).unwrap();
            prop_assert!(w.max_eig().unwrap() <= 1e-9);
        }

        #[test]
        fn bregman_distance_is_bounded_below(seed in any::<u64>(), n in 1usize..5) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let shift = random_pd(&mut r, n);
            let upper = random_pd(&mut r, n);
            // two points in {0 ⪯ X ⪯ upper}
            let x = project_cap(&random_psd(&mut r, n, n), &upper).unwrap();
            let x = project_psd(&x).unwrap();
            let y = &upper * 0.5;
            for k in [KernelSpec::Euclidean, KernelSpec::LogDetShifted(shift.clone())] {
                let m = k.strong_convexity(&upper).unwrap();
                let d = bregman_distance(&k, &x, &y).unwrap();
                let dist2 = (&x - &y).frob_norm().powi(2);
                prop_assert!(d >= -1e-10);
                prop_assert!(d >= 0.5 * m * dist2 - 1e-10);
            }
        }
    }

    #[test]
    fn matrix_sizes_mismatch_are_errors() {
        let k = KernelSpec::LogDetShifted(SymMat::<f64>::identity(2));
        assert!(k.value(&SymMat::identity(3)).is_err());
        let _ = DMatrix::<f64>::zeros(1, 1);
    }
}
