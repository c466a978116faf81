use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::SymMat;

use super::brascamp_lieb::full_row_rank;
use super::{BcCommonInstance, BcPrivateInstance, BrascampLiebInstance, Kind, ProblemInstance};

pub const DEFAULT_COND: f64 = 10.0;

const BL_BLOCKS: usize = 3;
const BL_TERMS: usize = 3;
const BL_RHO: f64 = 0.1;

/// Seeded synthetic instance. Same `(kind, n, seed, cond)` gives a
/// bit-identical instance.
///
/// * `Σ = B diag(1, …, cond) Bᵀ` with geometrically spaced eigenvalues and a
///   random orthogonal `B`.
/// * `C = c·n·P / tr P` with `P` a random well-conditioned PSD matrix and
///   `c ∈ [0.5, 2]`.
/// * `λ ∈ (1, 3]`, `α ∈ [0, 1]`, `β ∈ (0, 2]`, `ρ = 0.1`.
/// * Brascamp–Lieb: three blocks of size `n`, three terms with
///   `m_j = ⌈n/2⌉`, standard normal `A_ij` redrawn until of full row rank.
pub fn gen_synthetic<T: Real>(kind: Kind, n: usize, seed: u64, cond: f64) -> Result<ProblemInstance<T>> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(Error::invalid("cond must be a finite number ≥ 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = match kind {
        Kind::BcPrivate => {
            let sigma1 = conditioned_pd(&mut rng, n, cond);
            let sigma2 = conditioned_pd(&mut rng, n, cond);
            let cap = random_cap(&mut rng, n);
            let lambda = open_low(&mut rng, 1.0, 3.0);
            ProblemInstance::BcPrivate(BcPrivateInstance::new(
                cast_sym(&sigma1),
                cast_sym(&sigma2),
                cast_sym(&cap),
                T::lit(lambda),
            )?)
        }
        Kind::BcCommon => {
            let sigma1 = conditioned_pd(&mut rng, n, cond);
            let sigma2 = conditioned_pd(&mut rng, n, cond);
            let cap = random_cap(&mut rng, n);
            let alpha = rng.gen_range(0.0..=1.0);
            let beta = open_low(&mut rng, 0.0, 2.0);
            let lambda = open_low(&mut rng, 1.0, 3.0);
            ProblemInstance::BcCommon(BcCommonInstance::new(
                cast_sym(&sigma1),
                cast_sym(&sigma2),
                cast_sym(&cap),
                T::lit(alpha),
                T::lit(beta),
                T::lit(lambda),
            )?)
        }
        Kind::BrascampLieb => {
            let m = n.div_ceil(2).max(1);
            let a = (0..BL_BLOCKS)
                .map(|_| (0..BL_TERMS).map(|_| cast_mat(&full_rank_gaussian(&mut rng, m, n))).collect())
                .collect();
            let caps = (0..BL_BLOCKS).map(|_| cast_sym(&random_cap(&mut rng, n))).collect();
            let alpha = (0..BL_TERMS).map(|_| T::lit(rng.gen_range(0.0..=1.0))).collect();
            let beta = (0..BL_BLOCKS).map(|_| T::lit(open_low(&mut rng, 0.0, 2.0))).collect();
            ProblemInstance::BrascampLieb(BrascampLiebInstance::new(a, caps, alpha, beta, T::lit(BL_RHO))?)
        }
    };
    Ok(inst)
}

/// Uniform draw from `(lo, hi]`.
fn open_low(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    hi - (hi - lo) * rng.gen::<f64>()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn from_spectrum(q: &DMatrix<f64>, eig: &[f64]) -> SymMat<f64> {
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eig));
    SymMat::from_raw(q * d * q.transpose())
}

fn conditioned_pd(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> SymMat<f64> {
    let q = random_orthogonal(rng, n);
    let eig: Vec<f64> = if n == 1 { vec![1.0] } else { (0..n).map(|k| cond.powf(k as f64 / (n - 1) as f64)).collect() };
    from_spectrum(&q, &eig)
}

fn random_cap(rng: &mut ChaCha8Rng, n: usize) -> SymMat<f64> {
    let q = random_orthogonal(rng, n);
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let c = rng.gen_range(0.5..=2.0);
    let scale = c * n as f64 / raw.iter().sum::<f64>();
    let eig: Vec<f64> = raw.iter().map(|e| e * scale).collect();
    from_spectrum(&q, &eig)
}

fn full_rank_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    loop {
        let a = gaussian(rng, rows, cols);
        if full_row_rank(&a) {
            return a;
        }
    }
}

fn cast_sym<T: Real>(m: &SymMat<f64>) -> SymMat<T> {
    SymMat::from_raw(m.as_matrix().map(T::lit))
}

fn cast_mat<T: Real>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::lit)
}
