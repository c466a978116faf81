//! Numerical oracles and the named invariant suites behind `dcprox check`.
//!
//! The oracles are deliberately naive: accelerated projected gradient for
//! the closed-form proxes, Dykstra's alternating projections for the
//! intersection projection, and central differences for gradients.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::cones::{
    project_cap, project_psd, prox_conj_indicator, prox_logdet_barrier, psi_psd, CapSet, LogDetCapProx, LogDetPsdProx,
    PsdCone,
};
use crate::dca::{dca_solve, linearized_objective, DcProgram, DcaConfig};
use crate::diagnostics::{check_bregman_identity, conjugate_logdet, ConjugateH};
use crate::error::Result;
use crate::pdhg::{
    blocks_inner, blocks_norm, pdhg_solve, stepsize_for, Blocks, LinearMapSpec, NearestPoint, PdhgConfig,
};
use crate::problems::{
    bc_common_program, bc_private_program, gbl_program, BcCommonInstance, BcPrivateInstance, BrascampLiebInstance,
    Variant,
};
use crate::symmat::{frob_inner, inv_pd, logdet_pd, SymMat};

pub type Mat = SymMat<f64>;

pub fn random_sym(rng: &mut impl Rng, n: usize) -> Mat {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    SymMat::new((&g + g.transpose()) * 0.5).expect("symmetrized Gaussian")
}

/// `GGᵀ/n + 0.5·I` with Gaussian `G`.
pub fn random_pd(rng: &mut impl Rng, n: usize) -> Mat {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let p = SymMat::new(&g * g.transpose() / n as f64).expect("Gram matrix");
    p.axpy(0.5, &SymMat::identity(n))
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Accelerated projected gradient with backtracking and function-value
/// restarts. `f` returns `None` outside its domain, which the line search
/// treats as `+∞`.
pub fn accelerated_pgd(
    f: impl Fn(&Mat) -> Option<f64>,
    grad: impl Fn(&Mat) -> Mat,
    proj: impl Fn(&Mat) -> Mat,
    x0: &Mat,
    iters: usize,
) -> Mat {
    let mut x = proj(x0);
    let mut fx = f(&x).expect("oracle start inside the domain");
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    for _ in 0..iters {
        let fy = match f(&y) {
            Some(v) => v,
            None => {
                y = x.clone();
                t = 1.0;
                fx
            }
        };
        let g = grad(&y);
        let (x_next, f_next) = loop {
            let cand = proj(&y.axpy(-1.0 / lip, &g));
            let d = &cand - &y;
            if let Some(fc) = f(&cand) {
                let model = fy + frob_inner(&g, &d).unwrap() + 0.5 * lip * d.frob_norm().powi(2);
                if fc <= model + 1e-15 * (1.0 + fy.abs()) {
                    break (cand, fc);
                }
            }
            lip *= 2.0;
            if lip > 1e30 {
                return x;
            }
        };
        lip *= 0.9;
        let step = (&x_next - &x).frob_norm();
        if f_next > fx {
            // Momentum overshoot: restart from the last accepted point.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = x_next.axpy((t - 1.0) / t_next, &(&x_next - &x));
        t = t_next;
        x = x_next;
        fx = f_next;
        if step <= 1e-15 * (1.0 + x.frob_norm()) {
            break;
        }
    }
    x
}

/// Dykstra's alternating projections onto `S₊ ∩ {X ⪯ C}`.
pub fn dykstra(target: &Mat, cap: &Mat, max_iters: usize) -> Mat {
    let n = target.dim();
    let mut x = target.clone();
    let (mut p, mut q) = (SymMat::zeros(n), SymMat::zeros(n));
    for _ in 0..max_iters {
        let y = project_psd(&(&x + &p)).expect("finite iterate");
        p = &(&x + &p) - &y;
        let x_next = project_cap(&(&y + &q), cap).expect("finite iterate");
        q = &(&y + &q) - &x_next;
        let change = (&x_next - &x).frob_norm();
        x = x_next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Outcome of one named invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    /// Largest error observed, in the units of the invariant's threshold.
    pub worst: f64,
    pub threshold: f64,
    pub detail: String,
    pub seconds: f64,
}

struct Tally {
    name: &'static str,
    threshold: f64,
    trials: usize,
    worst: f64,
    failure: Option<String>,
    started: Instant,
}

impl Tally {
    fn new(name: &'static str, threshold: f64) -> Self {
        Self { name, threshold, trials: 0, worst: 0.0, failure: None, started: Instant::now() }
    }

    fn record(&mut self, err: f64, context: impl FnOnce() -> String) {
        self.trials += 1;
        let bad = !(err <= self.threshold);
        if bad || err > self.worst || err.is_nan() {
            self.worst = if err.is_nan() { f64::INFINITY } else { err.max(self.worst) };
        }
        if bad && self.failure.is_none() {
            self.failure = Some(format!("{} (error {err:.3e})", context()));
        }
    }

    fn error(&mut self, context: String) {
        self.trials += 1;
        self.worst = f64::INFINITY;
        if self.failure.is_none() {
            self.failure = Some(context);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.failure.is_none(),
            trials: self.trials,
            worst: self.worst,
            threshold: self.threshold,
            detail: self.failure.unwrap_or_default(),
            seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// Prox oracle sizes: instances per dimension and the largest dimension.
#[derive(Debug, Clone, Copy)]
pub struct OracleSizes {
    pub per_dim: usize,
    pub max_n: usize,
    pub pgd_iters: usize,
}

impl OracleSizes {
    pub fn fast() -> Self {
        Self { per_dim: 5, max_n: 3, pgd_iters: 5000 }
    }

    pub fn full() -> Self {
        Self { per_dim: 50, max_n: 5, pgd_iters: 5000 }
    }
}

fn psd_kkt(x: &Mat, a: &Mat, sigma: &Mat, c: f64) -> f64 {
    let g = a.axpy(-c, &inv_pd(&(x + sigma)).unwrap());
    let r = (x - &project_psd(&(x - &g)).unwrap()).frob_norm();
    r / (1.0 + a.frob_norm())
}

fn cap_kkt(x: &Mat, a: &Mat, sigma: &Mat, cap: &Mat, c: f64) -> f64 {
    let g = a.axpy(-c, &inv_pd(&(x + sigma)).unwrap());
    let r = (x - &project_cap(&(x - &g), cap).unwrap()).frob_norm();
    r / (1.0 + a.frob_norm())
}

fn logdet_obj(x: &Mat, a: &Mat, shift: &Mat, c: f64) -> Option<f64> {
    logdet_pd(&(x + shift)).ok().map(|ld| -c * ld + frob_inner(a, x).unwrap())
}

/// Objective gap and KKT residual of `prox_logdet_psd` against the oracle,
/// with the eigenvalue map `psi` in place of the closed form's own (the
/// mutation check substitutes a wrong one).
pub fn prox_psd_oracle(sizes: OracleSizes, seed: u64, psi: impl Fn(f64) -> f64 + Copy) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = Tally::new("prox_logdet_psd oracle", 1e-6);
    let mut kkt = Tally::new("prox_logdet_psd kkt", 1e-7);
    for n in 1..=sizes.max_n {
        for _ in 0..sizes.per_dim {
            let sigma = random_pd(&mut rng, n);
            let a = random_pd(&mut rng, n).scale(rng.gen_range(0.2..2.0));
            let c = rng.gen_range(0.5..2.0);
            let x = match LogDetPsdProx::new(&sigma).and_then(|p| p.apply_with(&a, c, psi)) {
                Ok(p) => p.x,
                Err(e) => {
                    gap.error(format!("n={n}: {e}"));
                    continue;
                }
            };
            let f = |u: &Mat| logdet_obj(u, &a, &sigma, c);
            let oracle = accelerated_pgd(
                f,
                |u| a.axpy(-c, &inv_pd(&(u + &sigma)).unwrap()),
                |u| project_psd(u).unwrap(),
                &SymMat::zeros(n),
                sizes.pgd_iters,
            );
            let fx = f(&x).unwrap_or(f64::INFINITY);
            gap.record((fx - f(&oracle).unwrap()).abs(), || format!("n={n}"));
            let feasible = x.min_eig().is_ok_and(|m| m >= -1e-9);
            kkt.record(if feasible { psd_kkt(&x, &a, &sigma, c) } else { f64::INFINITY }, || format!("n={n}"));
        }
    }
    vec![gap.finish(), kkt.finish()]
}

pub fn prox_cap_oracle(sizes: OracleSizes, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = Tally::new("prox_logdet_cap oracle", 1e-6);
    let mut kkt = Tally::new("prox_logdet_cap kkt", 1e-7);
    for n in 1..=sizes.max_n {
        for trial in 0..sizes.per_dim {
            let sigma = random_pd(&mut rng, n);
            let cap = random_pd(&mut rng, n);
            // Every other operand is indefinite.
            let a = if trial % 2 == 0 { random_pd(&mut rng, n) } else { random_sym(&mut rng, n) };
            let c = rng.gen_range(0.5..2.0);
            let x = match LogDetCapProx::new(&sigma, &cap).and_then(|p| p.apply(&a, c)) {
                Ok(p) => p.x,
                Err(e) => {
                    gap.error(format!("n={n}: {e}"));
                    continue;
                }
            };
            let f = |u: &Mat| logdet_obj(u, &a, &sigma, c);
            let oracle = accelerated_pgd(
                f,
                |u| a.axpy(-c, &inv_pd(&(u + &sigma)).unwrap()),
                |u| project_cap(u, &cap).unwrap(),
                &SymMat::zeros(n),
                sizes.pgd_iters,
            );
            let fx = f(&x).unwrap_or(f64::INFINITY);
            gap.record((fx - f(&oracle).unwrap()).abs(), || format!("n={n}, trial {trial}"));
            let feasible = (&cap - &x).min_eig().is_ok_and(|m| m >= -1e-9);
            kkt.record(if feasible { cap_kkt(&x, &a, &sigma, &cap, c) } else { f64::INFINITY }, || {
                format!("n={n}, trial {trial}")
            });
        }
    }
    vec![gap.finish(), kkt.finish()]
}

pub fn prox_barrier_oracle(sizes: OracleSizes, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = Tally::new("prox_logdet_barrier oracle", 1e-6);
    let mut kkt = Tally::new("prox_logdet_barrier kkt", 1e-7);
    for n in 1..=sizes.max_n {
        for _ in 0..sizes.per_dim {
            let b = random_pd(&mut rng, n);
            let c = rng.gen_range(0.5..2.0);
            let u = match prox_logdet_barrier(&b, c) {
                Ok(u) => u,
                Err(e) => {
                    gap.error(format!("n={n}: {e}"));
                    continue;
                }
            };
            let zero = SymMat::zeros(n);
            let f = |x: &Mat| logdet_obj(x, &b, &zero, c);
            let oracle = accelerated_pgd(
                f,
                |x| b.axpy(-c, &inv_pd(x).unwrap()),
                |x| x.clone(),
                &SymMat::identity(n),
                sizes.pgd_iters,
            );
            gap.record((f(&u).unwrap() - f(&oracle).unwrap()).abs(), || format!("n={n}"));
            let r = b.axpy(-c, &inv_pd(&u).unwrap()).frob_norm() / (1.0 + b.frob_norm());
            kkt.record(r, || format!("n={n}"));
        }
    }
    vec![gap.finish(), kkt.finish()]
}

/// Idempotence, obtuse-angle property and the Moreau identity for both
/// projections.
pub fn projection_checks(trials: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idem = Tally::new("projection idempotence", 1e-10);
    let mut obtuse = Tally::new("projection obtuse angle", 1e-8);
    let mut moreau = Tally::new("moreau identity", 1e-12);
    for _ in 0..trials {
        let n = rng.gen_range(1..=5);
        let m = random_sym(&mut rng, n).scale(2.0);
        let cap = random_pd(&mut rng, n);
        let pp = project_psd(&m).unwrap();
        let pc = project_cap(&m, &cap).unwrap();
        idem.record((&project_psd(&pp).unwrap() - &pp).frob_norm(), || "psd".into());
        idem.record((&project_cap(&pc, &cap).unwrap() - &pc).frob_norm(), || "cap".into());
        for _ in 0..10 {
            let x = random_pd(&mut rng, n).scale(rng.gen_range(0.0..2.0));
            let xc = &cap - &x;
            obtuse.record(frob_inner(&(&m - &pp), &(&x - &pp)).unwrap().max(0.0), || "psd".into());
            obtuse.record(frob_inner(&(&m - &pc), &(&xc - &pc)).unwrap().max(0.0), || "cap".into());
        }
        let sigma = rng.gen_range(0.1..3.0);
        let cs = CapSet { cap: cap.clone() };
        let prox = prox_conj_indicator(&m, sigma, &cs).unwrap();
        let back = &prox + &project_cap(&m.scale(1.0 / sigma), &cap).unwrap().scale(sigma);
        moreau.record((&back - &m).frob_norm() / (1.0 + m.frob_norm()), || "cap".into());
        let prox = prox_conj_indicator(&m, sigma, &PsdCone).unwrap();
        let back = &prox + &project_psd(&m.scale(1.0 / sigma)).unwrap().scale(sigma);
        moreau.record((&back - &m).frob_norm() / (1.0 + m.frob_norm()), || "psd".into());
    }
    vec![idem.finish(), obtuse.finish(), moreau.finish()]
}

/// PDHG on the intersection projection against Dykstra.
pub fn pdhg_dykstra_check(trials: usize, max_n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("pdhg intersection projection", 1e-6);
    for trial in 0..trials {
        let n = 1 + trial % max_n;
        let target = random_sym(&mut rng, n).scale(2.0);
        let cap = random_pd(&mut rng, n);
        let expected = dykstra(&target, &cap, 100_000);
        let mut sub = NearestPoint::new(target, cap).unwrap();
        let (tau, sigma) = stepsize_for(&sub).unwrap();
        let cfg = PdhgConfig { tau, sigma, max_iters: 5000, tol: 1e-12, ..PdhgConfig::default() };
        match pdhg_solve(&mut sub, &cfg, None) {
            Ok((state, _)) => t.record((&state.u[0] - &expected).frob_norm(), || format!("n={n}")),
            Err(e) => t.error(format!("n={n}: {e}")),
        }
    }
    t.finish()
}

pub fn random_private(rng: &mut impl Rng, n: usize, variant: Variant) -> crate::problems::BcPrivate<f64> {
    let inst =
        BcPrivateInstance::new(random_pd(rng, n), random_pd(rng, n), random_pd(rng, n), rng.gen_range(1.05..3.0))
            .unwrap();
    bc_private_program(inst, variant).unwrap()
}

pub fn random_common(rng: &mut impl Rng, n: usize, variant: Variant) -> crate::problems::BcCommon<f64> {
    let alpha = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..1.0) };
    let inst = BcCommonInstance::new(
        random_pd(rng, n),
        random_pd(rng, n),
        random_pd(rng, n),
        alpha,
        rng.gen_range(0.1..2.0),
        rng.gen_range(1.05..3.0),
    )
    .unwrap();
    bc_common_program(inst, variant).unwrap()
}

/// Two blocks of sizes `n` and `n + 1`, two terms with `m_j ≤ n`.
pub fn random_gbl(rng: &mut impl Rng, n: usize, variant: Variant) -> crate::problems::BrascampLieb<f64> {
    let dims = [n, n + 1];
    let rows = [n.div_ceil(2), n];
    let a = dims.iter().map(|&ni| rows.iter().map(|&mj| gaussian(rng, mj, ni)).collect()).collect();
    let caps = dims.iter().map(|&ni| random_pd(rng, ni)).collect();
    let alpha = vec![rng.gen_range(0.1..1.0), rng.gen_range(0.1..1.0)];
    let beta = vec![rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)];
    let inst = BrascampLiebInstance::new(a, caps, alpha, beta, 0.1).unwrap();
    gbl_program(inst, variant).unwrap()
}

/// Random interior point of a program: `t·X⁰` plus a small PD bump.
pub fn random_interior<P: DcProgram<f64>>(prog: &P, rng: &mut impl Rng) -> Blocks<f64> {
    prog.feasible_start()
        .iter()
        .map(|b| {
            let n = b.dim();
            b.scale(rng.gen_range(0.2..1.5)).axpy(0.1, &random_pd(rng, n))
        })
        .collect()
}

/// Worst normalized central-difference error of `∇g` and `∇h` along a
/// random direction: `|Δ_fd − ⟨∇, D⟩| / (‖∇‖‖D‖)`.
pub fn fd_gradient_error<P: DcProgram<f64>>(prog: &P, x: &[Mat], rng: &mut impl Rng) -> Result<f64> {
    let dir: Blocks<f64> = x.iter().map(|b| random_sym(rng, b.dim())).collect();
    let scale = 1.0 + blocks_norm(x);
    let t = 1e-5 * scale / blocks_norm(&dir);
    let plus: Blocks<f64> = x.iter().zip(&dir).map(|(b, d)| b.axpy(t, d)).collect();
    let minus: Blocks<f64> = x.iter().zip(&dir).map(|(b, d)| b.axpy(-t, d)).collect();
    let mut worst = 0.0f64;
    let fd_g = (prog.eval_g(&plus)? - prog.eval_g(&minus)?) / (2.0 * t);
    let gg = prog.grad_g(x)?;
    worst = worst.max((fd_g - blocks_inner(&gg, &dir)?).abs() / (1e-12 + blocks_norm(&gg) * blocks_norm(&dir)));
    let fd_h = (prog.eval_h(&plus)? - prog.eval_h(&minus)?) / (2.0 * t);
    let gh = prog.grad_h(x)?;
    worst = worst.max((fd_h - blocks_inner(&gh, &dir)?).abs() / (1e-12 + blocks_norm(&gh) * blocks_norm(&dir)));
    Ok(worst)
}

pub fn gradient_checks(points: usize, n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("finite-difference gradients", 1e-5);
    for _ in 0..points {
        let p1 = random_private(&mut rng, n, Variant::Bregman);
        let p2 = random_common(&mut rng, n, Variant::Bregman);
        let p3 = random_gbl(&mut rng, n, Variant::Bregman);
        let x1 = random_interior(&p1, &mut rng);
        let x2 = random_interior(&p2, &mut rng);
        let x3 = random_interior(&p3, &mut rng);
        for (name, r) in [
            ("bc-private", fd_gradient_error(&p1, &x1, &mut rng)),
            ("bc-common", fd_gradient_error(&p2, &x2, &mut rng)),
            ("brascamp-lieb", fd_gradient_error(&p3, &x3, &mut rng)),
        ] {
            match r {
                Ok(e) => t.record(e, || name.to_string()),
                Err(e) => t.error(format!("{name}: {e}")),
            }
        }
    }
    t.finish()
}

/// Bregman conjugate identity on random interior pairs, all three `h`.
pub fn identity_checks(pairs: usize, max_n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("bregman conjugate identity", 1e-8);
    fn one<P: ConjugateH<f64>>(t: &mut Tally, prog: &P, rng: &mut ChaCha8Rng, name: &str) {
        let a = random_interior(prog, rng);
        let b = random_interior(prog, rng);
        match (check_bregman_identity(prog, &a, &b), prog.bregman_h(&b, &a)) {
            (Ok(e), Ok(d)) => t.record(e / (1.0 + d.abs()), || name.to_string()),
            (Err(e), _) | (_, Err(e)) => t.error(format!("{name}: {e}")),
        }
    }
    for k in 0..pairs {
        let n = 1 + k % max_n;
        one(&mut t, &random_private(&mut rng, n, Variant::Bregman), &mut rng, "bc-private");
        one(&mut t, &random_common(&mut rng, n, Variant::Bregman), &mut rng, "bc-common");
        one(&mut t, &random_gbl(&mut rng, n, Variant::Bregman), &mut rng, "brascamp-lieb");
    }
    t.finish()
}

/// Fenchel–Young equality for the closed-form log-det conjugate.
pub fn fenchel_young_checks(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("fenchel-young equality", 1e-9);
    for _ in 0..trials {
        let n = rng.gen_range(1..=6);
        let sigma = random_pd(&mut rng, n);
        let x = random_pd(&mut rng, n);
        let lam = rng.gen_range(0.1..3.0);
        let shifted = &x + &sigma;
        let h = -lam * logdet_pd(&shifted).unwrap();
        let grad = inv_pd(&shifted).unwrap().scale(-lam);
        match conjugate_logdet(&grad, &sigma, lam) {
            Ok(hs) => t.record((h + hs - frob_inner(&x, &grad).unwrap()).abs() / (1.0 + h.abs()), || format!("n={n}")),
            Err(e) => t.error(e.to_string()),
        }
    }
    t.finish()
}

/// Adjoint consistency and norm bound of the splitting maps.
pub fn map_checks(trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("linear map adjoint", 1e-10);
    let maps = [
        LinearMapSpec::identity(1),
        LinearMapSpec::identity(3),
        LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)]]).unwrap(),
        LinearMapSpec::from_rows(2, vec![vec![(0, -1.0), (1, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap(),
    ];
    for _ in 0..trials {
        for map in &maps {
            let n = rng.gen_range(1..=4);
            let u: Blocks<f64> = (0..map.n_primal()).map(|_| random_sym(&mut rng, n)).collect();
            let v: Blocks<f64> = (0..map.n_dual()).map(|_| random_sym(&mut rng, n)).collect();
            let lhs = blocks_inner(&v, &map.forward(&u)).unwrap();
            let rhs = blocks_inner(&map.adjoint(&v), &u).unwrap();
            let scale = blocks_norm(&u) * blocks_norm(&v);
            let bound_excess = (lhs - map.norm_bound() * scale).max(0.0) / scale;
            t.record((lhs - rhs).abs() / scale + bound_excess, || format!("{} blocks", map.n_primal()));
        }
    }
    t.finish()
}

/// Surrogate majorization: `g(u) − h(x_k) − ⟨∇h(x_k), u − x_k⟩ ≥ f(u)`.
pub fn majorization_checks(trials: usize, n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("surrogate majorization", 1e-9);
    fn one<P: DcProgram<f64>>(t: &mut Tally, prog: &P, rng: &mut ChaCha8Rng, name: &str) {
        let xk = random_interior(prog, rng);
        let u = random_interior(prog, rng);
        let r = (|| -> Result<f64> {
            let tangent = (linearized_objective(prog, &xk, &xk)? - prog.objective(&xk)?).abs();
            let below = (prog.objective(&u)? - linearized_objective(prog, &xk, &u)?).max(0.0);
            Ok(tangent.max(below))
        })();
        match r {
            Ok(e) => t.record(e, || name.to_string()),
            Err(e) => t.error(format!("{name}: {e}")),
        }
    }
    for _ in 0..trials {
        one(&mut t, &random_private(&mut rng, n, Variant::Bregman), &mut rng, "bc-private");
        one(&mut t, &random_common(&mut rng, n, Variant::Bregman), &mut rng, "bc-common");
        one(&mut t, &random_gbl(&mut rng, n, Variant::Bregman), &mut rng, "brascamp-lieb");
    }
    t.finish()
}

/// Full DCA runs on random programs: sufficient decrease within the
/// scheduled slack at every step, zero dual sign violations, and agreement
/// of the Bregman and Euclidean final objectives.
pub fn dca_checks(trials: usize, n: usize, seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut descent = Tally::new("dca sufficient decrease", 0.0);
    let mut signs = Tally::new("dual sign pattern", 0.0);
    let mut agree = Tally::new("bregman/euclidean agreement", 1e-5);
    let cfg = DcaConfig::default();
    fn run<P: DcProgram<f64>>(
        prog: &P,
        cfg: &DcaConfig<f64>,
        descent: &mut Tally,
        signs: &mut Tally,
        name: &str,
    ) -> Option<f64> {
        let trace = match dca_solve(prog, cfg) {
            Ok(t) => t,
            Err(e) => {
                descent.error(format!("{name}: {e}"));
                return None;
            }
        };
        for k in 0..trace.outer_iters() {
            let m = crate::dca::descent_margin(
                prog,
                &trace.iterates[k],
                trace.objectives[k],
                &trace.iterates[k + 1],
                trace.objectives[k + 1],
            );
            let slack = 10.0 * trace.scheduled_tols[k];
            match m {
                Ok(m) => descent.record((-m - slack).max(0.0), || format!("{name} step {k}")),
                Err(e) => descent.error(format!("{name}: {e}")),
            }
        }
        signs.record((trace.sign_violations + trace.operand_failures) as f64, || name.to_string());
        Some(trace.final_objective())
    }
    for _ in 0..trials {
        let seed_p: u64 = rng.gen();
        let mut agree_pair = |name: &str, fb: Option<f64>, fe: Option<f64>| {
            if let (Some(a), Some(b)) = (fb, fe) {
                agree.record((a - b).abs() / (1.0 + a.abs()), || name.to_string());
            }
        };
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fb = run(&random_private(&mut r, n, Variant::Bregman), &cfg, &mut descent, &mut signs, "bc-private");
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fe = run(&random_private(&mut r, n, Variant::Euclidean), &cfg, &mut descent, &mut signs, "bc-private");
        agree_pair("bc-private", fb, fe);
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fb = run(&random_common(&mut r, n, Variant::Bregman), &cfg, &mut descent, &mut signs, "bc-common");
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fe = run(&random_common(&mut r, n, Variant::Euclidean), &cfg, &mut descent, &mut signs, "bc-common");
        agree_pair("bc-common", fb, fe);
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fb = run(&random_gbl(&mut r, n, Variant::Bregman), &cfg, &mut descent, &mut signs, "brascamp-lieb");
        let mut r = ChaCha8Rng::seed_from_u64(seed_p);
        let fe = run(&random_gbl(&mut r, n, Variant::Euclidean), &cfg, &mut descent, &mut signs, "brascamp-lieb");
        agree_pair("brascamp-lieb", fb, fe);
    }
    vec![descent.finish(), signs.finish(), agree.finish()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Prox oracles up to `n = 3` and the identities.
    Fast,
    /// Every property suite, oracles up to `n = 5`, and small DCA runs.
    Full,
}

/// Runs the invariant suite for `level`; `psi` replaces the PSD prox
/// eigenvalue map (normally [`psi_psd`]).
pub fn run_suite_with(level: Level, psi: impl Fn(f64) -> f64 + Copy) -> Vec<CheckResult> {
    let sizes = match level {
        Level::Fast => OracleSizes::fast(),
        Level::Full => OracleSizes::full(),
    };
    let mut out = Vec::new();
    out.extend(prox_psd_oracle(sizes, 101, psi));
    out.extend(prox_cap_oracle(sizes, 102));
    out.extend(prox_barrier_oracle(sizes, 103));
    out.extend(projection_checks(if level == Level::Fast { 20 } else { 100 }, 104));
    out.push(fenchel_young_checks(if level == Level::Fast { 20 } else { 100 }, 105));
    out.push(map_checks(if level == Level::Fast { 10 } else { 50 }, 106));
    match level {
        Level::Fast => {
            out.push(identity_checks(10, 3, 107));
            out.push(gradient_checks(3, 3, 108));
            out.push(majorization_checks(5, 3, 109));
            out.push(pdhg_dykstra_check(6, 3, 110));
        }
        Level::Full => {
            out.push(identity_checks(100, 10, 107));
            out.push(gradient_checks(20, 4, 108));
            out.push(majorization_checks(20, 4, 109));
            out.push(pdhg_dykstra_check(20, 4, 110));
            out.extend(dca_checks(3, 5, 111));
        }
    }
    out
}

pub fn run_suite(level: Level) -> Vec<CheckResult> {
    run_suite_with(level, psi_psd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgd_solves_a_box_quadratic() {
        // min ½‖X − M‖² over X ⪰ 0 is the PSD projection.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_sym(&mut rng, 3);
        let x = accelerated_pgd(
            |x| Some(0.5 * (x - &m).frob_norm().powi(2)),
            |x| x - &m,
            |x| project_psd(x).unwrap(),
            &SymMat::zeros(3),
            500,
        );
        assert!((&x - &project_psd(&m).unwrap()).frob_norm() < 1e-10);
    }

    #[test]
    fn corrupted_psi_is_caught() {
        let bad = |g: f64| psi_psd(g) * 1.01;
        let res = prox_psd_oracle(OracleSizes { per_dim: 3, max_n: 2, pgd_iters: 5000 }, 7, bad);
        assert!(res.iter().any(|r| r.name == "prox_logdet_psd oracle" && !r.passed));
    }

    #[test]
    fn fast_suite_passes() {
        let res = run_suite(Level::Fast);
        for r in &res {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
