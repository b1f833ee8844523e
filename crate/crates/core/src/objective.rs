//! Local objectives, the per-agent contraction property, and problems.
//!
//! Each agent `i` owns `f_i : ℝᵈ → ℝ`; the network minimises the average
//! `f = (1/n) Σ f_i`. Convergence needs a stepsize `α` and contraction
//! factor `ρ` with
//!
//! ```text
//! ‖x − x* − α(∇f_i(x) − ∇f_i(x*))‖ ≤ ρ‖x − x*‖   for all x and i,
//! ```
//!
//! which [`check_contraction`] tests on sampled points.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Central-difference step used by [`finite_difference_gradient`].
pub const FD_STEP: f64 = 1e-6;
/// Relative error accepted by gradient checks.
pub const FD_REL_TOL: f64 = 1e-5;
/// Slack added to `ρ` when judging sampled contraction ratios.
pub const CONTRACTION_SLACK: f64 = 1e-9;
/// Radius of the default sampling ball around `x*`.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 10.0;

/// Agent-local objective `f_i`.
pub trait LocalObjective<T: Scalar>: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[T]) -> Result<T>;

    fn gradient(&self, x: &[T]) -> Result<Vec<T>>;

    /// `trace ∇²f_i(x)`, when the objective provides it.
    fn hessian_trace(&self, _x: &[T]) -> Result<T> {
        Err(Error::Unsupported("objective has no Hessian trace".into()))
    }
}

/// Stepsize and contraction factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams<T> {
    pub alpha: T,
    pub rho: T,
}

impl<T: Scalar> ContractionParams<T> {
    /// `α > 0`, `0 ≤ ρ < 1`. `ρ = 0` occurs for perfectly conditioned problems.
    pub fn new(alpha: T, rho: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::Domain(format!("stepsize must be positive, got {alpha}")));
        }
        if !(rho >= T::zero() && rho < T::one()) {
            return Err(Error::Domain(format!("contraction factor must lie in [0, 1), got {rho}")));
        }
        Ok(Self { alpha, rho })
    }
}

/// One-point strong convexity `μ` and smoothness `L` with respect to `x*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongSmoothParams<T> {
    mu: T,
    l: T,
}

impl<T: Scalar> StrongSmoothParams<T> {
    pub fn new(mu: T, l: T) -> Result<Self> {
        if !(mu > T::zero()) || !(l >= mu) || !l.is_finite() {
            return Err(Error::Domain(format!("need 0 < mu <= L, got mu = {mu}, L = {l}")));
        }
        Ok(Self { mu, l })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn l(&self) -> T {
        self.l
    }
}

/// `α = 2/(L+μ)`, `ρ = (L−μ)/(L+μ)`.
pub fn params_from_one_point_convexity<T: Scalar>(p: &StrongSmoothParams<T>) -> ContractionParams<T> {
    let sum = p.l + p.mu;
    ContractionParams { alpha: T::lit(2.0) / sum, rho: (p.l - p.mu) / sum }
}

/// Outcome of [`check_contraction`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport<T> {
    pub max_ratio: T,
    pub worst_sample: Option<Vec<T>>,
    /// Samples evaluated (excludes any sample equal to `x*`).
    pub checked: usize,
    pub passed: bool,
}

/// Evaluates the contraction ratio at each sample and compares the worst
/// one against `ρ + 1e−9`.
pub fn check_contraction<T: Scalar>(
    f: &dyn LocalObjective<T>,
    xstar: &[T],
    params: &ContractionParams<T>,
    samples: &[Vec<T>],
) -> Result<ContractionReport<T>> {
    check_dim(f.dim(), xstar.len())?;
    let g_star = f.gradient(xstar)?;
    let mut max_ratio = T::zero();
    let mut worst_sample = None;
    let mut checked = 0;
    for x in samples {
        check_dim(f.dim(), x.len())?;
        let dx = linalg::sub(x, xstar);
        let denom = linalg::norm(&dx);
        if denom.is_zero() {
            continue;
        }
        let dg = linalg::sub(&f.gradient(x)?, &g_star);
        let ratio = linalg::norm(&linalg::axpy(&dx, -params.alpha, &dg)) / denom;
        checked += 1;
        if ratio > max_ratio || worst_sample.is_none() {
            max_ratio = ratio;
            worst_sample = Some(x.clone());
        }
    }
    let passed = max_ratio <= params.rho + T::lit(CONTRACTION_SLACK);
    Ok(ContractionReport { max_ratio, worst_sample, checked, passed })
}

/// `count` points drawn uniformly from the ball of `radius` around `center`.
pub fn sample_ball<T: Scalar>(center: &[T], radius: T, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = center.len();
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r: f64 = rng.random::<f64>().powf(1.0 / d.max(1) as f64);
            center
                .iter()
                .zip(&dir)
                .map(|(&c, &u)| c + radius * T::lit(r * u / len))
                .collect()
        })
        .collect()
}

/// Central-difference approximation of `∇f(x)` with step `h`.
pub fn finite_difference_gradient<T: Scalar>(
    f: &dyn LocalObjective<T>,
    x: &[T],
    h: T,
) -> Result<Vec<T>> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let plus = f.value(&probe)?;
            probe[j] = x[j] - h;
            let minus = f.value(&probe)?;
            probe[j] = x[j];
            Ok((plus - minus) / two_h)
        })
        .collect()
}

/// `‖∇f − ∇_fd f‖ / max(1, ‖∇f‖, ‖∇_fd f‖)` at `x`, using [`FD_STEP`].
pub fn gradient_check_error<T: Scalar>(f: &dyn LocalObjective<T>, x: &[T]) -> Result<T> {
    let g = f.gradient(x)?;
    let fd = finite_difference_gradient(f, x, T::lit(FD_STEP))?;
    let scale = T::one().max(linalg::norm(&g)).max(linalg::norm(&fd));
    Ok(linalg::norm(&linalg::sub(&g, &fd)) / scale)
}

/// `f(x) = ½ xᵀAx − bᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic<T: Scalar> {
    a: Matrix<T>,
    b: Vec<T>,
}

impl<T: Scalar> Quadratic<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn linear_term(&self) -> &[T] {
        &self.b
    }
}

/// Builds `½ xᵀAx − bᵀx`; `A` must be symmetric.
pub fn quadratic_objective<T: Scalar>(a: Matrix<T>, b: Vec<T>) -> Result<Quadratic<T>> {
    check_dim(a.rows(), a.cols())?;
    check_dim(a.rows(), b.len())?;
    let scale = a.as_slice().iter().fold(T::one(), |m, v| m.max(v.abs()));
    if !a.is_symmetric(T::epsilon() * T::lit(64.0) * scale) {
        return Err(Error::Domain("quadratic term must be symmetric".into()));
    }
    Ok(Quadratic { a, b })
}

impl<T: Scalar> LocalObjective<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[T]) -> Result<T> {
        let ax = self.a.matvec(x)?;
        Ok(T::lit(0.5) * linalg::dot(x, &ax) - linalg::dot(&self.b, x))
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(linalg::sub(&self.a.matvec(x)?, &self.b))
    }

    fn hessian_trace(&self, _x: &[T]) -> Result<T> {
        Ok(self.a.trace())
    }
}

/// `n` local objectives of common dimension, with an optional known optimiser.
#[derive(Debug, Clone)]
pub struct Problem<T: Scalar> {
    locals: Vec<Arc<dyn LocalObjective<T>>>,
    optimizer: Option<Vec<T>>,
}

impl<T: Scalar> Problem<T> {
    /// Fails unless all locals share a dimension and, when `optimizer` is
    /// given, `‖Σᵢ ∇f_i(x*)‖ ≤ 1e−6·n`.
    pub fn new(locals: Vec<Arc<dyn LocalObjective<T>>>, optimizer: Option<Vec<T>>) -> Result<Self> {
        let d = locals
            .first()
            .map(|f| f.dim())
            .ok_or_else(|| Error::Config("problem needs at least one agent".into()))?;
        for f in &locals {
            check_dim(d, f.dim())?;
        }
        let problem = Self { locals, optimizer };
        if let Some(xstar) = &problem.optimizer {
            check_dim(d, xstar.len())?;
            let residual = linalg::norm(&problem.gradient_sum(xstar)?);
            let bound = T::lit(1e-6 * problem.n() as f64);
            if !(residual <= bound) {
                return Err(Error::Domain(format!(
                    "local gradients at the optimiser sum to norm {residual} > {bound}"
                )));
            }
        }
        Ok(problem)
    }

    pub fn n(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.locals[0].dim()
    }

    pub fn local(&self, i: usize) -> &dyn LocalObjective<T> {
        self.locals[i].as_ref()
    }

    pub fn locals(&self) -> &[Arc<dyn LocalObjective<T>>] {
        &self.locals
    }

    pub fn optimizer(&self) -> Option<&[T]> {
        self.optimizer.as_deref()
    }

    /// `Σᵢ ∇f_i(x)`.
    pub fn gradient_sum(&self, x: &[T]) -> Result<Vec<T>> {
        let mut acc = vec![T::zero(); self.dim()];
        for f in &self.locals {
            acc = linalg::add(&acc, &f.gradient(x)?);
        }
        Ok(acc)
    }

    /// `∇f(x) = (1/n) Σᵢ ∇f_i(x)`.
    pub fn global_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let inv_n = T::one() / T::lit(self.n() as f64);
        Ok(linalg::scale(inv_n, &self.gradient_sum(x)?))
    }

    /// `f(x) = (1/n) Σᵢ f_i(x)`.
    pub fn global_value(&self, x: &[T]) -> Result<T> {
        let mut acc = T::zero();
        for f in &self.locals {
            acc = acc + f.value(x)?;
        }
        Ok(acc / T::lit(self.n() as f64))
    }
}

/// Seeded family of quadratic problems whose local Hessians all have
/// spectrum in `[μ, L]`, local gradients at `x*` summing to zero, and `μ`,
/// `L` attained on eigendirections shared by every agent (so the averaged
/// Hessian also has extreme eigenvalues `μ` and `L`).
///
/// Agent `i` has `A_i = Q diag(μ, L, c_i…) Qᵀ` with a common random rotation
/// `Q` and per-agent `c_i ∈ [μ, L]`, and `∇f_i(x*) = g_i` with random `g_i`
/// centred to sum to zero. For `d = 1` the single eigenvalue is `L`.
pub fn seeded_quadratic_problem<T: Scalar>(
    n: usize,
    d: usize,
    params: &StrongSmoothParams<T>,
    seed: u64,
) -> Result<Problem<T>> {
    if n == 0 || d == 0 {
        return Err(Error::Config("need n >= 1 and d >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| T::lit(rng.sample::<f64, _>(StandardNormal));
    let q = loop {
        let raw: Vec<T> = (0..d * d).map(|_| normal(&mut rng)).collect();
        if let Ok(q) = linalg::orthonormal_columns(&Matrix::from_row_major(d, d, raw)?) {
            break q;
        }
    };
    let xstar: Vec<T> = (0..d).map(|_| normal(&mut rng)).collect();
    let mut grads: Vec<Vec<T>> = (0..n).map(|_| (0..d).map(|_| normal(&mut rng)).collect()).collect();
    let inv_n = T::one() / T::lit(n as f64);
    let mean: Vec<T> =
        (0..d).map(|j| grads.iter().map(|g| g[j]).sum::<T>() * inv_n).collect();
    for g in &mut grads {
        *g = linalg::sub(g, &mean);
    }
    let (mu, l) = (params.mu, params.l);
    let mut locals: Vec<Arc<dyn LocalObjective<T>>> = Vec::with_capacity(n);
    for g in &grads {
        let mut spectrum = match d {
            1 => vec![l],
            _ => vec![mu, l],
        };
        while spectrum.len() < d {
            let u = T::lit(rng.random::<f64>());
            spectrum.push(mu + u * (l - mu));
        }
        let a = q.matmul(&Matrix::diagonal(&spectrum))?.matmul(&q.transpose())?;
        let a = symmetrize(&a);
        // ∇f_i(x*) = A x* − b = g  ⇒  b = A x* − g
        let b = linalg::sub(&a.matvec(&xstar)?, g);
        locals.push(Arc::new(quadratic_objective(a, b)?));
    }
    Problem::new(locals, Some(xstar))
}

fn symmetrize<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.rows();
    let mut s = a.clone();
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, T::lit(0.5) * (a.get(i, j) + a.get(j, i)));
        }
    }
    s
}
