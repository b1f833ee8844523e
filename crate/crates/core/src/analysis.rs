//! Convergence certificate for the multi-round gossip method.
//!
//! States of all agents are stacked as `𝐱 = [x₁; …; xₙ] ∈ ℝⁿᵈ` and split
//! into an average part (every block replaced by the block mean) and a
//! disagreement part (the remainder). In error coordinates
//! `x̄ = 𝐱 − 𝟙⊗x*`, `ȳ = 𝐲 − 𝐲*` the function
//!
//! ```text
//! V(x̄, ȳ) = ‖avg x̄‖² + ‖dis x̄‖² + 2λ⟨dis x̄, dis ȳ⟩ + λ‖dis ȳ‖²
//! ```
//!
//! shrinks by at least `ρ²` per iteration when the local objectives contract
//! with factor `ρ` and the `m`-round gossip product contracts disagreement by
//! `σ₀(ρ)`. The per-iteration change `ΔV = V(k+1) − ρ²V(k)` equals
//!
//! ```text
//! −(ρ²‖v̄‖² − ‖ū‖²) − 2ρ²(σ₀²‖dis x̄‖² − ‖dis v̄‖²) − 2σ₀²‖dis(v̄ + λ(x̄ + ȳ))‖²
//! ```
//!
//! and [`delta_v_terms`] evaluates each bracket separately so a violation can
//! be traced back to the objective or to the network.

use crate::algorithm::{centralized_gd, sigma0, AgentState, AlgorithmParams};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, symmetric_2x2_eigenvalues};
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::trace::RunTrace;

/// Largest `ΔV` accepted as nonpositive.
pub const DELTA_V_TOL: f64 = 1e-9;
/// Default fraction of the usable error sequence used by [`fit_rate`].
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
/// Minimum number of points [`fit_rate`] fits over.
pub const MIN_FIT_POINTS: usize = 10;

/// `n` blocks of length `d`, concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedVector<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> StackedVector<T> {
    pub fn new(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
        check_dim(n * d, data.len())?;
        Ok(Self { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self { n, d, data: vec![T::zero(); n * d] }
    }

    pub fn from_blocks(blocks: &[Vec<T>]) -> Result<Self> {
        let n = blocks.len();
        let d = blocks.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for b in blocks {
            check_dim(d, b.len())?;
            data.extend_from_slice(b);
        }
        Ok(Self { n, d, data })
    }

    /// `𝟙 ⊗ w`.
    pub fn repeat(n: usize, w: &[T]) -> Self {
        Self { n, d: w.len(), data: w.iter().copied().cycle().take(n * w.len()).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn block(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Mean of the blocks.
    pub fn mean_block(&self) -> Vec<T> {
        let inv_n = T::one() / T::lit(self.n as f64);
        (0..self.d)
            .map(|j| (0..self.n).map(|i| self.data[i * self.d + j]).sum::<T>() * inv_n)
            .collect()
    }

    pub fn dot(&self, other: &Self) -> T {
        linalg::dot(&self.data, &other.data)
    }

    pub fn norm_sq(&self) -> T {
        linalg::norm_sq(&self.data)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_dim(self.data.len(), other.data.len())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { n: self.n, d: self.d, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, d: self.d, data: self.data.iter().map(|&v| s * v).collect() }
    }
}

/// Every block replaced by the mean block.
pub fn average_part<T: Scalar>(z: &StackedVector<T>) -> StackedVector<T> {
    StackedVector::repeat(z.n, &z.mean_block())
}

/// `z − average_part(z)`.
pub fn disagreement_part<T: Scalar>(z: &StackedVector<T>) -> StackedVector<T> {
    let mean = z.mean_block();
    let data = z
        .data
        .chunks(z.d.max(1))
        .flat_map(|b| b.iter().zip(&mean).map(|(&v, &m)| v - m))
        .collect();
    StackedVector { n: z.n, d: z.d, data }
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda < T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")))
    }
}

/// Lyapunov value of the error pair `(x̄, ȳ)`.
pub fn lyapunov<T: Scalar>(xbar: &StackedVector<T>, ybar: &StackedVector<T>, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    check_dim(xbar.data.len(), ybar.data.len())?;
    let ax = average_part(xbar);
    let dx = disagreement_part(xbar);
    let dy = disagreement_part(ybar);
    let two = T::lit(2.0);
    Ok(ax.norm_sq() + dx.norm_sq() + two * lambda * dx.dot(&dy) + lambda * dy.norm_sq())
}

/// `√(cond([1 λ; λ λ]) · V₀)`: every agent then satisfies
/// `‖x_i^k − x*‖ ≤ c ρᵏ`.
pub fn error_bound_constant<T: Scalar>(v0: T, lambda: T) -> Result<T> {
    check_lambda(lambda)?;
    if !(v0 >= T::zero()) {
        return Err(Error::Domain(format!("Lyapunov value must be nonnegative, got {v0}")));
    }
    let (lo, hi) = symmetric_2x2_eigenvalues(T::one(), lambda, lambda);
    Ok((hi / lo * v0).sqrt())
}

/// Stationary point of the iteration: consensus on `x*` with
/// `y_i* = −(α/λ)∇f_i(x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint<T> {
    pub xstar: StackedVector<T>,
    pub ystar: StackedVector<T>,
    /// `u_i* = x* − α∇f_i(x*)`.
    pub ustar: StackedVector<T>,
}

impl<T: Scalar> FixedPoint<T> {
    /// Needs the problem's optimiser.
    pub fn new(problem: &Problem<T>, params: &AlgorithmParams<T>) -> Result<Self> {
        let xstar = problem
            .optimizer()
            .ok_or_else(|| Error::Unsupported("Lyapunov analysis needs a known optimiser".into()))?;
        Self::at(problem, params, xstar)
    }

    /// Fixed point built around an explicitly supplied optimiser.
    pub fn at(problem: &Problem<T>, params: &AlgorithmParams<T>, xstar: &[T]) -> Result<Self> {
        check_dim(problem.dim(), xstar.len())?;
        let n = problem.n();
        let mut u = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let ui = linalg::axpy(xstar, -params.alpha, &problem.local(i).gradient(xstar)?);
            y.push(linalg::scale(T::one() / params.lambda, &linalg::sub(&ui, xstar)));
            u.push(ui);
        }
        Ok(Self {
            xstar: StackedVector::repeat(n, xstar),
            ystar: StackedVector::from_blocks(&y)?,
            ustar: StackedVector::from_blocks(&u)?,
        })
    }

    /// Locates the optimiser with centralised gradient descent (stopping at
    /// `‖∇f‖ ≤ 1e−12`) and builds the fixed point around it.
    pub fn solve(problem: &Problem<T>, params: &AlgorithmParams<T>, x0: Vec<T>) -> Result<Self> {
        const MAX_ITERS: usize = 100_000;
        let tol = T::lit(1e-12);
        let mut x = x0;
        for _ in 0..MAX_ITERS {
            if linalg::norm(&problem.global_gradient(&x)?) <= tol {
                return Self::at(problem, params, &x);
            }
            x = centralized_gd(problem, params.alpha, x, 1)?.pop().expect("two points");
        }
        Err(Error::Unsupported("could not locate the optimiser to 1e-12".into()))
    }

    /// Agent states sitting exactly at the fixed point.
    pub fn states(&self) -> Vec<AgentState<T>> {
        (0..self.xstar.n())
            .map(|i| AgentState { x: self.xstar.block(i).to_vec(), y: self.ystar.block(i).to_vec() })
            .collect()
    }

    /// `(x̄, ȳ)` for the given agent states.
    pub fn errors(&self, states: &[AgentState<T>]) -> Result<(StackedVector<T>, StackedVector<T>)> {
        let xs: Vec<Vec<T>> = states.iter().map(|s| s.x.clone()).collect();
        let ys: Vec<Vec<T>> = states.iter().map(|s| s.y.clone()).collect();
        let xbar = StackedVector::from_blocks(&xs)?.sub(&self.xstar)?;
        let ybar = StackedVector::from_blocks(&ys)?.sub(&self.ystar)?;
        Ok((xbar, ybar))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRecord<T> {
    pub k: usize,
    pub value: T,
    /// `V(k) − ρ²V(k−1)`, absent at `k = 0`.
    pub delta: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport<T> {
    pub records: Vec<LyapunovRecord<T>>,
    /// Iterations `k` whose `ΔV` exceeds [`DELTA_V_TOL`].
    pub violations: Vec<usize>,
}

impl<T: Scalar> LyapunovReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn values(&self) -> Vec<T> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// `V` and `ΔV` along a run.
pub fn lyapunov_trace<T: Scalar>(problem: &Problem<T>, trace: &RunTrace<T>) -> Result<LyapunovReport<T>> {
    let fixed = FixedPoint::new(problem, &trace.params)?;
    lyapunov_trace_with(&fixed, trace)
}

/// As [`lyapunov_trace`], around a precomputed fixed point.
pub fn lyapunov_trace_with<T: Scalar>(fixed: &FixedPoint<T>, trace: &RunTrace<T>) -> Result<LyapunovReport<T>> {
    let params = &trace.params;
    let rho2 = params.rho * params.rho;
    let tol = T::lit(DELTA_V_TOL);
    let mut records: Vec<LyapunovRecord<T>> = Vec::with_capacity(trace.states.len());
    let mut violations = Vec::new();
    for (k, states) in trace.states.iter().enumerate() {
        let (xbar, ybar) = fixed.errors(states)?;
        let value = lyapunov(&xbar, &ybar, params.lambda)?;
        let delta = records.last().map(|prev| value - rho2 * prev.value);
        if delta.is_some_and(|dv| !(dv <= tol)) {
            violations.push(k);
        }
        records.push(LyapunovRecord { k, value, delta });
    }
    Ok(LyapunovReport { records, violations })
}

/// The three brackets of the `ΔV` expansion at one iteration. Each bracket
/// is nonnegative under the convergence assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaVTerms<T> {
    pub k: usize,
    /// `ρ²‖v̄‖² − ‖ū‖²`: objective contraction.
    pub gradient_term: T,
    /// `σ₀²‖dis x̄‖² − ‖dis v̄‖²`: network contraction.
    pub consensus_term: T,
    /// `‖dis(v̄ + λ(x̄ + ȳ))‖²`.
    pub cross_term: T,
    /// `V(k+1) − ρ²V(k)` computed directly.
    pub delta_v: T,
}

impl<T: Scalar> DeltaVTerms<T> {
    /// `ΔV` reassembled from the three brackets.
    pub fn combined(&self, rho: T, sigma0: T) -> T {
        let two = T::lit(2.0);
        -self.gradient_term
            - two * rho * rho * self.consensus_term
            - two * sigma0 * sigma0 * self.cross_term
    }

    /// All brackets nonnegative up to `tol`.
    pub fn all_nonnegative(&self, tol: T) -> bool {
        self.gradient_term >= -tol && self.consensus_term >= -tol && self.cross_term >= -tol
    }
}

/// Evaluates the `ΔV` brackets from stored `(x, y, v, u)` for every iteration.
pub fn delta_v_terms<T: Scalar>(problem: &Problem<T>, trace: &RunTrace<T>) -> Result<Vec<DeltaVTerms<T>>> {
    let params = &trace.params;
    let fixed = FixedPoint::new(problem, params)?;
    let rho2 = params.rho * params.rho;
    let s0 = sigma0(params.rho)?;
    let mut out = Vec::with_capacity(trace.iterations());
    for (k, ws) in trace.workspaces.iter().enumerate() {
        let (xbar, ybar) = fixed.errors(&trace.states[k])?;
        let (xbar1, ybar1) = fixed.errors(&trace.states[k + 1])?;
        let vbar = StackedVector::from_blocks(&ws.v)?.sub(&fixed.xstar)?;
        let ubar = StackedVector::from_blocks(&ws.u)?.sub(&fixed.ustar)?;
        let gradient_term = rho2 * vbar.norm_sq() - ubar.norm_sq();
        let consensus_term =
            s0 * s0 * disagreement_part(&xbar).norm_sq() - disagreement_part(&vbar).norm_sq();
        let mixed = vbar.add(&xbar.add(&ybar)?.scale(params.lambda))?;
        let cross_term = disagreement_part(&mixed).norm_sq();
        let delta_v = lyapunov(&xbar1, &ybar1, params.lambda)? - rho2 * lyapunov(&xbar, &ybar, params.lambda)?;
        out.push(DeltaVTerms { k, gradient_term, consensus_term, cross_term, delta_v });
    }
    Ok(out)
}

/// Geometric rate `r` fitted to `e_k ≈ C rᵏ` by least squares on `ln e_k`.
///
/// The sequence is cut at the first entry at or below `1e2·ε·e₀` (or
/// non-finite); the fit then uses the last `tail_fraction` of the remaining
/// points, but never fewer than [`MIN_FIT_POINTS`].
pub fn fit_rate<T: Scalar>(errors: &[T], tail_fraction: T) -> Result<T> {
    if !(tail_fraction > T::zero() && tail_fraction <= T::one()) {
        return Err(Error::Domain(format!("tail fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let e0 = *errors.first().ok_or_else(|| Error::DegenerateFit("empty error sequence".into()))?;
    if !(e0 > T::zero()) || !e0.is_finite() {
        return Err(Error::DegenerateFit(format!("initial error {e0} is not positive")));
    }
    let floor = T::lit(1e2) * T::epsilon() * e0;
    let usable = errors.iter().take_while(|&&e| e.is_finite() && e > floor).count();
    if usable < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "only {usable} points above the floor {floor}, need {MIN_FIT_POINTS}"
        )));
    }
    let want = (tail_fraction * T::lit(usable as f64)).ceil().to_usize().unwrap_or(usable);
    let len = want.max(MIN_FIT_POINTS).min(usable);
    let start = usable - len;
    let pts: Vec<(T, T)> = (start..usable).map(|k| (T::lit(k as f64), errors[k].ln())).collect();
    let cnt = T::lit(len as f64);
    let mean_k = pts.iter().map(|p| p.0).sum::<T>() / cnt;
    let mean_l = pts.iter().map(|p| p.1).sum::<T>() / cnt;
    let sxy: T = pts.iter().map(|&(k, l)| (k - mean_k) * (l - mean_l)).sum();
    let sxx: T = pts.iter().map(|&(k, _)| (k - mean_k) * (k - mean_k)).sum();
    Ok((sxy / sxx).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(blocks: &[&[f64]]) -> StackedVector<f64> {
        StackedVector::from_blocks(&blocks.iter().map(|b| b.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn average_and_disagreement_of_two_scalars() {
        let z = sv(&[&[1.0], &[3.0]]);
        assert_eq!(average_part(&z), sv(&[&[2.0], &[2.0]]));
        assert_eq!(disagreement_part(&z), sv(&[&[-1.0], &[1.0]]));
    }

    #[test]
    fn consensual_vector_is_fixed_by_average() {
        let z = StackedVector::repeat(4, &[0.3, -1.2]);
        assert_eq!(average_part(&z), z);
        assert!(disagreement_part(&z).norm_sq() < 1e-30);
    }

    #[test]
    fn lyapunov_simple_values() {
        let zero = StackedVector::<f64>::zeros(3, 2);
        assert_eq!(lyapunov(&zero, &zero, 0.5).unwrap(), 0.0);
        let e = [1.0, 2.0];
        let x = StackedVector::repeat(3, &e);
        assert!((lyapunov(&x, &zero, 0.5).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_bad_lambda() {
        let z = StackedVector::<f64>::zeros(2, 1);
        for lambda in [0.0, 1.0, -0.3, 1.2] {
            assert!(matches!(lyapunov(&z, &z, lambda), Err(Error::Domain(_))));
            assert!(matches!(error_bound_constant(1.0, lambda), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn error_bound_constant_examples() {
        assert_eq!(error_bound_constant(0.0, 0.6).unwrap(), 0.0);
        // eigenvalues of [1 .6; .6 .6] are (1.6 ± √((1−.6)² + 4·.36))/2 = (1.6 ± √1.6)/2
        let lo = (1.6 - 1.6_f64.sqrt()) / 2.0;
        let hi = (1.6 + 1.6_f64.sqrt()) / 2.0;
        let c = error_bound_constant(1.0, 0.6).unwrap();
        assert!((c - (hi / lo).sqrt()).abs() < 1e-12);
        assert!((c - 2.923_987_610_591_258).abs() < 1e-12);
        assert!(error_bound_constant(-1.0, 0.6).is_err());
    }

    #[test]
    fn fit_rate_on_geometric_sequence() {
        let e: Vec<f64> = (0..100).map(|k| 0.75_f64.powi(k)).collect();
        assert!((fit_rate(&e, 0.5).unwrap() - 0.75).abs() < 1e-9);
    }

    #[test]
    fn fit_rate_constant_sequence() {
        assert!((fit_rate(&[2.0_f64; 40], 0.5).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fit_rate_degenerate_inputs() {
        assert!(matches!(fit_rate(&[0.0_f64; 20], 0.5), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_rate(&[1.0_f64; 5], 0.5), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_rate::<f64>(&[], 0.5), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_rate(&[1.0_f64; 20], 0.0), Err(Error::Domain(_))));
        // collapses to zero after 3 points
        let mut e = vec![1.0_f64, 0.5, 0.25];
        e.extend([0.0; 30]);
        assert!(matches!(fit_rate(&e, 0.5), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn fit_rate_ignores_floor_plateau() {
        // geometric decay down to rounding level, then a flat floor
        let mut e: Vec<f64> = (0..60).map(|k| 0.5_f64.powi(k)).collect();
        e.extend([1e-17; 100]);
        assert!((fit_rate(&e, 0.5).unwrap() - 0.5).abs() < 1e-9);
    }
}
