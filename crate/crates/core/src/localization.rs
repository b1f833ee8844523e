//! Range-only target localization as a distributed least-squares problem.
//!
//! Agent `i` sits at `(p_i, q_i)`, measures its exact distance `r_i` to the
//! target, and owns
//!
//! ```text
//! f_i(p, q) = ½ (√((p_i − p)² + (q_i − q)²) − r_i)²,
//! ```
//!
//! which is nonconvex but has zero gradient at the target for every agent.

use std::sync::Arc;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::gossip::{ExactGossipMatrix, GossipMatrix};
use crate::linalg::symmetric_2x2_eigenvalues;
use crate::objective::{LocalObjective, Problem};
use crate::scalar::Scalar;

/// Agent positions, target, and the exact ranges between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationConfig<T> {
    positions: Vec<[T; 2]>,
    target: [T; 2],
    ranges: Vec<T>,
}

impl<T: Scalar> LocalizationConfig<T> {
    /// Fails if there are no agents or an agent sits on the target.
    pub fn new(positions: Vec<[T; 2]>, target: [T; 2]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("localization needs at least one agent".into()));
        }
        let ranges: Vec<T> = positions.iter().map(|p| distance(p, &target)).collect();
        if let Some(i) = ranges.iter().position(|r| !(*r > T::zero())) {
            return Err(Error::Config(format!("agent {i} sits on the target")));
        }
        Ok(Self { positions, target, ranges })
    }

    /// `n` positions uniform in `[lo, hi]²`, rejecting any closer than
    /// `exclusion` to the target.
    pub fn seeded(n: usize, target: [T; 2], lo: T, hi: T, exclusion: T, seed: u64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Domain("empty sampling box".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut positions = Vec::with_capacity(n);
        while positions.len() < n {
            let p = [
                lo + (hi - lo) * T::lit(rng.random::<f64>()),
                lo + (hi - lo) * T::lit(rng.random::<f64>()),
            ];
            if distance(&p, &target) > exclusion {
                positions.push(p);
            }
        }
        Self::new(positions, target)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[[T; 2]] {
        &self.positions
    }

    pub fn target(&self) -> [T; 2] {
        self.target
    }

    pub fn ranges(&self) -> &[T] {
        &self.ranges
    }

    /// Hessian of `f = (1/n) Σ f_i` at the target, `(1/n) Σ u_i u_iᵀ` with
    /// `u_i` the unit vector from agent `i` to the target.
    pub fn target_hessian(&self) -> [[T; 2]; 2] {
        let inv_n = T::one() / T::lit(self.n() as f64);
        let mut h = [[T::zero(); 2]; 2];
        for (p, &r) in self.positions.iter().zip(&self.ranges) {
            let u = [(self.target[0] - p[0]) / r, (self.target[1] - p[1]) / r];
            for a in 0..2 {
                for b in 0..2 {
                    h[a][b] = h[a][b] + inv_n * u[a] * u[b];
                }
            }
        }
        h
    }

    /// Contraction factor of centralised gradient descent near the target,
    /// `max |1 − αλ|` over the eigenvalues `λ` of [`Self::target_hessian`].
    pub fn centralized_rate(&self, alpha: T) -> T {
        let h = self.target_hessian();
        let (lo, hi) = symmetric_2x2_eigenvalues(h[0][0], h[0][1], h[1][1]);
        (T::one() - alpha * lo).abs().max((T::one() - alpha * hi).abs())
    }
}

fn distance<T: Scalar>(a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `f_i` for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeObjective<T> {
    position: [T; 2],
    range: T,
}

impl<T: Scalar> RangeObjective<T> {
    pub fn new(position: [T; 2], range: T) -> Self {
        Self { position, range }
    }

    /// Offset from the agent and its length; errors at the agent itself.
    fn offset(&self, x: &[T]) -> Result<([T; 2], T)> {
        check_dim(2, x.len())?;
        let dv = [x[0] - self.position[0], x[1] - self.position[1]];
        let d = dv[0].hypot(dv[1]);
        if d.is_zero() {
            return Err(Error::SingularPoint(format!(
                "evaluated at agent position ({}, {})",
                self.position[0], self.position[1]
            )));
        }
        Ok((dv, d))
    }

    /// `(1 − r/d) I + (r/d) ûûᵀ` with `û` the unit offset from the agent.
    pub fn hessian(&self, x: &[T]) -> Result<[[T; 2]; 2]> {
        let (dv, d) = self.offset(x)?;
        let ratio = self.range / d;
        let u = [dv[0] / d, dv[1] / d];
        let diag = T::one() - ratio;
        Ok([
            [diag + ratio * u[0] * u[0], ratio * u[0] * u[1]],
            [ratio * u[1] * u[0], diag + ratio * u[1] * u[1]],
        ])
    }
}

impl<T: Scalar> LocalObjective<T> for RangeObjective<T> {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[T]) -> Result<T> {
        let (_, d) = self.offset(x)?;
        let r = d - self.range;
        Ok(T::lit(0.5) * r * r)
    }

    fn gradient(&self, x: &[T]) -> Result<Vec<T>> {
        let (dv, d) = self.offset(x)?;
        let factor = T::one() - self.range / d;
        Ok(vec![factor * dv[0], factor * dv[1]])
    }

    fn hessian_trace(&self, x: &[T]) -> Result<T> {
        let (_, d) = self.offset(x)?;
        Ok(T::lit(2.0) - self.range / d)
    }
}

/// Objective of agent `i` (0-based).
pub fn localization_objective<T: Scalar>(cfg: &LocalizationConfig<T>, i: usize) -> Result<RangeObjective<T>> {
    if i >= cfg.n() {
        return Err(Error::Config(format!("agent index {i} out of range for {} agents", cfg.n())));
    }
    Ok(RangeObjective::new(cfg.positions[i], cfg.ranges[i]))
}

/// Problem with one [`RangeObjective`] per agent and the target as optimiser.
pub fn localization_problem<T: Scalar>(cfg: &LocalizationConfig<T>) -> Result<Problem<T>> {
    let locals = (0..cfg.n())
        .map(|i| localization_objective(cfg, i).map(|f| Arc::new(f) as Arc<dyn LocalObjective<T>>))
        .collect::<Result<Vec<_>>>()?;
    Problem::new(locals, Some(cfg.target.to_vec()))
}

/// `2 / ((1/n) Σ trace ∇²f_i(point))`: in two dimensions the trace is the
/// sum of the extreme Hessian eigenvalues, so this is `2/(λ_min + λ_max)`.
pub fn optimal_stepsize<T: Scalar>(problem: &Problem<T>, point: &[T]) -> Result<T> {
    if problem.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "trace-based stepsize needs d = 2, got d = {}",
            problem.dim()
        )));
    }
    check_dim(2, point.len())?;
    let mut sum = T::zero();
    for f in problem.locals() {
        sum = sum + f.hessian_trace(point)?;
    }
    let mean = sum / T::lit(problem.n() as f64);
    if !(mean > T::zero()) {
        return Err(Error::DegenerateCurvature(format!("mean Hessian trace {mean} is not positive")));
    }
    Ok(T::lit(2.0) / mean)
}

fn exact_rows(rows: [[(i64, i64); 5]; 5]) -> ExactGossipMatrix {
    let rows = rows
        .iter()
        .map(|r| r.iter().map(|&(a, b)| Rational64::new(a, b)).collect())
        .collect();
    GossipMatrix::from_rows(rows).expect("5x5")
}

/// The two gossip matrices of the five-agent localization network, exactly.
///
/// Their sparsity patterns agree except at entry `(1, 3)` (0-based): the
/// link from agent 3 into agent 1 is present in the first and dropped in
/// the second.
pub fn five_agent_gossip_pair() -> (ExactGossipMatrix, ExactGossipMatrix) {
    let z = (0, 1);
    let first = exact_rows([
        [z, (3, 8), (1, 4), z, (3, 8)],
        [(1, 8), z, (3, 4), (1, 8), z],
        [z, (5, 8), z, (3, 8), z],
        [(3, 8), z, z, z, (5, 8)],
        [(1, 2), z, z, (1, 2), z],
    ]);
    let second = exact_rows([
        [z, (1, 2), (1, 4), z, (1, 4)],
        [(1, 4), z, (3, 4), z, z],
        [z, (1, 2), z, (1, 2), z],
        [(1, 4), z, z, z, (3, 4)],
        [(1, 2), z, z, (1, 2), z],
    ]);
    (first, second)
}

/// [`five_agent_gossip_pair`] converted to the scalar type `T`.
pub fn five_agent_gossip_pair_as<T: Scalar>() -> (GossipMatrix<T>, GossipMatrix<T>) {
    let (a, b) = five_agent_gossip_pair();
    (a.to_scalar().expect("small fractions"), b.to_scalar().expect("small fractions"))
}
