//! The multi-round gossip gradient method and its baselines.
//!
//! Each iteration of the method runs `m` gossip rounds on `x`, one local
//! gradient step, and a correction update:
//!
//! ```text
//! v_{i,0} = x_i
//! v_{i,ℓ} = Σⱼ w_ij^{kℓ} v_{j,ℓ−1}            ℓ = 1..m
//! u_i     = v_{i,m} − α ∇f_i(v_{i,m})
//! y_i⁺    = y_i + x_i − v_{i,m}
//! x_i⁺    = u_i − λ y_i⁺,                     λ = √(1 − ρ²)
//! ```
//!
//! `m` is the least positive integer with `σ^m ≤ σ₀(ρ)`, where
//! `σ₀(ρ) = (√(1+ρ) − √(1−ρ))/2`.

use crate::error::{check_dim, Error, Result};
use crate::gossip::{GossipMatrix, GossipSchedule};
use crate::linalg;
use crate::objective::{ContractionParams, Problem};
use crate::scalar::Scalar;
use crate::trace::{IterationWorkspace, RunTrace};

/// Lower clamp applied to `ρ` before deriving `λ` and `m`.
pub const RHO_FLOOR: f64 = 1e-6;

/// `σ₀(ρ) = (√(1+ρ) − √(1−ρ))/2` for `ρ ∈ (0, 1)`.
pub fn sigma0<T: Scalar>(rho: T) -> Result<T> {
    if !(rho > T::zero() && rho < T::one()) {
        return Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    // same value, without the cancellation for small rho
    Ok(rho / ((T::one() + rho).sqrt() + (T::one() - rho).sqrt()))
}

/// Least `m ≥ 1` with `σ^m ≤ σ₀(ρ)`.
pub fn comm_rounds<T: Scalar>(rho: T, sigma: T) -> Result<usize> {
    let target = sigma0(rho)?;
    if !(sigma > T::zero() && sigma < T::one()) {
        return Err(Error::Domain(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    let estimate = (target.ln() / sigma.ln()).ceil();
    let mut m = estimate.to_usize().unwrap_or(1).max(1);
    let pow = |e: usize| sigma.powi(i32::try_from(e).unwrap_or(i32::MAX));
    while m > 1 && pow(m - 1) <= target {
        m -= 1;
    }
    while pow(m) > target {
        m += 1;
    }
    Ok(m)
}

/// Stepsize, contraction factor, spectral-gap bound and the derived `m`, `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmParams<T> {
    pub alpha: T,
    /// Contraction factor, clamped to at least [`RHO_FLOOR`].
    pub rho: T,
    pub sigma: T,
    pub m: usize,
    pub lambda: T,
    /// `m` was set explicitly rather than derived.
    pub m_overridden: bool,
}

impl<T: Scalar> AlgorithmParams<T> {
    pub fn new(alpha: T, rho: T, sigma: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::Domain(format!("stepsize must be positive, got {alpha}")));
        }
        if !(rho >= T::zero() && rho < T::one()) {
            return Err(Error::Domain(format!("rho must lie in [0, 1), got {rho}")));
        }
        let rho = rho.max(T::lit(RHO_FLOOR));
        let m = comm_rounds(rho, sigma)?;
        let lambda = (T::one() - rho * rho).sqrt();
        Ok(Self { alpha, rho, sigma, m, lambda, m_overridden: false })
    }

    pub fn from_contraction(p: &ContractionParams<T>, sigma: T) -> Result<Self> {
        Self::new(p.alpha, p.rho, sigma)
    }

    /// Replaces the derived `m`.
    pub fn with_m(mut self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        self.m = m;
        self.m_overridden = true;
        Ok(self)
    }

    pub fn sigma0(&self) -> T {
        sigma0(self.rho).expect("rho validated at construction")
    }

    /// `σ^m ≤ σ₀(ρ)`; can only fail after [`AlgorithmParams::with_m`].
    pub fn satisfies_consensus_bound(&self) -> bool {
        self.sigma.powi(self.m as i32) <= self.sigma0()
    }

    /// `ρ^{1/m}`: the rate per communication round.
    pub fn per_step_rate(&self) -> T {
        self.rho.powf(T::one() / T::lit(self.m as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<T> {
    /// Estimate of the optimiser.
    pub x: Vec<T>,
    /// Correction variable.
    pub y: Vec<T>,
}

/// States with the given `x_i⁰` and `y_i⁰ = 0`.
pub fn initial_states<T: Scalar>(xs: Vec<Vec<T>>) -> Vec<AgentState<T>> {
    xs.into_iter()
        .map(|x| {
            let y = vec![T::zero(); x.len()];
            AgentState { x, y }
        })
        .collect()
}

/// Work done so far: local gradient evaluations and row communications
/// (one per agent per round).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub gradient_evals: usize,
    pub row_communications: usize,
}

/// `v_i ← Σⱼ w_ij v_j` for every agent, summing over `j` in ascending order.
pub fn mix<T: Scalar>(w: &GossipMatrix<T>, v: &[Vec<T>]) -> Vec<Vec<T>> {
    let d = v.first().map_or(0, Vec::len);
    (0..w.n())
        .map(|i| {
            let mut acc = vec![T::zero(); d];
            for (&wij, vj) in w.row(i).iter().zip(v) {
                for (a, &b) in acc.iter_mut().zip(vj) {
                    *a = *a + wij * b;
                }
            }
            acc
        })
        .collect()
}

fn check_shapes<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GossipSchedule<T>,
    states: &[AgentState<T>],
) -> Result<()> {
    let n = problem.n();
    if schedule.n() != n {
        return Err(Error::Config(format!(
            "schedule is for {} agents, problem has {n}",
            schedule.n()
        )));
    }
    if states.len() != n {
        return Err(Error::Config(format!("{} agent states for {n} agents", states.len())));
    }
    for s in states {
        check_dim(problem.dim(), s.x.len())?;
        check_dim(problem.dim(), s.y.len())?;
    }
    Ok(())
}

/// One iteration `k` of the method over all agents.
pub fn algorithm_iteration<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GossipSchedule<T>,
    params: &AlgorithmParams<T>,
    states: &[AgentState<T>],
    k: usize,
    counters: &mut Counters,
) -> Result<(Vec<AgentState<T>>, IterationWorkspace<T>)> {
    check_shapes(problem, schedule, states)?;
    let n = problem.n();
    let m = params.m;

    let mut v: Vec<Vec<T>> = states.iter().map(|s| s.x.clone()).collect();
    for l in 1..=m {
        v = mix(schedule.matrix_at(k, l, m), &v);
        counters.row_communications += n;
    }

    let evals_before = counters.gradient_evals;
    let mut next = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for (i, (s, vi)) in states.iter().zip(&v).enumerate() {
        let g = problem.local(i).gradient(vi)?;
        counters.gradient_evals += 1;
        let ui = linalg::axpy(vi, -params.alpha, &g);
        let y = linalg::add(&s.y, &linalg::sub(&s.x, vi));
        let x = linalg::axpy(&ui, -params.lambda, &y);
        u.push(ui);
        next.push(AgentState { x, y });
    }
    assert_eq!(counters.gradient_evals - evals_before, n, "one gradient per agent per iteration");
    Ok((next, IterationWorkspace { v, u }))
}

/// Rejects initial states whose `y` does not sum to zero.
pub(crate) fn check_tracking_sum<T: Scalar>(states: &[AgentState<T>]) -> Result<()> {
    let d = states.first().map_or(0, |s| s.y.len());
    let mut sum = vec![T::zero(); d];
    let mut mass = T::zero();
    for s in states {
        sum = linalg::add(&sum, &s.y);
        mass = mass + linalg::norm(&s.y);
    }
    let tol = T::epsilon() * T::lit(64.0) * T::one().max(mass);
    if linalg::norm(&sum) > tol {
        return Err(Error::Config("initial y must sum to zero across agents".into()));
    }
    Ok(())
}

/// Runs `iters` iterations from `initial` and records everything.
pub fn run<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GossipSchedule<T>,
    params: &AlgorithmParams<T>,
    initial: Vec<AgentState<T>>,
    iters: usize,
) -> Result<RunTrace<T>> {
    check_shapes(problem, schedule, &initial)?;
    check_tracking_sum(&initial)?;
    let mut counters = Counters::default();
    let mut states = Vec::with_capacity(iters + 1);
    let mut workspaces = Vec::with_capacity(iters);
    states.push(initial);
    for k in 0..iters {
        let (next, ws) =
            algorithm_iteration(problem, schedule, params, states.last().expect("nonempty"), k, &mut counters)?;
        states.push(next);
        workspaces.push(ws);
    }
    let n = problem.n();
    assert_eq!(counters.gradient_evals, n * iters);
    assert_eq!(counters.row_communications, n * params.m * iters);
    Ok(RunTrace {
        params: *params,
        states,
        workspaces,
        gradient_evals: counters.gradient_evals,
        row_communications: counters.row_communications,
        messages: 0,
    })
}

/// Centralised gradient descent `x⁺ = x − α∇f(x)`; returns `x⁰..=x^iters`.
pub fn centralized_gd<T: Scalar>(
    problem: &Problem<T>,
    alpha: T,
    x0: Vec<T>,
    iters: usize,
) -> Result<Vec<Vec<T>>> {
    check_dim(problem.dim(), x0.len())?;
    let mut traj = Vec::with_capacity(iters + 1);
    traj.push(x0);
    for _ in 0..iters {
        let x = traj.last().expect("nonempty");
        let g = problem.global_gradient(x)?;
        let next = linalg::axpy(x, -alpha, &g);
        traj.push(next);
    }
    Ok(traj)
}

/// Plain decentralised gradient descent
/// `x_i⁺ = Σⱼ w_ij x_j − α∇f_i(x_i)`, one round per step.
/// Returns `[k][i]` for `k = 0..=iters`.
pub fn dgd_baseline<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GossipSchedule<T>,
    alpha: T,
    x0: Vec<Vec<T>>,
    iters: usize,
) -> Result<Vec<Vec<Vec<T>>>> {
    let init = initial_states(x0);
    check_shapes(problem, schedule, &init)?;
    let mut traj: Vec<Vec<Vec<T>>> = Vec::with_capacity(iters + 1);
    traj.push(init.into_iter().map(|s| s.x).collect());
    for k in 0..iters {
        let x = traj.last().expect("nonempty");
        let mixed = mix(schedule.matrix_at(k, 1, 1), x);
        let next = x
            .iter()
            .zip(mixed)
            .enumerate()
            .map(|(i, (xi, wi))| Ok(linalg::axpy(&wi, -alpha, &problem.local(i).gradient(xi)?)))
            .collect::<Result<Vec<_>>>()?;
        traj.push(next);
    }
    Ok(traj)
}
