#![allow(dead_code)]

use gossipgd::algorithm::{initial_states, AgentState, AlgorithmParams};
use gossipgd::localization::five_agent_gossip_pair_as;
use gossipgd::objective::{params_from_one_point_convexity, seeded_quadratic_problem, StrongSmoothParams};
use gossipgd::{GossipMatrix, GossipSchedule, Problem64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub name: String,
    pub problem: Problem64,
    pub schedule: GossipSchedule<f64>,
    pub params: AlgorithmParams<f64>,
    pub initial: Vec<AgentState<f64>>,
    pub iters: usize,
}

pub fn pair_schedule_random(seed: u64) -> GossipSchedule<f64> {
    let (a, b) = five_agent_gossip_pair_as();
    GossipSchedule::seeded_random(vec![a, b], seed).unwrap()
}

pub fn pair_schedule_cyclic() -> GossipSchedule<f64> {
    let (a, b) = five_agent_gossip_pair_as();
    GossipSchedule::cyclic(vec![a, b]).unwrap()
}

pub fn random_starts(n: usize, d: usize, scale: f64, seed: u64) -> Vec<AgentState<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initial_states((0..n).map(|_| (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect())
}

/// Quadratic problem with parameters from (μ, L) and σ = the schedule's
/// largest one-round gap.
pub fn quadratic_case(
    name: &str,
    n: usize,
    d: usize,
    mu: f64,
    l: f64,
    schedule: GossipSchedule<f64>,
    seed: u64,
    // 0 picks [`iters_to_resolution`]
    iters: usize,
) -> Case {
    let sp = StrongSmoothParams::new(mu, l).unwrap();
    let problem = seeded_quadratic_problem(n, d, &sp, seed).unwrap();
    let cp = params_from_one_point_convexity(&sp);
    let sigma = schedule.max_gap().max(1e-3);
    let params = AlgorithmParams::from_contraction(&cp, sigma).unwrap();
    let iters = if iters == 0 { iters_to_resolution(params.rho) } else { iters };
    Case { name: name.into(), problem, schedule, params, initial: random_starts(n, d, 5.0, seed ^ 0xABCD), iters }
}

/// Iterations for `ρᵏ` to reach `1e−11`, keeping the run clear of the
/// rounding floor where relative bounds on `V` stop being meaningful.
pub fn iters_to_resolution(rho: f64) -> usize {
    (11.0 * 10f64.ln() / -rho.ln()).ceil() as usize
}

/// Compliant runs: every local objective contracts with the configured ρ,
/// every matrix has gap at most σ, and σ^m ≤ σ₀(ρ).
pub fn corpus() -> Vec<Case> {
    let mut out = Vec::new();
    for seed in 0..4u64 {
        out.push(quadratic_case(&format!("pair-random-{seed}"), 5, 3, 1.0, 3.0 + seed as f64, pair_schedule_random(seed), seed, 0));
    }
    out.push(quadratic_case("pair-cyclic", 5, 3, 1.0, 7.0, pair_schedule_cyclic(), 11, 0));
    out.push(quadratic_case("ring-6", 6, 2, 0.5, 2.0, GossipSchedule::constant(GossipMatrix::ring(6).unwrap()).unwrap(), 12, 0));
    out.push(quadratic_case("complete-4", 4, 4, 1.0, 5.0, GossipSchedule::constant(GossipMatrix::complete(4).unwrap()).unwrap(), 13, 0));
    out.push(quadratic_case("single", 1, 3, 1.0, 4.0, GossipSchedule::constant(GossipMatrix::identity(1).unwrap()).unwrap(), 14, 0));
    out
}
