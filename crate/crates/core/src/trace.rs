//! Per-iteration record of a run, shared by the vectorised and
//! message-passing execution paths.

use crate::algorithm::{AgentState, AlgorithmParams};
use crate::linalg;
use crate::scalar::Scalar;

/// Intermediate points of one iteration: `v_{i,m}` after the `m`
/// communication rounds and `u_i` after the local gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationWorkspace<T> {
    pub v: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
}

/// Everything observed during `K` iterations of the algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T: Scalar> {
    pub params: AlgorithmParams<T>,
    /// `states[k][i]` holds `(x_i^k, y_i^k)` for `k = 0..=K`.
    pub states: Vec<Vec<AgentState<T>>>,
    /// `workspaces[k]` holds the intermediate points of iteration `k < K`.
    pub workspaces: Vec<IterationWorkspace<T>>,
    pub gradient_evals: usize,
    /// One per agent per communication round.
    pub row_communications: usize,
    /// Point-to-point messages; zero for the vectorised path.
    pub messages: usize,
}

impl<T: Scalar> RunTrace<T> {
    pub fn iterations(&self) -> usize {
        self.workspaces.len()
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Final agent states.
    pub fn last(&self) -> &[AgentState<T>] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `‖x_i^k − x*‖` indexed `[k][i]`.
    pub fn agent_errors(&self, xstar: &[T]) -> Vec<Vec<T>> {
        self.states
            .iter()
            .map(|agents| agents.iter().map(|s| linalg::norm(&linalg::sub(&s.x, xstar))).collect())
            .collect()
    }

    /// `maxᵢ ‖x_i^k − x*‖` for each `k`.
    pub fn max_errors(&self, xstar: &[T]) -> Vec<T> {
        self.agent_errors(xstar)
            .into_iter()
            .map(|row| row.into_iter().fold(T::zero(), T::max))
            .collect()
    }

    /// Largest entrywise difference between two traces over `x`, `y`, `v`
    /// and `u`, or `None` when their shapes differ.
    pub fn max_abs_difference(&self, other: &Self) -> Option<T> {
        if self.states.len() != other.states.len() || self.workspaces.len() != other.workspaces.len() {
            return None;
        }
        let mut worst = T::zero();
        let mut fold = |a: &[T], b: &[T]| -> Option<()> {
            if a.len() != b.len() {
                return None;
            }
            for (&p, &q) in a.iter().zip(b) {
                worst = worst.max((p - q).abs());
            }
            Some(())
        };
        for (sa, sb) in self.states.iter().zip(&other.states) {
            if sa.len() != sb.len() {
                return None;
            }
            for (a, b) in sa.iter().zip(sb) {
                fold(&a.x, &b.x)?;
                fold(&a.y, &b.y)?;
            }
        }
        for (wa, wb) in self.workspaces.iter().zip(&other.workspaces) {
            if wa.v.len() != wb.v.len() || wa.u.len() != wb.u.len() {
                return None;
            }
            for (a, b) in wa.v.iter().zip(&wb.v).chain(wa.u.iter().zip(&wb.u)) {
                fold(a, b)?;
            }
        }
        Some(worst)
    }
}
