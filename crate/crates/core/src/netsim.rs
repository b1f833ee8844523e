//! Synchronous message-passing execution of the method.
//!
//! Every agent is an [`AgentNode`] holding only its own objective, its own
//! `(x, y)`, and during a round its own row of the current gossip matrix.
//! Values of other agents reach it only as [`Message`]s. The network layer
//! routes one message along each nonzero off-diagonal weight, waits at a
//! [`RoundBarrier`] until all of them are delivered, and only then lets
//! agents fold their inboxes. The result must match the vectorised path in
//! [`crate::algorithm`] to rounding error.

use std::sync::Arc;

use crate::algorithm::{check_tracking_sum, AgentState, AlgorithmParams};
use crate::error::{check_dim, Error, Result};
use crate::gossip::GossipSchedule;
use crate::linalg;
use crate::objective::{LocalObjective, Problem};
use crate::scalar::Scalar;
use crate::trace::{IterationWorkspace, RunTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct Message<T> {
    /// Global round index `k·m + ℓ − 1`.
    pub round: usize,
    pub sender: usize,
    pub receiver: usize,
    /// Sender's current `v`.
    pub payload: Vec<T>,
}

/// Ledger entry for one delivered message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub iteration: usize,
    /// Round within the iteration, `1..=m`.
    pub round: usize,
    pub sender: usize,
    pub receiver: usize,
}

/// Ledger entry recording which matrix row an agent applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowRead {
    pub iteration: usize,
    pub round: usize,
    pub agent: usize,
    pub row_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeliveryLedger {
    pub deliveries: Vec<Delivery>,
    pub row_reads: Vec<RowRead>,
}

/// One agent's private state.
#[derive(Debug, Clone)]
pub struct AgentNode<T: Scalar> {
    id: usize,
    objective: Arc<dyn LocalObjective<T>>,
    x: Vec<T>,
    y: Vec<T>,
    v: Vec<T>,
    inbox: Vec<Message<T>>,
}

impl<T: Scalar> AgentNode<T> {
    pub fn new(id: usize, objective: Arc<dyn LocalObjective<T>>, state: AgentState<T>) -> Self {
        let v = state.x.clone();
        Self { id, objective, x: state.x, y: state.y, v, inbox: Vec::new() }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn state(&self) -> AgentState<T> {
        AgentState { x: self.x.clone(), y: self.y.clone() }
    }

    fn begin_iteration(&mut self) {
        self.v = self.x.clone();
    }

    fn outgoing(&self, round: usize, receiver: usize) -> Message<T> {
        Message { round, sender: self.id, receiver, payload: self.v.clone() }
    }

    fn receive(&mut self, msg: Message<T>) {
        self.inbox.push(msg);
    }

    /// `v ← Σⱼ w_j v_j` over this agent's row, folding senders in ascending
    /// id order. The self weight uses the agent's own `v`.
    fn fold_inbox(&mut self, row: &[T], round: usize) -> Result<()> {
        let mut acc = vec![T::zero(); self.v.len()];
        for (j, &w) in row.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let value = if j == self.id {
                &self.v
            } else {
                &self
                    .inbox
                    .iter()
                    .find(|m| m.sender == j && m.round == round)
                    .ok_or_else(|| {
                        Error::Locality(format!(
                            "agent {} needs weight from agent {j} in round {round} but received no message",
                            self.id
                        ))
                    })?
                    .payload
            };
            for (a, &b) in acc.iter_mut().zip(value) {
                *a = *a + w * b;
            }
        }
        self.v = acc;
        self.inbox.clear();
        Ok(())
    }

    /// Gradient step and state update; returns `(v_m, u)`.
    fn local_update(&mut self, alpha: T, lambda: T) -> Result<(Vec<T>, Vec<T>)> {
        let g = self.objective.gradient(&self.v)?;
        let u = linalg::axpy(&self.v, -alpha, &g);
        self.y = linalg::add(&self.y, &linalg::sub(&self.x, &self.v));
        self.x = linalg::axpy(&u, -lambda, &self.y);
        Ok((self.v.clone(), u))
    }
}

/// Synchronisation point of one communication round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundBarrier {
    pub round: usize,
    expected: usize,
    delivered: usize,
}

impl RoundBarrier {
    pub fn open(round: usize, expected: usize) -> Self {
        Self { round, expected, delivered: 0 }
    }

    pub fn record(&mut self) {
        self.delivered += 1;
    }

    /// Succeeds only when every expected message has arrived.
    pub fn close(self) -> Result<()> {
        if self.delivered < self.expected {
            return Err(Error::Protocol(format!(
                "round {}: {} of {} messages delivered",
                self.round, self.delivered, self.expected
            )));
        }
        Ok(())
    }
}

/// Fault injection for negative-control tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tamper {
    /// `agent` applies row `row_index` instead of its own.
    WrongRow { agent: usize, row_index: usize },
    /// Deliver an extra message along a link absent in that round.
    ExtraDelivery { iteration: usize, round: usize, sender: usize, receiver: usize },
    /// Silently lose one message.
    DropDelivery { iteration: usize, round: usize, sender: usize, receiver: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetsimOptions {
    /// Order in which agents are stepped within a round; identity if unset.
    pub agent_order: Option<Vec<usize>>,
    pub tamper: Option<Tamper>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetsimRun<T: Scalar> {
    pub trace: RunTrace<T>,
    pub ledger: DeliveryLedger,
}

/// Runs `iters` iterations with one isolated node per agent.
pub fn run_netsim<T: Scalar>(
    problem: &Problem<T>,
    schedule: &GossipSchedule<T>,
    params: &AlgorithmParams<T>,
    initial: Vec<AgentState<T>>,
    iters: usize,
    options: &NetsimOptions,
) -> Result<NetsimRun<T>> {
    let n = problem.n();
    if schedule.n() != n || initial.len() != n {
        return Err(Error::Config(format!(
            "problem has {n} agents, schedule {}, initial states {}",
            schedule.n(),
            initial.len()
        )));
    }
    for s in &initial {
        check_dim(problem.dim(), s.x.len())?;
        check_dim(problem.dim(), s.y.len())?;
    }
    check_tracking_sum(&initial)?;
    let order: Vec<usize> = match &options.agent_order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return Err(Error::Config("agent order must be a permutation of 0..n".into()));
            }
            o.clone()
        }
        None => (0..n).collect(),
    };

    let mut nodes: Vec<AgentNode<T>> = initial
        .iter()
        .enumerate()
        .map(|(i, s)| AgentNode::new(i, problem.locals()[i].clone(), s.clone()))
        .collect();
    let m = params.m;
    let mut ledger = DeliveryLedger::default();
    let mut states = vec![initial];
    let mut workspaces = Vec::with_capacity(iters);
    let (mut gradient_evals, mut row_communications, mut messages) = (0, 0, 0);

    for k in 0..iters {
        for node in &mut nodes {
            node.begin_iteration();
        }
        for l in 1..=m {
            let round = k * m + l - 1;
            let w = schedule.matrix_at(k, l, m);
            let mut barrier = RoundBarrier::open(round, w.off_diagonal_nnz());
            for &sender in &order {
                for receiver in 0..n {
                    if receiver == sender {
                        continue;
                    }
                    let linked = !w.weight(receiver, sender).is_zero();
                    let forced = matches!(options.tamper, Some(Tamper::ExtraDelivery { iteration, round: r, sender: s, receiver: t })
                        if iteration == k && r == l && s == sender && t == receiver);
                    let dropped = matches!(options.tamper, Some(Tamper::DropDelivery { iteration, round: r, sender: s, receiver: t })
                        if iteration == k && r == l && s == sender && t == receiver);
                    if !(linked || forced) || dropped {
                        continue;
                    }
                    let msg = nodes[sender].outgoing(round, receiver);
                    nodes[receiver].receive(msg);
                    ledger.deliveries.push(Delivery { iteration: k, round: l, sender, receiver });
                    messages += 1;
                    if linked {
                        barrier.record();
                    }
                }
            }
            barrier.close()?;
            for &agent in &order {
                let row_index = match options.tamper {
                    Some(Tamper::WrongRow { agent: a, row_index }) if a == agent => row_index,
                    _ => agent,
                };
                ledger.row_reads.push(RowRead { iteration: k, round: l, agent, row_index });
                nodes[agent].fold_inbox(w.row(row_index), round)?;
                row_communications += 1;
            }
        }
        let mut v = vec![Vec::new(); n];
        let mut u = vec![Vec::new(); n];
        for &agent in &order {
            let (vi, ui) = nodes[agent].local_update(params.alpha, params.lambda)?;
            gradient_evals += 1;
            v[agent] = vi;
            u[agent] = ui;
        }
        workspaces.push(IterationWorkspace { v, u });
        states.push(nodes.iter().map(AgentNode::state).collect());
    }

    Ok(NetsimRun {
        trace: RunTrace { params: *params, states, workspaces, gradient_evals, row_communications, messages },
        ledger,
    })
}

/// Outcome of [`locality_audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub deliveries: usize,
    /// Deliveries along a link whose weight was zero in that round.
    pub zero_weight_deliveries: Vec<Delivery>,
    /// Agents that applied a row other than their own.
    pub foreign_row_reads: Vec<RowRead>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.zero_weight_deliveries.is_empty() && self.foreign_row_reads.is_empty()
    }
}

/// Checks every delivery against the schedule (run with `m` rounds per
/// iteration) and every row read against the reader's id.
pub fn locality_audit<T: Scalar>(ledger: &DeliveryLedger, schedule: &GossipSchedule<T>, m: usize) -> AuditReport {
    let zero_weight_deliveries = ledger
        .deliveries
        .iter()
        .filter(|d| schedule.matrix_at(d.iteration, d.round, m).weight(d.receiver, d.sender).is_zero())
        .copied()
        .collect();
    let foreign_row_reads = ledger.row_reads.iter().filter(|r| r.row_index != r.agent).copied().collect();
    AuditReport { deliveries: ledger.deliveries.len(), zero_weight_deliveries, foreign_row_reads }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barrier_detects_missing_messages() {
        let mut b = RoundBarrier::open(3, 2);
        b.record();
        assert!(matches!(b.close(), Err(Error::Protocol(_))));
        let mut b = RoundBarrier::open(0, 1);
        b.record();
        assert!(b.close().is_ok());
    }
}
