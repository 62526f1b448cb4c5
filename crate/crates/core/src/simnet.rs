//! Synchronous message-passing network simulator.
//!
//! Agents sit on graph nodes and hold named scalar registers. Each round
//! every agent first emits one broadcast message (or stays silent) computed
//! from its own registers, then consumes the messages its neighbors emitted
//! this round and computes its next register values. All reads go through
//! a double buffer, so results never depend on the order agents are
//! processed in, and a message travels exactly one hop per round.
//!
//! The runner is strict about locality: an agent that asks its inbox for a
//! non-neighbor's message aborts the whole run with an error, rather than
//! silently reading information the network topology does not deliver.

use std::cell::Cell;
use std::fmt::Write as _;

use smallvec::SmallVec;
use thiserror::Error;

use crate::graph::Graph;

/// Message payload: a fixed-arity tuple of scalars per protocol.
pub type Message = SmallVec<[f64; 4]>;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("round {round}: agent {agent} read non-neighbor {peer}'s message")]
    LocalityViolation {
        round: usize,
        agent: usize,
        peer: usize,
    },
    #[error("round {round}: agent {agent} produced {got} registers, protocol declares {expected}")]
    RegisterArity {
        round: usize,
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("round {round}: agent {agent} emitted {got} scalars, protocol declares {expected}")]
    MessageArity {
        round: usize,
        agent: usize,
        expected: usize,
        got: usize,
    },
}

/// What an agent sends in a round.
#[derive(Debug, Clone, PartialEq)]
pub enum Outgoing {
    /// Deliver this tuple to every neighbor.
    Broadcast(Message),
    /// Send nothing; neighbors see an empty inbox slot.
    Silent,
}

/// Static per-agent facts available to every protocol callback.
#[derive(Debug, Clone, Copy)]
pub struct AgentCtx<'a> {
    /// Total number of agents.
    pub n: usize,
    /// Sorted neighbor ids of this agent.
    pub neighbors: &'a [usize],
}

impl AgentCtx<'_> {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// The messages delivered to one agent in one round.
pub struct Inbox<'a> {
    neighbors: &'a [usize],
    emitted: &'a [Option<Message>],
    violation: &'a Cell<Option<usize>>,
}

impl Inbox<'_> {
    /// The message `sender` broadcast this round, or None if it was silent.
    /// Asking about a non-neighbor poisons the run with a locality error.
    pub fn get(&self, sender: usize) -> Option<&[f64]> {
        if self.neighbors.binary_search(&sender).is_err() {
            self.violation.set(Some(sender));
            return None;
        }
        self.emitted[sender].as_deref()
    }

    /// All (sender, message) pairs that arrived, in ascending sender order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.neighbors
            .iter()
            .filter_map(|&j| self.emitted[j].as_deref().map(move |m| (j, m)))
    }
}

/// A synchronous protocol: per-round emit and update rules over named
/// scalar registers, plus a global termination predicate.
///
/// The runner calls `emit` for every agent (messages are computed from the
/// registers as of the end of the previous round), delivers all broadcasts,
/// then calls `update` for every agent. `done` is evaluated on the full
/// register state before each round; returning true at init yields a trace
/// with a single snapshot and no communication.
pub trait Protocol {
    /// Names of the scalar registers each agent holds, in storage order.
    fn registers(&self) -> &'static [&'static str];

    /// Number of scalars in every broadcast message.
    fn message_arity(&self) -> usize;

    /// Initial register values of agent `id`.
    fn init(&self, id: usize, ctx: AgentCtx<'_>) -> Vec<f64>;

    /// The message agent `id` broadcasts in `round` (rounds count from 1).
    fn emit(&self, round: usize, id: usize, ctx: AgentCtx<'_>, locals: &[f64]) -> Outgoing;

    /// Next register values of agent `id` after reading this round's inbox.
    fn update(
        &self,
        round: usize,
        id: usize,
        ctx: AgentCtx<'_>,
        locals: &[f64],
        inbox: &Inbox<'_>,
    ) -> Vec<f64>;

    /// Global termination predicate over all agents' registers.
    fn done(&self, all: &[Vec<f64>]) -> bool;
}

/// Complete record of a run: one snapshot of every agent's registers per
/// round, starting with the initial state.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    registers: Vec<&'static str>,
    /// snapshots[r][agent][register]: state after r rounds.
    snapshots: Vec<Vec<Vec<f64>>>,
    converged: bool,
}

impl RoundTrace {
    /// Number of communication rounds actually executed.
    pub fn rounds_executed(&self) -> usize {
        self.snapshots.len() - 1
    }

    /// True if the termination predicate fired; false if the round budget
    /// ran out first.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn registers(&self) -> &[&'static str] {
        &self.registers
    }

    /// Register values of `agent` after `round` rounds (round 0 = init).
    pub fn locals(&self, round: usize, agent: usize) -> &[f64] {
        &self.snapshots[round][agent]
    }

    /// Final register values of every agent.
    pub fn final_state(&self) -> &[Vec<f64>] {
        self.snapshots.last().expect("trace has an init snapshot")
    }

    /// Value of a named register for `agent` after `round` rounds.
    pub fn value(&self, round: usize, agent: usize, register: &str) -> f64 {
        let k = self.register_index(register);
        self.snapshots[round][agent][k]
    }

    fn register_index(&self, register: &str) -> usize {
        self.registers
            .iter()
            .position(|r| *r == register)
            .unwrap_or_else(|| panic!("no register named {register:?}"))
    }

    /// Final value of `register`, checked to agree across all agents to
    /// within `tol`. Panics with a diagnostic otherwise; intended for tests.
    pub fn assert_uniform(&self, register: &str, tol: f64) -> f64 {
        let k = self.register_index(register);
        let last = self.final_state();
        let v0 = last[0][k];
        for (agent, locals) in last.iter().enumerate() {
            let v = locals[k];
            assert!(
                (v - v0).abs() <= tol,
                "register {register:?} not uniform: agent 0 holds {v0}, agent {agent} holds {v} (tol {tol:e})"
            );
        }
        v0
    }

    /// Long-format CSV of the whole trace: round, agent, register, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,agent,register,value\n");
        for (round, snap) in self.snapshots.iter().enumerate() {
            for (agent, locals) in snap.iter().enumerate() {
                for (name, value) in self.registers.iter().zip(locals) {
                    let _ = writeln!(out, "{round},{agent},{name},{value}");
                }
            }
        }
        out
    }
}

/// Runs `proto` on `graph` until its termination predicate holds or
/// `max_rounds` communication rounds have executed.
pub fn run_rounds<P: Protocol>(
    graph: &Graph,
    proto: &P,
    max_rounds: usize,
) -> Result<RoundTrace, SimError> {
    let order: Vec<usize> = (0..graph.n()).collect();
    run_rounds_ordered(graph, proto, max_rounds, &order)
}

/// Same as `run_rounds` but processes agents in the given order inside each
/// phase. Exists to let tests prove the result is order-independent.
fn run_rounds_ordered<P: Protocol>(
    graph: &Graph,
    proto: &P,
    max_rounds: usize,
    order: &[usize],
) -> Result<RoundTrace, SimError> {
    let n = graph.n();
    let registers = proto.registers().to_vec();
    let arity = proto.message_arity();
    let ctx = |i: usize| AgentCtx {
        n,
        neighbors: graph.neighbors(i),
    };

    let mut locals: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let init = proto.init(i, ctx(i));
        if init.len() != registers.len() {
            return Err(SimError::RegisterArity {
                round: 0,
                agent: i,
                expected: registers.len(),
                got: init.len(),
            });
        }
        locals.push(init);
    }

    let mut snapshots = vec![locals.clone()];
    let mut converged = proto.done(&locals);
    let violation = Cell::new(None);
    let mut round = 0;

    while !converged && round < max_rounds {
        round += 1;
        let mut emitted: Vec<Option<Message>> = vec![None; n];
        for &i in order {
            match proto.emit(round, i, ctx(i), &locals[i]) {
                Outgoing::Broadcast(m) => {
                    if m.len() != arity {
                        return Err(SimError::MessageArity {
                            round,
                            agent: i,
                            expected: arity,
                            got: m.len(),
                        });
                    }
                    emitted[i] = Some(m);
                }
                Outgoing::Silent => {}
            }
        }
        let mut next: Vec<Vec<f64>> = vec![Vec::new(); n];
        for &i in order {
            let inbox = Inbox {
                neighbors: graph.neighbors(i),
                emitted: &emitted,
                violation: &violation,
            };
            let updated = proto.update(round, i, ctx(i), &locals[i], &inbox);
            if let Some(peer) = violation.take() {
                return Err(SimError::LocalityViolation {
                    round,
                    agent: i,
                    peer,
                });
            }
            if updated.len() != registers.len() {
                return Err(SimError::RegisterArity {
                    round,
                    agent: i,
                    expected: registers.len(),
                    got: updated.len(),
                });
            }
            next[i] = updated;
        }
        locals = next;
        snapshots.push(locals.clone());
        converged = proto.done(&locals);
    }

    Ok(RoundTrace {
        registers,
        snapshots,
        converged,
    })
}
