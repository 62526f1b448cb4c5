//! Basic flooding protocols: max-consensus and distributed diameter
//! estimation.
//!
//! These are the communication primitives underneath the eigenpair
//! estimators. Max-consensus floods the largest initial value through the
//! network in at most diameter rounds; the diameter estimator composes two
//! such floods to bound the graph diameter from within the network, using
//! only quiescence (a round in which nothing changed) as its termination
//! signal.

use smallvec::smallvec;

use crate::graph::Graph;
use crate::simnet::{run_rounds, AgentCtx, Inbox, Outgoing, Protocol, SimError};

/// Plain max-consensus on a scalar register; terminates when every agent
/// holds the same value.
pub struct MaxConsensus {
    x0: Vec<f64>,
}

impl MaxConsensus {
    pub fn new(x0: Vec<f64>) -> Self {
        MaxConsensus { x0 }
    }
}

impl Protocol for MaxConsensus {
    fn registers(&self) -> &'static [&'static str] {
        &["x"]
    }

    fn message_arity(&self) -> usize {
        1
    }

    fn init(&self, id: usize, _ctx: AgentCtx<'_>) -> Vec<f64> {
        vec![self.x0[id]]
    }

    fn emit(&self, _round: usize, _id: usize, _ctx: AgentCtx<'_>, locals: &[f64]) -> Outgoing {
        Outgoing::Broadcast(smallvec![locals[0]])
    }

    fn update(
        &self,
        _round: usize,
        _id: usize,
        _ctx: AgentCtx<'_>,
        locals: &[f64],
        inbox: &Inbox<'_>,
    ) -> Vec<f64> {
        vec![inbox.iter().fold(locals[0], |acc, (_, m)| acc.max(m[0]))]
    }

    fn done(&self, all: &[Vec<f64>]) -> bool {
        all.iter().all(|l| l[0] == all[0][0])
    }
}

/// Runs max-consensus to agreement and returns (consensus value, rounds).
pub fn max_consensus(g: &Graph, x0: Vec<f64>, max_rounds: usize) -> Result<(f64, usize), SimError> {
    assert_eq!(x0.len(), g.n());
    let trace = run_rounds(g, &MaxConsensus::new(x0), max_rounds)?;
    Ok((trace.final_state()[0][0], trace.rounds_executed()))
}

/// Max-consensus on agent ids that records, at each agent, the round its
/// register last changed. After quiescence that round equals the agent's
/// hop distance from the maximum-id node.
struct IdFlood;

const IDF_X: usize = 0;
const IDF_LAST_CHANGE: usize = 1;
const IDF_CHANGED: usize = 2;

impl Protocol for IdFlood {
    fn registers(&self) -> &'static [&'static str] {
        &["x", "last_change", "changed"]
    }

    fn message_arity(&self) -> usize {
        1
    }

    fn init(&self, id: usize, _ctx: AgentCtx<'_>) -> Vec<f64> {
        // changed starts at 1 so the quiescence predicate cannot fire
        // before any communication has happened.
        vec![id as f64, 0.0, 1.0]
    }

    fn emit(&self, _round: usize, _id: usize, _ctx: AgentCtx<'_>, locals: &[f64]) -> Outgoing {
        Outgoing::Broadcast(smallvec![locals[IDF_X]])
    }

    fn update(
        &self,
        round: usize,
        _id: usize,
        _ctx: AgentCtx<'_>,
        locals: &[f64],
        inbox: &Inbox<'_>,
    ) -> Vec<f64> {
        let new = inbox.iter().fold(locals[IDF_X], |acc, (_, m)| acc.max(m[0]));
        if new > locals[IDF_X] {
            vec![new, round as f64, 1.0]
        } else {
            vec![new, locals[IDF_LAST_CHANGE], 0.0]
        }
    }

    fn done(&self, all: &[Vec<f64>]) -> bool {
        all.iter().all(|l| l[IDF_CHANGED] == 0.0)
    }
}

/// Distributed diameter estimate.
///
/// Phase one floods the maximum agent id; each agent's last-change round is
/// then its distance from that node. Phase two floods the maximum of those
/// distances, i.e. the eccentricity of the max-id node. Twice that
/// eccentricity is between the true diameter and twice the true diameter.
/// Both phases terminate on quiescence, so no global knowledge enters the
/// protocol; the round cost is at most 2 * (diameter + 1).
pub fn estimate_diameter(g: &Graph, max_rounds: usize) -> Result<(usize, usize), SimError> {
    let phase1 = run_rounds(g, &IdFlood, max_rounds)?;
    let distances: Vec<f64> = phase1
        .final_state()
        .iter()
        .map(|l| l[IDF_LAST_CHANGE])
        .collect();
    let (ecc, rounds2) = max_consensus(g, distances, max_rounds)?;
    let estimate = 2.0 * ecc;
    Ok((estimate as usize, phase1.rounds_executed() + rounds2))
}

/// Lexicographic two-key merge used by flood elections: keeps the pair with
/// the larger primary key, breaking ties by the larger secondary key.
pub fn lex_max(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 > a.1) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::testutil::{bench7, random_connected_graph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_consensus_finds_the_max_within_diameter_rounds() {
        let cases = [
            (bench7(), vec![0.3, -1.0, 4.5, 2.2, 4.5, 0.0, 1.0]),
            (Graph::path(3), vec![3.0, 2.0, 1.0]),
            (Graph::complete(3), vec![-5.0, -7.0, -6.0]),
            (Graph::star(4), vec![1.0, 2.0, 3.0, 4.0]),
        ];
        for (g, x0) in cases {
            let truth = x0.iter().cloned().fold(f64::MIN, f64::max);
            let (got, rounds) = max_consensus(&g, x0, 1000).unwrap();
            assert_eq!(got, truth);
            assert!(rounds <= g.diameter(), "{rounds} > diameter {}", g.diameter());
        }
    }

    #[test]
    fn max_consensus_respects_diameter_bound_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1a);
        for _ in 0..50 {
            let g = random_connected_graph(&mut rng, 12);
            let x0: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-10.0..10.0)).collect();
            let truth = x0.iter().cloned().fold(f64::MIN, f64::max);
            let (got, rounds) = max_consensus(&g, x0, 1000).unwrap();
            assert_eq!(got, truth);
            assert!(rounds <= g.diameter());
        }
    }

    #[test]
    fn diameter_estimate_brackets_truth_on_fixtures() {
        let cases = [
            (bench7(), 3),
            (Graph::path(3), 2),
            (Graph::path(10), 9),
            (Graph::complete(3), 1),
            (Graph::cycle(6), 3),
            (Graph::star(5), 2),
        ];
        for (g, d) in cases {
            let (est, rounds) = estimate_diameter(&g, 1000).unwrap();
            assert!(est >= d && est <= 2 * d, "estimate {est} outside [{d}, {}]", 2 * d);
            assert!(rounds <= 2 * (d + 1));
        }
    }

    #[test]
    fn diameter_estimate_handles_a_single_node() {
        let g = Graph::from_edges(1, &[]).unwrap();
        let (est, _) = estimate_diameter(&g, 10).unwrap();
        assert_eq!(est, 0);
    }

    #[test]
    fn diameter_estimate_brackets_truth_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1b);
        for _ in 0..50 {
            let g = random_connected_graph(&mut rng, 12);
            let d = g.diameter();
            let (est, _) = estimate_diameter(&g, 1000).unwrap();
            assert!(
                est >= d && est <= 2 * d,
                "n={} estimate {est} outside [{d}, {}]",
                g.n(),
                2 * d
            );
        }
    }

    #[test]
    fn lex_max_orders_by_primary_then_secondary() {
        assert_eq!(lex_max((1.0, 0.0), (2.0, -1.0)), (2.0, -1.0));
        assert_eq!(lex_max((2.0, 5.0), (2.0, 3.0)), (2.0, 5.0));
        assert_eq!(lex_max((2.0, 3.0), (2.0, 5.0)), (2.0, 5.0));
        assert_eq!(lex_max((3.0, 0.0), (2.0, 9.0)), (3.0, 0.0));
    }
}
