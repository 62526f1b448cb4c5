//! Distributed minimization of the finite condition number of weighted
//! graph Laplacians.
//!
//! The crate has three layers:
//!
//! - **Spectral core**: graph topology, Laplacian constructions, and a
//!   centralized Jacobi eigensolver that serves as the oracle everything
//!   else is validated against ([`graph`], [`matrix`], [`eig`]).
//! - **Message passing**: a synchronous round-based network simulator plus
//!   the protocols that estimate extremal Laplacian eigenpairs using only
//!   neighbor communication ([`simnet`], [`protocols`], [`estimators`]).
//! - **Optimization and evaluation**: the augmented-Lagrangian weight
//!   optimizer that runs on either eigenvalue engine, and the closed-loop
//!   consensus / output-feedback simulations used to evaluate the resulting
//!   weights ([`optimizer`], [`central`], [`gradient`], [`csvio`]).

pub mod central;
pub mod csvio;
pub mod eig;
pub mod estimators;
pub mod gradient;
pub mod graph;
pub mod matrix;
pub mod optimizer;
pub mod protocols;
pub mod simnet;

#[cfg(test)]
pub(crate) mod testutil;

pub use central::{
    central_solve, closed_loop_mode_matrix, decay_rate, demo_weights, disagreement_norms,
    gaussian_vector, optimal_consensus_step, optimal_step_by_grid, simulate_avg_consensus,
    simulate_consensus, simulate_dof_closedloop, spectral_radius_4, weighted_consensus_limit,
    CentralError, DofController, DofTrace, LtiPlant,
};
pub use eig::{
    condition_number, lmi_feasible, reduced_factor, sym_eig, EigError, EigPair, Spectrum,
    Weighting,
};
pub use estimators::{DistributedEngine, EigEngine, EigEval, EngineError, OracleEngine, Scheme};
pub use graph::{EdgeWeights, Graph, GraphError, NodeWeights};
pub use matrix::{
    edge_weighted_laplacian, incidence, laplacian, node_weighted_laplacian,
    symmetric_weighted_laplacian, DenseMatrix, DenseSymMatrix,
};
pub use optimizer::{
    aug_lagrangian_value, multiplier_update, outer_solve, projected_step, AugLagParams,
    DescentStep, MultiplierUpdate, OptimError, RunTrace, WeightMode,
};
pub use simnet::{AgentCtx, Inbox, Message, Outgoing, Protocol, RoundTrace, SimError};
