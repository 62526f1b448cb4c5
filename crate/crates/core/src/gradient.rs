//! Eigenvalue sensitivities with respect to node and edge weights.
//!
//! For a simple eigenvalue lambda of the symmetric node-weighted form
//! diag(w)^{1/2} L diag(w)^{1/2} with unit eigenvector v, the derivative
//! with respect to w_i is `v_i * sum over neighbors j of
//! (v_i - sqrt(w_j / w_i) * v_j)`, and for the edge-weighted Laplacian the derivative with respect to the
//! weight of edge (i, j) is (v_i - v_j)^2. When the eigenvalue is repeated
//! these formulas evaluated at any unit eigenvector give a subgradient,
//! which is exactly what the projected descent loop needs.

use crate::graph::Graph;

/// Gradient of an eigenvalue of the node-weighted form with respect to the
/// node weights. `v` must be a unit eigenvector; `w` the weights the form
/// was built with. At a zero weight the sqrt ratio is taken as zero, the
/// one-sided value on the boundary of the feasible set.
pub fn node_weight_gradient(g: &Graph, w: &[f64], v: &[f64]) -> Vec<f64> {
    assert_eq!(w.len(), g.n());
    assert_eq!(v.len(), g.n());
    (0..g.n())
        .map(|i| {
            let s: f64 = g
                .neighbors(i)
                .iter()
                .map(|&j| {
                    let ratio = if w[i] > 0.0 { (w[j] / w[i]).sqrt() } else { 0.0 };
                    v[i] - ratio * v[j]
                })
                .sum();
            v[i] * s
        })
        .collect()
}

/// Gradient of an eigenvalue of the edge-weighted Laplacian with respect to
/// the edge weights, in `Graph::edges()` order. `v` must be a unit
/// eigenvector.
pub fn edge_weight_gradient(g: &Graph, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), g.n());
    g.edges()
        .iter()
        .map(|&(i, j)| (v[i] - v[j]) * (v[i] - v[j]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::sym_eig;
    use crate::graph::{EdgeWeights, Graph, NodeWeights};
    use crate::matrix::{edge_weighted_laplacian, symmetric_weighted_laplacian};
    use crate::testutil::bench7;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixtures() -> Vec<Graph> {
        vec![bench7(), Graph::path(3), Graph::complete(3), Graph::star(4)]
    }

    /// Smallest relevant spectral gap: the finite-difference check is only
    /// well posed when the two extremal eigenvalues are simple.
    fn min_gap(values: &[f64]) -> f64 {
        let n = values.len();
        let top = values[n - 1] - values[n - 2];
        let fied_up = values[2.min(n - 1)] - values[1];
        let fied_down = values[1] - values[0];
        top.min(fied_up).min(fied_down)
    }

    fn draw_well_separated(g: &Graph, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let w: Vec<f64> = (0..g.n()).map(|_| rng.random_range(0.2..2.0)).collect();
            let spec = sym_eig(&symmetric_weighted_laplacian(
                g,
                &NodeWeights::new(w.clone()).unwrap(),
            ));
            let scale = spec.values[g.n() - 1].max(1.0);
            if min_gap(&spec.values) >= 0.05 * scale {
                return w;
            }
        }
    }

    /// max |a - b| / max(1, ||b||_inf): relative error of the gradient as a
    /// vector, which stays meaningful when individual entries pass through
    /// zero.
    fn vector_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        let den = b.iter().map(|y| y.abs()).fold(0.0f64, f64::max).max(1.0);
        num / den
    }

    #[test]
    fn node_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(901);
        for g in fixtures() {
            for _ in 0..20 {
                let w = draw_well_separated(&g, &mut rng);
                let spec = sym_eig(&symmetric_weighted_laplacian(
                    &g,
                    &NodeWeights::new(w.clone()).unwrap(),
                ));
                let n = g.n();
                for (k, pair) in [(n - 1, spec.top()), (1, spec.second())] {
                    let grad = node_weight_gradient(&g, &w, &pair.vector);
                    let mut fd = vec![0.0; n];
                    for i in 0..n {
                        let h = 1e-5 * w[i].max(1.0);
                        let mut wp = w.clone();
                        wp[i] += h;
                        let mut wm = w.clone();
                        wm[i] -= h;
                        let up = sym_eig(&symmetric_weighted_laplacian(
                            &g,
                            &NodeWeights::new(wp).unwrap(),
                        ))
                        .values[k];
                        let dn = sym_eig(&symmetric_weighted_laplacian(
                            &g,
                            &NodeWeights::new(wm).unwrap(),
                        ))
                        .values[k];
                        fd[i] = (up - dn) / (2.0 * h);
                    }
                    let err = vector_rel_err(&grad, &fd);
                    assert!(err <= 1e-5, "node gradient err {err:e} on n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn edge_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(902);
        for g in fixtures() {
            let m = g.edges().len();
            for _ in 0..20 {
                // Edge draws: same separation guard, on the edge-weighted form.
                let we: Vec<f64> = loop {
                    let cand: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..2.0)).collect();
                    let spec = sym_eig(&edge_weighted_laplacian(
                        &g,
                        &EdgeWeights::new(cand.clone()).unwrap(),
                    ));
                    let scale = spec.values[g.n() - 1].max(1.0);
                    if min_gap(&spec.values) >= 0.05 * scale {
                        break cand;
                    }
                };
                let spec = sym_eig(&edge_weighted_laplacian(
                    &g,
                    &EdgeWeights::new(we.clone()).unwrap(),
                ));
                let n = g.n();
                for (k, pair) in [(n - 1, spec.top()), (1, spec.second())] {
                    let grad = edge_weight_gradient(&g, &pair.vector);
                    let mut fd = vec![0.0; m];
                    for e in 0..m {
                        let h = 1e-5 * we[e].max(1.0);
                        let mut wp = we.clone();
                        wp[e] += h;
                        let mut wm = we.clone();
                        wm[e] -= h;
                        let up = sym_eig(&edge_weighted_laplacian(
                            &g,
                            &EdgeWeights::new(wp).unwrap(),
                        ))
                        .values[k];
                        let dn = sym_eig(&edge_weighted_laplacian(
                            &g,
                            &EdgeWeights::new(wm).unwrap(),
                        ))
                        .values[k];
                        fd[e] = (up - dn) / (2.0 * h);
                    }
                    let err = vector_rel_err(&grad, &fd);
                    assert!(err <= 1e-5, "edge gradient err {err:e} on n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn subgradient_descent_never_increases_the_penalized_objective() {
        // At repeated extremal eigenvalues (complete graph: top pair;
        // star: Fiedler pair) the formulas give subgradients; a small
        // projected step on them must still descend.
        let rho = 20.0;
        let sigma = 0.0;
        let gamma = 1e-4;
        for g in [Graph::complete(3), Graph::star(4)] {
            let n = g.n();
            let mut w = vec![1.0; n];
            let objective = |w: &[f64]| {
                let spec = sym_eig(&symmetric_weighted_laplacian(
                    &g,
                    &NodeWeights::new(w.to_vec()).unwrap(),
                ));
                let (l2, ln) = (spec.values[1], spec.values[n - 1]);
                let h = (1.0 - l2 + sigma / rho).max(0.0);
                ln + 0.5 * rho * h * h
            };
            let mut prev = objective(&w);
            for step in 0..100 {
                let spec = sym_eig(&symmetric_weighted_laplacian(
                    &g,
                    &NodeWeights::new(w.clone()).unwrap(),
                ));
                let h = (1.0 - spec.values[1] + sigma / rho).max(0.0);
                let g_top = node_weight_gradient(&g, &w, &spec.top().vector);
                let g_fie = node_weight_gradient(&g, &w, &spec.second().vector);
                for i in 0..n {
                    w[i] = (w[i] - gamma * (g_top[i] - rho * h * g_fie[i])).max(0.0);
                }
                let cur = objective(&w);
                assert!(
                    cur <= prev + 1e-12,
                    "objective rose {prev} -> {cur} at step {step} on n={n}"
                );
                prev = cur;
            }
        }
    }
}
