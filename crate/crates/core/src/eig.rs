//! Centralized eigensolver and the spectral quantities built on it.
//!
//! This is the oracle side of the project: a cyclic Jacobi iteration that is
//! slow but transparently correct, used to validate the message-passing
//! estimators and to drive the reference optimizer. It shares no numerical
//! kernel with the distributed code.

use thiserror::Error;

use crate::graph::{EdgeWeights, Graph, NodeWeights};
use crate::matrix::{
    edge_weighted_laplacian, laplacian, symmetric_weighted_laplacian, DenseMatrix, DenseSymMatrix,
};

/// Absolute off-diagonal magnitude at which Jacobi stops rotating.
const JACOBI_TOL: f64 = 1e-12;
/// Hard cap on full sweeps; n <= a few dozen converges in far fewer.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Two eigenvalues closer than this (relative to max(1, lambda_max)) are
/// treated as a repeated eigenvalue.
const REPEATED_EIG_REL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EigError {
    #[error("algebraic connectivity {lambda2:e} is numerically zero; condition number undefined")]
    VanishingConnectivity { lambda2: f64 },
}

/// One eigenvalue with its unit eigenvector, sign-fixed so the entry of
/// largest magnitude (lowest index on ties) is positive.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Full eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// vectors[k] is the unit eigenvector of values[k], sign-fixed.
    pub vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn pair(&self, k: usize) -> EigPair {
        EigPair {
            value: self.values[k],
            vector: self.vectors[k].clone(),
        }
    }

    /// Largest eigenvalue.
    pub fn top(&self) -> EigPair {
        self.pair(self.n() - 1)
    }

    /// Second-smallest eigenvalue (the algebraic connectivity when the
    /// matrix is a Laplacian form).
    pub fn second(&self) -> EigPair {
        self.pair(1)
    }

    /// Whether the largest eigenvalue is repeated to within the
    /// classification threshold.
    pub fn repeated_top(&self) -> bool {
        let n = self.n();
        n >= 2 && self.close(n - 1, n - 2)
    }

    /// Whether the second-smallest eigenvalue collides with either neighbor.
    pub fn repeated_second(&self) -> bool {
        let n = self.n();
        (n >= 3 && self.close(1, 2)) || (n >= 2 && self.close(0, 1))
    }

    fn close(&self, i: usize, j: usize) -> bool {
        let scale = self.values[self.n() - 1].abs().max(1.0);
        (self.values[i] - self.values[j]).abs() <= REPEATED_EIG_REL * scale
    }
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig(m: &DenseSymMatrix) -> Spectrum {
    let n = m.n();
    let mut a = m.clone();
    // v starts as the identity and accumulates the rotations columnwise.
    let mut v = DenseMatrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).abs());
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).expect("finite"));
    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k)).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v.get(i, k)).collect();
            fix_sign(&mut col);
            col
        })
        .collect();
    Spectrum { values, vectors }
}

fn rotate(a: &mut DenseSymMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq.abs() <= JACOBI_TOL {
        return;
    }
    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let n = a.n();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set_sym(k, p, c * akp - s * akq);
        a.set_sym(k, q, s * akp + c * akq);
    }
    // Closed-form 2x2 block: the rotation zeroes (p,q) exactly and moves
    // t*apq between the two diagonal entries.
    a.set_sym(p, p, app - t * apq);
    a.set_sym(q, q, aqq + t * apq);
    a.set_sym(p, q, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Flips `v` in place so its largest-magnitude entry (lowest index on ties)
/// is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Which Laplacian form a spectral query refers to.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    /// The combinatorial Laplacian L.
    Unit,
    /// Node weights: spectrum of diag(w) L via its symmetric similarity.
    Node(&'a NodeWeights),
    /// Edge weights: B^T diag(w_e) B.
    Edge(&'a EdgeWeights),
}

/// The symmetric matrix whose spectrum realizes the requested weighting.
pub fn weighted_form(g: &Graph, weighting: Weighting<'_>) -> DenseSymMatrix {
    match weighting {
        Weighting::Unit => laplacian(g),
        Weighting::Node(w) => symmetric_weighted_laplacian(g, w),
        Weighting::Edge(w) => edge_weighted_laplacian(g, w),
    }
}

/// Finite condition number lambda_N / lambda_2 of the chosen Laplacian form.
pub fn condition_number(g: &Graph, weighting: Weighting<'_>) -> Result<f64, EigError> {
    let spec = sym_eig(&weighted_form(g, weighting));
    let lambda2 = spec.values[1];
    if lambda2 <= 1e-10 {
        return Err(EigError::VanishingConnectivity { lambda2 });
    }
    Ok(spec.values[spec.n() - 1] / lambda2)
}

/// Reduced factor C (n x (n-1)) with C C^T = L, built from the positive
/// eigenpairs: C = V_+ diag(sqrt(lambda_+)).
pub fn reduced_factor(g: &Graph) -> DenseMatrix {
    let spec = sym_eig(&laplacian(g));
    let n = g.n();
    let mut c = DenseMatrix::zeros(n, n - 1);
    for k in 1..n {
        let root = spec.values[k].max(0.0).sqrt();
        for i in 0..n {
            c.set(i, k - 1, spec.vectors[k][i] * root);
        }
    }
    c
}

/// Whether (w, kappa) satisfies the spectral feasibility test
/// 1 <= lambda(C^T diag(w) C) <= kappa, with 1e-9 slack on both bounds.
pub fn lmi_feasible(g: &Graph, w: &NodeWeights, kappa: f64) -> bool {
    assert_eq!(w.len(), g.n());
    let c = reduced_factor(g);
    let m = c.gram_weighted(w.as_slice());
    let spec = sym_eig(&m);
    spec.values[0] >= 1.0 - 1e-9 && spec.values[spec.n() - 1] <= kappa + 1e-9
}
