//! Small dense matrices and the Laplacian constructions used throughout.
//!
//! Everything here is sized for graphs of a few dozen nodes at most, so the
//! storage is plain row-major `Vec<f64>` and the products are the naive
//! triple loops. Keeping this hand-rolled (instead of pulling in a linear
//! algebra crate) keeps the oracle eigensolver and the message-passing
//! estimators free of any shared numerical kernel they could both inherit a
//! bug from.

use crate::graph::{EdgeWeights, Graph, NodeWeights};

/// Row-major rectangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            a: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// self^T * x.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.a[i * self.cols..(i + 1) * self.cols];
            for (yj, aij) in y.iter_mut().zip(row) {
                *yj += aij * x[i];
            }
        }
        y
    }

    pub fn mul(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, rhs.rows);
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.a[i * out.cols + j] += aik * rhs.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// self^T * diag(d) * self, which is symmetric by construction.
    pub fn gram_weighted(&self, d: &[f64]) -> DenseSymMatrix {
        assert_eq!(d.len(), self.rows);
        let n = self.cols;
        let mut m = DenseSymMatrix::zeros(n);
        for r in 0..self.rows {
            let row = &self.a[r * n..(r + 1) * n];
            for i in 0..n {
                if row[i] == 0.0 {
                    continue;
                }
                let s = d[r] * row[i];
                for j in i..n {
                    let v = m.get(i, j) + s * row[j];
                    m.set_sym(i, j, v);
                }
            }
        }
        m
    }
}

/// Symmetric matrix; `set_sym` writes both triangles so the invariant holds
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseSymMatrix {
            n,
            a: vec![0.0; n * n],
        }
    }

    /// Wraps a square matrix, checking symmetry to 1e-12 relative to the
    /// largest entry.
    pub fn from_dense(m: &DenseMatrix) -> Option<Self> {
        if m.rows() != m.cols() {
            return None;
        }
        let n = m.rows();
        let scale = m.a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (m.get(i, j) - m.get(j, i)).abs() > 1e-12 * scale {
                    return None;
                }
            }
        }
        Some(DenseSymMatrix { n, a: m.a.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.a[i * self.n..(i + 1) * self.n].iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.n,
            cols: self.n,
            a: self.a.clone(),
        }
    }
}

/// Combinatorial Laplacian L = D - A.
pub fn laplacian(g: &Graph) -> DenseSymMatrix {
    let n = g.n();
    let mut l = DenseSymMatrix::zeros(n);
    for i in 0..n {
        l.set_sym(i, i, g.degree(i) as f64);
    }
    for &(i, j) in g.edges() {
        l.set_sym(i, j, -1.0);
    }
    l
}

/// Node-weighted Laplacian diag(w) * L. Not symmetric in general, but
/// similar to the symmetric form below, so it shares its real spectrum.
pub fn node_weighted_laplacian(g: &Graph, w: &NodeWeights) -> DenseMatrix {
    assert_eq!(w.len(), g.n());
    let l = laplacian(g);
    let n = g.n();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, w.as_slice()[i] * l.get(i, j));
        }
    }
    m
}

/// Symmetric node-weighted Laplacian diag(w)^{1/2} L diag(w)^{1/2}.
pub fn symmetric_weighted_laplacian(g: &Graph, w: &NodeWeights) -> DenseSymMatrix {
    assert_eq!(w.len(), g.n());
    let sqrt: Vec<f64> = w.as_slice().iter().map(|v| v.sqrt()).collect();
    let l = laplacian(g);
    let n = g.n();
    let mut m = DenseSymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set_sym(i, j, sqrt[i] * l.get(i, j) * sqrt[j]);
        }
    }
    m
}

/// Oriented incidence matrix B (|edges| x n): the row for edge (i, j) with
/// i < j carries +1 at column i and -1 at column j, so B^T B = L.
pub fn incidence(g: &Graph) -> DenseMatrix {
    let mut b = DenseMatrix::zeros(g.edges().len(), g.n());
    for (r, &(i, j)) in g.edges().iter().enumerate() {
        b.set(r, i, 1.0);
        b.set(r, j, -1.0);
    }
    b
}

/// Edge-weighted Laplacian B^T diag(w_e) B.
pub fn edge_weighted_laplacian(g: &Graph, w: &EdgeWeights) -> DenseSymMatrix {
    assert_eq!(w.len(), g.edges().len());
    incidence(g).gram_weighted(w.as_slice())
}
