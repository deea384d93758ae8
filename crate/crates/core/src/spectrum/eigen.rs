//! Small dense symmetric matrices and their eigen-decomposition.
//!
//! Dimensions are bounded by [`MAX_DIM`], so everything lives on the stack.
//! `n = 2` uses a closed form; larger sizes use cyclic Jacobi rotations in a
//! fixed `(p, q)` order, which keeps the output bit-reproducible.

use crate::{Error, Result};

pub const MAX_DIM: usize = 4;

const JACOBI_OFF_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 50;

/// Real symmetric `n × n` matrix, `1 ≤ n ≤ 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    e: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "dimension {n} out of range");
        SymMatrix {
            n,
            e: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.e[i][i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.e[i][i] = x;
        }
        m
    }

    /// Builds a matrix from the upper triangle of `f`; the lower triangle is
    /// mirrored so symmetry holds exactly.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let x = f(i, j);
                m.e[i][j] = x;
                m.e[j][i] = x;
            }
        }
        m
    }

    /// Checked construction from a row-major `n²` slice.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidMatrix(format!("dimension {n} not in 1..=4")));
        }
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let x = data[i * n + j];
                if !x.is_finite() {
                    return Err(Error::InvalidMatrix(format!("entry ({i},{j}) = {x}")));
                }
                if data[j * n + i] != x {
                    return Err(Error::InvalidMatrix(format!("not symmetric at ({i},{j})")));
                }
                m.e[i][j] = x;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[i][j]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        self.e[i][j] = x;
        self.e[j][i] = x;
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            out.extend_from_slice(&self.e[i][..self.n]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.e[i][j].is_finite()))
    }

    /// Largest absolute entry.
    pub fn sup_norm(&self) -> f64 {
        let mut s = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                s = s.max(self.e[i][j].abs());
            }
        }
        s
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        SymMatrix::from_fn(self.n, |i, j| self.e[i][j] + other.e[i][j])
    }

    /// `self²`, symmetric by construction.
    pub fn square(&self) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| self.e[i][k] * self.e[k][j]).sum())
    }

    /// Components in a new orthonormal basis: `M'_{ab} = Σ q[a][i] M_{ij} q[b][j]`,
    /// where `q[a]` is the `a`-th basis vector.
    pub fn conjugate(&self, q: &[[f64; MAX_DIM]; MAX_DIM]) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |a, b| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += q[a][i] * self.e[i][j] * q[b][j];
                }
            }
            s
        })
    }
}

/// Eigen-decomposition `M = Q Λ Qᵀ` with eigenvalues ascending.
///
/// `vectors[k]` is the unit eigenvector for `values[k]`; its first nonzero
/// component is positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    pub n: usize,
    pub values: [f64; MAX_DIM],
    pub vectors: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymEigen {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    /// Rebuilds `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.n;
        SymMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| self.values[k] * self.vectors[k][i] * self.vectors[k][j])
                .sum()
        })
    }
}

/// Full eigen-decomposition with the deterministic sign and ordering rules.
pub fn eigen_sym(m: &SymMatrix) -> Result<SymEigen> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    let (values, vectors) = if m.n == 2 {
        closed_form_2x2(m)
    } else {
        jacobi::<true>(m)
    };
    Ok(sort_and_fix_signs(m.n, values, vectors))
}

/// Eigenvalues only, ascending. Identical to `eigen_sym(m)?.values`.
#[inline]
pub fn eigenvalues_sym(m: &SymMatrix) -> [f64; MAX_DIM] {
    let mut vals = match m.n {
        1 => [m.e[0][0], 0.0, 0.0, 0.0],
        2 => closed_form_2x2(m).0,
        _ => jacobi::<false>(m).0,
    };
    vals[..m.n].sort_by(|a, b| a.total_cmp(b));
    vals
}

type Decomp = ([f64; MAX_DIM], [[f64; MAX_DIM]; MAX_DIM]);

fn identity_cols() -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut q = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    q
}

/// Closed form for `[[a, b], [b, c]]`. The smaller-magnitude eigenvalue is
/// recovered from the determinant to avoid cancellation.
#[inline]
fn closed_form_2x2(m: &SymMatrix) -> Decomp {
    let (a, b, c) = (m.e[0][0], m.e[0][1], m.e[1][1]);
    let mut vecs = identity_cols();
    if b == 0.0 {
        return ([a, c, 0.0, 0.0], vecs);
    }
    let half_diff = 0.5 * (a - c);
    let r = half_diff.hypot(b);
    let mean = 0.5 * a + 0.5 * c;
    let det = a.mul_add(c, -b * b);
    let (lo, hi) = if mean >= 0.0 {
        let hi = mean + r;
        (det / hi, hi)
    } else {
        let lo = mean - r;
        (lo, det / lo)
    };
    let phi = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = phi.sin_cos();
    // column 0 pairs with `lo`, column 1 with `hi`
    vecs[0] = [-s, co, 0.0, 0.0];
    vecs[1] = [co, s, 0.0, 0.0];
    ([lo, hi, 0.0, 0.0], vecs)
}

/// Cyclic Jacobi; `VECTORS` toggles accumulation of the rotations. The
/// diagonal updates do not depend on the accumulated vectors, so both
/// variants produce bit-identical eigenvalues.
#[inline]
fn jacobi<const VECTORS: bool>(m: &SymMatrix) -> Decomp {
    let n = m.n;
    let mut a = m.e;
    let mut v = identity_cols();
    let scale: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m.e[i][j] * m.e[i][j])
        .sum::<f64>()
        .sqrt();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off.sqrt() <= JACOBI_OFF_TOL * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + theta.mul_add(theta, 1.0).sqrt())
                    };
                    let c = 1.0 / t.mul_add(t, 1.0).sqrt();
                    let s = t * c;
                    for row in a.iter_mut().take(n) {
                        let (akp, akq) = (row[p], row[q]);
                        row[p] = c * akp - s * akq;
                        row[q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    a[p][q] = 0.0;
                    a[q][p] = 0.0;
                    if VECTORS {
                        // v holds columns: v[col][row]
                        for k in 0..n {
                            let (vkp, vkq) = (v[p][k], v[q][k]);
                            v[p][k] = c * vkp - s * vkq;
                            v[q][k] = s * vkp + c * vkq;
                        }
                    }
                }
            }
        }
    }
    let mut vals = [0.0; MAX_DIM];
    for i in 0..n {
        vals[i] = a[i][i];
    }
    (vals, v)
}

fn sort_and_fix_signs(n: usize, values: [f64; MAX_DIM], vectors: [[f64; MAX_DIM]; MAX_DIM]) -> SymEigen {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = SymEigen {
        n,
        values: [0.0; MAX_DIM],
        vectors: [[0.0; MAX_DIM]; MAX_DIM],
    };
    for (dst, &src) in order.iter().enumerate() {
        out.values[dst] = values[src];
        let mut col = vectors[src];
        if let Some(first) = col[..n].iter().copied().find(|x| *x != 0.0) {
            if first < 0.0 {
                for x in col[..n].iter_mut() {
                    *x = -*x;
                }
            }
        }
        for x in col[..n].iter_mut() {
            if *x == 0.0 {
                *x = 0.0; // normalize -0.0
            }
        }
        out.vectors[dst] = col;
    }
    out
}
