//! Tensors of the Lagrangian graph built from first principles.
//!
//! `ℝ²ⁿ = ℝⁿ ⊕ ℝⁿ` carries the projections `π₁`, `π₂` onto the two factors
//! and the complex structure `J(x, y) = (−y, x)`, all as explicit `2n × 2n`
//! matrices. The graph of `∇u` has tangent vectors `eᵢ = (aᵢ, λᵢaᵢ)/√(1+λᵢ²)`
//! built from the eigen-frame of `D²u`. The constructions here are slow and
//! literal; they back the closed forms in [`crate::spectrum`] in tests and in
//! `lagflow verify`.
//!
//! The second fundamental form of the graph has coordinate components
//! `h_{ijk} = u_{ijk}` against the frames `∂ᵢF` and `J∂ₖF`, with induced
//! metric `g = I + (D²u)²`, so `|A|² = g^{ip} g^{jq} g^{kr} u_{ijk} u_{pqr}`.

use crate::field::{PotentialField, Sym3};
use crate::spectrum::{eigen_sym, SymMatrix, MAX_DIM};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

const FRAME_TOL: f64 = 1e-12;

/// `π₁`: projection onto the first ℝⁿ factor.
pub fn pi1(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j && i < n { 1.0 } else { 0.0 })
}

/// `π₂`: projection onto the second ℝⁿ factor.
pub fn pi2(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j && i >= n { 1.0 } else { 0.0 })
}

/// `J = [[0, −I], [I, 0]]`.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i < n && j == i + n {
            -1.0
        } else if i >= n && j + n == i {
            1.0
        } else {
            0.0
        }
    })
}

/// Orthonormal tangent frame of the graph of `∇u` at one point.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub n: usize,
    /// Columns `aᵢ`: orthonormal eigenvectors of `D²u`.
    pub a: DMatrix<f64>,
    pub lambdas: Vec<f64>,
    /// `2n × n`, columns `eᵢ`.
    pub e: DMatrix<f64>,
}

impl AdaptedFrame {
    pub fn from_hessian(m: &SymMatrix) -> Result<Self> {
        let eig = eigen_sym(m)?;
        let n = m.dim();
        let a = DMatrix::from_fn(n, n, |r, c| eig.vectors[c][r]);
        Ok(Self::from_parts(a, eig.values().to_vec()))
    }

    /// Frame from eigenvector columns and eigenvalues, unchecked.
    pub fn from_parts(a: DMatrix<f64>, lambdas: Vec<f64>) -> Self {
        let n = lambdas.len();
        let e = DMatrix::from_fn(2 * n, n, |r, c| {
            let s = 1.0 / (1.0 + lambdas[c] * lambdas[c]).sqrt();
            if r < n {
                a[(r, c)] * s
            } else {
                lambdas[c] * a[(r - n, c)] * s
            }
        });
        AdaptedFrame { n, a, lambdas, e }
    }

    /// Worst deviation of `eᵀe` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.e.transpose() * &self.e;
        (gram - DMatrix::identity(self.n, self.n)).amax()
    }

    /// Worst `|ω(eᵢ, eⱼ)| = |⟨J eᵢ, eⱼ⟩|`.
    pub fn lagrangian_error(&self) -> f64 {
        let je = complex_structure(self.n) * &self.e;
        (je.transpose() * &self.e).amax()
    }

    pub fn validate(&self) -> Result<()> {
        let o = self.orthonormality_error();
        if !(o <= FRAME_TOL) {
            return Err(Error::InvalidFrame(format!("frame not orthonormal ({o:e})")));
        }
        let l = self.lagrangian_error();
        if !(l <= FRAME_TOL) {
            return Err(Error::InvalidFrame(format!("frame not Lagrangian ({l:e})")));
        }
        Ok(())
    }
}

/// `S(eᵢ, eⱼ) = ⟨Jπ₁(eᵢ), π₂(eⱼ)⟩`.
pub fn s_from_first_principles(frame: &AdaptedFrame) -> Result<DMatrix<f64>> {
    frame.validate()?;
    let n = frame.n;
    let left = complex_structure(n) * pi1(n) * &frame.e;
    let right = pi2(n) * &frame.e;
    Ok(left.transpose() * right)
}

/// `P(eᵢ, eⱼ) = ⟨π₁eᵢ, π₁eⱼ⟩ − ⟨π₂eᵢ, π₂eⱼ⟩`.
pub fn p_from_first_principles(frame: &AdaptedFrame) -> Result<DMatrix<f64>> {
    frame.validate()?;
    let n = frame.n;
    let p1 = pi1(n) * &frame.e;
    let p2 = pi2(n) * &frame.e;
    Ok(p1.transpose() * &p1 - p2.transpose() * &p2)
}

/// Ordered pairs `(i, j)`, `i < j`, lexicographic.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Induced action on 2-vectors:
/// `S^[2]_{(ij)(kl)} = S_ik δ_jl + S_jl δ_ik − S_il δ_jk − S_jk δ_il`.
pub fn s2_matrix(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if n < 2 {
        return Err(Error::UndefinedForDimension(n));
    }
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let idx = pairs(n);
    Ok(DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
        let (i, j) = idx[r];
        let (k, l) = idx[c];
        s[(i, k)] * d(j, l) + s[(j, l)] * d(i, k) - s[(i, l)] * d(j, k) - s[(j, k)] * d(i, l)
    }))
}

/// Second fundamental form data at one point.
#[derive(Clone, Copy, Debug)]
pub struct SecondFundamental {
    pub h: Sym3,
    /// `g = I + (D²u)²`
    pub g: SymMatrix,
    pub g_inv: SymMatrix,
    pub norm_a2: f64,
    /// `H_k = g^{ij} u_{ijk}`
    pub mean_curv: [f64; MAX_DIM],
}

impl SecondFundamental {
    /// `|H|² = g^{kl} H_k H_l`.
    pub fn mean_curv_norm2(&self) -> f64 {
        let n = self.h.dim();
        let mut s = 0.0;
        for k in 0..n {
            for l in 0..n {
                s += self.g_inv.get(k, l) * self.mean_curv[k] * self.mean_curv[l];
            }
        }
        s
    }
}

/// `g⁻¹ = Q diag(1/(1+λ²)) Qᵀ`, from the eigen-frame of `D²u`.
pub fn inverse_metric(hess: &SymMatrix) -> Result<SymMatrix> {
    let eig = eigen_sym(hess)?;
    let n = hess.dim();
    let w: Vec<f64> = eig.values().iter().map(|l| 1.0 / (1.0 + l * l)).collect();
    Ok(SymMatrix::from_fn(n, |i, j| {
        (0..n).map(|k| w[k] * eig.vectors[k][i] * eig.vectors[k][j]).sum()
    }))
}

pub fn second_fundamental(hess: &SymMatrix, third: &Sym3) -> Result<SecondFundamental> {
    let n = hess.dim();
    assert_eq!(n, third.dim());
    let g = SymMatrix::identity(n).add(&hess.square());
    let gi = inverse_metric(hess)?;
    let mut full = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for (i, plane) in full.iter_mut().enumerate().take(n) {
        for (j, row) in plane.iter_mut().enumerate().take(n) {
            for (k, x) in row.iter_mut().enumerate().take(n) {
                *x = third.get(i, j, k);
            }
        }
    }
    // raise one index at a time
    let raise = |t: &[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM], slot: usize| {
        let mut out = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += match slot {
                            0 => gi.get(a, m) * t[m][b][c],
                            1 => gi.get(b, m) * t[a][m][c],
                            _ => gi.get(c, m) * t[a][b][m],
                        };
                    }
                    out[a][b][c] = s;
                }
            }
        }
        out
    };
    let raised = raise(&raise(&raise(&full, 0), 1), 2);
    let mut norm_a2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                norm_a2 += raised[i][j][k] * full[i][j][k];
            }
        }
    }
    let mut mean_curv = [0.0; MAX_DIM];
    for (k, hk) in mean_curv.iter_mut().enumerate().take(n) {
        for i in 0..n {
            for j in 0..n {
                *hk += gi.get(i, j) * full[i][j][k];
            }
        }
    }
    Ok(SecondFundamental {
        h: *third,
        g,
        g_inv: gi,
        norm_a2: norm_a2.max(0.0),
        mean_curv,
    })
}

/// `|A|²` of the immersion `F(x) = (x, G(x))` from its derivatives alone.
///
/// `dF[k]` are the tangent vectors `∂ₖF` and `ddF[i][j]` the second
/// derivatives `∂ᵢ∂ⱼF`, all in ℝ²ⁿ. The normal space is spanned by `J∂ₖF`;
/// `h_{ijk} = ⟨∂ᵢ∂ⱼF, J∂ₖF⟩` and the norm uses the metric `⟨∂ᵢF, ∂ⱼF⟩`.
pub fn immersion_a2_from_derivatives(df: &[DVector<f64>], ddf: &[Vec<DVector<f64>>]) -> f64 {
    let n = df.len();
    let j = complex_structure(n);
    let g = DMatrix::from_fn(n, n, |a, b| df[a].dot(&df[b]));
    let gi = g.try_inverse().expect("induced metric is positive definite");
    let normals: Vec<DVector<f64>> = df.iter().map(|t| &j * t).collect();
    let h = |a: usize, b: usize, c: usize| ddf[a][b].dot(&normals[c]);
    let mut total = 0.0;
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                let hijk = h(i, jj, k);
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            total += gi[(i, p)] * gi[(jj, q)] * gi[(k, r)] * hijk * h(p, q, r);
                        }
                    }
                }
            }
        }
    }
    total
}

/// Assembled `⟨∂ᵢ∂ⱼF, J∂ₖF⟩` as a dense `n×n×n` array, for symmetry checks.
pub fn immersion_h(df: &[DVector<f64>], ddf: &[Vec<DVector<f64>>]) -> Vec<Vec<Vec<f64>>> {
    let n = df.len();
    let j = complex_structure(n);
    let normals: Vec<DVector<f64>> = df.iter().map(|t| &j * t).collect();
    (0..n)
        .map(|a| (0..n).map(|b| (0..n).map(|c| ddf[a][b].dot(&normals[c])).collect()).collect())
        .collect()
}

/// Derivatives of `F = (x, grad(x))` by central differences with step `step`.
pub fn immersion_derivatives(
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    step: f64,
) -> (Vec<DVector<f64>>, Vec<Vec<DVector<f64>>>) {
    let n = x.len();
    let at = |offsets: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(d, s) in offsets {
            y[d] += s * step;
        }
        DVector::from_vec(grad(&y))
    };
    let lift = |k: Option<usize>, gpart: DVector<f64>| {
        DVector::from_fn(2 * n, |r, _| {
            if r < n {
                if Some(r) == k {
                    1.0
                } else {
                    0.0
                }
            } else {
                gpart[r - n]
            }
        })
    };
    let centre = at(&[]);
    let df: Vec<DVector<f64>> = (0..n)
        .map(|k| lift(Some(k), (at(&[(k, 1.0)]) - at(&[(k, -1.0)])) / (2.0 * step)))
        .collect();
    let ddf = (0..n)
        .map(|i| {
            (0..n)
                .map(|jj| {
                    let d = if i == jj {
                        (at(&[(i, 1.0)]) - &centre * 2.0 + at(&[(i, -1.0)])) / (step * step)
                    } else {
                        (at(&[(i, 1.0), (jj, 1.0)]) - at(&[(i, 1.0), (jj, -1.0)]) - at(&[(i, -1.0), (jj, 1.0)])
                            + at(&[(i, -1.0), (jj, -1.0)]))
                            / (4.0 * step * step)
                    };
                    lift(None, d)
                })
                .collect()
        })
        .collect();
    (df, ddf)
}

/// `|A|²` from an arbitrary smooth gradient map, independent of the grid.
pub fn immersion_a2(grad: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64], step: f64) -> f64 {
    let (df, ddf) = immersion_derivatives(grad, x, step);
    immersion_a2_from_derivatives(&df, &ddf)
}

/// Grid version of the immersion oracle at grid point `idx`.
///
/// `∇v` is formed by central differences of `v`; the tangent vectors
/// `∂ₖF = (eₖ, Aeₖ + ∂ₖ∇v)` and second derivatives `∂ᵢ∂ⱼF = (0, ∂ᵢ∂ⱼ∇v)`
/// are central differences of that gradient field. Agrees with
/// [`second_fundamental`] on grid data to `O(h²)`.
pub fn immersion_oracle_a2(field: &PotentialField, idx: usize) -> f64 {
    let (df, ddf) = grid_immersion_derivatives(field, idx);
    immersion_a2_from_derivatives(&df, &ddf)
}

pub fn grid_immersion_derivatives(field: &PotentialField, idx: usize) -> (Vec<DVector<f64>>, Vec<Vec<DVector<f64>>>) {
    let g = &field.grid;
    let n = g.dim();
    let h = g.spacing();
    let v = &field.v;
    let grad_v = |p: usize| -> DVector<f64> {
        DVector::from_fn(n, |d, _| (v[g.shift(p, d, true)] - v[g.shift(p, d, false)]) / (2.0 * h))
    };
    let lift = |top: DVector<f64>, bottom: DVector<f64>| {
        DVector::from_fn(2 * n, |r, _| if r < n { top[r] } else { bottom[r - n] })
    };
    let df = (0..n)
        .map(|k| {
            let dk = (grad_v(g.shift(idx, k, true)) - grad_v(g.shift(idx, k, false))) / (2.0 * h);
            let ak = DVector::from_fn(n, |r, _| field.a.get(r, k));
            lift(DVector::from_fn(n, |r, _| if r == k { 1.0 } else { 0.0 }), ak + dk)
        })
        .collect();
    let zero = DVector::zeros(n);
    let ddf = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = if i == j {
                        (grad_v(g.shift(idx, i, true)) - grad_v(idx) * 2.0 + grad_v(g.shift(idx, i, false))) / (h * h)
                    } else {
                        let ip = g.shift(idx, i, true);
                        let im = g.shift(idx, i, false);
                        (grad_v(g.shift(ip, j, true)) - grad_v(g.shift(ip, j, false)) - grad_v(g.shift(im, j, true))
                            + grad_v(g.shift(im, j, false)))
                            / (4.0 * h * h)
                    };
                    lift(zero.clone(), d)
                })
                .collect()
        })
        .collect();
    (df, ddf)
}

/// `max_k |∂ₖθ − g^{ij} u_{ijk}|` at grid point `idx`, with `∂ₖθ` from
/// central differences of the pointwise angle.
pub fn theta_gradient_vs_meancurv(field: &PotentialField, idx: usize) -> Result<f64> {
    let g = &field.grid;
    let n = g.dim();
    let h = g.spacing();
    let ph = crate::field::periodic_hessian(g, &field.v);
    let theta_at = |p: usize| -> f64 {
        let m = field.a.add(&ph[p]);
        crate::spectrum::lagrangian_angle(&crate::spectrum::eigenvalues_sym(&m)[..n])
    };
    let third = {
        let mut t = Sym3::zeros(n);
        for k in 0..n {
            let hp = &ph[g.shift(idx, k, true)];
            let hm = &ph[g.shift(idx, k, false)];
            for i in 0..=k {
                for j in i..=k {
                    t.set(i, j, k, (hp.get(i, j) - hm.get(i, j)) / (2.0 * h));
                }
            }
        }
        t
    };
    let sf = second_fundamental(&field.a.add(&ph[idx]), &third)?;
    let mut worst = 0.0f64;
    for k in 0..n {
        let dtheta = (theta_at(g.shift(idx, k, true)) - theta_at(g.shift(idx, k, false))) / (2.0 * h);
        worst = worst.max((dtheta - sf.mean_curv[k]).abs());
    }
    Ok(worst)
}
