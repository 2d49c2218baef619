//! Multivariate polynomial bookkeeping.
//!
//! Multi-indices are enumerated in graded reverse lexicographic order. The
//! basis functions are tensor products of univariate orthogonal polynomials
//! (Legendre on a box, probabilists' Hermite for unbounded axes), and
//! [`VandermondeQR`] keeps an orthogonal factorization of the transposed
//! Vandermonde matrix so that determinant ratios for candidate nodes cost
//! O(N) each.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::Interval;
use crate::error::{Error, Result};

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        assert!(
            !exponents.is_empty(),
            "multi-index needs at least one coordinate"
        );
        MultiIndex(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Graded reverse lexicographic order: total degree first, then the first
/// differing exponent scanning from the last coordinate; smaller precedes.
pub fn grevlex_cmp(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    a.total_degree().cmp(&b.total_degree()).then_with(|| {
        for (x, y) in a.0.iter().rev().zip(b.0.iter().rev()) {
            if x != y {
                return x.cmp(y);
            }
        }
        Ordering::Equal
    })
}

/// Ordered, duplicate-free list of multi-indices in a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    dim: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn max_degree(&self) -> u32 {
        self.indices
            .iter()
            .map(MultiIndex::total_degree)
            .max()
            .unwrap_or(0)
    }
}

fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if parts == 1 {
        prefix.push(total);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in 0..=total {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// First `count` multi-indices of dimension `d` in graded reverse
/// lexicographic order.
pub fn enumerate_basis(d: usize, count: usize) -> MultiIndexSet {
    assert!(
        d >= 1 && count >= 1,
        "enumerate_basis needs d >= 1 and count >= 1"
    );
    let mut indices = Vec::with_capacity(count);
    let mut degree = 0u32;
    while indices.len() < count {
        let mut block = Vec::new();
        compositions(degree, d, &mut Vec::with_capacity(d), &mut block);
        block.sort_by(grevlex_cmp);
        let take = (count - indices.len()).min(block.len());
        indices.extend(block.into_iter().take(take));
        degree += 1;
    }
    MultiIndexSet { dim: d, indices }
}

/// Univariate polynomial family for one axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family1d {
    /// Legendre polynomials affinely mapped from [-1, 1] onto [lo, hi].
    Legendre { lo: f64, hi: f64 },
    /// Probabilists' Hermite polynomials in (x - mean) / std.
    Hermite { mean: f64, std: f64 },
    /// Plain powers of (x - center) / scale.
    Monomial { center: f64, scale: f64 },
}

impl Family1d {
    /// Legendre on bounded intervals, Hermite on unbounded ones.
    pub fn for_interval(iv: Interval, center: f64, scale: f64) -> Self {
        if iv.is_bounded() {
            Family1d::Legendre {
                lo: iv.lo,
                hi: iv.hi,
            }
        } else {
            Family1d::Hermite {
                mean: center,
                std: scale,
            }
        }
    }

    /// Writes p_0(x) .. p_m(x) into `out[..=m]`.
    pub fn eval_upto(&self, x: f64, m: usize, out: &mut [f64]) {
        out[0] = 1.0;
        if m == 0 {
            return;
        }
        match *self {
            Family1d::Legendre { lo, hi } => {
                let t = (2.0 * x - lo - hi) / (hi - lo);
                out[1] = t;
                for k in 1..m {
                    let kf = k as f64;
                    out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
                }
            }
            Family1d::Hermite { mean, std } => {
                let t = (x - mean) / std;
                out[1] = t;
                for k in 1..m {
                    out[k + 1] = t * out[k] - k as f64 * out[k - 1];
                }
            }
            Family1d::Monomial { center, scale } => {
                let t = (x - center) / scale;
                for k in 1..=m {
                    out[k] = out[k - 1] * t;
                }
            }
        }
    }
}

/// Tensor-product basis over a multi-index set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    indices: MultiIndexSet,
    families: Vec<Family1d>,
}

impl Basis {
    /// Basis of the first `count` grevlex multi-indices.
    pub fn new(families: Vec<Family1d>, count: usize) -> Self {
        let indices = enumerate_basis(families.len(), count);
        Basis { indices, families }
    }

    pub fn from_indices(families: Vec<Family1d>, indices: MultiIndexSet) -> Self {
        assert_eq!(families.len(), indices.dim());
        Basis { indices, families }
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.indices
    }

    pub fn families(&self) -> &[Family1d] {
        &self.families
    }

    /// Same families, `count` indices.
    pub fn resized(&self, count: usize) -> Self {
        Basis::new(self.families.clone(), count)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out, &mut Vec::new());
        out
    }

    /// Evaluates every basis function at `x` into `out`; `table` is scratch.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64], table: &mut Vec<f64>) {
        let d = self.dim();
        let m = self.indices.max_degree() as usize;
        let stride = m + 1;
        table.clear();
        table.resize(d * stride, 0.0);
        for (k, fam) in self.families.iter().enumerate() {
            fam.eval_upto(x[k], m, &mut table[k * stride..(k + 1) * stride]);
        }
        for (o, alpha) in out.iter_mut().zip(self.indices.indices()) {
            *o = alpha
                .exponents()
                .iter()
                .enumerate()
                .map(|(k, &e)| table[k * stride + e as usize])
                .product();
        }
    }
}

/// (phi_0(x), ..., phi_N(x)) for the given basis.
pub fn eval_basis(basis: &Basis, x: &[f64]) -> Vec<f64> {
    basis.eval(x)
}

/// Dense Vandermonde matrix `V[i][j] = phi_j(x_i)`.
pub fn assemble_vandermonde(basis: &Basis, nodes: &[Vec<f64>]) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(nodes.len(), basis.len());
    for (i, x) in nodes.iter().enumerate() {
        for (j, p) in basis.eval(x).into_iter().enumerate() {
            v[(i, j)] = p;
        }
    }
    v
}

/// Relative tolerance below which an appended column counts as dependent.
const SINGULAR_TOL: f64 = 1e-14;

/// Pushes between reconstruction audits.
const AUDIT_EVERY: usize = 16;

/// Orthogonal factorization of the extended Vandermonde matrix.
///
/// With `n` nodes the state factors the `(n+1) x n` matrix `M` whose column
/// `j` holds `phi_0..phi_n` at node `j` (the transpose of the Vandermonde
/// matrix with one extra basis row). `Q` is a full `(n+1) x (n+1)`
/// orthogonal matrix, `R` is `(n+1) x n` upper triangular with a zero last
/// row, and the last column of `Q` spans the orthogonal complement of
/// `M`'s range. Adding a candidate column `a` then gives
/// `|det [M a]| = prod |R_ii| * |q_perp . a|`.
#[derive(Clone, Debug)]
pub struct VandermondeQR {
    families: Vec<Family1d>,
    /// `n + 1` basis functions.
    basis: Basis,
    nodes: Vec<Vec<f64>>,
    /// Columns of Q, each of length `n + 1`.
    q: Vec<Vec<f64>>,
    /// Columns of R; column `j` stores rows `0..=j`.
    r: Vec<Vec<f64>>,
    log_det_r: f64,
    log_det_v: f64,
    pushes_since_audit: usize,
}

impl VandermondeQR {
    /// Empty factorization over the given axis families.
    pub fn new(families: Vec<Family1d>) -> Self {
        let basis = Basis::new(families.clone(), 1);
        VandermondeQR {
            families,
            basis,
            nodes: Vec::new(),
            q: vec![vec![1.0]],
            r: Vec::new(),
            log_det_r: 0.0,
            log_det_v: 0.0,
            pushes_since_audit: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn families(&self) -> &[Family1d] {
        &self.families
    }

    /// Basis with `len() + 1` functions (one ahead of the node count).
    pub fn extended_basis(&self) -> &Basis {
        &self.basis
    }

    /// Basis of the square Vandermonde matrix, `len()` functions.
    pub fn square_basis(&self) -> Basis {
        self.basis.resized(self.len().max(1))
    }

    /// log |det V(x_0, ..., x_{n-1})| of the square matrix (0 when empty).
    pub fn log_abs_det(&self) -> f64 {
        self.log_det_v
    }

    fn q_perp(&self) -> &[f64] {
        &self.q[self.len()]
    }

    /// log |det V(x_0, ..., x_{n-1}, x)|; `-inf` when x adds a dependent
    /// column. Does not modify the state.
    pub fn candidate_logdet(&self, x: &[f64]) -> f64 {
        let mut a = vec![0.0; self.basis.len()];
        self.candidate_logdet_with(x, &mut a, &mut Vec::new())
    }

    /// Allocation-free variant of [`candidate_logdet`](Self::candidate_logdet).
    pub fn candidate_logdet_with(&self, x: &[f64], a: &mut [f64], table: &mut Vec<f64>) -> f64 {
        self.basis.eval_into(x, a, table);
        let qp = self.q_perp();
        let mut dot = 0.0;
        let mut norm2 = 0.0;
        for (ai, qi) in a.iter().zip(qp) {
            dot += ai * qi;
            norm2 += ai * ai;
        }
        if !dot.is_finite() || dot.abs() <= SINGULAR_TOL * norm2.sqrt() {
            return f64::NEG_INFINITY;
        }
        self.log_det_r + dot.abs().ln()
    }

    /// Returns the factorization with `x` appended.
    pub fn appended(&self, x: &[f64]) -> Result<Self> {
        let mut next = self.clone();
        next.push(x)?;
        Ok(next)
    }

    /// Appends node `x` and grows the basis by one function.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        assert_eq!(x.len(), self.dim(), "node dimension mismatch");
        let n = self.len();
        let a = self.basis.eval(x);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        // New column of R: Q^T a. Its last entry is q_perp . a.
        let col: Vec<f64> = self
            .q
            .iter()
            .map(|qc| qc.iter().zip(&a).map(|(p, q)| p * q).sum())
            .collect();
        let diag = col[n];
        if !diag.is_finite() || diag.abs() <= SINGULAR_TOL * norm {
            return Err(Error::SingularMatrix(format!(
                "node {x:?} is dependent on the {n} existing nodes"
            )));
        }
        self.log_det_v = self.log_det_r + diag.abs().ln();
        self.r.push(col);
        self.nodes.push(x.to_vec());

        // Extend the basis by one row phi_{n+1} evaluated at every node.
        self.basis = self.basis.resized(n + 2);
        let mut table = Vec::new();
        let mut buf = vec![0.0; n + 2];
        let mut row: Vec<f64> = self
            .nodes
            .iter()
            .map(|xj| {
                self.basis.eval_into(xj, &mut buf, &mut table);
                buf[n + 1]
            })
            .collect();
        for qc in self.q.iter_mut() {
            qc.push(0.0);
        }
        let mut e = vec![0.0; n + 2];
        e[n + 1] = 1.0;
        self.q.push(e);

        // Givens rotations zero the appended row against R's diagonal.
        for i in 0..=n {
            let (rii, ri) = (self.r[i][i], row[i]);
            if ri == 0.0 {
                continue;
            }
            let h = rii.hypot(ri);
            let (c, s) = (rii / h, ri / h);
            for j in i..=n {
                let (top, bot) = (self.r[j][i], row[j]);
                self.r[j][i] = c * top + s * bot;
                row[j] = -s * top + c * bot;
            }
            row[i] = 0.0;
            let (left, right) = self.q.split_at_mut(n + 1);
            let (qi, ql) = (&mut left[i], &mut right[0]);
            for (u, v) in qi.iter_mut().zip(ql.iter_mut()) {
                let (a0, b0) = (*u, *v);
                *u = c * a0 + s * b0;
                *v = -s * a0 + c * b0;
            }
        }
        self.log_det_r = (0..=n).map(|i| self.r[i][i].abs().ln()).sum();

        self.pushes_since_audit += 1;
        if self.pushes_since_audit >= AUDIT_EVERY {
            self.pushes_since_audit = 0;
            if self.reconstruction_error() > 1e-8 || self.orthogonality_error() > 1e-8 {
                self.refactor();
            }
        }
        Ok(())
    }

    /// The `(n+1) x n` matrix being factored.
    pub fn extended_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n + 1, n);
        for (j, x) in self.nodes.iter().enumerate() {
            for (i, v) in self.basis.eval(x).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    fn q_matrix(&self) -> DMatrix<f64> {
        let k = self.q.len();
        DMatrix::from_fn(k, k, |i, j| self.q[j][i])
    }

    fn r_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n + 1, n, |i, j| if i <= j { self.r[j][i] } else { 0.0 })
    }

    /// ||Q R - M||_F / ||M||_F.
    pub fn reconstruction_error(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let m = self.extended_matrix();
        let diff = self.q_matrix() * self.r_matrix() - &m;
        diff.norm() / m.norm()
    }

    /// max |Q^T Q - I|.
    pub fn orthogonality_error(&self) -> f64 {
        let q = self.q_matrix();
        let g = q.transpose() * &q - DMatrix::identity(q.nrows(), q.ncols());
        g.amax()
    }

    /// Recomputes the factorization from scratch with Householder QR.
    pub fn refactor(&mut self) {
        let n = self.len();
        if n == 0 {
            return;
        }
        let m = self.extended_matrix();
        let qr = m.clone().qr();
        let q_thin = qr.q();
        let r = qr.r();
        // Complete Q with the unit vector orthogonal to its columns.
        let mut best: Option<(f64, Vec<f64>)> = None;
        for k in 0..=n {
            let mut v = vec![0.0; n + 1];
            v[k] = 1.0;
            for _ in 0..2 {
                for j in 0..n {
                    let dot: f64 = (0..=n).map(|i| q_thin[(i, j)] * v[i]).sum();
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi -= dot * q_thin[(i, j)];
                    }
                }
            }
            let nrm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, v.iter().map(|t| t / nrm).collect()));
            }
        }
        let perp = best.map(|(_, v)| v).unwrap_or_default();
        self.q = (0..n)
            .map(|j| (0..=n).map(|i| q_thin[(i, j)]).collect())
            .chain(std::iter::once(perp))
            .collect();
        self.r = (0..n)
            .map(|j| (0..=j).map(|i| r[(i, j)]).collect())
            .collect();
        self.log_det_r = (0..n).map(|i| self.r[i][i].abs().ln()).sum();
    }
}

/// Dense log |det| via LU, used as an independent reference.
pub fn dense_log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].abs().ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre(d: usize) -> Vec<Family1d> {
        vec![Family1d::Legendre { lo: -1.0, hi: 1.0 }; d]
    }

    fn brute_force_order(d: usize, max_deg: u32) -> Vec<MultiIndex> {
        let mut all = Vec::new();
        let mut idx = vec![0u32; d];
        loop {
            if idx.iter().sum::<u32>() <= max_deg {
                all.push(MultiIndex(idx.clone()));
            }
            let mut k = 0;
            loop {
                if k == d {
                    return sort_by_pairwise(all);
                }
                idx[k] += 1;
                if idx[k] <= max_deg {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    // Insertion sort with an explicit comparator written from the
    // definition, independent of `grevlex_cmp`.
    fn sort_by_pairwise(mut v: Vec<MultiIndex>) -> Vec<MultiIndex> {
        fn precedes(a: &MultiIndex, b: &MultiIndex) -> bool {
            let (da, db) = (a.total_degree(), b.total_degree());
            if da != db {
                return da < db;
            }
            let d = a.dim();
            let mut k = d;
            while k > 0 {
                k -= 1;
                if a.0[k] != b.0[k] {
                    return a.0[k] < b.0[k];
                }
            }
            false
        }
        for i in 1..v.len() {
            let mut j = i;
            while j > 0 && precedes(&v[j], &v[j - 1]) {
                v.swap(j, j - 1);
                j -= 1;
            }
        }
        v
    }

    #[test]
    fn enumerate_small_cases() {
        let e = enumerate_basis(1, 4);
        let got: Vec<Vec<u32>> = e.indices().iter().map(|m| m.0.clone()).collect();
        assert_eq!(got, vec![vec![0], vec![1], vec![2], vec![3]]);

        let e = enumerate_basis(2, 6);
        let got: Vec<Vec<u32>> = e.indices().iter().map(|m| m.0.clone()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );

        let e = enumerate_basis(3, 1);
        assert_eq!(e.indices()[0].0, vec![0, 0, 0]);
    }

    #[test]
    fn enumerate_matches_brute_force() {
        for d in 1..=4 {
            let reference = brute_force_order(d, 4);
            let e = enumerate_basis(d, reference.len());
            assert_eq!(e.indices(), &reference[..], "d = {d}");
        }
    }

    #[test]
    fn basis_values() {
        let b = Basis::new(legendre(1), 1);
        assert_eq!(b.eval(&[0.3]), vec![1.0]);
        let b = Basis::new(legendre(1), 2);
        assert_eq!(b.eval(&[0.5]), vec![1.0, 0.5]);
        // P_2(1) = 1; check against the closed form (3x^2 - 1) / 2 too.
        let b = Basis::new(legendre(1), 3);
        let v = b.eval(&[1.0]);
        assert_eq!(v[2], 1.0);
        let v = b.eval(&[0.3]);
        assert!((v[2] - (3.0 * 0.09 - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_legendre_and_hermite() {
        let f = Family1d::Legendre { lo: 0.0, hi: 0.1 };
        let mut out = [0.0; 3];
        f.eval_upto(0.1, 2, &mut out);
        assert_eq!(out, [1.0, 1.0, 1.0]);
        let h = Family1d::Hermite {
            mean: 1.0,
            std: 2.0,
        };
        h.eval_upto(5.0, 2, &mut out);
        // He_2(t) = t^2 - 1 with t = 2.
        assert_eq!(out, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn first_node_has_unit_determinant() {
        let qr = VandermondeQR::new(legendre(2));
        assert_eq!(qr.candidate_logdet(&[0.3, -0.7]), 0.0);
        let qr = qr.appended(&[0.3, -0.7]).unwrap();
        assert_eq!(qr.log_abs_det(), 0.0);
    }

    #[test]
    fn two_nodes_match_dense_determinant() {
        let qr = VandermondeQR::new(legendre(1)).appended(&[-0.4]).unwrap();
        let ld = qr.candidate_logdet(&[0.7]);
        // det [[1, -0.4], [1, 0.7]] = 1.1
        assert!((ld - 1.1f64.ln()).abs() < 1e-14);
        let qr2 = qr.appended(&[0.7]).unwrap();
        assert!((qr2.log_abs_det() - ld).abs() < 1e-14);
    }

    #[test]
    fn duplicate_node_is_singular() {
        let qr = VandermondeQR::new(legendre(2))
            .appended(&[0.1, 0.2])
            .unwrap()
            .appended(&[0.5, -0.3])
            .unwrap();
        assert_eq!(qr.candidate_logdet(&[0.5, -0.3]), f64::NEG_INFINITY);
        assert!(matches!(
            qr.appended(&[0.1, 0.2]),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn centered_candidate_beats_off_center() {
        let qr = VandermondeQR::new(legendre(1))
            .appended(&[-1.0])
            .unwrap()
            .appended(&[1.0])
            .unwrap();
        assert!(qr.candidate_logdet(&[0.0]) > qr.candidate_logdet(&[0.5]));
        // Dense 3x3 oracle: |det| with monomials is |(x+1)(x-1)| * 2.
        let basis = Basis::new(
            vec![Family1d::Monomial {
                center: 0.0,
                scale: 1.0,
            }],
            3,
        );
        for x in [0.0, 0.5] {
            let v = assemble_vandermonde(&basis, &[vec![-1.0], vec![1.0], vec![x]]);
            let dense = dense_log_abs_det(&v);
            // Legendre differs from monomials by the factor 3/2 on P_2.
            let ours = qr.candidate_logdet(&[x]);
            assert!((ours - dense - 1.5f64.ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn factorization_stays_accurate() {
        let mut qr = VandermondeQR::new(legendre(2));
        for k in 1..=40u64 {
            let x = crate::domain::halton(k, 2);
            qr.push(&[2.0 * x[0] - 1.0, 2.0 * x[1] - 1.0]).unwrap();
        }
        assert!(qr.reconstruction_error() < 1e-10);
        assert!(qr.orthogonality_error() < 1e-10);
        let v = assemble_vandermonde(&qr.square_basis(), qr.nodes());
        let dense = dense_log_abs_det(&v);
        assert!((qr.log_abs_det() - dense).abs() <= 1e-8 * dense.abs().max(1.0));
    }

    #[test]
    fn refactor_preserves_determinants() {
        let mut qr = VandermondeQR::new(legendre(3));
        for k in 1..=20u64 {
            let x = crate::domain::halton(k, 3);
            qr.push(&x).unwrap();
        }
        let probe = [0.31, 0.77, 0.12];
        let before = qr.candidate_logdet(&probe);
        qr.refactor();
        assert!((qr.candidate_logdet(&probe) - before).abs() < 1e-10);
    }
}
