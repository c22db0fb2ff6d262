//! Hill representations `map(V) = Σ_kl H_lk A_k V A_l*` built from a maximal
//! independent set of blocks of the matricization.
//!
//! The stored `H` follows the block-expansion formula
//! `H_kl = Σ_ij β^k_ij conj((L_l)_ij)`, for which `L = Σ_kl H_kl conj(A_k) ⊗ A_l`
//! and `Λ = Â* Hᵀ Â`. Row `k` of `Â` is `vec(conj(A_k))ᵀ`.

use thiserror::Error;

use crate::linalg::{self, conj, max_abs, pinv, re, CMat, CVec, Field};
use crate::mapmodel::MapSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HillError {
    #[error("block ({i},{j}) lies outside the span of the selected blocks (residual {residual:.3e})")]
    SpanViolation { i: usize, j: usize, residual: f64 },
    #[error("greedy selection found {selected} blocks but the Choi matrix has numeric rank {rank}")]
    RankMismatch { selected: usize, rank: usize },
    #[error("kernel of the supplied matrix differs from the kernel of the Choi matrix: {0}")]
    KernelMismatch(String),
    #[error("representations are not equivalent (residual {residual:.3e})")]
    NotEquivalent { residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

/// Positions `(i, j)` (0-based) of the selected blocks, in selection order.
pub type Selection = Vec<(usize, usize)>;

/// Block positions in row-major order.
pub fn row_major_order(n: usize, q: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..q).map(move |j| (i, j))).collect()
}

/// Greedy selection over row-major block order.
pub fn select_independent_blocks(spec: &MapSpec, tol: f64) -> Result<Selection, HillError> {
    select_in_order(spec, &row_major_order(spec.n(), spec.q()), tol)
}

/// Greedy selection of linearly independent blocks visiting positions in the
/// given order. Independence uses modified Gram-Schmidt with two passes and a
/// cutoff of `tol` relative to the largest block norm.
pub fn select_in_order(spec: &MapSpec, order: &[(usize, usize)], tol: f64) -> Result<Selection, HillError> {
    let (n, q) = (spec.n(), spec.q());
    let choi = spec.choi();
    let scale = (0..n * q).map(|p| linalg::norm2(&choi.column(p).into_owned())).fold(0.0, f64::max);
    let mut basis: Vec<CVec> = Vec::new();
    let mut sel = Vec::new();
    if scale == 0.0 {
        return Ok(sel);
    }
    for &(i, j) in order {
        let mut v: CVec = choi.column(j * n + i).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let r = linalg::norm2(&v);
        if r > tol * scale {
            basis.push(v / re(r));
            sel.push((i, j));
        }
    }
    let rank = linalg::numeric_rank(choi, linalg::default_rank_tol(n * q, n * q));
    if rank != sel.len() {
        return Err(HillError::RankMismatch { selected: sel.len(), rank });
    }
    Ok(sel)
}

/// Coefficients of the block expansion. `alpha` is `m x nq` with
/// `alpha[(k, j*n + i)]` the coefficient of `L_k` in `L_ij`; `beta[k]` is the
/// minimum-norm `n x q` coefficient matrix with `L_k = Σ β^k_ij L_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    pub alpha: CMat,
    pub beta: Vec<CMat>,
}

fn realify(field: Field, m: CMat) -> CMat {
    linalg::Mat::coerce(field, m).into_inner()
}

pub fn expansion_coefficients(spec: &MapSpec, sel: &[(usize, usize)], tol: f64) -> Result<Expansion, HillError> {
    let (n, q) = (spec.n(), spec.q());
    let nq = n * q;
    let m = sel.len();
    let choi = spec.choi();
    let mut basis = CMat::zeros(nq, m);
    for (k, &(i, j)) in sel.iter().enumerate() {
        basis.set_column(k, &choi.column(j * n + i));
    }
    let bp = pinv(&basis, 1e-13);
    let mut alpha = realify(spec.field(), &bp * choi);
    // Zero columns and exact copies of a selected column get exact coefficients.
    for p in 0..nq {
        let col = choi.column(p);
        let unit = if col.iter().all(|v| *v == re(0.0)) {
            Some(None)
        } else {
            (0..m).find(|&k| basis.column(k) == col).map(Some)
        };
        if let Some(k) = unit {
            for r in 0..m {
                alpha[(r, p)] = re(if Some(r) == k { 1.0 } else { 0.0 });
            }
        }
    }
    let resid = &basis * &alpha - choi;
    let t = tol * max_abs(choi).max(1.0) * (nq as f64);
    for p in 0..nq {
        let r = linalg::norm2(&resid.column(p).into_owned());
        if r > t {
            return Err(HillError::SpanViolation { i: p % n, j: p / n, residual: r });
        }
    }
    let cp = pinv(choi, linalg::default_rank_tol(nq, nq));
    let beta = (0..m)
        .map(|k| {
            let b = &cp * basis.column(k);
            realify(spec.field(), linalg::unvec(&b, n, q).expect("length nq"))
        })
        .collect();
    Ok(Expansion { alpha, beta })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillRep {
    pub n: usize,
    pub q: usize,
    pub field: Field,
    /// Selected block positions when built from a block expansion.
    pub selection: Option<Selection>,
    /// `A_1..A_m`, each `n x q`.
    pub a: Vec<CMat>,
    /// `m x nq`, full row rank.
    pub ahat: CMat,
    /// `m x m` Hermitian.
    pub h: CMat,
    /// Expansion coefficients `β` when built from a block expansion.
    pub b: Option<Vec<CMat>>,
}

impl HillRep {
    pub fn m(&self) -> usize {
        self.a.len()
    }
}

fn a_from_ahat(ahat: &CMat, n: usize, q: usize) -> Vec<CMat> {
    (0..ahat.nrows())
        .map(|k| {
            let row: CVec = ahat.row(k).transpose().map(|z| z.conj());
            linalg::unvec(&row, n, q).expect("row length nq")
        })
        .collect()
}

/// Hill representation from the row-major greedy selection.
pub fn build_hill(spec: &MapSpec, tol: f64) -> Result<HillRep, HillError> {
    let sel = select_independent_blocks(spec, tol)?;
    build_hill_with_selection(spec, &sel, tol)
}

pub fn build_hill_with_selection(spec: &MapSpec, sel: &[(usize, usize)], tol: f64) -> Result<HillRep, HillError> {
    let (n, q) = (spec.n(), spec.q());
    let exp = expansion_coefficients(spec, sel, tol)?;
    // Â restricted to the selected columns is the identity, so Λ = Â* Hᵀ Â
    // reads H off the principal submatrix: H_kl = Λ[p_l, p_k]. This equals
    // the β contraction of `hill_from_beta` without its rounding.
    let choi = spec.choi();
    let cols: Vec<usize> = sel.iter().map(|&(i, j)| j * n + i).collect();
    let h = realify(spec.field(), CMat::from_fn(sel.len(), sel.len(), |k, l| choi[(cols[l], cols[k])]));
    Ok(HillRep {
        n,
        q,
        field: spec.field(),
        selection: Some(sel.to_vec()),
        a: a_from_ahat(&exp.alpha, n, q),
        ahat: exp.alpha,
        h,
        b: Some(exp.beta),
    })
}

/// `H_kl = <β_k, L_{i_l j_l}>`, the Hill matrix as a contraction of the
/// expansion coefficients with the selected blocks.
pub fn hill_from_beta(spec: &MapSpec, sel: &[(usize, usize)], beta: &[CMat]) -> CMat {
    let blocks: Vec<CMat> = sel.iter().map(|&(i, j)| spec.block(i, j)).collect();
    let m = sel.len();
    let h = CMat::from_fn(m, m, |k, l| beta[k].zip_fold(&blocks[l], re(0.0), |acc, b, x| acc + b * x.conj()));
    realify(spec.field(), h)
}

/// `(L, Λ)` with `L = Σ H_kl conj(A_k) ⊗ A_l` and `Λ = Â* Hᵀ Â`.
pub fn reconstruct_from_hill(rep: &HillRep) -> (CMat, CMat) {
    let (n, q) = (rep.n, rep.q);
    let mut l = CMat::zeros(n * n, q * q);
    for k in 0..rep.m() {
        let ak = conj(&rep.a[k]);
        for ll in 0..rep.m() {
            let h = rep.h[(k, ll)];
            if h != re(0.0) {
                l += linalg::kron(&ak, &rep.a[ll]) * h;
            }
        }
    }
    let choi = rep.ahat.adjoint() * rep.h.transpose() * &rep.ahat;
    (l, choi)
}

/// `Σ_kl H_lk A_k V A_l*`.
pub fn apply_via_hill(rep: &HillRep, v: &CMat) -> CMat {
    let mut out = CMat::zeros(rep.n, rep.n);
    for k in 0..rep.m() {
        let av = &rep.a[k] * v;
        for l in 0..rep.m() {
            out += &av * rep.a[l].adjoint() * rep.h[(l, k)];
        }
    }
    out
}

/// Hill matrix for a prescribed `Â` whose kernel equals the kernel of `Λ`:
/// `Hᵀ = (ÂÂ*)^{-1} Â Λ Â* (ÂÂ*)^{-1}` and `A_k = unvec(conj(row k of Â))`.
pub fn hill_from_kernel_matrix(spec: &MapSpec, ahat: &CMat, tol: f64) -> Result<HillRep, HillError> {
    let (n, q) = (spec.n(), spec.q());
    let nq = n * q;
    if ahat.ncols() != nq {
        return Err(HillError::DimMismatch(format!("Â must have {nq} columns")));
    }
    let m = ahat.nrows();
    let choi = spec.choi();
    let rank_tol = linalg::default_rank_tol(nq, nq);
    let rank_a = linalg::numeric_rank(ahat, rank_tol);
    let rank_l = linalg::numeric_rank(choi, rank_tol);
    if rank_a != m {
        return Err(HillError::KernelMismatch(format!("Â has rank {rank_a} but {m} rows")));
    }
    if rank_l != m {
        return Err(HillError::KernelMismatch(format!("Λ has rank {rank_l}, Â has rank {m}")));
    }
    // ker Â ⊆ ker Λ with equal dimensions gives equality.
    let proj = CMat::identity(nq, nq) - pinv(ahat, rank_tol) * ahat;
    let leak = max_abs(&(choi * &proj));
    if leak > tol * max_abs(choi).max(1.0) * nq as f64 {
        return Err(HillError::KernelMismatch(format!("Λ is nonzero on ker Â (max {leak:.3e})")));
    }
    let g = ahat * ahat.adjoint();
    let gi = g
        .clone()
        .try_inverse()
        .ok_or_else(|| HillError::KernelMismatch("ÂÂ* is singular".into()))?;
    let ht = &gi * ahat * choi * ahat.adjoint() * &gi;
    let h = realify(spec.field(), ht.transpose());
    Ok(HillRep {
        n,
        q,
        field: spec.field(),
        selection: None,
        a: a_from_ahat(ahat, n, q),
        ahat: realify(spec.field(), ahat.clone()),
        h,
        b: None,
    })
}

/// The invertible `Φ` with `Φᵀ Â = Â'` and `H = Φ H' Φ*`, where `rep` holds
/// `(Â, H)` and `other` holds `(Â', H')`.
pub fn equivalence_transform(rep: &HillRep, other: &HillRep, tol: f64) -> Result<CMat, HillError> {
    if rep.ahat.shape() != other.ahat.shape() {
        return Err(HillError::NotEquivalent { residual: f64::INFINITY });
    }
    let m = rep.m();
    let phit = &other.ahat * pinv(&rep.ahat, 1e-12);
    let scale = max_abs(&rep.ahat).max(max_abs(&other.ahat)).max(1.0);
    let r1 = max_abs(&(&phit * &rep.ahat - &other.ahat));
    let phi = phit.transpose();
    let r2 = max_abs(&(&phi * &other.h * phi.adjoint() - &rep.h));
    let hs = max_abs(&rep.h).max(1.0);
    let residual = (r1 / scale).max(r2 / hs);
    if residual > tol * (m.max(1) as f64) * 10.0 || linalg::numeric_rank(&phi, 1e-12) != m {
        return Err(HillError::NotEquivalent { residual });
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn toeplitz_complex() -> MapSpec {
        // [[L1, L2], [L3, L1]] with L1 = [[a1,b1],[c1,a1]], L2 = [[b1*, b2],[c2, b1*]],
        // L3 = [[c1*, c2*],[c3, c1*]].
        let (a1, b2, c3) = (re(1.5), re(0.7), re(-0.4));
        let (b1, c1, c2) = (c(0.3, 0.8), c(-0.2, 0.5), c(1.1, -0.6));
        let l1 = [[a1, b1], [c1, a1]];
        let l2 = [[b1.conj(), b2], [c2, b1.conj()]];
        let l3 = [[c1.conj(), c2.conj()], [c3, c1.conj()]];
        let mut l = CMat::zeros(4, 4);
        for (bi, bj, blk) in [(0, 0, l1), (0, 1, l2), (1, 0, l3), (1, 1, l1)] {
            for r in 0..2 {
                for s in 0..2 {
                    l[(bi * 2 + r, bj * 2 + s)] = blk[r][s];
                }
            }
        }
        MapSpec::from_matricization(2, 2, Field::Complex, l).unwrap()
    }

    #[test]
    fn toeplitz_selection_and_ahat() {
        let m = toeplitz_complex();
        let rep = build_hill(&m, 1e-9).unwrap();
        assert_eq!(rep.selection.as_ref().unwrap(), &vec![(0, 0), (0, 1), (1, 0)]);
        let expected = [[1.0, 0.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        for k in 0..3 {
            for p in 0..4 {
                assert!((rep.ahat[(k, p)] - re(expected[k][p])).norm() < 1e-12);
            }
        }
        let (l, choi) = reconstruct_from_hill(&rep);
        assert!(max_abs(&(l - m.matricization())) < 1e-12);
        assert!(max_abs(&(choi - m.choi())) < 1e-12);
    }

    #[test]
    fn hill_application_matches_matricization() {
        let m = toeplitz_complex();
        let rep = build_hill(&m, 1e-9).unwrap();
        let v = CMat::from_fn(2, 2, |i, j| c(i as f64 - 0.3, 1.0 + j as f64));
        let a = crate::mapmodel::apply_via_l(&m, &v).unwrap();
        assert!(max_abs(&(apply_via_hill(&rep, &v) - a)) < 1e-12);
    }

    #[test]
    fn kernel_route_agrees() {
        let m = toeplitz_complex();
        let rep = build_hill(&m, 1e-9).unwrap();
        let rep2 = hill_from_kernel_matrix(&m, &rep.ahat, 1e-9).unwrap();
        assert!(max_abs(&(&rep.h - &rep2.h)) < 1e-10);
        let bad = CMat::from_fn(3, 4, |i, j| re(if i == j { 1.0 } else { 0.0 }));
        assert!(matches!(hill_from_kernel_matrix(&m, &bad, 1e-9), Err(HillError::KernelMismatch(_))));
    }

    #[test]
    fn scaled_representation_is_equivalent() {
        let m = toeplitz_complex();
        let rep = build_hill(&m, 1e-9).unwrap();
        let twice = hill_from_kernel_matrix(&m, &(&rep.ahat * re(2.0)), 1e-9).unwrap();
        let phi = equivalence_transform(&rep, &twice, 1e-9).unwrap();
        assert!(max_abs(&(phi - CMat::identity(3, 3) * re(2.0))) < 1e-10);
    }
}
