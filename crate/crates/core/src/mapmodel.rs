//! Linear maps `F^{q x q} -> F^{n x n}` held as a matricization `L`
//! (`L vec(V) = vec(map(V))`) with a lazily derived Choi matrix.
//!
//! Index conventions (0-based): the block `L_ij` of `L` is `n x q` for
//! `i < n`, `j < q`; the Choi block `Λ_ij = map(E_ij)` is `n x n` for
//! `i, j < q`. Entry `(b, d)` of `L_ac` equals entry `(d*n + b, c*n + a)` of `Λ`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, canonical_shuffle, conj, max_abs, CMat, Field, LinalgError, Permutation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

#[derive(Debug)]
pub struct MapSpec {
    n: usize,
    q: usize,
    field: Field,
    l: CMat,
    choi: OnceLock<CMat>,
}

impl Clone for MapSpec {
    fn clone(&self) -> Self {
        let choi = OnceLock::new();
        if let Some(c) = self.choi.get() {
            let _ = choi.set(c.clone());
        }
        MapSpec { n: self.n, q: self.q, field: self.field, l: self.l.clone(), choi }
    }
}

impl PartialEq for MapSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.q == other.q && self.field == other.field && self.l == other.l
    }
}

impl MapSpec {
    pub fn from_matricization(n: usize, q: usize, field: Field, l: CMat) -> Result<MapSpec, MapError> {
        if n == 0 || q == 0 {
            return Err(MapError::DimMismatch("n and q must be positive".into()));
        }
        if l.nrows() != n * n || l.ncols() != q * q {
            return Err(MapError::DimMismatch(format!(
                "matricization must be {}x{}, got {}x{}",
                n * n,
                q * q,
                l.nrows(),
                l.ncols()
            )));
        }
        let l = linalg::Mat::new(field, l)?.into_inner();
        Ok(MapSpec { n, q, field, l, choi: OnceLock::new() })
    }

    pub fn from_choi(n: usize, q: usize, field: Field, choi: CMat) -> Result<MapSpec, MapError> {
        if n == 0 || q == 0 {
            return Err(MapError::DimMismatch("n and q must be positive".into()));
        }
        if choi.nrows() != n * q || choi.ncols() != n * q {
            return Err(MapError::DimMismatch(format!(
                "Choi matrix must be {0}x{0}, got {1}x{2}",
                n * q,
                choi.nrows(),
                choi.ncols()
            )));
        }
        let choi = linalg::Mat::new(field, choi)?.into_inner();
        let l = choi_to_matricization(&choi, n, q)?;
        let cell = OnceLock::new();
        let _ = cell.set(choi);
        Ok(MapSpec { n, q, field, l, choi: cell })
    }

    /// Output dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Input dimension.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn matricization(&self) -> &CMat {
        &self.l
    }

    pub fn choi(&self) -> &CMat {
        self.choi
            .get_or_init(|| matricization_to_choi(&self.l, self.n, self.q).expect("dimensions validated"))
    }

    /// The block `L_ij` (`n x q`).
    pub fn block(&self, i: usize, j: usize) -> CMat {
        self.l.view((i * self.n, j * self.q), (self.n, self.q)).into_owned()
    }

    /// The Choi block `Λ_ij = map(E_ij)` (`n x n`).
    pub fn choi_block(&self, i: usize, j: usize) -> CMat {
        self.choi().view((i * self.n, j * self.n), (self.n, self.n)).into_owned()
    }

    /// Same map viewed over another field. Fails when leaving the complex
    /// field with nonzero imaginary parts.
    pub fn with_field(&self, field: Field) -> Result<MapSpec, MapError> {
        MapSpec::from_matricization(self.n, self.q, field, self.l.clone())
    }
}

pub fn matricization_to_choi(l: &CMat, n: usize, q: usize) -> Result<CMat, MapError> {
    if l.nrows() != n * n || l.ncols() != q * q {
        return Err(MapError::DimMismatch(format!("expected {}x{} matricization", n * n, q * q)));
    }
    let mut choi = CMat::zeros(n * q, n * q);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..q {
                for d in 0..q {
                    choi[(d * n + b, cc * n + a)] = l[(a * n + b, cc * q + d)];
                }
            }
        }
    }
    Ok(choi)
}

pub fn choi_to_matricization(choi: &CMat, n: usize, q: usize) -> Result<CMat, MapError> {
    if choi.nrows() != n * q || choi.ncols() != n * q {
        return Err(MapError::DimMismatch(format!("expected {0}x{0} Choi matrix", n * q)));
    }
    let mut l = CMat::zeros(n * n, q * q);
    for a in 0..n {
        for b in 0..n {
            for cc in 0..q {
                for d in 0..q {
                    l[(a * n + b, cc * q + d)] = choi[(d * n + b, cc * n + a)];
                }
            }
        }
    }
    Ok(l)
}

fn check_input(spec: &MapSpec, v: &CMat) -> Result<(), MapError> {
    if v.nrows() != spec.q || v.ncols() != spec.q {
        return Err(MapError::DimMismatch(format!("input must be {0}x{0}", spec.q)));
    }
    Ok(())
}

/// `unvec(L vec(V))`.
pub fn apply_via_l(spec: &MapSpec, v: &CMat) -> Result<CMat, MapError> {
    check_input(spec, v)?;
    let out = &spec.l * linalg::vec(v);
    Ok(linalg::unvec(&out, spec.n, spec.n)?)
}

/// `Σ v_ij Λ_ij`.
pub fn apply_via_choi_blocks(spec: &MapSpec, v: &CMat) -> Result<CMat, MapError> {
    check_input(spec, v)?;
    let n = spec.n;
    let mut out = CMat::zeros(n, n);
    for i in 0..spec.q {
        for j in 0..spec.q {
            if v[(i, j)] != linalg::re(0.0) {
                out += spec.choi_block(i, j) * v[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `(1_q ⊗ I_n)^T (Λ ∘ (V ⊗ 1_{n x n})) (1_q ⊗ I_n)`.
pub fn apply_via_choi_hadamard(spec: &MapSpec, v: &CMat) -> Result<CMat, MapError> {
    check_input(spec, v)?;
    let (n, q) = (spec.n, spec.q);
    let ones_nn = CMat::from_element(n, n, linalg::re(1.0));
    let spread = linalg::kron(v, &ones_nn);
    let had = linalg::hadamard(spec.choi(), &spread)?;
    let sel = linalg::kron(&CMat::from_element(q, 1, linalg::re(1.0)), &CMat::identity(n, n));
    Ok(sel.transpose() * had * sel)
}

/// Applies the map `V -> P_k map(P_l V P_j) P_i`, where each `P_x` swaps the
/// two given (0-based) indices. `i` and `k` index `0..n`, `j` and `l` index
/// `0..q`. Returns the new map; its matricization is
/// `(P_i ⊗ P_k) L (P_j ⊗ P_l)` and its Choi matrix `(P_l ⊗ P_k) Λ (P_j ⊗ P_i)`.
pub fn permute_map(
    spec: &MapSpec,
    i: (usize, usize),
    k: (usize, usize),
    j: (usize, usize),
    l: (usize, usize),
) -> Result<MapSpec, MapError> {
    let (n, q) = (spec.n, spec.q);
    for (name, pair, bound) in [("i", i, n), ("k", k, n), ("j", j, q), ("l", l, q)] {
        if pair.0 >= bound || pair.1 >= bound {
            return Err(MapError::IndexOutOfRange(format!("{name} pair {pair:?} outside 0..{bound}")));
        }
    }
    let pi = Permutation::swap(n, i.0, i.1);
    let pk = Permutation::swap(n, k.0, k.1);
    let pj = Permutation::swap(q, j.0, j.1);
    let pl = Permutation::swap(q, l.0, l.1);
    let left = pi.kron(&pk);
    let right = pj.kron(&pl);
    let lt = right.apply_cols(&left.apply_rows(&spec.l));
    MapSpec::from_matricization(n, q, spec.field, lt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarLinearityReport {
    pub star_linear: bool,
    /// Λ is Hermitian.
    pub choi_hermitian: bool,
    /// `conj(L) = C_n L C_q` for the canonical shuffles.
    pub shuffle_identity: bool,
    /// `(L_ij)_kl = conj((L_kl)_ij)` for all indices.
    pub entrywise: bool,
    pub max_deviation: [f64; 3],
    /// The three criteria disagree, which indicates a bug or a tolerance edge.
    pub inconsistent: bool,
}

/// Checks `*`-linearity by three independent criteria, each at tolerance
/// `tol * max(1, max|L_ij|)`.
pub fn is_star_linear(spec: &MapSpec, tol: f64) -> StarLinearityReport {
    let (n, q) = (spec.n, spec.q);
    let l = &spec.l;
    let t = tol * max_abs(l).max(1.0);

    let dev_h = linalg::hermitian_deviation(spec.choi());

    let cn = canonical_shuffle(n);
    let cq = canonical_shuffle(q);
    let shuffled = cq.apply_cols(&cn.apply_rows(l));
    let dev_s = max_abs(&(conj(l) - shuffled));

    let mut dev_e = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for j in 0..q {
                for ll in 0..q {
                    let a = l[(i * n + k, j * q + ll)];
                    let b = l[(k * n + i, ll * q + j)];
                    dev_e = dev_e.max((a - b.conj()).norm());
                }
            }
        }
    }

    let flags = [dev_h <= t, dev_s <= t, dev_e <= t];
    StarLinearityReport {
        star_linear: flags.iter().all(|&f| f),
        choi_hermitian: flags[0],
        shuffle_identity: flags[1],
        entrywise: flags[2],
        max_deviation: [dev_h, dev_s, dev_e],
        inconsistent: !(flags[0] == flags[1] && flags[1] == flags[2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    fn transpose2() -> MapSpec {
        let mut l = CMat::zeros(4, 4);
        for (r, cc) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            l[(r, cc)] = re(1.0);
        }
        MapSpec::from_matricization(2, 2, Field::Complex, l).unwrap()
    }

    #[test]
    fn transpose_choi_is_swap() {
        let m = transpose2();
        assert_eq!(m.choi(), m.matricization());
        let rep = is_star_linear(&m, 1e-9);
        assert!(rep.star_linear && !rep.inconsistent);
    }

    #[test]
    fn three_application_routes_agree() {
        let l = CMat::from_fn(9, 4, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64) - (j as f64)));
        let m = MapSpec::from_matricization(3, 2, Field::Complex, l).unwrap();
        let v = CMat::from_fn(2, 2, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let a = apply_via_l(&m, &v).unwrap();
        let b = apply_via_choi_blocks(&m, &v).unwrap();
        let d = apply_via_choi_hadamard(&m, &v).unwrap();
        assert!((&a - &b).norm() < 1e-12);
        assert!((&a - &d).norm() < 1e-12);
    }

    #[test]
    fn choi_round_trip() {
        let l = CMat::from_fn(4, 9, |i, j| c(i as f64, (j * j) as f64));
        let choi = matricization_to_choi(&l, 2, 3).unwrap();
        assert_eq!(choi_to_matricization(&choi, 2, 3).unwrap(), l);
    }

    #[test]
    fn wrong_shapes_rejected() {
        assert!(MapSpec::from_matricization(2, 2, Field::Real, CMat::zeros(4, 3)).is_err());
        assert!(MapSpec::from_choi(2, 3, Field::Real, CMat::zeros(5, 5)).is_err());
        let m = transpose2();
        assert!(apply_via_l(&m, &CMat::zeros(3, 3)).is_err());
    }
}
