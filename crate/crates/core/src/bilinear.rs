//! The bilinear map `(z, x) -> Â (z ⊗ x)` with `Â = (I - α 1ᵀ) E + α 1ᵀ`,
//! where row `k` of `E` picks the entry `x_{i_k} z_{j_k}`.
//!
//! [`construct_witness`] returns `(z, x)` with `Â (z ⊗ x) = y` whenever the
//! pattern guarantees that the range is everything. Writing
//! `w = E (z ⊗ x)` and `λ = (Σz)(Σx)`, the target becomes
//! `y = (I - α 1ᵀ) w + α λ`; each branch picks `(w, λ)` and then solves the
//! structured system `E (z ⊗ x) = w`, `(Σz)(Σx) = λ`.
//!
//! Under C1 every connected piece of the pattern is a star: a row with
//! several positions in otherwise unused columns, a column with several
//! positions in otherwise unused rows, or an isolated position. Scaling the
//! center of a star and inversely scaling its leaves leaves `E (z ⊗ x)`
//! unchanged; the constructions below spend that freedom on the sums.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, kron_vec, pinv, re, CMat, CVec, Field, C64};
use crate::pattern::{self, check_c1, check_c2, cross_arms, CrossArms, Pattern, Remainder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BilinearError {
    #[error("y is not in the range of the bilinear map")]
    NotInRange,
    #[error("pattern not covered by any construction: {0}")]
    UnsupportedPattern(String),
    #[error("construction failed numerically (residual {residual:.3e})")]
    NumericalFailure { residual: f64 },
    #[error("grid too large: {0}")]
    TooLarge(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
}

/// Which construction produced a witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// All positions in one block row or one block column.
    RowColumn,
    /// (a) C1 with zero remainder.
    ZeroPattern,
    /// (b) `Σα ≠ 1` with some C2 flag: solve the sum-constrained system.
    SumNotOne,
    /// (c) `Σα = 1` with an unused row or column.
    FreeIndex,
    /// (d) `Σα = 1` with all rows or all columns distinct.
    DistinctIndices,
    /// (e) `Σα = 1` with two repeated rows or two repeated columns.
    RepeatedPairs,
    /// (f) `Σα = 1` with an isolated position.
    IsolatedPosition,
    /// (g) Cross pattern with `Σα ≠ 1`.
    CrossInvertible,
    /// (h) Cross pattern with `Σα = 1`.
    CrossSingular,
}

impl Branch {
    pub const LETTERED: [Branch; 8] = [
        Branch::ZeroPattern,
        Branch::SumNotOne,
        Branch::FreeIndex,
        Branch::DistinctIndices,
        Branch::RepeatedPairs,
        Branch::IsolatedPosition,
        Branch::CrossInvertible,
        Branch::CrossSingular,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub z: CVec,
    pub x: CVec,
    pub branch: Branch,
    pub residual: f64,
}

/// Threshold separating `Σα = 1` from `Σα ≠ 1`.
pub const SUM_ONE_TOL: f64 = 1e-9;

/// Witness residual bound, relative to `max(1, ‖y‖)`.
pub const WITNESS_TOL: f64 = 1e-8;

pub fn build_e(p: &Pattern) -> CMat {
    let mut e = CMat::zeros(p.m(), p.n * p.q);
    for (k, &(i, j)) in p.positions.iter().enumerate() {
        e[(k, j * p.n + i)] = re(1.0);
    }
    e
}

/// `Â = E + Σ_{(i,j) not selected} α e_{jn+i}ᵀ`, which equals
/// `(I - α 1ᵀ) E + α 1ᵀ`.
pub fn assemble_ahat(p: &Pattern, alpha: &[C64]) -> Result<CMat, BilinearError> {
    if alpha.len() != p.m() {
        return Err(BilinearError::DimMismatch(format!("alpha has length {}, expected {}", alpha.len(), p.m())));
    }
    let mut a = build_e(p);
    for i in 0..p.n {
        for j in 0..p.q {
            if !p.positions.contains(&(i, j)) {
                for k in 0..p.m() {
                    a[(k, j * p.n + i)] = alpha[k];
                }
            }
        }
    }
    Ok(a)
}

/// `Â` for a pattern with a single (possibly zero) remainder.
pub fn ahat_for(p: &Pattern) -> Result<CMat, BilinearError> {
    let alpha = p
        .remainder
        .alpha(p.m())
        .ok_or_else(|| BilinearError::UnsupportedPattern("heterogeneous remainder".into()))?;
    assemble_ahat(p, &alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShermanMorrison {
    /// `(I - α 1ᵀ)^{-1} = I + α 1ᵀ / (1 - Σα)`.
    Invertible(CMat),
    /// `Σα = 1`: the kernel is spanned by `α`, the cokernel by `1`.
    Singular { kernel: CVec, cokernel: CVec },
}

pub fn sherman_morrison(alpha: &[C64]) -> ShermanMorrison {
    let m = alpha.len();
    let s: C64 = alpha.iter().sum();
    let a = CVec::from_column_slice(alpha);
    if (re(1.0) - s).norm() <= SUM_ONE_TOL {
        return ShermanMorrison::Singular { kernel: a, cokernel: CVec::from_element(m, re(1.0)) };
    }
    let ones = CVec::from_element(m, re(1.0));
    ShermanMorrison::Invertible(CMat::identity(m, m) + (a * ones.transpose()) / (re(1.0) - s))
}

fn sum(v: &[C64]) -> C64 {
    v.iter().sum()
}

fn inf_norm(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

#[derive(Debug, Clone)]
struct Sol {
    z: Vec<C64>,
    x: Vec<C64>,
}

impl Sol {
    fn swapped(self) -> Sol {
        Sol { z: self.x, x: self.z }
    }
}

/// Lemma-style base solution of `E (z ⊗ x) = w` under C1: a position with an
/// unshared column takes `z = w_k, x = 1`, otherwise `z = 1, x = w_k`.
fn base_solution(p: &Pattern, w: &[C64]) -> Sol {
    let mut z = vec![re(0.0); p.q];
    let mut x = vec![re(0.0); p.n];
    for (k, &(i, j)) in p.positions.iter().enumerate() {
        if p.col_count(j) == 1 {
            z[j] = w[k];
            x[i] = re(1.0);
        } else {
            z[j] = re(1.0);
            x[i] = w[k];
        }
    }
    Sol { z, x }
}

/// Sets `z_j = val` and rescales the rows hanging off column `j`.
fn set_col_center(sol: &mut Sol, p: &Pattern, w: &[C64], j: usize, val: C64) {
    sol.z[j] = val;
    for (k, &(i, jj)) in p.positions.iter().enumerate() {
        if jj == j {
            sol.x[i] = w[k] / val;
        }
    }
}

/// Sets `x_i = val` and rescales the columns hanging off row `i`.
fn set_row_center(sol: &mut Sol, p: &Pattern, w: &[C64], i: usize, val: C64) {
    sol.x[i] = val;
    for (k, &(ii, j)) in p.positions.iter().enumerate() {
        if ii == i {
            sol.z[j] = w[k] / val;
        }
    }
}

/// Doubles the center of the star containing position `k`.
fn scale_component(sol: &mut Sol, p: &Pattern, w: &[C64], k: usize) {
    let (i, j) = p.positions[k];
    if p.row_count(i) >= 2 || p.col_count(j) == 1 && sol.x[i] != re(0.0) {
        let v = sol.x[i] * re(2.0);
        let v = if v == re(0.0) { re(1.0) } else { v };
        set_row_center(sol, p, w, i, v);
    } else {
        let v = sol.z[j] * re(2.0);
        let v = if v == re(0.0) { re(1.0) } else { v };
        set_col_center(sol, p, w, j, v);
    }
}

fn e_apply(p: &Pattern, sol: &Sol) -> Vec<C64> {
    p.positions.iter().map(|&(i, j)| sol.x[i] * sol.z[j]).collect()
}

/// `E (z ⊗ x) = w` and `(Σz)(Σx) = λ` up to a relative tolerance.
fn check_e(p: &Pattern, w: &[C64], lam: C64, sol: &Sol) -> bool {
    let scale = inf_norm(w).max(lam.norm()).max(1.0);
    let ew = e_apply(p, sol);
    let err_w = ew.iter().zip(w).fold(0.0f64, |a, (u, v)| a.max((u - v).norm()));
    let err_l = (sum(&sol.z) * sum(&sol.x) - lam).norm();
    let finite = sol.z.iter().chain(sol.x.iter()).all(|v| v.re.is_finite() && v.im.is_finite());
    finite && err_w <= 1e-10 * scale && err_l <= 1e-10 * scale
}

fn tiny(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

/// Two nonzero numbers summing to `t`.
fn split(t: C64, eps: f64) -> (C64, C64) {
    if t.norm() > eps {
        (t * re(2.0), -t)
    } else {
        (re(1.0), re(-1.0))
    }
}

fn first_unused_row(p: &Pattern) -> Option<usize> {
    (0..p.n).find(|&i| p.row_count(i) == 0)
}

fn first_unused_col(p: &Pattern) -> Option<usize> {
    (0..p.q).find(|&j| p.col_count(j) == 0)
}

fn multi_rows(p: &Pattern) -> Vec<usize> {
    (0..p.n).filter(|&i| p.row_count(i) >= 2).collect()
}

fn multi_cols(p: &Pattern) -> Vec<usize> {
    (0..p.q).filter(|&j| p.col_count(j) >= 2).collect()
}

fn rows_distinct(p: &Pattern) -> bool {
    (0..p.n).all(|i| p.row_count(i) <= 1)
}

fn cols_distinct(p: &Pattern) -> bool {
    (0..p.q).all(|j| p.col_count(j) <= 1)
}

/// Solves `E (z ⊗ x) = w` with `(Σz)(Σx) = 0` using the given C2 flag.
fn e2_by_flag(p: &Pattern, w: &[C64], flag: usize) -> Option<Sol> {
    let eps = tiny(inf_norm(w));
    let zero = re(0.0);
    let sol = match flag {
        1 => {
            let i0 = first_unused_row(p)?;
            let mut s = base_solution(p, w);
            s.x[i0] = zero;
            s.x[i0] = -sum(&s.x);
            s
        }
        2 => e2_by_flag(&p.transposed(), w, 1)?.swapped(),
        3 => {
            let rows = multi_rows(p);
            if rows.len() < 2 {
                return None;
            }
            let (r1, r2) = (rows[0], rows[1]);
            let mut s = base_solution(p, w);
            let rest = sum(&s.x) - s.x[r1] - s.x[r2];
            let (t, u) = split(-rest, eps);
            set_row_center(&mut s, p, w, r1, t);
            set_row_center(&mut s, p, w, r2, u);
            s
        }
        4 => e2_by_flag(&p.transposed(), w, 3)?.swapped(),
        5 => {
            if !rows_distinct(p) {
                return None;
            }
            if p.q == 1 {
                return e2_by_flag(p, w, 1);
            }
            let mut z = vec![re(1.0); p.q];
            z[0] = re(1.0 - p.q as f64);
            let mut x = vec![zero; p.n];
            for (k, &(i, j)) in p.positions.iter().enumerate() {
                x[i] = w[k] / z[j];
            }
            Sol { z, x }
        }
        6 => e2_by_flag(&p.transposed(), w, 5)?.swapped(),
        7 => {
            if p.m() < 2 {
                return None;
            }
            let ks = p
                .positions
                .iter()
                .position(|&(i, j)| p.row_count(i) == 1 && p.col_count(j) == 1)?;
            let (is, js) = p.positions[ks];
            let mut s = base_solution(p, w);
            for attempt in 0..4 {
                let zs = sum(&s.z) - s.z[js];
                let xs = sum(&s.x) - s.x[is];
                if zs.norm() > eps {
                    set_col_center(&mut s, p, w, js, -zs);
                    break;
                }
                if xs.norm() > eps {
                    set_row_center(&mut s, p, w, is, -xs);
                    break;
                }
                if attempt == 3 {
                    return None;
                }
                let other = (0..p.m()).find(|&k| k != ks)?;
                scale_component(&mut s, p, w, other);
            }
            s
        }
        _ => return None,
    };
    check_e(p, w, re(0.0), &sol).then_some(sol)
}

/// Solves `E (z ⊗ x) = w` with `(Σz)(Σx) = 0`, trying the C2 flags in
/// numeric order. Requires C1.
fn e2_solve(p: &Pattern, w: &[C64]) -> Option<Sol> {
    let flags = check_c2(p);
    (1..=7).filter(|&k| flags.get(k)).find_map(|k| e2_by_flag(p, w, k))
}

/// Public form of the sum-constrained solver: `(z, x)` with
/// `E (z ⊗ x) = w` and `(Σz)(Σx) = 0`.
pub fn sum_constrained_witness(p: &Pattern, w: &CVec) -> Result<(CVec, CVec), BilinearError> {
    if w.len() != p.m() {
        return Err(BilinearError::DimMismatch(format!("w has length {}, expected {}", w.len(), p.m())));
    }
    if !check_c1(p) {
        return Err(BilinearError::UnsupportedPattern("C1 fails".into()));
    }
    if !check_c2(p).any() {
        return Err(BilinearError::UnsupportedPattern("no C2 flag holds".into()));
    }
    let s = e2_solve(p, w.as_slice()).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?;
    Ok((CVec::from_vec(s.z), CVec::from_vec(s.x)))
}

/// `E (z ⊗ x) = w`, `(Σz)(Σx) = λ` with an unused column: get `Σx ≠ 0`,
/// then shift the unused `z` entry.
fn free_column(p: &Pattern, w: &[C64], lam: C64) -> Option<Sol> {
    let j0 = first_unused_col(p)?;
    let eps = tiny(inf_norm(w).max(lam.norm()));
    let mut s = if rows_distinct(p) {
        let mut x = vec![re(0.0); p.n];
        for (k, &(i, _)) in p.positions.iter().enumerate() {
            x[i] = w[k];
        }
        Sol { z: vec![re(1.0); p.q], x }
    } else if cols_distinct(p) {
        let mut z = vec![re(0.0); p.q];
        for (k, &(_, j)) in p.positions.iter().enumerate() {
            z[j] = w[k];
        }
        Sol { z, x: vec![re(1.0); p.n] }
    } else {
        let mut s = base_solution(p, w);
        let r = *multi_rows(p).first()?;
        let rest = sum(&s.x) - s.x[r];
        let t = if rest.norm() > eps { rest } else { re(1.0) };
        set_row_center(&mut s, p, w, r, t);
        s
    };
    let sx = sum(&s.x);
    if sx.norm() > eps {
        let b = (lam - sum(&s.z) * sx) / sx;
        s.z[j0] += b;
    }
    check_e(p, w, lam, &s).then_some(s)
}

fn free_index(p: &Pattern, w: &[C64], lam: C64) -> Option<Sol> {
    let flags = check_c2(p);
    if flags.get(2) {
        if let Some(s) = free_column(p, w, lam) {
            return Some(s);
        }
    }
    if flags.get(1) {
        return free_column(&p.transposed(), w, lam).map(Sol::swapped);
    }
    None
}

/// Candidate magnitudes `±2^k`, moderate values first.
fn powers(grow: bool) -> impl Iterator<Item = f64> {
    (0..61).flat_map(move |k| {
        let v = if grow { 2f64.powi(k) } else { 2f64.powi(-k) };
        [v, -v]
    })
}

fn sqrt_in(d: C64, field: Field, eps: f64) -> Option<C64> {
    match field {
        Field::Complex => Some(d.sqrt()),
        Field::Real => {
            if d.re < -eps {
                None
            } else {
                Some(re(d.re.max(0.0).sqrt()))
            }
        }
    }
}

/// Roots of `a u^2 + b u + c`, larger modulus first; `None` entries dropped.
fn quadratic_roots(a: C64, b: C64, cc: C64, field: Field, eps: f64) -> Vec<C64> {
    if a.norm() <= eps {
        if b.norm() <= eps {
            return Vec::new();
        }
        return vec![-cc / b];
    }
    let disc = b * b - a * cc * re(4.0);
    let Some(sq) = sqrt_in(disc, field, eps * (b.norm_sqr() + (a * cc).norm()).max(1.0)) else {
        return Vec::new();
    };
    // Stable form: one root from the larger-modulus numerator, the other by Vieta.
    let s = if (b.conj() * sq).re >= 0.0 { sq } else { -sq };
    let q = -(b + s) * re(0.5);
    let mut roots = Vec::new();
    if q.norm() > 0.0 {
        roots.push(q / a);
        roots.push(cc / q);
    } else {
        roots.push(re(0.0));
    }
    roots.sort_by(|u, v| v.norm().partial_cmp(&u.norm()).unwrap());
    roots
}

/// Finds nonzero `(u, v, t)` with
/// `(A/u + B/v + t + λ1)(u + v + C/t + λ2) = λ`, calling `accept` on each
/// candidate until it returns true. Returns false when the only obstruction
/// is `λ1 = 1, λ2 = λ`, which the caller removes by perturbing other stars.
#[allow(clippy::too_many_arguments)]
fn solve_two_factor(
    a: C64,
    b: C64,
    cc: C64,
    l1: C64,
    l2: C64,
    lam: C64,
    field: Field,
    accept: &mut dyn FnMut(C64, C64, C64) -> bool,
) -> bool {
    let scale = [a, b, cc, l1, l2, lam].iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let eps = tiny(scale);
    let nz = |z: C64| z.norm() > eps;
    let one = re(1.0);
    if !nz(lam) {
        let (u, v) = split(-(cc + l2), eps);
        return accept(u, v, one);
    }
    if !nz(a) || !nz(b) {
        // One of u, v appears only in the second factor.
        let swap = nz(a);
        let bb = if swap { a } else { b };
        for v in powers(true).take(40).map(re) {
            for t in powers(true).take(6).map(re) {
                let xsum = bb / v + t + l1;
                if !nz(xsum) {
                    continue;
                }
                let u = lam / xsum - v - cc / t - l2;
                if !nz(u) {
                    continue;
                }
                let ok = if swap { accept(v, u, t) } else { accept(u, v, t) };
                if ok {
                    return true;
                }
            }
        }
        return false;
    }
    if !nz(cc) {
        for u in powers(true).take(20).map(re) {
            for v in powers(true).take(20).map(re) {
                let zsum = u + v + l2;
                if !nz(zsum) {
                    continue;
                }
                let t = lam / zsum - a / u - b / v - l1;
                if nz(t) && accept(u, v, t) {
                    return true;
                }
            }
        }
        return false;
    }
    let l1_is_one = !nz(l1 - one);
    if l1_is_one && !nz(l2 - lam) {
        return false;
    }
    let mu = lam - l2;
    let k1 = one - l1;
    for v in powers(!l1_is_one).map(re) {
        let qa = v * k1 - b;
        let qb = v * v * k1 + v * (cc - a - b - k1 * mu) + b * mu;
        let qc = v * mu * a - v * v * a;
        let local = [qa, qb, qc].iter().fold(1.0f64, |m, z| m.max(z.norm()));
        for u in quadratic_roots(qa, qb, qc, field, 1e-14 * local) {
            if !nz(u) {
                continue;
            }
            let t = one - l1 - a / u - b / v;
            if nz(t) && accept(u, v, t) {
                return true;
            }
        }
    }
    false
}

/// Two column stars (or a column star and an isolated position) centered at
/// `cu`, `cv`, and a row star centered at `rt`; every other star stays at
/// the base solution, contributing `λ1` to `Σx` and `λ2` to `Σz`.
#[allow(clippy::too_many_arguments)]
fn three_stars(p: &Pattern, w: &[C64], lam: C64, cu: usize, cv: usize, rt: usize, field: Field) -> Option<Sol> {
    let mut s = base_solution(p, w);
    let a: C64 = (0..p.m()).filter(|&k| p.positions[k].1 == cu).map(|k| w[k]).sum();
    let b: C64 = (0..p.m()).filter(|&k| p.positions[k].1 == cv).map(|k| w[k]).sum();
    let cc: C64 = (0..p.m()).filter(|&k| p.positions[k].0 == rt).map(|k| w[k]).sum();
    let special_rows: Vec<usize> = p
        .positions
        .iter()
        .filter(|&&(_, j)| j == cu || j == cv)
        .map(|&(i, _)| i)
        .chain(std::iter::once(rt))
        .collect();
    let special_cols: Vec<usize> = p
        .positions
        .iter()
        .filter(|&&(i, _)| i == rt)
        .map(|&(_, j)| j)
        .chain([cu, cv])
        .collect();
    let others: Vec<usize> = (0..p.m())
        .filter(|&k| !special_rows.contains(&p.positions[k].0) && !special_cols.contains(&p.positions[k].1))
        .collect();
    for attempt in 0..=others.len().min(4) {
        let l1: C64 = (0..p.n).filter(|i| !special_rows.contains(i)).map(|i| s.x[i]).sum();
        let l2: C64 = (0..p.q).filter(|j| !special_cols.contains(j)).map(|j| s.z[j]).sum();
        let mut found: Option<Sol> = None;
        let base = s.clone();
        let solved = solve_two_factor(a, b, cc, l1, l2, lam, field, &mut |u, v, t| {
            let mut cand = base.clone();
            set_col_center(&mut cand, p, w, cu, u);
            set_col_center(&mut cand, p, w, cv, v);
            set_row_center(&mut cand, p, w, rt, t);
            if check_e(p, w, lam, &cand) {
                found = Some(cand);
                true
            } else {
                false
            }
        });
        if solved {
            return found;
        }
        if attempt < others.len() {
            scale_component(&mut s, p, w, others[attempt]);
        }
    }
    None
}

fn repeated_pairs(p: &Pattern, w: &[C64], lam: C64, field: Field) -> Option<Sol> {
    let flags = check_c2(p);
    if flags.get(4) {
        let cols = multi_cols(p);
        if let (Some(&rt), true) = (multi_rows(p).first(), cols.len() >= 2) {
            if let Some(s) = three_stars(p, w, lam, cols[0], cols[1], rt, field) {
                return Some(s);
            }
        }
    }
    if flags.get(3) {
        return repeated_pairs_transposed(p, w, lam, field);
    }
    None
}

fn repeated_pairs_transposed(p: &Pattern, w: &[C64], lam: C64, field: Field) -> Option<Sol> {
    let t = p.transposed();
    let cols = multi_cols(&t);
    let rt = *multi_rows(&t).first()?;
    if cols.len() < 2 {
        return None;
    }
    three_stars(&t, w, lam, cols[0], cols[1], rt, field).map(Sol::swapped)
}

fn isolated_position(p: &Pattern, w: &[C64], lam: C64, field: Field) -> Option<Sol> {
    if p.m() < 2 {
        return None;
    }
    let ks = p.positions.iter().position(|&(i, j)| p.row_count(i) == 1 && p.col_count(j) == 1)?;
    let cu = *multi_cols(p).first()?;
    let rt = *multi_rows(p).first()?;
    three_stars(p, w, lam, cu, p.positions[ks].1, rt, field)
}

/// Cross pattern reconstruction: with `z_s`, `x_r` fixed, the arms of
/// `y°` determine every other entry.
fn cross_fill(p: &Pattern, arms: &CrossArms, y0: &[C64], xr: C64, zs: C64) -> Sol {
    let mut z = vec![re(0.0); p.q];
    let mut x = vec![re(0.0); p.n];
    z[arms.s] = zs;
    x[arms.r] = xr;
    for &k in &arms.first {
        z[p.positions[k].1] = y0[k] / xr;
    }
    for &k in &arms.second {
        x[p.positions[k].0] = y0[k] / zs;
    }
    Sol { z, x }
}

fn arm_sum(arm: &[usize], v: &[C64]) -> C64 {
    arm.iter().map(|&k| v[k]).sum()
}

fn all_zero(arm: &[usize], v: &[C64], eps: f64) -> bool {
    arm.iter().all(|&k| v[k].norm() <= eps)
}

/// Range membership for the real cross pattern: when `4 α̃1 α̃2 > 1`, `y` is
/// reachable iff an arm sum is nonzero or an arm vanishes. `y` is in pattern
/// order with the first `split` entries forming the row arm.
pub fn case3_real_range_test(y: &[f64], split: usize, alpha_t1: f64, alpha_t2: f64) -> bool {
    if 4.0 * alpha_t1 * alpha_t2 <= 1.0 {
        return true;
    }
    let eps = 1e-12 * y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let (first, second) = y.split_at(split);
    let s1: f64 = first.iter().sum();
    let s2: f64 = second.iter().sum();
    s1.abs() > eps
        || s2.abs() > eps
        || first.iter().all(|v| v.abs() <= eps)
        || second.iter().all(|v| v.abs() <= eps)
}

/// Coefficients `[c0, c1, c2]` of `f(ρ) = c2 ρ² + c1 ρ + c0` for the real
/// cross pattern. A real `ρ ≠ 0` with `f(ρ) ≥ 0` is what a solution needs.
pub fn rho_polynomial(alpha_t1: f64, alpha_t2: f64, y_t1: f64, y_t2: f64) -> [f64; 3] {
    [
        -4.0 * y_t1 * y_t2,
        -4.0 * (y_t1 * alpha_t2 + y_t2 * alpha_t1),
        1.0 - 4.0 * alpha_t1 * alpha_t2,
    ]
}

/// `y` rearranged so the row arm comes first, for [`case3_real_range_test`].
pub fn cross_order(arms: &CrossArms, y: &[C64]) -> Vec<C64> {
    arms.first.iter().chain(arms.second.iter()).map(|&k| y[k]).collect()
}

fn cross_invertible(p: &Pattern, alpha: &[C64], y: &[C64], field: Field) -> Result<Sol, BilinearError> {
    let arms = cross_arms(p).ok_or_else(|| BilinearError::UnsupportedPattern("not a cross pattern".into()))?;
    let (a1, a2) = (arm_sum(&arms.first, alpha), arm_sum(&arms.second, alpha));
    let at = a1 + a2;
    let (y1, y2) = (arm_sum(&arms.first, y), arm_sum(&arms.second, y));
    let scale = inf_norm(y).max(1.0);
    let eps = 1e-12 * scale;
    let lam_of = |rho: C64| rho * (at - re(1.0)) + y1 + y2;

    if field == Field::Real && 4.0 * a1.re * a2.re > 1.0 && y1.norm() <= eps && y2.norm() <= eps {
        // Only y with a vanishing arm is reachable; then y° = y and λ = 0.
        if all_zero(&arms.first, y, eps) {
            let mut s = cross_fill(p, &arms, y, re(1.0), re(1.0));
            s.x[arms.r] = re(0.0);
            for &k in &arms.first {
                s.z[p.positions[k].1] = re(0.0);
            }
            s.z[p.positions[arms.first[0]].1] = -s.z[arms.s];
            return Ok(s);
        }
        if all_zero(&arms.second, y, eps) {
            let mut s = cross_fill(p, &arms, y, re(1.0), re(1.0));
            s.z[arms.s] = re(0.0);
            for &k in &arms.second {
                s.x[p.positions[k].0] = re(0.0);
            }
            s.x[p.positions[arms.second[0]].0] = -s.x[arms.r];
            return Ok(s);
        }
        return Err(BilinearError::NotInRange);
    }

    let mut rhos: Vec<f64> = Vec::new();
    let [_, f1, f2] = rho_polynomial(a1.re, a2.re, y1.re, y2.re);
    if field == Field::Real && f2.abs() > 1e-15 {
        // Vertex of f: the maximizer when f opens downward.
        rhos.push(-f1 / (2.0 * f2));
    }
    rhos.extend(powers(true).take(80));
    rhos.extend(powers(false).skip(2).take(40));
    for rho in rhos.into_iter().map(re) {
        let o1 = y1 + rho * a1;
        let o2 = y2 + rho * a2;
        let local = (rho.norm_sqr() + (o1 * o2).norm()).max(1.0);
        for pp in quadratic_roots(re(1.0), rho, o1 * o2, field, 1e-13 * local) {
            if pp.norm() <= 1e-12 * local.sqrt() {
                continue;
            }
            let y0: Vec<C64> = y.iter().zip(alpha).map(|(v, a)| v + rho * a).collect();
            let s = cross_fill(p, &arms, &y0, pp, re(1.0));
            if check_e(p, &y0, lam_of(rho), &s) {
                return Ok(s);
            }
        }
    }
    let yr: Vec<f64> = cross_order(&arms, y).iter().map(|v| v.re).collect();
    if field == Field::Real && !case3_real_range_test(&yr, arms.first.len(), a1.re, a2.re) {
        return Err(BilinearError::NotInRange);
    }
    Err(BilinearError::NumericalFailure { residual: f64::NAN })
}

fn cross_singular(p: &Pattern, alpha: &[C64], y: &[C64], field: Field) -> Result<Sol, BilinearError> {
    let arms = cross_arms(p).ok_or_else(|| BilinearError::UnsupportedPattern("not a cross pattern".into()))?;
    let m = p.m();
    let lam: C64 = sum(y);
    let av = CVec::from_column_slice(alpha);
    // Particular solution of (I - α1ᵀ) y' = y - αλ, orthogonal to α.
    let mut yp = CVec::from_fn(m, |k, _| y[k] - alpha[k] * lam);
    let aa = av.dotc(&av);
    yp -= &av * (av.dotc(&yp) / aa);
    let yp: Vec<C64> = yp.iter().copied().collect();
    let (a1, a2) = (arm_sum(&arms.first, alpha), arm_sum(&arms.second, alpha));
    let (p1, p2) = (arm_sum(&arms.first, &yp), arm_sum(&arms.second, &yp));
    // The defining equation is symmetric in (arm 1, x_r) <-> (arm 2, z_s);
    // divide by the larger arm sum.
    let swap = a2.norm() < a1.norm();
    let (b1, c1, b2, c2) = if swap { (p2, a2, p1, a1) } else { (p1, a1, p2, a2) };
    let scale = inf_norm(y).max(1.0);
    let eps = 1e-12 * scale;
    let one = re(1.0);

    let mut tries: Vec<(C64, C64, C64)> = Vec::new();
    if lam.norm() <= eps {
        tries.push((-(b2 + one) / c2, one, one));
    } else {
        let gap = b1 - lam - c1 * b2 / c2;
        if gap.norm() > 1e-9 * scale {
            tries.push((-b2 / c2, one, -gap));
        }
        let r = c1 / c2;
        let mut betas = vec![-lam * re(0.5)];
        betas.extend(powers(true).take(80).map(re));
        for beta in betas {
            let rho = (beta - b2) / c2;
            let local = (beta.norm_sqr() * (one + r).norm_sqr() + (beta * (lam + beta * r)).norm()).max(1.0);
            for xr in quadratic_roots(one, beta * (one + r), beta * (lam + beta * r), field, 1e-13 * local) {
                if xr.norm() > 1e-12 * local.sqrt() {
                    tries.push((rho, xr, one));
                }
            }
        }
    }
    for (rho, xr_role, zs_role) in tries {
        let (xr, zs) = if swap { (zs_role, xr_role) } else { (xr_role, zs_role) };
        let y0: Vec<C64> = yp.iter().zip(alpha).map(|(v, a)| v + rho * a).collect();
        let s = cross_fill(p, &arms, &y0, xr, zs);
        if check_e(p, &y0, lam, &s) {
            return Ok(s);
        }
    }
    Err(BilinearError::NumericalFailure { residual: f64::NAN })
}

fn row_column(p: &Pattern, y: &[C64]) -> Sol {
    let (i0, j0) = p.positions[0];
    let mut z = vec![re(0.0); p.q];
    let mut x = vec![re(0.0); p.n];
    if p.positions.iter().all(|pos| pos.0 == i0) {
        x[i0] = re(1.0);
        for (k, &(_, j)) in p.positions.iter().enumerate() {
            z[j] = y[k];
        }
    } else {
        z[j0] = re(1.0);
        for (k, &(i, _)) in p.positions.iter().enumerate() {
            x[i] = y[k];
        }
    }
    Sol { z, x }
}

/// The branch [`construct_witness`] would use, or why none applies.
pub fn select_branch(p: &Pattern) -> Result<Branch, BilinearError> {
    if !p.is_valid() || p.m() == 0 {
        return Err(BilinearError::UnsupportedPattern("invalid pattern".into()));
    }
    if pattern::is_single_row_or_column(p) {
        return Ok(Branch::RowColumn);
    }
    let alpha = match &p.remainder {
        Remainder::Heterogeneous => return Err(BilinearError::UnsupportedPattern("heterogeneous remainder".into())),
        Remainder::AllZero => None,
        Remainder::SingleL0 { alpha } => Some(alpha),
    };
    if !check_c1(p) {
        return Err(BilinearError::UnsupportedPattern("C1 fails".into()));
    }
    let Some(alpha) = alpha else { return Ok(Branch::ZeroPattern) };
    let flags = check_c2(p);
    let s: C64 = alpha.iter().sum();
    if (re(1.0) - s).norm() > SUM_ONE_TOL {
        if flags.any() {
            return Ok(Branch::SumNotOne);
        }
        return if cross_arms(p).is_some() {
            Ok(Branch::CrossInvertible)
        } else {
            Err(BilinearError::UnsupportedPattern("no C2 flag and no case class".into()))
        };
    }
    if flags.get(1) || flags.get(2) {
        Ok(Branch::FreeIndex)
    } else if flags.get(5) || flags.get(6) {
        Ok(Branch::DistinctIndices)
    } else if flags.get(3) || flags.get(4) {
        Ok(Branch::RepeatedPairs)
    } else if flags.get(7) {
        Ok(Branch::IsolatedPosition)
    } else if cross_arms(p).is_some() {
        Ok(Branch::CrossSingular)
    } else {
        Err(BilinearError::UnsupportedPattern("no C2 flag and no case class".into()))
    }
}

fn residual_of(p: &Pattern, y: &[C64], z: &CVec, x: &CVec) -> Result<f64, BilinearError> {
    let yv = CVec::from_column_slice(y);
    let out = match &p.remainder {
        Remainder::Heterogeneous => {
            // Only reached by the row/column shortcut, whose support avoids
            // every non-selected position.
            let e = build_e(p);
            let v = kron_vec(z, x);
            let outside: f64 = (0..p.n * p.q)
                .filter(|&pp| !p.positions.contains(&(pp % p.n, pp / p.n)))
                .map(|pp| v[pp].norm())
                .fold(0.0, f64::max);
            if outside > 0.0 {
                return Ok(f64::INFINITY);
            }
            e * v
        }
        _ => ahat_for(p)? * kron_vec(z, x),
    };
    Ok(linalg::norm2(&(out - yv)))
}

/// Constructs `(z, x)` with `Â (z ⊗ x) = y`, choosing the branch with
/// [`select_branch`].
pub fn construct_witness(p: &Pattern, y: &CVec, field: Field) -> Result<Witness, BilinearError> {
    let branch = select_branch(p)?;
    construct_witness_in(branch, p, y, field)
}

/// Runs one specific construction. Fails with `UnsupportedPattern` when the
/// pattern lies outside that construction's domain.
pub fn construct_witness_in(branch: Branch, p: &Pattern, y: &CVec, field: Field) -> Result<Witness, BilinearError> {
    let m = p.m();
    if y.len() != m {
        return Err(BilinearError::DimMismatch(format!("y has length {}, expected {m}", y.len())));
    }
    if field == Field::Real && y.iter().any(|v| v.im != 0.0) {
        return Err(BilinearError::DimMismatch("complex y over the real field".into()));
    }
    let unsupported = || BilinearError::UnsupportedPattern(format!("{branch:?} does not apply"));
    let yv: Vec<C64> = y.iter().copied().collect();
    let alpha = p.remainder.alpha(m);
    let sum_alpha: Option<C64> = alpha.as_ref().map(|a| a.iter().sum());
    let sum_is_one = sum_alpha.map(|s| (re(1.0) - s).norm() <= SUM_ONE_TOL);
    let needs = |cond: bool| if cond { Ok(()) } else { Err(unsupported()) };
    if branch != Branch::RowColumn {
        needs(check_c1(p) && alpha.is_some())?;
    }
    let lam_y = sum(&yv);

    let sol = match branch {
        Branch::RowColumn => {
            needs(pattern::is_single_row_or_column(p))?;
            row_column(p, &yv)
        }
        Branch::ZeroPattern => {
            needs(matches!(p.remainder, Remainder::AllZero))?;
            base_solution(p, &yv)
        }
        Branch::SumNotOne => {
            needs(sum_is_one == Some(false) && check_c2(p).any())?;
            let ShermanMorrison::Invertible(inv) = sherman_morrison(alpha.as_ref().unwrap()) else {
                return Err(unsupported());
            };
            let w: Vec<C64> = (&inv * y).iter().copied().collect();
            e2_solve(p, &w).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?
        }
        Branch::FreeIndex => {
            let f = check_c2(p);
            needs(sum_is_one == Some(true) && (f.get(1) || f.get(2)))?;
            free_index(p, &yv, lam_y).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?
        }
        Branch::DistinctIndices => {
            let f = check_c2(p);
            needs(sum_is_one == Some(true) && (f.get(5) || f.get(6)))?;
            if f.get(1) || f.get(2) {
                free_index(p, &yv, lam_y).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?
            } else {
                distinct_indices(p, y, f.get(6))?
            }
        }
        Branch::RepeatedPairs => {
            let f = check_c2(p);
            needs(sum_is_one == Some(true) && (f.get(3) || f.get(4)) && !f.get(5) && !f.get(6))?;
            repeated_pairs(p, &yv, lam_y, field).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?
        }
        Branch::IsolatedPosition => {
            let f = check_c2(p);
            needs(sum_is_one == Some(true) && f.get(7) && !f.get(5) && !f.get(6))?;
            isolated_position(p, &yv, lam_y, field).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?
        }
        Branch::CrossInvertible => {
            needs(sum_is_one == Some(false) && cross_arms(p).is_some())?;
            cross_invertible(p, alpha.as_ref().unwrap(), &yv, field)?
        }
        Branch::CrossSingular => {
            needs(sum_is_one == Some(true) && cross_arms(p).is_some())?;
            cross_singular(p, alpha.as_ref().unwrap(), &yv, field)?
        }
    };
    let z = CVec::from_vec(sol.z);
    let x = CVec::from_vec(sol.x);
    let (z, x) = match field {
        Field::Real => (z.map(|v| re(v.re)), x.map(|v| re(v.re))),
        Field::Complex => (z, x),
    };
    let residual = residual_of(p, &yv, &z, &x)?;
    if !(residual <= WITNESS_TOL * linalg::norm2(y).max(1.0)) {
        return Err(BilinearError::NumericalFailure { residual });
    }
    Ok(Witness { z, x, branch, residual })
}

/// All rows distinct with `m = n` (or all columns distinct with `m = q`):
/// fixing the other factor to the all-ones vector leaves a square invertible
/// linear system.
fn distinct_indices(p: &Pattern, y: &CVec, columns: bool) -> Result<Sol, BilinearError> {
    let ahat = ahat_for(p)?;
    let (n, q) = (p.n, p.q);
    let fail = BilinearError::NumericalFailure { residual: f64::NAN };
    if columns && p.m() == q {
        let ones = CVec::from_element(n, re(1.0));
        let mx = &ahat * linalg::kron_identity_vec(q, &ones);
        let z = mx.lu().solve(y).ok_or(fail)?;
        return Ok(Sol { z: z.iter().copied().collect(), x: ones.iter().copied().collect() });
    }
    if !columns && p.m() == n {
        let ones = CVec::from_element(q, re(1.0));
        let mz = &ahat * linalg::kron_vec_identity(&ones, n);
        let x = mz.lu().solve(y).ok_or(fail)?;
        return Ok(Sol { z: ones.iter().copied().collect(), x: x.iter().copied().collect() });
    }
    if p.q > 1 && rows_distinct(p) && p.m() == n {
        return distinct_indices(p, y, false);
    }
    if p.n > 1 && cols_distinct(p) && p.m() == q {
        return distinct_indices(p, y, true);
    }
    Err(BilinearError::UnsupportedPattern("distinct indices need m = n or m = q".into()))
}

/// Exact membership for a zero remainder (`Â = E`): `y` is reachable iff no
/// zero target sits on a row and a column that both carry nonzero targets,
/// and the nonzero targets admit a rank-one completion. Returns a witness or
/// `None`.
pub fn zero_pattern_membership(p: &Pattern, y: &CVec, tol: f64) -> Result<Option<(CVec, CVec)>, BilinearError> {
    if y.len() != p.m() {
        return Err(BilinearError::DimMismatch(format!("y has length {}, expected {}", y.len(), p.m())));
    }
    let eps = tol * linalg::max_abs_vec(y).max(1.0);
    let nonzero: Vec<usize> = (0..p.m()).filter(|&k| y[k].norm() > eps).collect();
    let live_row = |i: usize| nonzero.iter().any(|&k| p.positions[k].0 == i);
    let live_col = |j: usize| nonzero.iter().any(|&k| p.positions[k].1 == j);
    if (0..p.m()).any(|k| y[k].norm() <= eps && live_row(p.positions[k].0) && live_col(p.positions[k].1)) {
        return Ok(None);
    }
    let mut x: Vec<Option<C64>> = vec![None; p.n];
    let mut z: Vec<Option<C64>> = vec![None; p.q];
    // Propagate along the bipartite graph of nonzero targets; each new
    // component starts from x_i = 1.
    for &start in &nonzero {
        let (i0, _) = p.positions[start];
        if x[i0].is_some() {
            continue;
        }
        x[i0] = Some(re(1.0));
        let mut changed = true;
        while changed {
            changed = false;
            for &k in &nonzero {
                let (i, j) = p.positions[k];
                match (x[i], z[j]) {
                    (Some(xi), None) => {
                        z[j] = Some(y[k] / xi);
                        changed = true;
                    }
                    (None, Some(zj)) => {
                        x[i] = Some(y[k] / zj);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
    }
    let x = CVec::from_iterator(p.n, x.into_iter().map(|v| v.unwrap_or(re(0.0))));
    let z = CVec::from_iterator(p.q, z.into_iter().map(|v| v.unwrap_or(re(0.0))));
    let r = linalg::norm2(&(build_e(p) * kron_vec(&z, &x) - y));
    Ok((r <= WITNESS_TOL * linalg::norm2(y).max(1.0)).then_some((z, x)))
}

/// Alternating least squares for `Â (z ⊗ x) = y` from seeded random starts.
/// `Some` is a verified witness; `None` means nothing was found within the
/// budget and says nothing definite about membership. Witnesses with
/// `‖z‖ ‖x‖ > 1e6 max(1, ‖y‖)` are rejected, since the range need not be
/// closed and residuals can creep toward zero along unbounded paths.
pub fn membership_solve(
    ahat: &CMat,
    n: usize,
    q: usize,
    y: &CVec,
    field: Field,
    seed: u64,
    starts: usize,
) -> Result<Option<(CVec, CVec)>, BilinearError> {
    if ahat.ncols() != n * q || ahat.nrows() != y.len() {
        return Err(BilinearError::DimMismatch(format!(
            "Â is {}x{}, expected {}x{}",
            ahat.nrows(),
            ahat.ncols(),
            y.len(),
            n * q
        )));
    }
    let ynorm = linalg::norm2(y).max(1.0);
    let target = WITNESS_TOL * ynorm;
    let cap = 1e6 * ynorm;
    let fix = |v: CVec| match field {
        Field::Real => v.map(|z| re(z.re)),
        Field::Complex => v,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..starts {
        let mut x = CVec::from_fn(n, |_, _| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = if field == Field::Complex { rng.sample(StandardNormal) } else { 0.0 };
            c(a, b)
        });
        let mut z: CVec;
        for _ in 0..300 {
            let mx = ahat * linalg::kron_identity_vec(q, &x);
            z = fix(pinv(&mx, 1e-12) * y);
            let mz = ahat * linalg::kron_vec_identity(&z, n);
            x = fix(pinv(&mz, 1e-12) * y);
            let (nz, nx) = (linalg::norm2(&z), linalg::norm2(&x));
            if nz > 0.0 && nx > 0.0 {
                let g = (nx / nz).sqrt();
                z *= re(g);
                x /= re(g);
            }
            let r = linalg::norm2(&(ahat * kron_vec(&z, &x) - y));
            if r <= target && linalg::norm2(&z) * linalg::norm2(&x) <= cap {
                return Ok(Some((z, x)));
            }
        }
    }
    Ok(None)
}

/// Exhaustive grid search over `(z, x)` in a real box, used as an
/// independent oracle for range membership.
#[derive(Debug, Clone)]
pub struct GridOracle {
    ahat: Vec<Vec<f64>>,
    n: usize,
    q: usize,
    grid: Vec<f64>,
    tol: f64,
}

/// Upper bound on `resolution^(n+q)` accepted by [`range_oracle_grid`].
pub const GRID_POINT_LIMIT: f64 = 6e7;

/// Grid over `[lo, hi]^(n+q)` with `resolution` points per axis. Membership
/// uses the max-norm residual with tolerance `0.9 h`, `h` the grid step.
pub fn range_oracle_grid(
    ahat: &CMat,
    n: usize,
    q: usize,
    resolution: usize,
    bounds: (f64, f64),
) -> Result<GridOracle, BilinearError> {
    if ahat.ncols() != n * q {
        return Err(BilinearError::DimMismatch(format!("Â must have {} columns", n * q)));
    }
    if ahat.iter().any(|v| v.im != 0.0) {
        return Err(BilinearError::UnsupportedPattern("grid oracle is real only".into()));
    }
    if resolution < 2 || (resolution as f64).powi((n + q) as i32) > GRID_POINT_LIMIT {
        return Err(BilinearError::TooLarge(format!("{resolution}^{} grid points", n + q)));
    }
    let (lo, hi) = bounds;
    let h = (hi - lo) / (resolution - 1) as f64;
    let grid = (0..resolution).map(|k| lo + k as f64 * h).collect();
    let rows = (0..ahat.nrows()).map(|r| (0..n * q).map(|p| ahat[(r, p)].re).collect()).collect();
    Ok(GridOracle { ahat: rows, n, q, grid, tol: 0.9 * h })
}

impl GridOracle {
    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Some grid pair reaches `y` within the tolerance.
    pub fn reachable(&self, y: &[f64]) -> bool {
        self.min_residual(y, self.tol) <= self.tol
    }

    /// Smallest max-norm residual over the grid, stopping early once a value
    /// at or below `stop` is found.
    pub fn min_residual(&self, y: &[f64], stop: f64) -> f64 {
        let (n, q) = (self.n, self.q);
        let m = self.ahat.len();
        let res = self.grid.len();
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; n];
        let mut mx = vec![vec![0.0; q]; m];
        loop {
            let x: Vec<f64> = idx.iter().map(|&k| self.grid[k]).collect();
            for (r, row) in self.ahat.iter().enumerate() {
                for j in 0..q {
                    mx[r][j] = (0..n).map(|i| row[j * n + i] * x[i]).sum();
                }
            }
            let v = self.inner_min(&mx, y, best.min(f64::INFINITY));
            if v < best {
                best = v;
                if best <= stop {
                    return best;
                }
            }
            // Next x index (odometer).
            let mut d = 0;
            loop {
                if d == n {
                    return best;
                }
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Exact grid minimum over `z` of `max_r |(M z)_r - y_r|`, splitting `z`
    /// into groups of coordinates that share no row.
    fn inner_min(&self, mx: &[Vec<f64>], y: &[f64], bound: f64) -> f64 {
        let q = self.q;
        let m = mx.len();
        let mut parent: Vec<usize> = (0..q).collect();
        fn find(p: &mut Vec<usize>, a: usize) -> usize {
            let mut a = a;
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        let mut fixed = 0.0f64;
        for r in 0..m {
            let cols: Vec<usize> = (0..q).filter(|&j| mx[r][j] != 0.0).collect();
            if cols.is_empty() {
                fixed = fixed.max(y[r].abs());
            }
            for w in cols.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        if fixed >= bound {
            return fixed;
        }
        let mut total = fixed;
        let roots: Vec<usize> = {
            let mut v: Vec<usize> = (0..q).map(|j| find(&mut parent, j)).collect();
            v.sort();
            v.dedup();
            v
        };
        for root in roots {
            let group: Vec<usize> = (0..q).filter(|&j| find(&mut parent, j) == root).collect();
            let rows: Vec<usize> = (0..m).filter(|&r| group.iter().any(|&j| mx[r][j] != 0.0)).collect();
            if rows.is_empty() {
                continue;
            }
            let gmin = self.group_min(mx, y, &group, &rows);
            total = total.max(gmin);
            if total >= bound {
                return total;
            }
        }
        total
    }

    fn group_min(&self, mx: &[Vec<f64>], y: &[f64], group: &[usize], rows: &[usize]) -> f64 {
        let res = self.grid.len();
        let g = group.len();
        let mut idx = vec![0usize; g];
        let mut best = f64::INFINITY;
        loop {
            let mut worst = 0.0f64;
            for &r in rows {
                let v: f64 = group.iter().zip(&idx).map(|(&j, &k)| mx[r][j] * self.grid[k]).sum();
                worst = worst.max((v - y[r]).abs());
                if worst >= best {
                    break;
                }
            }
            best = best.min(worst);
            let mut d = 0;
            loop {
                if d == g {
                    return best;
                }
                idx[d] += 1;
                if idx[d] < res {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

/// Which set the surjectivity question is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RangeMode {
    /// The range of `(z, x) -> Â (z ⊗ x)`.
    Range,
    /// `{E (z ⊗ x) : (Σz)(Σx) = 0}`.
    SumConstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurjectivityVerdict {
    /// Backed by successful constructions on a random panel.
    Surjective { branch: Branch, panel: usize },
    /// `y` is outside the set.
    NotSurjective { y: Vec<C64> },
    /// Real cross pattern with `4 α̃1 α̃2 > 1`; `y` is an unreachable example.
    ExceptionalCaseIII { y: Vec<C64> },
}

/// `y_k = 0` and every other entry one, for the position `k` violating C1.
fn c1_counterexample(p: &Pattern) -> Option<Vec<C64>> {
    let (k, _, _) = pattern::c1_violation(p)?;
    let mut y = vec![re(1.0); p.m()];
    y[k] = re(0.0);
    Some(y)
}

/// Arm entries `(1, -1, 0, ...)` on both arms of a cross pattern.
fn cross_counterexample(arms: &CrossArms, m: usize) -> Vec<C64> {
    let mut y = vec![re(0.0); m];
    for arm in [&arms.first, &arms.second] {
        y[arm[0]] = re(1.0);
        y[arm[1]] = re(-1.0);
    }
    y
}

fn random_y(rng: &mut ChaCha8Rng, m: usize, field: Field) -> CVec {
    CVec::from_fn(m, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = if field == Field::Complex { rng.sample(StandardNormal) } else { 0.0 };
        c(a, b)
    })
}

/// Decides whether every `y` is reachable. Requires a single (possibly zero)
/// remainder unless the pattern is a single row or column; with a nonzero
/// remainder and C1 failing, no characterization applies.
pub fn surjectivity_decide(
    p: &Pattern,
    field: Field,
    mode: RangeMode,
    seed: u64,
    panel: usize,
) -> Result<SurjectivityVerdict, BilinearError> {
    let m = p.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match mode {
        RangeMode::SumConstrained => {
            if let Some(y) = c1_counterexample(p) {
                return Ok(SurjectivityVerdict::NotSurjective { y });
            }
            if !check_c2(p).any() {
                let y = match cross_arms(p) {
                    Some(arms) => cross_counterexample(&arms, m),
                    None => {
                        let mut y = vec![re(0.0); m];
                        y[0] = re(1.0);
                        y
                    }
                };
                return Ok(SurjectivityVerdict::NotSurjective { y });
            }
            for _ in 0..panel {
                let w = random_y(&mut rng, m, field);
                let s = e2_solve(p, w.as_slice()).ok_or(BilinearError::NumericalFailure { residual: f64::NAN })?;
                if !check_e(p, w.as_slice(), re(0.0), &s) {
                    return Err(BilinearError::NumericalFailure { residual: f64::NAN });
                }
            }
            let branch = if p.remainder == Remainder::AllZero { Branch::ZeroPattern } else { Branch::SumNotOne };
            Ok(SurjectivityVerdict::Surjective { branch, panel })
        }
        RangeMode::Range => {
            if !pattern::is_single_row_or_column(p) {
                if !check_c1(p) {
                    return match (&p.remainder, c1_counterexample(p)) {
                        (Remainder::AllZero, Some(y)) => Ok(SurjectivityVerdict::NotSurjective { y }),
                        _ => Err(BilinearError::UnsupportedPattern("C1 fails with a nonzero remainder".into())),
                    };
                }
                if let (Field::Real, Remainder::SingleL0 { alpha }, Some(arms)) = (field, &p.remainder, cross_arms(p)) {
                    let (a1, a2) = (arm_sum(&arms.first, alpha), arm_sum(&arms.second, alpha));
                    if !check_c2(p).any() && 4.0 * a1.re * a2.re > 1.0 {
                        return Ok(SurjectivityVerdict::ExceptionalCaseIII { y: cross_counterexample(&arms, m) });
                    }
                }
            }
            let branch = select_branch(p)?;
            for _ in 0..panel {
                let y = random_y(&mut rng, m, field);
                construct_witness_in(branch, p, &y, field)?;
            }
            Ok(SurjectivityVerdict::Surjective { branch, panel })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(n: usize, q: usize, pos: &[(usize, usize)], rem: Remainder) -> Pattern {
        Pattern::new(n, q, pos.to_vec(), rem)
    }

    fn rv(v: &[f64]) -> CVec {
        CVec::from_iterator(v.len(), v.iter().map(|&a| re(a)))
    }

    #[test]
    fn sherman_morrison_matches_inverse() {
        let alpha = vec![c(0.2, 0.1), c(-0.4, 0.0), c(0.3, 0.5)];
        let ShermanMorrison::Invertible(inv) = sherman_morrison(&alpha) else { panic!() };
        let a = CVec::from_column_slice(&alpha);
        let m = CMat::identity(3, 3) - a * CVec::from_element(3, re(1.0)).transpose();
        assert!((inv * m - CMat::identity(3, 3)).norm() < 1e-12);
        let unit = vec![re(0.5), re(0.25), re(0.25)];
        assert!(matches!(sherman_morrison(&unit), ShermanMorrison::Singular { .. }));
    }

    #[test]
    fn ahat_two_forms_agree() {
        let p = pat(2, 3, &[(0, 0), (1, 2), (0, 1)], Remainder::AllZero);
        let alpha = vec![c(0.3, -0.2), re(1.5), c(0.0, 0.7)];
        let a = assemble_ahat(&p, &alpha).unwrap();
        let av = CVec::from_column_slice(&alpha);
        let e = build_e(&p);
        let other = (CMat::identity(3, 3) - &av * CVec::from_element(3, re(1.0)).transpose()) * e
            + av * CVec::from_element(6, re(1.0)).transpose();
        assert!((a - other).norm() < 1e-12);
    }

    #[test]
    fn upper_triangular_rejects_known_point() {
        let p = pat(2, 2, &[(0, 0), (0, 1), (1, 1)], Remainder::AllZero);
        assert!(matches!(
            construct_witness(&p, &rv(&[1.0, 0.0, 1.0]), Field::Real),
            Err(BilinearError::UnsupportedPattern(_))
        ));
        let e = build_e(&p);
        let found = membership_solve(&e, 2, 2, &rv(&[1.0, 0.0, 1.0]), Field::Real, 7, 8).unwrap();
        assert!(found.is_none());
        let found = membership_solve(&e, 2, 2, &rv(&[1.0, 2.0, 1.0]), Field::Real, 7, 8).unwrap();
        assert!(found.is_some());
    }

    #[test]
    fn cross_counterexample_for_exceptional_case() {
        let p = pat(
            3,
            3,
            &[(1, 0), (1, 2), (0, 1), (2, 1)],
            Remainder::SingleL0 { alpha: vec![re(0.5); 4] },
        );
        let v = surjectivity_decide(&p, Field::Real, RangeMode::Range, 1, 10).unwrap();
        let SurjectivityVerdict::ExceptionalCaseIII { y } = v else { panic!("{v:?}") };
        let yv = CVec::from_vec(y);
        assert_eq!(construct_witness(&p, &yv, Field::Real), Err(BilinearError::NotInRange));
        let v = surjectivity_decide(&p, Field::Complex, RangeMode::Range, 1, 10).unwrap();
        assert!(matches!(v, SurjectivityVerdict::Surjective { branch: Branch::CrossInvertible, .. }));
    }

    #[test]
    fn grid_oracle_on_upper_triangular() {
        let p = pat(2, 2, &[(0, 0), (0, 1), (1, 1)], Remainder::AllZero);
        let g = range_oracle_grid(&build_e(&p), 2, 2, 21, (-2.0, 2.0)).unwrap();
        assert!(g.reachable(&[2.0, 2.0, -2.0]));
        assert!(!g.reachable(&[2.0, 0.0, 2.0]));
        assert!(g.reachable(&[0.0, 0.0, 2.0]));
        assert!(matches!(
            range_oracle_grid(&build_e(&p), 2, 2, 2000, (-2.0, 2.0)),
            Err(BilinearError::TooLarge(_))
        ));
    }
}
