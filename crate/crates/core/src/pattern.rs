//! Placement patterns of independent blocks, the combinatorial conditions C1
//! and C2.1..C2.7, the exceptional case classes, and the resulting verdict on
//! whether positivity and complete positivity coincide.
//!
//! Positions are 0-based `(i, j)` with `i < n` (block row) and `j < q`
//! (block column).

use serde::{Deserialize, Serialize};

use crate::hill::{self, HillError};
use crate::linalg::{max_abs, re, Field, C64};
use crate::mapmodel::MapSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Remainder {
    /// Every non-selected block vanishes.
    AllZero,
    /// Every non-selected block equals `L0 = Σ α_k L_k`.
    SingleL0 { alpha: Vec<C64> },
    /// Non-selected blocks differ from each other.
    Heterogeneous,
}

impl Remainder {
    /// The common coefficient vector, zero for [`Remainder::AllZero`].
    pub fn alpha(&self, m: usize) -> Option<Vec<C64>> {
        match self {
            Remainder::AllZero => Some(vec![re(0.0); m]),
            Remainder::SingleL0 { alpha } => Some(alpha.clone()),
            Remainder::Heterogeneous => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub n: usize,
    pub q: usize,
    pub positions: Vec<(usize, usize)>,
    pub remainder: Remainder,
}

impl Pattern {
    pub fn new(n: usize, q: usize, positions: Vec<(usize, usize)>, remainder: Remainder) -> Pattern {
        Pattern { n, q, positions, remainder }
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn row_count(&self, i: usize) -> usize {
        self.positions.iter().filter(|p| p.0 == i).count()
    }

    pub fn col_count(&self, j: usize) -> usize {
        self.positions.iter().filter(|p| p.1 == j).count()
    }

    /// Swaps the roles of rows and columns.
    pub fn transposed(&self) -> Pattern {
        Pattern {
            n: self.q,
            q: self.n,
            positions: self.positions.iter().map(|&(i, j)| (j, i)).collect(),
            remainder: self.remainder.clone(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        self.positions.iter().all(|&(i, j)| i < self.n && j < self.q && seen.insert((i, j)))
    }
}

/// Classifies the non-selected blocks. Blocks are compared at
/// `tol * max(1, max|L|)`.
pub fn detect_pattern(spec: &MapSpec, sel: &[(usize, usize)], tol: f64) -> Result<Pattern, HillError> {
    let (n, q) = (spec.n(), spec.q());
    let rest: Vec<(usize, usize)> =
        hill::row_major_order(n, q).into_iter().filter(|p| !sel.contains(p)).collect();
    let t = tol * max_abs(spec.matricization()).max(1.0);
    let remainder = if rest.is_empty() {
        Remainder::AllZero
    } else {
        let first = spec.block(rest[0].0, rest[0].1);
        let same = rest.iter().all(|&(i, j)| max_abs(&(spec.block(i, j) - &first)) <= t);
        if !same {
            Remainder::Heterogeneous
        } else if max_abs(&first) <= t {
            Remainder::AllZero
        } else {
            let exp = hill::expansion_coefficients(spec, sel, tol)?;
            let p0 = rest[0].1 * n + rest[0].0;
            Remainder::SingleL0 { alpha: exp.alpha.column(p0).iter().copied().collect() }
        }
    };
    Ok(Pattern::new(n, q, sel.to_vec(), remainder))
}

/// For each `k`, the column `j_k` or the row `i_k` is used by no other position.
pub fn check_c1(p: &Pattern) -> bool {
    c1_violation(p).is_none()
}

/// A position `k` whose row and column are both shared, with `l1` sharing the
/// row and `l2` sharing the column.
pub fn c1_violation(p: &Pattern) -> Option<(usize, usize, usize)> {
    for (k, &(i, j)) in p.positions.iter().enumerate() {
        let l1 = p.positions.iter().enumerate().find(|&(l, pos)| l != k && pos.0 == i).map(|x| x.0);
        let l2 = p.positions.iter().enumerate().find(|&(l, pos)| l != k && pos.1 == j).map(|x| x.0);
        if let (Some(l1), Some(l2)) = (l1, l2) {
            return Some((k, l1, l2));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2Flags(pub [bool; 7]);

impl C2Flags {
    /// Flag `C2.k` for `k` in `1..=7`.
    pub fn get(&self, k: usize) -> bool {
        self.0[k - 1]
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }

    /// Numbers of the flags that hold.
    pub fn holding(&self) -> Vec<usize> {
        (1..=7).filter(|&k| self.get(k)).collect()
    }
}

pub fn check_c2(p: &Pattern) -> C2Flags {
    let (n, q, m) = (p.n, p.q, p.m());
    let rows_multi = (0..n).filter(|&i| p.row_count(i) >= 2).count();
    let cols_multi = (0..q).filter(|&j| p.col_count(j) >= 2).count();
    let rows_distinct = (0..n).all(|i| p.row_count(i) <= 1);
    let cols_distinct = (0..q).all(|j| p.col_count(j) <= 1);
    let isolated = p.positions.iter().any(|&(i, j)| p.row_count(i) == 1 && p.col_count(j) == 1);
    C2Flags([
        (0..n).any(|i| p.row_count(i) == 0),
        (0..q).any(|j| p.col_count(j) == 0),
        rows_multi >= 2,
        cols_multi >= 2,
        rows_distinct && !(q == 1 && m == n),
        cols_distinct && !(n == 1 && m == q),
        isolated && m > 1,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseClass {
    /// `q = 1`, `m = n`.
    I,
    /// `n = 1`, `m = q`.
    II,
    /// Cross around the empty pivot `(r, s)`: all of row `r` and column `s`
    /// except the pivot, with `n, q > 2`.
    III { r: usize, s: usize },
}

/// The pivot and the two arms of a cross pattern: `first` lists the indices
/// `k` in row `r` by increasing column, `second` those in column `s` by
/// increasing row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossArms {
    pub r: usize,
    pub s: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

pub fn cross_arms(p: &Pattern) -> Option<CrossArms> {
    let (n, q, m) = (p.n, p.q, p.m());
    if n <= 2 || q <= 2 || m != n + q - 2 || !p.is_valid() {
        return None;
    }
    let r = (0..n).find(|&i| p.row_count(i) == q - 1)?;
    let s = (0..q).find(|&j| p.col_count(j) == n - 1)?;
    if p.positions.contains(&(r, s)) {
        return None;
    }
    let mut first: Vec<usize> = (0..m).filter(|&k| p.positions[k].0 == r).collect();
    let mut second: Vec<usize> = (0..m).filter(|&k| p.positions[k].1 == s).collect();
    if first.len() != q - 1 || second.len() != n - 1 {
        return None;
    }
    first.sort_by_key(|&k| p.positions[k].1);
    second.sort_by_key(|&k| p.positions[k].0);
    Some(CrossArms { r, s, first, second })
}

pub fn classify_case(p: &Pattern) -> Option<CaseClass> {
    if !p.is_valid() || p.m() == 0 {
        return None;
    }
    if p.q == 1 && p.m() == p.n {
        return Some(CaseClass::I);
    }
    if p.n == 1 && p.m() == p.q {
        return Some(CaseClass::II);
    }
    cross_arms(p).map(|a| CaseClass::III { r: a.r, s: a.s })
}

/// `(Σ_{first} α_k, Σ_{second} α_k)`.
pub fn arm_sums(arms: &CrossArms, alpha: &[C64]) -> (C64, C64) {
    let s1 = arms.first.iter().map(|&k| alpha[k]).sum();
    let s2 = arms.second.iter().map(|&k| alpha[k]).sum();
    (s1, s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoincideReason {
    /// C1 with a single remainder block and some C2 flag or case class.
    MainTheorem,
    /// C1 with all non-selected blocks zero.
    ZeroPattern,
    /// All selected blocks share one block row or one block column.
    RowColumn,
    /// Real cross pattern with `4 α̃1 α̃2 > 1`.
    CaseIIIRealExceptional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnknownReason {
    C1Fails,
    HeterogeneousRemainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    GuaranteedCoincide(CoincideReason),
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn coincides(&self) -> bool {
        matches!(self, Verdict::GuaranteedCoincide(_))
    }
}

pub fn is_single_row_or_column(p: &Pattern) -> bool {
    let Some(&(i0, j0)) = p.positions.first() else { return false };
    p.positions.iter().all(|x| x.0 == i0) || p.positions.iter().all(|x| x.1 == j0)
}

pub fn theorem_verdict(p: &Pattern, field: Field) -> Verdict {
    if is_single_row_or_column(p) {
        return Verdict::GuaranteedCoincide(CoincideReason::RowColumn);
    }
    if !check_c1(p) {
        return Verdict::Unknown(UnknownReason::C1Fails);
    }
    match &p.remainder {
        Remainder::Heterogeneous => Verdict::Unknown(UnknownReason::HeterogeneousRemainder),
        Remainder::AllZero => Verdict::GuaranteedCoincide(CoincideReason::ZeroPattern),
        Remainder::SingleL0 { alpha } => {
            if field == Field::Real && !check_c2(p).any() {
                if let Some(arms) = cross_arms(p) {
                    let (a1, a2) = arm_sums(&arms, alpha);
                    if 4.0 * a1.re * a2.re > 1.0 {
                        return Verdict::GuaranteedCoincide(CoincideReason::CaseIIIRealExceptional);
                    }
                }
            }
            Verdict::GuaranteedCoincide(CoincideReason::MainTheorem)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapVerdict {
    pub verdict: Verdict,
    pub pattern: Pattern,
    pub selections_tried: usize,
}

/// Up to `limit` distinct greedy orders: row-major, column-major, their
/// reversals and their cyclic rotations.
pub fn candidate_orders(n: usize, q: usize, limit: usize) -> Vec<Vec<(usize, usize)>> {
    let rm = hill::row_major_order(n, q);
    let cm: Vec<(usize, usize)> = (0..q).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
    let mut bases = vec![rm.clone(), cm.clone()];
    bases.push(rm.iter().rev().copied().collect());
    bases.push(cm.iter().rev().copied().collect());
    let mut out = Vec::new();
    for shift in 0..n * q {
        for b in &bases {
            let mut o = b.clone();
            o.rotate_left(shift);
            if !out.contains(&o) {
                out.push(o);
            }
            if out.len() >= limit {
                return out;
            }
        }
    }
    out
}

/// Tries up to `max_selections` greedy selections and returns the first that
/// yields a guaranteed verdict, or the row-major one otherwise. When no
/// selection succeeds, `HeterogeneousRemainder` is preferred over `C1Fails` if
/// some selection satisfied C1.
pub fn verdict_for_map(spec: &MapSpec, tol: f64, max_selections: usize) -> Result<MapVerdict, HillError> {
    let mut seen: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut fallback: Option<(Verdict, Pattern)> = None;
    for order in candidate_orders(spec.n(), spec.q(), max_selections.max(1)) {
        let sel = hill::select_in_order(spec, &order, tol)?;
        let mut key = sel.clone();
        key.sort();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let pat = detect_pattern(spec, &sel, tol)?;
        let v = theorem_verdict(&pat, spec.field());
        if v.coincides() {
            return Ok(MapVerdict { verdict: v, pattern: pat, selections_tried: seen.len() });
        }
        let better = match &fallback {
            None => true,
            Some((Verdict::Unknown(UnknownReason::C1Fails), _)) => v == Verdict::Unknown(UnknownReason::HeterogeneousRemainder),
            _ => false,
        };
        if better {
            fallback = Some((v, pat));
        }
        if seen.len() >= max_selections {
            break;
        }
    }
    let (verdict, pattern) = fallback.expect("at least one selection");
    Ok(MapVerdict { verdict, pattern, selections_tried: seen.len() })
}
