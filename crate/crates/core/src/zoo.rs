//! Named example maps and seeded generators of star-linear maps with a
//! prescribed Hill pattern.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::{assemble_ahat, select_branch, Branch};
use crate::linalg::{c, re, CMat, Field, C64};
use crate::mapmodel::{MapError, MapSpec};
use crate::pattern::{Pattern, Remainder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZooError {
    #[error("parameter {0} must be real")]
    FieldViolation(String),
    #[error("pattern violation: {0}")]
    PatternViolation(String),
    #[error("infeasible pattern: {0}")]
    InfeasiblePattern(String),
    #[error("Hill spectrum must be nonzero with one entry per position: {0}")]
    RankDeficient(String),
    #[error("unknown zoo entry or parameter: {0}")]
    Unknown(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Free parameters of the 2x2 block examples. Entries forced by
/// star-linearity are derived, never supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub a1: C64,
    pub b1: C64,
    pub b2: C64,
    pub b3: C64,
    pub c1: C64,
    pub c2: C64,
    pub c3: C64,
}

impl Default for BlockParams {
    fn default() -> Self {
        let z = re(0.0);
        BlockParams { a1: z, b1: z, b2: z, b3: z, c1: z, c2: z, c3: z }
    }
}

impl BlockParams {
    pub fn set(&mut self, name: &str, v: C64) -> Result<(), ZooError> {
        let slot = match name {
            "a1" => &mut self.a1,
            "b1" => &mut self.b1,
            "b2" => &mut self.b2,
            "b3" => &mut self.b3,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "c3" => &mut self.c3,
            _ => return Err(ZooError::Unknown(name.to_string())),
        };
        *slot = v;
        Ok(())
    }
}

fn require_real(name: &str, v: C64) -> Result<(), ZooError> {
    if v.im != 0.0 {
        return Err(ZooError::FieldViolation(name.to_string()));
    }
    Ok(())
}

fn require_field(field: Field, vals: &[(&str, C64)]) -> Result<(), ZooError> {
    for &(name, v) in vals {
        if field == Field::Real {
            require_real(name, v)?;
        }
    }
    Ok(())
}

/// `V -> Vᵀ` on `n x n` matrices.
pub fn transpose_map(n: usize) -> Result<MapSpec, ZooError> {
    if n < 2 {
        return Err(ZooError::PatternViolation("transpose map needs n >= 2".into()));
    }
    let mut choi = CMat::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            // Block (i, j) is the image of E_ij, namely E_ji.
            choi[(i * n + j, j * n + i)] = re(1.0);
        }
    }
    Ok(MapSpec::from_choi(n, n, Field::Real, choi)?)
}

/// The upper triangular 2x2 block family; `a2 = conj(b1)`, `a3 = conj(c1)`,
/// `b3 = conj(c2)` are forced.
pub fn upper_triangular_2x2(field: Field, p: &BlockParams) -> Result<MapSpec, ZooError> {
    for (name, v) in [("a1", p.a1), ("b2", p.b2), ("c3", p.c3)] {
        require_real(name, v)?;
    }
    require_field(field, &[("b1", p.b1), ("c1", p.c1), ("c2", p.c2)])?;
    let z = re(0.0);
    let (a2, a3, b3) = (p.b1.conj(), p.c1.conj(), p.c2.conj());
    #[rustfmt::skip]
    let l = CMat::from_row_slice(4, 4, &[
        p.a1, p.b1, a2, p.b2,
        z, p.c1, z, p.c2,
        z, z, a3, b3,
        z, z, z, p.c3,
    ]);
    Ok(MapSpec::from_matricization(2, 2, field, l)?)
}

/// The 2x2 block Toeplitz family `[[L1, L2], [L3, L1]]`; `a2 = conj(b1)`,
/// `a3 = conj(c1)`, `c2 = conj(b3)` are forced.
pub fn toeplitz_2x2(field: Field, p: &BlockParams) -> Result<MapSpec, ZooError> {
    for (name, v) in [("a1", p.a1), ("b2", p.b2), ("c3", p.c3)] {
        require_real(name, v)?;
    }
    require_field(field, &[("b1", p.b1), ("b3", p.b3), ("c1", p.c1)])?;
    let (a2, a3, c2) = (p.b1.conj(), p.c1.conj(), p.b3.conj());
    #[rustfmt::skip]
    let l = CMat::from_row_slice(4, 4, &[
        p.a1, p.b1, a2, p.b2,
        p.c1, p.a1, c2, a2,
        a3, p.b3, p.a1, p.b1,
        p.c3, a3, p.c1, p.a1,
    ]);
    Ok(MapSpec::from_matricization(2, 2, field, l)?)
}

/// Hill matrix with the given spectrum, conjugated by a seeded random
/// orthogonal (real) or unitary (complex) matrix.
pub fn random_hermitian(spectrum: &[f64], field: Field, rng: &mut ChaCha8Rng) -> CMat {
    let m = spectrum.len();
    let g = CMat::from_fn(m, m, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = if field == Field::Complex { rng.sample(StandardNormal) } else { 0.0 };
        c(a, b)
    });
    let u = g.qr().q();
    let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(m, spectrum.iter().map(|&s| re(s))));
    let h = &u * d * u.adjoint();
    let h = (&h + h.adjoint()) * re(0.5);
    match field {
        Field::Real => h.map(|v| re(v.re)),
        Field::Complex => h,
    }
}

/// `Λ = Â* Hᵀ Â`.
pub fn choi_from_hill(ahat: &CMat, h: &CMat) -> CMat {
    let lam = ahat.adjoint() * h.transpose() * ahat;
    (&lam + lam.adjoint()) * re(0.5)
}

/// A map whose blocks follow `pattern`: `Â` in the single-remainder form and
/// `H` Hermitian with the given spectrum.
pub fn random_star_linear(
    pattern: &Pattern,
    spectrum: &[f64],
    field: Field,
    seed: u64,
) -> Result<MapSpec, ZooError> {
    if !pattern.is_valid() || pattern.m() == 0 {
        return Err(ZooError::InfeasiblePattern("positions must be distinct and in range".into()));
    }
    let m = pattern.m();
    if spectrum.len() != m || spectrum.iter().any(|&s| s == 0.0) {
        return Err(ZooError::RankDeficient(format!("{} entries for m = {m}", spectrum.len())));
    }
    let alpha = pattern
        .remainder
        .alpha(m)
        .ok_or_else(|| ZooError::InfeasiblePattern("heterogeneous remainder".into()))?;
    if field == Field::Real && alpha.iter().any(|a| a.im != 0.0) {
        return Err(ZooError::FieldViolation("alpha".into()));
    }
    let ahat = assemble_ahat(pattern, &alpha).map_err(|e| ZooError::InfeasiblePattern(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hermitian(spectrum, field, &mut rng);
    Ok(MapSpec::from_choi(pattern.n, pattern.q, field, choi_from_hill(&ahat, &h))?)
}

/// Positions `(k1, k2, k3, k4)` forming a 2x2 grid: two rows times two
/// columns.
pub fn find_grid(positions: &[(usize, usize)]) -> Option<[usize; 4]> {
    let m = positions.len();
    for k1 in 0..m {
        for k4 in 0..m {
            let (i1, j1) = positions[k1];
            let (i3, j2) = positions[k4];
            if i1 >= i3 || j1 == j2 {
                continue;
            }
            let k2 = positions.iter().position(|&p| p == (i1, j2));
            let k3 = positions.iter().position(|&p| p == (i3, j1));
            if let (Some(k2), Some(k3)) = (k2, k3) {
                return Some([k1, k2, k3, k4]);
            }
        }
    }
    None
}

/// Positive but not completely positive map on a pattern containing a 2x2
/// grid: the transpose Hill block on the grid and a seeded positive definite
/// block elsewhere, with zero remainder.
pub fn embedded_full_block(n: usize, q: usize, positions: &[(usize, usize)], seed: u64) -> Result<MapSpec, ZooError> {
    let grid = find_grid(positions).ok_or_else(|| ZooError::PatternViolation("no 2x2 grid of positions".into()))?;
    let mut order: Vec<(usize, usize)> = grid.iter().map(|&k| positions[k]).collect();
    order.extend(positions.iter().enumerate().filter(|(k, _)| !grid.contains(k)).map(|(_, &p)| p));
    let p = Pattern::new(n, q, order, Remainder::AllZero);
    if !p.is_valid() {
        return Err(ZooError::InfeasiblePattern("positions must be distinct and in range".into()));
    }
    let m = p.m();
    let ahat = assemble_ahat(&p, &vec![re(0.0); m]).map_err(|e| ZooError::InfeasiblePattern(e.to_string()))?;
    let mut h = CMat::zeros(m, m);
    for (a, b) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        h[(a, b)] = re(1.0);
    }
    if m > 4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectrum: Vec<f64> = (0..m - 4).map(|_| rng.gen_range(0.5..2.0)).collect();
        let h1 = random_hermitian(&spectrum, Field::Real, &mut rng);
        h.view_mut((4, 4), (m - 4, m - 4)).copy_from(&h1);
    }
    Ok(MapSpec::from_choi(n, q, Field::Real, choi_from_hill(&ahat, &h))?)
}

/// Block upper triangular positions `(i, j)`, `i <= j`, on an `n x n` grid.
pub fn upper_triangular_positions(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
}

/// `m` distinct positions drawn uniformly.
pub fn random_positions(n: usize, q: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..q).map(move |j| (i, j))).collect();
    all.shuffle(rng);
    all.truncate(m);
    all
}

pub fn random_vector(len: usize, field: Field, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..len)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = if field == Field::Complex { rng.sample(StandardNormal) } else { 0.0 };
            c(a, b)
        })
        .collect()
}

/// Cross pattern: row `r` and column `s` minus the pivot `(r, s)`, in
/// shuffled order.
pub fn random_cross(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let r = rng.gen_range(0..n);
    let s = rng.gen_range(0..q);
    let mut pos: Vec<(usize, usize)> = (0..q).filter(|&j| j != s).map(|j| (r, j)).collect();
    pos.extend((0..n).filter(|&i| i != r).map(|i| (i, s)));
    pos.shuffle(rng);
    pos
}

/// Remainder coefficients with `Σα = 1` exactly up to rounding, or with
/// `|1 - Σα| >= 0.1`.
pub fn random_alpha(m: usize, field: Field, sum_one: bool, rng: &mut ChaCha8Rng) -> Vec<C64> {
    loop {
        let a = random_vector(m, field, rng);
        let s: C64 = a.iter().sum();
        if sum_one {
            if s.norm() < 0.1 {
                continue;
            }
            return a.into_iter().map(|v| v / s).collect();
        }
        if (re(1.0) - s).norm() >= 0.1 {
            return a;
        }
    }
}

/// A random pattern satisfying C1, assembled from row stars, column stars,
/// isolated positions and unused rows or columns, then relabeled.
pub fn random_c1_positions(rng: &mut ChaCha8Rng) -> (usize, usize, Vec<(usize, usize)>) {
    loop {
        let mut pos = Vec::new();
        let (mut n, mut q) = (0usize, 0usize);
        for _ in 0..rng.gen_range(0..=2) {
            let size = rng.gen_range(2..=3);
            pos.extend((0..size).map(|t| (n, q + t)));
            n += 1;
            q += size;
        }
        for _ in 0..rng.gen_range(0..=2) {
            let size = rng.gen_range(2..=3);
            pos.extend((0..size).map(|t| (n + t, q)));
            n += size;
            q += 1;
        }
        for _ in 0..rng.gen_range(0..=2) {
            pos.push((n, q));
            n += 1;
            q += 1;
        }
        n += usize::from(rng.gen_bool(0.25));
        q += usize::from(rng.gen_bool(0.25));
        if pos.is_empty() || n > 6 || q > 6 {
            continue;
        }
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..q).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        let mut pos: Vec<(usize, usize)> = pos.into_iter().map(|(i, j)| (rows[i], cols[j])).collect();
        pos.shuffle(rng);
        return (n, q, pos);
    }
}

/// A seeded pattern on which [`crate::bilinear::select_branch`] picks
/// `branch`, drawn by rejection.
pub fn random_pattern_for_branch(branch: Branch, field: Field, rng: &mut ChaCha8Rng) -> Pattern {
    loop {
        let (n, q, positions) = match branch {
            Branch::CrossInvertible | Branch::CrossSingular => {
                let (n, q) = (rng.gen_range(3..=5), rng.gen_range(3..=5));
                (n, q, random_cross(n, q, rng))
            }
            Branch::RowColumn => {
                let (n, q) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
                let m = rng.gen_range(1..=n * q);
                (n, q, random_positions(n, q, m, rng))
            }
            _ => random_c1_positions(rng),
        };
        let m = positions.len();
        let remainder = match branch {
            Branch::ZeroPattern => Remainder::AllZero,
            Branch::RowColumn => {
                if rng.gen_bool(0.5) {
                    Remainder::AllZero
                } else {
                    Remainder::SingleL0 { alpha: random_vector(m, field, rng) }
                }
            }
            Branch::SumNotOne | Branch::CrossInvertible => {
                Remainder::SingleL0 { alpha: random_alpha(m, field, false, rng) }
            }
            _ => Remainder::SingleL0 { alpha: random_alpha(m, field, true, rng) },
        };
        if m == n * q && !matches!(remainder, Remainder::AllZero) {
            continue;
        }
        let p = Pattern::new(n, q, positions, remainder);
        if select_branch(&p) == Ok(branch) {
            return p;
        }
    }
}

/// What a zoo entry is known to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub positive: Option<bool>,
    pub completely_positive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZooEntry {
    pub name: String,
    pub parameters: Vec<(String, C64)>,
    pub spec: MapSpec,
    pub expected: Expected,
}

pub const ZOO_NAMES: [&str; 5] = ["transpose2", "upper2x2", "toeplitz2x2", "embedded", "random"];

fn param(params: &[(String, C64)], name: &str) -> Option<C64> {
    params.iter().rev().find(|(k, _)| k == name).map(|(_, v)| *v)
}

fn int_param(params: &[(String, C64)], name: &str, default: usize) -> Result<usize, ZooError> {
    match param(params, name) {
        None => Ok(default),
        Some(v) if v.im == 0.0 && v.re >= 0.0 && v.re.fract() == 0.0 => Ok(v.re as usize),
        Some(_) => Err(ZooError::Unknown(format!("{name} must be a nonnegative integer"))),
    }
}

/// Builds a named entry. `params` override defaults:
///
/// - `transpose2`: none.
/// - `upper2x2`: `a1 b1 b2 c1 c2 c3`, default `a1 = b2 = c3 = 1`.
/// - `toeplitz2x2`: `a1 b1 b2 b3 c1 c3`, or `c2` in place of `b3` (`c2 = conj(b3)`),
///   default `a1 = b2 = 1, b3 = -2`.
/// - `embedded`: `n` (default 3), block upper triangular positions.
/// - `random`: `n q m` (default 2 2 3), `neg` negative Hill eigenvalues
///   (default 0), `alpha` remainder scale (default 0).
pub fn zoo_entry(name: &str, params: &[(String, C64)], field: Field, seed: u64) -> Result<ZooEntry, ZooError> {
    let unknown = |k: &str| ZooError::Unknown(format!("{k} for {name}"));
    let allowed: &[&str] = match name {
        "transpose2" => &[],
        "upper2x2" => &["a1", "b1", "b2", "c1", "c2", "c3"],
        "toeplitz2x2" => &["a1", "b1", "b2", "b3", "c1", "c2", "c3"],
        "embedded" => &["n"],
        "random" => &["n", "q", "m", "neg", "alpha"],
        _ => return Err(ZooError::Unknown(name.to_string())),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(unknown(k));
    }
    let block = |defaults: &[(&str, f64)]| -> Result<BlockParams, ZooError> {
        let mut bp = BlockParams::default();
        for &(k, v) in defaults {
            bp.set(k, re(v))?;
        }
        for (k, v) in params {
            bp.set(k, *v)?;
        }
        Ok(bp)
    };
    let (spec, expected) = match name {
        "transpose2" => {
            (transpose_map(2)?.with_field(field)?, Expected { positive: Some(true), completely_positive: Some(false) })
        }
        "upper2x2" => {
            let bp = block(&[("a1", 1.0), ("b2", 1.0), ("c3", 1.0)])?;
            (upper_triangular_2x2(field, &bp)?, Expected { positive: None, completely_positive: None })
        }
        "toeplitz2x2" => {
            let mut bp = block(&[("a1", 1.0), ("b2", 1.0), ("b3", -2.0)])?;
            // `c2 = conj(b3)` is forced; either name may be given.
            match (param(params, "b3"), param(params, "c2")) {
                (Some(b3), Some(c2)) if c2 != b3.conj() => {
                    return Err(ZooError::PatternViolation("toeplitz2x2 needs c2 = conj(b3)".into()));
                }
                (None, Some(c2)) => bp.b3 = c2.conj(),
                _ => {}
            }
            bp.c2 = bp.b3.conj();
            let spec = toeplitz_2x2(field, &bp)?;
            let counterexample = bp.b1 == re(0.0)
                && bp.c1 == re(0.0)
                && bp.c3 == re(0.0)
                && bp.a1.re > 0.0
                && bp.b2.re > 0.0
                && bp.b3 == -bp.a1 * re(2.0);
            let expected = if counterexample {
                Expected { positive: Some(field == Field::Real), completely_positive: Some(false) }
            } else {
                Expected { positive: None, completely_positive: None }
            };
            (spec, expected)
        }
        "embedded" => {
            let n = int_param(params, "n", 3)?;
            let spec = embedded_full_block(n, n, &upper_triangular_positions(n), seed)?.with_field(field)?;
            (spec, Expected { positive: Some(true), completely_positive: Some(false) })
        }
        _ => {
            let n = int_param(params, "n", 2)?;
            let q = int_param(params, "q", 2)?;
            let m = int_param(params, "m", 3)?;
            let neg = int_param(params, "neg", 0)?;
            if m == 0 || m > n * q || neg > m {
                return Err(ZooError::InfeasiblePattern(format!("m = {m}, neg = {neg} on {n}x{q}")));
            }
            let scale = param(params, "alpha").unwrap_or(re(0.0));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let positions = random_positions(n, q, m, &mut rng);
            let remainder = if scale == re(0.0) || m == n * q {
                Remainder::AllZero
            } else {
                let a = random_vector(m, field, &mut rng);
                Remainder::SingleL0 { alpha: a.into_iter().map(|v| v * scale).collect() }
            };
            let spectrum: Vec<f64> =
                (0..m).map(|k| rng.gen_range(0.5..2.0) * if k < neg { -1.0 } else { 1.0 }).collect();
            let p = Pattern::new(n, q, positions, remainder);
            let spec = random_star_linear(&p, &spectrum, field, rng.gen())?;
            let cp = Some(neg == 0);
            (spec, Expected { positive: if neg == 0 { Some(true) } else { None }, completely_positive: cp })
        }
    };
    Ok(ZooEntry { name: name.to_string(), parameters: params.to_vec(), spec, expected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapmodel::{apply_via_l, is_star_linear};

    #[test]
    fn transpose_of_matrix_unit() {
        let t = transpose_map(3).unwrap();
        let mut e12 = CMat::zeros(3, 3);
        e12[(0, 1)] = re(1.0);
        let out = apply_via_l(&t, &e12).unwrap();
        assert_eq!(out, e12.transpose());
    }

    #[test]
    fn forced_entries_make_star_linear_maps() {
        let bp = BlockParams { a1: re(2.0), b1: c(0.3, 0.4), b2: re(1.0), b3: c(-1.0, 0.5), c1: c(0.1, -0.2), c2: c(0.7, 0.1), c3: re(0.5) };
        for spec in [upper_triangular_2x2(Field::Complex, &bp).unwrap(), toeplitz_2x2(Field::Complex, &bp).unwrap()] {
            assert!(is_star_linear(&spec, 1e-12).star_linear);
        }
        let bad = BlockParams { a1: c(1.0, 1.0), ..bp };
        assert_eq!(upper_triangular_2x2(Field::Complex, &bad), Err(ZooError::FieldViolation("a1".into())));
        assert_eq!(toeplitz_2x2(Field::Real, &bp), Err(ZooError::FieldViolation("b1".into())));
    }

    #[test]
    fn random_generator_rejects_zero_spectrum() {
        let p = Pattern::new(2, 2, vec![(0, 0), (1, 1)], Remainder::AllZero);
        assert!(matches!(random_star_linear(&p, &[1.0, 0.0], Field::Real, 1), Err(ZooError::RankDeficient(_))));
        assert!(random_star_linear(&p, &[1.0, -1.0], Field::Real, 1).is_ok());
    }

    #[test]
    fn grid_search_finds_corner() {
        let pos = upper_triangular_positions(3);
        let g = find_grid(&pos).unwrap();
        let pts: Vec<_> = g.iter().map(|&k| pos[k]).collect();
        assert_eq!(pts[0].0, pts[1].0);
        assert_eq!(pts[2].0, pts[3].0);
        assert_eq!(pts[0].1, pts[2].1);
        assert_eq!(pts[1].1, pts[3].1);
    }
}
