//! Complete positivity via the Choi spectrum and a seeded search for
//! positivity violations `(z ⊗ x)* Λ (z ⊗ x) < 0`.
//!
//! The probe minimizes `λ_min((I_q ⊗ x)* Λ (I_q ⊗ x))` over unit `x` by exact
//! alternating minimization: for fixed `x` the best `z` is a bottom
//! eigenvector of that `q x q` compression, and for fixed `z` the best `x` is
//! a bottom eigenvector of `(z ⊗ I_n)* Λ (z ⊗ I_n)`. Each step can only lower
//! the objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, hermitian_eigen, kron_vec, CMat, CVec, Field, LinalgError, DEFAULT_TOL};
use crate::mapmodel::MapSpec;

/// `(z ⊗ x)* Λ (z ⊗ x)`; real for Hermitian `Λ`.
pub fn evaluate_pair(choi: &CMat, z: &CVec, x: &CVec) -> f64 {
    let v = kron_vec(z, x);
    v.dotc(&(choi * &v)).re
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpVerdict {
    pub completely_positive: bool,
    pub min_eigenvalue: f64,
}

/// CP iff the smallest Choi eigenvalue is at least `-tol * max(1, max|Λ_ij|)`.
pub fn is_completely_positive(spec: &MapSpec, tol: f64) -> Result<CpVerdict, LinalgError> {
    let choi = spec.choi();
    let (lmin, _) = linalg::min_eigenvalue_hermitian(choi, spec.field(), tol)?;
    Ok(CpVerdict {
        completely_positive: lmin >= -linalg::scaled_tol(choi, tol),
        min_eigenvalue: lmin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub starts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { starts: 64, max_iterations: 200, seed: 42, tol: DEFAULT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeOutcome {
    /// `value` is recomputed from `(z, x)` and lies below `-tol`.
    CertifiedNotPositive { z: Vec<[f64; 2]>, x: Vec<[f64; 2]>, value: f64 },
    NoViolationFound { samples_used: usize, min_value_seen: f64 },
}

impl ProbeOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, ProbeOutcome::CertifiedNotPositive { .. })
    }
}

pub fn random_unit(rng: &mut ChaCha8Rng, len: usize, field: Field) -> CVec {
    let v = CVec::from_fn(len, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = match field {
            Field::Real => 0.0,
            Field::Complex => rng.sample(StandardNormal),
        };
        c(a, b)
    });
    let nrm = linalg::norm2(&v);
    if nrm == 0.0 {
        let mut e = CVec::zeros(len);
        e[0] = c(1.0, 0.0);
        return e;
    }
    v / c(nrm, 0.0)
}

/// `(I_q ⊗ x)* Λ (I_q ⊗ x)`.
pub fn compress_x(choi: &CMat, q: usize, x: &CVec) -> CMat {
    let s = linalg::kron_identity_vec(q, x);
    s.adjoint() * choi * s
}

/// `(z ⊗ I_n)* Λ (z ⊗ I_n)`.
pub fn compress_z(choi: &CMat, n: usize, z: &CVec) -> CMat {
    let s = linalg::kron_vec_identity(z, n);
    s.adjoint() * choi * s
}

struct StartResult {
    value: f64,
    z: CVec,
    x: CVec,
    evaluations: usize,
}

fn bottom(m: &CMat, field: Field) -> (f64, CVec) {
    let (vals, vecs) = hermitian_eigen(m, field);
    (vals[0], vecs.column(0).into_owned())
}

fn run_start(choi: &CMat, n: usize, q: usize, field: Field, cfg: &ProbeConfig, index: usize) -> StartResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64));
    let mut x = random_unit(&mut rng, n, field);
    let (mut best, mut z) = bottom(&compress_x(choi, q, &x), field);
    let mut evaluations = 1;
    for _ in 0..cfg.max_iterations {
        let (_, nx) = bottom(&compress_z(choi, n, &z), field);
        let (val, nz) = bottom(&compress_x(choi, q, &nx), field);
        evaluations += 2;
        let improvement = best - val;
        if val < best {
            best = val;
            x = nx;
            z = nz;
        }
        if improvement <= 1e-14 * best.abs().max(1.0) {
            break;
        }
    }
    StartResult { value: best, z, x, evaluations }
}

fn to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Seeded multi-start search. Starts run in parallel; the reduction picks the
/// smallest value with ties broken by start index, so results depend only on
/// the configuration.
pub fn positivity_probe(spec: &MapSpec, cfg: &ProbeConfig) -> ProbeOutcome {
    let choi = spec.choi();
    let (n, q, field) = (spec.n(), spec.q(), spec.field());
    let results: Vec<StartResult> =
        (0..cfg.starts).into_par_iter().map(|s| run_start(choi, n, q, field, cfg, s)).collect();
    let samples_used = results.iter().map(|r| r.evaluations).sum();
    let best = results
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap().then(a.0.cmp(&b.0)))
        .map(|(_, r)| r);
    let Some(best) = best else {
        return ProbeOutcome::NoViolationFound { samples_used: 0, min_value_seen: f64::INFINITY };
    };
    let value = evaluate_pair(choi, &best.z, &best.x);
    if value < -cfg.tol {
        ProbeOutcome::CertifiedNotPositive { z: to_pairs(&best.z), x: to_pairs(&best.x), value }
    } else {
        ProbeOutcome::NoViolationFound { samples_used, min_value_seen: best.value.min(value) }
    }
}

/// Runs the probe with `starts`, then doubles the start count up to
/// `max_starts` while no violation is certified.
pub fn positivity_probe_escalating(spec: &MapSpec, cfg: &ProbeConfig, max_starts: usize) -> ProbeOutcome {
    let mut cur = *cfg;
    loop {
        let out = positivity_probe(spec, &cur);
        if out.is_certified() || cur.starts >= max_starts {
            return out;
        }
        cur.starts = (cur.starts * 2).min(max_starts);
        cur.seed = cur.seed.wrapping_add(1);
    }
}

pub fn pairs_to_vec(p: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(p.len(), p.iter().map(|a| c(a[0], a[1])))
}
