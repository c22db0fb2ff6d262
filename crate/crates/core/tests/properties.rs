use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cpmap::bilinear::{assemble_ahat, build_e, rho_polynomial, sum_constrained_witness};
use cpmap::hill::{apply_via_hill, build_hill, reconstruct_from_hill};
use cpmap::linalg::{
    c, canonical_shuffle, hermitian_eigen, kron, kron_vec, max_abs, numeric_rank, re, unvec, vec, CMat, CVec, Field,
    C64, DEFAULT_TOL,
};
use cpmap::mapmodel::{
    apply_via_choi_blocks, apply_via_choi_hadamard, apply_via_l, choi_to_matricization, is_star_linear,
    matricization_to_choi, permute_map, MapSpec,
};
use cpmap::pattern::{cross_arms, theorem_verdict, verdict_for_map, Pattern, Remainder, Verdict};
use cpmap::positivity::{
    compress_x, evaluate_pair, is_completely_positive, positivity_probe, positivity_probe_escalating, random_unit,
    ProbeConfig, ProbeOutcome,
};
use cpmap::zoo::{random_alpha, random_c1_positions, random_cross, random_positions, random_star_linear};

fn field_of(b: bool) -> Field {
    if b {
        Field::Complex
    } else {
        Field::Real
    }
}

fn scalar(rng: &mut ChaCha8Rng, field: Field) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    match field {
        Field::Real => re(a),
        Field::Complex => c(a, rng.sample(StandardNormal)),
    }
}

fn rand_mat(rows: usize, cols: usize, field: Field, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| scalar(rng, field))
}

fn rand_vec(len: usize, field: Field, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(len, |_, _| scalar(rng, field))
}

fn unitary(k: usize, field: Field, rng: &mut ChaCha8Rng) -> CMat {
    rand_mat(k, k, field, rng).qr().q()
}

/// Hermitian `k x k` with `rank` eigenvalues of magnitude in [0.5, 2] and
/// random signs unless `psd`.
fn rand_hermitian(k: usize, rank: usize, psd: bool, field: Field, rng: &mut ChaCha8Rng) -> CMat {
    let u = unitary(k, field, rng);
    let d = DMatrix::from_fn(k, k, |i, j| {
        if i == j && i < rank {
            let mag = rng.gen_range(0.5..2.0);
            re(if psd || rng.gen_bool(0.5) { mag } else { -mag })
        } else {
            re(0.0)
        }
    });
    let h = &u * d * u.adjoint();
    (&h + h.adjoint()) * re(0.5)
}

fn star_linear_spec(n: usize, q: usize, field: Field, rng: &mut ChaCha8Rng) -> MapSpec {
    let rank = rng.gen_range(1..=n * q);
    MapSpec::from_choi(n, q, field, rand_hermitian(n * q, rank, false, field, rng)).unwrap()
}

fn rel_close(a: &CMat, b: &CMat, tol: f64) -> bool {
    max_abs(&(a - b)) <= tol * max_abs(a).max(max_abs(b)).max(1.0)
}

fn min_eig(m: &CMat, field: Field) -> f64 {
    hermitian_eigen(m, field).0.into_iter().fold(f64::INFINITY, f64::min)
}

/// Entry `(i, j)` of block `(k, l)`, written `ℓ^{kl}_{ij}` in the block notation.
fn ell(spec: &MapSpec, k: usize, l: usize, i: usize, j: usize) -> C64 {
    spec.block(k, l)[(i, j)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unvec_inverts_vec(rows in 1usize..6, cols in 1usize..6, cplx: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rand_mat(rows, cols, field_of(cplx), &mut rng);
        prop_assert_eq!(unvec(&vec(&m), rows, cols).unwrap(), m);
    }

    #[test]
    fn kron_acts_on_kron_vectors(r1 in 1usize..4, c1 in 1usize..4, r2 in 1usize..4, c2 in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (rand_mat(r1, c1, Field::Complex, &mut rng), rand_mat(r2, c2, Field::Complex, &mut rng));
        let (z, x) = (rand_vec(c1, Field::Complex, &mut rng), rand_vec(c2, Field::Complex, &mut rng));
        let lhs = kron(&a, &b) * kron_vec(&z, &x);
        let rhs = kron_vec(&(&a * &z), &(&b * &x));
        prop_assert!((lhs - rhs).camax() <= 1e-12 * 16.0);
    }

    #[test]
    fn choi_matricization_round_trip_is_exact(n in 1usize..=5, q in 1usize..=5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rand_mat(n * n, q * q, Field::Complex, &mut rng);
        let choi = matricization_to_choi(&l, n, q).unwrap();
        prop_assert_eq!(&choi_to_matricization(&choi, n, q).unwrap(), &l);
        prop_assert_eq!(matricization_to_choi(&choi_to_matricization(&choi, n, q).unwrap(), n, q).unwrap(), choi);
    }

    #[test]
    fn application_routes_agree(n in 1usize..=4, q in 1usize..=4, cplx: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = MapSpec::from_matricization(n, q, field, rand_mat(n * n, q * q, field, &mut rng)).unwrap();
        let v = rand_mat(q, q, field, &mut rng);
        let a = apply_via_l(&spec, &v).unwrap();
        prop_assert!(rel_close(&a, &apply_via_choi_blocks(&spec, &v).unwrap(), 1e-12));
        prop_assert!(rel_close(&a, &apply_via_choi_hadamard(&spec, &v).unwrap(), 1e-12));
    }

    #[test]
    fn hill_application_matches(n in 1usize..=4, q in 1usize..=4, cplx: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = star_linear_spec(n, q, field, &mut rng);
        let rep = build_hill(&spec, DEFAULT_TOL).unwrap();
        let v = rand_mat(q, q, field, &mut rng);
        prop_assert!(rel_close(&apply_via_l(&spec, &v).unwrap(), &apply_via_hill(&rep, &v), 1e-10));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn rank_ignores_unitary_factors(rows in 1usize..7, cols in 1usize..7, cplx: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.gen_range(0..=rows.min(cols));
        let m = rand_mat(rows, r, field, &mut rng) * rand_mat(r, cols, field, &mut rng);
        let k = numeric_rank(&m, DEFAULT_TOL);
        prop_assert_eq!(k, r);
        let mixed = unitary(rows, field, &mut rng) * &m * unitary(cols, field, &mut rng);
        prop_assert_eq!(numeric_rank(&mixed, DEFAULT_TOL), k);
    }

    #[test]
    fn matched_permutation_preserves_star_linearity_and_spectrum(
        n in 2usize..=4, q in 2usize..=4, cplx: bool, star: bool, seed: u64,
    ) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if star {
            star_linear_spec(n, q, field, &mut rng)
        } else {
            MapSpec::from_matricization(n, q, field, rand_mat(n * n, q * q, field, &mut rng)).unwrap()
        };
        let ip = (rng.gen_range(0..n), rng.gen_range(0..n));
        let jp = (rng.gen_range(0..q), rng.gen_range(0..q));
        let permuted = permute_map(&spec, ip, ip, jp, jp).unwrap();
        let before = is_star_linear(&spec, DEFAULT_TOL).star_linear;
        prop_assert_eq!(before, star);
        prop_assert_eq!(is_star_linear(&permuted, DEFAULT_TOL).star_linear, before);
        if star {
            let mut a = hermitian_eigen(spec.choi(), field).0;
            let mut b = hermitian_eigen(permuted.choi(), field).0;
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn three_star_linearity_criteria_agree(n in 1usize..=4, q in 1usize..=4, cplx: bool, star: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = if star {
            star_linear_spec(n, q, field, &mut rng)
        } else {
            MapSpec::from_matricization(n, q, field, rand_mat(n * n, q * q, field, &mut rng)).unwrap()
        };
        let r = is_star_linear(&spec, DEFAULT_TOL);
        prop_assert!(!r.inconsistent);
        // Every real 1x1 map commutes with the adjoint.
        let star = star || (n * q == 1 && field == Field::Real);
        prop_assert_eq!(r.choi_hermitian, star);
        prop_assert_eq!(r.shuffle_identity, star);
        prop_assert_eq!(r.entrywise, star);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hill_representation_invariants(n in 1usize..=4, q in 1usize..=4, cplx: bool, psd: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = rng.gen_range(1..=n * q);
        let choi = rand_hermitian(n * q, rank, psd, field, &mut rng);
        let spec = MapSpec::from_choi(n, q, field, choi.clone()).unwrap();
        let rep = build_hill(&spec, DEFAULT_TOL).unwrap();
        prop_assert_eq!(rep.m(), numeric_rank(&choi, DEFAULT_TOL));
        prop_assert_eq!(rep.m(), rank);
        prop_assert_eq!(numeric_rank(&rep.ahat, DEFAULT_TOL), rep.m());
        let (l, lam) = reconstruct_from_hill(&rep);
        prop_assert!(max_abs(&(&lam - &choi)) <= 1e-9 * max_abs(&choi));
        prop_assert!(max_abs(&(&l - spec.matricization())) <= 1e-9 * max_abs(spec.matricization()).max(1.0));
        prop_assert!(max_abs(&(&rep.h - rep.h.adjoint())) <= 1e-9 * max_abs(&rep.h));
        // Λ ⪰ 0 iff H ≻ 0; H is invertible because rank Λ = m.
        let choi_psd = min_eig(&choi, field) >= -1e-9 * max_abs(&choi);
        let h_eigs = hermitian_eigen(&rep.h, field).0;
        prop_assert!(h_eigs.iter().all(|e| e.abs() > 1e-9 * max_abs(&rep.h)));
        prop_assert_eq!(choi_psd, h_eigs.iter().all(|&e| e > 0.0));
        prop_assert_eq!(choi_psd, psd || rank == h_eigs.iter().filter(|&&e| e > 0.0).count());
    }

    #[test]
    fn completely_positive_maps_are_never_certified(seed: u64, cplx: bool) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, q) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let m = rng.gen_range(1..=n * q);
        let positions = random_positions(n, q, m, &mut rng);
        let alpha = random_alpha(m, field, rng.gen_bool(0.3), &mut rng);
        let p = Pattern::new(n, q, positions, Remainder::SingleL0 { alpha });
        let spectrum: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
        let spec = random_star_linear(&p, &spectrum, field, seed).unwrap();
        prop_assert!(is_completely_positive(&spec, DEFAULT_TOL).unwrap().completely_positive);
        let cfg = ProbeConfig { starts: 16, seed, ..ProbeConfig::default() };
        prop_assert!(!positivity_probe(&spec, &cfg).is_certified());
    }

    #[test]
    fn certificates_re_evaluate(n in 1usize..=3, q in 2usize..=3, cplx: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = star_linear_spec(n, q, field, &mut rng);
        let cfg = ProbeConfig { starts: 16, seed, ..ProbeConfig::default() };
        if let ProbeOutcome::CertifiedNotPositive { z, x, value } = positivity_probe(&spec, &cfg) {
            let (z, x) = (cpmap::positivity::pairs_to_vec(&z), cpmap::positivity::pairs_to_vec(&x));
            let again = evaluate_pair(spec.choi(), &z, &x);
            prop_assert!(again < -cfg.tol / 2.0);
            prop_assert!((again - value).abs() <= 1e-12 * max_abs(spec.choi()).max(1.0));
        }
    }

    #[test]
    fn probe_objective_is_compressed_eigenvalue(n in 1usize..=5, q in 1usize..=5, cplx: bool, seed: u64) {
        let field = field_of(cplx);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = star_linear_spec(n, q, field, &mut rng);
        let x = random_unit(&mut rng, n, field);
        let comp = compress_x(spec.choi(), q, &x);
        let (vals, vecs) = hermitian_eigen(&comp, field);
        let (k, lmin) = vals.iter().copied().enumerate().fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
        let z: CVec = vecs.column(k).into_owned();
        let scale = max_abs(spec.choi()).max(1.0);
        prop_assert!((evaluate_pair(spec.choi(), &z, &x) - lmin).abs() <= 1e-10 * scale);
        for _ in 0..16 {
            let w = random_unit(&mut rng, q, field);
            prop_assert!(evaluate_pair(spec.choi(), &w, &x) >= lmin - 1e-10 * scale);
        }
    }
}

#[test]
fn shuffle_is_symmetric_involution() {
    for n in 1..=6 {
        let c = canonical_shuffle(n).to_dense();
        assert_eq!(&c * &c, CMat::identity(n * n, n * n));
        assert_eq!(c.transpose(), c);
    }
}

#[test]
fn zero_and_repeated_blocks_recur_inside_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let field = field_of(case % 2 == 0);
        let (n, q) = (rng.gen_range(2..=3), rng.gen_range(2..=3));
        let m = rng.gen_range(1..n * q);
        let positions = random_positions(n, q, m, &mut rng);
        let remainder = if case % 4 < 2 {
            Remainder::AllZero
        } else {
            Remainder::SingleL0 { alpha: random_alpha(m, field, false, &mut rng) }
        };
        let p = Pattern::new(n, q, positions, remainder);
        let spectrum: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.5 }).collect();
        let spec = random_star_linear(&p, &spectrum, field, case).unwrap();
        let tol = 1e-9 * max_abs(spec.matricization());
        for i in 0..n {
            for j in 0..q {
                let block_zero = max_abs(&spec.block(i, j)) <= tol;
                let entries_zero = (0..n).all(|k| (0..q).all(|l| ell(&spec, k, l, i, j).norm() <= tol));
                assert_eq!(block_zero, entries_zero, "zero structure at ({i},{j})");
                for r in 0..n {
                    for s in 0..q {
                        if (i, j) == (r, s) {
                            continue;
                        }
                        let blocks_equal = max_abs(&(spec.block(i, j) - spec.block(r, s))) <= tol;
                        let entries_equal = (0..n)
                            .all(|k| (0..q).all(|l| (ell(&spec, k, l, i, j) - ell(&spec, k, l, r, s)).norm() <= tol));
                        assert_eq!(blocks_equal, entries_equal, "repeat structure ({i},{j}) vs ({r},{s})");
                    }
                }
            }
        }
    }
}

fn random_pattern(rng: &mut ChaCha8Rng, field: Field) -> Pattern {
    let (n, q) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
    let m = rng.gen_range(1..=n * q);
    let positions = random_positions(n, q, m, rng);
    let remainder = match rng.gen_range(0..3) {
        0 => Remainder::AllZero,
        1 => Remainder::SingleL0 { alpha: random_alpha(m, field, rng.gen_bool(0.5), rng) },
        _ => Remainder::Heterogeneous,
    };
    Pattern::new(n, q, positions, remainder)
}

fn shuffle_perm(k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..k).collect();
    v.shuffle(rng);
    v
}

#[test]
fn verdicts_survive_matched_permutations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..400 {
        let field = field_of(case % 2 == 1);
        let p = random_pattern(&mut rng, field);
        let (sr, sc) = (shuffle_perm(p.n, &mut rng), shuffle_perm(p.q, &mut rng));
        let moved = Pattern::new(p.n, p.q, p.positions.iter().map(|&(i, j)| (sr[i], sc[j])).collect(), p.remainder.clone());
        assert_eq!(theorem_verdict(&p, field), theorem_verdict(&moved, field), "{p:?}");
    }
    // The same at map level, through matched swaps of block and inner indices.
    for case in 0..40u64 {
        let field = field_of(case % 2 == 1);
        let (n, q, positions) = random_c1_positions(&mut rng);
        let m = positions.len();
        let p = Pattern::new(n, q, positions, Remainder::SingleL0 { alpha: random_alpha(m, field, false, &mut rng) });
        let spectrum: Vec<f64> = (0..m).map(|k| if k % 2 == 0 { 1.0 } else { -0.7 }).collect();
        let spec = random_star_linear(&p, &spectrum, field, case).unwrap();
        let ip = (rng.gen_range(0..n), rng.gen_range(0..n));
        let jp = (rng.gen_range(0..q), rng.gen_range(0..q));
        let moved = permute_map(&spec, ip, ip, jp, jp).unwrap();
        let a = verdict_for_map(&spec, DEFAULT_TOL, 32).unwrap().verdict;
        let b = verdict_for_map(&moved, DEFAULT_TOL, 32).unwrap().verdict;
        assert_eq!(a.coincides(), b.coincides(), "case {case}: {a:?} vs {b:?}");
    }
}

#[test]
fn guaranteed_patterns_pass_the_implication_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut audited = 0;
    while audited < 8 {
        let field = field_of(audited % 2 == 1);
        let (n, q, positions) = random_c1_positions(&mut rng);
        let m = positions.len();
        if n * q > 9 {
            continue;
        }
        let p = Pattern::new(n, q, positions, Remainder::SingleL0 { alpha: random_alpha(m, field, false, &mut rng) });
        if !matches!(theorem_verdict(&p, field), Verdict::GuaranteedCoincide(_)) {
            continue;
        }
        audited += 1;
        for seed in 0..20u64 {
            let spectrum: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.5) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 }).collect();
            let spec = random_star_linear(&p, &spectrum, field, seed).unwrap();
            let cfg = ProbeConfig { starts: 64, seed, ..ProbeConfig::default() };
            if !positivity_probe_escalating(&spec, &cfg, 512).is_certified() {
                assert!(is_completely_positive(&spec, DEFAULT_TOL).unwrap().completely_positive, "{p:?} seed {seed}");
            }
        }
    }
}

#[test]
fn ahat_is_perturbed_selection_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..200 {
        let field = field_of(case % 2 == 0);
        let (n, q) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let m = rng.gen_range(1..=n * q);
        let p = Pattern::new(n, q, random_positions(n, q, m, &mut rng), Remainder::AllZero);
        let alpha = random_alpha(m, field, case % 3 == 0, &mut rng);
        let e = build_e(&p);
        let av = CVec::from_column_slice(&alpha);
        let ones_m = CVec::from_element(m, re(1.0));
        let ones_nq = CVec::from_element(n * q, re(1.0));
        let expected = (CMat::identity(m, m) - &av * ones_m.transpose()) * &e + &av * ones_nq.transpose();
        // (1 - α_k) + α_k may round away from 1, so allow a few ulps.
        let scale = 1.0 + av.camax();
        assert!(max_abs(&(assemble_ahat(&p, &alpha).unwrap() - expected)) <= 4.0 * f64::EPSILON * scale);
    }
}

#[test]
fn cross_factorization_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let field = field_of(case % 2 == 0);
        let (n, q) = (rng.gen_range(3..=5), rng.gen_range(3..=5));
        let p = Pattern::new(n, q, random_cross(n, q, &mut rng), Remainder::AllZero);
        let arms = cross_arms(&p).unwrap();
        let y0 = rand_vec(p.m(), field, &mut rng);
        let (xr, zs) = (scalar(&mut rng, field), scalar(&mut rng, field));
        // The unique (z, x) with E(z ⊗ x) = y° and the given x_r, z_s.
        let mut z = CVec::zeros(q);
        let mut x = CVec::zeros(n);
        z[arms.s] = zs;
        x[arms.r] = xr;
        for (k, &(i, j)) in p.positions.iter().enumerate() {
            if i == arms.r {
                z[j] = y0[k] / xr;
            } else {
                x[i] = y0[k] / zs;
            }
        }
        let w = kron_vec(&z, &x);
        let scale = y0.camax().max(1.0) * (1.0 + 1.0 / xr.norm() + 1.0 / zs.norm()).powi(2);
        assert!((build_e(&p) * &w - &y0).camax() <= 1e-12 * scale);
        let y1: C64 = arms.first.iter().map(|&k| y0[k]).sum();
        let y2: C64 = arms.second.iter().map(|&k| y0[k]).sum();
        let total: C64 = w.iter().sum();
        let factored = (y2 / zs + xr) * (y1 / xr + zs);
        assert!((total - factored).norm() <= 1e-12 * scale * (1.0 + total.norm()), "case {case}");
    }
}

#[test]
fn rho_polynomial_sign_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..500 {
        let (a1, a2): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (y1, y2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        let f = |coef: [f64; 3], r: f64| coef[2] * r * r + coef[1] * r + coef[0];
        if 4.0 * a1 * a2 < 1.0 - 1e-6 {
            let coef = rho_polynomial(a1, a2, y1, y2);
            assert!(coef[2] > 0.0);
            let big = 1e3 * (1.0 + coef[1].abs() + coef[0].abs()) / coef[2];
            assert!(f(coef, big) > 0.0 && f(coef, -big) > 0.0);
        } else if 4.0 * a1 * a2 > 1.0 + 1e-6 {
            let coef = rho_polynomial(a1, a2, 0.0, 0.0);
            assert_eq!(f(coef, 0.0), 0.0);
            for _ in 0..20 {
                let r: f64 = rng.sample::<f64, _>(StandardNormal) * 10.0;
                if r != 0.0 {
                    assert!(f(coef, r) < 0.0);
                }
            }
        }
    }
}

#[test]
fn sum_constrained_witnesses_compose() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for case in 0..400 {
        let field = field_of(case % 2 == 0);
        let (n, q, positions) = random_c1_positions(&mut rng);
        let m = positions.len();
        let p = Pattern::new(n, q, positions, Remainder::AllZero);
        let w = rand_vec(m, field, &mut rng);
        let Ok((z, x)) = sum_constrained_witness(&p, &w) else { continue };
        checked += 1;
        let v = kron_vec(&z, &x);
        let e = build_e(&p);
        assert!((&e * &v - &w).camax() <= 1e-9 * w.camax().max(1.0));
        assert!(v.iter().sum::<C64>().norm() <= 1e-9 * v.camax().max(1.0));
        let alpha = random_alpha(m, field, false, &mut rng);
        let av = CVec::from_column_slice(&alpha);
        let ones = CVec::from_element(m, re(1.0));
        let lhs = assemble_ahat(&p, &alpha).unwrap() * &v;
        let rhs = (CMat::identity(m, m) - &av * ones.transpose()) * (&e * &v);
        assert!((lhs - rhs).camax() <= 1e-9 * v.camax().max(1.0) * (1.0 + av.camax()) * m as f64);
    }
    assert!(checked >= 100, "only {checked} sum-constrained witnesses");
}
