use cvcompile::haar::{haar_orthogonal_matrix, haar_unitary};
use cvcompile::nfl::*;
use cvcompile::rng;
use cvcompile::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    rng::mean_stderr(v)
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic series). Values are
/// snapped to a 1e−9 grid so atoms (Haar O(2) reflections have trace exactly 0)
/// are not split by roundoff.
fn ks_p_value(a: Vec<f64>, b: Vec<f64>) -> f64 {
    let snap = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| (x * 1e9).round() / 1e9).collect() };
    let (mut a, mut b) = (snap(a), snap(b));
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lambda < 0.3 {
        return 1.0;
    }
    let p: f64 = (1..100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn haar_orthogonal_samples() {
    let mut r = rng::seeded(1);
    let o = haar_orthogonal(6, &mut r).unwrap();
    assert!(orthogonality_error(o.matrix()) < 1e-12);
    assert_eq!(o.modes(), 3);
    assert!(matches!(haar_orthogonal(5, &mut r), Err(Error::InvalidArgument(_))));
    assert!(haar_orthogonal(0, &mut r).is_err());

    let traces: Vec<f64> = (0..10_000u64).into_par_iter().map(|i| haar_orthogonal_matrix(6, &mut rng::stream(2, i)).trace()).collect();
    let (mean, se) = mean_stderr(&traces);
    assert!(mean.abs() <= 3.0 * se, "E[Tr O] = {mean} ± {se}");

    let sq: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| haar_orthogonal_matrix(6, &mut rng::stream(3, i)).trace().powi(2))
        .collect();
    let (mean, se) = mean_stderr(&sq);
    assert!((mean - 1.0).abs() <= 3.0 * se, "E[(Tr O)²] = {mean} ± {se}");
}

#[test]
fn unitary_embedding_is_orthogonal_symplectic() {
    let mut r = rng::seeded(4);
    for m in 1..4 {
        let e = embed_unitary(&haar_unitary(m, &mut r));
        assert!(orthogonality_error(&e) < 1e-12);
        assert!(symplectic_error(&e) < 1e-12);
    }
}

#[test]
fn bloch_messiah_samples() {
    let mut r = rng::seeded(5);
    for m in 1..4 {
        let l = haar_symplectic_bloch_messiah(2 * m, &ZDist::default(), &mut r).unwrap();
        assert!(symplectic_error(l.matrix()) < 1e-10);
        assert_eq!(l.kind(), MapKind::Symplectic);
        let flat = haar_symplectic_bloch_messiah(2 * m, &ZDist::Fixed { z: 1.0 }, &mut r).unwrap();
        assert!(orthogonality_error(flat.matrix()) < 1e-12);
        let z = squeeze_block(m, &ZDist::default(), &mut r);
        assert!((z.determinant() - 1.0).abs() < 1e-12);
        assert!(symplectic_error(&z) < 1e-14);
    }
    assert!(haar_symplectic_bloch_messiah(3, &ZDist::default(), &mut r).is_err());
    assert!(haar_symplectic_bloch_messiah(4, &ZDist::LogUniform { lo: 0.0, hi: 2.0 }, &mut r).is_err());
    // Squeezing factors stay in range.
    for _ in 0..200 {
        let z = ZDist::default().sample(&mut r);
        assert!((0.5..=2.0).contains(&z));
    }
}

#[test]
fn phase_space_map_rejects_non_members() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    assert!(PhaseSpaceMap::new(m.clone(), MapKind::Orthogonal).is_err());
    assert!(PhaseSpaceMap::new(m, MapKind::Symplectic).is_ok());
    assert!(PhaseSpaceMap::new(DMatrix::identity(3, 3), MapKind::Orthogonal).is_err());
}

#[test]
fn block_learner_agrees_on_subspace() {
    let mut r = rng::seeded(6);
    let o = haar_orthogonal(6, &mut r).unwrap();
    let full = block_perfect_learner(&o, 6, &mut r).unwrap();
    assert!((full.matrix() - o.matrix()).amax() < 1e-15);
    for s in 0..=6 {
        let t = block_perfect_learner(&o, s, &mut r).unwrap();
        assert!(orthogonality_error(t.matrix()) < 1e-12);
        let e = DMatrix::<f64>::identity(6, 6);
        for k in 0..s {
            let diff = (e.row(k) * t.matrix() - e.row(k) * o.matrix()).amax();
            assert!(diff < 1e-12, "s {s} row {k}");
        }
    }
    let l = haar_symplectic_bloch_messiah(6, &ZDist::default(), &mut r).unwrap();
    assert!(matches!(block_perfect_learner(&l, 3, &mut r), Err(Error::InvalidArgument(_))));
    for s in [0, 2, 4, 6] {
        let t = block_perfect_learner(&l, s, &mut r).unwrap();
        assert!(symplectic_error(t.matrix()) < 1e-10);
        let e = DMatrix::<f64>::identity(6, 6);
        for k in 0..s {
            assert!((e.row(k) * t.matrix() - e.row(k) * l.matrix()).amax() < 1e-10);
        }
    }
    assert!(block_perfect_learner(&o, 7, &mut r).is_err());
}

#[test]
fn learner_solved_from_sampled_vectors_has_same_statistics() {
    // At m = 2, build T from |S| random training vectors instead of the
    // coordinate block: T = (P_A + Q_⊥ Y Q_⊥ᵀ) O agrees with O on span(w_j).
    let (m, s, n) = (2usize, 2usize, 20_000u64);
    let solved: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(7, i);
            let o = haar_orthogonal(2 * m, &mut r).unwrap();
            // Rows w_j ~ N(0, I); Q from QR of [w_1ᵀ … w_sᵀ | Gaussian fill].
            let ws = DMatrix::<f64>::from_fn(s, 2 * m, |_, _| r.sample(StandardNormal));
            let mut g = DMatrix::<f64>::from_fn(2 * m, 2 * m, |_, _| r.sample(StandardNormal));
            g.columns_mut(0, s).copy_from(&ws.transpose());
            let full = g.qr().q();
            let qa = full.columns(0, s).into_owned();
            let qp = full.columns(s, 2 * m - s).into_owned();
            let y = haar_orthogonal_matrix(2 * m - s, &mut r);
            let t = (&qa * qa.transpose() + &qp * y * qp.transpose()) * o.matrix();
            for k in 0..s {
                let w = ws.row(k);
                assert!((w * &t - w * o.matrix()).amax() < 1e-10);
            }
            let t = PhaseSpaceMap::new(t, MapKind::Orthogonal).unwrap();
            risk_closed_form(&o, &t).unwrap()
        })
        .collect();
    let block = expected_risk_mc(m, s, 1, MapKind::Orthogonal, &ZDist::default(), n as usize, 8).unwrap();
    let (mean, se) = mean_stderr(&solved);
    assert!((mean - block.mean).abs() <= 3.0 * (se * se + block.stderr * block.stderr).sqrt());
    let p = ks_p_value(solved, {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(9, i);
                let o = haar_orthogonal(2 * m, &mut r).unwrap();
                risk_closed_form(&o, &block_perfect_learner(&o, s, &mut r).unwrap()).unwrap()
            })
            .collect()
    });
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn risk_extremes() {
    let mut r = rng::seeded(10);
    let o = haar_orthogonal(4, &mut r).unwrap();
    assert!(risk_closed_form(&o, &o).unwrap().abs() < 1e-15);
    let neg = PhaseSpaceMap::new(-o.matrix(), MapKind::Orthogonal).unwrap();
    assert!((risk_closed_form(&o, &neg).unwrap() - 1.0).abs() < 1e-15);
    let other = haar_orthogonal(6, &mut r).unwrap();
    assert!(risk_closed_form(&o, &other).is_err());
}

#[test]
fn closed_form_risk_is_sigma_independent() {
    let mut r = rng::seeded(11);
    for m in [1usize, 3] {
        let o = haar_orthogonal(2 * m, &mut r).unwrap();
        let t = haar_orthogonal(2 * m, &mut r).unwrap();
        let exact = risk_closed_form(&o, &t).unwrap();
        for (k, sigma) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let cfg = RiskConfig { sigma, mc_phase_samples: 40_000 };
            let (mean, se) = risk_phase_space_mc(&o, &t, &cfg, 100 + k as u64).unwrap();
            assert!((mean - exact).abs() <= 3.0 * se, "m {m} σ {sigma}: {mean} ± {se} vs {exact}");
        }
    }
    assert!(RiskConfig { sigma: 0.0, mc_phase_samples: 10 }.validate().is_err());
}

#[test]
fn expected_risk_examples() {
    let z = ZDist::default();
    let e = expected_risk_mc(1, 2, 1, MapKind::Orthogonal, &z, 2000, 1).unwrap();
    assert_eq!(e.theory, 0.0);
    assert!(e.mean.abs() <= 3.0 * e.stderr + 1e-12);
    let e = expected_risk_mc(2, 1, 2, MapKind::Orthogonal, &z, 4000, 2).unwrap();
    assert_eq!(e.theory, 0.25);
    assert!(e.agrees(0.01));
    let e = expected_risk_mc(2, 0, 1, MapKind::Orthogonal, &z, 4000, 3).unwrap();
    assert_eq!(e.theory, 0.5);
    assert!(e.agrees(0.01));
    assert!(matches!(expected_risk_mc(1, 2, 2, MapKind::Orthogonal, &z, 10, 0), Err(Error::InvalidArgument(_))));
    assert!(expected_risk_mc(2, 1, 1, MapKind::Symplectic, &z, 10, 0).is_err());
}

#[test]
fn risk_formula_agreement_orthogonal() {
    let z = ZDist::default();
    for m in 1..=3usize {
        for rank in 1..=3usize {
            for s in 0..=2 * m {
                if rank * s > 2 * m {
                    continue;
                }
                let e = expected_risk_mc(m, s, rank, MapKind::Orthogonal, &z, 2000, (m * 100 + rank * 10 + s) as u64).unwrap();
                assert!(e.agrees(0.01), "m {m} 𝔯 {rank} |S| {s}: {} vs {}", e.mean, e.theory);
            }
        }
    }
}

#[test]
fn symplectic_risk_without_squeezing_matches_formula() {
    let z = ZDist::Fixed { z: 1.0 };
    for m in 1..=3usize {
        for s in (0..=2 * m).step_by(2) {
            let e = expected_risk_mc(m, s, 1, MapKind::Symplectic, &z, 2000, (m * 10 + s) as u64).unwrap();
            assert!(e.agrees(0.01), "m {m} |S| {s}: {} vs {}", e.mean, e.theory);
        }
    }
}

#[test]
fn symplectic_risk_with_squeezing_scales_by_mean_squeeze() {
    // T Lᵀ = (I_s ⊕ Y) L Lᵀ and E[(LLᵀ)_kk] = E[(z² + z⁻²)/2]; for log-uniform z
    // E[z^{±2}] = ±(hi^{±2} − lo^{±2})/(2 ln(hi/lo)), so the mean risk is 1/2 − c·s/(4m).
    let (lo, hi) = (0.5f64, 2.0f64);
    let c = (hi * hi - lo * lo + lo.powi(-2) - hi.powi(-2)) / (4.0 * (hi / lo).ln());
    let z = ZDist::LogUniform { lo, hi };
    for (m, s) in [(1usize, 0usize), (1, 2), (2, 2), (3, 4)] {
        let e = expected_risk_mc(m, s, 1, MapKind::Symplectic, &z, 20_000, (m * 10 + s) as u64).unwrap();
        let want = 0.5 - c * s as f64 / (4.0 * m as f64);
        assert!((e.mean - want).abs() <= 4.0 * e.stderr, "m {m} |S| {s}: {} ± {} vs {want}", e.mean, e.stderr);
    }
}

#[test]
fn risk_distribution_is_left_invariant() {
    let (m, s, n) = (2usize, 1usize, 10_000u64);
    let q = haar_orthogonal_matrix(2 * m, &mut rng::seeded(12));
    let sample = |seed: u64, rotate: bool| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, i);
                let mut o = haar_orthogonal(2 * m, &mut r).unwrap();
                if rotate {
                    o = PhaseSpaceMap::new(&q * o.matrix(), MapKind::Orthogonal).unwrap();
                }
                let t = block_perfect_learner(&o, s, &mut r).unwrap();
                risk_closed_form(&o, &t).unwrap()
            })
            .collect()
    };
    let p = ks_p_value(sample(13, false), sample(14, true));
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn covariance_risk_examples() {
    let mut r = rng::seeded(15);
    let o = haar_orthogonal(6, &mut r).unwrap();
    let (mean, _) = covariance_risk_mc(&o, &o, 2.0, 50, &mut r).unwrap();
    assert!(mean.abs() < 1e-24);
    let neg = PhaseSpaceMap::new(-o.matrix(), MapKind::Orthogonal).unwrap();
    let (mean, _) = covariance_risk_mc(&o, &neg, 2.0, 50, &mut r).unwrap();
    assert!(mean.abs() < 1e-24);
    assert!(covariance_risk_mc(&o, &o, 1.0, 5, &mut r).is_err());
    for _ in 0..20 {
        let sigma = sample_covariance(3, 2.0, &mut r);
        assert!(((2.0 * &sigma).determinant() - 1.0).abs() < 1e-10);
        let top = sigma.symmetric_eigenvalues().max();
        assert!(top <= 1.0 + 1e-12);
    }
}

#[test]
fn covariance_risk_closed_form_structure() {
    let (m, d) = (10usize, 2.0f64);
    let ld = d.ln();
    let coef = (d - 1.0 / d).powi(2) / (8.0 * m as f64 * ld * ld);
    let first = (d * d - 1.0 / (d * d)) / (4.0 * ld) * (1.0 - 1.0 / (2.0 * (m as f64 + 1.0)));
    assert!((expected_covariance_risk(m, 0, d).unwrap() - (first - coef)).abs() < 1e-15);
    let diff = expected_covariance_risk(m, 2, d).unwrap() - expected_covariance_risk(m, 0, d).unwrap();
    assert!((diff + 4.0 * coef).abs() < 1e-14);
    assert!(expected_covariance_risk(m, 0, 1.0).is_err());
    assert!(expected_covariance_risk(0, 0, 2.0).is_err());
}

#[test]
fn covariance_risk_mc_full_agreement_vanishes() {
    let e = expected_covariance_risk_mc(2, 4, 2.0, 50, 10, 16).unwrap();
    assert!(e.mean.abs() < 1e-20);
    assert_eq!(e.d, Some(2.0));
    assert!(expected_covariance_risk_mc(2, 5, 2.0, 5, 5, 0).is_err());
}

#[test]
fn lemma1_identity_and_sign() {
    let id = DMatrix::<f64>::identity(6, 6);
    assert!((lemma1_ii_formula(&id) - 1.0).abs() < 1e-15);
    assert!((lemma1_ii_exact(&id) - 1.0).abs() < 1e-15);
    assert!(lemma1_ij_exact(&id).abs() < 1e-15);
    let e = lemma1_mc(&id, 0, 1, 1000, 1).unwrap();
    assert!((e.mean_ii - 1.0).abs() < 1e-12);
    assert!(e.mean_ij < 1e-24);
    let neg = -&id;
    let f = lemma1_mc(&neg, 0, 1, 1000, 1).unwrap();
    assert!((f.mean_ii - e.mean_ii).abs() < 1e-15);
    assert!((lemma1_ii_formula(&neg) - 1.0).abs() < 1e-15);
    assert!(lemma1_mc(&id, 2, 2, 10, 1).is_err());
}

#[test]
fn lemma1_random_orthogonal() {
    let l = haar_orthogonal_matrix(6, &mut rng::seeded(17));
    let e = lemma1_mc(&l, 0, 1, 100_000, 18).unwrap();
    let ii = lemma1_ii_formula(&l);
    assert!((e.mean_ii - ii).abs() <= 0.01 * ii, "ii {} vs {ii}", e.mean_ii);
    assert!((lemma1_ii_exact(&l) - ii).abs() < 1e-14);
    let ij = lemma1_ij_exact(&l);
    assert!((e.mean_ij - ij).abs() <= (0.01 * ij).max(3.0 * e.stderr_ij), "ij {} ± {} vs {ij}", e.mean_ij, e.stderr_ij);
    // Large-m form is an approximation only.
    assert!(lemma1_ij_asymptotic(&l).is_finite());
    assert!(lemma1_ij_formula(&l).is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn risk_range_for_orthogonal_pairs(seed in any::<u64>(), m in 1usize..4) {
        let mut r = rng::seeded(seed);
        let o = haar_orthogonal(2 * m, &mut r).unwrap();
        let t = haar_orthogonal(2 * m, &mut r).unwrap();
        let risk = risk_closed_form(&o, &t).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&risk));
    }

    #[test]
    fn symplectic_learner_stays_symplectic(seed in any::<u64>(), m in 1usize..4, half in 0usize..4) {
        let s = 2 * half.min(m);
        let mut r = rng::seeded(seed);
        let l = haar_symplectic_bloch_messiah(2 * m, &ZDist::default(), &mut r).unwrap();
        let t = block_perfect_learner(&l, s, &mut r).unwrap();
        prop_assert!(symplectic_error(t.matrix()) <= 1e-10);
    }
}
