mod common;

use common::*;
use cvcompile::fock::*;
use cvcompile::rng;
use cvcompile::states::*;
use cvcompile::Error;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn fock_states() {
    let vac = fock_state(0, 6).unwrap();
    assert_eq!(vac, Ket::vacuum(HilbertSpec::single(6).unwrap()));
    let a = fock_state(3, 6).unwrap();
    let b = fock_state(4, 6).unwrap();
    assert!((inner_product(&a, &a).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, 0.0));
    assert!(matches!(fock_state(6, 6), Err(Error::OutOfRange(_))));
}

#[test]
fn coherent_state_examples() {
    let vac = coherent_state(c(0.0, 0.0), 10).unwrap();
    assert!(max_diff_vec(vac.amplitudes(), Ket::vacuum(HilbertSpec::single(10).unwrap()).amplitudes()) < 1e-15);
    for alpha in [c(1.0, 0.0), c(0.0, 1.0), c(0.6, -0.8)] {
        let k = coherent_state(alpha, 50).unwrap();
        assert!((k.norm() - 1.0).abs() < 1e-14);
        assert!((k.amplitudes()[0].norm_sqr() - (-1.0f64).exp()).abs() < 1e-9);
    }
    // Poisson weights at a larger amplitude.
    let alpha = c(1.5, 0.5);
    let k = coherent_state(alpha, 50).unwrap();
    let x = alpha.norm_sqr();
    let mut p = (-x).exp();
    for n in 0..20 {
        assert!((k.amplitudes()[n].norm_sqr() - p).abs() < 1e-12, "level {n}");
        p *= x / (n + 1) as f64;
    }
    assert!(coherent_tail_mass(c(3.0, 0.0), 10) > 1e-2);
}

#[test]
fn phase_space_round_trip() {
    let w = [1.0, -2.0, 0.5, 3.0];
    let a = amplitudes_from_phase_space(&w).unwrap();
    assert!((a[0] - c(1.0, -2.0) / 2f64.sqrt()).norm() < 1e-15);
    let back = phase_space_from_amplitudes(&a);
    for (x, y) in w.iter().zip(&back) {
        assert!((x - y).abs() < 1e-14);
    }
    // Energy |α|² = ‖w‖²/2.
    let e: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    assert!((e - w.iter().map(|v| v * v).sum::<f64>() / 2.0).abs() < 1e-14);
    assert!(amplitudes_from_phase_space(&[1.0]).is_err());
}

#[test]
fn tmss_structure() {
    let spec = HilbertSpec::new(5, 2).unwrap();
    let vac = tmss(0.0, 1, 5).unwrap();
    assert_eq!(vac, Ket::vacuum(spec));
    let r = 0.8;
    let psi = tmss(r, 1, 30).unwrap();
    let sp = psi.spec();
    for n in 0..10 {
        let a = psi.amplitudes()[sp.index_of(&[n, n]).unwrap()].re;
        let b = psi.amplitudes()[sp.index_of(&[n + 1, n + 1]).unwrap()].re;
        assert!((b / a - r.tanh()).abs() < 1e-12);
        assert_eq!(psi.amplitudes()[sp.index_of(&[n, n + 1]).unwrap()], c(0.0, 0.0));
    }
    assert!((psi.norm() - 1.0).abs() < 1e-14);
    // Pairing is A_j with B_j = mode m + j.
    let two = tmss(0.5, 2, 4).unwrap();
    let s2 = two.spec();
    assert!(two.amplitudes()[s2.index_of(&[1, 2, 1, 2]).unwrap()].norm() > 0.0);
    assert_eq!(two.amplitudes()[s2.index_of(&[1, 2, 2, 1]).unwrap()], c(0.0, 0.0));
}

#[test]
fn tmss_tail_is_acknowledged() {
    let tail = tmss_tail_mass(2.5, 50);
    assert!((tail - 2.5f64.tanh().powi(100)).abs() < 1e-15);
    assert!(tail > 0.25 && tail < 0.27, "tail {tail}");
    // Renormalized weights still sum to one.
    let w = tmss_weights(2.5, 50);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}

#[test]
fn tmss_circuit_route_agrees() {
    for r in [0.0, 0.3, 1.0, 1.5] {
        let a = tmss(r, 1, 50).unwrap();
        let b = tmss_via_circuit(r, 1, 50).unwrap();
        assert!((b.norm() - 1.0).abs() < 1e-8);
        let f = a.fidelity(&b).unwrap();
        assert!(f >= 1.0 - 1e-6, "r {r} fidelity {f}");
    }
    let a = tmss(0.4, 2, 10).unwrap();
    let b = tmss_via_circuit(0.4, 2, 10).unwrap();
    assert!(a.fidelity(&b).unwrap() >= 1.0 - 1e-6);
}

#[test]
fn truncated_tmss_limits() {
    let one = truncated_tmss(0.7, 1).unwrap();
    assert_eq!(one, Ket::vacuum(HilbertSpec::new(2, 2).unwrap()));
    for rank in [2usize, 3, 5] {
        let psi = truncated_tmss(20.0, rank).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let sp = psi.spec();
        for n in 0..rank {
            let a = psi.amplitudes()[sp.index_of(&[n, n]).unwrap()];
            assert!((a - c(1.0 / (rank as f64).sqrt(), 0.0)).norm() < 1e-6);
        }
    }
    // Prefactor √((1 − t²)/(1 − t^{2𝔯})).
    let (r, rank) = (0.6f64, 4);
    let t = r.tanh();
    let pre = ((1.0 - t * t) / (1.0 - t.powi(2 * rank as i32))).sqrt();
    let psi = truncated_tmss(r, rank).unwrap();
    assert!((psi.amplitudes()[0].re - pre).abs() < 1e-15);
    assert!(truncated_tmss(0.5, 0).is_err());
}

#[test]
fn entangled_coherent_fock_register() {
    let w = vec![vec![0.7, -0.2]];
    let psi = entangled_coherent_fock(&w, 12).unwrap();
    let coh = coherent_state(c(0.7, -0.2) / 2f64.sqrt(), 12).unwrap();
    let want = coh.tensor(&fock_state(1, 12).unwrap()).unwrap();
    assert!(max_diff_vec(psi.amplitudes(), want.amplitudes()) < 1e-14);

    let ws = vec![vec![0.5, 0.1, -0.3, 0.2], vec![-0.2, 0.4, 0.1, 0.3], vec![0.1, 0.1, 0.6, -0.1]];
    let psi = entangled_coherent_fock(&ws, 6).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-14);
    let reg = partial_trace(&psi, &[2]).unwrap();
    for k in 0..6 {
        let want = if (1..=3).contains(&k) { 1.0 / 3.0 } else { 0.0 };
        assert!((reg.matrix()[(k, k)].re - want).abs() < 1e-12, "level {k}");
    }
    let dependent = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
    assert!(matches!(entangled_coherent_fock(&dependent, 6), Err(Error::InvalidArgument(_))));
    assert!(entangled_coherent_fock(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).is_err());
}

#[test]
fn entangled_coherent_fock_entropy_approaches_log_rank() {
    // ‖w_k‖ = 6 in orthogonal phase-space directions: nearly orthogonal coherent states.
    let ws = vec![vec![6.0, 0.0], vec![0.0, 6.0]];
    let psi = entangled_coherent_fock(&ws, 60).unwrap();
    let s = partial_trace(&psi, &[1]).unwrap().entropy_bits();
    assert!((s - 1.0).abs() < 0.05, "entropy {s}");
    let ws = vec![vec![6.0, 0.0, 0.0, 0.0], vec![0.0, 6.0, 0.0, 0.0], vec![0.0, 0.0, 6.0, 0.0]];
    let psi = entangled_coherent_fock(&ws, 40).unwrap();
    let s = partial_trace(&psi, &[2]).unwrap().entropy_bits();
    assert!((s - 3f64.log2()).abs() < 0.05, "entropy {s}");
}

#[test]
fn thermal_state_moments() {
    for r in [0.2, 0.5, 1.0] {
        let rho = thermal_state(r, 50).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        let mean: f64 = (0..50).map(|n| n as f64 * rho.matrix()[(n, n)].re).sum();
        assert!((mean - r.sinh().powi(2)).abs() < 1e-8, "r {r}");
        assert_eq!(rho.matrix()[(0, 1)], c(0.0, 0.0));
    }
    assert!(thermal_state(0.0, 5).is_err());
}

#[test]
fn coherent_training_sets() {
    let mut rng = rng::seeded(1);
    let set = TrainingSet::coherent(2, 5, 1.0, 8, &mut rng).unwrap();
    assert_eq!(set.len(), 5);
    assert_eq!(set.rank, 1);
    for (ket, w) in set.inputs.iter().zip(&set.mean_vectors) {
        assert!(w[0].iter().map(|x| x * x).sum::<f64>() / 2.0 <= 1.0 + 1e-12);
        assert_eq!(ket.spec(), HilbertSpec::new(8, 2).unwrap());
    }
    let u = cvcompile::gates::rotation(0.3, 8).unwrap().kron(&Operator::identity(HilbertSpec::single(8).unwrap())).unwrap();
    let pairs = set.pairs(&u).unwrap();
    assert!(max_diff_vec(pairs[0].1.amplitudes(), u.apply(&pairs[0].0).unwrap().amplitudes()) < 1e-15);
    assert!(TrainingSet::from_amplitudes(&[vec![c(2.0, 0.0)]], 1.0, 8).is_err());
}

#[test]
fn entangled_training_sets() {
    let mut rng = rng::seeded(2);
    let set = TrainingSet::entangled(1, 3, 2, 1.0, 10, &mut rng).unwrap();
    assert_eq!(set.kind, TrainingKind::EntangledCoherentFock);
    assert_eq!(set.inputs[0].spec(), HilbertSpec::new(10, 2).unwrap());
    for ws in &set.mean_vectors {
        assert_eq!(numerical_rank(ws), 2);
    }
    assert!(TrainingSet::entangled(1, 1, 3, 1.0, 10, &mut rng).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constructors_return_unit_norm(re in -1.2f64..1.2, im in -1.2f64..1.2, r in 0.0f64..2.0, rank in 1usize..6) {
        prop_assert!((coherent_state(c(re, im), 30).unwrap().norm() - 1.0).abs() <= 1e-12);
        prop_assert!((tmss(r, 1, 12).unwrap().norm() - 1.0).abs() <= 1e-12);
        prop_assert!((truncated_tmss(r, rank).unwrap().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sampled_amplitudes_respect_energy(seed in any::<u64>(), m in 1usize..4, e in 0.0f64..3.0) {
        let mut rng = rng::seeded(seed);
        let a = sample_coherent_amplitudes(m, e, &mut rng);
        prop_assert_eq!(a.len(), m);
        prop_assert!(a.iter().map(|z| z.norm_sqr()).sum::<f64>() <= e + 1e-12);
    }
}
