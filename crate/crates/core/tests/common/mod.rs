#![allow(dead_code)]

use cvcompile::fock::{CMatrix, HilbertSpec, Ket, Operator, C64};
use cvcompile::rng::Rng;
use rand::Rng as _;
use rand_distr::StandardNormal;

pub fn complex_normal(rng: &mut Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn random_hermitian(dim: usize, scale: f64, rng: &mut Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    (&g + g.adjoint()).map(|z| z * (scale / 2.0))
}

pub fn random_ket(spec: HilbertSpec, rng: &mut Rng) -> Ket {
    let amps = cvcompile::CVector::from_fn(spec.dim(), |_, _| complex_normal(rng));
    Ket::new(spec, amps).unwrap().normalized().unwrap()
}

pub fn random_unitary(spec: HilbertSpec, rng: &mut Rng) -> Operator {
    Operator::new(spec, cvcompile::haar::haar_unitary(spec.dim(), rng)).unwrap()
}

pub fn random_diagonal_unitary(spec: HilbertSpec, rng: &mut Rng) -> Operator {
    let d: Vec<C64> = (0..spec.dim()).map(|_| C64::from_polar(1.0, rng.random_range(-3.2..3.2))).collect();
    Operator::from_diagonal(spec, &d).unwrap()
}

/// e^{−iH} by scaling and squaring of a truncated Taylor series.
pub fn expm_taylor(h: &CMatrix) -> CMatrix {
    let n = h.nrows();
    let a = h.map(|z| z * C64::new(0.0, -1.0));
    let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.1 {
        s += 1;
    }
    let a = a.map(|z| z / 2f64.powi(s));
    let mut result = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &a / C64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Dense embedding of `gate` acting on `targets` of a `spec` space, built
/// entry by entry from digit decompositions.
pub fn dense_embed(gate: &Operator, targets: &[usize], spec: HilbertSpec) -> CMatrix {
    let gspec = gate.spec();
    let dim = spec.dim();
    CMatrix::from_fn(dim, dim, |i, j| {
        let di = spec.digits_of(i);
        let dj = spec.digits_of(j);
        for m in 0..spec.modes() {
            if !targets.contains(&m) && di[m] != dj[m] {
                return C64::new(0.0, 0.0);
            }
        }
        let ti: Vec<usize> = targets.iter().map(|&t| di[t]).collect();
        let tj: Vec<usize> = targets.iter().map(|&t| dj[t]).collect();
        gate.matrix()[(gspec.index_of(&ti).unwrap(), gspec.index_of(&tj).unwrap())]
    })
}

pub fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_diff_vec(a: &cvcompile::CVector, b: &cvcompile::CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
