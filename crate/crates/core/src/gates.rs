//! Truncated CV gates.
//!
//! Conventions: `rotation(φ) = diag(e^{+iφn})`, `kerr(χ) = diag(e^{−iχn²})`,
//! `gaussian_unitary = e^{−iH}`. Non-number-conserving gates are built by
//! truncating the generator and exponentiating, so they are unitary only on
//! the low-lying part of the truncated space.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::fock::{expm_neg_i_hermitian, ladder_operator, CMatrix, HilbertSpec, Operator, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GateParams {
    pub alpha: C64,
    pub beta: C64,
    pub phi: f64,
    pub chi: f64,
    pub theta: f64,
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im, self.phi, self.chi, self.theta];
        if all.iter().any(|x| !x.is_finite()) {
            return invalid("gate parameters must be finite");
        }
        Ok(())
    }
}

const I: C64 = C64::new(0.0, 1.0);

fn ladder(cutoff: usize) -> Result<CMatrix> {
    Ok(ladder_operator(cutoff)?.into_matrix())
}

fn exp_single(h: CMatrix, cutoff: usize) -> Result<Operator> {
    Operator::new(HilbertSpec::single(cutoff)?, expm_neg_i_hermitian(&h))
}

/// `D(α) = e^{αa† − α*a}`.
pub fn displacement(alpha: C64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    if alpha == ZERO {
        return Ok(Operator::identity(spec));
    }
    let a = ladder(cutoff)?;
    let h = (a.adjoint() * alpha - &a * alpha.conj()) * I;
    exp_single(h, cutoff)
}

/// `S(z) = e^{(z* a² − z a†²)/2}`.
pub fn squeeze(z: C64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    if z == ZERO {
        return Ok(Operator::identity(spec));
    }
    let a = ladder(cutoff)?;
    let a2 = &a * &a;
    let h = (&a2 * z.conj() - a2.adjoint() * z) * (I * 0.5);
    exp_single(h, cutoff)
}

pub fn rotation(phi: f64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    let diag: Vec<C64> = (0..cutoff).map(|n| C64::from_polar(1.0, phi * n as f64)).collect();
    Operator::from_diagonal(spec, &diag)
}

pub fn kerr(chi: f64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    let diag: Vec<C64> = (0..cutoff).map(|n| C64::from_polar(1.0, -chi * (n * n) as f64)).collect();
    Operator::from_diagonal(spec, &diag)
}

/// Hermitian `H` with `e^{−iH} = e^{θ(a b† e^{iφ} − a† b e^{−iφ})}`; `a` is mode 0.
pub fn beamsplitter_generator(theta: f64, phi: f64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::new(cutoff, 2)?;
    let a = ladder(cutoff)?;
    let id = CMatrix::identity(cutoff, cutoff);
    let a_bdag = a.kronecker(&id) * id.kronecker(&a.adjoint());
    let g = (&a_bdag * C64::from_polar(1.0, phi) - a_bdag.adjoint() * C64::from_polar(1.0, -phi)) * C64::new(theta, 0.0);
    Operator::new(spec, g * I)
}

/// Two-mode beamsplitter, exponentiated block by block in the sectors of
/// fixed total photon number (the truncated generator preserves them).
pub fn beamsplitter(theta: f64, phi: f64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::new(cutoff, 2)?;
    let n = cutoff;
    let mut u = CMatrix::zeros(n * n, n * n);
    for total in 0..=(2 * n - 2) {
        let lo = total.saturating_sub(n - 1);
        let hi = total.min(n - 1);
        let members: Vec<usize> = (lo..=hi).map(|na| na * n + (total - na)).collect();
        let block = beamsplitter_block(theta, phi, total, lo, hi);
        for (j, &mj) in members.iter().enumerate() {
            for (i, &mi) in members.iter().enumerate() {
                u[(mi, mj)] = block[(i, j)];
            }
        }
    }
    Operator::new(spec, u)
}

/// Beamsplitter restricted to the sector `n_a + n_b = total`, on the basis
/// `|n_a, total − n_a⟩` for `n_a = lo..=hi`.
pub(crate) fn beamsplitter_block(theta: f64, phi: f64, total: usize, lo: usize, hi: usize) -> CMatrix {
    let k = hi - lo + 1;
    if theta == 0.0 || k == 1 {
        return CMatrix::identity(k, k);
    }
    let forward = C64::from_polar(theta, phi);
    // Local index s ↔ na = lo + s. `a b†` lowers na by one.
    let mut h = CMatrix::zeros(k, k);
    for s in 1..k {
        let na = (lo + s) as f64;
        let nb = (total - lo - s) as f64;
        let amp = (na * (nb + 1.0)).sqrt();
        // G = θ(e^{iφ} a b† − e^{−iφ} a† b); H = iG.
        h[(s - 1, s)] = I * forward * amp;
        h[(s, s - 1)] = (I * forward * amp).conj();
    }
    expm_neg_i_hermitian(&h)
}

/// `H = αa + α*a† + βa² + β*a†² + φa†a`.
pub fn gaussian_hamiltonian(alpha: C64, beta: C64, phi: f64, cutoff: usize) -> Result<Operator> {
    let spec = HilbertSpec::single(cutoff)?;
    let a = ladder(cutoff)?;
    let ad = a.adjoint();
    let a2 = &a * &a;
    let ad2 = a2.adjoint();
    let num = DMatrix::from_fn(cutoff, cutoff, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO });
    let h = &a * alpha + ad * alpha.conj() + a2 * beta + ad2 * beta.conj() + num * C64::new(phi, 0.0);
    Operator::new(spec, h)
}

/// `e^{−iH}` with the Gaussian Hamiltonian above.
pub fn gaussian_unitary(alpha: C64, beta: C64, phi: f64, cutoff: usize) -> Result<Operator> {
    let h = gaussian_hamiltonian(alpha, beta, phi, cutoff)?;
    exp_single(h.into_matrix(), cutoff)
}

/// Factored Gaussian `D(α)·S(z)·R(φ)`; a different parameterization of the
/// same gate family.
pub fn gaussian_factored(alpha: C64, z: C64, phi: f64, cutoff: usize) -> Result<Operator> {
    displacement(alpha, cutoff)?.compose(&squeeze(z, cutoff)?)?.compose(&rotation(phi, cutoff)?)
}
