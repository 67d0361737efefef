//! No-Free-Lunch Monte Carlo over phase-space maps.
//!
//! Phase-space vectors are rows in `(q₁, p₁, …, q_m, p_m)` order and maps act
//! on the right, `w ↦ wO`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::haar::{haar_orthogonal_matrix, haar_unitary};
use crate::rng;

pub type RMatrix = DMatrix<f64>;

const GROUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Orthogonal,
    Symplectic,
}

/// `Δ = ⊕_m [[0, 1], [−1, 0]]`.
pub fn symplectic_form(m: usize) -> RMatrix {
    let mut d = RMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        d[(2 * j, 2 * j + 1)] = 1.0;
        d[(2 * j + 1, 2 * j)] = -1.0;
    }
    d
}

pub fn orthogonality_error(m: &RMatrix) -> f64 {
    let n = m.nrows();
    (m.transpose() * m - RMatrix::identity(n, n)).amax()
}

pub fn symplectic_error(m: &RMatrix) -> f64 {
    let delta = symplectic_form(m.nrows() / 2);
    (m.transpose() * &delta * m - delta).amax()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceMap {
    matrix: RMatrix,
    kind: MapKind,
}

impl PhaseSpaceMap {
    pub fn new(matrix: RMatrix, kind: MapKind) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n % 2 != 0 || matrix.ncols() != n {
            return invalid(format!("phase-space map must be 2m×2m, got {}×{}", n, matrix.ncols()));
        }
        let err = match kind {
            MapKind::Orthogonal => orthogonality_error(&matrix),
            MapKind::Symplectic => symplectic_error(&matrix),
        };
        if !(err <= GROUP_TOL) {
            return invalid(format!("{kind:?} invariant violated by {err:.3e}"));
        }
        Ok(Self { matrix, kind })
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.matrix
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn modes(&self) -> usize {
        self.dim() / 2
    }
}

fn check_dim(dim: usize) -> Result<usize> {
    if dim < 2 || dim % 2 != 0 {
        return invalid(format!("phase-space dimension must be even and ≥ 2, got {dim}"));
    }
    Ok(dim / 2)
}

pub fn haar_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PhaseSpaceMap> {
    check_dim(dim)?;
    PhaseSpaceMap::new(haar_orthogonal_matrix(dim, rng), MapKind::Orthogonal)
}

/// Real `2m×2m` form of a passive `U ∈ U(m)`: block `(j, k)` is
/// `[[Re U, −Im U], [Im U, Re U]]_{jk}`. The image is `Orth(2m) ∩ Sp(2m, ℝ)`.
pub fn embed_unitary(u: &crate::CMatrix) -> RMatrix {
    let m = u.nrows();
    let mut out = RMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for k in 0..m {
            let z = u[(j, k)];
            out[(2 * j, 2 * k)] = z.re;
            out[(2 * j, 2 * k + 1)] = -z.im;
            out[(2 * j + 1, 2 * k)] = z.im;
            out[(2 * j + 1, 2 * k + 1)] = z.re;
        }
    }
    out
}

/// Haar sample of `Orth(2m) ∩ Sp(2m, ℝ)` via `U(m)`.
pub fn haar_orthogonal_symplectic<R: Rng + ?Sized>(m: usize, rng: &mut R) -> RMatrix {
    embed_unitary(&haar_unitary(m, rng))
}

/// Distribution of the Bloch-Messiah squeezing factors `z_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ZDist {
    /// `ln z` uniform on `[ln lo, ln hi]`.
    LogUniform { lo: f64, hi: f64 },
    Fixed { z: f64 },
}

impl Default for ZDist {
    fn default() -> Self {
        Self::LogUniform { lo: 0.5, hi: 2.0 }
    }
}

impl ZDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::LogUniform { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
            Self::Fixed { z } => z > 0.0 && z.is_finite(),
        };
        if !ok {
            return invalid(format!("bad squeezing-factor distribution {self:?}"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::LogUniform { lo, hi } if hi > lo => rng.random_range(lo.ln()..hi.ln()).exp(),
            Self::LogUniform { lo, .. } => lo,
            Self::Fixed { z } => z,
        }
    }
}

/// `Z = ⊕ diag(z_j, 1/z_j)`.
pub fn squeeze_block<R: Rng + ?Sized>(m: usize, z: &ZDist, rng: &mut R) -> RMatrix {
    let mut d = RMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        let zj = z.sample(rng);
        d[(2 * j, 2 * j)] = zj;
        d[(2 * j + 1, 2 * j + 1)] = 1.0 / zj;
    }
    d
}

fn bloch_messiah_matrix<R: Rng + ?Sized>(m: usize, z: &ZDist, rng: &mut R) -> RMatrix {
    let o1 = haar_orthogonal_symplectic(m, rng);
    let zb = squeeze_block(m, z, rng);
    let o2 = haar_orthogonal_symplectic(m, rng);
    o1 * zb * o2
}

/// `L = O₁ Z O₂` with `O₁, O₂` Haar on `Orth(2m) ∩ Sp(2m, ℝ)`.
pub fn haar_symplectic_bloch_messiah<R: Rng + ?Sized>(dim: usize, z: &ZDist, rng: &mut R) -> Result<PhaseSpaceMap> {
    let m = check_dim(dim)?;
    z.validate()?;
    PhaseSpaceMap::new(bloch_messiah_matrix(m, z, rng), MapKind::Symplectic)
}

/// Sample of the target group for `kind`.
pub fn sample_target<R: Rng + ?Sized>(m: usize, kind: MapKind, z: &ZDist, rng: &mut R) -> Result<PhaseSpaceMap> {
    match kind {
        MapKind::Orthogonal => haar_orthogonal(2 * m, rng),
        MapKind::Symplectic => haar_symplectic_bloch_messiah(2 * m, z, rng),
    }
}

/// `T_S = (I_s ⊕ Y)·target`, so `w T_S = w·target` on the first `s`
/// coordinates. `Y` is Haar on `Orth(2m − s)` (orthogonal kind) or
/// `W₁ F W₂` with Haar orthogonal-symplectic `W`s (symplectic kind, `s` even).
pub fn block_perfect_learner<R: Rng + ?Sized>(target: &PhaseSpaceMap, s: usize, rng: &mut R) -> Result<PhaseSpaceMap> {
    block_perfect_learner_with(target, s, &ZDist::default(), rng)
}

pub fn block_perfect_learner_with<R: Rng + ?Sized>(
    target: &PhaseSpaceMap,
    s: usize,
    z: &ZDist,
    rng: &mut R,
) -> Result<PhaseSpaceMap> {
    let n = target.dim();
    if s > n {
        return invalid(format!("agreement dimension {s} exceeds {n}"));
    }
    let rest = n - s;
    let y = match target.kind() {
        MapKind::Orthogonal => haar_orthogonal_matrix(rest, rng),
        MapKind::Symplectic => {
            if s % 2 != 0 {
                return invalid(format!("symplectic agreement dimension must be even, got {s}"));
            }
            z.validate()?;
            bloch_messiah_matrix(rest / 2, z, rng)
        }
    };
    let mut block = RMatrix::identity(n, n);
    block.view_mut((s, s), (rest, rest)).copy_from(&y);
    PhaseSpaceMap::new(block * target.matrix(), target.kind())
}

/// `1/2 − Tr(T Oᵀ)/(4m)`.
pub fn risk_closed_form(o: &PhaseSpaceMap, t: &PhaseSpaceMap) -> Result<f64> {
    if o.dim() != t.dim() {
        return invalid(format!("dimension mismatch {} vs {}", o.dim(), t.dim()));
    }
    let tr = (t.matrix() * o.matrix().transpose()).trace();
    Ok(0.5 - tr / (4.0 * o.modes() as f64))
}

/// Width of the Gaussian input measure and the sample count of the
/// phase-space risk estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    pub sigma: f64,
    pub mc_phase_samples: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self { sigma: 1.0, mc_phase_samples: 20_000 }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.mc_phase_samples < 2 {
            return invalid("need at least two phase-space samples");
        }
        Ok(())
    }
}

/// Monte Carlo of `(1/8mσ) ∫ π(x) ‖xT − xO‖² dx` with `x ~ N(0, σ I)`;
/// returns `(mean, stderr)`.
pub fn risk_phase_space_mc(o: &PhaseSpaceMap, t: &PhaseSpaceMap, config: &RiskConfig, seed: u64) -> Result<(f64, f64)> {
    config.validate()?;
    if o.dim() != t.dim() {
        return invalid(format!("dimension mismatch {} vs {}", o.dim(), t.dim()));
    }
    let n = o.dim();
    let diff = t.matrix() - o.matrix();
    let scale = 1.0 / (8.0 * o.modes() as f64 * config.sigma);
    let sd = config.sigma.sqrt();
    let values: Vec<f64> = (0..config.mc_phase_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let x = nalgebra::RowDVector::<f64>::from_fn(n, |_, _| sd * r.sample::<f64, _>(rand_distr::StandardNormal));
            (x * &diff).norm_squared() * scale
        })
        .collect();
    Ok(rng::mean_stderr(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub theory: f64,
    pub m: usize,
    pub set_size: usize,
    pub rank: usize,
    /// Squeezing bound `D` for covariance-risk cells.
    pub d: Option<f64>,
}

impl RiskEstimate {
    pub fn deviation(&self) -> f64 {
        (self.mean - self.theory).abs()
    }

    /// `|mean − theory| ≤ max(3·stderr, floor)`.
    pub fn agrees(&self, floor: f64) -> bool {
        self.deviation() <= (3.0 * self.stderr).max(floor)
    }
}

/// `1/2 − 𝔯|S|/(4m)`.
pub fn expected_risk_theory(m: usize, set_size: usize, rank: usize) -> f64 {
    0.5 - (rank * set_size) as f64 / (4.0 * m as f64)
}

/// Expected risk of the block perfect learner with agreement dimension
/// `𝔯|S|`, over targets of `kind` (`z` is used by the symplectic kind).
pub fn expected_risk_mc(
    m: usize,
    set_size: usize,
    rank: usize,
    kind: MapKind,
    z: &ZDist,
    n_samples: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if m == 0 || rank == 0 {
        return invalid("need m ≥ 1 and rank ≥ 1");
    }
    let s = rank * set_size;
    if s > 2 * m {
        return invalid(format!("𝔯|S| = {s} exceeds 2m = {}", 2 * m));
    }
    if kind == MapKind::Symplectic && s % 2 != 0 {
        return invalid(format!("symplectic agreement dimension must be even, got {s}"));
    }
    if n_samples == 0 {
        return invalid("need at least one sample");
    }
    z.validate()?;
    let values: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let target = sample_target(m, kind, z, &mut r)?;
            let t = block_perfect_learner_with(&target, s, z, &mut r)?;
            risk_closed_form(&target, &t)
        })
        .collect();
    let (mean, stderr) = rng::mean_stderr(&values?);
    Ok(RiskEstimate { mean, stderr, n_samples, theory: expected_risk_theory(m, set_size, rank), m, set_size, rank, d: None })
}

fn check_d(d: f64) -> Result<()> {
    if !(d > 1.0 && d.is_finite()) {
        return invalid(format!("squeezing bound D must exceed 1, got {d}"));
    }
    Ok(())
}

/// Random pure centered covariance `Wᵀ diag(e^{−2r_j}/2, e^{2r_j}/2) W` with
/// `W` Haar orthogonal and `r_j` uniform in `[−½ log D, ½ log D]`.
pub fn sample_covariance<R: Rng + ?Sized>(m: usize, d: f64, rng: &mut R) -> RMatrix {
    let half = 0.5 * d.ln();
    let w = haar_orthogonal_matrix(2 * m, rng);
    let mut diag = RMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        let r = rng.random_range(-half..=half);
        diag[(2 * j, 2 * j)] = (-2.0 * r).exp() / 2.0;
        diag[(2 * j + 1, 2 * j + 1)] = (2.0 * r).exp() / 2.0;
    }
    w.transpose() * diag * w
}

/// `(1/m) E_Σ ‖TᵀΣT − OᵀΣO‖₂²` by Monte Carlo over `n_sigma` covariances;
/// returns `(mean, stderr)`.
pub fn covariance_risk_mc<R: Rng + ?Sized>(
    o: &PhaseSpaceMap,
    t: &PhaseSpaceMap,
    d: f64,
    n_sigma: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_d(d)?;
    if o.dim() != t.dim() {
        return invalid(format!("dimension mismatch {} vs {}", o.dim(), t.dim()));
    }
    if n_sigma == 0 {
        return invalid("need at least one covariance sample");
    }
    let m = o.modes();
    let (om, tm) = (o.matrix(), t.matrix());
    let values: Vec<f64> = (0..n_sigma)
        .map(|_| {
            let sigma = sample_covariance(m, d, rng);
            let a = tm.transpose() * &sigma * tm;
            let b = om.transpose() * &sigma * om;
            (a - b).norm_squared() / m as f64
        })
        .collect();
    Ok(rng::mean_stderr(&values))
}

/// `(D²−D⁻²)/(4 log D)·(1 − 1/(2(m+1))) − (D−D⁻¹)²(|S|²+1)/(8m(log D)²)`,
/// without the `O(m⁻²)` remainder.
pub fn expected_covariance_risk(m: usize, set_size: usize, d: f64) -> Result<f64> {
    check_d(d)?;
    if m == 0 {
        return invalid("need m ≥ 1");
    }
    let (mf, s, ld) = (m as f64, set_size as f64, d.ln());
    let first = (d * d - 1.0 / (d * d)) / (4.0 * ld) * (1.0 - 1.0 / (2.0 * (mf + 1.0)));
    let second = (d - 1.0 / d).powi(2) * (s * s + 1.0) / (8.0 * mf * ld * ld);
    Ok(first - second)
}

/// Covariance risk averaged over Haar `O` and the block learner with
/// agreement dimension `|S|`: `n_maps` `(O, Y)` draws, each averaged over
/// `n_sigma` covariances. The stderr is over the per-map averages.
pub fn expected_covariance_risk_mc(
    m: usize,
    set_size: usize,
    d: f64,
    n_maps: usize,
    n_sigma: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    check_d(d)?;
    if set_size > 2 * m {
        return invalid(format!("|S| = {set_size} exceeds 2m = {}", 2 * m));
    }
    if n_maps == 0 {
        return invalid("need at least one map sample");
    }
    let values: Result<Vec<f64>> = (0..n_maps as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let o = haar_orthogonal(2 * m, &mut r)?;
            let t = block_perfect_learner(&o, set_size, &mut r)?;
            Ok(covariance_risk_mc(&o, &t, d, n_sigma, &mut r)?.0)
        })
        .collect();
    let (mean, stderr) = rng::mean_stderr(&values?);
    Ok(RiskEstimate {
        mean,
        stderr,
        n_samples: n_maps * n_sigma,
        theory: expected_covariance_risk(m, set_size, d)?,
        m,
        set_size,
        rank: 1,
        d: Some(d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Estimate {
    pub mean_ii: f64,
    pub stderr_ii: f64,
    pub mean_ij: f64,
    pub stderr_ij: f64,
    pub n_samples: usize,
}

/// Monte Carlo of `∫dW (e_iᵀWᵀLWe_i)²` and `∫dW (e_iᵀWᵀLWe_j)²` over Haar
/// orthogonal `W`.
pub fn lemma1_mc(l: &RMatrix, i: usize, j: usize, n_samples: usize, seed: u64) -> Result<Lemma1Estimate> {
    let n = l.nrows();
    if l.ncols() != n || n < 2 {
        return invalid("L must be square with dimension ≥ 2");
    }
    if i == j || i >= n || j >= n {
        return invalid(format!("need distinct indices below {n}, got {i}, {j}"));
    }
    if n_samples == 0 {
        return invalid("need at least one sample");
    }
    let pairs: Vec<(f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k);
            let w = haar_orthogonal_matrix(n, &mut r);
            let wi = w.column(i);
            let wj = w.column(j);
            let lwi = l * wi;
            let lwj = l * wj;
            (wi.dot(&lwi).powi(2), wi.dot(&lwj).powi(2))
        })
        .collect();
    let (ii, ij): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (mean_ii, stderr_ii) = rng::mean_stderr(&ii);
    let (mean_ij, stderr_ij) = rng::mean_stderr(&ij);
    Ok(Lemma1Estimate { mean_ii, stderr_ii, mean_ij, stderr_ij, n_samples })
}

/// `(2m + Tr L² + (Tr L)²)/(4m² + 4m)` for `L` of size `2m`.
pub fn lemma1_ii_formula(l: &RMatrix) -> f64 {
    let m = l.nrows() as f64 / 2.0;
    let tr = l.trace();
    (2.0 * m + (l * l).trace() + tr * tr) / (4.0 * m * m + 4.0 * m)
}

/// `Σ_r L_rr²/(4m²+4m) + Σ_{r≠r'} L_rr L_r'r' (2m+1)/(4m(m+1)(2m−1))`.
pub fn lemma1_ij_formula(l: &RMatrix) -> f64 {
    let m = l.nrows() as f64 / 2.0;
    let diag: Vec<f64> = l.diagonal().iter().copied().collect();
    let sq: f64 = diag.iter().map(|x| x * x).sum();
    let tr: f64 = diag.iter().sum();
    let cross = tr * tr - sq;
    sq / (4.0 * m * m + 4.0 * m) + cross * (2.0 * m + 1.0) / (4.0 * m * (m + 1.0) * (2.0 * m - 1.0))
}

/// Large-m form `(Tr L)²/(4m² + 4m)`.
pub fn lemma1_ij_asymptotic(l: &RMatrix) -> f64 {
    let m = l.nrows() as f64 / 2.0;
    l.trace().powi(2) / (4.0 * m * m + 4.0 * m)
}

/// Exact Haar integral for `i ≠ j` and any real `L` of size `n`:
/// `((n+1) Tr LLᵀ − Tr L² − (Tr L)²)/((n−1) n (n+2))`.
pub fn lemma1_ij_exact(l: &RMatrix) -> f64 {
    let n = l.nrows() as f64;
    let tr = l.trace();
    ((n + 1.0) * (l * l.transpose()).trace() - (l * l).trace() - tr * tr) / ((n - 1.0) * n * (n + 2.0))
}

/// Exact Haar integral for `i = j` and any real `L` of size `n`:
/// `(Tr LLᵀ + Tr L² + (Tr L)²)/(n (n+2))`; equals [`lemma1_ii_formula`] for
/// orthogonal `L`.
pub fn lemma1_ii_exact(l: &RMatrix) -> f64 {
    let n = l.nrows() as f64;
    let tr = l.trace();
    ((l * l.transpose()).trace() + (l * l).trace() + tr * tr) / (n * (n + 2.0))
}
