//! Fock, coherent, two-mode squeezed, entangled coherent-Fock and thermal
//! states. Every constructor returns a unit-norm ket: amplitudes cut off at
//! the truncation are dropped and the remainder renormalized.

use std::f64::consts::FRAC_PI_4;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_to_modes, CMatrix, CVector, DensityMatrix, HilbertSpec, Ket, Operator, C64, ZERO};
use crate::gates::{beamsplitter_block, squeeze};

pub fn fock_state(n: usize, cutoff: usize) -> Result<Ket> {
    let spec = HilbertSpec::single(cutoff)?;
    if n >= cutoff {
        return Err(Error::OutOfRange(format!("Fock level {n} needs cutoff > {n}, got {cutoff}")));
    }
    Ket::basis(spec, &[n])
}

/// Probability mass of `|α⟩` on levels `n ≥ cutoff`.
pub fn coherent_tail_mass(alpha: C64, cutoff: usize) -> f64 {
    let x = alpha.norm_sqr();
    let mut term = (-x).exp();
    let mut kept = 0.0;
    for n in 0..cutoff {
        kept += term;
        term *= x / (n + 1) as f64;
    }
    (1.0 - kept).max(0.0)
}

fn coherent_amplitudes(alpha: C64, cutoff: usize) -> CVector {
    let mut amps = CVector::zeros(cutoff);
    let mut a = C64::new(1.0, 0.0);
    for n in 0..cutoff {
        if n > 0 {
            a *= alpha / (n as f64).sqrt();
        }
        amps[n] = a;
    }
    let norm = amps.norm();
    amps.unscale(norm)
}

pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<Ket> {
    let spec = HilbertSpec::single(cutoff)?;
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return invalid("coherent amplitude must be finite");
    }
    let tail = coherent_tail_mass(alpha, cutoff);
    if tail > 1e-6 {
        warn!("coherent state |α|² = {:.3} loses {tail:.2e} probability at cutoff {cutoff}", alpha.norm_sqr());
    }
    Ket::new(spec, coherent_amplitudes(alpha, cutoff))
}

/// Product coherent state `|α_1⟩ ⊗ … ⊗ |α_m⟩`.
pub fn multimode_coherent(alphas: &[C64], cutoff: usize) -> Result<Ket> {
    let (first, rest) = alphas.split_first().ok_or_else(|| Error::InvalidArgument("no modes given".into()))?;
    let mut ket = coherent_state(*first, cutoff)?;
    for a in rest {
        ket = ket.tensor(&coherent_state(*a, cutoff)?)?;
    }
    Ok(ket)
}

/// Phase-space mean `w = (q_1, p_1, …, q_m, p_m)` to amplitudes `α_j = (q_j + i p_j)/√2`.
pub fn amplitudes_from_phase_space(w: &[f64]) -> Result<Vec<C64>> {
    if w.is_empty() || w.len() % 2 != 0 {
        return invalid("phase-space vector must have even, nonzero length");
    }
    Ok(w.chunks(2).map(|c| C64::new(c[0], c[1]) / 2f64.sqrt()).collect())
}

pub fn phase_space_from_amplitudes(alphas: &[C64]) -> Vec<f64> {
    alphas.iter().flat_map(|a| [a.re * 2f64.sqrt(), a.im * 2f64.sqrt()]).collect()
}

/// Squared Schmidt coefficients of one truncated TMSS pair, renormalized:
/// `p_n ∝ tanh^{2n} r` for `n < cutoff`.
pub fn tmss_weights(r: f64, cutoff: usize) -> Vec<f64> {
    let rho = r.tanh().powi(2);
    let mut w = Vec::with_capacity(cutoff);
    let mut p = 1.0;
    for _ in 0..cutoff {
        w.push(p);
        p *= rho;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Pre-normalization probability lost by truncating one pair at `cutoff`.
pub fn tmss_tail_mass(r: f64, cutoff: usize) -> f64 {
    r.tanh().powi(2 * cutoff as i32)
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0) || !r.is_finite() {
        return invalid(format!("squeezing must be finite and non-negative, got {r}"));
    }
    Ok(())
}

/// `m` TMSS pairs on `2m` modes ordered `[A_1..A_m, B_1..B_m]`.
pub fn tmss(r: f64, m: usize, cutoff: usize) -> Result<Ket> {
    check_r(r)?;
    let spec = HilbertSpec::new(cutoff, 2 * m)?;
    let half = HilbertSpec::new(cutoff, m)?;
    let c: Vec<f64> = tmss_weights(r, cutoff).iter().map(|p| p.sqrt()).collect();
    let mut amps = CVector::zeros(spec.dim());
    for idx in 0..half.dim() {
        let amp: f64 = half.digits_of(idx).iter().map(|&n| c[n]).product();
        amps[idx * half.dim() + idx] = C64::new(amp, 0.0);
    }
    Ket::new(spec, amps)
}

/// TMSS prepared by squeezing `A_j` with `−r`, `B_j` with `+r`, then a 50:50
/// beamsplitter on each pair.
///
/// The squeezed vacua carry far more weight near the cutoff than the final
/// pair state, so each pair is simulated at a working cutoff of at least
/// `2·cutoff − 1` (more for strong squeezing) and truncated to `cutoff` at the
/// end. The beamsplitter conserves photon number and is applied sector by
/// sector, so no sector that feeds the kept levels is cut.
pub fn tmss_via_circuit(r: f64, m: usize, cutoff: usize) -> Result<Ket> {
    check_r(r)?;
    let spec = HilbertSpec::new(cutoff, 2 * m)?;
    if r == 0.0 {
        return Ok(Ket::vacuum(spec));
    }
    let pair = circuit_pair(r, cutoff)?;
    if m == 1 {
        return Ok(pair);
    }
    let half = HilbertSpec::new(cutoff, m)?;
    let p = pair.amplitudes();
    let mut amps = CVector::zeros(spec.dim());
    for a in 0..half.dim() {
        let da = half.digits_of(a);
        for b in 0..half.dim() {
            let db = half.digits_of(b);
            amps[a * half.dim() + b] = da.iter().zip(&db).map(|(&x, &y)| p[x * cutoff + y]).product();
        }
    }
    Ket::new(spec, amps)
}

/// Smallest working cutoff whose squeezed-vacuum tail is below `1e−13`,
/// bounded to keep the squeezer exponentials cheap.
fn squeeze_working_cutoff(r: f64, cutoff: usize) -> usize {
    let floor = 2 * cutoff - 1;
    let t = r.tanh();
    if t <= 0.0 {
        return floor;
    }
    let needed = ((1e-13f64).ln() / t.ln()).ceil() as usize + 8;
    needed.clamp(floor, floor.max(512))
}

fn circuit_pair(r: f64, cutoff: usize) -> Result<Ket> {
    let work = squeeze_working_cutoff(r, cutoff);
    let vac = Ket::vacuum(HilbertSpec::single(work)?);
    let a = squeeze(C64::new(-r, 0.0), work)?.apply(&vac)?;
    let b = squeeze(C64::new(r, 0.0), work)?.apply(&vac)?;
    let (a, b) = (a.amplitudes(), b.amplitudes());
    let mut out = CVector::zeros(cutoff * cutoff);
    for total in 0..=(2 * cutoff - 2) {
        let block = beamsplitter_block(FRAC_PI_4, 0.0, total, 0, total);
        let input = CVector::from_fn(total + 1, |k, _| a[k] * b[total - k]);
        let output = block * input;
        for na in total.saturating_sub(cutoff - 1)..=total.min(cutoff - 1) {
            out[na * cutoff + total - na] = output[na];
        }
    }
    Ket::new(HilbertSpec::new(cutoff, 2)?, out)?.normalized()
}

/// Single TMSS pair restricted to `rank` Schmidt terms, on a pair space of
/// cutoff `max(rank, 2)`.
pub fn truncated_tmss(r: f64, rank: usize) -> Result<Ket> {
    check_r(r)?;
    if rank < 1 {
        return invalid("rank must be at least 1");
    }
    let cutoff = rank.max(2);
    let spec = HilbertSpec::new(cutoff, 2)?;
    let t = r.tanh();
    // 1/(1 + t² + … + t^{2(rank−1)}) = (1 − t²)/(1 − t^{2 rank}) without the 0/0 at large r.
    let norm: f64 = (0..rank).map(|k| t.powi(2 * k as i32)).sum();
    let mut amps = CVector::zeros(spec.dim());
    for n in 0..rank {
        amps[n * cutoff + n] = C64::new(t.powi(n as i32) / norm.sqrt(), 0.0);
    }
    Ket::new(spec, amps)
}

/// Numerical rank of a set of real vectors.
pub fn numerical_rank(vectors: &[Vec<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let dim = vectors[0].len();
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count()
}

/// `(1/√𝔯) Σ_k |w_k⟩_X ⊗ |k⟩_R` on `m` system modes plus a register mode (the
/// last mode) with the same cutoff; register levels are `1..=𝔯`.
pub fn entangled_coherent_fock(mean_vectors: &[Vec<f64>], cutoff: usize) -> Result<Ket> {
    let rank = mean_vectors.len();
    if rank == 0 {
        return invalid("need at least one mean vector");
    }
    if rank >= cutoff {
        return invalid(format!("rank {rank} needs cutoff > {rank}, got {cutoff}"));
    }
    let len = mean_vectors[0].len();
    if mean_vectors.iter().any(|w| w.len() != len) {
        return invalid("mean vectors must share one dimension");
    }
    if numerical_rank(mean_vectors) < rank {
        return invalid("mean vectors are linearly dependent");
    }
    let m = len / 2;
    let spec = HilbertSpec::new(cutoff, m + 1)?;
    let mut amps = CVector::zeros(spec.dim());
    for (k, w) in mean_vectors.iter().enumerate() {
        let sys = multimode_coherent(&amplitudes_from_phase_space(w)?, cutoff)?;
        let reg = k + 1;
        for (i, a) in sys.amplitudes().iter().enumerate() {
            amps[i * cutoff + reg] += *a;
        }
    }
    Ket::new(spec, amps)?.normalized()
}

/// `ρ_β(r) ∝ Σ tanh^{2n} r |n⟩⟨n|`, renormalized after truncation.
pub fn thermal_state(r: f64, cutoff: usize) -> Result<DensityMatrix> {
    if !(r > 0.0) || !r.is_finite() {
        return invalid(format!("thermal state needs r > 0, got {r}"));
    }
    let spec = HilbertSpec::single(cutoff)?;
    let w = tmss_weights(r, cutoff);
    let mat = CMatrix::from_fn(cutoff, cutoff, |i, j| if i == j { C64::new(w[i], 0.0) } else { ZERO });
    DensityMatrix::new(spec, mat)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainingKind {
    Coherent,
    EntangledCoherentFock,
}

/// Training inputs for the coherent-state costs. Targets are `U|input⟩`
/// and are produced on demand by [`TrainingSet::pairs`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub kind: TrainingKind,
    pub inputs: Vec<Ket>,
    /// Per input, its `𝔯` phase-space means.
    pub mean_vectors: Vec<Vec<Vec<f64>>>,
    pub rank: usize,
    pub energy_bound: f64,
    pub modes: usize,
    pub cutoff: usize,
}

/// Uniform sample from the ball `‖α‖² ≤ energy` in `ℂ^m`, by rejection.
pub fn sample_coherent_amplitudes<R: Rng + ?Sized>(m: usize, energy: f64, rng: &mut R) -> Vec<C64> {
    let radius = energy.max(0.0).sqrt();
    if radius == 0.0 {
        return vec![ZERO; m];
    }
    loop {
        let x: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-radius..=radius)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= energy {
            return x.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        }
    }
}

impl TrainingSet {
    pub fn coherent<R: Rng + ?Sized>(m: usize, k: usize, energy: f64, cutoff: usize, rng: &mut R) -> Result<Self> {
        if k == 0 {
            return invalid("training set needs at least one state");
        }
        let alphas: Vec<Vec<C64>> = (0..k).map(|_| sample_coherent_amplitudes(m, energy, rng)).collect();
        Self::from_amplitudes(&alphas, energy, cutoff)
    }

    pub fn from_amplitudes(alphas: &[Vec<C64>], energy: f64, cutoff: usize) -> Result<Self> {
        let m = alphas.first().map(|a| a.len()).unwrap_or(0);
        if alphas.is_empty() || m == 0 {
            return invalid("training set needs at least one state");
        }
        let mut inputs = Vec::new();
        let mut means = Vec::new();
        for a in alphas {
            if a.len() != m {
                return invalid("training states must share one mode count");
            }
            if a.iter().map(|z| z.norm_sqr()).sum::<f64>() > energy + 1e-12 {
                return invalid("training state exceeds the energy bound");
            }
            inputs.push(multimode_coherent(a, cutoff)?);
            means.push(vec![phase_space_from_amplitudes(a)]);
        }
        Ok(Self { kind: TrainingKind::Coherent, inputs, mean_vectors: means, rank: 1, energy_bound: energy, modes: m, cutoff })
    }

    /// `k` entangled coherent-Fock states, each built from `rank` linearly
    /// independent means drawn from the energy ball.
    pub fn entangled<R: Rng + ?Sized>(
        m: usize,
        k: usize,
        rank: usize,
        energy: f64,
        cutoff: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if k == 0 {
            return invalid("training set needs at least one state");
        }
        if rank == 0 || rank > 2 * m {
            return invalid(format!("rank {rank} impossible for {m} modes"));
        }
        let mut means = Vec::new();
        for _ in 0..k {
            let mut tries = 0;
            let ws = loop {
                let ws: Vec<Vec<f64>> = (0..rank)
                    .map(|_| phase_space_from_amplitudes(&sample_coherent_amplitudes(m, energy, rng)))
                    .collect();
                if numerical_rank(&ws) == rank {
                    break ws;
                }
                tries += 1;
                if tries > 100 {
                    return Err(Error::DegenerateInput("could not draw independent mean vectors".into()));
                }
            };
            means.push(ws);
        }
        Self::from_mean_vectors(means, energy, cutoff)
    }

    pub fn from_mean_vectors(means: Vec<Vec<Vec<f64>>>, energy: f64, cutoff: usize) -> Result<Self> {
        let rank = means.first().map(|w| w.len()).unwrap_or(0);
        if means.is_empty() || rank == 0 {
            return invalid("training set needs at least one state");
        }
        let m = means[0][0].len() / 2;
        let mut inputs = Vec::new();
        for ws in &means {
            if ws.len() != rank {
                return invalid("all training states must share one rank");
            }
            for w in ws {
                if w.iter().map(|x| x * x).sum::<f64>() / 2.0 > energy + 1e-12 {
                    return invalid("training mean exceeds the energy bound");
                }
            }
            inputs.push(entangled_coherent_fock(ws, cutoff)?);
        }
        Ok(Self {
            kind: TrainingKind::EntangledCoherentFock,
            inputs,
            mean_vectors: means,
            rank,
            energy_bound: energy,
            modes: m,
            cutoff,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// `(input, U·input)` pairs; `U` acts on the system modes only.
    pub fn pairs(&self, target: &Operator) -> Result<Vec<(Ket, Ket)>> {
        let sys: Vec<usize> = (0..self.modes).collect();
        self.inputs
            .iter()
            .map(|psi| Ok((psi.clone(), apply_to_modes(psi, target, &sys)?)))
            .collect()
    }
}
