//! Compiling costs. `U` is the target and `V` the ansatz; both act on the
//! same `m`-mode truncated space. TMSS-based costs use `m` pairs with the
//! `A` register first (`[A_1..A_m, B_1..B_m]`).

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_to_modes, contract_bra, inner_product, CMatrix, HilbertSpec, Ket, Operator, PartialTrace, C64, ZERO};
use crate::haar::haar_unitary;
use crate::rng;
use crate::states::{coherent_state, thermal_state, tmss, tmss_weights, truncated_tmss, TrainingKind, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    Hst,
    LeTmss,
    RTmss,
    RTmssNormalized,
    LeTmssLocal,
    Acs,
    AcsLocal,
    Ecfs,
}

impl CostKind {
    pub fn is_tmss(self) -> bool {
        matches!(self, Self::LeTmss | Self::RTmss | Self::RTmssNormalized | Self::LeTmssLocal)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Hst => "hst",
            Self::LeTmss => "le-tmss",
            Self::RTmss => "r-tmss",
            Self::RTmssNormalized => "r-tmss-normalized",
            Self::LeTmssLocal => "le-tmss-local",
            Self::Acs => "acs",
            Self::AcsLocal => "acs-local",
            Self::Ecfs => "ecfs",
        }
    }
}

/// Which cost to evaluate, with the data it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum CostSpec {
    Hst { truncation: usize },
    LeTmss { r: f64 },
    RTmss { r: f64 },
    RTmssNormalized { r: f64 },
    LeTmssLocal { r: f64 },
    Acs { training: TrainingSet },
    AcsLocal { training: TrainingSet },
    Ecfs { training: TrainingSet },
}

impl CostSpec {
    pub fn kind(&self) -> CostKind {
        match self {
            Self::Hst { .. } => CostKind::Hst,
            Self::LeTmss { .. } => CostKind::LeTmss,
            Self::RTmss { .. } => CostKind::RTmss,
            Self::RTmssNormalized { .. } => CostKind::RTmssNormalized,
            Self::LeTmssLocal { .. } => CostKind::LeTmssLocal,
            Self::Acs { .. } => CostKind::Acs,
            Self::AcsLocal { .. } => CostKind::AcsLocal,
            Self::Ecfs { .. } => CostKind::Ecfs,
        }
    }

    pub fn tmss(kind: CostKind, r: f64) -> Result<Self> {
        let spec = match kind {
            CostKind::LeTmss => Self::LeTmss { r },
            CostKind::RTmss => Self::RTmss { r },
            CostKind::RTmssNormalized => Self::RTmssNormalized { r },
            CostKind::LeTmssLocal => Self::LeTmssLocal { r },
            other => return invalid(format!("{} is not a TMSS cost", other.name())),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn r(&self) -> Option<f64> {
        match self {
            Self::LeTmss { r } | Self::RTmss { r } | Self::RTmssNormalized { r } | Self::LeTmssLocal { r } => Some(*r),
            _ => None,
        }
    }

    /// Same kind with a new squeezing value (TMSS kinds only).
    pub fn with_r(&self, r: f64) -> Result<Self> {
        Self::tmss(self.kind(), r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Hst { truncation } if *truncation < 1 => invalid("HST truncation must be at least 1"),
            Self::LeTmss { r } | Self::RTmss { r } | Self::RTmssNormalized { r } | Self::LeTmssLocal { r }
                if !(*r >= 0.0 && r.is_finite()) =>
            {
                invalid(format!("squeezing must be finite and non-negative, got {r}"))
            }
            Self::Acs { training } | Self::AcsLocal { training } if training.kind != TrainingKind::Coherent => {
                invalid("ACS costs need a coherent training set")
            }
            Self::Ecfs { training } if training.kind != TrainingKind::EntangledCoherentFock => {
                invalid("ECFS needs an entangled coherent-Fock training set")
            }
            Self::Acs { training } | Self::AcsLocal { training } | Self::Ecfs { training } if training.is_empty() => {
                invalid("empty training set")
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, u: &Operator, v: &Operator) -> Result<f64> {
        match self {
            Self::Hst { truncation } => hst_truncated(u, v, *truncation),
            Self::LeTmss { r } => le_tmss_cost(u, v, *r),
            Self::RTmss { r } => r_tmss_cost(u, v, *r),
            Self::RTmssNormalized { r } => r_tmss_normalized(u, v, *r),
            Self::LeTmssLocal { r } => le_tmss_local_cost(u, v, *r),
            Self::Acs { training } => acs_cost(u, v, training),
            Self::AcsLocal { training } => acs_local_cost(u, v, training),
            Self::Ecfs { training } => ecfs_cost(u, v, training),
        }
    }

    /// Cost estimated from `shots` all-zero detection trials instead of the
    /// exact probability.
    pub fn evaluate_with_shots<R: Rng + ?Sized>(&self, u: &Operator, v: &Operator, shots: u64, rng: &mut R) -> Result<f64> {
        let exact = self.evaluate(u, v)?;
        sample_shot_noise(exact, shots, rng)
    }
}

pub fn sample_shot_noise<R: Rng + ?Sized>(cost: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return invalid("shot count must be positive");
    }
    let p = (1.0 - cost).clamp(0.0, 1.0);
    let b = Binomial::new(shots, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(1.0 - b.sample(rng) as f64 / shots as f64)
}

fn check_pair(u: &Operator, v: &Operator) -> Result<HilbertSpec> {
    if u.spec() != v.spec() {
        return invalid("target and ansatz act on different spaces");
    }
    Ok(u.spec())
}

/// Indices of basis states with every occupation below `d`.
fn low_block(spec: &HilbertSpec, d: usize) -> Vec<usize> {
    (0..spec.dim()).filter(|&i| spec.digits_of(i).iter().all(|&n| n < d)).collect()
}

/// `1 − |Tr(P_d V†U P_d)|²/d^{2m}` with `P_d` the projector onto occupations
/// below `d` in every mode.
pub fn hst_truncated(u: &Operator, v: &Operator, d: usize) -> Result<f64> {
    let spec = check_pair(u, v)?;
    if d == 0 || d > spec.cutoff() {
        return Err(Error::OutOfRange(format!("truncation {d} outside 1..={}", spec.cutoff())));
    }
    let (um, vm) = (u.matrix(), v.matrix());
    let mut tr = ZERO;
    for i in low_block(&spec, d) {
        tr += vm.column(i).dotc(&um.column(i));
    }
    let norm = (d as f64).powi(spec.modes() as i32);
    Ok(1.0 - tr.norm_sqr() / (norm * norm))
}

/// Product weights `Π_j p_{n_j}` over an `m`-mode multi-index.
fn product_weights(weights: &[f64], spec: &HilbertSpec) -> Vec<f64> {
    (0..spec.dim()).map(|i| spec.digits_of(i).iter().map(|&n| weights[n]).product()).collect()
}

/// `1 − |⟨ψ_TMSS| (UV† ⊗ I) |ψ_TMSS⟩|²`, evaluated as the thermal-weighted
/// trace `Σ_n p_n (UV†)_{nn}`.
pub fn le_tmss_cost(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    Ok(1.0 - le_tmss_overlap(u, v, r)?.norm_sqr())
}

pub fn le_tmss_overlap(u: &Operator, v: &Operator, r: f64) -> Result<C64> {
    let spec = check_pair(u, v)?;
    check_r(r)?;
    let w = product_weights(&tmss_weights(r, spec.cutoff()), &spec);
    let (um, vm) = (u.matrix(), v.matrix());
    let mut acc = ZERO;
    for (n, &wn) in w.iter().enumerate() {
        if wn == 0.0 {
            continue;
        }
        // (UV†)_{nn} = Σ_k U_{nk} conj(V_{nk})
        acc += um.row(n).dotc(&vm.row(n)).conj() * wn;
    }
    Ok(acc)
}

fn check_r(r: f64) -> Result<()> {
    if !(r >= 0.0 && r.is_finite()) {
        return invalid(format!("squeezing must be finite and non-negative, got {r}"));
    }
    Ok(())
}

/// `⟨ψ_TMSS| U_A ⊗ V*_B |ψ_TMSS⟩` on the explicit `2m`-mode state vector.
pub fn ricochet_overlap(u: &Operator, v: &Operator, r: f64) -> Result<C64> {
    let spec = check_pair(u, v)?;
    check_r(r)?;
    let m = spec.modes();
    let psi = tmss(r, m, spec.cutoff())?;
    let a: Vec<usize> = (0..m).collect();
    let b: Vec<usize> = (m..2 * m).collect();
    let phi = apply_to_modes(&psi, u, &a)?;
    let phi = apply_to_modes(&phi, &v.conjugate(), &b)?;
    inner_product(&psi, &phi)
}

pub fn r_tmss_cost(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    Ok(1.0 - ricochet_overlap(u, v, r)?.norm_sqr())
}

pub fn r_tmss_normalized(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    let overlap = ricochet_overlap(u, v, r)?;
    let nu = ricochet_overlap(u, u, r)?.norm();
    let nv = ricochet_overlap(v, v, r)?.norm();
    if nu <= 1e-14 || nv <= 1e-14 {
        return Err(Error::DegenerateInput(format!("vanishing normalizer (N_U = {nu:.3e}, N_V = {nv:.3e})")));
    }
    Ok(1.0 - overlap.norm_sqr() / (nu * nv))
}

/// `Tr[√ρ^{⊗m} U √ρ^{⊗m} V†]` from the thermal weights of `ρ_β(r)`.
pub fn gce_inner_product(u: &Operator, v: &Operator, r: f64) -> Result<C64> {
    let spec = check_pair(u, v)?;
    if !(r > 0.0) {
        return invalid("generalized inner product needs r > 0");
    }
    let rho = thermal_state(r, spec.cutoff())?;
    let diag: Vec<f64> = (0..spec.cutoff()).map(|n| rho.matrix()[(n, n)].re.sqrt()).collect();
    let s = product_weights(&diag, &spec);
    let (um, vm) = (u.matrix(), v.matrix());
    let mut acc = ZERO;
    for j in 0..spec.dim() {
        for i in 0..spec.dim() {
            acc += um[(i, j)] * vm[(i, j)].conj() * (s[i] * s[j]);
        }
    }
    Ok(acc)
}

/// Pair-local echo cost `1 − (1/m) Σ_j Pr(00)_{A_jB_j}`.
///
/// With `W = UV†` and pair weights `p`, the contraction gives
/// `Pr_j = Σ_{a,b} p_b |Σ_k p_k W_{(a,k),(b,k)}|²` where `a, b` run over the
/// other `m − 1` modes and `k` sits in slot `j`.
pub fn le_tmss_local_cost(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    let spec = check_pair(u, v)?;
    check_r(r)?;
    let m = spec.modes();
    let n = spec.cutoff();
    let p = tmss_weights(r, n);
    // Columns of the transposes are rows of U and V; (UV†)_{xy} = ⟨V_y|U_x⟩ over rows.
    let ut = u.matrix().transpose();
    let vt = v.matrix().transpose();
    let rest_dim = spec.dim() / n;
    let probs: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|j| {
            let stride = spec.stride(j);
            // Multi-index over the other modes → full index with slot j = 0.
            let embed = |x: usize| (x / stride) * stride * n + x % stride;
            let mut total = 0.0;
            for b in 0..rest_dim {
                let bb = embed(b);
                let pb: f64 = (0..m).filter(|&i| i != j).map(|i| p[(bb / spec.stride(i)) % n]).product();
                if pb == 0.0 {
                    continue;
                }
                for a in 0..rest_dim {
                    let aa = embed(a);
                    let mut s = ZERO;
                    for (k, &pk) in p.iter().enumerate() {
                        if pk == 0.0 {
                            continue;
                        }
                        let x = aa + k * stride;
                        let y = bb + k * stride;
                        s += vt.column(y).dotc(&ut.column(x)) * pk;
                    }
                    total += pb * s.norm_sqr();
                }
            }
            total
        })
        .collect();
    Ok(1.0 - probs.iter().sum::<f64>() / m as f64)
}

/// Local echo cost through the per-pair entanglement fidelities `F_j` of the
/// channels `ρ ↦ Tr_{Ā_j}[W (ρ ⊗ ρ_β^{⊗m−1}) W†]`, with the thermal factors
/// expanded as Fock mixtures.
pub fn le_tmss_local_via_fidelity(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    let spec = check_pair(u, v)?;
    check_r(r)?;
    let m = spec.modes();
    let n = spec.cutoff();
    if (m > 2 && n >= 20) || (n as f64).powi(3 * m as i32) > 1e10 {
        return Err(Error::UnsupportedSize(format!(
            "entanglement-fidelity route is limited to m <= 2 at cutoff >= 20 (got m = {m}, cutoff = {n})"
        )));
    }
    let w = u.compose(&v.dagger())?;
    let pair = tmss(r, 1, n)?;
    let thermal: Vec<f64> = if r > 0.0 {
        let rho = thermal_state(r, n)?;
        (0..n).map(|k| rho.matrix()[(k, k)].re).collect()
    } else {
        let mut t = vec![0.0; n];
        t[0] = 1.0;
        t
    };
    // Layout of the working ket: A_1..A_m, then B_j.
    let ext = HilbertSpec::new(n, m + 1)?;
    let a_modes: Vec<usize> = (0..m).collect();
    let rest = if m > 1 { Some(HilbertSpec::new(n, m - 1)?) } else { None };
    let mut fidelity_sum = 0.0;
    for j in 0..m {
        let others: Vec<usize> = (0..m).filter(|&i| i != j).collect();
        let terms = rest.map(|s| s.dim()).unwrap_or(1);
        for b in 0..terms {
            let digits = rest.map(|s| s.digits_of(b)).unwrap_or_default();
            let pb: f64 = digits.iter().map(|&d| thermal[d]).product();
            if pb == 0.0 {
                continue;
            }
            let mut amps = crate::fock::CVector::zeros(ext.dim());
            for (idx, c) in pair.amplitudes().iter().enumerate() {
                if *c == ZERO {
                    continue;
                }
                let (ka, kb) = (idx / n, idx % n);
                let mut full = vec![0usize; m + 1];
                full[j] = ka;
                for (slot, &mode) in others.iter().enumerate() {
                    full[mode] = digits[slot];
                }
                full[m] = kb;
                amps[ext.index_of(&full)?] = *c;
            }
            let state = Ket::new(ext, amps)?;
            let out = apply_to_modes(&state, &w, &a_modes)?;
            let proj = contract_bra(&out, &pair, &[j, m])?;
            fidelity_sum += pb * proj.norm_squared();
        }
    }
    Ok(1.0 - fidelity_sum / m as f64)
}

/// Local echo cost from explicit pair marginals (dense partial trace).
pub fn le_tmss_local_via_marginals(u: &Operator, v: &Operator, r: f64) -> Result<f64> {
    let spec = check_pair(u, v)?;
    let m = spec.modes();
    let psi = tmss(r, m, spec.cutoff())?;
    let w = u.compose(&v.dagger())?;
    let a: Vec<usize> = (0..m).collect();
    let out = apply_to_modes(&psi, &w, &a)?;
    let pair = tmss(r, 1, spec.cutoff())?;
    let mut s = 0.0;
    for j in 0..m {
        let rho = out.partial_trace(&[j, m + j])?;
        s += rho.expectation_pure(&pair)?;
    }
    Ok(1.0 - s / m as f64)
}

fn check_training(training: &TrainingSet, kind: TrainingKind, spec: &HilbertSpec) -> Result<()> {
    if training.is_empty() {
        return invalid("empty training set");
    }
    if training.kind != kind {
        return invalid("training set has the wrong kind for this cost");
    }
    if training.modes != spec.modes() || training.cutoff != spec.cutoff() {
        return invalid("training states do not match the operator space");
    }
    Ok(())
}

/// `1 − (1/k) Σ_j |⟨α_j|V†U|α_j⟩|²`.
pub fn acs_cost(u: &Operator, v: &Operator, training: &TrainingSet) -> Result<f64> {
    let spec = check_pair(u, v)?;
    check_training(training, TrainingKind::Coherent, &spec)?;
    let terms: Result<Vec<f64>> = training
        .inputs
        .par_iter()
        .map(|psi| Ok(inner_product(&v.apply(psi)?, &u.apply(psi)?)?.norm_sqr()))
        .collect();
    let terms = terms?;
    Ok(1.0 - terms.iter().sum::<f64>() / terms.len() as f64)
}

/// `1 − (1/k) Σ_j (1/m) Σ_ℓ ⟨Φ_j| (|α_{jℓ}⟩⟨α_{jℓ}|_ℓ ⊗ I) |Φ_j⟩`, `Φ_j = V†U|α_j⟩`.
pub fn acs_local_cost(u: &Operator, v: &Operator, training: &TrainingSet) -> Result<f64> {
    acs_local_impl(u, v, training, false)
}

/// Same cost with every single-mode marginal formed by a partial trace.
pub fn acs_local_via_marginals(u: &Operator, v: &Operator, training: &TrainingSet) -> Result<f64> {
    acs_local_impl(u, v, training, true)
}

fn acs_local_impl(u: &Operator, v: &Operator, training: &TrainingSet, marginals: bool) -> Result<f64> {
    let spec = check_pair(u, v)?;
    check_training(training, TrainingKind::Coherent, &spec)?;
    let m = spec.modes();
    let vdag = v.dagger();
    let mut total = 0.0;
    for (psi, means) in training.inputs.iter().zip(&training.mean_vectors) {
        let phi = vdag.apply(&u.apply(psi)?)?;
        let w = &means[0];
        let mut s = 0.0;
        for l in 0..m {
            let alpha = C64::new(w[2 * l], w[2 * l + 1]) / 2f64.sqrt();
            let bra = coherent_state(alpha, spec.cutoff())?;
            s += if marginals {
                phi.partial_trace(&[l])?.expectation_pure(&bra)?
            } else {
                contract_bra(&phi, &bra, &[l])?.norm_squared()
            };
        }
        total += s / m as f64;
    }
    Ok(1.0 - total / training.len() as f64)
}

/// `1 − (1/k) Σ_j |⟨ψ_j| (V†U ⊗ I_R) |ψ_j⟩|²`.
pub fn ecfs_cost(u: &Operator, v: &Operator, training: &TrainingSet) -> Result<f64> {
    let spec = check_pair(u, v)?;
    check_training(training, TrainingKind::EntangledCoherentFock, &spec)?;
    let sys: Vec<usize> = (0..spec.modes()).collect();
    let terms: Result<Vec<f64>> = training
        .inputs
        .par_iter()
        .map(|psi| {
            let a = apply_to_modes(psi, u, &sys)?;
            let b = apply_to_modes(psi, v, &sys)?;
            Ok(inner_product(&b, &a)?.norm_sqr())
        })
        .collect();
    let terms = terms?;
    Ok(1.0 - terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Closed form of `E_V |⟨ψ_𝔯| V ⊗ V* |ψ_𝔯⟩|` over Haar `V ∈ U(𝔯)`, with
/// `ψ_𝔯` the rank-𝔯 truncated TMSS.
pub fn ricochet_overlap_expectation(r: f64, rank: usize) -> f64 {
    let t = r.tanh();
    let rank_f = rank as f64;
    // (1/𝔯)(1+t)/(1+t^𝔯) · (1−t^𝔯)/(1−t), with the last ratio as a finite sum.
    let geom: f64 = (0..rank).map(|k| t.powi(k as i32)).sum();
    (1.0 + t) / (1.0 + t.powi(rank as i32)) * geom / rank_f
}

/// Monte Carlo of the same expectation from state vectors; returns
/// `(mean, stderr)`.
pub fn ricochet_overlap_mc(r: f64, rank: usize, n_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if rank < 2 {
        return invalid("rank must be at least 2");
    }
    let psi = truncated_tmss(r, rank)?;
    let spec = HilbertSpec::single(rank)?;
    let values: Result<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            let v: CMatrix = haar_unitary(rank, &mut rng);
            let vop = Operator::new(spec, v)?;
            let left = apply_to_modes(&psi, &vop.dagger(), &[0])?;
            let right = apply_to_modes(&psi, &vop.conjugate(), &[1])?;
            Ok(inner_product(&left, &right)?.norm())
        })
        .collect();
    Ok(rng::mean_stderr(&values?))
}
