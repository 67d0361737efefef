//! Closed-form phase-gate costs and gradient statistics, and perturbation
//! scans of trained ansätze.
//!
//! The phase-gate problem compiles `U = ⊗_j R(φ_j)` against `V = I`.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::error::{invalid, Error, Result};
use crate::fock::Operator;
use crate::rng;
use crate::trainer::AnsatzSpec;

fn check_r(r: f64, strict: bool) -> Result<()> {
    let ok = if strict { r > 0.0 } else { r >= 0.0 };
    if !ok || !r.is_finite() {
        return invalid(format!("squeezing must be {} 0, got {r}", if strict { ">" } else { "≥" }));
    }
    Ok(())
}

/// Per-mode fidelity factor `(1/cosh⁴r)/(1 − 2cos φ tanh²r + tanh⁴r)`.
pub fn phase_fidelity(phi: f64, r: f64) -> f64 {
    let t2 = r.tanh().powi(2);
    1.0 / (r.cosh().powi(4) * (1.0 - 2.0 * phi.cos() * t2 + t2 * t2))
}

/// `1 − Π_j phase_fidelity(φ_j, r)`.
pub fn analytic_phase_cost(phis: &[f64], r: f64) -> Result<f64> {
    check_r(r, false)?;
    Ok(1.0 - phis.iter().map(|&p| phase_fidelity(p, r)).product::<f64>())
}

/// `1 − (1/m) Σ_j phase_fidelity(φ_j, r)`.
pub fn analytic_local_phase_cost(phis: &[f64], r: f64) -> Result<f64> {
    check_r(r, false)?;
    if phis.is_empty() {
        return invalid("need at least one mode");
    }
    Ok(1.0 - phis.iter().map(|&p| phase_fidelity(p, r)).sum::<f64>() / phis.len() as f64)
}

/// `(2/(π(1+2sinh²r)²))^m · tanh²r/(1+tanh⁴r)`.
pub fn analytic_grad_expectation(r: f64, m: usize) -> Result<f64> {
    check_r(r, true)?;
    let t2 = r.tanh().powi(2);
    let base = 2.0 / (PI * (1.0 + 2.0 * r.sinh().powi(2)).powi(2));
    Ok(base.powi(m as i32) * t2 / (1.0 + t2 * t2))
}

/// `(2/(π m cosh⁴r (1+tanh²r)²)) · (m − 1 + tanh²r/(1+tanh⁴r))`.
pub fn analytic_local_grad_expectation(r: f64, m: usize) -> Result<f64> {
    check_r(r, true)?;
    if m == 0 {
        return invalid("need at least one mode");
    }
    let t2 = r.tanh().powi(2);
    let mf = m as f64;
    Ok(2.0 / (PI * mf * r.cosh().powi(4) * (1.0 + t2).powi(2)) * (mf - 1.0 + t2 / (1.0 + t2 * t2)))
}

/// Exact `E|∂_{φ₁} C|` for the global phase cost with `φ_j` uniform:
/// `E|f'| · (E f)^{m−1}` with `E|f'| = 4tanh²r/(π(1+tanh²r)²)` and `E f = 1/cosh 2r`.
pub fn exact_grad_expectation(r: f64, m: usize) -> Result<f64> {
    check_r(r, true)?;
    if m == 0 {
        return invalid("need at least one mode");
    }
    let t2 = r.tanh().powi(2);
    Ok(4.0 * t2 / (PI * (1.0 + t2).powi(2)) / (2.0 * r).cosh().powi(m as i32 - 1))
}

/// Exact `E|∂_{φ₁} C^{(L)}|` for the local phase cost: `4tanh²r/(π m (1+tanh²r)²)`.
pub fn exact_local_grad_expectation(r: f64, m: usize) -> Result<f64> {
    check_r(r, true)?;
    if m == 0 {
        return invalid("need at least one mode");
    }
    let t2 = r.tanh().powi(2);
    Ok(4.0 * t2 / (PI * m as f64 * (1.0 + t2).powi(2)))
}

/// `|∂_{φ₁} cost|` by central differences at `n_samples` points drawn
/// uniformly from `[−π, π]^m`, one RNG stream per sample.
pub fn grad_samples<F>(cost: &F, m: usize, n_samples: usize, fd_step: f64, seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if m == 0 {
        return invalid("need at least one mode");
    }
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return invalid(format!("fd_step must be positive, got {fd_step}"));
    }
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let mut phis: Vec<f64> = (0..m).map(|_| r.random_range(-PI..PI)).collect();
            let x0 = phis[0];
            phis[0] = x0 + fd_step;
            let up = cost(&phis)?;
            phis[0] = x0 - fd_step;
            let down = cost(&phis)?;
            Ok(((up - down) / (2.0 * fd_step)).abs())
        })
        .collect()
}

/// Mean and stderr of [`grad_samples`].
pub fn grad_magnitude_mc<F>(cost: &F, m: usize, n_samples: usize, fd_step: f64, seed: u64) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if n_samples < 2 {
        return invalid("need at least two samples");
    }
    Ok(rng::mean_stderr(&grad_samples(cost, m, n_samples, fd_step, seed)?))
}

/// Fraction of samples above `eps` and its binomial stderr.
pub fn tail_fraction(samples: &[f64], eps: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|&&g| g > eps).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(_, y)| !(y > 0.0)) {
        return invalid("need at least two points with positive values");
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|&(x, y)| (x - mx) * (y.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeScan {
    pub eps: Vec<f64>,
    pub samples: usize,
    /// `values[i][k]`: cost of sample `k` at `eps[i]`.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LandscapeScan {
    pub fn means(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect()
    }
}

/// Costs at `θ_k = θ_k^opt + ε R_k` with `R_k` uniform in `[−1, 1]`.
/// Sample `k` uses the same `R` at every ε.
pub fn landscape_scan(
    target: &Operator,
    ansatz: &AnsatzSpec,
    theta_opt: &[f64],
    eps: &[f64],
    samples: usize,
    cost: &CostSpec,
    seed: u64,
) -> Result<LandscapeScan> {
    if eps.is_empty() || eps.windows(2).any(|w| w[1] < w[0]) || eps.iter().any(|e| !e.is_finite()) {
        return invalid("ε grid must be non-empty, finite and sorted");
    }
    if samples == 0 {
        return invalid("need at least one sample per ε");
    }
    let cutoff = target.spec().cutoff();
    let at_opt = cost.evaluate(target, &ansatz.build(theta_opt, cutoff)?)?;
    if !(at_opt <= 1e-6) {
        return Err(Error::Precondition(format!("cost at the supplied optimum is {at_opt:.3e} > 1e-6")));
    }
    let directions: Vec<Vec<f64>> = (0..samples as u64)
        .map(|k| {
            let mut r = rng::stream(seed, k);
            theta_opt.iter().map(|_| r.random_range(-1.0..=1.0)).collect()
        })
        .collect();
    let values: Result<Vec<Vec<f64>>> = eps
        .iter()
        .map(|&e| {
            directions
                .par_iter()
                .map(|dir| {
                    let theta: Vec<f64> = theta_opt.iter().zip(dir).map(|(t, d)| t + e * d).collect();
                    cost.evaluate(target, &ansatz.build(&theta, cutoff)?)
                })
                .collect()
        })
        .collect();
    let values = values?;
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("scan produced a non-finite cost".into()));
    }
    Ok(LandscapeScan { eps: eps.to_vec(), samples, values, seed })
}
