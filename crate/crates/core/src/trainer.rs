//! Parameterized ansätze, compile targets, the squeezing schedule and
//! training diagnostics.
//!
//! Parameter layouts:
//! - Gaussian: `[α_re, α_im, β_re, β_im, φ]` for `e^{−iH}` with
//!   `H = αa + α*a† + βa² + β*a†² + φa†a`.
//! - Layered: per layer `[α_re, α_im, β_re, β_im, φ, χ]`; layer 0 acts first.
//! - Two-mode layered: `[θ, φ_bs]`, then a layer on mode 0, then a layer on
//!   mode 1, giving `BS(θ, φ_bs) · (V₀ ⊗ V₁)`.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{hst_truncated, CostKind, CostSpec};
use crate::error::{invalid, Error, Result};
use crate::fock::{HilbertSpec, Operator, C64};
use crate::gates::{beamsplitter, displacement, gaussian_unitary, kerr, rotation, squeeze};
use crate::optim::{minimize, OptimResult, OptimizerConfig};
use crate::rng;

pub const LAYER_PARAMS: usize = 6;
pub const GAUSSIAN_PARAMS: usize = 5;
pub const TWO_MODE_PARAMS: usize = 2 + 2 * LAYER_PARAMS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzKind {
    Gaussian,
    Layered,
    TwoModeLayered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub kind: AnsatzKind,
    #[serde(default = "one")]
    pub layers: usize,
    /// One `[lo, hi]` per parameter, or a single pair applied to all.
    #[serde(default)]
    pub bounds: Option<Vec<(f64, f64)>>,
}

fn one() -> usize {
    1
}

impl AnsatzSpec {
    pub fn gaussian() -> Self {
        Self { kind: AnsatzKind::Gaussian, layers: 1, bounds: None }
    }

    pub fn layered(layers: usize) -> Self {
        Self { kind: AnsatzKind::Layered, layers, bounds: None }
    }

    pub fn two_mode() -> Self {
        Self { kind: AnsatzKind::TwoModeLayered, layers: 1, bounds: None }
    }

    /// Gaussian ansatz restricted to `φ ∈ [0, 2π]`, `|Re|, |Im| ≤ amp` for α and β.
    /// Rescaled generators `(1 − 2πk/ω)H` (ω the normal-mode frequency) give the
    /// same unitary up to phase and all have φ outside `[0, 2π]`.
    pub fn gaussian_principal(amp: f64) -> Self {
        let mut bounds = vec![(-amp, amp); GAUSSIAN_PARAMS - 1];
        bounds.push((0.0, TAU));
        Self { kind: AnsatzKind::Gaussian, layers: 1, bounds: Some(bounds) }
    }

    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some(vec![(lo, hi)]);
        self
    }

    pub fn modes(&self) -> usize {
        match self.kind {
            AnsatzKind::TwoModeLayered => 2,
            _ => 1,
        }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            AnsatzKind::Gaussian => GAUSSIAN_PARAMS,
            AnsatzKind::Layered => LAYER_PARAMS * self.layers,
            AnsatzKind::TwoModeLayered => TWO_MODE_PARAMS,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let layer = |prefix: &str| -> Vec<String> {
            ["alpha_re", "alpha_im", "beta_re", "beta_im", "phi", "chi"].iter().map(|n| format!("{prefix}{n}")).collect()
        };
        match self.kind {
            AnsatzKind::Gaussian => ["alpha_re", "alpha_im", "beta_re", "beta_im", "phi"].iter().map(|s| s.to_string()).collect(),
            AnsatzKind::Layered => (0..self.layers).flat_map(|l| layer(&format!("l{l}_"))).collect(),
            AnsatzKind::TwoModeLayered => {
                let mut names = vec!["theta".to_string(), "phi_bs".to_string()];
                names.extend(layer("m0_"));
                names.extend(layer("m1_"));
                names
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return invalid("ansatz needs at least one layer");
        }
        if self.kind != AnsatzKind::Layered && self.layers != 1 {
            return invalid("only the layered ansatz takes a layer count");
        }
        if let Some(b) = &self.bounds {
            if b.len() != 1 && b.len() != self.param_count() {
                return invalid(format!("{} bounds for {} parameters", b.len(), self.param_count()));
            }
            if b.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
                return invalid("bounds must be finite with lo <= hi");
            }
        }
        Ok(())
    }

    /// Per-parameter bounds, expanded from a single shared pair if needed.
    pub fn expanded_bounds(&self) -> Option<Vec<(f64, f64)>> {
        self.bounds.as_ref().map(|b| if b.len() == 1 { vec![b[0]; self.param_count()] } else { b.clone() })
    }

    pub fn build(&self, params: &[f64], cutoff: usize) -> Result<Operator> {
        match self.kind {
            AnsatzKind::Gaussian => {
                if params.len() != GAUSSIAN_PARAMS {
                    return invalid(format!("Gaussian ansatz takes {GAUSSIAN_PARAMS} parameters, got {}", params.len()));
                }
                gaussian_unitary(C64::new(params[0], params[1]), C64::new(params[2], params[3]), params[4], cutoff)
            }
            AnsatzKind::Layered => build_layered_ansatz(params, self.layers, cutoff),
            AnsatzKind::TwoModeLayered => build_two_mode_ansatz(params, cutoff),
        }
    }

    /// Initial parameters: Gaussian uniform in the random-target ranges
    /// (`[0, 1]` for α, β components, `[0, 2π]` for φ); layers uniform in
    /// `[0, 0.1]`; beamsplitter angles uniform in `[0, 2π]`. Clamped to bounds.
    pub fn initial_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p: Vec<f64> = match self.kind {
            AnsatzKind::Gaussian => {
                let mut p: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
                p.push(rng.random_range(0.0..TAU));
                p
            }
            AnsatzKind::Layered => (0..self.param_count()).map(|_| rng.random_range(0.0..0.1)).collect(),
            AnsatzKind::TwoModeLayered => {
                let mut p = vec![rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
                p.extend((0..2 * LAYER_PARAMS).map(|_| rng.random_range(0.0..0.1)));
                p
            }
        };
        if let Some(b) = self.expanded_bounds() {
            for (x, (lo, hi)) in p.iter_mut().zip(b) {
                *x = x.clamp(lo, hi);
            }
        }
        p
    }
}

/// `U_Kerr(χ) R(φ) D(α) S(β)`.
pub fn build_single_mode_layer(alpha: C64, beta: C64, phi: f64, chi: f64, cutoff: usize) -> Result<Operator> {
    let s = squeeze(beta, cutoff)?;
    let d = displacement(alpha, cutoff)?;
    let r = rotation(phi, cutoff)?;
    let k = kerr(chi, cutoff)?;
    k.compose(&r)?.compose(&d)?.compose(&s)
}

fn layer_from(p: &[f64], cutoff: usize) -> Result<Operator> {
    build_single_mode_layer(C64::new(p[0], p[1]), C64::new(p[2], p[3]), p[4], p[5], cutoff)
}

/// `V_{L−1} ⋯ V_1 V_0`.
pub fn build_layered_ansatz(theta: &[f64], layers: usize, cutoff: usize) -> Result<Operator> {
    if layers == 0 || theta.len() != LAYER_PARAMS * layers {
        return invalid(format!("layered ansatz with {layers} layers takes {} parameters, got {}", LAYER_PARAMS * layers, theta.len()));
    }
    let mut v = layer_from(&theta[..LAYER_PARAMS], cutoff)?;
    for chunk in theta.chunks(LAYER_PARAMS).skip(1) {
        v = layer_from(chunk, cutoff)?.compose(&v)?;
    }
    Ok(v)
}

/// `U_BS(θ, φ) · (V₀ ⊗ V₁)`.
pub fn build_two_mode_ansatz(theta: &[f64], cutoff: usize) -> Result<Operator> {
    if theta.len() != TWO_MODE_PARAMS {
        return invalid(format!("two-mode ansatz takes {TWO_MODE_PARAMS} parameters, got {}", theta.len()));
    }
    let v0 = layer_from(&theta[2..2 + LAYER_PARAMS], cutoff)?;
    let v1 = layer_from(&theta[2 + LAYER_PARAMS..], cutoff)?;
    beamsplitter(theta[0], theta[1], cutoff)?.compose(&v0.kron(&v1)?)
}

/// Compile targets with known parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    Gaussian { alpha_re: f64, alpha_im: f64, beta_re: f64, beta_im: f64, phi: f64 },
    Kerr { chi: f64 },
    Beamsplitter { theta: f64, phi: f64 },
    Identity { modes: usize },
}

impl TargetSpec {
    /// Components of α and β uniform in `[0, 1]`, φ uniform in `[0, 2π]`.
    pub fn random_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::Gaussian {
            alpha_re: rng.random_range(0.0..1.0),
            alpha_im: rng.random_range(0.0..1.0),
            beta_re: rng.random_range(0.0..1.0),
            beta_im: rng.random_range(0.0..1.0),
            phi: rng.random_range(0.0..TAU),
        }
    }

    pub fn random_beamsplitter<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::Beamsplitter { theta: rng.random_range(0.0..TAU), phi: rng.random_range(0.0..TAU) }
    }

    pub fn modes(&self) -> usize {
        match self {
            Self::Beamsplitter { .. } => 2,
            Self::Identity { modes } => *modes,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match self {
            Self::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi } => {
                [alpha_re, alpha_im, beta_re, beta_im, phi].iter().all(|x| x.is_finite())
            }
            Self::Kerr { chi } => chi.is_finite(),
            Self::Beamsplitter { theta, phi } => theta.is_finite() && phi.is_finite(),
            Self::Identity { modes } => *modes >= 1,
        };
        if !finite {
            return invalid("target parameters must be finite (identity needs at least one mode)");
        }
        Ok(())
    }

    pub fn build(&self, cutoff: usize) -> Result<Operator> {
        self.validate()?;
        match self {
            Self::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi } => {
                gaussian_unitary(C64::new(*alpha_re, *alpha_im), C64::new(*beta_re, *beta_im), *phi, cutoff)
            }
            Self::Kerr { chi } => kerr(*chi, cutoff),
            Self::Beamsplitter { theta, phi } => beamsplitter(*theta, *phi, cutoff),
            Self::Identity { modes } => Ok(Operator::identity(HilbertSpec::new(cutoff, *modes)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub hst5: f64,
    pub hst50: f64,
    /// `(name, value)` pairs; see [`diagnostics`].
    pub param_errors: Vec<(String, f64)>,
}

/// `|a − b|` on the circle.
fn angle_distance(a: f64, b: f64) -> f64 {
    ((a - b + PI).rem_euclid(TAU) - PI).abs()
}

fn layer_sums(params: &[f64]) -> [f64; 6] {
    let mut s = [0.0; 6];
    for chunk in params.chunks(LAYER_PARAMS) {
        for (acc, x) in s.iter_mut().zip(chunk) {
            *acc += x;
        }
    }
    s
}

/// Truncated HST at `d = 5` and `d = 50` (each capped at the cutoff) plus
/// parameter errors:
/// - Gaussian ansatz: per-parameter absolute errors against a Gaussian target;
/// - layered ansatz: `|Σα_l|`, `|Σβ_l|`, `|Σφ_l|`, `|Σχ_l − χ_targ|`;
/// - two-mode ansatz: `|θ − θ_targ|`, `|φ − φ_targ|` (mod 2π) and the magnitudes of the
///   local layer parameters.
pub fn diagnostics(params: &[f64], ansatz: &AnsatzSpec, target: &TargetSpec, target_op: &Operator) -> Result<Diagnostics> {
    let spec = target_op.spec();
    let v = ansatz.build(params, spec.cutoff())?;
    let hst5 = hst_truncated(target_op, &v, 5.min(spec.cutoff()))?;
    let hst50 = hst_truncated(target_op, &v, 50.min(spec.cutoff()))?;
    let c = |re: f64, im: f64| C64::new(re, im);
    let param_errors: Vec<(String, f64)> = match (ansatz.kind, target) {
        (AnsatzKind::Gaussian, TargetSpec::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi }) => vec![
            ("alpha".into(), (c(params[0], params[1]) - c(*alpha_re, *alpha_im)).norm()),
            ("beta".into(), (c(params[2], params[3]) - c(*beta_re, *beta_im)).norm()),
            ("phi".into(), (params[4] - phi).abs()),
        ],
        (AnsatzKind::Gaussian, _) => vec![
            ("alpha".into(), c(params[0], params[1]).norm()),
            ("beta".into(), c(params[2], params[3]).norm()),
            ("phi".into(), params[4].abs()),
        ],
        (AnsatzKind::Layered, _) => {
            let s = layer_sums(params);
            let chi_targ = if let TargetSpec::Kerr { chi } = target { *chi } else { 0.0 };
            vec![
                ("alpha".into(), c(s[0], s[1]).norm()),
                ("beta".into(), c(s[2], s[3]).norm()),
                ("phi".into(), s[4].abs()),
                ("chi".into(), (s[5] - chi_targ).abs()),
            ]
        }
        (AnsatzKind::TwoModeLayered, _) => {
            let (t, p) = if let TargetSpec::Beamsplitter { theta, phi } = target { (*theta, *phi) } else { (0.0, 0.0) };
            let local = |p: &[f64]| p.iter().map(|x| x * x).sum::<f64>().sqrt();
            vec![
                ("theta".into(), (params[0] - t).abs()),
                ("phi_bs".into(), angle_distance(params[1], p)),
                ("mode0".into(), local(&params[2..2 + LAYER_PARAMS])),
                ("mode1".into(), local(&params[2 + LAYER_PARAMS..])),
            ]
        }
    };
    Ok(Diagnostics { hst5, hst50, param_errors })
}

/// One row of training output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// Global iteration index, increasing across stages and starts.
    pub iteration: usize,
    /// Cumulative objective evaluations.
    pub evals: usize,
    pub stage: usize,
    pub start: usize,
    pub r: Option<f64>,
    pub cost: f64,
    pub hst5: f64,
    pub hst50: f64,
    pub param_errors: Vec<(String, f64)>,
    /// Accepted parameters at this iteration.
    pub params: Vec<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl TrainRecord {
    /// Equality ignoring wall time.
    pub fn same_trajectory(&self, other: &Self) -> bool {
        Self { wall_time_s: 0.0, ..self.clone() } == Self { wall_time_s: 0.0, ..other.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub r_values: Vec<f64>,
    /// Either one config shared by every stage or one per stage.
    pub optimizers: Vec<OptimizerConfig>,
}

impl ScheduleConfig {
    pub fn new(r_values: Vec<f64>, optimizer: OptimizerConfig) -> Self {
        Self { r_values, optimizers: vec![optimizer] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r_values.is_empty() {
            return invalid("r schedule is empty");
        }
        if self.r_values.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return invalid("r values must be finite and non-negative");
        }
        if self.r_values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("r values must be strictly increasing");
        }
        if self.optimizers.len() != 1 && self.optimizers.len() != self.r_values.len() {
            return invalid("give one optimizer config or one per stage");
        }
        self.optimizers.iter().try_for_each(OptimizerConfig::validate)
    }

    pub fn optimizer(&self, stage: usize) -> &OptimizerConfig {
        if self.optimizers.len() == 1 {
            &self.optimizers[0]
        } else {
            &self.optimizers[stage]
        }
    }
}

/// Everything one training call needs besides the cost.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub target: &'a TargetSpec,
    pub target_op: &'a Operator,
    pub ansatz: &'a AnsatzSpec,
    pub seed: u64,
}

impl Problem<'_> {
    fn check(&self) -> Result<()> {
        self.ansatz.validate()?;
        if self.ansatz.modes() != self.target_op.spec().modes() {
            return invalid(format!(
                "ansatz acts on {} modes, target on {}",
                self.ansatz.modes(),
                self.target_op.spec().modes()
            ));
        }
        Ok(())
    }

    fn objective<'b>(&'b self, cost: &'b CostSpec) -> impl Fn(&[f64]) -> f64 + Sync + 'b {
        let cutoff = self.target_op.spec().cutoff();
        move |p: &[f64]| match self.ansatz.build(p, cutoff).and_then(|v| cost.evaluate(self.target_op, &v)) {
            Ok(x) => x,
            Err(e) => {
                debug!("objective failed: {e}");
                f64::NAN
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: Vec<f64>,
    /// Final cost at the last stage.
    pub cost: f64,
    /// Best cost reached in each stage.
    pub stage_costs: Vec<f64>,
    pub records: Vec<TrainRecord>,
    pub evals: usize,
    pub non_finite_evals: usize,
    /// Last-stage cost ended above the first-stage cost.
    pub diverged: bool,
    pub diagnostics: Diagnostics,
}

struct Recorder<'a> {
    problem: &'a Problem<'a>,
    clock: Instant,
    records: Vec<TrainRecord>,
    evals: usize,
    non_finite: usize,
}

impl Recorder<'_> {
    fn push(&mut self, result: &OptimResult, stage: usize, start: usize, r: Option<f64>) -> Result<()> {
        let base = self.evals;
        for it in &result.history {
            let d = diagnostics(&it.params, self.problem.ansatz, self.problem.target, self.problem.target_op)?;
            self.records.push(TrainRecord {
                iteration: self.records.len(),
                evals: base + it.evals,
                stage,
                start,
                r,
                cost: it.value,
                hst5: d.hst5,
                hst50: d.hst50,
                param_errors: d.param_errors,
                params: it.params.clone(),
                wall_time_s: self.clock.elapsed().as_secs_f64(),
                seed: self.problem.seed,
            });
        }
        self.evals += result.evals;
        self.non_finite += result.non_finite_evals;
        Ok(())
    }
}

fn stage_config(base: &OptimizerConfig, seed: u64, stage: usize) -> OptimizerConfig {
    OptimizerConfig { seed: seed.wrapping_add(stage as u64), ..base.clone() }
}

/// Trains on a TMSS cost, one stage per squeezing value; stage `s + 1` starts
/// at the stage-`s` optimum. With several starts the whole schedule is rerun
/// from fresh initial points until one ends at or below `multi.target_cost`,
/// and the run with the lowest final cost is kept.
pub fn train_with_r_schedule(
    problem: &Problem,
    kind: CostKind,
    schedule: &ScheduleConfig,
    init: &[f64],
    multi: &MultiStart,
) -> Result<TrainOutcome> {
    problem.check()?;
    schedule.validate()?;
    if !kind.is_tmss() {
        return invalid(format!("{} is not a TMSS cost", kind.name()));
    }
    if multi.starts == 0 {
        return invalid("need at least one start");
    }
    let bounds = problem.ansatz.expanded_bounds();
    let mut rec = Recorder { problem, clock: Instant::now(), records: Vec::new(), evals: 0, non_finite: 0 };
    let mut init_rng = rng::stream(problem.seed, u64::MAX);
    let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
    for start in 0..multi.starts {
        let mut params = if start == 0 { init.to_vec() } else { problem.ansatz.initial_params(&mut init_rng) };
        let mut stage_costs = Vec::new();
        for (stage, &r) in schedule.r_values.iter().enumerate() {
            let cost = CostSpec::tmss(kind, r)?;
            let f = problem.objective(&cost);
            let config = stage_config(schedule.optimizer(stage), problem.seed, start * schedule.r_values.len() + stage);
            let result = match minimize(&f, &params, bounds.as_deref(), &config) {
                Ok(r) => r,
                Err(Error::Precondition(msg)) if start > 0 => {
                    debug!("start {start} abandoned: {msg}");
                    break;
                }
                Err(e) => return Err(e),
            };
            debug!("start {start} stage {stage} r={r}: cost {:.3e} after {} evals ({:?})", result.value, result.evals, result.stop);
            rec.push(&result, stage, start, Some(r))?;
            stage_costs.push(result.value);
            params = result.params;
        }
        if stage_costs.len() != schedule.r_values.len() {
            continue;
        }
        let last = stage_costs[stage_costs.len() - 1];
        let done = multi.target_cost.is_some_and(|t| last <= t);
        if best.as_ref().is_none_or(|(_, c)| last < c[c.len() - 1]) {
            best = Some((params, stage_costs));
        }
        if done {
            break;
        }
    }
    let (params, stage_costs) = best.ok_or_else(|| Error::Precondition("no start produced a finite objective".into()))?;
    let cost = stage_costs[stage_costs.len() - 1];
    let diagnostics = diagnostics(&params, problem.ansatz, problem.target, problem.target_op)?;
    Ok(TrainOutcome {
        params,
        cost,
        diverged: cost > stage_costs[0],
        stage_costs,
        records: rec.records,
        evals: rec.evals,
        non_finite_evals: rec.non_finite,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiStart {
    /// Maximum number of starts; the first uses the given initial point.
    #[serde(default = "one")]
    pub starts: usize,
    /// Stop starting over once a run reaches this cost.
    #[serde(default)]
    pub target_cost: Option<f64>,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self { starts: 1, target_cost: None }
    }
}

/// Trains on a fixed cost. Extra starts draw fresh initial points from
/// [`AnsatzSpec::initial_params`] and the best run is kept.
pub fn train(
    problem: &Problem,
    cost: &CostSpec,
    optimizer: &OptimizerConfig,
    init: &[f64],
    multi: &MultiStart,
) -> Result<TrainOutcome> {
    problem.check()?;
    cost.validate()?;
    if multi.starts == 0 {
        return invalid("need at least one start");
    }
    let bounds = problem.ansatz.expanded_bounds();
    let mut rec = Recorder { problem, clock: Instant::now(), records: Vec::new(), evals: 0, non_finite: 0 };
    let f = problem.objective(cost);
    let mut best: Option<OptimResult> = None;
    let mut init_rng = rng::stream(problem.seed, u64::MAX);
    for start in 0..multi.starts {
        let x0 = if start == 0 { init.to_vec() } else { problem.ansatz.initial_params(&mut init_rng) };
        let config = stage_config(optimizer, problem.seed, start);
        let result = match minimize(&f, &x0, bounds.as_deref(), &config) {
            Ok(r) => r,
            Err(Error::Precondition(msg)) if start > 0 => {
                debug!("start {start} skipped: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        debug!("start {start}: cost {:.3e} after {} evals", result.value, result.evals);
        rec.push(&result, 0, start, cost.r())?;
        let done = multi.target_cost.is_some_and(|t| result.value <= t);
        if best.as_ref().is_none_or(|b| result.value < b.value) {
            best = Some(result);
        }
        if done {
            break;
        }
    }
    let best = best.ok_or_else(|| Error::Precondition("no start produced a finite objective".into()))?;
    let diagnostics = diagnostics(&best.params, problem.ansatz, problem.target, problem.target_op)?;
    Ok(TrainOutcome {
        cost: best.value,
        stage_costs: vec![best.value],
        params: best.params,
        records: rec.records,
        evals: rec.evals,
        non_finite_evals: rec.non_finite,
        diverged: false,
        diagnostics,
    })
}
