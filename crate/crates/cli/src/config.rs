//! Experiment configuration: a TOML document with one section per command.

use std::path::PathBuf;

use cvcompile::costs::CostKind;
use cvcompile::nfl::ZDist;
use cvcompile::optim::OptimizerConfig;
use cvcompile::rng::Rng;
use cvcompile::trainer::{AnsatzKind, AnsatzSpec, MultiStart, TargetSpec, LAYER_PARAMS};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, CliError, CliResult};

/// Default refusal threshold for operator entries / state amplitudes.
pub const AMPLITUDE_LIMIT: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Compile,
    Nfl,
    Landscape,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Compile => "compile",
            Self::Nfl => "nfl",
            Self::Landscape => "landscape",
            Self::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nfl: Option<NflConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
}

/// Compile target: fixed parameters, or drawn from the run's RNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Gaussian { alpha_re: f64, alpha_im: f64, beta_re: f64, beta_im: f64, phi: f64 },
    Kerr { chi: f64 },
    Beamsplitter { theta: f64, phi: f64 },
    Identity { modes: usize },
    RandomGaussian,
    RandomBeamsplitter,
}

impl TargetConfig {
    pub fn resolve(&self, rng: &mut Rng) -> TargetSpec {
        match *self {
            Self::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi } => {
                TargetSpec::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi }
            }
            Self::Kerr { chi } => TargetSpec::Kerr { chi },
            Self::Beamsplitter { theta, phi } => TargetSpec::Beamsplitter { theta, phi },
            Self::Identity { modes } => TargetSpec::Identity { modes },
            Self::RandomGaussian => TargetSpec::random_gaussian(rng),
            Self::RandomBeamsplitter => TargetSpec::random_beamsplitter(rng),
        }
    }

    pub fn modes(&self) -> usize {
        match self {
            Self::Beamsplitter { .. } | Self::RandomBeamsplitter => 2,
            Self::Identity { modes } => *modes,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub states: usize,
    #[serde(default = "one")]
    pub rank: usize,
    #[serde(default = "unit")]
    pub energy: f64,
}

/// One cost branch. TMSS kinds take `r_schedule`, HST takes `truncation`,
/// ACS/ECFS take `training`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub kind: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingConfig>,
}

impl CostConfig {
    pub fn label(&self) -> String {
        match (&self.training, self.kind) {
            (Some(t), CostKind::Ecfs) => format!("ecfs-k{}-rank{}", t.states, t.rank),
            (Some(t), kind) => format!("{}-k{}", kind.name(), t.states),
            (None, kind) => kind.name().to_string(),
        }
    }

    fn validate(&self) -> CliResult<()> {
        let name = self.kind.name();
        match self.kind {
            k if k.is_tmss() => {
                let Some(r) = &self.r_schedule else {
                    return config_err(format!("cost {name} needs r_schedule"));
                };
                if r.is_empty() || r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
                    return config_err("r_schedule must be non-empty, non-negative and strictly increasing");
                }
            }
            CostKind::Hst => {
                if !self.truncation.is_some_and(|t| t >= 1) {
                    return config_err("cost hst needs truncation >= 1");
                }
            }
            _ => {
                let Some(t) = &self.training else {
                    return config_err(format!("cost {name} needs a training table"));
                };
                if t.states == 0 || t.rank == 0 || !(t.energy > 0.0 && t.energy.is_finite()) {
                    return config_err("training needs states >= 1, rank >= 1 and a positive energy");
                }
                if self.kind != CostKind::Ecfs && t.rank != 1 {
                    return config_err(format!("cost {name} uses rank-1 coherent states"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    pub target: TargetConfig,
    pub ansatz: AnsatzSpec,
    /// Cost branches, each trained independently against the same target.
    pub costs: Vec<CostConfig>,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub multi_start: MultiStart,
    #[serde(default)]
    pub init: InitKind,
    /// Runs use seeds `seed, seed + 1, …`.
    #[serde(default = "one")]
    pub runs: usize,
    /// Run `i` draws its target, training sets and initial point from
    /// `seeded(seed + i + target_seed_offset)`.
    #[serde(default)]
    pub target_seed_offset: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NflKind {
    Orthogonal,
    Symplectic,
    Covariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NflConfig {
    pub kind: NflKind,
    pub modes: Vec<usize>,
    /// Defaults to `0..=2m` for each `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set_sizes: Option<Vec<usize>>,
    #[serde(default = "ranks_default")]
    pub ranks: Vec<usize>,
    /// Map samples per cell.
    pub samples: usize,
    #[serde(default)]
    pub z: ZDist,
    /// Squeezing bounds for covariance cells.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d: Vec<f64>,
    #[serde(default = "sigma_samples_default")]
    pub sigma_samples: usize,
    /// Absolute tolerance floor; defaults to 0.01 for risk cells and
    /// `10/m²` for covariance cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientTableConfig {
    pub r: f64,
    pub modes: Vec<usize>,
    pub samples: usize,
    #[serde(default = "fd_closed_form")]
    pub fd_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub target: TargetConfig,
    pub ansatz: AnsatzSpec,
    /// Defaults to the known exact parameters of the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_opt: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    pub samples: usize,
    pub r_values: Vec<f64>,
    #[serde(default = "le_tmss")]
    pub cost: CostKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradients: Option<GradientTableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub overlap_ranks: Vec<usize>,
    pub overlap_r: Vec<f64>,
    pub overlap_samples: usize,
    pub overlap_limit_r: f64,
    pub gce_cutoff: usize,
    pub gce_r: f64,
    pub gce_pairs: usize,
    pub lemma_modes: usize,
    pub lemma_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            overlap_ranks: vec![2, 4, 8],
            overlap_r: vec![0.5, 1.0, 2.0],
            overlap_samples: 10_000,
            overlap_limit_r: 6.0,
            gce_cutoff: 20,
            gce_r: 0.5,
            gce_pairs: 20,
            lemma_modes: 3,
            lemma_samples: 100_000,
        }
    }
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn ranks_default() -> Vec<usize> {
    vec![1]
}
fn sigma_samples_default() -> usize {
    100
}
fn fd_closed_form() -> f64 {
    1e-5
}
fn le_tmss() -> CostKind {
    CostKind::LeTmss
}

const PRESETS: &[(&str, &str)] = &[
    ("fig3-gaussian", include_str!("../presets/fig3-gaussian.toml")),
    ("fig3-kerr", include_str!("../presets/fig3-kerr.toml")),
    ("fig4-gaussian", include_str!("../presets/fig4-gaussian.toml")),
    ("fig4-kerr", include_str!("../presets/fig4-kerr.toml")),
    ("fig4-beamsplitter", include_str!("../presets/fig4-beamsplitter.toml")),
    ("fig5-acs-k1", include_str!("../presets/fig5-acs-k1.toml")),
    ("fig5-acs-k2", include_str!("../presets/fig5-acs-k2.toml")),
    ("fig5-ecfs", include_str!("../presets/fig5-ecfs.toml")),
    ("fig6-kerr-0.1", include_str!("../presets/fig6-kerr-0.1.toml")),
    ("fig6-kerr-0.5", include_str!("../presets/fig6-kerr-0.5.toml")),
    ("nfl-thm1", include_str!("../presets/nfl-thm1.toml")),
    ("nfl-thm2", include_str!("../presets/nfl-thm2.toml")),
    ("nfl-cor1", include_str!("../presets/nfl-cor1.toml")),
    ("nfl-appD", include_str!("../presets/nfl-appD.toml")),
    ("verify", include_str!("../presets/verify.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> CliResult<ExperimentConfig> {
    let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
        let known: Vec<_> = preset_names().collect();
        return config_err(format!("unknown preset {name:?}; known presets: {}", known.join(", ")));
    };
    ExperimentConfig::from_toml(text).map_err(|e| CliError::Config(format!("preset {name}: {e}")))
}

fn usize_pow(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Config(format!("{} needs a seed (set `seed` or pass --seed)", self.command.name())))
    }

    pub fn cutoff(&self) -> CliResult<usize> {
        match self.cutoff {
            Some(c) if c >= 2 => Ok(c),
            Some(c) => config_err(format!("cutoff must be at least 2, got {c}")),
            None => config_err(format!("{} needs a cutoff (set `cutoff` or pass --cutoff)", self.command.name())),
        }
    }

    pub fn compile_section(&self) -> CliResult<&CompileConfig> {
        self.compile.as_ref().ok_or_else(|| CliError::Config("missing [compile] section".into()))
    }

    pub fn nfl_section(&self) -> CliResult<&NflConfig> {
        self.nfl.as_ref().ok_or_else(|| CliError::Config("missing [nfl] section".into()))
    }

    pub fn landscape_section(&self) -> CliResult<&LandscapeConfig> {
        self.landscape.as_ref().ok_or_else(|| CliError::Config("missing [landscape] section".into()))
    }

    /// Structural checks that do not depend on CLI overrides.
    pub fn validate(&self) -> CliResult<()> {
        let sections = [
            (CommandKind::Compile, self.compile.is_some()),
            (CommandKind::Nfl, self.nfl.is_some()),
            (CommandKind::Landscape, self.landscape.is_some()),
            (CommandKind::Verify, self.verify.is_some()),
        ];
        for (kind, present) in sections {
            if present && kind != self.command {
                return config_err(format!("[{}] section given for command {}", kind.name(), self.command.name()));
            }
        }
        if self.shots == Some(0) {
            return config_err("shots must be positive");
        }
        match self.command {
            CommandKind::Compile => self.compile_section()?.validate(),
            CommandKind::Nfl => self.nfl_section()?.validate(),
            CommandKind::Landscape => self.landscape_section()?.validate(),
            CommandKind::Verify => self.verify.clone().unwrap_or_default().validate(),
        }
    }

    /// Checks that need the final seed and cutoff, including the size guard.
    pub fn check_runnable(&self, allow_large: bool) -> CliResult<()> {
        self.validate()?;
        self.seed()?;
        let modes = match self.command {
            CommandKind::Compile => Some(self.compile_section()?.target.modes()),
            CommandKind::Landscape => self.landscape_section()?.scan.as_ref().map(|s| s.target.modes()),
            _ => None,
        };
        if let Some(m) = modes {
            let cutoff = self.cutoff()?;
            let needed = usize_pow(cutoff, 2 * m);
            if needed > AMPLITUDE_LIMIT && !allow_large {
                let mut suggested = cutoff;
                while suggested > 2 && usize_pow(suggested, 2 * m) > AMPLITUDE_LIMIT {
                    suggested -= 1;
                }
                return Err(CliError::Resource { needed, limit: AMPLITUDE_LIMIT, suggested });
            }
        }
        Ok(())
    }
}

fn check_ansatz(ansatz: &AnsatzSpec, modes: usize) -> CliResult<()> {
    ansatz.validate().map_err(|e| CliError::Config(format!("ansatz: {e}")))?;
    if ansatz.modes() != modes {
        return config_err(format!("ansatz acts on {} modes but the target on {modes}", ansatz.modes()));
    }
    Ok(())
}

impl CompileConfig {
    fn validate(&self) -> CliResult<()> {
        check_ansatz(&self.ansatz, self.target.modes())?;
        if self.costs.is_empty() {
            return config_err("compile needs at least one [[compile.costs]] entry");
        }
        for c in &self.costs {
            c.validate()?;
        }
        self.optimizer.validate().map_err(|e| CliError::Config(format!("optimizer: {e}")))?;
        if self.multi_start.starts == 0 || self.runs == 0 {
            return config_err("multi_start.starts and runs must be positive");
        }
        Ok(())
    }
}

impl NflConfig {
    fn validate(&self) -> CliResult<()> {
        if self.modes.is_empty() || self.modes.contains(&0) {
            return config_err("nfl.modes must list positive mode counts");
        }
        if self.samples < 2 {
            return config_err("nfl.samples must be at least 2");
        }
        if self.ranks.is_empty() || self.ranks.contains(&0) {
            return config_err("nfl.ranks must list positive ranks");
        }
        self.z.validate().map_err(|e| CliError::Config(format!("nfl.z: {e}")))?;
        if self.kind == NflKind::Covariance {
            if self.d.is_empty() || self.d.iter().any(|d| !(*d > 1.0 && d.is_finite())) {
                return config_err("covariance cells need d values > 1");
            }
            if self.sigma_samples == 0 {
                return config_err("sigma_samples must be positive");
            }
        }
        if let Some(f) = self.floor {
            if !(f >= 0.0 && f.is_finite()) {
                return config_err("floor must be non-negative");
            }
        }
        Ok(())
    }
}

impl LandscapeConfig {
    fn validate(&self) -> CliResult<()> {
        if self.gradients.is_none() && self.scan.is_none() {
            return config_err("landscape needs a [landscape.gradients] or [landscape.scan] table");
        }
        if let Some(g) = &self.gradients {
            if !(g.r > 0.0 && g.r.is_finite()) || g.modes.is_empty() || g.modes.contains(&0) || g.samples < 2 || !(g.fd_step > 0.0) {
                return config_err("gradients need r > 0, positive modes, samples >= 2 and fd_step > 0");
            }
        }
        if let Some(s) = &self.scan {
            check_ansatz(&s.ansatz, s.target.modes())?;
            if matches!(s.target, TargetConfig::RandomGaussian | TargetConfig::RandomBeamsplitter) && s.theta_opt.is_none() {
                return config_err("random scan targets need an explicit theta_opt");
            }
            if let Some(t) = &s.theta_opt {
                if t.len() != s.ansatz.param_count() {
                    return config_err(format!("theta_opt has {} entries, the ansatz takes {}", t.len(), s.ansatz.param_count()));
                }
            } else {
                known_optimum(&s.target, &s.ansatz)?;
            }
            if s.eps.is_empty() || s.eps.windows(2).any(|w| w[1] < w[0]) || s.samples == 0 {
                return config_err("scan needs a sorted eps grid and samples >= 1");
            }
            if s.r_values.is_empty() || s.r_values.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return config_err("scan needs non-negative r_values");
            }
            if !s.cost.is_tmss() {
                return config_err("scan cost must be a TMSS cost");
            }
        }
        Ok(())
    }
}

impl VerifyConfig {
    fn validate(&self) -> CliResult<()> {
        if self.overlap_ranks.iter().any(|&r| r < 2) {
            return config_err("overlap ranks must be at least 2");
        }
        if self.overlap_samples < 2 || self.gce_pairs == 0 || self.lemma_samples < 2 || self.lemma_modes == 0 {
            return config_err("verify sample counts must be positive");
        }
        if self.gce_cutoff < 2 || !(self.gce_r > 0.0) {
            return config_err("gce needs cutoff >= 2 and r > 0");
        }
        Ok(())
    }
}

/// Exact ansatz parameters for targets the ansatz represents directly.
pub fn known_optimum(target: &TargetConfig, ansatz: &AnsatzSpec) -> CliResult<Vec<f64>> {
    match (target, ansatz.kind) {
        (TargetConfig::Gaussian { alpha_re, alpha_im, beta_re, beta_im, phi }, AnsatzKind::Gaussian) => {
            Ok(vec![*alpha_re, *alpha_im, *beta_re, *beta_im, *phi])
        }
        (TargetConfig::Kerr { chi }, AnsatzKind::Layered) => {
            let per = chi / ansatz.layers as f64;
            Ok((0..ansatz.param_count()).map(|i| if i % LAYER_PARAMS == LAYER_PARAMS - 1 { per } else { 0.0 }).collect())
        }
        (TargetConfig::Beamsplitter { theta, phi }, AnsatzKind::TwoModeLayered) => {
            let mut p = vec![*theta, *phi];
            p.resize(ansatz.param_count(), 0.0);
            Ok(p)
        }
        (TargetConfig::Identity { .. }, _) => Ok(vec![0.0; ansatz.param_count()]),
        _ => config_err("no known optimum for this target/ansatz pair; give theta_opt"),
    }
}
