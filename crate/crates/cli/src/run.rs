//! Command runners. Each returns the rows of an [`ExperimentRecord`].

use std::time::{SystemTime, UNIX_EPOCH};

use cvcompile::costs::{
    gce_inner_product, ricochet_overlap, ricochet_overlap_expectation, ricochet_overlap_mc, r_tmss_normalized,
    sample_shot_noise, CostKind, CostSpec,
};
use cvcompile::fock::{matrix_exponential_unitary, HilbertSpec, Operator};
use cvcompile::haar::{haar_orthogonal_matrix, haar_unitary};
use cvcompile::landscape::{
    analytic_grad_expectation, analytic_local_grad_expectation, analytic_local_phase_cost, analytic_phase_cost,
    exact_grad_expectation, exact_local_grad_expectation, grad_magnitude_mc, landscape_scan, log_slope,
};
use cvcompile::nfl::{
    expected_covariance_risk_mc, expected_risk_mc, lemma1_ii_exact, lemma1_ii_formula,
    lemma1_ij_exact, lemma1_ij_formula, lemma1_mc, MapKind,
};
use cvcompile::rng;
use cvcompile::states::TrainingSet;
use cvcompile::trainer::{train, train_with_r_schedule, Problem, ScheduleConfig, TargetSpec, TrainOutcome};
use cvcompile::C64;
use log::info;

use crate::config::{
    known_optimum, CommandKind, CompileConfig, CostConfig, ExperimentConfig, InitKind, LandscapeConfig, NflConfig,
    NflKind, VerifyConfig,
};
use crate::error::CliResult;
use crate::record::{Cell, ExperimentRecord, Header, BUILD_ID};

pub const COMPILE_COLUMNS: &[&str] = &[
    "run", "seed", "branch", "cost_kind", "row", "iteration", "evals", "stage", "start", "r", "cost", "cost_shots", "hst5",
    "hst50", "param_errors", "params", "target",
];
pub const NFL_COLUMNS: &[&str] =
    &["kind", "m", "set_size", "rank", "d", "n_samples", "mean", "stderr", "theory", "deviation", "tolerance", "status"];
pub const LANDSCAPE_COLUMNS: &[&str] = &["table", "m", "r", "eps", "sample", "value", "stderr", "theory", "exact"];
pub const VERIFY_COLUMNS: &[&str] = &["check", "case", "value", "stderr", "expected", "tolerance", "status"];

/// Spreads cell indices over the seed space so neighbouring cells never
/// share RNG streams.
fn cell_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn status(pass: bool) -> Cell {
    Cell::from(if pass { "pass" } else { "fail" })
}

/// Runs `config` (already validated and resource-checked) and collects its record.
pub fn run(config: &ExperimentConfig) -> CliResult<ExperimentRecord> {
    let seed = config.seed()?;
    let started = unix_now();
    let (columns, rows) = match config.command {
        CommandKind::Compile => (COMPILE_COLUMNS, run_compile(config, config.compile_section()?, seed)?),
        CommandKind::Nfl => (NFL_COLUMNS, run_nfl(config.nfl_section()?, seed)?),
        CommandKind::Landscape => (LANDSCAPE_COLUMNS, run_landscape(config, config.landscape_section()?, seed)?),
        CommandKind::Verify => (VERIFY_COLUMNS, run_verify(&config.verify.clone().unwrap_or_default(), seed)?),
    };
    let header = Header {
        build: BUILD_ID.to_string(),
        command: config.command.name().to_string(),
        seed,
        started_unix_s: started,
        finished_unix_s: unix_now(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        config_toml: config.to_toml()?,
        config: config.clone(),
    };
    Ok(ExperimentRecord { header, rows })
}

fn join_errors(errors: &[(String, f64)]) -> String {
    errors.iter().map(|(n, v)| format!("{n}={v:e}")).collect::<Vec<_>>().join(";")
}

fn join_params(params: &[f64]) -> String {
    params.iter().map(|p| format!("{p:e}")).collect::<Vec<_>>().join(";")
}

fn build_cost(cost: &CostConfig, m: usize, cutoff: usize, rng: &mut rng::Rng) -> CliResult<Option<CostSpec>> {
    Ok(match cost.kind {
        k if k.is_tmss() => None,
        CostKind::Hst => Some(CostSpec::Hst { truncation: cost.truncation.unwrap_or(cutoff).min(cutoff) }),
        kind => {
            let t = cost.training.expect("validated");
            let training = if kind == CostKind::Ecfs {
                TrainingSet::entangled(m, t.states, t.rank, t.energy, cutoff, rng)?
            } else {
                TrainingSet::coherent(m, t.states, t.energy, cutoff, rng)?
            };
            Some(match kind {
                CostKind::Acs => CostSpec::Acs { training },
                CostKind::AcsLocal => CostSpec::AcsLocal { training },
                _ => CostSpec::Ecfs { training },
            })
        }
    })
}

fn run_compile(config: &ExperimentConfig, c: &CompileConfig, seed: u64) -> CliResult<Vec<Vec<Cell>>> {
    let cutoff = config.cutoff()?;
    let mut rows = Vec::new();
    for run in 0..c.runs {
        let run_seed = seed.wrapping_add(run as u64);
        let mut r = rng::seeded(run_seed.wrapping_add(c.target_seed_offset));
        let target = c.target.resolve(&mut r);
        let target_op = target.build(cutoff)?;
        let target_json = serde_json::to_string(&target)?;
        for (branch, cost) in c.costs.iter().enumerate() {
            let spec = build_cost(cost, target.modes(), cutoff, &mut r)?;
            let init = match c.init {
                InitKind::Random => c.ansatz.initial_params(&mut r),
                InitKind::Zero => {
                    let mut p = vec![0.0f64; c.ansatz.param_count()];
                    if let Some(b) = c.ansatz.expanded_bounds() {
                        p.iter_mut().zip(b).for_each(|(x, (lo, hi))| *x = (*x).clamp(lo, hi));
                    }
                    p
                }
            };
            let problem = Problem { target: &target, target_op: &target_op, ansatz: &c.ansatz, seed: run_seed };
            let outcome = match &spec {
                Some(spec) => train(&problem, spec, &c.optimizer, &init, &c.multi_start)?,
                None => {
                    let schedule = ScheduleConfig::new(cost.r_schedule.clone().expect("validated"), c.optimizer.clone());
                    train_with_r_schedule(&problem, cost.kind, &schedule, &init, &c.multi_start)?
                }
            };
            info!(
                "run {run} branch {} ({}): cost {:.3e}, hst50 {:.3e}, {} evals",
                branch,
                cost.label(),
                outcome.cost,
                outcome.diagnostics.hst50,
                outcome.evals
            );
            compile_rows(&mut rows, config.shots, run, run_seed, branch, &cost.label(), &outcome, &target_json)?;
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn compile_rows(
    rows: &mut Vec<Vec<Cell>>,
    shots: Option<u64>,
    run: usize,
    seed: u64,
    branch: usize,
    label: &str,
    outcome: &TrainOutcome,
    target_json: &str,
) -> CliResult<()> {
    let noisy = |cost: f64, index: u64| -> CliResult<Cell> {
        Ok(match shots {
            Some(n) => {
                let mut r = rng::stream(seed, ((branch as u64) << 40) | index);
                Cell::from(sample_shot_noise(cost.clamp(0.0, 1.0), n, &mut r)?)
            }
            None => Cell::Empty,
        })
    };
    for rec in &outcome.records {
        rows.push(vec![
            run.into(),
            seed.into(),
            branch.into(),
            label.into(),
            "iter".into(),
            rec.iteration.into(),
            rec.evals.into(),
            rec.stage.into(),
            rec.start.into(),
            rec.r.into(),
            rec.cost.into(),
            noisy(rec.cost, rec.iteration as u64)?,
            rec.hst5.into(),
            rec.hst50.into(),
            join_errors(&rec.param_errors).into(),
            join_params(&rec.params).into(),
            Cell::Empty,
        ]);
    }
    let last = outcome.records.last();
    rows.push(vec![
        run.into(),
        seed.into(),
        branch.into(),
        label.into(),
        "final".into(),
        outcome.records.len().into(),
        outcome.evals.into(),
        last.map(|r| r.stage).into(),
        Cell::Empty,
        last.and_then(|r| r.r).into(),
        outcome.cost.into(),
        noisy(outcome.cost, outcome.records.len() as u64)?,
        outcome.diagnostics.hst5.into(),
        outcome.diagnostics.hst50.into(),
        join_errors(&outcome.diagnostics.param_errors).into(),
        join_params(&outcome.params).into(),
        target_json.into(),
    ]);
    Ok(())
}

fn nfl_row(kind: &str, m: usize, s: usize, rank: usize, d: Option<f64>) -> Vec<Cell> {
    vec![kind.into(), m.into(), s.into(), rank.into(), d.into()]
}

fn run_nfl(c: &NflConfig, seed: u64) -> CliResult<Vec<Vec<Cell>>> {
    let mut rows = Vec::new();
    let mut index = 0;
    let skipped = |mut row: Vec<Cell>, theory: Cell| {
        row.extend([Cell::Empty, Cell::Empty, Cell::Empty, theory, Cell::Empty, Cell::Empty, "skipped".into()]);
        row
    };
    for &m in &c.modes {
        let sizes = c.set_sizes.clone().unwrap_or_else(|| (0..=2 * m).collect());
        match c.kind {
            NflKind::Orthogonal | NflKind::Symplectic => {
                let (name, kind) = match c.kind {
                    NflKind::Orthogonal => ("orthogonal", MapKind::Orthogonal),
                    _ => ("symplectic", MapKind::Symplectic),
                };
                for &rank in &c.ranks {
                    for &s in &sizes {
                        index += 1;
                        let row = nfl_row(name, m, s, rank, None);
                        let agreement = rank * s;
                        if agreement > 2 * m || (kind == MapKind::Symplectic && agreement % 2 == 1) {
                            rows.push(skipped(row, Cell::Empty));
                            continue;
                        }
                        let e = expected_risk_mc(m, s, rank, kind, &c.z, c.samples, cell_seed(seed, index))?;
                        let tol = (3.0 * e.stderr).max(c.floor.unwrap_or(0.01));
                        rows.push(finish_nfl(row, e.n_samples, e.mean, e.stderr, e.theory, tol));
                    }
                }
            }
            NflKind::Covariance => {
                for &d in &c.d {
                    for &s in &sizes {
                        index += 1;
                        let row = nfl_row("covariance", m, s, 1, Some(d));
                        if s > 2 * m {
                            rows.push(skipped(row, Cell::Empty));
                            continue;
                        }
                        let e = expected_covariance_risk_mc(m, s, d, c.samples, c.sigma_samples, cell_seed(seed, index))?;
                        let tol = 3.0 * e.stderr + c.floor.unwrap_or(10.0 / (m * m) as f64);
                        rows.push(finish_nfl(row, e.n_samples, e.mean, e.stderr, e.theory, tol));
                    }
                }
            }
        }
        info!("nfl m = {m} done");
    }
    Ok(rows)
}

fn finish_nfl(mut row: Vec<Cell>, n: usize, mean: f64, stderr: f64, theory: f64, tol: f64) -> Vec<Cell> {
    let dev = (mean - theory).abs();
    row.extend([n.into(), mean.into(), stderr.into(), theory.into(), dev.into(), tol.into(), status(dev <= tol)]);
    row
}

fn run_landscape(config: &ExperimentConfig, c: &LandscapeConfig, seed: u64) -> CliResult<Vec<Vec<Cell>>> {
    let mut rows = Vec::new();
    if let Some(g) = &c.gradients {
        let r = g.r;
        let mut points = Vec::new();
        for &m in &g.modes {
            let global = |p: &[f64]| analytic_phase_cost(p, r);
            let (mean, se) = grad_magnitude_mc(&global, m, g.samples, g.fd_step, cell_seed(seed, 2 * m))?;
            points.push((m as f64, mean));
            rows.push(vec![
                "grad-global".into(),
                m.into(),
                r.into(),
                Cell::Empty,
                Cell::Empty,
                mean.into(),
                se.into(),
                analytic_grad_expectation(r, m)?.into(),
                exact_grad_expectation(r, m)?.into(),
            ]);
            let local = |p: &[f64]| analytic_local_phase_cost(p, r);
            let (mean, se) = grad_magnitude_mc(&local, m, g.samples, g.fd_step, cell_seed(seed, 2 * m + 1))?;
            rows.push(vec![
                "grad-local".into(),
                m.into(),
                r.into(),
                Cell::Empty,
                Cell::Empty,
                mean.into(),
                se.into(),
                analytic_local_grad_expectation(r, m)?.into(),
                exact_local_grad_expectation(r, m)?.into(),
            ]);
        }
        if points.len() >= 2 {
            let stated = (2.0 / (std::f64::consts::PI * (1.0 + 2.0 * r.sinh().powi(2)).powi(2))).ln();
            rows.push(vec![
                "grad-global-slope".into(),
                Cell::Empty,
                r.into(),
                Cell::Empty,
                Cell::Empty,
                log_slope(&points)?.into(),
                Cell::Empty,
                stated.into(),
                (-(2.0 * r).cosh().ln()).into(),
            ]);
        }
    }
    if let Some(s) = &c.scan {
        let cutoff = config.cutoff()?;
        let target: TargetSpec = s.target.resolve(&mut rng::seeded(seed));
        let op = target.build(cutoff)?;
        let theta = match &s.theta_opt {
            Some(t) => t.clone(),
            None => known_optimum(&s.target, &s.ansatz)?,
        };
        for (i, &r) in s.r_values.iter().enumerate() {
            let cost = CostSpec::tmss(s.cost, r)?;
            let scan = landscape_scan(&op, &s.ansatz, &theta, &s.eps, s.samples, &cost, cell_seed(seed, i))?;
            for (e, values) in scan.eps.iter().zip(&scan.values) {
                for (k, v) in values.iter().enumerate() {
                    rows.push(vec![
                        "scan".into(),
                        target.modes().into(),
                        r.into(),
                        (*e).into(),
                        k.into(),
                        (*v).into(),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                    ]);
                }
                let (mean, se) = rng::mean_stderr(values);
                rows.push(vec![
                    "scan-mean".into(),
                    target.modes().into(),
                    r.into(),
                    (*e).into(),
                    Cell::Empty,
                    mean.into(),
                    se.into(),
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            info!("scan r = {r} done");
        }
    }
    Ok(rows)
}

fn verify_row(check: &str, case: String, value: f64, stderr: Cell, expected: Cell, tol: f64, pass: bool) -> Vec<Cell> {
    vec![check.into(), case.into(), value.into(), stderr, expected, tol.into(), status(pass)]
}

fn run_verify(c: &VerifyConfig, seed: u64) -> CliResult<Vec<Vec<Cell>>> {
    let mut rows = Vec::new();
    let mut index = 0;

    for &rank in &c.overlap_ranks {
        for &r in &c.overlap_r {
            index += 1;
            let (mean, se) = ricochet_overlap_mc(r, rank, c.overlap_samples, cell_seed(seed, index))?;
            let expected = ricochet_overlap_expectation(r, rank);
            let tol = 0.02 * expected + 3.0 * se;
            let pass = (mean - expected).abs() <= tol;
            rows.push(verify_row("overlap", format!("rank={rank} r={r}"), mean, se.into(), expected.into(), tol, pass));
        }
    }
    index += 1;
    let (r, rank) = (c.overlap_limit_r, 2);
    let (mean, se) = ricochet_overlap_mc(r, rank, c.overlap_samples, cell_seed(seed, index))?;
    let tol = 2.0 * (rank - 1) as f64 * (-2.0 * r).exp() + 3.0 * se;
    rows.push(verify_row("overlap-limit", format!("rank={rank} r={r}"), mean, se.into(), 1.0.into(), tol, (mean - 1.0).abs() <= tol));

    index += 1;
    let mut rng = rng::seeded(cell_seed(seed, index));
    let spec = HilbertSpec::single(c.gce_cutoff)?;
    let unitary = |rng: &mut rng::Rng| Operator::new(spec, haar_unitary(spec.dim(), rng));
    for k in 0..c.gce_pairs {
        let u = unitary(&mut rng)?;
        let v = unitary(&mut rng)?;
        let diff = (gce_inner_product(&u, &v, c.gce_r)? - ricochet_overlap(&u, &v, c.gce_r)?).norm();
        rows.push(verify_row("gce-identity", format!("pair={k}"), diff, Cell::Empty, 0.0.into(), 1e-8, diff <= 1e-8));
    }
    for k in 0..c.gce_pairs {
        let u = unitary(&mut rng)?;
        let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / c.gce_pairs as f64 - 3.0);
        let cost = r_tmss_normalized(&u, &u.scaled(phase), c.gce_r)?;
        rows.push(verify_row("faithful-phase", format!("instance={k}"), cost, Cell::Empty, 0.0.into(), 1e-10, cost.abs() <= 1e-10));
        // V = U·e^{−iεH} with H the Hermitian part of a Haar unitary.
        let a = haar_unitary(spec.dim(), &mut rng);
        let h = Operator::new(spec, (&a + a.adjoint()).map(|z| z * 0.25))?;
        let v = u.compose(&matrix_exponential_unitary(&h)?)?;
        let cost = r_tmss_normalized(&u, &v, c.gce_r)?;
        rows.push(verify_row("faithful-perturbed", format!("instance={k}"), cost, Cell::Empty, Cell::Empty, 1e-4, cost >= 1e-4));
    }

    let n = 2 * c.lemma_modes;
    index += 1;
    let identity = cvcompile::nfl::RMatrix::identity(n, n);
    let e = lemma1_mc(&identity, 0, 1, c.lemma_samples.min(1000), cell_seed(seed, index))?;
    rows.push(verify_row("lemma1-identity", format!("n={n}"), e.mean_ii, e.stderr_ii.into(), 1.0.into(), 1e-12, (e.mean_ii - 1.0).abs() <= 1e-12));
    index += 1;
    let l = haar_orthogonal_matrix(n, &mut rng::seeded(cell_seed(seed, index)));
    index += 1;
    let e = lemma1_mc(&l, 0, 1, c.lemma_samples, cell_seed(seed, index))?;
    let rel = |value: f64, expected: f64| (value - expected).abs() <= 0.01 * expected.abs();
    for (check, value, se, expected) in [
        ("lemma1-ii", e.mean_ii, e.stderr_ii, lemma1_ii_formula(&l)),
        ("lemma1-ii-exact", e.mean_ii, e.stderr_ii, lemma1_ii_exact(&l)),
        ("lemma1-ij", e.mean_ij, e.stderr_ij, lemma1_ij_formula(&l)),
        ("lemma1-ij-exact", e.mean_ij, e.stderr_ij, lemma1_ij_exact(&l)),
    ] {
        rows.push(verify_row(check, format!("n={n} i=0 j=1"), value, se.into(), expected.into(), 0.01 * expected.abs(), rel(value, expected)));
    }
    Ok(rows)
}
