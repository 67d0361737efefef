//! Bounded local minimizers: Nelder-Mead with restarts, and L-BFGS with
//! central finite differences and projected backtracking.
//!
//! Both stop when the best value has improved by less than `f_tol`
//! (relative) over the last `stall_window` non-gradient evaluations, when
//! `max_evals` is exhausted, or when the value drops to `value_floor`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Simplex,
    QuasiNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    #[serde(default = "defaults::max_evals")]
    pub max_evals: usize,
    #[serde(default = "defaults::f_tol")]
    pub f_tol: f64,
    #[serde(default = "defaults::fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::stall_window")]
    pub stall_window: usize,
    #[serde(default = "defaults::value_floor")]
    pub value_floor: f64,
    /// Simplex restarts after convergence.
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
}

mod defaults {
    pub fn max_evals() -> usize {
        20_000
    }
    pub fn f_tol() -> f64 {
        1e-12
    }
    pub fn fd_step() -> f64 {
        1e-6
    }
    pub fn stall_window() -> usize {
        25
    }
    pub fn value_floor() -> f64 {
        1e-15
    }
    pub fn restarts() -> usize {
        2
    }
}

impl OptimizerConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            max_evals: defaults::max_evals(),
            f_tol: defaults::f_tol(),
            fd_step: defaults::fd_step(),
            seed: 0,
            stall_window: defaults::stall_window(),
            value_floor: defaults::value_floor(),
            restarts: defaults::restarts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_tol > 0.0) {
            return invalid("f_tol must be positive");
        }
        if !(self.fd_step > 0.0) {
            return invalid("fd_step must be positive");
        }
        if self.max_evals == 0 {
            return invalid("max_evals must be positive");
        }
        if self.stall_window == 0 {
            return invalid("stall_window must be positive");
        }
        Ok(())
    }
}

pub type Bounds = [(f64, f64)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub evals: usize,
    /// Best value seen so far.
    pub value: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    Stalled,
    MaxEvals,
    ValueFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evals: usize,
    pub non_finite_evals: usize,
    pub stop: StopReason,
    pub history: Vec<IterationRecord>,
}

const PENALTY: f64 = 1e100;

struct Evaluator<'a, F> {
    f: &'a F,
    bounds: Option<&'a Bounds>,
    config: &'a OptimizerConfig,
    evals: usize,
    non_finite: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trail: VecDeque<f64>,
    history: Vec<IterationRecord>,
}

impl<'a, F: Fn(&[f64]) -> f64 + Sync> Evaluator<'a, F> {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        match self.bounds {
            Some(b) => x.iter().zip(b).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect(),
            None => x.to_vec(),
        }
    }

    fn register(&mut self, x: &[f64], raw: f64, probe: bool) -> f64 {
        self.evals += 1;
        let v = if raw.is_finite() {
            raw
        } else {
            self.non_finite += 1;
            PENALTY
        };
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        if !probe {
            self.trail.push_back(self.best_f);
            while self.trail.len() > self.config.stall_window + 1 {
                self.trail.pop_front();
            }
        }
        v
    }

    /// Evaluates at the projection of `x`; returns the projected point.
    fn eval(&mut self, x: &[f64]) -> (Vec<f64>, f64) {
        let xp = self.project(x);
        let raw = (self.f)(&xp);
        let v = self.register(&xp, raw, false);
        (xp, v)
    }

    fn eval_probes(&mut self, points: &[Vec<f64>]) -> Vec<f64> {
        let raws: Vec<f64> = points.par_iter().map(|p| (self.f)(p)).collect();
        points.iter().zip(raws).map(|(p, raw)| self.register(p, raw, true)).collect()
    }

    fn stop_reason(&self) -> Option<StopReason> {
        if self.best_f <= self.config.value_floor {
            return Some(StopReason::ValueFloor);
        }
        if self.evals >= self.config.max_evals {
            return Some(StopReason::MaxEvals);
        }
        if self.trail.len() > self.config.stall_window {
            let old = self.trail[0];
            if old - self.best_f <= self.config.f_tol * old.abs() {
                return Some(StopReason::Stalled);
            }
        }
        None
    }

    fn record(&mut self) {
        let iteration = self.history.len();
        self.history.push(IterationRecord {
            iteration,
            evals: self.evals,
            value: self.best_f,
            params: self.best_x.clone(),
        });
    }

    fn finish(self, stop: StopReason) -> OptimResult {
        OptimResult {
            params: self.best_x,
            value: self.best_f,
            iterations: self.history.len().saturating_sub(1),
            evals: self.evals,
            non_finite_evals: self.non_finite,
            stop,
            history: self.history,
        }
    }
}

/// Minimizes `f` from `init`, keeping every evaluated point inside `bounds`.
pub fn minimize<F>(f: &F, init: &[f64], bounds: Option<&Bounds>, config: &OptimizerConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if init.is_empty() {
        return invalid("no parameters to optimize");
    }
    if let Some(b) = bounds {
        if b.len() != init.len() {
            return invalid(format!("{} bounds for {} parameters", b.len(), init.len()));
        }
        if b.iter().any(|(lo, hi)| !(lo <= hi)) {
            return invalid("bounds must satisfy lo <= hi");
        }
    }
    let mut ev = Evaluator {
        f,
        bounds,
        config,
        evals: 0,
        non_finite: 0,
        best_x: Vec::new(),
        best_f: f64::INFINITY,
        trail: VecDeque::new(),
        history: Vec::new(),
    };
    let x0 = ev.project(init);
    let f0 = f(&x0);
    if !f0.is_finite() {
        return Err(Error::Precondition("objective is not finite at the initial point".into()));
    }
    ev.register(&x0, f0, false);
    ev.record();
    if let Some(stop) = ev.stop_reason() {
        return Ok(ev.finish(stop));
    }
    let stop = match config.method {
        Method::Simplex => nelder_mead(&mut ev, x0, f0),
        Method::QuasiNewton => lbfgs(&mut ev, x0, f0),
    };
    Ok(ev.finish(stop))
}

fn initial_steps(x: &[f64], bounds: Option<&Bounds>) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut h = 0.1 * v.abs().max(0.5);
            if let Some(b) = bounds {
                let (lo, hi) = b[i];
                if v + h > hi {
                    h = if v - h >= lo { -h } else { (hi - lo) / 2.0 * if hi - v >= v - lo { 1.0 } else { -1.0 } };
                }
            }
            h
        })
        .collect()
}

fn nelder_mead<F: Fn(&[f64]) -> f64 + Sync>(ev: &mut Evaluator<F>, x0: Vec<f64>, f0: f64) -> StopReason {
    let n = x0.len();
    let nf = n as f64;
    let (expand, contract, shrink) = if n >= 2 {
        (1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (2.0, 0.5, 0.5)
    };
    let mut restarts_left = ev.config.restarts;
    let mut start = (x0, f0);
    loop {
        let start_best = ev.best_f;
        let steps = initial_steps(&start.0, ev.bounds);
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![start.clone()];
        for i in 0..n {
            let mut x = start.0.clone();
            x[i] += steps[i];
            let p = ev.eval(&x);
            simplex.push(p);
            if let Some(stop) = ev.stop_reason() {
                return stop;
            }
        }
        let converged = loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (f_lo, f_hi) = (simplex[0].1, simplex[n].1);
            let diam = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if f_hi - f_lo <= ev.config.f_tol * f_lo.abs().max(1e-300) || diam <= 1e-13 {
                break true;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / nf;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
            let refl = ev.eval(&along(1.0));
            if refl.1 < simplex[0].1 {
                let exp = ev.eval(&along(expand));
                simplex[n] = if exp.1 < refl.1 { exp } else { refl };
            } else if refl.1 < simplex[n - 1].1 {
                simplex[n] = refl;
            } else {
                let outside = refl.1 < worst.1;
                let c = if outside { ev.eval(&along(contract)) } else { ev.eval(&along(-contract)) };
                let accept = if outside { c.1 <= refl.1 } else { c.1 < worst.1 };
                if accept {
                    simplex[n] = c;
                } else {
                    let best = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = best.iter().zip(&item.0).map(|(b, v)| b + shrink * (v - b)).collect();
                        *item = ev.eval(&x);
                        if ev.stop_reason().is_some() {
                            break;
                        }
                    }
                }
            }
            ev.record();
            if let Some(stop) = ev.stop_reason() {
                return stop;
            }
        };
        if converged {
            let improved = start_best - ev.best_f > ev.config.f_tol * start_best.abs();
            if restarts_left == 0 || (!improved && restarts_left < ev.config.restarts) {
                return StopReason::Converged;
            }
            restarts_left -= 1;
            start = (ev.best_x.clone(), ev.best_f);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient<F: Fn(&[f64]) -> f64 + Sync>(ev: &mut Evaluator<F>, x: &[f64], fx: f64) -> Vec<f64> {
    let n = x.len();
    let mut points = Vec::with_capacity(2 * n);
    let mut plan = Vec::with_capacity(n);
    for i in 0..n {
        let h = ev.config.fd_step * x[i].abs().max(1.0);
        let (lo, hi) = ev.bounds.map(|b| b[i]).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let up = x[i] + h <= hi;
        let down = x[i] - h >= lo;
        let mut p = x.to_vec();
        let mut q = x.to_vec();
        let kind = match (up, down) {
            (true, true) => {
                p[i] += h;
                q[i] -= h;
                points.push(p);
                points.push(q);
                0
            }
            (true, false) => {
                p[i] += h;
                points.push(p);
                1
            }
            (false, true) => {
                q[i] -= h;
                points.push(q);
                2
            }
            (false, false) => 3,
        };
        plan.push((kind, h));
    }
    let values = ev.eval_probes(&points);
    let mut k = 0;
    plan.iter()
        .map(|&(kind, h)| match kind {
            0 => {
                let g = (values[k] - values[k + 1]) / (2.0 * h);
                k += 2;
                g
            }
            1 => {
                let g = (values[k] - fx) / h;
                k += 1;
                g
            }
            2 => {
                let g = (fx - values[k]) / h;
                k += 1;
                g
            }
            _ => 0.0,
        })
        .collect()
}

fn lbfgs<F: Fn(&[f64]) -> f64 + Sync>(ev: &mut Evaluator<F>, x0: Vec<f64>, f0: f64) -> StopReason {
    const MEMORY: usize = 10;
    let n = x0.len();
    let (mut x, mut fx) = (x0, f0);
    let mut g = gradient(ev, &x, fx);
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut first = true;
    loop {
        if let Some(stop) = ev.stop_reason() {
            return stop;
        }
        // Variables pinned at a bound with the gradient pushing outward are frozen.
        let free: Vec<bool> = (0..n)
            .map(|i| match ev.bounds {
                Some(b) => !((x[i] <= b[i].0 && g[i] > 0.0) || (x[i] >= b[i].1 && g[i] < 0.0)),
                None => true,
            })
            .collect();
        let pg = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg == 0.0 || !pg.is_finite() {
            return StopReason::Converged;
        }
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut step = if first { (1.0 / pg).min(1.0) } else { 1.0 };
        first = false;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (xp, fp) = ev.eval(&trial);
            let dx: Vec<f64> = xp.iter().zip(&x).map(|(a, b)| a - b).collect();
            if dx.iter().all(|v| *v == 0.0) {
                break;
            }
            if fp <= fx + 1e-4 * dot(&g, &dx) {
                accepted = Some((xp, fp, dx));
                break;
            }
            if let Some(stop) = ev.stop_reason() {
                return stop;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, s)) = accepted else {
            if mem.is_empty() {
                return StopReason::Converged;
            }
            mem.clear();
            continue;
        };
        let gn = gradient(ev, &xn, fnew);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            mem.push_back((s, y, 1.0 / sy));
            if mem.len() > MEMORY {
                mem.pop_front();
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
        ev.record();
    }
}
