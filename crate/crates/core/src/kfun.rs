//! Output-energy infimum over separated pairs and its class-K minorant.
//!
//! `alpha0(r)` is the smallest windowed output energy
//! `int_0^T |h(phi(t, x1)) - h(phi(t, x2))|^2 dt` over pairs of `omega` at
//! distance at least `r`. It is estimated on a grid of distances by
//! multi-start Nelder-Mead with a projection onto the feasible pairs, and a
//! piecewise-linear, strictly increasing function below the estimates is
//! built from the table.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::odeint::{integral_eta, integral_eta_between, integrate, IntegratorConfig, OdeError, TrajectoryStatus};
use crate::sampling::{Halton, MAX_HALTON_DIM};
use crate::system::{StateBox, SystemSpec};
use crate::window::Pair;

// pairs this much shorter than required still count as feasible
const DIST_SLACK: f64 = 1e-12;
/// Slack allowed when replaying the integral bound on witnesses.
pub const REPLAY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroLevel {
    pub r: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KfunError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no pair in the box is {r} apart (diameter {diameter})")]
    Infeasible { r: f64, diameter: f64 },
    #[error("every start failed at r = {r}: trajectories escape or cannot be evaluated")]
    AllStartsFailed { r: f64 },
    #[error("distance grid must be positive and strictly increasing")]
    GridNotIncreasing,
    #[error("at least two distance levels are needed, got {0}")]
    TooFewLevels(usize),
    #[error("level r = {r} has no estimate: {message}")]
    LevelFailed { r: f64, message: String },
    #[error("zero output energy at {} level(s): not K-observable on this evidence", .witnesses.len())]
    NotKObservableOnEvidence { witnesses: Vec<ZeroLevel> },
    #[error("r = {r} is outside [0, {r_max}]")]
    OutOfDomain { r: f64, r_max: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// Effort spent per distance level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchBudget {
    pub starts: usize,
    pub evals_per_start: usize,
    /// Relative spread of simplex values at convergence.
    pub ftol: f64,
    /// Seed of the shifted Halton start points.
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            starts: 32,
            evals_per_start: 400,
            ftol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMinimum {
    pub value: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub status: MinimizerStatus,
    pub evaluations: usize,
    pub failed_starts: usize,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Moves a pair onto `{x1, x2 in omega, |x1 - x2| >= r}`: spread it along its
/// difference, translate it back inside, clamp. `None` if still too short.
fn project(omega: &StateBox, z: &[f64], r: f64) -> Option<Pair> {
    let n = omega.dim();
    let (mut a, mut b) = (z[..n].to_vec(), z[n..].to_vec());
    let d = dist(&a, &b);
    if d < r {
        let u: Vec<f64> = if d > 0.0 {
            a.iter().zip(&b).map(|(p, q)| (q - p) / d).collect()
        } else {
            (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
        };
        for i in 0..n {
            let mid = 0.5 * (a[i] + b[i]);
            a[i] = mid - 0.5 * r * u[i];
            b[i] = mid + 0.5 * r * u[i];
        }
    }
    for i in 0..n {
        let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
        let shift = if lo < omega.lo()[i] {
            omega.lo()[i] - lo
        } else if hi > omega.hi()[i] {
            omega.hi()[i] - hi
        } else {
            0.0
        };
        a[i] += shift;
        b[i] += shift;
    }
    omega.clamp(&mut a);
    omega.clamp(&mut b);
    (dist(&a, &b) >= r - DIST_SLACK).then_some((a, b))
}

struct Descent {
    z: Vec<f64>,
    value: f64,
    converged: bool,
    evals: usize,
}

fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    start: Vec<f64>,
    step: &[f64],
    max_evals: usize,
    ftol: f64,
    xtol: f64,
) -> Descent {
    let m = start.len();
    let mut evals = 0;
    let mut eval = |z: &[f64], evals: &mut usize| {
        *evals += 1;
        f(z)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    let v0 = eval(&start, &mut evals);
    simplex.push((start.clone(), v0));
    for i in 0..m {
        let mut z = start.clone();
        z[i] += step[i];
        let v = eval(&z, &mut evals);
        simplex.push((z, v));
    }
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[m].1);
        let size = simplex[1..]
            .iter()
            .map(|(z, _)| {
                z.iter()
                    .zip(&simplex[0].0)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if best.is_finite() && worst - best <= ftol * best.abs() + 1e-14 && size <= xtol {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..m)
            .map(|j| simplex[..m].iter().map(|(z, _)| z[j]).sum::<f64>() / m as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[m].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let zr = along(-1.0);
        let fr = eval(&zr, &mut evals);
        if fr < best {
            let ze = along(-2.0);
            let fe = eval(&ze, &mut evals);
            simplex[m] = if fe < fr { (ze, fe) } else { (zr, fr) };
            continue;
        }
        if fr < simplex[m - 1].1 {
            simplex[m] = (zr, fr);
            continue;
        }
        let (zc, fc) = if fr < worst {
            let z = along(-0.5);
            let v = eval(&z, &mut evals);
            (z, v)
        } else {
            let z = along(0.5);
            let v = eval(&z, &mut evals);
            (z, v)
        };
        if fc < worst.min(fr) {
            simplex[m] = (zc, fc);
            continue;
        }
        let z0 = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let z: Vec<f64> = z0.iter().zip(&vertex.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            let v = eval(&z, &mut evals);
            *vertex = (z, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (z, value) = simplex.swap_remove(0);
    Descent {
        z,
        value,
        converged,
        evals,
    }
}

/// Warm start, corner-anchored pairs at distance `r`, corner pairs, then Halton pairs.
fn start_points(omega: &StateBox, r: f64, warm: Option<&Pair>, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = omega.dim();
    let join = |a: &[f64], b: &[f64]| [a, b].concat();
    let mut out = Vec::new();
    if let Some((a, b)) = warm {
        out.push(join(a, b));
    }
    let corners = omega.corners(16);
    let center = omega.center();
    for c in &corners {
        let d = dist(c, &center);
        if d > 0.0 {
            let partner: Vec<f64> = c.iter().zip(&center).map(|(p, q)| p + r * (q - p) / d).collect();
            out.push(join(c, &partner));
        }
    }
    for i in 0..corners.len() {
        for j in i + 1..corners.len() {
            out.push(join(&corners[i], &corners[j]));
        }
    }
    out.truncate(count);
    if out.len() < count && 2 * n <= MAX_HALTON_DIM {
        let lo = [omega.lo(), omega.lo()].concat();
        let hi = [omega.hi(), omega.hi()].concat();
        for u in Halton::new(2 * n, seed).take(count - out.len()) {
            out.push(u.iter().enumerate().map(|(k, v)| lo[k] + v * (hi[k] - lo[k])).collect());
        }
    }
    out
}

/// Best-found minimum of the windowed output energy over pairs at distance at least `r`.
pub fn minimize_pair(
    spec: &SystemSpec,
    r: f64,
    t_final: f64,
    cfg: &IntegratorConfig,
    budget: &SearchBudget,
    warm: Option<&Pair>,
) -> Result<PairMinimum, KfunError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(KfunError::InvalidInput("distance must be positive".into()));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(KfunError::InvalidInput("horizon must be positive".into()));
    }
    if budget.starts == 0 || budget.evals_per_start == 0 {
        return Err(KfunError::InvalidInput("search budget must be positive".into()));
    }
    cfg.validate()?;
    let omega = spec.omega();
    let diameter = omega.diameter();
    if r > diameter + DIST_SLACK {
        return Err(KfunError::Infeasible { r, diameter });
    }
    let n = omega.dim();
    let step: Vec<f64> = (0..2 * n).map(|k| 0.1 * omega.width(k % n)).collect();
    let xtol = 1e-7 * diameter;

    let objective = |z: &[f64]| -> f64 {
        match project(omega, z, r) {
            Some((a, b)) => {
                let (Ok(ta), Ok(tb)) = (integrate(spec, &a, t_final, cfg), integrate(spec, &b, t_final, cfg)) else {
                    return f64::INFINITY;
                };
                // an escaping pair has no finite-window energy; skip the quadrature
                if ta.status() != TrajectoryStatus::Completed || tb.status() != TrajectoryStatus::Completed {
                    return f64::INFINITY;
                }
                integral_eta_between(spec, &ta, &tb, t_final).map_or(f64::INFINITY, |v| v.value)
            }
            None => f64::INFINITY,
        }
    };

    let starts = start_points(omega, r, warm, budget.starts, budget.seed);
    let runs: Vec<Descent> = starts
        .into_par_iter()
        .map(|z| {
            let mut f = objective;
            nelder_mead(&mut f, z, &step, budget.evals_per_start, budget.ftol, xtol)
        })
        .collect();

    let evaluations = runs.iter().map(|d| d.evals).sum();
    let failed_starts = runs.iter().filter(|d| !d.value.is_finite()).count();
    let best = runs
        .iter()
        .filter(|d| d.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or(KfunError::AllStartsFailed { r })?;
    let (x1, x2) = project(omega, &best.z, r).ok_or(KfunError::AllStartsFailed { r })?;
    Ok(PairMinimum {
        value: best.value,
        x1,
        x2,
        status: if best.converged {
            MinimizerStatus::Converged
        } else {
            MinimizerStatus::BudgetExhausted
        },
        evaluations,
        failed_starts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alpha0Level {
    pub r: f64,
    pub beta: Option<f64>,
    pub witness: Option<Pair>,
    pub status: Option<MinimizerStatus>,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alpha0Table {
    pub system: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub budget: SearchBudget,
    pub levels: Vec<Alpha0Level>,
}

impl Alpha0Table {
    pub fn betas(&self) -> Vec<Option<f64>> {
        self.levels.iter().map(|l| l.beta).collect()
    }

    /// `r,beta,status`; failed levels have an empty `beta`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,beta,status\n");
        for l in &self.levels {
            let beta = l.beta.map(|b| format!("{b:e}")).unwrap_or_default();
            let status = match l.status {
                Some(MinimizerStatus::Converged) => "converged",
                Some(MinimizerStatus::BudgetExhausted) => "budget_exhausted",
                None => "failed",
            };
            s.push_str(&format!("{:e},{beta},{status}\n", l.r));
        }
        s
    }
}

/// Estimates `alpha0` at each grid distance, warm-starting every level from the previous witness.
pub fn estimate_alpha0(
    spec: &SystemSpec,
    t_final: f64,
    r_grid: &[f64],
    cfg: &IntegratorConfig,
    budget: &SearchBudget,
) -> Result<Alpha0Table, KfunError> {
    if r_grid.is_empty()
        || !(r_grid[0] > 0.0)
        || r_grid.iter().any(|r| !r.is_finite())
        || r_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(KfunError::GridNotIncreasing);
    }
    let mut levels = Vec::with_capacity(r_grid.len());
    let mut warm: Option<Pair> = None;
    for &r in r_grid {
        let level = match minimize_pair(spec, r, t_final, cfg, budget, warm.as_ref()) {
            Ok(m) => {
                warm = Some((m.x1.clone(), m.x2.clone()));
                Alpha0Level {
                    r,
                    beta: Some(m.value),
                    witness: Some((m.x1, m.x2)),
                    status: Some(m.status),
                    evaluations: m.evaluations,
                    error: None,
                }
            }
            Err(KfunError::InvalidInput(msg)) => return Err(KfunError::InvalidInput(msg)),
            Err(e) => Alpha0Level {
                r,
                beta: None,
                witness: None,
                status: None,
                evaluations: 0,
                error: Some(e.to_string()),
            },
        };
        levels.push(level);
    }
    Ok(Alpha0Table {
        system: spec.name().to_string(),
        horizon: t_final,
        budget: budget.clone(),
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub r: f64,
    pub alpha: f64,
}

/// Continuous, strictly increasing, piecewise-linear, zero at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KFunction {
    pub system: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `(0, 0)` followed by one anchor per grid distance.
    pub anchors: Vec<Anchor>,
    /// Range where the function is known to stay below the tabulated infimum.
    pub certified_domain: (f64, f64),
}

impl KFunction {
    pub fn r_max(&self) -> f64 {
        self.anchors.last().map_or(0.0, |a| a.r)
    }

    pub fn anchors_csv(&self) -> String {
        let mut s = String::from("r,alpha\n");
        for a in &self.anchors {
            s.push_str(&format!("{:e},{:e}\n", a.r, a.alpha));
        }
        s
    }
}

/// Piecewise-linear minorant from a table with strictly positive estimates.
///
/// With `a_i = min_{j >= i} beta_j` and `b_i = a_i r_i / r_K`, the anchors
/// are `(r_0, b_0 r_0 / r_1)` and `(r_i, b_{i-1})` for `i >= 1`. On
/// `[r_i, r_{i+1}]` the function stays below `b_i <= a_i <= beta_i`.
pub fn build_k_function(table: &Alpha0Table) -> Result<KFunction, KfunError> {
    let mut betas = Vec::with_capacity(table.levels.len());
    for l in &table.levels {
        match l.beta {
            Some(b) => betas.push(b),
            None => {
                return Err(KfunError::LevelFailed {
                    r: l.r,
                    message: l.error.clone().unwrap_or_default(),
                })
            }
        }
    }
    let zeros: Vec<ZeroLevel> = table
        .levels
        .iter()
        .filter(|l| l.beta.is_some_and(|b| b <= 0.0))
        .map(|l| {
            let (x1, x2) = l.witness.clone().unwrap_or_default();
            ZeroLevel { r: l.r, x1, x2 }
        })
        .collect();
    if !zeros.is_empty() {
        return Err(KfunError::NotKObservableOnEvidence { witnesses: zeros });
    }
    let k = table.levels.len();
    if k < 2 {
        return Err(KfunError::TooFewLevels(k));
    }
    let r: Vec<f64> = table.levels.iter().map(|l| l.r).collect();
    if r[0] <= 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KfunError::GridNotIncreasing);
    }

    let mut a = betas.clone();
    for i in (0..k - 1).rev() {
        a[i] = a[i].min(a[i + 1]);
    }
    let r_top = r[k - 1];
    let strict: Vec<f64> = a.iter().zip(&r).map(|(ai, ri)| ai * (ri / r_top)).collect();

    let mut anchors = vec![Anchor { r: 0.0, alpha: 0.0 }];
    anchors.push(Anchor {
        r: r[0],
        alpha: strict[0] * (r[0] / r[1]),
    });
    for i in 1..k {
        anchors.push(Anchor {
            r: r[i],
            alpha: strict[i - 1],
        });
    }
    if anchors.windows(2).any(|w| w[1].alpha <= w[0].alpha) {
        return Err(KfunError::InvalidInput(
            "distance levels too close to separate the anchor values".into(),
        ));
    }
    Ok(KFunction {
        system: table.system.clone(),
        horizon: table.horizon,
        anchors,
        certified_domain: (r[0], r_top),
    })
}

/// Linear interpolation between anchors on `[0, r_K]`.
pub fn eval_k(k: &KFunction, r: f64) -> Result<f64, KfunError> {
    let r_max = k.r_max();
    if !(0.0..=r_max).contains(&r) {
        return Err(KfunError::OutOfDomain { r, r_max });
    }
    let i = k.anchors.partition_point(|a| a.r <= r);
    if i >= k.anchors.len() {
        return Ok(k.anchors[k.anchors.len() - 1].alpha);
    }
    let (p, q) = (k.anchors[i - 1], k.anchors[i]);
    Ok(p.alpha + (q.alpha - p.alpha) * (r - p.r) / (q.r - p.r))
}

/// Minorant and monotonicity checks of a K-function against its table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorantCheck {
    pub grid_points: usize,
    pub below_table: bool,
    pub strictly_increasing: bool,
    pub zero_at_zero: bool,
    /// Largest `alpha(r_i) - beta_i`; never positive when `below_table` holds.
    pub worst_margin: f64,
}

impl MinorantCheck {
    pub fn passed(&self) -> bool {
        self.below_table && self.strictly_increasing && self.zero_at_zero
    }
}

pub fn check_minorant(k: &KFunction, table: &Alpha0Table, check_points: usize) -> Result<MinorantCheck, KfunError> {
    let mut worst = f64::NEG_INFINITY;
    for l in &table.levels {
        let beta = l.beta.ok_or_else(|| KfunError::LevelFailed {
            r: l.r,
            message: l.error.clone().unwrap_or_default(),
        })?;
        worst = worst.max(eval_k(k, l.r)? - beta);
    }
    let (lo, hi) = k.certified_domain;
    let m = check_points.max(2);
    let mut strictly_increasing = true;
    let mut prev = eval_k(k, 0.0)?;
    let zero_at_zero = prev == 0.0;
    for i in 0..m {
        let r = (lo + (hi - lo) * i as f64 / (m - 1) as f64).min(hi);
        let v = eval_k(k, r)?;
        if v <= prev {
            strictly_increasing = false;
        }
        prev = v;
    }
    Ok(MinorantCheck {
        grid_points: m,
        below_table: worst <= 0.0,
        strictly_increasing,
        zero_at_zero,
        worst_margin: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayRecord {
    pub r: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub distance: f64,
    pub integral: f64,
    /// `alpha` at the pair distance, capped at the top of the domain.
    pub alpha: f64,
    pub holds: bool,
}

/// Recomputes the windowed output energy of every witness and compares it
/// with `alpha(|x1 - x2|)`.
pub fn replay_certificate(
    spec: &SystemSpec,
    k: &KFunction,
    table: &Alpha0Table,
    cfg: &IntegratorConfig,
) -> Result<Vec<ReplayRecord>, KfunError> {
    table
        .levels
        .iter()
        .filter_map(|l| l.witness.as_ref().map(|w| (l.r, w)))
        .map(|(r, (x1, x2))| {
            let integral = integral_eta(spec, x1, x2, table.horizon, cfg)?.value;
            let distance = dist(x1, x2);
            let alpha = eval_k(k, distance.min(k.r_max()))?;
            Ok(ReplayRecord {
                r,
                x1: x1.clone(),
                x2: x2.clone(),
                distance,
                integral,
                alpha,
                holds: integral >= alpha - REPLAY_SLACK,
            })
        })
        .collect()
}
