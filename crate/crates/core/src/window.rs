//! Distinguishability probing and empirical observation-window estimates.
//!
//! Two initial states are distinguished at the first time their outputs are
//! at least `eps` apart. Over a set of sampled pairs the window estimate is
//! the largest such time, reported as a curve over a ladder of minimum pair
//! distances so that growth as the distance shrinks is visible.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::odeint::{integrate, output_at, IntegratorConfig, OdeError, Trajectory, TrajectoryStatus};
use crate::sampling::{grid, Halton, MAX_HALTON_DIM};
use crate::system::{StateBox, SystemSpec};

/// Absolute time accuracy of a located separation time.
pub const TIME_ACCURACY: f64 = 1e-6;

// scan resolution inside each merged integrator step
const SUBSTEPS: usize = 8;
const LADDER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid pair plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distinction {
    /// First time the output distance reaches `eps`.
    Distinguished { t: f64 },
    /// Outputs stayed closer than `eps` up to `T_max`.
    NotDistinguished,
    /// A trajectory ended (escape) before separation and before `T_max`.
    Truncated { t_reached: f64 },
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn check_limits(t_max: f64, eps: f64) -> Result<(), WindowError> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(WindowError::InvalidInput("T_max must be positive and finite".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(WindowError::InvalidInput(
            "separation threshold must be positive".into(),
        ));
    }
    Ok(())
}

fn horizon(tr: &Trajectory, t_max: f64) -> Result<f64, OdeError> {
    if let TrajectoryStatus::StepFailure { t } = tr.status() {
        if t < t_max {
            return Err(OdeError::StepFailure { t });
        }
    }
    Ok(tr.t_reached().min(t_max))
}

/// Scan on the merged step grid, then bisect the first bracket.
fn separation(
    spec: &SystemSpec,
    tr1: &Trajectory,
    tr2: &Trajectory,
    t_max: f64,
    eps: f64,
) -> Result<Distinction, OdeError> {
    let upper = horizon(tr1, t_max)?.min(horizon(tr2, t_max)?);
    let gap = |t: f64| -> Result<f64, OdeError> { Ok(euclid(&output_at(spec, tr1, t)?, &output_at(spec, tr2, t)?)) };
    if gap(0.0)? >= eps {
        return Ok(Distinction::Distinguished { t: 0.0 });
    }

    let mut nodes: Vec<f64> = tr1
        .step_times()
        .chain(tr2.step_times())
        .filter(|t| *t < upper)
        .collect();
    nodes.push(upper);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let mut prev = 0.0;
    for w in nodes.windows(2) {
        for k in 1..=SUBSTEPS {
            let t = if k == SUBSTEPS {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * k as f64 / SUBSTEPS as f64
            };
            if gap(t)? >= eps {
                let (mut a, mut b) = (prev, t);
                while b - a > 0.01 * TIME_ACCURACY {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if gap(m)? >= eps {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                return Ok(Distinction::Distinguished { t: b });
            }
            prev = t;
        }
    }
    if upper < t_max {
        Ok(Distinction::Truncated { t_reached: upper })
    } else {
        Ok(Distinction::NotDistinguished)
    }
}

/// Smallest `t <= T_max` with `|h(phi(t, x1)) - h(phi(t, x2))| >= eps`.
///
/// The result is symmetric in `(x1, x2)` bit for bit.
pub fn distinguishing_time(
    spec: &SystemSpec,
    x1: &[f64],
    x2: &[f64],
    t_max: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<Distinction, WindowError> {
    check_limits(t_max, eps)?;
    if x1 == x2 {
        return Err(WindowError::InvalidInput("the two initial states coincide".into()));
    }
    let tr1 = integrate(spec, x1, t_max, cfg)?;
    let tr2 = integrate(spec, x2, t_max, cfg)?;
    Ok(separation(spec, &tr1, &tr2, t_max, eps)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairStrategy {
    /// All pairs of a uniform grid with `per_axis` points per axis.
    Grid {
        per_axis: usize,
    },
    /// Halton points in the product box, split into pairs.
    LowDiscrepancy {
        pairs: usize,
    },
    /// Corner-to-corner pairs, then pairs anchored at corners and faces.
    BoundaryBiased {
        pairs: usize,
    },
    Explicit {
        pairs: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSamplingPlan {
    pub strategy: PairStrategy,
    /// Separation floor: sampled pairs are at least this far apart.
    pub r_min: f64,
    pub seed: u64,
}

pub type Pair = (Vec<f64>, Vec<f64>);

impl PairSamplingPlan {
    pub fn new(strategy: PairStrategy, r_min: f64) -> Self {
        Self {
            strategy,
            r_min,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// The pairs, all inside `omega`, distinct and at distance at least `r_min`.
    pub fn pairs(&self, omega: &StateBox) -> Result<Vec<Pair>, WindowError> {
        if !(self.r_min > 0.0 && self.r_min.is_finite()) {
            return Err(WindowError::InvalidPlan("r_min must be positive".into()));
        }
        if self.r_min > omega.diameter() + LADDER_SLACK {
            return Err(WindowError::InvalidPlan(format!(
                "no pair in {omega} is {} apart",
                self.r_min
            )));
        }
        let far = |a: &[f64], b: &[f64]| euclid(a, b) >= self.r_min - LADDER_SLACK;
        let n = omega.dim();
        let out = match &self.strategy {
            PairStrategy::Grid { per_axis } => {
                let pts = grid(omega, *per_axis);
                let mut out = Vec::new();
                for i in 0..pts.len() {
                    for j in i + 1..pts.len() {
                        if far(&pts[i], &pts[j]) {
                            out.push((pts[i].clone(), pts[j].clone()));
                        }
                    }
                }
                out
            }
            PairStrategy::LowDiscrepancy { pairs } => {
                if 2 * n > MAX_HALTON_DIM {
                    return Err(WindowError::InvalidPlan(format!(
                        "low-discrepancy pairs support at most {} states",
                        MAX_HALTON_DIM / 2
                    )));
                }
                Halton::new(2 * n, self.seed)
                    .take(64 * pairs)
                    .map(|u| (omega.from_unit(&u[..n]), omega.from_unit(&u[n..])))
                    .filter(|(a, b)| far(a, b))
                    .take(*pairs)
                    .collect()
            }
            PairStrategy::BoundaryBiased { pairs } => {
                let corners = omega.corners(64);
                let mut out = Vec::new();
                for i in 0..corners.len() {
                    for j in i + 1..corners.len() {
                        if far(&corners[i], &corners[j]) {
                            out.push((corners[i].clone(), corners[j].clone()));
                        }
                    }
                }
                let mut extra = Vec::new();
                for (k, u) in Halton::new(n, self.seed).take(64 * pairs).enumerate() {
                    if extra.len() == *pairs {
                        break;
                    }
                    let p = omega.from_unit(&u);
                    let anchor = if k % 2 == 0 {
                        corners[(k / 2) % corners.len()].clone()
                    } else {
                        // snap one coordinate onto a face
                        let mut q = p.clone();
                        let axis = (k / 2) % n;
                        q[axis] = if u[axis] < 0.5 {
                            omega.lo()[axis]
                        } else {
                            omega.hi()[axis]
                        };
                        q
                    };
                    if far(&anchor, &p) {
                        extra.push((anchor, p));
                    }
                }
                out.extend(extra);
                out
            }
            PairStrategy::Explicit { pairs } => {
                for (a, b) in pairs {
                    if a.len() != n || b.len() != n {
                        return Err(WindowError::InvalidPlan(
                            "pair dimension does not match the system".into(),
                        ));
                    }
                    if !omega.contains(a) || !omega.contains(b) {
                        return Err(WindowError::InvalidPlan(format!("pair {a:?}, {b:?} leaves {omega}")));
                    }
                    if a == b {
                        return Err(WindowError::InvalidPlan(format!("pair {a:?} repeats the same state")));
                    }
                    if !far(a, b) {
                        return Err(WindowError::InvalidPlan(format!(
                            "pair {a:?}, {b:?} is closer than r_min = {}",
                            self.r_min
                        )));
                    }
                }
                pairs.clone()
            }
        };
        if out.is_empty() {
            return Err(WindowError::InvalidPlan("the plan produced no pairs".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub distance: f64,
    pub outcome: Distinction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub r: f64,
    /// Largest distinguishing time among pairs at distance at least `r`.
    pub t_hat: Option<f64>,
    pub n_pairs: usize,
    pub n_undistinguished: usize,
    pub n_truncated: usize,
    /// Some pair at this distance was not distinguished, so `t_hat` only bounds the window from below.
    pub lower_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowVerdict {
    DObservableOnSamples,
    UndistinguishedPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub system: String,
    pub r_min: f64,
    pub eps_sep: f64,
    pub t_max: f64,
    pub plan: PairSamplingPlan,
    pub t_hat: Option<f64>,
    pub t_hat_is_lower_bound: bool,
    pub verdict: WindowVerdict,
    pub n_pairs: usize,
    pub n_distinguished: usize,
    pub undistinguished: Vec<Pair>,
    pub truncated: Vec<Pair>,
    pub curve: Vec<CurvePoint>,
    pub pairs: Vec<PairRecord>,
}

impl WindowReport {
    pub fn is_d_observable(&self) -> bool {
        self.verdict == WindowVerdict::DObservableOnSamples
    }

    /// `r,T_hat,n_pairs,n_undistinguished`, one row per ladder value; an
    /// empty `T_hat` field means no pair at that distance was distinguished.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("r,T_hat,n_pairs,n_undistinguished\n");
        for c in &self.curve {
            let t = c.t_hat.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{:e},{t},{},{}\n", c.r, c.n_pairs, c.n_undistinguished));
        }
        s
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

fn classify(
    spec: &SystemSpec,
    pairs: Vec<Pair>,
    t_max: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<PairRecord>, WindowError> {
    cfg.validate()?;
    // integrate every distinct state once
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut states: Vec<&[f64]> = Vec::new();
    for (a, b) in &pairs {
        for x in [a, b] {
            index.entry(key(x)).or_insert_with(|| {
                states.push(x);
                states.len() - 1
            });
        }
    }
    let trajectories: Vec<Result<Trajectory, OdeError>> =
        states.par_iter().map(|x| integrate(spec, x, t_max, cfg)).collect();

    Ok(pairs
        .into_par_iter()
        .map(|(x1, x2)| {
            let t1 = &trajectories[index[&key(&x1)]];
            let t2 = &trajectories[index[&key(&x2)]];
            let result = match (t1, t2) {
                (Ok(a), Ok(b)) => separation(spec, a, b, t_max, eps),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            let (outcome, note) = match result {
                Ok(d) => (d, None),
                Err(e) => {
                    let reached = [t1, t2]
                        .iter()
                        .filter_map(|t| t.as_ref().ok().map(|t| t.t_reached()))
                        .fold(t_max, f64::min);
                    let reached = if t1.is_err() || t2.is_err() { 0.0 } else { reached };
                    (Distinction::Truncated { t_reached: reached }, Some(e.to_string()))
                }
            };
            PairRecord {
                distance: euclid(&x1, &x2),
                x1,
                x2,
                outcome,
                note,
            }
        })
        .collect())
}

/// Distinguishability check over the plan's pairs with a single curve point at `r_min`.
pub fn probe_indistinguishable(
    spec: &SystemSpec,
    plan: &PairSamplingPlan,
    t_max: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<WindowReport, WindowError> {
    estimate_window(spec, plan, &[], t_max, eps, cfg)
}

/// Window estimate `T_hat(r)` for each `r` of the ladder (default: just `r_min`).
pub fn estimate_window(
    spec: &SystemSpec,
    plan: &PairSamplingPlan,
    ladder: &[f64],
    t_max: f64,
    eps: f64,
    cfg: &IntegratorConfig,
) -> Result<WindowReport, WindowError> {
    check_limits(t_max, eps)?;
    let mut rungs: Vec<f64> = if ladder.is_empty() {
        vec![plan.r_min]
    } else {
        ladder.to_vec()
    };
    if let Some(bad) = rungs.iter().find(|r| !r.is_finite() || **r < plan.r_min - LADDER_SLACK) {
        return Err(WindowError::InvalidInput(format!(
            "ladder value {bad} is below r_min = {}",
            plan.r_min
        )));
    }
    rungs.sort_by(|a, b| b.total_cmp(a));
    rungs.dedup();

    let records = classify(spec, plan.pairs(spec.omega())?, t_max, eps, cfg)?;

    let curve = rungs
        .iter()
        .map(|&r| {
            let at_r = records.iter().filter(|p| p.distance >= r - LADDER_SLACK);
            let mut c = CurvePoint {
                r,
                t_hat: None,
                n_pairs: 0,
                n_undistinguished: 0,
                n_truncated: 0,
                lower_bound: false,
            };
            for p in at_r {
                c.n_pairs += 1;
                match p.outcome {
                    Distinction::Distinguished { t } => c.t_hat = Some(c.t_hat.map_or(t, |v: f64| v.max(t))),
                    Distinction::NotDistinguished => c.n_undistinguished += 1,
                    Distinction::Truncated { .. } => c.n_truncated += 1,
                }
            }
            c.lower_bound = c.n_undistinguished > 0;
            c
        })
        .collect::<Vec<_>>();

    let pick = |want: fn(&Distinction) -> bool| -> Vec<Pair> {
        records
            .iter()
            .filter(|p| want(&p.outcome))
            .map(|p| (p.x1.clone(), p.x2.clone()))
            .collect()
    };
    let undistinguished = pick(|d| matches!(d, Distinction::NotDistinguished));
    let truncated = pick(|d| matches!(d, Distinction::Truncated { .. }));
    let n_distinguished = records.len() - undistinguished.len() - truncated.len();
    let t_hat = records
        .iter()
        .filter_map(|p| match p.outcome {
            Distinction::Distinguished { t } => Some(t),
            _ => None,
        })
        .reduce(f64::max);

    Ok(WindowReport {
        system: spec.name().to_string(),
        r_min: plan.r_min,
        eps_sep: eps,
        t_max,
        plan: plan.clone(),
        t_hat,
        t_hat_is_lower_bound: !undistinguished.is_empty(),
        verdict: if undistinguished.is_empty() {
            WindowVerdict::DObservableOnSamples
        } else {
            WindowVerdict::UndistinguishedPairs
        },
        n_pairs: records.len(),
        n_distinguished,
        undistinguished,
        truncated,
        curve,
        pairs: records,
    })
}
