//! Rank condition: iterated Lie derivatives of the output along the vector
//! field, the stacked map `H = (h, L_f h, ..., L_f^{N-1} h)` and the numerical
//! rank of its Jacobian over sampled initial states.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{differentiate, simplify, EvalError, Expr, ParamEnv, SeamPolicy};
use crate::sampling::SamplingPlan;
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservabilityError {
    #[error("derivative order must be at least 1")]
    InvalidOrder,
    #[error("point has {found} components, system has {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("rank tolerance must be positive")]
    InvalidTolerance,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `L_f e = sum_i (de/dx_i) f_i`, simplified.
pub fn lie_derivative(spec: &SystemSpec, e: &Expr) -> Expr {
    let terms = spec
        .f()
        .iter()
        .enumerate()
        .map(|(i, fi)| simplify(&Expr::mul(differentiate(e, i + 1), fi.clone())))
        .filter(|t| !t.is_const(0.0));
    match terms.reduce(Expr::add) {
        Some(sum) => simplify(&sum),
        None => Expr::Const(0.0),
    }
}

/// Stacked Lie derivatives and their symbolic Jacobian.
///
/// Row `k * p + j` is `L_f^k h_{j+1}`; the Jacobian has one row per map row
/// and one column per state.
#[derive(Debug, Clone)]
pub struct ObservabilityMap {
    order: usize,
    n: usize,
    p: usize,
    rows: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    params: ParamEnv,
}

pub fn observability_map(spec: &SystemSpec, order: usize) -> Result<ObservabilityMap, ObservabilityError> {
    if order == 0 {
        return Err(ObservabilityError::InvalidOrder);
    }
    let mut rows: Vec<Expr> = spec.h().iter().map(simplify).collect();
    for k in 1..order {
        let prev = (k - 1) * spec.p();
        for j in 0..spec.p() {
            let next = lie_derivative(spec, &rows[prev + j]);
            rows.push(next);
        }
    }
    let jacobian = rows
        .iter()
        .map(|r| (1..=spec.n()).map(|i| differentiate(r, i)).collect())
        .collect();
    Ok(ObservabilityMap {
        order,
        n: spec.n(),
        p: spec.p(),
        rows,
        jacobian,
        params: spec.params().clone(),
    })
}

impl ObservabilityMap {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows(&self) -> &[Expr] {
        &self.rows
    }

    pub fn jacobian(&self) -> &[Vec<Expr>] {
        &self.jacobian
    }

    /// Same map with its rows (and Jacobian rows) permuted: `perm[i]` is the
    /// old index of new row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            rows: perm.iter().map(|&i| self.rows[i].clone()).collect(),
            jacobian: perm.iter().map(|&i| self.jacobian[i].clone()).collect(),
            ..self.clone()
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ObservabilityError> {
        if x.len() != self.n {
            return Err(ObservabilityError::PointDimension {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval_rows(&self, x: &[f64]) -> Result<Vec<f64>, ObservabilityError> {
        self.check_point(x)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.eval(x, &self.params))
            .collect::<Result<_, _>>()?)
    }

    pub fn eval_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, ObservabilityError> {
        self.eval_jacobian_with(x, SeamPolicy::Strict)
    }

    fn eval_jacobian_with(&self, x: &[f64], seam: SeamPolicy) -> Result<DMatrix<f64>, ObservabilityError> {
        self.check_point(x)?;
        let mut data = Vec::with_capacity(self.rows.len() * self.n);
        for row in &self.jacobian {
            for e in row {
                data.push(e.eval_with(x, &self.params, seam)?);
            }
        }
        Ok(DMatrix::from_row_slice(self.rows.len(), self.n, &data))
    }

    fn near_seam(&self, x: &[f64], margin: f64) -> bool {
        self.jacobian
            .iter()
            .flatten()
            .any(|e| e.near_seam(x, &self.params, margin))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointRank {
    pub rank: usize,
    /// Smallest of the `n` singular values (0 when there are fewer rows than states).
    pub sigma_min: f64,
    pub sigma_max: f64,
}

fn rank_of(j: &DMatrix<f64>, tol: f64) -> PointRank {
    let n = j.ncols();
    let sv = j.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = tol * sigma_max.max(1.0);
    let rank = sv.iter().filter(|s| **s > threshold).count();
    let sigma_min = if j.nrows() < n {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    PointRank {
        rank,
        sigma_min,
        sigma_max,
    }
}

/// Numerical rank of the evaluated Jacobian: singular values above
/// `tol * max(sigma_max, 1)` count.
pub fn jacobian_rank_at(map: &ObservabilityMap, x: &[f64], tol: f64) -> Result<PointRank, ObservabilityError> {
    if !(tol > 0.0) {
        return Err(ObservabilityError::InvalidTolerance);
    }
    Ok(rank_of(&map.eval_jacobian(x)?, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOptions {
    #[serde(rename = "N")]
    pub order: usize,
    pub tol: f64,
    pub plan: SamplingPlan,
    /// Points this close to a conditional's switching surface are checked on both branches.
    pub seam_margin: f64,
    pub seed: u64,
}

impl RankOptions {
    /// `N = n`, `tol = 1e-8`, default sampling plan, seam margin `1e-9`.
    pub fn for_system(spec: &SystemSpec) -> Self {
        Self {
            order: spec.n(),
            tol: 1e-8,
            plan: SamplingPlan::default_for(spec.n()),
            seam_margin: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankVerdict {
    FullRankOnSamples,
    DeficientAtWitnesses,
    /// Every sample was excluded.
    NoEvaluableSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRank {
    pub point: Vec<f64>,
    pub rank: usize,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedPoint {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub system: String,
    #[serde(rename = "N")]
    pub order: usize,
    pub n: usize,
    pub tol: f64,
    pub samples: usize,
    pub min_sigma: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub verdict: RankVerdict,
    pub deficient_points: usize,
    pub excluded_points: Vec<ExcludedPoint>,
    pub rows: Vec<String>,
    pub per_sample: Vec<SampleRank>,
}

impl RankReport {
    pub fn is_full_rank(&self) -> bool {
        self.verdict == RankVerdict::FullRankOnSamples
    }
}

enum Outcome {
    Ranked(PointRank),
    Excluded(String),
}

fn assess(map: &ObservabilityMap, x: &[f64], opts: &RankOptions) -> Outcome {
    if map.near_seam(x, opts.seam_margin) {
        let side = |then| {
            map.eval_jacobian_with(
                x,
                SeamPolicy::Force {
                    margin: opts.seam_margin,
                    then,
                },
            )
        };
        return match (side(true), side(false)) {
            (Ok(a), Ok(b)) => {
                let scale = a.amax().max(b.amax()).max(1.0);
                if (&a - &b).amax() <= 1e-12 * scale {
                    Outcome::Ranked(rank_of(&a, opts.tol))
                } else {
                    Outcome::Excluded("non-smooth: branches of a conditional disagree at the seam".into())
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                Outcome::Excluded(format!("non-smooth: a branch is undefined at the seam ({e})"))
            }
        };
    }
    match map.eval_jacobian(x) {
        Ok(j) => Outcome::Ranked(rank_of(&j, opts.tol)),
        Err(e) => Outcome::Excluded(e.to_string()),
    }
}

/// Evaluates the Jacobian rank at every point of the sampling plan.
pub fn rank_report(spec: &SystemSpec, opts: &RankOptions) -> Result<RankReport, ObservabilityError> {
    if !(opts.tol > 0.0) {
        return Err(ObservabilityError::InvalidTolerance);
    }
    let map = observability_map(spec, opts.order)?;
    let points = opts.plan.points(spec.omega(), opts.seed);
    let outcomes: Vec<Outcome> = points.par_iter().map(|x| assess(&map, x, opts)).collect();

    let mut per_sample = Vec::new();
    let mut excluded_points = Vec::new();
    for (x, o) in points.iter().zip(outcomes) {
        match o {
            Outcome::Ranked(r) => per_sample.push(SampleRank {
                point: x.clone(),
                rank: r.rank,
                sigma_min: r.sigma_min,
            }),
            Outcome::Excluded(reason) => excluded_points.push(ExcludedPoint {
                point: x.clone(),
                reason,
            }),
        }
    }

    let n = spec.n();
    let deficient_points = per_sample.iter().filter(|s| s.rank < n).count();
    let verdict = if per_sample.is_empty() {
        RankVerdict::NoEvaluableSamples
    } else if deficient_points > 0 {
        RankVerdict::DeficientAtWitnesses
    } else {
        RankVerdict::FullRankOnSamples
    };
    // the witness is the worst sample among those that decide the verdict
    let worst = per_sample
        .iter()
        .filter(|s| deficient_points == 0 || s.rank < n)
        .min_by(|a, b| a.sigma_min.total_cmp(&b.sigma_min));
    let min_sigma = per_sample.iter().map(|s| s.sigma_min).min_by(f64::total_cmp);

    Ok(RankReport {
        system: spec.name().to_string(),
        order: opts.order,
        n,
        tol: opts.tol,
        samples: points.len(),
        min_sigma,
        witness: worst.map(|s| s.point.clone()),
        verdict,
        deficient_points,
        excluded_points,
        rows: map.rows().iter().map(|r| r.to_string()).collect(),
        per_sample,
    })
}
