use std::fs;
use std::path::Path;

use obswin_core::examples::{load_example, EXAMPLE_NAMES};
use obswin_core::kfun::{
    build_k_function, check_minorant, estimate_alpha0, replay_certificate, Alpha0Table, KFunction, KfunError,
    MinorantCheck, ReplayRecord, SearchBudget,
};
use obswin_core::observability::{rank_report, ObservabilityError, RankOptions, RankReport, RankVerdict};
use obswin_core::odeint::{integral_eta, OdeError};
use obswin_core::sampling::SamplingPlan;
use obswin_core::window::{
    distinguishing_time, estimate_window, probe_indistinguishable, Distinction, PairSamplingPlan, PairStrategy,
    WindowError, WindowReport, WindowVerdict,
};
use obswin_core::{parse_system, validate_system, IntegratorConfig, StateBox, SystemSpec};
use serde::Serialize;

use crate::args::{
    Alpha0Cmd, DistinguishCmd, GlobalOpts, KfunCmd, RankCmd, RankOpts, SearchOpts, ValidateCmd, WindowCmd, WindowOpts,
};
use crate::bundle::Artifact;
use crate::canonical::to_json;
use crate::{CliError, Output};

/// Report body tagged with its schema identifier.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    #[serde(flatten)]
    pub body: &'a T,
}

pub fn envelope<T: Serialize>(kind: &str, body: &T) -> String {
    let schema: &'static str = match kind {
        "rank" => "obswin/rank/v1",
        "distinguish" => "obswin/distinguish/v1",
        "window" => "obswin/window/v1",
        "alpha0" => "obswin/alpha0/v1",
        "kfun" => "obswin/kfun/v1",
        "validate" => "obswin/validate/v1",
        "reproduce" => "obswin/reproduce/v1",
        other => unreachable!("unknown report kind {other}"),
    };
    to_json(&Envelope { schema, body })
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn analysis(msg: impl ToString) -> CliError {
    CliError::Analysis(msg.to_string())
}

impl From<ObservabilityError> for CliError {
    fn from(e: ObservabilityError) -> Self {
        match e {
            ObservabilityError::Eval(_) => analysis(e),
            _ => usage(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::InvalidInput(_) => usage(e.to_string()),
            _ => analysis(e),
        }
    }
}

impl From<WindowError> for CliError {
    fn from(e: WindowError) -> Self {
        match e {
            WindowError::InvalidInput(_) | WindowError::InvalidPlan(_) => usage(e.to_string()),
            WindowError::Ode(o) => o.into(),
        }
    }
}

impl From<KfunError> for CliError {
    fn from(e: KfunError) -> Self {
        match e {
            KfunError::InvalidInput(_)
            | KfunError::Infeasible { .. }
            | KfunError::GridNotIncreasing
            | KfunError::TooFewLevels(_)
            | KfunError::OutOfDomain { .. } => usage(e.to_string()),
            KfunError::Ode(o) => o.into(),
            _ => analysis(e),
        }
    }
}

/// A spec file when the path exists, otherwise a built-in example named by
/// the argument or its file stem (`example2` stands for `example2-kink`).
pub fn load_system(arg: &str) -> Result<SystemSpec, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {arg}: {e}")))?;
        return parse_system(&text).map_err(|e| usage(format!("{arg}: {e}")));
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(arg);
    let name = if stem == "example2" { "example2-kink" } else { stem };
    match load_example(name) {
        Ok(case) => Ok(case.spec),
        Err(_) => Err(usage(format!(
            "{arg}: no such file, and not a built-in system ({})",
            EXAMPLE_NAMES.join(", ")
        ))),
    }
}

pub fn integrator(g: &GlobalOpts) -> Result<IntegratorConfig, CliError> {
    let cfg = IntegratorConfig {
        rtol: g.rtol,
        atol: g.atol,
        ..IntegratorConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn rank_options(spec: &SystemSpec, o: &RankOpts, seed: u64) -> RankOptions {
    let mut opts = RankOptions::for_system(spec);
    if let Some(n) = o.order {
        opts.order = n;
    }
    opts.tol = o.tol;
    opts.seam_margin = o.seam_margin;
    opts.seed = seed;
    if o.grid.is_some() || o.samples.is_some() {
        opts.plan = SamplingPlan {
            grid_per_axis: o.grid,
            low_discrepancy: o.samples,
        };
    }
    opts
}

fn samples_csv(report: &RankReport) -> String {
    let mut s: String = (1..=report.n).map(|i| format!("x{i},")).collect();
    s.push_str("rank,sigma_min\n");
    for r in &report.per_sample {
        for v in &r.point {
            s.push_str(&format!("{v:e},"));
        }
        s.push_str(&format!("{},{:e}\n", r.rank, r.sigma_min));
    }
    s
}

pub fn rank_artifacts(report: &RankReport) -> (String, String) {
    (envelope("rank", report), samples_csv(report))
}

pub fn rank(c: &RankCmd, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    let report = rank_report(&spec, &rank_options(&spec, &c.rank, g.seed))?;
    let (json, csv) = rank_artifacts(&report);
    Ok(Output {
        artifacts: vec![
            Artifact::new("rank.json", &json),
            Artifact::new("rank_samples.csv", &csv),
        ],
        json,
        csv: Some(csv),
    })
}

#[derive(Serialize)]
struct DistinguishReport<'a> {
    system: &'a str,
    x1: &'a [f64],
    x2: &'a [f64],
    distance: f64,
    t_max: f64,
    eps_sep: f64,
    outcome: Distinction,
}

pub fn distinguish(c: &DistinguishCmd, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    for x in [&c.x1, &c.x2] {
        if x.len() != spec.n() {
            return Err(usage(format!(
                "initial states need {} components, got {}",
                spec.n(),
                x.len()
            )));
        }
    }
    let outcome = distinguishing_time(&spec, &c.x1, &c.x2, c.t_max, c.eps, &integrator(g)?)?;
    let report = DistinguishReport {
        system: spec.name(),
        x1: &c.x1,
        x2: &c.x2,
        distance: c
            .x1
            .iter()
            .zip(&c.x2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        t_max: c.t_max,
        eps_sep: c.eps,
        outcome,
    };
    let csv = match outcome {
        Distinction::Distinguished { t } => format!("outcome,t\ndistinguished,{t:e}\n"),
        Distinction::NotDistinguished => "outcome,t\nnot_distinguished,\n".to_string(),
        Distinction::Truncated { t_reached } => format!("outcome,t\ntruncated,{t_reached:e}\n"),
    };
    let json = envelope("distinguish", &report);
    Ok(Output {
        artifacts: vec![Artifact::new("distinguish.json", &json)],
        json,
        csv: Some(csv),
    })
}

fn parse_pairs(text: &str) -> Result<PairStrategy, CliError> {
    let bad = || usage(format!("--pairs {text}: expected grid:K, lowdisc:M or boundary:M"));
    let (kind, count) = text.split_once(':').ok_or_else(bad)?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "grid" => Ok(PairStrategy::Grid { per_axis: count }),
        "lowdisc" => Ok(PairStrategy::LowDiscrepancy { pairs: count }),
        "boundary" => Ok(PairStrategy::BoundaryBiased { pairs: count }),
        _ => Err(bad()),
    }
}

/// Grid fine enough that neighbours along the widest axis are at most `r_min`
/// apart, capped per dimension; boundary-biased sampling above three states.
pub fn default_strategy(omega: &StateBox, r_min: f64) -> PairStrategy {
    const CAPS: [usize; 3] = [201, 21, 9];
    let n = omega.dim();
    if n > CAPS.len() {
        return PairStrategy::BoundaryBiased { pairs: 2000 };
    }
    let width = (0..n).map(|i| omega.width(i)).fold(0.0, f64::max);
    let q = width / r_min;
    let steps = if (q - q.round()).abs() <= 1e-9 * q.max(1.0) {
        q.round()
    } else {
        q.ceil()
    };
    let per_axis = if steps.is_finite() {
        steps as usize + 1
    } else {
        CAPS[n - 1]
    };
    PairStrategy::Grid {
        per_axis: per_axis.clamp(2, CAPS[n - 1]),
    }
}

pub fn window_plan(spec: &SystemSpec, o: &WindowOpts, ladder: &[f64], seed: u64) -> Result<PairSamplingPlan, CliError> {
    let r_min = match o.rmin {
        Some(r) => r,
        None if !ladder.is_empty() => ladder.iter().copied().fold(f64::INFINITY, f64::min),
        None => 0.05 * spec.omega().diameter(),
    };
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(usage("--rmin must be positive"));
    }
    let strategy = match &o.pairs {
        Some(p) => parse_pairs(p)?,
        None => default_strategy(spec.omega(), r_min),
    };
    Ok(PairSamplingPlan::new(strategy, r_min).with_seed(seed))
}

pub fn window_artifacts(report: &WindowReport) -> (String, String) {
    (envelope("window", report), report.curve_csv())
}

pub fn window(c: &WindowCmd, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    let plan = window_plan(&spec, &c.window, &c.rgrid, g.seed)?;
    let report = estimate_window(&spec, &plan, &c.rgrid, c.window.t_max, c.window.eps, &integrator(g)?)?;
    let (json, csv) = window_artifacts(&report);
    Ok(Output {
        artifacts: vec![
            Artifact::new("window.json", &json),
            Artifact::new("window_curve.csv", &csv),
        ],
        json,
        csv: Some(csv),
    })
}

pub fn budget(o: &SearchOpts, seed: u64) -> SearchBudget {
    SearchBudget {
        starts: o.starts,
        evals_per_start: o.evals,
        seed,
        ..SearchBudget::default()
    }
}

/// The requested grid, or 0.1 to 0.5 of the box diameter.
pub fn r_grid(spec: &SystemSpec, o: &SearchOpts) -> Vec<f64> {
    if !o.rgrid.is_empty() {
        return o.rgrid.clone();
    }
    let d = spec.omega().diameter();
    [0.1, 0.2, 0.3, 0.4, 0.5].iter().map(|f| f * d).collect()
}

pub fn alpha0(c: &Alpha0Cmd, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    let grid = r_grid(&spec, &c.search);
    let table = estimate_alpha0(
        &spec,
        c.search.horizon,
        &grid,
        &integrator(g)?,
        &budget(&c.search, g.seed),
    )?;
    if table.levels.iter().all(|l| l.beta.is_none()) {
        let why = table.levels[0].error.clone().unwrap_or_default();
        return Err(analysis(format!("no distance level could be estimated: {why}")));
    }
    let json = envelope("alpha0", &table);
    let csv = table.to_csv();
    Ok(Output {
        artifacts: vec![Artifact::new("alpha0.json", &json), Artifact::new("alpha0.csv", &csv)],
        json,
        csv: Some(csv),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub verdict: String,
    /// `fresh` when computed in this run, `cached` when read from the output directory.
    pub source: &'static str,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    pub rank: Hypothesis,
    pub window: Hypothesis,
    pub forced: bool,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.rank.holds && self.window.holds
    }
}

fn verdict_name<T: Serialize>(v: &T) -> String {
    to_json(v).trim().trim_matches('"').to_string()
}

pub fn rank_hypothesis(report: &RankReport, source: &'static str) -> Hypothesis {
    Hypothesis {
        verdict: verdict_name(&report.verdict),
        source,
        holds: report.verdict == RankVerdict::FullRankOnSamples,
    }
}

pub fn window_hypothesis(report: &WindowReport, source: &'static str) -> Hypothesis {
    Hypothesis {
        verdict: verdict_name(&report.verdict),
        source,
        holds: report.verdict == WindowVerdict::DObservableOnSamples,
    }
}

/// Verdict of a report previously written for the same system, if any.
fn cached_verdict(dir: &Path, file: &str, system: &str) -> Option<String> {
    let text = fs::read_to_string(dir.join(file)).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    if v.get("system")?.as_str()? != system {
        return None;
    }
    v.get("verdict")?.as_str().map(str::to_string)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KfunVerdict {
    /// The bound was built and verified against the table and by replay.
    KObservableOnEvidence,
    /// Some distance level has zero output energy.
    NotKObservableOnEvidence,
    /// The bound was built but a minorant or replay check failed.
    CertificateFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroReplay {
    pub r: f64,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub distance: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KfunReport {
    pub system: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub verdict: KfunVerdict,
    pub hypotheses: Hypotheses,
    pub kfunction: Option<KFunction>,
    pub minorant: Option<MinorantCheck>,
    pub replay: Vec<ReplayRecord>,
    pub zero_levels: Vec<ZeroReplay>,
    pub table: Alpha0Table,
}

/// Check points used for the in-run minorant verification.
pub const MINORANT_CHECK_POINTS: usize = 1000;

/// Builds and verifies the bound; `hypotheses` must already be settled.
pub fn kfun_report(
    spec: &SystemSpec,
    horizon: f64,
    grid: &[f64],
    cfg: &IntegratorConfig,
    budget: &SearchBudget,
    hypotheses: Hypotheses,
) -> Result<KfunReport, CliError> {
    if grid.len() < 2 {
        return Err(KfunError::TooFewLevels(grid.len()).into());
    }
    let table = estimate_alpha0(spec, horizon, grid, cfg, budget)?;
    let mut report = KfunReport {
        system: spec.name().to_string(),
        horizon,
        verdict: KfunVerdict::NotKObservableOnEvidence,
        hypotheses,
        kfunction: None,
        minorant: None,
        replay: Vec::new(),
        zero_levels: Vec::new(),
        table,
    };
    match build_k_function(&report.table) {
        Ok(k) => {
            let minorant = check_minorant(&k, &report.table, MINORANT_CHECK_POINTS)?;
            let replay = replay_certificate(spec, &k, &report.table, cfg)?;
            report.verdict = if minorant.passed() && replay.iter().all(|r| r.holds) {
                KfunVerdict::KObservableOnEvidence
            } else {
                KfunVerdict::CertificateFailed
            };
            report.kfunction = Some(k);
            report.minorant = Some(minorant);
            report.replay = replay;
        }
        Err(KfunError::NotKObservableOnEvidence { witnesses }) => {
            for w in witnesses {
                let integral = integral_eta(spec, &w.x1, &w.x2, horizon, cfg)?.value;
                let distance =
                    w.x1.iter()
                        .zip(&w.x2)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                report.zero_levels.push(ZeroReplay {
                    r: w.r,
                    x1: w.x1,
                    x2: w.x2,
                    distance,
                    integral,
                });
            }
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

pub fn kfun_artifacts(report: &KfunReport) -> Vec<Artifact> {
    let mut out = vec![Artifact::new("kfun.json", envelope("kfun", report))];
    match &report.kfunction {
        Some(k) => out.push(Artifact::new("kfun_anchors.csv", k.anchors_csv())),
        None => out.push(Artifact::new("alpha0.csv", report.table.to_csv())),
    }
    out
}

pub fn kfun(c: &KfunCmd, g: &GlobalOpts) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    let cfg = integrator(g)?;
    let grid = r_grid(&spec, &c.search);

    let cached = g.out.as_deref().and_then(|dir| {
        let rank = cached_verdict(dir, "rank.json", spec.name())?;
        let window = cached_verdict(dir, "window.json", spec.name())?;
        Some((rank, window))
    });
    let (rank, window) = match cached {
        Some((rank, window)) => (
            Hypothesis {
                holds: rank == verdict_name(&RankVerdict::FullRankOnSamples),
                verdict: rank,
                source: "cached",
            },
            Hypothesis {
                holds: window == verdict_name(&WindowVerdict::DObservableOnSamples),
                verdict: window,
                source: "cached",
            },
        ),
        None => {
            let rank = rank_report(&spec, &rank_options(&spec, &c.rank, g.seed))?;
            let mut wopts = c.window.clone();
            if wopts.rmin.is_none() {
                wopts.rmin = grid.iter().copied().reduce(f64::min);
            }
            let plan = window_plan(&spec, &wopts, &[], g.seed)?;
            let window = probe_indistinguishable(&spec, &plan, wopts.t_max, wopts.eps, &cfg)?;
            (rank_hypothesis(&rank, "fresh"), window_hypothesis(&window, "fresh"))
        }
    };
    let hypotheses = Hypotheses {
        rank,
        window,
        forced: c.force,
    };
    if !hypotheses.hold() && !c.force {
        return Err(analysis(format!(
            "hypotheses not met (rank: {}, window: {}); pass --force to build the bound anyway",
            hypotheses.rank.verdict, hypotheses.window.verdict
        )));
    }

    let report = kfun_report(
        &spec,
        c.search.horizon,
        &grid,
        &cfg,
        &budget(&c.search, g.seed),
        hypotheses,
    )?;
    let artifacts = kfun_artifacts(&report);
    Ok(Output {
        json: artifacts[0].content.clone(),
        csv: Some(artifacts[1].content.clone()),
        artifacts,
    })
}

#[derive(Serialize)]
struct ValidateReport {
    system: String,
    n: usize,
    p: usize,
    params: obswin_core::ParamEnv,
    omega: StateBox,
    f: Vec<String>,
    h: Vec<String>,
    warnings: Vec<Warning>,
}

#[derive(Serialize)]
struct Warning {
    message: String,
    #[serde(flatten)]
    detail: obswin_core::system::SystemWarning,
}

pub fn validate(c: &ValidateCmd) -> Result<Output, CliError> {
    let spec = load_system(&c.system)?;
    let warnings = validate_system(&spec)
        .into_iter()
        .map(|w| Warning {
            message: w.to_string(),
            detail: w,
        })
        .collect();
    let report = ValidateReport {
        system: spec.name().to_string(),
        n: spec.n(),
        p: spec.p(),
        params: spec.params().clone(),
        omega: spec.omega().clone(),
        f: spec.f().iter().map(|e| e.to_string()).collect(),
        h: spec.h().iter().map(|e| e.to_string()).collect(),
        warnings,
    };
    let json = envelope("validate", &report);
    Ok(Output {
        artifacts: vec![Artifact::new("validate.json", &json)],
        json,
        csv: None,
    })
}
