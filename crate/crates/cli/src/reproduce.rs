//! Canned end-to-end runs of the built-in examples, with closed-form checks
//! where they exist.

use obswin_core::examples::{load_example, ExampleCase, OracleNote};
use obswin_core::kfun::SearchBudget;
use obswin_core::observability::{rank_report, RankOptions};
use obswin_core::sampling::SamplingPlan;
use obswin_core::window::{distinguishing_time, estimate_window, Distinction, PairSamplingPlan};
use obswin_core::SystemSpec;
use serde::Serialize;

use crate::args::{GlobalOpts, WindowOpts};
use crate::bundle::Artifact;
use crate::commands::{
    envelope, integrator, kfun_artifacts, kfun_report, rank_artifacts, rank_hypothesis, window_artifacts,
    window_hypothesis, window_plan, Hypotheses, KfunVerdict,
};
use crate::{CliError, Output};

struct Settings {
    rank_order: Option<usize>,
    rank_grid: Option<usize>,
    t_max: f64,
    eps: f64,
    r_min: Option<f64>,
    ladder: &'static [f64],
    horizon: f64,
    r_grid: &'static [f64],
}

fn settings(name: &str) -> Settings {
    let base = Settings {
        rank_order: None,
        rank_grid: None,
        t_max: 5.0,
        eps: 1e-6,
        r_min: None,
        ladder: &[1.0, 0.5, 0.1],
        horizon: 1.0,
        r_grid: &[0.2, 0.5, 1.0],
    };
    match name {
        "example1" => Settings {
            rank_order: Some(3),
            rank_grid: Some(101),
            t_max: 0.2,
            horizon: 0.2,
            r_grid: &[0.1, 0.5, 1.0],
            ..base
        },
        "example2-kink" => Settings {
            eps: 1e-3,
            ladder: &[0.5, 0.1, 0.01],
            horizon: 2.0,
            r_grid: &[0.1, 0.3],
            ..base
        },
        "example2-smooth" => Settings {
            t_max: 8.0,
            eps: 1e-3,
            ladder: &[1.0, 0.5, 0.1, 0.05],
            horizon: 2.0,
            r_grid: &[0.1, 0.5],
            ..base
        },
        "double-integrator" => Settings {
            rank_order: Some(2),
            r_min: Some(0.2),
            ladder: &[1.0, 0.5, 0.2],
            r_grid: &[0.25, 0.5, 1.0],
            ..base
        },
        _ => base,
    }
}

#[derive(Serialize)]
struct Check {
    quantity: String,
    r: f64,
    computed: Option<f64>,
    reference: f64,
    abs_error: Option<f64>,
}

impl Check {
    fn new(quantity: &str, r: f64, computed: Option<f64>, reference: f64) -> Self {
        Self {
            quantity: quantity.into(),
            r,
            computed,
            reference,
            abs_error: computed.map(|c| (c - reference).abs()),
        }
    }
}

#[derive(Serialize)]
struct CurveSummary {
    r: f64,
    t_hat: Option<f64>,
    lower_bound: bool,
}

#[derive(Serialize)]
struct ReproduceReport {
    example: String,
    summary: &'static str,
    seed: u64,
    rank_verdict: String,
    rank_witness: Option<Vec<f64>>,
    rank_min_sigma: Option<f64>,
    window_verdict: String,
    window_curve: Vec<CurveSummary>,
    kfun_verdict: KfunVerdict,
    betas: Vec<Option<f64>>,
    checks: Vec<Check>,
    notes: &'static [OracleNote],
}

/// Distinguishing times of `(lo, lo + r e_1)` against the closed form, when both exist.
fn window_checks(
    case: &ExampleCase,
    spec: &SystemSpec,
    s: &Settings,
    cfg: &obswin_core::IntegratorConfig,
) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let lo = spec.omega().lo().to_vec();
    for &r in s.ladder {
        let mut x2 = lo.clone();
        x2[0] += r;
        if !spec.omega().contains(&x2) {
            continue;
        }
        let Some(reference) = case.distinguishing_time(&lo, &x2, s.eps) else {
            continue;
        };
        if !(reference > 0.0 && reference <= s.t_max) {
            continue;
        }
        let computed = match distinguishing_time(spec, &lo, &x2, s.t_max, s.eps, cfg)? {
            Distinction::Distinguished { t } => Some(t),
            _ => None,
        };
        out.push(Check::new("distinguishing_time", r, computed, reference));
    }
    Ok(out)
}

pub fn reproduce(name: &str, g: &GlobalOpts) -> Result<Output, CliError> {
    let name = if name == "example2" { "example2-kink" } else { name };
    let case = load_example(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = &case.spec;
    let s = settings(name);
    let cfg = integrator(g)?;

    let mut rank_opts = RankOptions::for_system(spec);
    rank_opts.seed = g.seed;
    if let Some(n) = s.rank_order {
        rank_opts.order = n;
    }
    if let Some(k) = s.rank_grid {
        rank_opts.plan = SamplingPlan::grid(k);
    }
    let rank = rank_report(spec, &rank_opts)?;

    let wopts = WindowOpts {
        t_max: s.t_max,
        eps: s.eps,
        rmin: s.r_min,
        pairs: None,
    };
    let plan: PairSamplingPlan = window_plan(spec, &wopts, s.ladder, g.seed)?;
    let window = estimate_window(spec, &plan, s.ladder, s.t_max, s.eps, &cfg)?;

    let hypotheses = Hypotheses {
        rank: rank_hypothesis(&rank, "fresh"),
        window: window_hypothesis(&window, "fresh"),
        forced: true,
    };
    let budget = SearchBudget {
        seed: g.seed,
        ..SearchBudget::default()
    };
    let kfun = kfun_report(spec, s.horizon, s.r_grid, &cfg, &budget, hypotheses)?;

    let mut checks = window_checks(&case, spec, &s, &cfg)?;
    for l in &kfun.table.levels {
        if let Some(reference) = case.alpha0(l.r, s.horizon) {
            checks.push(Check::new("alpha0", l.r, l.beta, reference));
        }
    }

    let report = ReproduceReport {
        example: name.to_string(),
        summary: case.summary,
        seed: g.seed,
        rank_verdict: rank_hypothesis(&rank, "fresh").verdict,
        rank_witness: rank.witness.clone(),
        rank_min_sigma: rank.min_sigma,
        window_verdict: window_hypothesis(&window, "fresh").verdict,
        window_curve: window
            .curve
            .iter()
            .map(|c| CurveSummary {
                r: c.r,
                t_hat: c.t_hat,
                lower_bound: c.lower_bound,
            })
            .collect(),
        kfun_verdict: kfun.verdict,
        betas: kfun.table.betas(),
        checks,
        notes: case.notes(),
    };

    let json = envelope("reproduce", &report);
    let mut csv = String::from("quantity,r,computed,reference,abs_error\n");
    for c in &report.checks {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{:e},{},{:e},{}\n",
            c.quantity,
            c.r,
            opt(c.computed),
            c.reference,
            opt(c.abs_error)
        ));
    }

    let (rank_json, rank_csv) = rank_artifacts(&rank);
    let (window_json, window_csv) = window_artifacts(&window);
    let mut artifacts = vec![
        Artifact::new("rank.json", rank_json),
        Artifact::new("rank_samples.csv", rank_csv),
        Artifact::new("window.json", window_json),
        Artifact::new("window_curve.csv", window_csv),
    ];
    artifacts.extend(kfun_artifacts(&kfun));
    artifacts.push(Artifact::new("reproduce.json", &json));
    artifacts.push(Artifact::new("reproduce_checks.csv", &csv));
    Ok(Output {
        json,
        csv: Some(csv),
        artifacts,
    })
}
