//! Numerical pipeline against closed forms of the built-in cases.

use approx::assert_relative_eq;
use obswin_core::examples::{load_example, EXAMPLE_NAMES};
use obswin_core::kfun::{
    build_k_function, check_minorant, estimate_alpha0, eval_k, minimize_pair, replay_certificate, KfunError,
    SearchBudget,
};
use obswin_core::observability::{observability_map, rank_report, RankOptions, RankVerdict};
use obswin_core::sampling::SamplingPlan;
use obswin_core::window::{distinguishing_time, Distinction};
use obswin_core::*;
use proptest::prelude::*;

fn tight() -> IntegratorConfig {
    IntegratorConfig {
        rtol: 1e-13,
        atol: 1e-15,
        ..IntegratorConfig::default()
    }
}

/// k-th derivative at 0 from forward differences, Richardson-extrapolated over four step sizes.
fn richardson_derivative(g: &impl Fn(f64) -> f64, k: usize, h0: f64) -> f64 {
    let binom = |n: usize, j: usize| (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let forward = |h: f64| {
        (0..=k)
            .map(|j| {
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * binom(k, j) * g(j as f64 * h)
            })
            .sum::<f64>()
            / h.powi(k as i32)
    };
    let levels = 4;
    let mut table: Vec<Vec<f64>> = Vec::new();
    for i in 0..levels {
        let mut row = vec![forward(h0 / 2f64.powi(i as i32))];
        for j in 1..=i {
            let p = 2f64.powi(j as i32);
            let v = (p * row[j - 1] - table[i - 1][j - 1]) / (p - 1.0);
            row.push(v);
        }
        table.push(row);
    }
    table[levels - 1][levels - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lie_rows_match_output_time_derivatives(x1 in -1.0f64..1.0, x2 in -1.0f64..1.0) {
        let spec = parse_system(
            "system damped\ndim 2\noutputs 1\nf1 = x2\nf2 = -sin(x1) - 0.2*x2\nh1 = x1 + 0.3*x2^2\nomega [-1,1] x [-1,1]\n",
        ).unwrap();
        let map = observability_map(&spec, 4).unwrap();
        let rows = map.eval_rows(&[x1, x2]).unwrap();
        let traj = integrate(&spec, &[x1, x2], 1.0, &tight()).unwrap();
        let g = |t: f64| spec.output(&traj.state_at(t).unwrap()).unwrap()[0];
        for k in 1..=3 {
            let fd = richardson_derivative(&g, k, 0.1);
            let exact = rows[k];
            prop_assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "k = {k}: {fd} vs {exact}");
        }
    }
}

#[test]
fn trajectories_and_outputs_match_closed_forms() {
    let cfg = IntegratorConfig::default();
    let starts: &[(&str, &[f64])] = &[
        ("example1", &[0.6]),
        ("example1", &[-0.3]),
        ("example2-kink", &[0.4]),
        ("example2-smooth", &[0.9]),
        ("linear-contraction", &[-0.8]),
        ("double-integrator", &[0.3, -0.7]),
    ];
    for (name, x0) in starts {
        let case = load_example(name).unwrap();
        let traj = integrate(&case.spec, x0, 1.0, &cfg).unwrap();
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let want = case.trajectory(x0, t).unwrap();
            let got = traj.state_at(t).unwrap();
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-7 * (1.0 + w.abs()), "{name} t={t}: {g} vs {w}");
            }
            let y = case.spec.output(&got).unwrap()[0];
            let yw = case.output(x0, t).unwrap()[0];
            assert!((y - yw).abs() <= 1e-7 * (1.0 + yw.abs()), "{name} output at {t}");
        }
    }
}

#[test]
fn escape_time_matches_pole() {
    let case = load_example("example1").unwrap();
    for x0 in [1.0, -1.0, 0.8] {
        let traj = integrate(&case.spec, &[x0], 2.0, &IntegratorConfig::default()).unwrap();
        let TrajectoryStatus::Escaped { t_escape } = traj.status() else {
            panic!("{x0}: {:?}", traj.status())
        };
        assert!((t_escape - case.escape_time(&[x0]).unwrap()).abs() < 1e-3);
    }
}

#[test]
fn distinguishing_times_match_closed_forms() {
    let cfg = IntegratorConfig::default();
    let cases: &[(&str, &[f64], &[f64], f64)] = &[
        ("example2-kink", &[0.0], &[0.1], 1e-3),
        ("example2-kink", &[0.0], &[0.01], 1e-3),
        ("example2-kink", &[0.2], &[0.45], 1e-2),
        ("example2-smooth", &[0.0], &[0.3], 1e-3),
        ("double-integrator", &[0.0, 0.0], &[1e-4, 0.5], 1e-2),
        ("linear-contraction", &[0.0], &[0.7], 0.5),
    ];
    for (name, a, b, eps) in cases {
        let case = load_example(name).unwrap();
        let want = case.distinguishing_time(a, b, *eps).unwrap();
        match distinguishing_time(&case.spec, a, b, 6.0, *eps, &cfg).unwrap() {
            Distinction::Distinguished { t } => assert!((t - want).abs() < 1e-4, "{name}: {t} vs {want}"),
            other => panic!("{name}: {other:?}, expected {want}"),
        }
    }
}

#[test]
fn output_energy_matches_closed_forms() {
    let cfg = IntegratorConfig::default();
    let cases: &[(&str, &[f64], &[f64], f64)] = &[
        ("linear-contraction", &[1.0], &[0.0], 1.0),
        ("linear-contraction", &[-0.4], &[0.9], 2.5),
        ("double-integrator", &[0.1, 0.2], &[-0.3, 0.5], 1.0),
        ("example2-kink", &[0.0], &[0.3], 2.0),
        ("example2-kink", &[0.2], &[0.5], 3.0),
        ("example2-kink", &[0.0], &[0.1], 2.0),
    ];
    for (name, a, b, t) in cases {
        let case = load_example(name).unwrap();
        let want = case.integral_eta(a, b, *t).unwrap();
        let got = integral_eta(&case.spec, a, b, *t, &cfg).unwrap().value;
        assert!(
            (got - want).abs() <= 1e-7 * want.max(1e-300) + 1e-14,
            "{name}: {got} vs {want}"
        );
    }
}

#[test]
fn contraction_alpha0_and_minorant() {
    let case = load_example("linear-contraction").unwrap();
    let cfg = IntegratorConfig::default();
    let grid = [0.2, 0.5, 1.0];
    let table = estimate_alpha0(&case.spec, 1.0, &grid, &cfg, &SearchBudget::default()).unwrap();
    for l in &table.levels {
        let want = case.alpha0(l.r, 1.0).unwrap();
        assert_relative_eq!(l.beta.unwrap(), want, max_relative = 1e-6);
    }
    let k = build_k_function(&table).unwrap();
    assert!(check_minorant(&k, &table, 1000).unwrap().passed());
    let (lo, hi) = k.certified_domain;
    for i in 0..100 {
        let r = lo + (hi - lo) * i as f64 / 99.0;
        assert!(eval_k(&k, r.min(hi)).unwrap() <= case.alpha0(r.min(hi), 1.0).unwrap());
    }
    for rec in replay_certificate(&case.spec, &k, &table, &cfg).unwrap() {
        assert!(rec.holds, "{rec:?}");
    }
}

#[test]
fn double_integrator_alpha0() {
    let case = load_example("double-integrator").unwrap();
    let budget = SearchBudget {
        starts: 16,
        ..SearchBudget::default()
    };
    for r in [0.3, 1.0] {
        let m = minimize_pair(&case.spec, r, 1.0, &IntegratorConfig::default(), &budget, None).unwrap();
        let want = case.alpha0(r, 1.0).unwrap();
        assert!((m.value - want).abs() <= 0.05 * want, "r = {r}: {} vs {want}", m.value);
    }
}

#[test]
fn kink_energy_floor_at_larger_distance() {
    // both states must stay below M e^-T to keep the outputs equal, which
    // no pair 0.3 apart in [0, 0.5] does for T = 2; the best pair is (0, 0.3)
    let case = load_example("example2-kink").unwrap();
    let cfg = IntegratorConfig::default();
    let m = minimize_pair(&case.spec, 0.3, 2.0, &cfg, &SearchBudget::default(), None).unwrap();
    let want = case.integral_eta(&[0.0], &[0.3], 2.0).unwrap();
    assert!(want > 0.3);
    assert!((m.value - want).abs() <= 1e-6 * want, "{} vs {want}", m.value);

    let table = estimate_alpha0(&case.spec, 2.0, &[0.1, 0.3], &cfg, &SearchBudget::default()).unwrap();
    assert_eq!(table.levels[0].beta, Some(0.0));
    match build_k_function(&table) {
        Err(KfunError::NotKObservableOnEvidence { witnesses }) => {
            assert_eq!(witnesses.len(), 1);
            let w = &witnesses[0];
            assert_eq!(integral_eta(&case.spec, &w.x1, &w.x2, 2.0, &cfg).unwrap().value, 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn dead_zone_rank_is_deficient_below_threshold() {
    for name in ["example2-kink", "example2-smooth"] {
        let mut case = load_example(name).unwrap();
        case.spec = case
            .spec
            .with_omega(StateBox::new(vec![0.0], vec![2.0]).unwrap())
            .unwrap();
        let opts = RankOptions {
            order: 2,
            plan: SamplingPlan::grid(21),
            ..RankOptions::for_system(&case.spec)
        };
        let rep = rank_report(&case.spec, &opts).unwrap();
        assert_eq!(rep.verdict, RankVerdict::DeficientAtWitnesses);
        assert_eq!(rep.excluded_points.len(), 1, "{name}");
        assert_eq!(rep.excluded_points[0].point, vec![1.0]);
        for s in &rep.per_sample {
            assert_eq!(s.rank == 0, s.point[0] < 1.0, "{name} at {:?}", s.point);
        }
    }
}

#[test]
fn every_case_reparses_from_its_display() {
    for name in EXAMPLE_NAMES {
        let case = load_example(name).unwrap();
        let again = parse_system(&case.spec.to_string()).unwrap();
        assert_eq!(again.to_string(), case.spec.to_string());
    }
}
