//! Adaptive Dormand-Prince 5(4) integration with continuous output, and
//! quadrature of the squared output distance between two trajectories.

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::system::SystemSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("time {t} is outside the integrated range [0, {t_reached}]")]
    OutOfRange { t: f64, t_reached: f64 },
    #[error("integration failed at t = {t}")]
    StepFailure { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Step attempts (accepted and rejected) before giving up.
    pub max_steps: usize,
    /// A trajectory whose Euclidean norm exceeds this is reported as escaped.
    pub escape_norm: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            escape_norm: 1e8,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.rtol) || !ok(self.atol) || !ok(self.escape_norm) || self.max_steps == 0 {
            return Err(OdeError::InvalidInput(
                "integrator tolerances, step budget and escape norm must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    /// The norm bound was crossed during the step ending at `t_escape`, or the
    /// step size collapsed while the state was already huge.
    Escaped {
        t_escape: f64,
    },
    StepFailure {
        t: f64,
    },
}

// Dormand-Prince tableau with Shampine's continuous extension. The system is
// autonomous, so the stage nodes c_i are not needed.
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    /// Five interpolation coefficient vectors, flattened `[k * n + i]`.
    coef: Vec<f64>,
}

/// Dense numerical solution on `[0, t_reached]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    x0: Vec<f64>,
    t_requested: f64,
    t_reached: f64,
    segments: Vec<Segment>,
    status: TrajectoryStatus,
}

impl Trajectory {
    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn t_requested(&self) -> f64 {
        self.t_requested
    }

    pub fn t_reached(&self) -> f64 {
        self.t_reached
    }

    pub fn status(&self) -> TrajectoryStatus {
        self.status
    }

    pub fn accepted_steps(&self) -> usize {
        self.segments.len()
    }

    /// Accepted step boundaries, starting at 0 and ending at `t_reached`.
    pub fn step_times(&self) -> impl Iterator<Item = f64> + '_ {
        let end = (!self.segments.is_empty()).then_some(self.t_reached);
        self.segments.iter().map(|s| s.t0).chain(end)
    }

    pub fn state_at(&self, t: f64) -> Result<Vec<f64>, OdeError> {
        let slack = 1e-12 * self.t_reached.max(1.0);
        if !(t >= -slack && t <= self.t_reached + slack) {
            return Err(OdeError::OutOfRange {
                t,
                t_reached: self.t_reached,
            });
        }
        if self.segments.is_empty() {
            return Ok(self.x0.clone());
        }
        let idx = self.segments.partition_point(|s| s.t0 <= t).saturating_sub(1);
        let seg = &self.segments[idx];
        let s = ((t - seg.t0) / seg.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let n = self.dim();
        let c = &seg.coef;
        Ok((0..n)
            .map(|i| c[i] + s * (c[n + i] + s1 * (c[2 * n + i] + s * (c[3 * n + i] + s1 * c[4 * n + i]))))
            .collect())
    }

    /// `t, x1..xn, y1..yp` rows at `samples` evenly spaced times over `[0, t_reached]`.
    pub fn to_csv(&self, spec: &SystemSpec, samples: usize) -> Result<String, OdeError> {
        let mut out = String::from("t");
        for i in 1..=spec.n() {
            out.push_str(&format!(",x{i}"));
        }
        for j in 1..=spec.p() {
            out.push_str(&format!(",y{j}"));
        }
        out.push('\n');
        let m = samples.max(2);
        for k in 0..m {
            let t = self.t_reached * k as f64 / (m - 1) as f64;
            let x = self.state_at(t)?;
            let y = spec.output(&x)?;
            let row: Vec<String> = std::iter::once(t).chain(x).chain(y).map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn scaled_rms(v: &[f64], y: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = v.len() as f64;
    (v.iter()
        .zip(y)
        .map(|(a, b)| (a / (cfg.atol + cfg.rtol * b.abs())).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
}

fn initial_step<F>(rhs: &F, x0: &[f64], f0: &[f64], t_final: f64, cfg: &IntegratorConfig) -> f64
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
{
    let d0 = scaled_rms(x0, x0, cfg);
    let d1 = scaled_rms(f0, x0, cfg);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(t_final);
    let y1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
    let mut f1 = vec![0.0; x0.len()];
    if rhs(&y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled_rms(&diff, x0, cfg) / h0;
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / m).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_final)
}

/// Integrates `x' = rhs(x)` from `x0` over `[0, t_final]`.
pub fn integrate_with<F>(rhs: F, x0: &[f64], t_final: f64, cfg: &IntegratorConfig) -> Result<Trajectory, OdeError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
{
    cfg.validate()?;
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(OdeError::InvalidInput(format!(
            "horizon must be positive, got {t_final}"
        )));
    }
    if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::InvalidInput(
            "initial state must be finite and nonempty".into(),
        ));
    }
    let n = x0.len();
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs(&y, &mut k1)?;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut tmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];

    let mut t = 0.0;
    let mut h = initial_step(&rhs, x0, &k1, t_final, cfg);
    let mut rejected = false;
    let mut attempts = 0usize;
    let mut segments = Vec::new();

    let status = loop {
        if t >= t_final {
            break TrajectoryStatus::Completed;
        }
        if attempts >= cfg.max_steps {
            break TrajectoryStatus::StepFailure { t };
        }
        attempts += 1;
        let last = t + 1.01 * h >= t_final;
        if last {
            h = t_final - t;
        }

        let stages = (|| -> Result<(), EvalError> {
            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            rhs(&tmp, &mut k2)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            rhs(&tmp, &mut k3)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            rhs(&tmp, &mut k4)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            rhs(&tmp, &mut k5)?;
            for i in 0..n {
                tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            rhs(&tmp, &mut k6)?;
            for i in 0..n {
                y1[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            rhs(&y1, &mut k7)
        })();

        let err = match stages {
            Ok(()) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                    let sc = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
                    acc += (e / sc).powi(2);
                }
                (acc / n as f64).sqrt()
            }
            Err(_) => f64::INFINITY,
        };

        if err.is_finite() && err <= 1.0 && y1.iter().all(|v| v.is_finite()) {
            let mut coef = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coef[i] = y[i];
                coef[n + i] = ydiff;
                coef[2 * n + i] = bspl;
                coef[3 * n + i] = ydiff - h * k7[i] - bspl;
                coef[4 * n + i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            segments.push(Segment { t0: t, h, coef });
            t = if last { t_final } else { t + h };
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            if norm(&y) > cfg.escape_norm {
                break TrajectoryStatus::Escaped { t_escape: t };
            }
            let mut fac = if err == 0.0 {
                10.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
            };
            if rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h *= fac.min(0.9);
            rejected = true;
        }

        if h <= 16.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
            // In f64 a blow-up cannot be resolved past this point; treat a
            // huge, still-growing state as an escape rather than a failure.
            break if norm(&y) >= cfg.escape_norm.sqrt() {
                TrajectoryStatus::Escaped { t_escape: t }
            } else {
                TrajectoryStatus::StepFailure { t }
            };
        }
    };

    Ok(Trajectory {
        x0: x0.to_vec(),
        t_requested: t_final,
        t_reached: t,
        segments,
        status,
    })
}

/// Solution of the system from `x0` over `[0, t_final]`.
pub fn integrate(spec: &SystemSpec, x0: &[f64], t_final: f64, cfg: &IntegratorConfig) -> Result<Trajectory, OdeError> {
    if x0.len() != spec.n() {
        return Err(OdeError::InvalidInput(format!(
            "initial state has {} components, system has {}",
            x0.len(),
            spec.n()
        )));
    }
    integrate_with(|x, dx| spec.vector_field(x, dx), x0, t_final, cfg)
}

/// Output `h` along the trajectory at time `t`.
pub fn output_at(spec: &SystemSpec, traj: &Trajectory, t: f64) -> Result<Vec<f64>, OdeError> {
    Ok(spec.output(&traj.state_at(t)?)?)
}

/// Squared Euclidean distance between the two outputs at time `t`.
pub fn eta_at(spec: &SystemSpec, t: f64, traj1: &Trajectory, traj2: &Trajectory) -> Result<f64, OdeError> {
    let y1 = output_at(spec, traj1, t)?;
    let y2 = output_at(spec, traj2, t)?;
    Ok(y1.iter().zip(&y2).map(|(a, b)| (a - b).powi(2)).sum())
}

/// Windowed output energy between two initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaIntegral {
    pub value: f64,
    /// Upper limit actually used, `min(T, reached horizons)`.
    pub upper: f64,
    /// Set when a trajectory escaped before `T`.
    pub truncated_at: Option<f64>,
}

impl EtaIntegral {
    pub fn is_truncated(&self) -> bool {
        self.truncated_at.is_some()
    }
}

/// Integral of the squared output distance over `[0, T]` for the pair `(x1, x2)`.
///
/// A pair whose trajectories escape before `T` is integrated up to the
/// escape and flagged truncated; other integration failures are errors.
pub fn integral_eta(
    spec: &SystemSpec,
    x1: &[f64],
    x2: &[f64],
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<EtaIntegral, OdeError> {
    let traj1 = integrate(spec, x1, t_final, cfg)?;
    if x1 == x2 {
        return integral_eta_between(spec, &traj1, &traj1, t_final);
    }
    let traj2 = integrate(spec, x2, t_final, cfg)?;
    integral_eta_between(spec, &traj1, &traj2, t_final)
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and `|K - G|` on `[a, b]`.
pub(crate) fn gauss_kronrod<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = hl * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok((k * hl, ((k - g) * hl).abs()))
}

/// Global adaptive quadrature over the given pieces: the interval with the
/// largest error estimate is bisected until the summed estimate meets
/// `rel * |I| + abs` or the subdivision budget runs out.
fn adapt<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, pieces: &[(f64, f64)], rel: f64, abs: f64) -> Result<f64, E> {
    const MAX_SUBDIVISIONS: usize = 4000;
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(pieces.len() + 64);
    for &(a, b) in pieces {
        let (k, e) = gauss_kronrod(f, a, b)?;
        parts.push((a, b, k, e));
    }
    for _ in 0..MAX_SUBDIVISIONS {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel * total.abs() + abs {
            break;
        }
        let Some((i, _)) = parts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 - p.0 > 1e-13 * p.1.abs().max(1.0))
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
        else {
            break;
        };
        let (a, b, _, _) = parts[i];
        let m = 0.5 * (a + b);
        let (k1, e1) = gauss_kronrod(f, a, m)?;
        let (k2, e2) = gauss_kronrod(f, m, b)?;
        parts[i] = (a, m, k1, e1);
        parts.push((m, b, k2, e2));
    }
    Ok(parts.iter().map(|p| p.2).sum())
}

/// Locates where `g` switches between exactly zero and nonzero inside `[a, b]`.
fn zero_transition<E>(g: &mut impl FnMut(f64) -> Result<f64, E>, mut a: f64, mut b: f64) -> Result<f64, E> {
    let zero_at_a = g(a)? == 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m)? == 0.0) == zero_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Same as [`integral_eta`] on already integrated trajectories.
pub fn integral_eta_between(
    spec: &SystemSpec,
    traj1: &Trajectory,
    traj2: &Trajectory,
    t_final: f64,
) -> Result<EtaIntegral, OdeError> {
    for tr in [traj1, traj2] {
        if let TrajectoryStatus::StepFailure { t } = tr.status() {
            if t < t_final {
                return Err(OdeError::StepFailure { t });
            }
        }
    }
    let upper = t_final.min(traj1.t_reached()).min(traj2.t_reached());
    let truncated_at = (upper < t_final).then_some(upper);
    if upper <= 0.0 {
        return Ok(EtaIntegral {
            value: 0.0,
            upper: 0.0,
            truncated_at,
        });
    }

    let mut nodes: Vec<f64> = traj1
        .step_times()
        .chain(traj2.step_times())
        .filter(|t| *t < upper)
        .collect();
    nodes.push(upper);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|b, a| *b - *a <= 1e-14 * upper);

    let mut eta = |t: f64| eta_at(spec, t.min(upper), traj1, traj2);

    let mut pieces = Vec::with_capacity(nodes.len());
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (eta(a)? == 0.0) != (eta(b)? == 0.0) {
            let m = zero_transition(&mut eta, a, b)?;
            if m > a && m < b {
                pieces.push((a, m));
                pieces.push((m, b));
                continue;
            }
        }
        pieces.push((a, b));
    }

    let value = adapt(&mut eta, &pieces, 1e-10, 1e-14)?;
    Ok(EtaIntegral {
        value: value.max(0.0),
        upper,
        truncated_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::parse_system;

    fn scalar(f: &str, h: &str, omega: &str) -> SystemSpec {
        parse_system(&format!(
            "system s\ndim 1\noutputs 1\nparam M = 1\nf1 = {f}\nh1 = {h}\nomega {omega}\n"
        ))
        .unwrap()
    }

    #[test]
    fn decay_matches_closed_form() {
        let s = scalar("-x1", "x1", "[-1, 1]");
        let tr = integrate(&s, &[1.0], 1.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(tr.status(), TrajectoryStatus::Completed);
        assert_eq!(tr.t_reached(), 1.0);
        let x = tr.state_at(1.0).unwrap()[0];
        assert!((x - (-1.0f64).exp()).abs() < 1e-7, "{x}");
    }

    #[test]
    fn cubic_growth_escapes_at_one_half() {
        let s = scalar("x1^3", "x1^3", "[-1, 1]");
        let tr = integrate(&s, &[1.0], 1.0, &IntegratorConfig::default()).unwrap();
        match tr.status() {
            TrajectoryStatus::Escaped { t_escape } => assert!((t_escape - 0.5).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
        assert!(tr.t_reached() < 0.5 + 1e-3);
    }

    #[test]
    fn exponential_growth() {
        let s = scalar("x1", "if(x1 >= M, x1 - M, 0)", "[0, 0.5]");
        let tr = integrate(&s, &[0.1], 3.0, &IntegratorConfig::default()).unwrap();
        let x = tr.state_at(3.0).unwrap()[0];
        assert!((x - 0.1 * 3f64.exp()).abs() < 1e-6);
        assert_eq!(output_at(&s, &tr, 1.0).unwrap(), vec![0.0]);
        let y = output_at(&s, &tr, 3.0).unwrap()[0];
        assert!((y - (0.1 * 3f64.exp() - 1.0)).abs() < 1e-6);
        assert!(output_at(&s, &tr, 3.5).is_err());
    }

    #[test]
    fn equilibrium_output_is_zero() {
        let s = scalar("x1^3", "x1^3", "[-1, 1]");
        let tr = integrate(&s, &[0.0], 2.0, &IntegratorConfig::default()).unwrap();
        for t in [0.0, 0.3, 1.7, 2.0] {
            assert_eq!(output_at(&s, &tr, t).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn dense_output_hits_step_endpoints() {
        let s = scalar("-x1 + sin(x1)", "x1", "[-1, 1]");
        let cfg = IntegratorConfig::default();
        let tr = integrate(&s, &[0.8], 2.0, &cfg).unwrap();
        let times: Vec<f64> = tr.step_times().collect();
        assert_eq!(times.first(), Some(&0.0));
        assert_eq!(times.last(), Some(&2.0));
        assert_eq!(times.len(), tr.accepted_steps() + 1);
        for w in tr.segments.windows(2) {
            // left limit of one segment equals right start of the next
            let n = 1;
            let end = w[0].coef[0] + w[0].coef[n];
            assert!((end - w[1].coef[0]).abs() <= 4.0 * f64::EPSILON * end.abs());
        }
    }

    #[test]
    fn dense_output_agrees_with_reintegration() {
        let s = parse_system(
            "system vdp\ndim 2\noutputs 1\nf1 = x2\nf2 = (1 - x1^2)*x2 - x1\nh1 = x1\nomega [-2,2] x [-2,2]\n",
        )
        .unwrap();
        let cfg = IntegratorConfig::default();
        let tr = integrate(&s, &[1.0, 0.5], 3.0, &cfg).unwrap();
        for t in [0.137, 0.9, 1.61, 2.2222, 2.95] {
            let dense = tr.state_at(t).unwrap();
            let direct = integrate(&s, &[1.0, 0.5], t, &cfg).unwrap().state_at(t).unwrap();
            for (a, b) in dense.iter().zip(&direct) {
                assert!((a - b).abs() <= 10.0 * cfg.rtol * b.abs().max(1.0), "{t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tighter_tolerance_changes_little() {
        let s = parse_system(
            "system vdp\ndim 2\noutputs 1\nf1 = x2\nf2 = (1 - x1^2)*x2 - x1\nh1 = x1\nomega [-2,2] x [-2,2]\n",
        )
        .unwrap();
        let loose = IntegratorConfig::default();
        let tight = IntegratorConfig {
            rtol: loose.rtol / 10.0,
            atol: loose.atol / 10.0,
            ..loose.clone()
        };
        let a = integrate(&s, &[1.0, 0.5], 2.0, &loose).unwrap().state_at(2.0).unwrap();
        let b = integrate(&s, &[1.0, 0.5], 2.0, &tight).unwrap().state_at(2.0).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= loose.rtol * v.abs().max(1.0), "{u} vs {v}");
        }
    }

    #[test]
    fn eta_on_linear_decay() {
        let s = scalar("-x1", "x1", "[-1, 1]");
        let cfg = IntegratorConfig::default();
        let a = integrate(&s, &[1.0], 1.0, &cfg).unwrap();
        let b = integrate(&s, &[0.0], 1.0, &cfg).unwrap();
        assert!((eta_at(&s, 1.0, &a, &b).unwrap() - (-2.0f64).exp()).abs() < 1e-8);
        assert_eq!(eta_at(&s, 0.4, &a, &a).unwrap(), 0.0);

        let s2 = scalar("x1", "if(x1 >= M, x1 - M, 0)", "[0, 0.5]");
        let a = integrate(&s2, &[0.0], 3.0, &cfg).unwrap();
        let b = integrate(&s2, &[0.1], 3.0, &cfg).unwrap();
        assert_eq!(eta_at(&s2, 1.0, &a, &b).unwrap(), 0.0);
    }

    #[test]
    fn integral_of_decay() {
        let s = scalar("-x1", "x1", "[-1, 1]");
        let cfg = IntegratorConfig::default();
        let r = integral_eta(&s, &[1.0], &[0.0], 1.0, &cfg).unwrap();
        let want = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((r.value - want).abs() < 1e-6, "{}", r.value);
        assert!(!r.is_truncated());
        assert_eq!(integral_eta(&s, &[0.3], &[0.3], 1.0, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn integral_vanishes_before_threshold_crossing() {
        let s = scalar("x1", "if(x1 >= M, x1 - M, 0)", "[0, 0.5]");
        let cfg = IntegratorConfig::default();
        assert_eq!(integral_eta(&s, &[0.0], &[0.1], 2.0, &cfg).unwrap().value, 0.0);
        // past the kink: integral of (0.1 e^t - 1)^2 from ln 10 to 3
        let r = integral_eta(&s, &[0.0], &[0.1], 3.0, &cfg).unwrap().value;
        let u1: f64 = 0.1 * 3f64.exp();
        let prim = |u: f64| u * u / 2.0 - 2.0 * u + u.ln();
        let want = prim(u1) - prim(1.0);
        assert!((r - want).abs() < 1e-8 * (1.0 + want), "{r} vs {want}");
    }

    #[test]
    fn escaping_pair_is_truncated() {
        let s = scalar("x1^3", "x1^3", "[-1, 1]");
        let r = integral_eta(&s, &[1.0], &[0.0], 1.0, &IntegratorConfig::default()).unwrap();
        let t = r.truncated_at.expect("truncated");
        assert!((t - 0.5).abs() < 1e-3);
    }

    #[test]
    fn gauss_kronrod_is_exact_for_polynomials() {
        let mut f = |t: f64| -> Result<f64, ()> { Ok(t.powi(22) - 3.0 * t.powi(7) + 1.0) };
        let (v, _) = gauss_kronrod(&mut f, 0.0, 1.0).unwrap();
        let want = 1.0 / 23.0 - 3.0 / 8.0 + 1.0;
        assert!((v - want).abs() < 1e-14);
        // the embedded Gauss rule is exact to degree 13, so the estimate vanishes
        let mut g = |t: f64| -> Result<f64, ()> { Ok(t.powi(13) + t) };
        let (v, err) = gauss_kronrod(&mut g, -0.5, 2.0).unwrap();
        assert!((v - ((2f64.powi(14) - 0.5f64.powi(14)) / 14.0 + (4.0 - 0.25) / 2.0)).abs() < 1e-10);
        assert!(err < 1e-10);
    }

    #[test]
    fn csv_export() {
        let s = scalar("-x1", "x1", "[-1, 1]");
        let tr = integrate(&s, &[1.0], 1.0, &IntegratorConfig::default()).unwrap();
        let csv = tr.to_csv(&s, 5).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,y1");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn invalid_inputs() {
        let s = scalar("-x1", "x1", "[-1, 1]");
        let cfg = IntegratorConfig::default();
        assert!(integrate(&s, &[1.0, 2.0], 1.0, &cfg).is_err());
        assert!(integrate(&s, &[1.0], 0.0, &cfg).is_err());
        let bad = IntegratorConfig { rtol: 0.0, ..cfg };
        assert!(integrate(&s, &[1.0], 1.0, &bad).is_err());
    }
}
