//! Built-in regression systems with closed-form oracles.
//!
//! Each case is backed by a spec file under `systems/`, so the same text is
//! available to the parser tests and to the command line. Oracles read their
//! parameters from the case's current [`SystemSpec`], which may be modified
//! (for instance `case.spec = case.spec.with_param("M", 2.0)?`).

use serde::Serialize;
use thiserror::Error;

use crate::system::{parse_system, SystemSpec};

pub const EXAMPLE_NAMES: [&str; 5] = [
    "example1",
    "example2-kink",
    "example2-smooth",
    "linear-contraction",
    "double-integrator",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown example '{name}' (known: {})", EXAMPLE_NAMES.join(", "))]
pub struct UnknownExample {
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Cubic,
    Kink,
    Smooth,
    Contraction,
    DoubleIntegrator,
}

/// A documented closed form and where it comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleNote {
    pub quantity: &'static str,
    pub formula: &'static str,
    pub provenance: &'static str,
}

#[derive(Debug, Clone)]
pub struct ExampleCase {
    pub name: &'static str,
    pub summary: &'static str,
    /// Spec file text the case was loaded from.
    pub source: &'static str,
    pub spec: SystemSpec,
    kind: Kind,
}

pub fn load_example(name: &str) -> Result<ExampleCase, UnknownExample> {
    let (kind, summary, source) = match name {
        "example1" => (
            Kind::Cubic,
            "x' = x^3, y = x^3: output injective, rank condition fails at x = 0",
            include_str!("../systems/example1.sys"),
        ),
        "example2-kink" => (
            Kind::Kink,
            "x' = x, y = max(x - M, 0): observation window grows without bound near 0",
            include_str!("../systems/example2-kink.sys"),
        ),
        "example2-smooth" => (
            Kind::Smooth,
            "x' = x, y = exp(-1/(x - M)) above M: smooth output with the same divergence",
            include_str!("../systems/example2-smooth.sys"),
        ),
        "linear-contraction" => (
            Kind::Contraction,
            "x' = -x, y = x: linear oracle for windows and the output-energy minorant",
            include_str!("../systems/linear-contraction.sys"),
        ),
        "double-integrator" => (
            Kind::DoubleIntegrator,
            "x1' = x2, x2' = 0, y = x1: identity observability Jacobian",
            include_str!("../systems/double-integrator.sys"),
        ),
        _ => return Err(UnknownExample { name: name.to_string() }),
    };
    let spec = parse_system(source).expect("built-in spec file parses");
    Ok(ExampleCase {
        name: EXAMPLE_NAMES.iter().find(|n| **n == name).copied().unwrap_or_default(),
        summary,
        source,
        spec,
        kind,
    })
}

const CUBIC_NOTES: &[OracleNote] = &[
    OracleNote {
        quantity: "trajectory",
        formula: "x(t) = x0 / sqrt(1 - 2 x0^2 t)",
        provenance: "separation of variables in x' = x^3",
    },
    OracleNote {
        quantity: "escape time",
        formula: "t_esc = 1 / (2 x0^2), none for x0 = 0",
        provenance: "pole of the trajectory formula",
    },
    OracleNote {
        quantity: "Lie derivatives",
        formula: "L_f^k h = 1*3*...*(2k+1) x^(2k+3), k >= 0",
        provenance: "recursion L_f e = e' x^3 applied to h = x^3",
    },
];

const KINK_NOTES: &[OracleNote] = &[
    OracleNote {
        quantity: "output",
        formula: "y(t) = max(x0 e^t - M, 0) for x0 >= 0",
        provenance: "x(t) = x0 e^t composed with the dead-zone output",
    },
    OracleNote {
        quantity: "distinguishing time, pair (0, x0)",
        formula: "t* = ln((M + eps) / x0)",
        provenance: "first time the nonzero output reaches eps",
    },
    OracleNote {
        quantity: "output energy",
        formula: "piecewise sums of x2^2 (e^2b - e^2a)/2 - 2 M x2 (e^b - e^a) + M^2 (b - a)",
        provenance: "direct integration between the two threshold crossings",
    },
];

const SMOOTH_NOTES: &[OracleNote] = &[
    OracleNote {
        quantity: "output",
        formula: "y(t) = exp(-1 / (x0 e^t - M)) once x0 e^t > M, else 0",
        provenance: "x(t) = x0 e^t composed with the smooth output",
    },
    OracleNote {
        quantity: "distinguishing time, pair (0, x0)",
        formula: "t* = ln((M + 1/ln(1/eps)) / x0)",
        provenance: "solve exp(-1/(x - M)) = eps for x",
    },
];

const CONTRACTION_NOTES: &[OracleNote] = &[
    OracleNote {
        quantity: "trajectory",
        formula: "x(t) = x0 e^-t",
        provenance: "linear scalar ODE",
    },
    OracleNote {
        quantity: "output energy",
        formula: "d^2 (1 - e^-2T) / 2 with d = |x1 - x2|",
        provenance: "integral of d^2 e^-2t over [0, T]",
    },
    OracleNote {
        quantity: "alpha0",
        formula: "r^2 (1 - e^-2T) / 2 for r <= diam",
        provenance: "output energy is increasing in d, so the infimum over d >= r sits at d = r",
    },
];

const DOUBLE_INTEGRATOR_NOTES: &[OracleNote] = &[
    OracleNote {
        quantity: "trajectory",
        formula: "(x1 + x2 t, x2)",
        provenance: "constant velocity",
    },
    OracleNote {
        quantity: "output energy",
        formula: "d' G d with G = [[T, T^2/2], [T^2/2, T^3/3]]",
        provenance: "integral of (d1 + d2 t)^2 over [0, T]",
    },
    OracleNote {
        quantity: "alpha0",
        formula: "lambda_min(G) r^2 for r <= 2",
        provenance: "Rayleigh quotient; the minimizing direction fits in the box",
    },
];

impl ExampleCase {
    fn m(&self) -> f64 {
        self.spec.params().get("M").copied().unwrap_or(1.0)
    }

    pub fn notes(&self) -> &'static [OracleNote] {
        match self.kind {
            Kind::Cubic => CUBIC_NOTES,
            Kind::Kink => KINK_NOTES,
            Kind::Smooth => SMOOTH_NOTES,
            Kind::Contraction => CONTRACTION_NOTES,
            Kind::DoubleIntegrator => DOUBLE_INTEGRATOR_NOTES,
        }
    }

    /// `phi(t, 0, x0)`, `None` past an escape.
    pub fn trajectory(&self, x0: &[f64], t: f64) -> Option<Vec<f64>> {
        match self.kind {
            Kind::Cubic => {
                let s = 1.0 - 2.0 * x0[0] * x0[0] * t;
                (s > 0.0).then(|| vec![x0[0] / s.sqrt()])
            }
            Kind::Kink | Kind::Smooth => Some(vec![x0[0] * t.exp()]),
            Kind::Contraction => Some(vec![x0[0] * (-t).exp()]),
            Kind::DoubleIntegrator => Some(vec![x0[0] + x0[1] * t, x0[1]]),
        }
    }

    pub fn output(&self, x0: &[f64], t: f64) -> Option<Vec<f64>> {
        let x = self.trajectory(x0, t)?;
        let m = self.m();
        Some(match self.kind {
            Kind::Cubic => vec![x[0].powi(3)],
            Kind::Kink => vec![(x[0] - m).max(0.0)],
            Kind::Smooth if x[0] > m => vec![(-1.0 / (x[0] - m)).exp()],
            Kind::Smooth => vec![0.0],
            Kind::Contraction | Kind::DoubleIntegrator => vec![x[0]],
        })
    }

    pub fn escape_time(&self, x0: &[f64]) -> Option<f64> {
        match self.kind {
            Kind::Cubic if x0[0] != 0.0 => Some(1.0 / (2.0 * x0[0] * x0[0])),
            _ => None,
        }
    }

    /// First `t >= 0` with output distance at least `eps`; `+inf` when the
    /// outputs never separate that far, `None` when no closed form is known.
    pub fn distinguishing_time(&self, x1: &[f64], x2: &[f64], eps: f64) -> Option<f64> {
        let y0 = |x: &[f64]| self.output(x, 0.0).map(|y| y[0]);
        if (y0(x1)? - y0(x2)?).abs() >= eps {
            return Some(0.0);
        }
        let m = self.m();
        match self.kind {
            Kind::Cubic => None,
            Kind::Contraction => Some(f64::INFINITY),
            Kind::Kink => {
                let (lo, hi) = if x1[0] <= x2[0] { (x1[0], x2[0]) } else { (x2[0], x1[0]) };
                if hi <= 0.0 {
                    return Some(f64::INFINITY);
                }
                // the gap is nondecreasing in t
                let ta = ((m + eps) / hi).ln();
                if lo <= 0.0 || lo * ta.exp() <= m {
                    Some(ta)
                } else {
                    Some((eps / (hi - lo)).ln())
                }
            }
            Kind::Smooth => {
                let (lo, hi) = if x1[0] <= x2[0] { (x1[0], x2[0]) } else { (x2[0], x1[0]) };
                if lo > 0.0 {
                    return None;
                }
                if hi <= 0.0 || eps >= 1.0 {
                    return Some(f64::INFINITY);
                }
                Some(((m + 1.0 / (1.0 / eps).ln()) / hi).ln())
            }
            Kind::DoubleIntegrator => {
                let d1 = x2[0] - x1[0];
                let d2 = x2[1] - x1[1];
                if d2 == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some((eps * d2.signum() - d1) / d2)
                }
            }
        }
    }

    /// Integral over `[0, T]` of the squared output distance, where a closed form is known.
    pub fn integral_eta(&self, x1: &[f64], x2: &[f64], t_final: f64) -> Option<f64> {
        match self.kind {
            Kind::Contraction => {
                let d = x1[0] - x2[0];
                Some(d * d * (1.0 - (-2.0 * t_final).exp()) / 2.0)
            }
            Kind::DoubleIntegrator => {
                let (d1, d2) = (x1[0] - x2[0], x1[1] - x2[1]);
                let t = t_final;
                Some(d1 * d1 * t + d1 * d2 * t * t + d2 * d2 * t.powi(3) / 3.0)
            }
            Kind::Kink => {
                let m = self.m();
                let (lo, hi) = if x1[0] <= x2[0] { (x1[0], x2[0]) } else { (x2[0], x1[0]) };
                if hi <= 0.0 {
                    return Some(0.0);
                }
                let cross = |x: f64| if x > 0.0 { (m / x).ln().max(0.0) } else { f64::INFINITY };
                let (t_hi, t_lo) = (cross(hi).min(t_final), cross(lo).min(t_final));
                // only the larger state is above threshold on [t_hi, t_lo]
                let (a, b) = (t_hi, t_lo);
                let one = hi * hi * ((2.0 * b).exp() - (2.0 * a).exp()) / 2.0 - 2.0 * m * hi * (b.exp() - a.exp())
                    + m * m * (b - a);
                let d = hi - lo;
                let both = d * d * ((2.0 * t_final).exp() - (2.0 * t_lo).exp()) / 2.0;
                Some(one + both)
            }
            Kind::Cubic | Kind::Smooth => None,
        }
    }

    /// Infimum of the output energy over pairs at distance at least `r` in omega.
    pub fn alpha0(&self, r: f64, t_final: f64) -> Option<f64> {
        if r > self.spec.omega().diameter() {
            return None;
        }
        match self.kind {
            Kind::Contraction => Some(r * r * (1.0 - (-2.0 * t_final).exp()) / 2.0),
            Kind::DoubleIntegrator if r <= 2.0 => {
                let t = t_final;
                let (a, b, c) = (t, t * t / 2.0, t.powi(3) / 3.0);
                let lambda_min = 0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt();
                Some(lambda_min * r * r)
            }
            _ => None,
        }
    }
}
