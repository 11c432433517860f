//! System descriptions: dimensions, vector field, output map, initial-state box.
//!
//! File format, one directive per line, `#` starts a comment:
//!
//! ```text
//! system example2
//! dim 1
//! outputs 1
//! param M = 1
//! f1 = x1
//! h1 = if(x1 >= M, x1 - M, 0)
//! omega [0, 0.5]
//! ```
//!
//! `omega` lists one interval per state, joined by `x`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse::state_index, parse_expr, Expr, ParamEnv, ParseError, ParseErrorKind};
use crate::odeint::{integrate, IntegratorConfig, TrajectoryStatus};
use crate::sampling::SamplingPlan;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct SystemError {
    /// 1-based; 0 when the error is not tied to a line.
    pub line: usize,
    pub kind: SystemErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemErrorKind {
    #[error("{0}")]
    Format(String),
    #[error("expected {expected} {what}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("undeclared parameter '{0}'")]
    UndeclaredParameter(String),
    #[error("column {column}: {source}")]
    Expr { column: usize, source: ParseErrorKind },
}

fn at(line: usize, kind: SystemErrorKind) -> SystemError {
    SystemError { line, kind }
}

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, SystemErrorKind> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(SystemErrorKind::InvalidBox(format!(
                "{} lower and {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(SystemErrorKind::InvalidBox(format!(
                    "interval {} has a non-finite bound",
                    i + 1
                )));
            }
            if l > h {
                return Err(SystemErrorKind::InvalidBox(format!(
                    "interval {} is [{l}, {h}] with lo > hi",
                    i + 1
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| *v >= self.lo[i] && *v <= self.hi[i])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, t)| self.lo[i] + self.width(i) * t)
            .collect()
    }

    /// All `2^n` corners (deduplicated for degenerate axes), at most `cap`.
    pub fn corners(&self, cap: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let total = if n >= usize::BITS as usize {
            usize::MAX
        } else {
            1usize << n
        };
        for mask in 0..total.min(cap.max(1)) {
            let c: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                .collect();
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

impl fmt::Display for StateBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "[{}, {}]", self.lo[i], self.hi[i])?;
        }
        Ok(())
    }
}

/// A validated autonomous system with its initial-state box.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    name: String,
    f: Vec<Expr>,
    h: Vec<Expr>,
    omega: StateBox,
    params: ParamEnv,
    // f and h with parameter values substituted; used on hot paths
    f_bound: Vec<Expr>,
    h_bound: Vec<Expr>,
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        f: Vec<Expr>,
        h: Vec<Expr>,
        omega: StateBox,
        params: ParamEnv,
    ) -> Result<Self, SystemError> {
        let n = f.len();
        if n == 0 {
            return Err(at(0, SystemErrorKind::Format("dimension must be at least 1".into())));
        }
        if h.is_empty() {
            return Err(at(0, SystemErrorKind::Format("at least one output is required".into())));
        }
        if omega.dim() != n {
            return Err(at(
                0,
                SystemErrorKind::DimensionMismatch {
                    what: "omega intervals",
                    expected: n,
                    found: omega.dim(),
                },
            ));
        }
        for (name, v) in &params {
            if !v.is_finite() {
                return Err(at(
                    0,
                    SystemErrorKind::Format(format!("parameter {name} is not finite")),
                ));
            }
        }
        for e in f.iter().chain(&h) {
            if e.max_var() > n {
                return Err(at(
                    0,
                    SystemErrorKind::Format(format!("x{} is out of range in `{e}`", e.max_var())),
                ));
            }
            if let Some(p) = e.params().into_iter().find(|p| !params.contains_key(p)) {
                return Err(at(0, SystemErrorKind::UndeclaredParameter(p)));
            }
        }
        let f_bound = f.iter().map(|e| crate::simplify(&e.bind(&params))).collect();
        let h_bound = h.iter().map(|e| crate::simplify(&e.bind(&params))).collect();
        Ok(Self {
            name: name.into(),
            f,
            h,
            omega,
            params,
            f_bound,
            h_bound,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn p(&self) -> usize {
        self.h.len()
    }

    pub fn f(&self) -> &[Expr] {
        &self.f
    }

    pub fn h(&self) -> &[Expr] {
        &self.h
    }

    pub fn omega(&self) -> &StateBox {
        &self.omega
    }

    pub fn params(&self) -> &ParamEnv {
        &self.params
    }

    /// Same system on a different initial-state box.
    pub fn with_omega(&self, omega: StateBox) -> Result<Self, SystemError> {
        Self::new(
            self.name.clone(),
            self.f.clone(),
            self.h.clone(),
            omega,
            self.params.clone(),
        )
    }

    /// Same system with a parameter overridden (or added).
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, SystemError> {
        let mut params = self.params.clone();
        params.insert(name.to_string(), value);
        Self::new(
            self.name.clone(),
            self.f.clone(),
            self.h.clone(),
            self.omega.clone(),
            params,
        )
    }

    /// Writes `f(x)` into `dx`.
    pub fn vector_field(&self, x: &[f64], dx: &mut [f64]) -> Result<(), crate::expr::EvalError> {
        let empty = ParamEnv::new();
        for (out, e) in dx.iter_mut().zip(&self.f_bound) {
            *out = e.eval(x, &empty)?;
        }
        Ok(())
    }

    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>, crate::expr::EvalError> {
        let empty = ParamEnv::new();
        self.h_bound.iter().map(|e| e.eval(x, &empty)).collect()
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        writeln!(f, "dim {}", self.n())?;
        writeln!(f, "outputs {}", self.p())?;
        for (k, v) in &self.params {
            writeln!(f, "param {k} = {v}")?;
        }
        for (i, e) in self.f.iter().enumerate() {
            writeln!(f, "f{} = {e}", i + 1)?;
        }
        for (j, e) in self.h.iter().enumerate() {
            writeln!(f, "h{} = {e}", j + 1)?;
        }
        writeln!(f, "omega {}", self.omega)
    }
}

struct RawExpr {
    line: usize,
    offset: usize,
    text: String,
}

/// Parses and validates a system file.
pub fn parse_system(text: &str) -> Result<SystemSpec, SystemError> {
    let text = text.replace('\u{2212}', "-");
    let mut name = None;
    let mut dim = None;
    let mut outputs = None;
    let mut params = ParamEnv::new();
    let mut omega_line = None;
    let mut f_raw: Vec<(usize, RawExpr)> = Vec::new();
    let mut h_raw: Vec<(usize, RawExpr)> = Vec::new();

    for (idx, full) in text.lines().enumerate() {
        let line = idx + 1;
        let content = full.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, rest) = match trimmed.find(|c: char| c.is_whitespace() || c == '=') {
            Some(k) => (&trimmed[..k], trimmed[k..].trim_start()),
            None => (trimmed, ""),
        };
        let format = |msg: String| at(line, SystemErrorKind::Format(msg));
        match key {
            "system" => {
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return Err(format("expected `system <name>`".into()));
                }
                set_once(&mut name, rest.to_string(), line, "system")?;
            }
            "dim" | "outputs" => {
                let v: usize = rest
                    .parse()
                    .map_err(|_| format(format!("expected `{key} <positive integer>`")))?;
                if v == 0 {
                    return Err(format(format!("{key} must be at least 1")));
                }
                let slot = if key == "dim" { &mut dim } else { &mut outputs };
                set_once(slot, v, line, key)?;
            }
            "param" => {
                let (pname, value) = rest
                    .split_once('=')
                    .ok_or_else(|| format("expected `param <name> = <real>`".into()))?;
                let pname = pname.trim();
                let valid = pname
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && pname.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    return Err(format(format!("invalid parameter name '{pname}'")));
                }
                if state_index(pname).is_some() || crate::expr::UnaryOp::from_name(pname).is_some() || pname == "if" {
                    return Err(format(format!("'{pname}' is reserved")));
                }
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| format(format!("invalid value for parameter {pname}")))?;
                if !value.is_finite() {
                    return Err(format(format!("parameter {pname} is not finite")));
                }
                if params.insert(pname.to_string(), value).is_some() {
                    return Err(format(format!("parameter {pname} declared twice")));
                }
            }
            "omega" => set_once(&mut omega_line, (line, rest.to_string()), line, "omega")?,
            _ => {
                let (target, kind) = if let Some(i) = key.strip_prefix('f') {
                    (&mut f_raw, i)
                } else if let Some(j) = key.strip_prefix('h') {
                    (&mut h_raw, j)
                } else {
                    return Err(format(format!("unknown directive '{key}'")));
                };
                let index: usize = kind
                    .parse()
                    .ok()
                    .filter(|i| *i >= 1)
                    .ok_or_else(|| format(format!("unknown directive '{key}'")))?;
                let body = rest
                    .strip_prefix('=')
                    .ok_or_else(|| format(format!("expected `{key} = <expr>`")))?;
                if target.iter().any(|(i, _)| *i == index) {
                    return Err(format(format!("{key} defined twice")));
                }
                let offset = full.len() - body.len();
                target.push((
                    index,
                    RawExpr {
                        line,
                        offset,
                        text: body.to_string(),
                    },
                ));
            }
        }
    }

    let missing = |what: &str| at(0, SystemErrorKind::Format(format!("missing `{what}` line")));
    let name = name.ok_or_else(|| missing("system"))?;
    let n = dim.ok_or_else(|| missing("dim"))?;
    let p = outputs.ok_or_else(|| missing("outputs"))?;
    let (omega_at, omega_text) = omega_line.ok_or_else(|| missing("omega"))?;

    let param_names: Vec<&str> = params.keys().map(String::as_str).collect();
    let f = collect_exprs(f_raw, n, "vector field components", n, &param_names)?;
    let h = collect_exprs(h_raw, p, "output components", n, &param_names)?;
    let omega = parse_omega(&omega_text, n).map_err(|k| at(omega_at, k))?;
    SystemSpec::new(name, f, h, omega, params)
}

fn set_once<T>(slot: &mut Option<T>, v: T, line: usize, what: &str) -> Result<(), SystemError> {
    if slot.is_some() {
        return Err(at(line, SystemErrorKind::Format(format!("`{what}` given twice"))));
    }
    *slot = Some(v);
    Ok(())
}

fn collect_exprs(
    mut raw: Vec<(usize, RawExpr)>,
    count: usize,
    what: &'static str,
    n: usize,
    params: &[&str],
) -> Result<Vec<Expr>, SystemError> {
    raw.sort_by_key(|(i, _)| *i);
    let contiguous = raw.iter().enumerate().all(|(k, (i, _))| *i == k + 1);
    if raw.len() != count || !contiguous {
        let line = raw.last().map(|(_, r)| r.line).unwrap_or(0);
        return Err(at(
            line,
            SystemErrorKind::DimensionMismatch {
                what,
                expected: count,
                found: raw.len(),
            },
        ));
    }
    raw.into_iter()
        .map(|(_, r)| parse_expr(&r.text, n, params).map_err(|e| expr_error(&r, e, n)))
        .collect()
}

fn expr_error(raw: &RawExpr, e: ParseError, n: usize) -> SystemError {
    let line = raw.line + e.line - 1;
    if let ParseErrorKind::UnknownIdentifier(name) = &e.kind {
        let is_state = state_index(name).is_some();
        if !is_state || n == 0 {
            return at(line, SystemErrorKind::UndeclaredParameter(name.clone()));
        }
    }
    let column = if e.line == 1 { raw.offset + e.column } else { e.column };
    at(line, SystemErrorKind::Expr { column, source: e.kind })
}

fn parse_omega(text: &str, n: usize) -> Result<StateBox, SystemErrorKind> {
    let bad = |msg: &str| SystemErrorKind::InvalidBox(msg.to_string());
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut rest = text.trim();
    loop {
        let body = rest
            .strip_prefix('[')
            .ok_or_else(|| bad("expected '[' to open an interval"))?;
        let close = body.find(']').ok_or_else(|| bad("missing ']'"))?;
        let (a, b) = body[..close]
            .split_once(',')
            .ok_or_else(|| bad("interval must be written [lo, hi]"))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| SystemErrorKind::InvalidBox(format!("'{}' is not a number", s.trim())))
        };
        lo.push(parse(a)?);
        hi.push(parse(b)?);
        rest = body[close + 1..].trim_start();
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix('x')
            .or_else(|| rest.strip_prefix('\u{d7}'))
            .ok_or_else(|| bad("intervals must be joined by 'x'"))?
            .trim_start();
    }
    if lo.len() != n {
        return Err(SystemErrorKind::DimensionMismatch {
            what: "omega intervals",
            expected: n,
            found: lo.len(),
        });
    }
    StateBox::new(lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemWarning {
    /// A conditional's switching surface passes through the box; derivatives
    /// there are not defined.
    ConditionalSeam { component: String, predicate: String },
    /// Trial integration from `x0` blew up at about `t_escape`.
    FiniteEscape { x0: Vec<f64>, t_escape: f64 },
}

impl fmt::Display for SystemWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemWarning::ConditionalSeam { component, predicate } => write!(
                f,
                "{component}: switching surface of `{predicate}` intersects omega; derivatives are undefined there"
            ),
            SystemWarning::FiniteEscape { x0, t_escape } => {
                write!(f, "trial integration from x0 = {x0:?} escapes near t = {t_escape}")
            }
        }
    }
}

/// Horizon of the escape probe run by [`validate_system`].
pub const ESCAPE_PROBE_HORIZON: f64 = 1.0;

/// Smoothness and finite-escape diagnostics. Never fails.
///
/// Seams are detected by sign changes of `lhs - rhs` over the default sample
/// plan of omega plus its corners. Escapes are probed by integrating from
/// every corner and the center for [`ESCAPE_PROBE_HORIZON`].
pub fn validate_system(spec: &SystemSpec) -> Vec<SystemWarning> {
    let mut warnings = Vec::new();
    let omega = spec.omega();
    let mut points = SamplingPlan::default_for(spec.n()).points(omega, 0);
    points.extend(omega.corners(64));

    let components = spec
        .f
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("f{}", i + 1), e))
        .chain(spec.h.iter().enumerate().map(|(j, e)| (format!("h{}", j + 1), e)));
    for (component, e) in components {
        for c in e.conditionals() {
            let (mut neg, mut pos, mut zero) = (false, false, false);
            for x in &points {
                if let (Ok(l), Ok(r)) = (c.lhs.eval(x, &spec.params), c.rhs.eval(x, &spec.params)) {
                    let g = l - r;
                    neg |= g < 0.0;
                    pos |= g > 0.0;
                    zero |= g.abs() <= 1e-9;
                }
            }
            if (neg && pos) || zero {
                let predicate = format!("{} {} {}", c.lhs, c.cmp.symbol(), c.rhs);
                let w = SystemWarning::ConditionalSeam {
                    component: component.clone(),
                    predicate,
                };
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
    }

    let mut starts = omega.corners(64);
    let center = omega.center();
    if !starts.contains(&center) {
        starts.push(center);
    }
    let cfg = IntegratorConfig::default();
    for x0 in starts {
        if let Ok(traj) = integrate(spec, &x0, ESCAPE_PROBE_HORIZON, &cfg) {
            if let TrajectoryStatus::Escaped { t_escape } = traj.status() {
                warnings.push(SystemWarning::FiniteEscape { x0, t_escape });
            }
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = "system example1\ndim 1\noutputs 1\nf1 = x1^3\nh1 = x1^3\nomega [-1, 1]\n";
    const EXAMPLE2: &str = "# piecewise output\nsystem example2\ndim 1\noutputs 1\nparam M = 1\nf1 = x1\nh1 = if(x1 >= M, x1 - M, 0)\nomega [0, 0.5]\n";

    #[test]
    fn parses_cubic_example() {
        let s = parse_system(EXAMPLE1).unwrap();
        assert_eq!((s.n(), s.p()), (1, 1));
        assert_eq!(s.omega().lo(), &[-1.0]);
        assert_eq!(s.output(&[2.0]).unwrap(), vec![8.0]);
    }

    #[test]
    fn parses_piecewise_example() {
        let s = parse_system(EXAMPLE2).unwrap();
        assert_eq!(s.params()["M"], 1.0);
        assert_eq!(s.output(&[1.5]).unwrap(), vec![0.5]);
        assert_eq!(s.omega().hi(), &[0.5]);
    }

    #[test]
    fn inverted_box_is_rejected() {
        let text = EXAMPLE1.replace("[-1, 1]", "[1, \u{2212}1]");
        let e = parse_system(&text).unwrap_err();
        assert!(matches!(e.kind, SystemErrorKind::InvalidBox(_)), "{e}");
        assert_eq!(e.line, 6);
    }

    #[test]
    fn dimension_mismatch() {
        let text = EXAMPLE1.replace("dim 1", "dim 2");
        let e = parse_system(&text).unwrap_err();
        assert!(matches!(
            e.kind,
            SystemErrorKind::DimensionMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
        let text = EXAMPLE1.replace("outputs 1", "outputs 2");
        assert!(matches!(
            parse_system(&text).unwrap_err().kind,
            SystemErrorKind::DimensionMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
    }

    #[test]
    fn undeclared_parameter() {
        let text = EXAMPLE2.replace("param M = 1\n", "");
        let e = parse_system(&text).unwrap_err();
        assert_eq!(e.kind, SystemErrorKind::UndeclaredParameter("M".into()));
        assert_eq!(e.line, 6);
    }

    #[test]
    fn expression_errors_carry_location() {
        let text = EXAMPLE1.replace("h1 = x1^3", "h1 = x1 +");
        let e = parse_system(&text).unwrap_err();
        assert_eq!(e.line, 5);
        match e.kind {
            SystemErrorKind::Expr { column, .. } => assert_eq!(column, 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn format_errors() {
        for bad in [
            "system a\ndim x\n",
            "system a\ndim 1\noutputs 1\nf1 = x1\nh1 = x1\n",
            "system a\ndim 1\noutputs 1\nf1 = x1\nh1 = x1\nomega [0, 1] x [0, 1]\n",
            "system a\ndim 1\noutputs 1\nf1 = x1\nh1 = x1\nomega (0, 1)\n",
            "system a\ndim 1\noutputs 1\nparam x1 = 2\nf1 = x1\nh1 = x1\nomega [0, 1]\n",
            "system a\ndim 1\noutputs 1\nf1 = x1\nf1 = x1\nh1 = x1\nomega [0, 1]\n",
            "system a\ndim 1\noutputs 1\ng1 = x1\nh1 = x1\nomega [0, 1]\n",
        ] {
            assert!(parse_system(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn print_and_reparse() {
        let text =
            "system di\ndim 2\noutputs 1\nparam k = 0.25\nf1 = x2\nf2 = -k*x1 - x2^3\nh1 = x1\nomega [-1,1] x [0, 2]\n";
        let s = parse_system(text).unwrap();
        let again = parse_system(&s.to_string()).unwrap();
        assert_eq!(again.omega(), s.omega());
        assert_eq!(again.params(), s.params());
        let mut dx1 = [0.0; 2];
        let mut dx2 = [0.0; 2];
        for x in [[0.3, 1.1], [-0.9, 0.2]] {
            s.vector_field(&x, &mut dx1).unwrap();
            again.vector_field(&x, &mut dx2).unwrap();
            assert_eq!(dx1, dx2);
        }
    }

    #[test]
    fn cubic_example_warns_about_escape() {
        let s = parse_system(EXAMPLE1).unwrap();
        let w = validate_system(&s);
        let escape_from_one = w.iter().find_map(|w| match w {
            SystemWarning::FiniteEscape { x0, t_escape } if x0 == &vec![1.0] => Some(*t_escape),
            _ => None,
        });
        let t = escape_from_one.expect("escape from x0 = 1");
        assert!((t - 0.5).abs() < 1e-3, "{t}");
        assert!(!w.iter().any(|w| matches!(w, SystemWarning::ConditionalSeam { .. })));
    }

    #[test]
    fn piecewise_example_seam_outside_box() {
        let s = parse_system(EXAMPLE2).unwrap();
        assert!(validate_system(&s).is_empty());
        let wide = s.with_omega(StateBox::new(vec![0.0], vec![2.0]).unwrap()).unwrap();
        let w = validate_system(&wide);
        assert_eq!(w.len(), 1);
        assert!(matches!(&w[0], SystemWarning::ConditionalSeam { component, .. } if component == "h1"));
    }

    #[test]
    fn contraction_has_no_warnings() {
        let s = parse_system("system c\ndim 1\noutputs 1\nf1 = -x1\nh1 = x1\nomega [-1, 1]\n").unwrap();
        assert!(validate_system(&s).is_empty());
    }

    #[test]
    fn box_helpers() {
        let b = StateBox::new(vec![0.0, -1.0], vec![3.0, 3.0]).unwrap();
        assert_eq!(b.diameter(), 5.0);
        assert_eq!(b.corners(16).len(), 4);
        assert_eq!(b.from_unit(&[0.5, 0.25]), vec![1.5, 0.0]);
        assert!(StateBox::new(vec![0.0], vec![f64::INFINITY]).is_err());
    }
}
