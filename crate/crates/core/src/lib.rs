//! Numerical tooling for nonlinear observability of autonomous systems
//! `x' = f(x)`, `y = h(x)` with initial states in a compact box.
//!
//! - [`observability`]: Lie derivatives, the stacked observability map and its
//!   Jacobian rank over sampled points (rank condition).
//! - [`window`]: pairwise distinguishability probes and an empirical estimate
//!   of the observation-window width.
//! - [`kfun`]: estimates of the worst-case windowed output energy at a given
//!   initial-state separation, and a class-K minorant of it.
//!
//! Systems are described with a small expression language ([`expr`]) and a
//! line-oriented file format ([`system`]). Trajectories come from an adaptive
//! Dormand-Prince integrator with dense output ([`odeint`]).

pub mod examples;
pub mod expr;
pub mod kfun;
pub mod observability;
pub mod odeint;
pub mod sampling;
pub mod system;
pub mod window;

pub use expr::{differentiate, parse_expr, simplify, Expr, ParamEnv};
pub use odeint::{integral_eta, integrate, IntegratorConfig, Trajectory, TrajectoryStatus};
pub use system::{parse_system, validate_system, StateBox, SystemSpec};
