//! Finite-alphabet control of logistic networks.
//!
//! The system under study is
//!
//! ```text
//! x(t+1) = x(t) + B u(t) - D w(t)
//! ```
//!
//! with integer matrices `B`, `D`, controls drawn from a finite integer
//! alphabet `U` and disturbances from a finite integer alphabet `W`. The
//! crate decides whether a robustly control invariant hyperbox
//! `[0, x_1^+] x ... x [0, x_n^+]` exists, synthesizes threshold feedback
//! laws that make such boxes invariant (and globally attractive under the
//! strict condition), verifies piecewise-constant laws exactly, and runs
//! seeded closed-loop Monte Carlo experiments.
//!
//! Module map:
//!
//! * [`model`]: network, alphabets, boxes, vertices, laws, trajectories.
//! * [`worstcase`]: per-row worst-case disturbance extremes.
//! * [`conditions`]: vertex sets, existence/attractivity conditions, bounds.
//! * [`lp`]: dense two-phase simplex.
//! * [`heuristic`]: per-vertex LP relaxation with integer rounding.
//! * [`synthesis`]: threshold law construction, translation, export.
//! * [`verify`]: exact certification and diagnostics.
//! * [`sim`]: Lyapunov instrumentation and Monte Carlo.
//! * [`cli`]: command-line front end.

pub mod cli;
pub mod conditions;
pub mod error;
pub mod heuristic;
pub mod lp;
pub mod model;
pub mod sim;
pub mod synthesis;
pub mod verify;
pub mod worstcase;

pub use error::{Error, Result};
pub use model::{Alphabet, ControlLaw, Hyperbox, NetworkModel, SignVertex, Trajectory};
