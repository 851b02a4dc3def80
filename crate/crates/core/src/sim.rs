//! Seeded closed-loop simulation and Lyapunov instrumentation.
//!
//! Randomness: path `k` of a run with master seed `s` uses a ChaCha8
//! stream seeded with [`sub_seed`]`(s, k)`. Within a path the draws are, in
//! order, the initial state (axis 1 first) and then, for each step, one
//! draw per disturbance channel. Results do not depend on the number of
//! worker threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ControlLaw, Hyperbox, NetworkModel, Trajectory};
use crate::verify::{Verdict, Witness};

/// Initial states are drawn on this grid so that every state along a
/// trajectory is exactly representable.
pub const INIT_GRID: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub init_low: Vec<f64>,
    pub init_high: Vec<f64>,
}

impl SimConfig {
    /// 30 paths of 600 steps.
    pub fn new(seed: u64, init_low: Vec<f64>, init_high: Vec<f64>) -> Self {
        SimConfig {
            paths: 30,
            horizon: 600,
            seed,
            init_low,
            init_high,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.paths == 0 || self.horizon == 0 {
            return Err(Error::Precondition("paths and horizon must be at least 1".into()));
        }
        if self.init_low.len() != n || self.init_high.len() != n {
            return Err(Error::Dimension(format!(
                "initial range has {}/{} axes, model has n = {n}",
                self.init_low.len(),
                self.init_high.len()
            )));
        }
        for i in 0..n {
            let (lo, hi) = (self.init_low[i], self.init_high[i]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Precondition(format!(
                    "initial range on axis {} is not a finite interval: [{lo}, {hi}]",
                    i + 1
                )));
            }
            if (lo * INIT_GRID).ceil() > (hi * INIT_GRID).floor() {
                return Err(Error::Precondition(format!(
                    "initial range on axis {} contains no grid point",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// `max_i dist(x_i, [lower_i, upper_i])`; zero exactly on the box.
pub fn lyapunov(x: &[f64], hyperbox: &Hyperbox) -> f64 {
    x.iter()
        .zip(hyperbox.lower.iter().zip(&hyperbox.upper))
        .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Roll the closed loop forward from `x0` with the given disturbance
/// sequence (its length is the horizon).
pub fn simulate(
    model: &NetworkModel,
    law: &ControlLaw,
    hyperbox: &Hyperbox,
    x0: &[f64],
    disturbances: &[Vec<i64>],
) -> Result<Trajectory> {
    if x0.len() != model.n() || hyperbox.dim() != model.n() {
        return Err(Error::Dimension("initial state and box must have n entries".into()));
    }
    law.validate(model)?;
    let mut states = Vec::with_capacity(disturbances.len() + 1);
    let mut inputs = Vec::with_capacity(disturbances.len());
    let mut lyap = Vec::with_capacity(disturbances.len() + 1);
    let mut x = x0.to_vec();
    for w in disturbances {
        model.check_disturbance(w)?;
        let u = law.eval(&x).ok_or_else(|| Error::LawUndefined(x.clone()))?.to_vec();
        let next = model.step(&x, &u, w);
        lyap.push(lyapunov(&x, hyperbox));
        states.push(std::mem::replace(&mut x, next));
        inputs.push(u);
    }
    lyap.push(lyapunov(&x, hyperbox));
    states.push(x);
    let entry_time = lyap.iter().position(|&v| v == 0.0);
    Ok(Trajectory {
        states,
        inputs,
        disturbances: disturbances.to_vec(),
        lyapunov: lyap,
        entry_time,
    })
}

/// SplitMix64 finalizer applied to `seed + (k + 1) * golden`.
pub fn sub_seed(seed: u64, path: u64) -> u64 {
    let mut z = seed.wrapping_add(path.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub path: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub entry_time: Option<usize>,
    pub post_entry_violations: usize,
    /// Smallest / largest `V(x(t)) - V(x(t+1))` over steps with both states
    /// outside the box; `None` if there were no such steps.
    pub min_decrement: Option<f64>,
    pub max_decrement: Option<f64>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl PathReport {
    fn from_trajectory(path: usize, seed: u64, trajectory: Trajectory) -> Self {
        let v = &trajectory.lyapunov;
        let post_entry_violations = trajectory
            .entry_time
            .map_or(0, |tau| v[tau..].iter().filter(|&&x| x > 0.0).count());
        let decrements: Vec<f64> = v
            .windows(2)
            .filter(|p| p[0] > 0.0 && p[1] > 0.0)
            .map(|p| p[0] - p[1])
            .collect();
        PathReport {
            path,
            seed,
            x0: trajectory.states[0].clone(),
            entry_time: trajectory.entry_time,
            post_entry_violations,
            min_decrement: decrements.iter().copied().reduce(f64::min),
            max_decrement: decrements.iter().copied().reduce(f64::max),
            trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub seed: u64,
    pub horizon: usize,
    pub paths: Vec<PathReport>,
}

impl MonteCarloReport {
    pub fn all_entered(&self) -> bool {
        self.paths.iter().all(|p| p.entry_time.is_some())
    }

    pub fn post_entry_violations(&self) -> usize {
        self.paths.iter().map(|p| p.post_entry_violations).sum()
    }

    pub fn min_decrement(&self) -> Option<f64> {
        self.paths.iter().filter_map(|p| p.min_decrement).reduce(f64::min)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialization")
    }

    /// One `path_<k>.csv` per path inside `dir`.
    pub fn write_csv_dir(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let width = self.paths.len().saturating_sub(1).to_string().len();
        self.paths
            .iter()
            .map(|p| {
                let path = dir.join(format!("path_{:0width$}.csv", p.path));
                let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
                p.trajectory.write_csv(file)?;
                Ok(path)
            })
            .collect()
    }
}

fn run_path(
    model: &NetworkModel,
    law: &ControlLaw,
    hyperbox: &Hyperbox,
    config: &SimConfig,
    k: usize,
) -> Result<PathReport> {
    let seed = sub_seed(config.seed, k as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = config
        .init_low
        .iter()
        .zip(&config.init_high)
        .map(|(&lo, &hi)| {
            let a = (lo * INIT_GRID).ceil() as i64;
            let b = (hi * INIT_GRID).floor() as i64;
            rng.gen_range(a..=b) as f64 / INIT_GRID
        })
        .collect();
    let w_len = model.w().len();
    let disturbances: Vec<Vec<i64>> = (0..config.horizon)
        .map(|_| {
            (0..model.p())
                .map(|_| model.w().get(rng.gen_range(0..w_len)))
                .collect()
        })
        .collect();
    let trajectory = simulate(model, law, hyperbox, &x0, &disturbances)?;
    Ok(PathReport::from_trajectory(k, seed, trajectory))
}

/// Seeded Monte Carlo over `config.paths` independent paths.
pub fn monte_carlo(
    model: &NetworkModel,
    law: &ControlLaw,
    hyperbox: &Hyperbox,
    config: &SimConfig,
) -> Result<MonteCarloReport> {
    config.validate(model.n())?;
    if hyperbox.dim() != model.n() {
        return Err(Error::Dimension("box does not match the model".into()));
    }
    law.validate(model)?;
    let paths = (0..config.paths)
        .into_par_iter()
        .map(|k| run_path(model, law, hyperbox, config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloReport {
        seed: config.seed,
        horizon: config.horizon,
        paths,
    })
}

/// Every step starting outside the box must strictly decrease `V`, and by
/// at least `delta` when the next state is still outside.
pub fn lyapunov_audit(trajectory: &Trajectory, hyperbox: &Hyperbox, delta: f64) -> Verdict {
    let v: Vec<f64> = trajectory.states.iter().map(|x| lyapunov(x, hyperbox)).collect();
    for t in 0..v.len().saturating_sub(1) {
        let (now, next) = (v[t], v[t + 1]);
        if now == 0.0 {
            continue;
        }
        let ok = next < now && (next == 0.0 || next <= now - delta);
        if !ok {
            return Verdict::refuted(
                Witness::LyapunovStep {
                    step: t,
                    v_now: now,
                    v_next: next,
                },
                if next >= now {
                    format!("V does not decrease at step {t}")
                } else {
                    format!("V decreases by less than {delta} at step {t}")
                },
            );
        }
    }
    Verdict::certified()
}

/// Line chart of every coordinate against time with the box faces dashed.
pub fn write_svg<W: Write>(trajectory: &Trajectory, hyperbox: &Hyperbox, mut out: W) -> Result<()> {
    const W_PX: f64 = 800.0;
    const H_PX: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

    let steps = trajectory.states.len().max(2) - 1;
    let values = trajectory
        .states
        .iter()
        .flatten()
        .chain(&hyperbox.lower)
        .chain(&hyperbox.upper)
        .copied();
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo == hi {
        lo -= 1.0;
        hi += 1.0;
    }
    let sx = |t: usize| PAD + (W_PX - 2.0 * PAD) * t as f64 / steps as f64;
    let sy = |v: f64| H_PX - PAD - (H_PX - 2.0 * PAD) * (v - lo) / (hi - lo);

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W_PX}" height="{H_PX}" viewBox="0 0 {W_PX} {H_PX}">"#
    )?;
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{PAD}" y="{}" font-size="12">x_i(t), t = 0..{steps}; range [{lo}, {hi}]</text>"#,
        PAD / 2.0
    )?;
    for i in 0..hyperbox.dim() {
        let color = COLORS[i % COLORS.len()];
        for face in [hyperbox.lower[i], hyperbox.upper[i]] {
            writeln!(
                out,
                r#"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{color}" stroke-dasharray="6,4" stroke-width="1"/>"#,
                sx(0),
                sx(steps),
                y = sy(face)
            )?;
        }
        let points: Vec<String> = trajectory
            .states
            .iter()
            .enumerate()
            .map(|(t, x)| format!("{:.2},{:.2}", sx(t), sy(x[i])))
            .collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
