//! Per-vertex LP relaxation with integer rounding, for control alphabets
//! that are large integer intervals.
//!
//! For each vertex `z` the LP
//!
//! ```text
//! min lambda
//!   [Bu]_i - dmax_i >=  lambda   (z_i = 0)
//!   [Bu]_i - dmin_i <= -lambda   (z_i = 1)
//!   a_min <= u_j <= a_max,  lambda >= epsilon
//! ```
//!
//! is solved. The optimal face is usually large; by default a second LP
//! moves to the point of that face with the largest common slack in every
//! row and alphabet bound, which leaves room for rounding. The point is
//! rounded and the rounded control is re-checked for strict membership in
//! exact integer arithmetic. The float LP is
//! advisory only. A failure here does not show that `U_z^*` is empty.

use rayon::prelude::*;

use crate::conditions::{self, membership, Bounds, WitnessMap, MAX_VERTEX_DIM};
use crate::error::{Error, Result};
use crate::lp::{self, LpProblem, LpStatus, Relation};
use crate::model::{Alphabet, NetworkModel, SignVertex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicConfig {
    /// Floor for `lambda`; must be positive.
    pub epsilon: f64,
    /// Largest single-coordinate adjustment tried after rounding.
    pub repair_radius: u32,
    /// Replace the simplex vertex by a centred point of the optimal face
    /// (largest common slack in every constraint and bound).
    pub center: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            epsilon: 1.0,
            repair_radius: 1,
            center: true,
        }
    }
}

impl HeuristicConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Precondition(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// LP optimum for one vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalWitness {
    pub u: Vec<f64>,
    pub lambda: f64,
}

fn control_interval(model: &NetworkModel) -> Result<(i64, i64)> {
    match model.u() {
        Alphabet::Interval { lo, hi } => Ok((*lo, *hi)),
        Alphabet::Values(_) => Err(Error::Precondition(
            "the LP heuristic needs an integer-interval control alphabet".into(),
        )),
    }
}

/// Solve the vertex LP. `Ok(None)` means the LP is infeasible at this
/// `epsilon`.
pub fn vertex_witness_lp(
    model: &NetworkModel,
    z: SignVertex,
    config: &HeuristicConfig,
) -> Result<Option<FractionalWitness>> {
    config.validate()?;
    let (a_min, a_max) = control_interval(model)?;
    let m = model.m();
    let ex = model.extremes();

    let mut objective = vec![0.0; m + 1];
    objective[m] = -1.0;
    let mut problem = LpProblem::maximize(objective);
    for j in 0..m {
        problem = problem.bound(j, a_min as f64, a_max as f64);
    }
    problem = problem.bound(m, config.epsilon, f64::INFINITY);
    for i in 0..model.n() {
        let mut coeffs: Vec<f64> = model.b()[i].iter().map(|&v| v as f64).collect();
        if z.is_plus(i) {
            coeffs.push(-1.0);
            problem = problem.constraint(coeffs, Relation::Ge, ex.dmax[i] as f64);
        } else {
            coeffs.push(1.0);
            problem = problem.constraint(coeffs, Relation::Le, ex.dmin[i] as f64);
        }
    }

    let sol = lp::solve(&problem)?;
    match sol.status {
        LpStatus::Optimal => {
            let mut u = sol.point;
            let lambda = u.pop().expect("lambda column");
            if config.center {
                if let Some(c) = centre_of_optimal_face(model, z, lambda, a_min, a_max)? {
                    u = c;
                }
            }
            Ok(Some(FractionalWitness { u, lambda }))
        }
        LpStatus::Infeasible => Ok(None),
        // lambda is bounded below and minimized; cannot happen.
        LpStatus::Unbounded => Err(Error::Lp("vertex LP reported unbounded".into())),
    }
}

/// Maximize `r` such that every vertex-LP row (with `lambda` fixed) and
/// every alphabet bound holds with slack at least `r`.
fn centre_of_optimal_face(
    model: &NetworkModel,
    z: SignVertex,
    lambda: f64,
    a_min: i64,
    a_max: i64,
) -> Result<Option<Vec<f64>>> {
    let m = model.m();
    let ex = model.extremes();
    let mut objective = vec![0.0; m + 1];
    objective[m] = 1.0;
    let mut problem = LpProblem::maximize(objective);
    for j in 0..m {
        problem = problem.bound(j, a_min as f64, a_max as f64);
        let mut lo = vec![0.0; m + 1];
        lo[j] = 1.0;
        lo[m] = -1.0;
        problem = problem.constraint(lo, Relation::Ge, a_min as f64);
        let mut hi = vec![0.0; m + 1];
        hi[j] = 1.0;
        hi[m] = 1.0;
        problem = problem.constraint(hi, Relation::Le, a_max as f64);
    }
    for i in 0..model.n() {
        let mut coeffs: Vec<f64> = model.b()[i].iter().map(|&v| v as f64).collect();
        if z.is_plus(i) {
            coeffs.push(-1.0);
            problem = problem.constraint(coeffs, Relation::Ge, ex.dmax[i] as f64 + lambda);
        } else {
            coeffs.push(1.0);
            problem = problem.constraint(coeffs, Relation::Le, ex.dmin[i] as f64 - lambda);
        }
    }
    let sol = lp::solve(&problem)?;
    Ok(match sol.status {
        LpStatus::Optimal => {
            let mut u = sol.point;
            u.pop();
            Some(u)
        }
        _ => None,
    })
}

/// Round half-up, clamp to the alphabet interval, and re-verify strict
/// membership exactly; on failure try `+-d` on one coordinate at a time for
/// `d = 1..=repair_radius` (coordinate 1 first, `-d` before `+d`).
pub fn round_and_verify(
    model: &NetworkModel,
    z: SignVertex,
    fractional: &[f64],
    config: &HeuristicConfig,
) -> Result<Option<Vec<i64>>> {
    let (a_min, a_max) = control_interval(model)?;
    if fractional.len() != model.m() || fractional.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("fractional control has wrong shape".into()));
    }
    let base: Vec<i64> = fractional
        .iter()
        .map(|&v| ((v + 0.5).floor() as i64).clamp(a_min, a_max))
        .collect();
    if membership(model, &base, z, true) {
        return Ok(Some(base));
    }
    for d in 1..=config.repair_radius as i64 {
        for j in 0..base.len() {
            for step in [-d, d] {
                let v = base[j] + step;
                if v < a_min || v > a_max {
                    continue;
                }
                let mut cand = base.clone();
                cand[j] = v;
                if membership(model, &cand, z, true) {
                    return Ok(Some(cand));
                }
            }
        }
    }
    Ok(None)
}

fn vertex_pipeline(model: &NetworkModel, z: SignVertex, config: &HeuristicConfig) -> Result<Vec<i64>> {
    let fail = |stage: &str, detail: String| Error::Heuristic {
        vertex: z.bitstring(),
        stage: stage.into(),
        detail,
    };
    let frac = vertex_witness_lp(model, z, config)?.ok_or_else(|| {
        fail(
            "LP",
            format!("vertex LP infeasible at epsilon = {}", config.epsilon),
        )
    })?;
    round_and_verify(model, z, &frac.u, config)?.ok_or_else(|| {
        fail(
            "rounding",
            format!(
                "no integer point within radius {} of {:?} is a strict witness",
                config.repair_radius, frac.u
            ),
        )
    })
}

/// Strict witness map for every vertex plus its bounds.
pub fn heuristic_witness_map(
    model: &NetworkModel,
    config: &HeuristicConfig,
) -> Result<(WitnessMap, Bounds)> {
    config.validate()?;
    control_interval(model)?;
    let n = model.n();
    if n > MAX_VERTEX_DIM {
        return Err(Error::Precondition(format!(
            "n = {n} exceeds the vertex limit {MAX_VERTEX_DIM}"
        )));
    }
    let results: Vec<Result<Vec<i64>>> = (0u64..1 << n)
        .into_par_iter()
        .map(|k| vertex_pipeline(model, SignVertex::new(k, n), config))
        .collect();
    let controls = results.into_iter().collect::<Result<Vec<_>>>()?;
    let witnesses = WitnessMap::new(model, controls, true)?;
    let bounds = conditions::bounds(model, &witnesses);
    Ok((witnesses, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{vertex_sets, DEFAULT_ENUMERATION_CAP};
    use crate::model::load_model;

    fn scalar_interval() -> NetworkModel {
        NetworkModel::new(
            vec![vec![1]],
            vec![vec![1]],
            Alphabet::interval(-100, 150).unwrap(),
            Alphabet::values(vec![-6, 4]).unwrap(),
        )
        .unwrap()
    }

    fn z(s: &str) -> SignVertex {
        SignVertex::parse(s).unwrap()
    }

    #[test]
    fn production_network_all_zero_vertex_is_feasible() {
        let m = load_model(include_str!("../models/example2.json")).unwrap();
        let f = vertex_witness_lp(&m, z("000000"), &HeuristicConfig::default())
            .unwrap()
            .expect("feasible");
        assert!((f.lambda - 1.0).abs() < 1e-9);
        let bu: Vec<f64> = m
            .b()
            .iter()
            .map(|row| row.iter().zip(&f.u).map(|(&b, u)| b as f64 * u).sum())
            .collect();
        for i in 2..6 {
            assert!(bu[i] >= 41.0 - 1e-7, "row {i}: {}", bu[i]);
        }
    }

    #[test]
    fn infeasible_toy() {
        let m = NetworkModel::new(
            vec![vec![1]],
            vec![vec![1]],
            Alphabet::interval(0, 0).unwrap(),
            Alphabet::interval(1, 1).unwrap(),
        )
        .unwrap();
        let cfg = HeuristicConfig::default();
        assert_eq!(vertex_witness_lp(&m, z("0"), &cfg).unwrap(), None);
        match heuristic_witness_map(&m, &cfg) {
            Err(Error::Heuristic { vertex, stage, .. }) => {
                assert_eq!(vertex, "0");
                assert_eq!(stage, "LP");
            }
            other => panic!("expected heuristic failure, got {other:?}"),
        }
    }

    #[test]
    fn scalar_interval_lp() {
        let m = scalar_interval();
        let f = vertex_witness_lp(&m, z("0"), &HeuristicConfig::default())
            .unwrap()
            .unwrap();
        // lambda is minimized down to its floor
        assert!((f.lambda - 1.0).abs() < 1e-9);
        assert!(f.u[0] - 4.0 >= f.lambda - 1e-9);
    }

    #[test]
    fn scalar_interval_map_is_consistent_with_exhaustive_sets() {
        let m = scalar_interval();
        let (w, b) = heuristic_witness_map(&m, &HeuristicConfig::default()).unwrap();
        for (zz, u) in w.iter() {
            let vs = vertex_sets(&m, zz, DEFAULT_ENUMERATION_CAP).unwrap();
            assert!(vs.strict_members.iter().any(|s| s == u));
        }
        assert!(b.delta.unwrap() >= 1);
    }

    #[test]
    fn integer_point_is_returned_unchanged() {
        let m = scalar_interval();
        let cfg = HeuristicConfig::default();
        assert_eq!(round_and_verify(&m, z("0"), &[150.0], &cfg).unwrap(), Some(vec![150]));
        assert_eq!(round_and_verify(&m, z("1"), &[-7.0], &cfg).unwrap(), Some(vec![-7]));
    }

    #[test]
    fn repair_fixes_rounding_slack() {
        // n = 1, m = 2, need u_1 + u_2 - 4 > 0.
        let m = NetworkModel::new(
            vec![vec![1, 1]],
            vec![vec![1]],
            Alphabet::interval(0, 10).unwrap(),
            Alphabet::interval(4, 4).unwrap(),
        )
        .unwrap();
        let cfg = HeuristicConfig::default();
        // (2.4, 2.4) rounds to (2, 2), which misses by one; (1, 2) fails, (3, 2) works.
        assert!(!membership(&m, &[2, 2], z("0"), true));
        assert!(!membership(&m, &[1, 2], z("0"), true));
        assert_eq!(
            round_and_verify(&m, z("0"), &[2.4, 2.4], &cfg).unwrap(),
            Some(vec![3, 2])
        );
        let none = HeuristicConfig {
            repair_radius: 0,
            ..cfg
        };
        assert_eq!(round_and_verify(&m, z("0"), &[2.4, 2.4], &none).unwrap(), None);
    }

    #[test]
    fn explicit_alphabet_rejected() {
        let m = load_model(include_str!("../models/example1.json")).unwrap();
        assert!(matches!(
            heuristic_witness_map(&m, &HeuristicConfig::default()),
            Err(Error::Precondition(_))
        ));
        let bad = HeuristicConfig {
            epsilon: 0.0,
            repair_radius: 1,
            center: false,
        };
        assert!(vertex_witness_lp(&scalar_interval(), z("0"), &bad).is_err());
    }

    #[test]
    fn centred_point_keeps_the_optimum() {
        let m = load_model(include_str!("../models/example2.json")).unwrap();
        let cfg = HeuristicConfig::default();
        let ex = m.extremes();
        for bits in ["000000", "101010", "111111"] {
            let v = z(bits);
            let f = vertex_witness_lp(&m, v, &cfg).unwrap().unwrap();
            let raw = vertex_witness_lp(&m, v, &HeuristicConfig { center: false, ..cfg })
                .unwrap()
                .unwrap();
            assert!((f.lambda - raw.lambda).abs() < 1e-9);
            assert!(f.u.iter().all(|&u| (-1e-7..=400.0 + 1e-7).contains(&u)));
            for i in 0..m.n() {
                let bu: f64 = m.b()[i].iter().zip(&f.u).map(|(&b, u)| b as f64 * u).sum();
                if v.is_plus(i) {
                    assert!(bu - ex.dmax[i] as f64 >= f.lambda - 1e-7);
                } else {
                    assert!(bu - ex.dmin[i] as f64 <= -f.lambda + 1e-7);
                }
            }
        }
    }

    #[test]
    fn epsilon_monotone() {
        let m = scalar_interval();
        for eps in [1.0, 50.0, 146.0, 147.0, 500.0] {
            let hi = vertex_witness_lp(&m, z("0"), &HeuristicConfig { epsilon: eps, ..HeuristicConfig::default() })
                .unwrap()
                .is_some();
            let lo = vertex_witness_lp(&m, z("0"), &HeuristicConfig { epsilon: eps / 2.0, ..HeuristicConfig::default() })
                .unwrap()
                .is_some();
            assert!(!hi || lo);
            assert_eq!(hi, eps <= 146.0);
        }
    }
}
