//! Dense two-phase simplex with Bland's pivot rule.
//!
//! Sized for the small programs used by the heuristic and the hull
//! diagnostics (tens of variables). Every consumer re-checks results in
//! exact integer arithmetic, so plain `f64` with fixed tolerances suffices.

use crate::error::{Error, Result};

/// Residual tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Maximize `objective . x` subject to linear constraints and per-variable
/// bounds (infinite bounds allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// All variables default to `[0, inf)`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn constraint(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn bound(mut self, var: usize, lo: f64, hi: f64) -> Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Lp(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Lp(format!(
                    "constraint {k} has {} coefficients for {n} variables",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::Lp(format!("constraint {k} has a non-finite entry")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Lp("objective has a non-finite entry".into()));
        }
        for &(lo, hi) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Lp(format!("invalid bound [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x` (bounds included).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (&(lo, hi), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless `status` is `Optimal`.
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_pivots: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_pivots: 1_000_000,
        }
    }
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    solve_with(problem, SolverOptions::default())
}

/// How an original variable is expressed in non-negative standard columns.
enum VarMap {
    /// `x = offset + y_col`
    Shift { col: usize, offset: f64 },
    /// `x = offset - y_col`
    Flip { col: usize, offset: f64 },
    /// `x = y_pos - y_neg`
    Free { pos: usize, neg: usize },
}

struct StandardForm {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    ncols: usize,
    artificial: Vec<bool>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    cost_offset: f64,
    maps: Vec<VarMap>,
}

fn standardize(p: &LpProblem) -> Option<StandardForm> {
    let n = p.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0usize;
    // (row over original vars, relation, rhs) for bound rows
    let mut extra: Vec<(usize, f64)> = Vec::new();
    for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
        if lo > hi {
            return None;
        }
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ny, offset: lo });
            if hi.is_finite() {
                extra.push((j, hi - lo));
            }
            ny += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col: ny, offset: hi });
            ny += 1;
        } else {
            maps.push(VarMap::Free { pos: ny, neg: ny + 1 });
            ny += 2;
        }
    }

    // Rows over the y columns.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &p.constraints {
        let mut row = vec![0.0; ny];
        let mut rhs = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    row[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Flip { col, offset } => {
                    row[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Free { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        rows.push((row, c.relation, rhs));
    }
    for &(j, width) in &extra {
        let mut row = vec![0.0; ny];
        if let VarMap::Shift { col, .. } = maps[j] {
            row[col] = 1.0;
        }
        rows.push((row, Relation::Le, width));
    }

    // Non-negative right-hand sides.
    for (row, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            *rhs = -*rhs;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let ncols = ny + n_slack + n_art;
    let mut a = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut basis = Vec::with_capacity(rows.len());
    let mut artificial = vec![false; ncols];
    let (mut s, mut t) = (ny, ny + n_slack);
    for (row, rel, rhs) in rows {
        let mut full = row;
        full.resize(ncols, 0.0);
        match rel {
            Relation::Le => {
                full[s] = 1.0;
                basis.push(s);
                s += 1;
            }
            Relation::Ge => {
                full[s] = -1.0;
                s += 1;
                full[t] = 1.0;
                artificial[t] = true;
                basis.push(t);
                t += 1;
            }
            Relation::Eq => {
                full[t] = 1.0;
                artificial[t] = true;
                basis.push(t);
                t += 1;
            }
        }
        a.push(full);
        b.push(rhs);
    }

    let mut cost = vec![0.0; ncols];
    let mut cost_offset = 0.0;
    for (j, &c) in p.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shift { col, offset } => {
                cost[col] += c;
                cost_offset += c * offset;
            }
            VarMap::Flip { col, offset } => {
                cost[col] -= c;
                cost_offset += c * offset;
            }
            VarMap::Free { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    Some(StandardForm {
        a,
        b,
        ncols,
        artificial,
        basis,
        cost,
        cost_offset,
        maps,
    })
}

struct Tableau {
    rows: Vec<Vec<f64>>, // each row: ncols coefficients followed by rhs
    basis: Vec<usize>,
    ncols: usize,
    pivots: u64,
    max_pivots: u64,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                row[c] = 0.0;
            }
        }
        let f = obj[c];
        if f != 0.0 {
            obj.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
            obj[c] = 0.0;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced-cost row for maximizing `cost`, last entry is minus the value.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj: Vec<f64> = cost.to_vec();
        obj.push(0.0);
        for (i, &bc) in self.basis.iter().enumerate() {
            let cb = cost[bc];
            if cb != 0.0 {
                obj.iter_mut().zip(&self.rows[i]).for_each(|(v, a)| *v -= cb * a);
            }
        }
        obj
    }

    /// Primal simplex with Bland's rule over the columns where `allowed`.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<Outcome> {
        let rhs = self.ncols;
        loop {
            let entering = (0..self.ncols).find(|&j| allowed[j] && obj[j] > OPTIMALITY_TOL);
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };
            let mut best: Option<(f64, usize, usize)> = None; // (ratio, basic var, row)
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[c];
                if a > PIVOT_TOL {
                    let ratio = row[rhs].max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((br, bv, _)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < bv)
                        }
                    };
                    if better {
                        best = Some((ratio, self.basis[i], i));
                    }
                }
            }
            let Some((_, _, r)) = best else {
                return Ok(Outcome::Unbounded);
            };
            if self.pivots >= self.max_pivots {
                return Err(Error::Lp(format!(
                    "iteration limit of {} pivots exceeded",
                    self.max_pivots
                )));
            }
            self.pivot(r, c, obj);
        }
    }
}

pub fn solve_with(problem: &LpProblem, options: SolverOptions) -> Result<LpSolution> {
    problem.validate()?;
    let infeasible = LpSolution {
        status: LpStatus::Infeasible,
        point: Vec::new(),
        value: f64::NAN,
    };
    let Some(sf) = standardize(problem) else {
        return Ok(infeasible);
    };
    let ncols = sf.ncols;
    let mut tab = Tableau {
        rows: sf
            .a
            .iter()
            .zip(&sf.b)
            .map(|(row, &b)| {
                let mut r = row.clone();
                r.push(b);
                r
            })
            .collect(),
        basis: sf.basis.clone(),
        ncols,
        pivots: 0,
        max_pivots: options.max_pivots,
    };
    let scale = 1.0 + sf.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Phase 1: drive the artificial variables to zero.
    if sf.artificial.iter().any(|&a| a) {
        let cost1: Vec<f64> = sf
            .artificial
            .iter()
            .map(|&a| if a { -1.0 } else { 0.0 })
            .collect();
        let mut obj = tab.objective_row(&cost1);
        let allowed = vec![true; ncols];
        tab.optimize(&mut obj, &allowed)?;
        let infeas = obj[ncols]; // = sum of artificials at the phase-1 optimum
        if infeas > FEASIBILITY_TOL * scale {
            return Ok(infeasible);
        }
        // Pivot remaining (zero-valued) artificials out of the basis.
        for r in 0..tab.rows.len() {
            if sf.artificial[tab.basis[r]] {
                let col = (0..ncols)
                    .find(|&j| !sf.artificial[j] && tab.rows[r][j].abs() > 1e-9);
                if let Some(c) = col {
                    tab.pivot(r, c, &mut obj);
                }
                // Otherwise the row is redundant; its artificial stays basic at zero.
            }
        }
    }

    // Phase 2.
    let allowed: Vec<bool> = sf.artificial.iter().map(|&a| !a).collect();
    let mut obj = tab.objective_row(&sf.cost);
    if let Outcome::Unbounded = tab.optimize(&mut obj, &allowed)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            value: f64::INFINITY,
        });
    }

    let mut y = vec![0.0; ncols];
    for (i, &bc) in tab.basis.iter().enumerate() {
        y[bc] = tab.rows[i][ncols];
    }
    if let Some(polished) = polish(&sf, &tab.basis) {
        y = polished;
    }

    let point: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Flip { col, offset } => offset - y[col],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let value = problem
        .objective
        .iter()
        .zip(&point)
        .map(|(c, v)| c * v)
        .sum::<f64>();
    debug_assert!((value - (sf.cost_offset - obj[ncols])).abs() <= 1e-6 * (1.0 + value.abs()));
    Ok(LpSolution {
        status: LpStatus::Optimal,
        point,
        value,
    })
}

/// Recompute the basic solution from the original rows by solving
/// `A_B y_B = b` with partial pivoting, which removes drift accumulated over
/// many tableau updates.
fn polish(sf: &StandardForm, basis: &[usize]) -> Option<Vec<f64>> {
    let m = basis.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row: Vec<f64> = basis.iter().map(|&c| sf.a[i][c]).collect();
            row.push(sf.b[i]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))?;
        if mat[piv][col].abs() < 1e-12 {
            return None;
        }
        mat.swap(col, piv);
        let pr = mat[col].clone();
        for (i, row) in mat.iter_mut().enumerate() {
            if i != col {
                let f = row[col] / pr[col];
                if f != 0.0 {
                    row.iter_mut().zip(&pr).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
    }
    let mut y = vec![0.0; sf.ncols];
    for (k, &c) in basis.iter().enumerate() {
        let v = mat[k][m] / mat[k][k];
        // Values within round-off of zero are zero.
        y[c] = if v.abs() < 1e-12 { 0.0 } else { v };
    }
    Some(y)
}
