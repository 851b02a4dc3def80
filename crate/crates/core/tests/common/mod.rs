//! Oracles and generators shared by the integration tests. Everything here
//! works on raw integer data and avoids the library's own algorithms.
#![allow(dead_code)]

use finbox::lp::{LpProblem, Relation};
use finbox::{Alphabet, NetworkModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All `k`-tuples over `vals`, first component most significant.
pub fn tuples(vals: &[i64], k: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                vals.iter().map(move |&v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct RawModel {
    pub b: Vec<Vec<i64>>,
    pub d: Vec<Vec<i64>>,
    pub u: Vec<i64>,
    pub w: Vec<i64>,
}

impl RawModel {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.b[0].len()
    }

    pub fn p(&self) -> usize {
        self.d[0].len()
    }

    pub fn model(&self) -> NetworkModel {
        NetworkModel::new(
            self.b.clone(),
            self.d.clone(),
            Alphabet::values(self.u.clone()).unwrap(),
            Alphabet::values(self.w.clone()).unwrap(),
        )
        .unwrap()
    }

    pub fn increment(&self, u: &[i64], w: &[i64]) -> Vec<i64> {
        (0..self.n())
            .map(|i| {
                let bu: i64 = self.b[i].iter().zip(u).map(|(a, b)| a * b).sum();
                let dw: i64 = self.d[i].iter().zip(w).map(|(a, b)| a * b).sum();
                bu - dw
            })
            .collect()
    }

    pub fn controls(&self) -> Vec<Vec<i64>> {
        tuples(&self.u, self.m())
    }

    pub fn disturbances(&self) -> Vec<Vec<i64>> {
        tuples(&self.w, self.p())
    }

    /// Brute force over every disturbance: `bits[i] == false` asks for
    /// increments >= 0 (> 0 when strict) in row i, `true` for <= 0 (< 0).
    pub fn member(&self, u: &[i64], bits: &[bool], strict: bool) -> bool {
        self.disturbances().iter().all(|w| {
            let y = self.increment(u, w);
            y.iter().zip(bits).all(|(&yi, &neg)| match (neg, strict) {
                (false, false) => yi >= 0,
                (false, true) => yi > 0,
                (true, false) => yi <= 0,
                (true, true) => yi < 0,
            })
        })
    }

    /// Is `[0, K]` robustly invariant (n = 1)? Increments are integers and
    /// `K` is an integer, so the admissible controls are constant on every
    /// open unit interval and at every integer; checking the half-integer
    /// grid is exact.
    pub fn scalar_invariant(&self, k: i64) -> bool {
        assert_eq!(self.n(), 1);
        let ws = self.disturbances();
        let us = self.controls();
        (0..=2 * k).all(|h| {
            let x = h as f64 / 2.0;
            us.iter().any(|u| {
                ws.iter().all(|w| {
                    let y = x + self.increment(u, w)[0] as f64;
                    (0.0..=k as f64).contains(&y)
                })
            })
        })
    }
}

fn distinct(r: &mut ChaCha8Rng, lo: i64, hi: i64, count: usize) -> Vec<i64> {
    let mut pool: Vec<i64> = (lo..=hi).collect();
    pool.shuffle(r);
    let mut v: Vec<i64> = pool.into_iter().take(count).collect();
    v.sort_unstable();
    v
}

/// n, m <= 3, p <= 2, |U| <= 3, |W| <= 2. Half the corpus uses a
/// diagonally dominant `B` with a control alphabet straddling zero so that
/// the existence condition holds often enough to exercise synthesis.
pub fn random_model(r: &mut ChaCha8Rng) -> RawModel {
    let n = r.gen_range(1..=3);
    let m = r.gen_range(1..=3);
    let p = r.gen_range(1..=2);
    let structured = r.gen_bool(0.5);
    let b: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if structured {
                        if i % m == j {
                            r.gen_range(2..=4)
                        } else {
                            r.gen_range(-1..=1)
                        }
                    } else {
                        r.gen_range(-3..=3)
                    }
                })
                .collect()
        })
        .collect();
    let d: Vec<Vec<i64>> = (0..n)
        .map(|_| (0..p).map(|_| r.gen_range(-2..=2)).collect())
        .collect();
    let u = if structured {
        let k = r.gen_range(2..=3);
        let mut v = vec![-r.gen_range(2..=4), r.gen_range(2..=4)];
        if k == 3 {
            v.push(0);
        }
        v.sort_unstable();
        v
    } else {
        let k = r.gen_range(1..=3);
        distinct(r, -4, 4, k)
    };
    let q = r.gen_range(1..=2);
    let w = distinct(r, -2, 2, q);
    RawModel { b, d, u, w }
}

pub fn corpus(seed: u64, count: usize) -> Vec<RawModel> {
    let mut r = rng(seed);
    (0..count).map(|_| random_model(&mut r)).collect()
}

/// A small LP in raw form: maximize `c x` subject to rows and finite bounds.
#[derive(Debug, Clone)]
pub struct RawLp {
    pub c: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RawLp {
    pub fn problem(&self) -> LpProblem {
        let mut p = LpProblem::maximize(self.c.clone());
        for (j, (&l, &h)) in self.lo.iter().zip(&self.hi).enumerate() {
            p = p.bound(j, l, h);
        }
        for (a, rel, b) in &self.rows {
            p = p.constraint(a.clone(), *rel, *b);
        }
        p
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds_ok = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol);
        bounds_ok
            && self.rows.iter().all(|(a, rel, b)| {
                let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                match rel {
                    Relation::Le => lhs <= b + tol,
                    Relation::Ge => lhs >= b - tol,
                    Relation::Eq => (lhs - b).abs() <= tol,
                }
            })
    }

    /// Best objective over all basic feasible points, `None` when empty.
    /// Bounds are finite so the feasible set is a polytope and its optimum
    /// is attained at a vertex.
    pub fn vertex_enumeration(&self) -> Option<f64> {
        let nv = self.c.len();
        let mut planes: Vec<(Vec<f64>, f64)> = self.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
        for j in 0..nv {
            let mut e = vec![0.0; nv];
            e[j] = 1.0;
            planes.push((e.clone(), self.lo[j]));
            planes.push((e, self.hi[j]));
        }
        let mut best: Option<f64> = None;
        for subset in combinations(planes.len(), nv) {
            let a: Vec<Vec<f64>> = subset.iter().map(|&k| planes[k].0.clone()).collect();
            let b: Vec<f64> = subset.iter().map(|&k| planes[k].1).collect();
            if let Some(x) = solve_square(a, b) {
                if self.feasible(&x, 1e-9) {
                    let v: f64 = self.c.iter().zip(&x).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(v, |bv: f64| bv.max(v)));
                }
            }
        }
        best
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Up to three variables in `[-5, 5]`-ish boxes and up to four integer rows.
pub fn random_lp(r: &mut ChaCha8Rng) -> RawLp {
    let nv = r.gen_range(1..=3);
    let c = (0..nv).map(|_| r.gen_range(-5..=5) as f64).collect();
    let lo: Vec<f64> = (0..nv).map(|_| r.gen_range(-5..=0) as f64).collect();
    let hi: Vec<f64> = lo.iter().map(|&l| l + r.gen_range(0..=8) as f64).collect();
    let rows = (0..r.gen_range(0..=4))
        .map(|_| {
            let a = (0..nv).map(|_| r.gen_range(-4..=4) as f64).collect();
            let rel = match r.gen_range(0..6) {
                0 => Relation::Eq,
                1 | 2 => Relation::Ge,
                _ => Relation::Le,
            };
            (a, rel, r.gen_range(-8..=8) as f64)
        })
        .collect();
    RawLp { c, rows, lo, hi }
}
