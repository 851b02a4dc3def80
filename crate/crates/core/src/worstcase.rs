//! Exact worst-case disturbance analysis.
//!
//! `[Dw]_i = sum_j D_ij w_j` with every `w_j` ranging independently over
//! `W`, so the row extremes are sums of per-channel extremes. This holds for
//! any finite `W`, and only `min W` and `max W` are ever consulted.

use crate::error::{Error, Result};
use crate::model::{Alphabet, NetworkModel};

/// Per-row min and max of `[Dw]_i` over `W^p`, each with an attaining `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowExtremes {
    pub dmin: Vec<i64>,
    pub dmax: Vec<i64>,
    pub argmin: Vec<Vec<i64>>,
    pub argmax: Vec<Vec<i64>>,
}

/// Per-row range of `[Bu - Dw]_i` over `W^p` for one fixed `u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncrementInterval {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

pub fn row_extremes(d: &[Vec<i64>], w: &Alphabet) -> Result<RowExtremes> {
    let (bmin, bmax) = (w.min(), w.max());
    let overflow = || Error::Overflow("row extreme of Dw does not fit in i64".into());
    let mut ex = RowExtremes {
        dmin: Vec::with_capacity(d.len()),
        dmax: Vec::with_capacity(d.len()),
        argmin: Vec::with_capacity(d.len()),
        argmax: Vec::with_capacity(d.len()),
    };
    for row in d {
        let (mut lo, mut hi) = (0i64, 0i64);
        let mut wlo = Vec::with_capacity(row.len());
        let mut whi = Vec::with_capacity(row.len());
        for &dij in row {
            // Non-negative coefficients are maximized by max W.
            let (at_min, at_max) = if dij >= 0 { (bmin, bmax) } else { (bmax, bmin) };
            lo = dij
                .checked_mul(at_min)
                .and_then(|v| lo.checked_add(v))
                .ok_or_else(overflow)?;
            hi = dij
                .checked_mul(at_max)
                .and_then(|v| hi.checked_add(v))
                .ok_or_else(overflow)?;
            wlo.push(at_min);
            whi.push(at_max);
        }
        ex.dmin.push(lo);
        ex.dmax.push(hi);
        ex.argmin.push(wlo);
        ex.argmax.push(whi);
    }
    Ok(ex)
}

/// Tight per-row range of `[Bu - Dw]_i` over `W^p`.
pub fn increment_interval(model: &NetworkModel, u: &[i64]) -> Result<IncrementInterval> {
    model.check_control(u)?;
    Ok(increment_interval_unchecked(model, u))
}

/// As [`increment_interval`] without the alphabet check. `u` must still have
/// `m` components.
pub(crate) fn increment_interval_unchecked(model: &NetworkModel, u: &[i64]) -> IncrementInterval {
    let ex = model.extremes();
    let n = model.n();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let bu = model.bu_row(i, u);
        lo.push(bu - ex.dmax[i]);
        hi.push(bu - ex.dmin[i]);
    }
    IncrementInterval { lo, hi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;
    use proptest::prelude::*;

    fn scalar() -> NetworkModel {
        load_model(include_str!("../models/example1.json")).unwrap()
    }

    #[test]
    fn scalar_extremes() {
        let m = scalar();
        assert_eq!(m.extremes().dmin, vec![-6]);
        assert_eq!(m.extremes().dmax, vec![4]);
    }

    #[test]
    fn negative_coefficient_flips_interval() {
        let m = load_model(include_str!("../models/example2.json")).unwrap();
        let ex = m.extremes();
        assert_eq!((ex.dmin[0], ex.dmax[0]), (-40, -20));
        assert_eq!((ex.dmin[2], ex.dmax[2]), (20, 40));
        // brute force over row 1
        let vals: Vec<i64> = (20..=40).map(|b| -b).collect();
        assert_eq!(*vals.iter().min().unwrap(), ex.dmin[0]);
        assert_eq!(*vals.iter().max().unwrap(), ex.dmax[0]);
    }

    #[test]
    fn zero_matrix() {
        let w = Alphabet::values(vec![-3, 7]).unwrap();
        let ex = row_extremes(&[vec![0, 0], vec![0, 0]], &w).unwrap();
        assert_eq!(ex.dmin, vec![0, 0]);
        assert_eq!(ex.dmax, vec![0, 0]);
    }

    #[test]
    fn scalar_increments() {
        let m = scalar();
        let iv = increment_interval(&m, &[150]).unwrap();
        assert_eq!((iv.lo[0], iv.hi[0]), (146, 156));
        let iv = increment_interval(&m, &[-2]).unwrap();
        assert_eq!((iv.lo[0], iv.hi[0]), (-6, 4));
        assert!(matches!(
            increment_interval(&m, &[4]),
            Err(Error::ControlOutsideAlphabet(_))
        ));
    }

    #[test]
    fn counterexample_increment() {
        let m = load_model(include_str!("../models/counterexample1.json")).unwrap();
        let iv = increment_interval(&m, &[3, 3]).unwrap();
        assert_eq!(iv.lo, vec![12, 0]);
        assert_eq!(iv.hi, vec![12, 0]);
    }

    fn small_model() -> impl Strategy<Value = NetworkModel> {
        (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(n, m, p)| {
            (
                prop::collection::vec(prop::collection::vec(-3i64..=3, m), n),
                prop::collection::vec(prop::collection::vec(-3i64..=3, p), n),
                prop::collection::btree_set(-5i64..=5, 1..=3),
                prop::collection::btree_set(-5i64..=5, 1..=3),
            )
                .prop_map(|(b, d, u, w)| {
                    NetworkModel::new(
                        b,
                        d,
                        Alphabet::values(u.into_iter().collect()).unwrap(),
                        Alphabet::values(w.into_iter().collect()).unwrap(),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn tight_against_enumeration(model in small_model()) {
            for u in model.controls() {
                let iv = increment_interval(&model, &u).unwrap();
                for i in 0..model.n() {
                    let incs: Vec<i64> = model.disturbances().map(|w| model.increment(&u, &w)[i]).collect();
                    prop_assert_eq!(*incs.iter().min().unwrap(), iv.lo[i]);
                    prop_assert_eq!(*incs.iter().max().unwrap(), iv.hi[i]);
                }
            }
            let ex = model.extremes();
            for i in 0..model.n() {
                prop_assert_eq!(model.dw(&ex.argmin[i])[i], ex.dmin[i]);
                prop_assert_eq!(model.dw(&ex.argmax[i])[i], ex.dmax[i]);
                prop_assert!(ex.dmin[i] <= ex.dmax[i]);
            }
        }

        #[test]
        fn adding_a_symbol_only_widens(model in small_model(), extra in -8i64..=8) {
            let mut vals: Vec<i64> = model.w().iter().collect();
            if !vals.contains(&extra) {
                vals.push(extra);
                vals.sort();
            }
            let wider = row_extremes(model.d(), &Alphabet::values(vals).unwrap()).unwrap();
            let ex = model.extremes();
            for i in 0..model.n() {
                prop_assert!(wider.dmin[i] <= ex.dmin[i]);
                prop_assert!(wider.dmax[i] >= ex.dmax[i]);
            }
        }
    }
}
