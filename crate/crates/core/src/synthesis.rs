//! Threshold feedback laws and the boxes they render invariant
//! (and attractive, for strict witnesses).
//!
//! Given witnesses `u_z`, the law is `phi(x) = u_{z(x)}` with
//! `z(x)_i = 0` iff `x_i <= L_i`. With `L >= L^o` the box
//! `[0, 2L_1] x ... x [0, 2L_n]` is robustly invariant; with strict
//! witnesses and `L = L^*` every trajectory reaches it, and the same
//! formula is used on all of `R^n`.

use crate::conditions::{self, Bounds, WitnessMap};
use crate::error::{Error, Result};
use crate::model::{CellwiseLaw, ControlLaw, Hyperbox, LawDocument, NetworkModel, ThresholdLaw};

/// A synthesized law with its box and certified bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub law: ControlLaw,
    pub hyperbox: Hyperbox,
    pub bounds: Bounds,
}

impl Synthesized {
    pub fn delta(&self) -> Option<i64> {
        self.bounds.delta
    }

    pub fn document(&self) -> LawDocument {
        LawDocument {
            law: self.law.clone(),
            hyperbox: Some(self.hyperbox.clone()),
            delta: self.bounds.delta,
        }
    }
}

fn revalidate(model: &NetworkModel, witnesses: &WitnessMap) -> Result<()> {
    if witnesses.dim() != model.n() {
        return Err(Error::Dimension("witness map does not match the model".into()));
    }
    WitnessMap::new(model, witnesses.controls().to_vec(), witnesses.is_strict()).map(|_| ())
}

/// Invariance law with thresholds `thresholds` (default `L^o`).
pub fn synthesize_invariant(
    model: &NetworkModel,
    witnesses: &WitnessMap,
    thresholds: Option<&[f64]>,
) -> Result<Synthesized> {
    revalidate(model, witnesses)?;
    let bounds = conditions::bounds(model, witnesses);
    let l: Vec<f64> = match thresholds {
        Some(l) => {
            if l.len() != model.n() {
                return Err(Error::Dimension(format!(
                    "{} thresholds for n = {}",
                    l.len(),
                    model.n()
                )));
            }
            if let Some(i) = (0..l.len()).find(|&i| l[i].is_nan() || l[i] < bounds.l_o[i] as f64) {
                return Err(Error::Precondition(format!(
                    "threshold L_{} = {} is below L^o_{} = {}",
                    i + 1,
                    l[i],
                    i + 1,
                    bounds.l_o[i]
                )));
            }
            l.to_vec()
        }
        None => bounds.l_o.iter().map(|&v| v as f64).collect(),
    };
    let hyperbox = Hyperbox::new(l.iter().map(|v| 2.0 * v).collect())?;
    let law = ControlLaw::Threshold(ThresholdLaw {
        thresholds: l,
        witnesses: witnesses.controls().to_vec(),
    });
    Ok(Synthesized {
        law,
        hyperbox,
        bounds,
    })
}

/// Globally attractive law from strict witnesses, thresholds `L^*`.
pub fn synthesize_attractive(model: &NetworkModel, witnesses: &WitnessMap) -> Result<Synthesized> {
    if !witnesses.is_strict() {
        return Err(Error::Precondition(
            "attractive synthesis needs strict witnesses".into(),
        ));
    }
    let s = synthesize_invariant(model, witnesses, None)?;
    debug_assert!(s.bounds.delta.is_some_and(|d| d >= 1));
    Ok(s)
}

/// `phi'(x) = phi(x - offset)` and the box shifted by `offset`.
pub fn translate_law(
    law: &ControlLaw,
    hyperbox: &Hyperbox,
    offset: &[f64],
) -> Result<(ControlLaw, Hyperbox)> {
    let n = hyperbox.dim();
    if offset.len() != n || law.dim() != n {
        return Err(Error::Dimension("offset, law and box must share dimension".into()));
    }
    let law = match law {
        ControlLaw::Threshold(t) => ControlLaw::Threshold(ThresholdLaw {
            thresholds: t.thresholds.iter().zip(offset).map(|(l, o)| l + o).collect(),
            witnesses: t.witnesses.clone(),
        }),
        ControlLaw::Cellwise(c) => ControlLaw::Cellwise(CellwiseLaw {
            cells: c
                .cells
                .iter()
                .map(|cell| crate::model::Cell {
                    bounds: cell
                        .bounds
                        .iter()
                        .zip(offset)
                        .map(|(iv, &o)| iv.shifted(o))
                        .collect(),
                    control: cell.control.clone(),
                })
                .collect(),
        }),
    };
    let shifted = Hyperbox::with_lower(
        hyperbox.lower.iter().zip(offset).map(|(l, o)| l + o).collect(),
        hyperbox.upper.iter().zip(offset).map(|(u, o)| u + o).collect(),
    )?;
    Ok((law, shifted))
}

/// Lookup-table document for a law (thresholds plus one row per vertex).
pub fn export_lookup(law: &ControlLaw) -> String {
    law.to_json()
}
