//! Vertex sets `U_z` / `U_z^*`, the existence condition (every `U_z`
//! non-empty) and the attractivity condition (every `U_z^*` non-empty), and
//! the bounds `L^o`, `L^*`, `Delta` derived from a witness map.
//!
//! Everything here is exact integer arithmetic. A strict inequality over
//! integers is decided as `>= 1`.
//!
//! Vertices are visited in binary counting order with coordinate 1 as the
//! least significant bit; controls in lexicographic alphabet-index order.

use std::collections::BTreeMap;

use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{Hyperbox, NetworkModel, SignVertex};
use crate::worstcase::increment_interval_unchecked;

/// Default cap on `|U|^m` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 20;

/// Largest `n` for which all `2^n` vertices are enumerated.
pub const MAX_VERTEX_DIM: usize = 24;

/// Which of the two vertex conditions is being decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// `U_z` non-empty for every vertex: a robustly control invariant box exists.
    Existence,
    /// `U_z^*` non-empty for every vertex: sufficient for global attractivity.
    Attractivity,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::Existence => "(4)",
            Condition::Attractivity => "(5)",
        }
    }

    pub fn strict(self) -> bool {
        matches!(self, Condition::Attractivity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSets {
    pub z: SignVertex,
    pub members: Vec<Vec<i64>>,
    pub strict_members: Vec<Vec<i64>>,
}

/// One control per hypercube vertex, indexed by [`SignVertex::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessMap {
    n: usize,
    controls: Vec<Vec<i64>>,
    strict: bool,
}

impl WitnessMap {
    /// Validates totality, alphabet membership and (strict) vertex membership.
    pub fn new(model: &NetworkModel, controls: Vec<Vec<i64>>, strict: bool) -> Result<Self> {
        let n = model.n();
        if n > MAX_VERTEX_DIM || controls.len() != 1usize << n {
            return Err(Error::Precondition(format!(
                "witness map needs 2^{n} controls, got {}",
                controls.len()
            )));
        }
        for (k, u) in controls.iter().enumerate() {
            model.check_control(u)?;
            let z = SignVertex::new(k as u64, n);
            if !membership(model, u, z, strict) {
                return Err(Error::Precondition(format!(
                    "control {u:?} is not in U_{}{} for vertex {z}",
                    z,
                    if strict { "^*" } else { "" }
                )));
            }
        }
        Ok(WitnessMap { n, controls, strict })
    }

    /// Build from `(bitstring, control)` pairs.
    pub fn from_bitstrings(
        model: &NetworkModel,
        entries: &[(&str, Vec<i64>)],
        strict: bool,
    ) -> Result<Self> {
        let n = model.n();
        let mut controls = vec![None; 1usize << n.min(MAX_VERTEX_DIM)];
        for (key, u) in entries {
            let z = SignVertex::parse(key)?;
            if z.dim() != n {
                return Err(Error::Parse(format!("vertex {key:?} has wrong length")));
            }
            controls[z.index() as usize] = Some(u.clone());
        }
        let controls = controls
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Precondition("witness map is not total".into()))?;
        WitnessMap::new(model, controls, strict)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn get(&self, z: SignVertex) -> &[i64] {
        &self.controls[z.index() as usize]
    }

    pub fn controls(&self) -> &[Vec<i64>] {
        &self.controls
    }

    pub fn into_controls(self) -> Vec<Vec<i64>> {
        self.controls
    }

    pub fn iter(&self) -> impl Iterator<Item = (SignVertex, &[i64])> {
        let n = self.n;
        self.controls
            .iter()
            .enumerate()
            .map(move |(k, u)| (SignVertex::new(k as u64, n), u.as_slice()))
    }

    /// `{"00": "[3,-1]", ...}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let map: BTreeMap<String, String> = self
            .iter()
            .map(|(z, u)| (z.bitstring(), format_control(u)))
            .collect();
        json!(map)
    }
}

pub fn format_control(u: &[i64]) -> String {
    let parts: Vec<String> = u.iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(","))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub holds: bool,
    /// Every vertex with an empty set, in vertex order.
    pub failing: Vec<SignVertex>,
    /// Lexicographically smallest witness per vertex, when the condition holds.
    pub witnesses: Option<WitnessMap>,
}

impl ConditionVerdict {
    pub fn first_failing(&self) -> Option<SignVertex> {
        self.failing.first().copied()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut v = json!({
            "condition": self.condition.label(),
            "holds": self.holds,
        });
        if let Some(w) = &self.witnesses {
            v["witnesses"] = w.to_json_value();
        }
        if !self.failing.is_empty() {
            v["failing"] = json!(self.failing.iter().map(|z| z.bitstring()).collect::<Vec<_>>());
        }
        v
    }
}

/// `L^o`, and `L^*` / `Delta` when the witnesses are strict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub l_o: Vec<i64>,
    pub l_star: Option<Vec<i64>>,
    pub delta: Option<i64>,
}

impl Bounds {
    /// Thresholds used by the constructive laws: `L^*` if present, else `L^o`.
    pub fn thresholds(&self) -> &[i64] {
        self.l_star.as_deref().unwrap_or(&self.l_o)
    }

    /// `[0, 2 L_1] x ... x [0, 2 L_n]`.
    pub fn hyperbox(&self) -> Hyperbox {
        Hyperbox::new(self.thresholds().iter().map(|&l| 2.0 * l as f64).collect())
            .expect("bounds are non-negative")
    }
}

/// `u` in `U_z` (or `U_z^*` when `strict`).
///
/// `u` is expected to lie in `U^m`; membership only looks at the increment
/// range, so out-of-alphabet controls are not rejected here.
pub fn membership(model: &NetworkModel, u: &[i64], z: SignVertex, strict: bool) -> bool {
    let iv = increment_interval_unchecked(model, u);
    (0..model.n()).all(|i| match (z.is_plus(i), strict) {
        (true, false) => iv.lo[i] >= 0,
        (true, true) => iv.lo[i] > 0,
        (false, false) => iv.hi[i] <= 0,
        (false, true) => iv.hi[i] < 0,
    })
}

fn check_enumerable(model: &NetworkModel, cap: u128) -> Result<()> {
    if model.n() > MAX_VERTEX_DIM {
        return Err(Error::Precondition(format!(
            "n = {} exceeds the vertex enumeration limit {MAX_VERTEX_DIM}",
            model.n()
        )));
    }
    let count = model.u().power_len(model.m());
    if count > cap {
        return Err(Error::CapExceeded {
            what: format!("U^{}", model.m()),
            count,
            cap,
        });
    }
    Ok(())
}

/// Exhaustive `U_z` and `U_z^*`.
pub fn vertex_sets(model: &NetworkModel, z: SignVertex, cap: u128) -> Result<VertexSets> {
    check_enumerable(model, cap)?;
    let mut members = Vec::new();
    let mut strict_members = Vec::new();
    for u in model.controls() {
        if membership(model, &u, z, false) {
            if membership(model, &u, z, true) {
                strict_members.push(u.clone());
            }
            members.push(u);
        }
    }
    Ok(VertexSets {
        z,
        members,
        strict_members,
    })
}

/// Decide the existence condition.
pub fn check_existence(model: &NetworkModel, cap: u128) -> Result<ConditionVerdict> {
    check_condition(model, Condition::Existence, cap)
}

/// Decide the (sufficient) attractivity condition.
pub fn check_attractivity_sufficient(model: &NetworkModel, cap: u128) -> Result<ConditionVerdict> {
    check_condition(model, Condition::Attractivity, cap)
}

/// Single pass over `U^m`: each control serves exactly the vertices whose
/// every coordinate sign it satisfies, so the first control that serves a
/// vertex is its lexicographically smallest witness.
pub fn check_condition(
    model: &NetworkModel,
    condition: Condition,
    cap: u128,
) -> Result<ConditionVerdict> {
    check_enumerable(model, cap)?;
    let n = model.n();
    let strict = condition.strict();
    let total = 1usize << n;
    let mut found: Vec<Option<Vec<i64>>> = vec![None; total];
    let mut remaining = total;

    for u in model.controls() {
        let iv = increment_interval_unchecked(model, &u);
        // Per row: may z_i be 0 (plus) / 1 (minus)?
        let mut options: Vec<(bool, bool)> = Vec::with_capacity(n);
        let mut any = true;
        for i in 0..n {
            let plus = if strict { iv.lo[i] > 0 } else { iv.lo[i] >= 0 };
            let minus = if strict { iv.hi[i] < 0 } else { iv.hi[i] <= 0 };
            if !plus && !minus {
                any = false;
                break;
            }
            options.push((plus, minus));
        }
        if !any {
            continue;
        }
        for z in served_vertices(&options) {
            let slot = &mut found[z as usize];
            if slot.is_none() {
                *slot = Some(u.clone());
                remaining -= 1;
            }
        }
        if remaining == 0 {
            break;
        }
    }

    let failing: Vec<SignVertex> = found
        .iter()
        .enumerate()
        .filter(|(_, u)| u.is_none())
        .map(|(k, _)| SignVertex::new(k as u64, n))
        .collect();
    let holds = failing.is_empty();
    let witnesses = holds.then(|| WitnessMap {
        n,
        controls: found.into_iter().map(Option::unwrap).collect(),
        strict,
    });
    Ok(ConditionVerdict {
        condition,
        holds,
        failing,
        witnesses,
    })
}

fn served_vertices(options: &[(bool, bool)]) -> Vec<u64> {
    let mut out = vec![0u64];
    for (i, &(plus, minus)) in options.iter().enumerate() {
        match (plus, minus) {
            (true, false) => {}
            (false, true) => out.iter_mut().for_each(|z| *z |= 1 << i),
            (true, true) => {
                let with: Vec<u64> = out.iter().map(|z| z | 1 << i).collect();
                out.extend(with);
            }
            (false, false) => unreachable!(),
        }
    }
    out
}

/// Exact `L^o_i = max_{z,w} |[B u_z - D w]_i|`, plus `L^*` and
/// `Delta = min_{i,z,w} |[B u_z - D w]_i|` for strict maps.
pub fn bounds(model: &NetworkModel, witnesses: &WitnessMap) -> Bounds {
    let n = model.n();
    let mut l = vec![0i64; n];
    let mut delta = i64::MAX;
    for (_, u) in witnesses.iter() {
        let iv = increment_interval_unchecked(model, u);
        for i in 0..n {
            l[i] = l[i].max(iv.lo[i].abs()).max(iv.hi[i].abs());
            // With a sign-consistent row the smallest magnitude sits at the
            // end nearer to zero.
            let nearest = if iv.lo[i] >= 0 {
                iv.lo[i]
            } else if iv.hi[i] <= 0 {
                -iv.hi[i]
            } else {
                0
            };
            delta = delta.min(nearest);
        }
    }
    let strict = witnesses.is_strict();
    Bounds {
        l_o: l.clone(),
        l_star: strict.then_some(l),
        delta: strict.then_some(delta),
    }
}
