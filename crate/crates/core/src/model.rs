//! Core data types: the network `x(t+1) = x(t) + B u(t) - D w(t)`, its
//! alphabets, hyperboxes, hypercube vertices, feedback laws and
//! trajectories, plus their JSON/CSV forms.
//!
//! States are `f64` vectors. Every increment `Bu - Dw` is an exact integer
//! and models are rejected unless every increment magnitude stays below
//! 2^53, so adding an increment to a state is exact whenever the state and
//! the result are representable (integers, or dyadic rationals of modest
//! magnitude). Trajectory replay relies on this.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::worstcase::{self, RowExtremes};

/// Largest increment magnitude for which float state updates stay exact.
pub const MAX_EXACT_INCREMENT: i128 = 1 << 53;

/// Finite integer alphabet, either listed explicitly or as a contiguous
/// integer interval stored by its endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Alphabet {
    Values(Vec<i64>),
    Interval { lo: i64, hi: i64 },
}

impl Alphabet {
    pub fn values(values: Vec<i64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Alphabet("alphabet must be non-empty".into()));
        }
        if let Some(w) = values.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Alphabet(format!(
                "values must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        Ok(Alphabet::Values(values))
    }

    pub fn interval(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Alphabet(format!("interval [{lo},{hi}] is empty")));
        }
        Ok(Alphabet::Interval { lo, hi })
    }

    pub fn min(&self) -> i64 {
        match self {
            Alphabet::Values(v) => v[0],
            Alphabet::Interval { lo, .. } => *lo,
        }
    }

    pub fn max(&self) -> i64 {
        match self {
            Alphabet::Values(v) => v[v.len() - 1],
            Alphabet::Interval { hi, .. } => *hi,
        }
    }

    /// Number of symbols.
    pub fn len(&self) -> u128 {
        match self {
            Alphabet::Values(v) => v.len() as u128,
            Alphabet::Interval { lo, hi } => (*hi as i128 - *lo as i128 + 1) as u128,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, Alphabet::Interval { .. })
    }

    pub fn contains(&self, a: i64) -> bool {
        match self {
            Alphabet::Values(v) => v.binary_search(&a).is_ok(),
            Alphabet::Interval { lo, hi } => *lo <= a && a <= *hi,
        }
    }

    /// The `idx`-th symbol in increasing order.
    pub fn get(&self, idx: u128) -> i64 {
        match self {
            Alphabet::Values(v) => v[idx as usize],
            Alphabet::Interval { lo, .. } => (*lo as i128 + idx as i128) as i64,
        }
    }

    /// All symbols in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len()).map(move |k| self.get(k))
    }

    /// `len()^m`, saturating.
    pub fn power_len(&self, m: usize) -> u128 {
        let mut total: u128 = 1;
        for _ in 0..m {
            total = total.saturating_mul(self.len());
        }
        total
    }

    fn max_abs(&self) -> i128 {
        (self.min() as i128).abs().max((self.max() as i128).abs())
    }
}

/// Lexicographic enumeration of `A^m` by alphabet-index tuple, first
/// component most significant.
pub struct Tuples<'a> {
    alphabet: &'a Alphabet,
    idx: Vec<u128>,
    done: bool,
}

impl<'a> Tuples<'a> {
    pub fn new(alphabet: &'a Alphabet, m: usize) -> Self {
        Tuples {
            alphabet,
            idx: vec![0; m],
            done: false,
        }
    }
}

impl Iterator for Tuples<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&k| self.alphabet.get(k)).collect();
        let len = self.alphabet.len();
        let mut j = self.idx.len();
        loop {
            if j == 0 {
                self.done = true;
                break;
            }
            j -= 1;
            self.idx[j] += 1;
            if self.idx[j] < len {
                break;
            }
            self.idx[j] = 0;
        }
        Some(out)
    }
}

/// The network `x(t+1) = x(t) + B u(t) - D w(t)`.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    n: usize,
    m: usize,
    p: usize,
    b: Vec<Vec<i64>>,
    d: Vec<Vec<i64>>,
    u: Alphabet,
    w: Alphabet,
    extremes: RowExtremes,
}

impl PartialEq for NetworkModel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.p == other.p
            && self.b == other.b
            && self.d == other.d
            && self.u == other.u
            && self.w == other.w
    }
}

impl NetworkModel {
    pub fn new(b: Vec<Vec<i64>>, d: Vec<Vec<i64>>, u: Alphabet, w: Alphabet) -> Result<Self> {
        let n = b.len();
        let m = b.first().map_or(0, Vec::len);
        let p = d.first().map_or(0, Vec::len);
        Self::with_dims(n, m, p, b, d, u, w)
    }

    pub fn with_dims(
        n: usize,
        m: usize,
        p: usize,
        b: Vec<Vec<i64>>,
        d: Vec<Vec<i64>>,
        u: Alphabet,
        w: Alphabet,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("state dimension n must be at least 1".into()));
        }
        if n > 63 {
            return Err(Error::Dimension(format!("n = {n} exceeds the supported 63")));
        }
        check_matrix("B", &b, n, m)?;
        check_matrix("D", &d, n, p)?;
        let (u, w) = (revalidate(u)?, revalidate(w)?);

        let (ua, wa) = (u.max_abs(), w.max_abs());
        for i in 0..n {
            let bu: i128 = b[i].iter().map(|&v| (v as i128).abs() * ua).sum();
            let dw: i128 = d[i].iter().map(|&v| (v as i128).abs() * wa).sum();
            if bu + dw >= MAX_EXACT_INCREMENT {
                return Err(Error::Overflow(format!(
                    "row {} admits increments up to {}, which is not below 2^53",
                    i + 1,
                    bu + dw
                )));
            }
        }
        let extremes = worstcase::row_extremes(&d, &w)?;
        Ok(NetworkModel {
            n,
            m,
            p,
            b,
            d,
            u,
            w,
            extremes,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn b(&self) -> &[Vec<i64>] {
        &self.b
    }
    pub fn d(&self) -> &[Vec<i64>] {
        &self.d
    }
    pub fn u(&self) -> &Alphabet {
        &self.u
    }
    pub fn w(&self) -> &Alphabet {
        &self.w
    }

    /// Per-row extremes of `[Dw]_i` over `W^p`.
    pub fn extremes(&self) -> &RowExtremes {
        &self.extremes
    }

    /// Row `i` of `Bu`. Cannot overflow for a validated model and `u` in `U^m`.
    pub fn bu_row(&self, i: usize, u: &[i64]) -> i64 {
        self.b[i].iter().zip(u).map(|(&b, &a)| b * a).sum()
    }

    pub fn bu(&self, u: &[i64]) -> Vec<i64> {
        (0..self.n).map(|i| self.bu_row(i, u)).collect()
    }

    pub fn dw(&self, w: &[i64]) -> Vec<i64> {
        (0..self.n)
            .map(|i| self.d[i].iter().zip(w).map(|(&d, &b)| d * b).sum())
            .collect()
    }

    /// `Bu - Dw`.
    pub fn increment(&self, u: &[i64], w: &[i64]) -> Vec<i64> {
        self.bu(u)
            .into_iter()
            .zip(self.dw(w))
            .map(|(a, b)| a - b)
            .collect()
    }

    /// One step of the dynamics.
    pub fn step(&self, x: &[f64], u: &[i64], w: &[i64]) -> Vec<f64> {
        x.iter()
            .zip(self.increment(u, w))
            .map(|(&xi, inc)| xi + inc as f64)
            .collect()
    }

    pub fn check_control(&self, u: &[i64]) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::Dimension(format!(
                "control has {} components, model has m = {}",
                u.len(),
                self.m
            )));
        }
        if u.iter().any(|&a| !self.u.contains(a)) {
            return Err(Error::ControlOutsideAlphabet(u.to_vec()));
        }
        Ok(())
    }

    pub fn check_disturbance(&self, w: &[i64]) -> Result<()> {
        if w.len() != self.p || w.iter().any(|&b| !self.w.contains(b)) {
            return Err(Error::Precondition(format!(
                "disturbance {w:?} is not in W^{}",
                self.p
            )));
        }
        Ok(())
    }

    /// Lexicographic enumeration of `U^m`.
    pub fn controls(&self) -> Tuples<'_> {
        Tuples::new(&self.u, self.m)
    }

    /// Lexicographic enumeration of `W^p`.
    pub fn disturbances(&self) -> Tuples<'_> {
        Tuples::new(&self.w, self.p)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        load_model(text)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            n: self.n,
            m: self.m,
            p: self.p,
            b: self.b.clone(),
            d: self.d.clone(),
            u: (&self.u).into(),
            w: (&self.w).into(),
        };
        serde_json::to_string_pretty(&doc).expect("model serialization")
    }
}

fn revalidate(a: Alphabet) -> Result<Alphabet> {
    match a {
        Alphabet::Values(v) => Alphabet::values(v),
        Alphabet::Interval { lo, hi } => Alphabet::interval(lo, hi),
    }
}

fn check_matrix(name: &str, mat: &[Vec<i64>], rows: usize, cols: usize) -> Result<()> {
    if mat.len() != rows {
        return Err(Error::Dimension(format!(
            "{name} has {} rows, expected n = {rows}",
            mat.len()
        )));
    }
    for (i, row) in mat.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Dimension(format!(
                "{name} row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    n: usize,
    m: usize,
    p: usize,
    #[serde(rename = "B")]
    b: Vec<Vec<i64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<i64>>,
    #[serde(rename = "U")]
    u: AlphabetDoc,
    #[serde(rename = "W")]
    w: AlphabetDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AlphabetDoc {
    Values { values: Vec<i64> },
    Interval { interval: [i64; 2] },
}

impl From<&Alphabet> for AlphabetDoc {
    fn from(a: &Alphabet) -> Self {
        match a {
            Alphabet::Values(v) => AlphabetDoc::Values { values: v.clone() },
            Alphabet::Interval { lo, hi } => AlphabetDoc::Interval {
                interval: [*lo, *hi],
            },
        }
    }
}

impl AlphabetDoc {
    fn build(self, name: &str) -> Result<Alphabet> {
        let r = match self {
            AlphabetDoc::Values { values } => Alphabet::values(values),
            AlphabetDoc::Interval { interval } => Alphabet::interval(interval[0], interval[1]),
        };
        r.map_err(|e| Error::Alphabet(format!("{name}: {e}")))
    }
}

/// Parse and validate a model document.
pub fn load_model(text: &str) -> Result<NetworkModel> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let u = doc.u.build("U")?;
    let w = doc.w.build("W")?;
    NetworkModel::with_dims(doc.n, doc.m, doc.p, doc.b, doc.d, u, w)
}

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_n, upper_n]`.
///
/// Boxes produced by synthesis have `lower = 0`; translated boxes carry the
/// offset in `lower`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperbox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hyperbox {
    /// `[0, upper_1] x ... x [0, upper_n]`.
    pub fn new(upper: Vec<f64>) -> Result<Self> {
        Self::with_lower(vec![0.0; upper.len()], upper)
    }

    pub fn with_lower(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("box corners differ in length".into()));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::Precondition(format!("box axis [{l},{u}] is invalid")));
            }
        }
        Ok(Hyperbox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&l, &u))| l <= xi && xi <= u)
    }

    /// Box vertices in binary counting order (coordinate 1 least
    /// significant), with duplicates from degenerate axes removed.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(1 << n.min(20));
        for k in 0u64..(1u64 << n) {
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    if k >> i & 1 == 0 {
                        self.lower[i]
                    } else {
                        self.upper[i]
                    }
                })
                .collect();
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Parse `"24,8"` (upper corners, lower 0) or `"10:34,10:18"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            let parse = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad box coordinate {t:?}")))
            };
            match part.split_once(':') {
                Some((l, u)) => {
                    lower.push(parse(l)?);
                    upper.push(parse(u)?);
                }
                None => {
                    lower.push(0.0);
                    upper.push(parse(part)?);
                }
            }
        }
        Hyperbox::with_lower(lower, upper)
    }
}

/// A vertex `z` of the unit hypercube `{0,1}^n`.
///
/// Bit `i` of `index` is `z_{i+1}`, so iterating `index = 0, 1, 2, ...` is
/// binary counting with coordinate 1 least significant. The signature has
/// `s_i = +` exactly when `z_i = 0`; the associated orthant is the one
/// containing `1/2 - z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVertex {
    index: u64,
    n: usize,
}

impl SignVertex {
    pub fn new(index: u64, n: usize) -> Self {
        debug_assert!(n <= 63 && index < 1u64 << n);
        SignVertex { index, n }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let index = bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i);
        SignVertex::new(index, bits.len())
    }

    pub fn all(n: usize) -> impl Iterator<Item = SignVertex> {
        (0u64..1u64 << n).map(move |k| SignVertex::new(k, n))
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `z_i` (0-based `i`).
    pub fn bit(&self, i: usize) -> bool {
        self.index >> i & 1 == 1
    }

    /// `s_i = +`.
    pub fn is_plus(&self, i: usize) -> bool {
        !self.bit(i)
    }

    /// Bitstring with coordinate 1 leftmost, e.g. `"01"` for `z = (0,1)`.
    pub fn bitstring(&self) -> String {
        (0..self.n).map(|i| if self.bit(i) { '1' } else { '0' }).collect()
    }

    pub fn signature(&self) -> String {
        (0..self.n)
            .map(|i| if self.is_plus(i) { '+' } else { '-' })
            .collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > 63 {
            return Err(Error::Parse(format!("bad vertex bitstring {s:?}")));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad vertex bitstring {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignVertex::from_bits(&bits))
    }
}

impl fmt::Display for SignVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bitstring())
    }
}

/// One-dimensional interval with independently open or closed ends.
/// Infinite ends are always treated as open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn all() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn shifted(&self, by: f64) -> Self {
        Interval {
            lo: self.lo + by,
            hi: self.hi + by,
            ..*self
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let num = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                format!("{v}")
            }
        };
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed && self.lo.is_finite() { '[' } else { '(' },
            num(self.lo),
            num(self.hi),
            if self.hi_closed && self.hi.is_finite() { ']' } else { ')' },
        )
    }
}

impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad interval {s:?}, expected e.g. \"[0,12)\""));
        let s = s.trim();
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let (a, b) = s[1..s.len() - 1].split_once(',').ok_or_else(bad)?;
        let num = |t: &str| -> Result<f64> {
            match t.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                t => t.parse::<f64>().map_err(|_| bad()),
            }
        };
        let (lo, hi) = (num(a)?, num(b)?);
        if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(bad());
        }
        Ok(Interval {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        })
    }
}

/// Threshold (signature) law: `u = witnesses[z(x)]` with `z(x)_i = 0`
/// iff `x_i <= thresholds_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLaw {
    pub thresholds: Vec<f64>,
    /// Indexed by [`SignVertex::index`]; total over all `2^n` vertices.
    pub witnesses: Vec<Vec<i64>>,
}

impl ThresholdLaw {
    pub fn vertex_of(&self, x: &[f64]) -> SignVertex {
        let bits: Vec<bool> = x
            .iter()
            .zip(&self.thresholds)
            .map(|(&xi, &l)| xi > l)
            .collect();
        SignVertex::from_bits(&bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub bounds: Vec<Interval>,
    pub control: Vec<i64>,
}

impl Cell {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds.iter().zip(x).all(|(iv, &xi)| iv.contains(xi))
    }
}

/// Ordered list of cells; the first cell containing the state wins.
#[derive(Debug, Clone, PartialEq)]
pub struct CellwiseLaw {
    pub cells: Vec<Cell>,
}

/// Piecewise-constant state feedback.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    Threshold(ThresholdLaw),
    Cellwise(CellwiseLaw),
}

impl ControlLaw {
    pub fn dim(&self) -> usize {
        match self {
            ControlLaw::Threshold(t) => t.thresholds.len(),
            ControlLaw::Cellwise(c) => c.cells.first().map_or(0, |c| c.bounds.len()),
        }
    }

    /// The control applied at `x`, or `None` when no cell contains `x`.
    pub fn eval(&self, x: &[f64]) -> Option<&[i64]> {
        match self {
            ControlLaw::Threshold(t) => {
                Some(&t.witnesses[t.vertex_of(x).index() as usize])
            }
            ControlLaw::Cellwise(c) => c
                .cells
                .iter()
                .find(|cell| cell.contains(x))
                .map(|cell| cell.control.as_slice()),
        }
    }

    /// Check dimensions and that every stored control lies in `U^m`.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        let n = model.n();
        match self {
            ControlLaw::Threshold(t) => {
                if t.thresholds.len() != n {
                    return Err(Error::Law(format!(
                        "{} thresholds for n = {n}",
                        t.thresholds.len()
                    )));
                }
                if t.witnesses.len() != 1usize << n {
                    return Err(Error::Law(format!(
                        "{} witnesses, expected 2^{n}",
                        t.witnesses.len()
                    )));
                }
                if t.thresholds.iter().any(|l| l.is_nan()) {
                    return Err(Error::Law("NaN threshold".into()));
                }
                for u in &t.witnesses {
                    model.check_control(u)?;
                }
            }
            ControlLaw::Cellwise(c) => {
                if c.cells.is_empty() {
                    return Err(Error::Law("cellwise law has no cells".into()));
                }
                for cell in &c.cells {
                    if cell.bounds.len() != n {
                        return Err(Error::Law(format!(
                            "cell has {} axes for n = {n}",
                            cell.bounds.len()
                        )));
                    }
                    model.check_control(&cell.control)?;
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(LawDocument::from_json(text)?.law)
    }

    pub fn to_json(&self) -> String {
        LawDocument {
            law: self.clone(),
            hyperbox: None,
            delta: None,
        }
        .to_json()
    }
}

/// A law plus the optional box and decrement reported alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct LawDocument {
    pub law: ControlLaw,
    pub hyperbox: Option<Hyperbox>,
    pub delta: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witnesses: Option<BTreeMap<String, Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cells: Option<Vec<CellDoc>>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    hyperbox: Option<Hyperbox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDoc {
    bounds: Vec<String>,
    u: Vec<i64>,
}

impl LawDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: LawDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let law = match doc.kind.as_str() {
            "threshold" => {
                let thresholds = doc
                    .thresholds
                    .ok_or_else(|| Error::Law("threshold law needs `thresholds`".into()))?;
                let table = doc
                    .witnesses
                    .ok_or_else(|| Error::Law("threshold law needs `witnesses`".into()))?;
                let n = thresholds.len();
                if n == 0 || n > 24 {
                    return Err(Error::Law(format!("unsupported dimension {n}")));
                }
                let mut witnesses: Vec<Option<Vec<i64>>> = vec![None; 1 << n];
                for (key, u) in table {
                    let z = SignVertex::parse(&key)?;
                    if z.dim() != n {
                        return Err(Error::Law(format!("witness key {key:?} has wrong length")));
                    }
                    witnesses[z.index() as usize] = Some(u);
                }
                let witnesses = witnesses
                    .into_iter()
                    .enumerate()
                    .map(|(k, u)| {
                        u.ok_or_else(|| {
                            Error::Law(format!(
                                "witness table misses vertex {}",
                                SignVertex::new(k as u64, n)
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ControlLaw::Threshold(ThresholdLaw {
                    thresholds,
                    witnesses,
                })
            }
            "cellwise" => {
                let cells = doc
                    .cells
                    .ok_or_else(|| Error::Law("cellwise law needs `cells`".into()))?
                    .into_iter()
                    .map(|c| {
                        Ok(Cell {
                            bounds: c
                                .bounds
                                .iter()
                                .map(|s| s.parse())
                                .collect::<Result<Vec<_>>>()?,
                            control: c.u,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ControlLaw::Cellwise(CellwiseLaw { cells })
            }
            other => return Err(Error::Law(format!("unknown law kind {other:?}"))),
        };
        Ok(LawDocument {
            law,
            hyperbox: doc.hyperbox,
            delta: doc.delta,
        })
    }

    pub fn to_json(&self) -> String {
        let mut doc = LawDoc {
            kind: String::new(),
            thresholds: None,
            witnesses: None,
            cells: None,
            hyperbox: self.hyperbox.clone(),
            delta: self.delta,
        };
        match &self.law {
            ControlLaw::Threshold(t) => {
                let n = t.thresholds.len();
                doc.kind = "threshold".into();
                doc.thresholds = Some(t.thresholds.clone());
                doc.witnesses = Some(
                    t.witnesses
                        .iter()
                        .enumerate()
                        .map(|(k, u)| (SignVertex::new(k as u64, n).bitstring(), u.clone()))
                        .collect(),
                );
            }
            ControlLaw::Cellwise(c) => {
                doc.kind = "cellwise".into();
                doc.cells = Some(
                    c.cells
                        .iter()
                        .map(|cell| CellDoc {
                            bounds: cell.bounds.iter().map(Interval::to_string).collect(),
                            u: cell.control.clone(),
                        })
                        .collect(),
                );
            }
        }
        serde_json::to_string_pretty(&doc).expect("law serialization")
    }
}

/// Closed-loop run: `states` has one more entry than `inputs` and
/// `disturbances`; `lyapunov[t]` is measured against the run's box.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<i64>>,
    pub disturbances: Vec<Vec<i64>>,
    pub lyapunov: Vec<f64>,
    pub entry_time: Option<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    /// True when recomputing every step from `states[0]` reproduces the
    /// stored states bit for bit.
    pub fn replays(&self, model: &NetworkModel) -> bool {
        if self.states.len() != self.inputs.len() + 1
            || self.inputs.len() != self.disturbances.len()
        {
            return false;
        }
        let mut x = self.states[0].clone();
        for t in 0..self.inputs.len() {
            x = model.step(&x, &self.inputs[t], &self.disturbances[t]);
            if x.iter().zip(&self.states[t + 1]).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return false;
            }
        }
        true
    }

    /// CSV with header `t,x_1..x_n,u_1..u_m,w_1..w_p,V`. The final row has
    /// empty input and disturbance fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.inputs.first().map_or(0, Vec::len);
        let p = self.disturbances.first().map_or(0, Vec::len);
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=p).map(|i| format!("w_{i}")));
        header.push("V".into());
        wtr.write_record(&header)?;
        for (t, x) in self.states.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            match (self.inputs.get(t), self.disturbances.get(t)) {
                (Some(u), Some(w)) => {
                    row.extend(u.iter().map(|v| v.to_string()));
                    row.extend(w.iter().map(|v| v.to_string()));
                }
                _ => row.extend(std::iter::repeat_n(String::new(), m + p)),
            }
            row.push(self.lyapunov[t].to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = include_str!("../models/example1.json");
    const EXAMPLE2: &str = include_str!("../models/example2.json");

    #[test]
    fn loads_scalar_example() {
        let m = load_model(EXAMPLE1).unwrap();
        assert_eq!((m.n(), m.m(), m.p()), (1, 1, 1));
        assert_eq!(m.u(), &Alphabet::Values(vec![-100, -2, 3, 150]));
        assert_eq!(m.u().len(), 4);
        assert_eq!(m.w().len(), 2);
    }

    #[test]
    fn loads_production_network() {
        let m = load_model(EXAMPLE2).unwrap();
        assert_eq!((m.n(), m.m(), m.p()), (6, 10, 6));
        assert_eq!(m.u(), &Alphabet::Interval { lo: 0, hi: 400 });
        assert_eq!(m.w(), &Alphabet::Interval { lo: 20, hi: 40 });
        assert_eq!(m.b()[0], vec![1, 0, -2, -1, -1, 0, -1, 1, -3, -1]);
        assert_eq!(m.d()[0], vec![-1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let doc = r#"{"n":3,"m":2,"p":1,"B":[[1,0],[0,1]],"D":[[1],[1],[1]],
                      "U":{"values":[0,1]},"W":{"values":[0]}}"#;
        assert!(matches!(load_model(doc), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_bad_alphabets_and_entries() {
        let base = |u: &str| {
            format!(r#"{{"n":1,"m":1,"p":1,"B":[[1]],"D":[[1]],"U":{u},"W":{{"values":[0]}}}}"#)
        };
        assert!(matches!(load_model(&base(r#"{"values":[1,1]}"#)), Err(Error::Alphabet(_))));
        assert!(matches!(load_model(&base(r#"{"values":[]}"#)), Err(Error::Alphabet(_))));
        assert!(matches!(load_model(&base(r#"{"interval":[3,1]}"#)), Err(Error::Alphabet(_))));
        let frac = r#"{"n":1,"m":1,"p":1,"B":[[1.5]],"D":[[1]],"U":{"values":[0]},"W":{"values":[0]}}"#;
        match load_model(frac) {
            Err(Error::Parse(msg)) => assert!(msg.contains("line"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_inexact_increments() {
        let doc = r#"{"n":1,"m":1,"p":1,"B":[[1048576]],"D":[[1]],
                      "U":{"interval":[0,10000000000]},"W":{"values":[0]}}"#;
        assert!(matches!(load_model(doc), Err(Error::Overflow(_))));
    }

    #[test]
    fn vertices_in_binary_counting_order() {
        let b = Hyperbox::new(vec![24.0, 8.0]).unwrap();
        assert_eq!(
            b.vertices(),
            vec![vec![0.0, 0.0], vec![24.0, 0.0], vec![0.0, 8.0], vec![24.0, 8.0]]
        );
        assert_eq!(Hyperbox::new(vec![157.0]).unwrap().vertices(), vec![vec![0.0], vec![157.0]]);
        assert_eq!(
            Hyperbox::new(vec![0.0, 5.0]).unwrap().vertices(),
            vec![vec![0.0, 0.0], vec![0.0, 5.0]]
        );
    }

    #[test]
    fn sign_vertex_bitstrings() {
        let z = SignVertex::from_bits(&[false, true, false]);
        assert_eq!(z.bitstring(), "010");
        assert_eq!(z.signature(), "+-+");
        assert_eq!(SignVertex::parse("010").unwrap(), z);
        let order: Vec<String> = SignVertex::all(2).map(|z| z.bitstring()).collect();
        assert_eq!(order, ["00", "10", "01", "11"]);
    }

    #[test]
    fn tuples_are_lexicographic() {
        let a = Alphabet::values(vec![-1, 3]).unwrap();
        let all: Vec<Vec<i64>> = Tuples::new(&a, 2).collect();
        assert_eq!(all, vec![vec![-1, -1], vec![-1, 3], vec![3, -1], vec![3, 3]]);
        assert_eq!(Tuples::new(&a, 0).count(), 1);
    }

    #[test]
    fn interval_parsing() {
        let iv: Interval = "[0,12)".parse().unwrap();
        assert!(iv.contains(0.0) && iv.contains(11.9) && !iv.contains(12.0));
        let iv: Interval = "(8,inf)".parse().unwrap();
        assert!(!iv.contains(8.0) && iv.contains(1e300));
        assert_eq!(iv.to_string(), "(8,inf)");
        assert!("[-inf,3]".parse::<Interval>().unwrap().contains(-1e300));
        assert!("0,1".parse::<Interval>().is_err());
    }

    #[test]
    fn threshold_law_boundary_uses_plus_witness() {
        let law = ControlLaw::Threshold(ThresholdLaw {
            thresholds: vec![12.0],
            witnesses: vec![vec![1], vec![-1]],
        });
        assert_eq!(law.eval(&[12.0]), Some(&[1][..]));
        assert_eq!(law.eval(&[12.5]), Some(&[-1][..]));
        assert_eq!(law.eval(&[-7.0]), Some(&[1][..]));
    }

    #[test]
    fn law_document_round_trip() {
        let law = ControlLaw::Threshold(ThresholdLaw {
            thresholds: vec![12.0, 4.0],
            witnesses: vec![vec![3, 3], vec![3, -1], vec![-1, 3], vec![-1, -1]],
        });
        let text = law.to_json();
        assert!(text.contains("\"10\": [\n      3,\n      -1"));
        assert_eq!(ControlLaw::from_json(&text).unwrap(), law);

        let cellwise = ControlLaw::Cellwise(CellwiseLaw {
            cells: vec![Cell {
                bounds: vec!["[12,inf)".parse().unwrap(), "[0,8]".parse().unwrap()],
                control: vec![-1, -1],
            }],
        });
        assert_eq!(ControlLaw::from_json(&cellwise.to_json()).unwrap(), cellwise);
    }

    #[test]
    fn incomplete_witness_table_is_rejected() {
        let doc = r#"{"kind":"threshold","thresholds":[1,1],"witnesses":{"00":[1],"10":[1],"01":[1]}}"#;
        assert!(matches!(ControlLaw::from_json(doc), Err(Error::Law(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let tr = Trajectory {
            states: vec![vec![0.0, 1.5], vec![1.0, 2.5]],
            inputs: vec![vec![1]],
            disturbances: vec![vec![0]],
            lyapunov: vec![0.0, 0.0],
            entry_time: Some(0),
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x_1,x_2,u_1,w_1,V");
        assert_eq!(lines[1], "0,0,1.5,1,0,0");
        assert_eq!(lines[2], "1,1,2.5,,,0");
    }
}
