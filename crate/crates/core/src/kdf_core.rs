//! The multivariable Kampé de Fériet parameter bundle, its term coefficient,
//! truncated expansion under a slot binding, and convergence classification.
//!
//! A series with `n` argument slots is
//!
//! ```text
//! F = sum_{s_1..s_n >= 0} Lambda(s) prod_t x_t^{s_t} / s_t!
//!
//! Lambda(s) = [a]_{|s|} prod_t [b^(t)]_{s_t}
//!             ------------------------------   with |s| = s_1 + ... + s_n
//!             [alpha]_{|s|} prod_t [beta^(t)]_{s_t}
//! ```
//!
//! where `[c]_k` is the product of Pochhammer symbols over a parameter list.
//! The `a`/`alpha` lists are "joined" (indexed by the total `|s|`); the
//! `b^(t)`/`beta^(t)` lists belong to slot `t` alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_arith::{factorial, list_poch, Rational};
use crate::mseries::{MultiIndex, TruncatedSeries};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct KdfSpec {
    pub a: Vec<Rational>,
    pub alpha: Vec<Rational>,
    pub b: Vec<Vec<Rational>>,
    pub beta: Vec<Vec<Rational>>,
}

/// JSON shape of a [`KdfSpec`]; `n` is redundant with the list lengths and is
/// checked against them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpecDoc {
    pub n: usize,
    #[serde(default)]
    pub a: Vec<Rational>,
    #[serde(default)]
    pub alpha: Vec<Rational>,
    pub b: Vec<Vec<Rational>>,
    pub beta: Vec<Vec<Rational>>,
}

impl TryFrom<SpecDoc> for KdfSpec {
    type Error = Error;

    fn try_from(doc: SpecDoc) -> Result<Self> {
        if doc.b.len() != doc.n || doc.beta.len() != doc.n {
            return Err(Error::ShapeMismatch(format!(
                "n = {} but b has {} rows and beta has {}",
                doc.n,
                doc.b.len(),
                doc.beta.len()
            )));
        }
        KdfSpec::new(doc.a, doc.alpha, doc.b, doc.beta)
    }
}

impl From<KdfSpec> for SpecDoc {
    fn from(s: KdfSpec) -> Self {
        SpecDoc { n: s.n(), a: s.a, alpha: s.alpha, b: s.b, beta: s.beta }
    }
}

impl KdfSpec {
    pub fn new(
        a: Vec<Rational>,
        alpha: Vec<Rational>,
        b: Vec<Vec<Rational>>,
        beta: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::ShapeMismatch("a series needs at least one slot".into()));
        }
        if b.len() != beta.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} numerator rows but {} denominator rows",
                b.len(),
                beta.len()
            )));
        }
        Ok(KdfSpec { a, alpha, b, beta })
    }

    /// The series with no parameters at all: `exp(x_1 + ... + x_n)`.
    pub fn exponential(n: usize) -> Self {
        KdfSpec { a: vec![], alpha: vec![], b: vec![vec![]; n], beta: vec![vec![]; n] }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    pub fn l(&self) -> usize {
        self.alpha.len()
    }

    pub fn q(&self, slot: usize) -> usize {
        self.b[slot].len()
    }

    pub fn m(&self, slot: usize) -> usize {
        self.beta[slot].len()
    }

    pub fn shape(&self) -> Shape {
        Shape {
            p: self.p(),
            l: self.l(),
            q: self.b.iter().map(Vec::len).collect(),
            m: self.beta.iter().map(Vec::len).collect(),
        }
    }
}

/// Parameter counts `(p, l, q_1..q_n, m_1..m_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub p: usize,
    pub l: usize,
    pub q: Vec<usize>,
    pub m: Vec<usize>,
}

impl Shape {
    pub fn n(&self) -> usize {
        self.q.len()
    }
}

/// Where slot `t` lands: formal variable `var`, raised to `mult * s_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub var: usize,
    pub mult: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotBinding {
    slots: Vec<Slot>,
}

impl SlotBinding {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        if let Some(bad) = slots.iter().find(|s| s.mult == 0) {
            return Err(Error::ShapeMismatch(format!("slot multiplier must be >= 1, got {}", bad.mult)));
        }
        Ok(SlotBinding { slots })
    }

    /// Slot `t` to variable `t`.
    pub fn identity(n: usize) -> Self {
        SlotBinding { slots: (0..n).map(|var| Slot { var, mult: 1 }).collect() }
    }

    /// Every slot to variable 0 with the same multiplier.
    pub fn collapsed(n: usize, mult: u32) -> Self {
        assert!(mult >= 1);
        SlotBinding { slots: vec![Slot { var: 0, mult }; n] }
    }

    /// Slot 1 to variable 0 with `first_mult`, slot `t` to variable `t` for
    /// the rest.
    pub fn leading_power(n: usize, first_mult: u32) -> Self {
        assert!(first_mult >= 1);
        let mut b = Self::identity(n);
        b.slots[0].mult = first_mult;
        b
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Smallest variable count this binding fits into.
    pub fn min_var_count(&self) -> usize {
        self.slots.iter().map(|s| s.var + 1).max().unwrap_or(0)
    }

    pub fn check(&self, n: usize, var_count: usize) -> Result<()> {
        if self.slots.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "binding has {} slots, series has {n}",
                self.slots.len()
            )));
        }
        if let Some(s) = self.slots.iter().find(|s| s.var >= var_count) {
            return Err(Error::IndexOutOfRange { index: s.var, len: var_count });
        }
        Ok(())
    }

    /// Largest `|s|` and per-slot `s_t` that can reach total weighted degree
    /// `cap`.
    pub fn reach(&self, cap: u32) -> (u32, Vec<u32>) {
        let min_mult = self.slots.iter().map(|s| s.mult).min().unwrap_or(1);
        (cap / min_mult, self.slots.iter().map(|s| cap / s.mult).collect())
    }
}

/// `Lambda(s)` computed straight from the Pochhammer products.
pub fn lambda_coeff(spec: &KdfSpec, s: &[u32]) -> Result<Rational> {
    if s.len() != spec.n() {
        return Err(Error::ShapeMismatch(format!("index of length {} for {} slots", s.len(), spec.n())));
    }
    let total: u32 = s.iter().sum();
    let mut num = list_poch(&spec.a, total);
    let mut den = list_poch(&spec.alpha, total);
    for (t, &st) in s.iter().enumerate() {
        num *= list_poch(&spec.b[t], st);
        den *= list_poch(&spec.beta[t], st);
    }
    if den.is_zero() {
        return Err(Error::PoleInParameters(format!("denominator of Lambda{s:?} vanishes")));
    }
    num.checked_div(&den)
}

/// Table `ratio[k] = [num]_k / [den]_k / (k!)^with_factorial` for `k <= len`.
pub(crate) fn ratio_table(num: &[Rational], den: &[Rational], len: u32, with_factorial: bool, what: &str) -> Result<Vec<Rational>> {
    let mut out = Vec::with_capacity(len as usize + 1);
    let mut acc = Rational::one();
    out.push(acc.clone());
    for k in 0..len {
        let kq = Rational::from(k);
        let mut d: Rational = den.iter().map(|x| x + &kq).product();
        if with_factorial {
            d *= Rational::from(k + 1);
        }
        if d.is_zero() {
            let culprit = den.iter().find(|x| (*x + &kq).is_zero()).cloned().unwrap_or_else(Rational::zero);
            return Err(Error::PoleInParameters(format!(
                "{what} parameter {culprit} gives a zero Pochhammer factor at index {}",
                k + 1
            )));
        }
        let n: Rational = num.iter().map(|x| x + &kq).product();
        acc = (acc * n).checked_div(&d)?;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Expands the series under `binding` into `var_count` formal variables,
/// truncated at total degree `cap`.
///
/// Only index vectors with `sum_t mult_t * s_t <= cap` are visited, so a
/// denominator that vanishes beyond the cap is harmless.
pub fn expand(spec: &KdfSpec, binding: &SlotBinding, var_count: usize, cap: u32) -> Result<TruncatedSeries> {
    binding.check(spec.n(), var_count)?;
    let (joined_reach, slot_reach) = binding.reach(cap);
    let joined = ratio_table(&spec.a, &spec.alpha, joined_reach, false, "joined denominator")?;
    let per_slot = (0..spec.n())
        .map(|t| ratio_table(&spec.b[t], &spec.beta[t], slot_reach[t], true, &format!("slot {} denominator", t + 1)))
        .collect::<Result<Vec<_>>>()?;

    let mut out = TruncatedSeries::zero(var_count, cap);
    let mut s = vec![0u32; spec.n()];
    let mut exps = vec![0u32; var_count];
    walk(binding.slots(), &joined, &per_slot, cap, 0, 0, &mut s, &mut exps, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    slots: &[Slot],
    joined: &[Rational],
    per_slot: &[Vec<Rational>],
    cap: u32,
    slot: usize,
    used: u32,
    s: &mut Vec<u32>,
    exps: &mut Vec<u32>,
    out: &mut TruncatedSeries,
) {
    if slot == slots.len() {
        let total: u32 = s.iter().sum();
        let mut c = joined[total as usize].clone();
        for (t, &st) in s.iter().enumerate() {
            c *= &per_slot[t][st as usize];
        }
        out.add_term(MultiIndex::new(exps.clone()), c);
        return;
    }
    let Slot { var, mult } = slots[slot];
    let mut st = 0;
    while used + st * mult <= cap {
        s[slot] = st;
        exps[var] += st * mult;
        walk(slots, joined, per_slot, cap, slot + 1, used + st * mult, s, exps, out);
        exps[var] -= st * mult;
        st += 1;
    }
    s[slot] = 0;
}

/// Same series as [`expand`], built by summing [`lambda_coeff`] term by term.
/// Slow; kept as an independent route for cross-checks.
pub fn expand_direct(spec: &KdfSpec, binding: &SlotBinding, var_count: usize, cap: u32) -> Result<TruncatedSeries> {
    binding.check(spec.n(), var_count)?;
    let mut out = TruncatedSeries::zero(var_count, cap);
    for s in index_vectors(binding, cap) {
        let mut c = lambda_coeff(spec, &s)?;
        let mut exps = vec![0u32; var_count];
        for (t, &st) in s.iter().enumerate() {
            c = c.checked_div(&factorial(st).into())?;
            let slot = binding.slots()[t];
            exps[slot.var] += slot.mult * st;
        }
        out.add_term(MultiIndex::new(exps), c);
    }
    Ok(out)
}

/// All `s` with `sum_t mult_t * s_t <= cap`, in lexicographic order.
pub fn index_vectors(binding: &SlotBinding, cap: u32) -> Vec<Vec<u32>> {
    fn go(slots: &[Slot], cap: u32, used: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == slots.len() {
            out.push(cur.clone());
            return;
        }
        let mult = slots[cur.len()].mult;
        let mut st = 0;
        while used + st * mult <= cap {
            cur.push(st);
            go(slots, cap, used + st * mult, cur, out);
            cur.pop();
            st += 1;
        }
    }
    let mut out = Vec::new();
    go(binding.slots(), cap, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotClass {
    /// `delta > 0`: converges for every finite value in this slot.
    EntireDirection,
    /// `delta = 0`: converges on a bounded domain.
    UnitDomain,
    /// `delta < 0`: diverges for any nonzero value in this slot.
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConvergence {
    pub delta: i64,
    pub class: SlotClass,
}

/// Joint domain when every slot sits on the boundary case `delta = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    /// `sum_u |x_u|^(1/root) < 1`, with `root = p - l`.
    RootSum { root: u32 },
    /// `max_u |x_u| < 1`.
    MaxNorm,
}

impl Domain {
    /// Whether the slot arguments lie strictly inside the domain.
    pub fn contains(&self, args: &[f64]) -> bool {
        match *self {
            Domain::RootSum { root } => {
                args.iter().map(|x| x.abs().powf(1.0 / root as f64)).sum::<f64>() < 1.0
            }
            Domain::MaxNorm => args.iter().all(|x| x.abs() < 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub slots: Vec<SlotConvergence>,
    pub domain: Option<Domain>,
}

impl ConvergenceReport {
    /// Whether a point given by its slot arguments lies where the series
    /// converges. Slots with `delta > 0` impose nothing; slots with
    /// `delta = 0` must jointly satisfy the boundary domain rule; a nonzero
    /// argument in a divergent slot fails.
    pub fn admits(&self, spec: &KdfSpec, slot_args: &[f64]) -> bool {
        let mut boundary = Vec::new();
        for (c, &x) in self.slots.iter().zip(slot_args) {
            match c.class {
                SlotClass::Divergent if x != 0.0 => return false,
                SlotClass::UnitDomain => boundary.push(x),
                _ => {}
            }
        }
        boundary.is_empty() || boundary_rule(spec).contains(&boundary)
    }
}

fn boundary_rule(spec: &KdfSpec) -> Domain {
    if spec.p() > spec.l() {
        Domain::RootSum { root: (spec.p() - spec.l()) as u32 }
    } else {
        Domain::MaxNorm
    }
}

/// Per-slot `delta_u = 1 + l + m_u - p - q_u` and the resulting class.
pub fn convergence_class(spec: &KdfSpec) -> ConvergenceReport {
    let slots: Vec<SlotConvergence> = (0..spec.n())
        .map(|u| {
            let delta = 1 + spec.l() as i64 + spec.m(u) as i64 - spec.p() as i64 - spec.q(u) as i64;
            let class = match delta {
                d if d > 0 => SlotClass::EntireDirection,
                0 => SlotClass::UnitDomain,
                _ => SlotClass::Divergent,
            };
            SlotConvergence { delta, class }
        })
        .collect();
    let domain = slots.iter().all(|s| s.delta == 0).then(|| boundary_rule(spec));
    ConvergenceReport { slots, domain }
}

/// Parameters after `r` differentiations in the first argument:
/// returns `[a]_r [b1]_r / ([alpha]_r [beta1]_r)` and the parameter bundle with
/// `a`, `alpha`, `b^(1)`, `beta^(1)` all shifted by `r`.
pub fn shift_spec(spec: &KdfSpec, r: u32) -> Result<(Rational, KdfSpec)> {
    if r == 0 {
        return Ok((Rational::one(), spec.clone()));
    }
    let den = list_poch(&spec.alpha, r) * list_poch(&spec.beta[0], r);
    if den.is_zero() {
        return Err(Error::PoleInParameters(format!(
            "[alpha]_{r} [beta1]_{r} vanishes in the derivative prefactor"
        )));
    }
    let prefactor = (list_poch(&spec.a, r) * list_poch(&spec.b[0], r)).checked_div(&den)?;
    let rq = Rational::from(r);
    let mut shifted = spec.clone();
    shifted.a = list_shift(&spec.a, &rq);
    shifted.alpha = list_shift(&spec.alpha, &rq);
    shifted.b[0] = list_shift(&spec.b[0], &rq);
    shifted.beta[0] = list_shift(&spec.beta[0], &rq);
    Ok((prefactor, shifted))
}

/// Adds `k` to every entry.
pub fn list_shift(params: &[Rational], k: &Rational) -> Vec<Rational> {
    params.iter().map(|x| x + k).collect()
}

/// Removes entry `i` (1-based).
pub fn list_drop(params: &[Rational], i: usize) -> Result<Vec<Rational>> {
    if i == 0 || i > params.len() {
        return Err(Error::IndexOutOfRange { index: i, len: params.len() });
    }
    let mut out = params.to_vec();
    out.remove(i - 1);
    Ok(out)
}

/// Inserts `value` so that it becomes entry `position` (1-based; `len + 1`
/// appends).
pub fn list_insert(params: &[Rational], value: Rational, position: usize) -> Result<Vec<Rational>> {
    if position == 0 || position > params.len() + 1 {
        return Err(Error::IndexOutOfRange { index: position, len: params.len() });
    }
    let mut out = params.to_vec();
    out.insert(position - 1, value);
    Ok(out)
}

/// Entry `i` (1-based).
pub fn list_get(params: &[Rational], i: usize) -> Result<&Rational> {
    if i == 0 {
        return Err(Error::IndexOutOfRange { index: i, len: params.len() });
    }
    params.get(i - 1).ok_or(Error::IndexOutOfRange { index: i, len: params.len() })
}
