//! Catalog of finite summation formulas and their exact verifier.
//!
//! Every formula has the shape
//!
//! ```text
//! sum_{k=0}^{r} c_k x1^{h_k} F[spec_k]  =  C x1^{H} F[spec']
//! ```
//!
//! with all series expanded under one slot binding. [`describe`] turns an
//! instance into that data (an [`IdentityForm`]); building, pole scanning and
//! comparison are generic over it.
//!
//! Formulas whose printed form is wrong carry two readings. `Corrected` is
//! the version that holds; `Literal` reproduces the printed text so that the
//! discrepancy can be exhibited. For ids where the print is right the two
//! readings coincide.
//!
//! EQ10..EQ17 are built with every slot on one variable `t` (standing for
//! `1/x1`). They balance index by index, so any shared binding works; the
//! literal reading of the slot-1 variants uses the printed `t, x2, ..., xn`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_arith::{binom, list_poch, poch, poch_vanishes_within, Rational};
use crate::kdf_core::{expand, list_drop, list_get, list_shift, KdfSpec, Shape, SlotBinding};
use crate::mseries::{monomial_count, MultiIndex, TruncatedSeries};

pub const DEFAULT_CAP: u32 = 7;
pub const DEFAULT_RETRIES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdentityId {
    Eq5,
    Eq6,
    Eq7,
    Eq8,
    Eq9,
    Eq10,
    Eq11,
    Eq12,
    Eq13,
    Eq14,
    Eq15,
    Eq16,
    Eq17,
    Eq18,
    Eq19,
    Eq20,
    Eq21,
}

/// Which parameter list the 1-based index `i` ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexDomain {
    /// `1..=p - short`
    Joined { short: usize },
    /// `1..=q_1 - short`
    SlotOneUpper { short: usize },
    /// `1..=m_1`
    SlotOneLower,
    /// no index enters the formula
    Unused,
}

impl IdentityId {
    pub const ALL: [IdentityId; 17] = [
        IdentityId::Eq5,
        IdentityId::Eq6,
        IdentityId::Eq7,
        IdentityId::Eq8,
        IdentityId::Eq9,
        IdentityId::Eq10,
        IdentityId::Eq11,
        IdentityId::Eq12,
        IdentityId::Eq13,
        IdentityId::Eq14,
        IdentityId::Eq15,
        IdentityId::Eq16,
        IdentityId::Eq17,
        IdentityId::Eq18,
        IdentityId::Eq19,
        IdentityId::Eq20,
        IdentityId::Eq21,
    ];

    pub fn number(self) -> u32 {
        self as u32 + 5
    }

    pub fn from_number(n: u32) -> Option<Self> {
        Self::ALL.get(n.checked_sub(5)? as usize).copied()
    }

    pub fn index_domain(self) -> IndexDomain {
        use IdentityId::*;
        match self {
            Eq5 | Eq10 | Eq12 | Eq18 => IndexDomain::Joined { short: 0 },
            Eq20 => IndexDomain::Joined { short: 1 },
            Eq6 | Eq11 | Eq13 | Eq19 => IndexDomain::SlotOneUpper { short: 0 },
            Eq21 => IndexDomain::SlotOneUpper { short: 1 },
            Eq7 | Eq8 | Eq9 => IndexDomain::SlotOneLower,
            Eq14 | Eq15 | Eq16 | Eq17 => IndexDomain::Unused,
        }
    }

    /// Number of admissible `i` values for a given shape.
    pub fn index_range(self, shape: &Shape) -> usize {
        match self.index_domain() {
            IndexDomain::Joined { short } => shape.p.saturating_sub(short),
            IndexDomain::SlotOneUpper { short } => shape.q[0].saturating_sub(short),
            IndexDomain::SlotOneLower => shape.m[0],
            IndexDomain::Unused => 1,
        }
    }

    pub fn uses_power(self) -> bool {
        matches!(self, IdentityId::Eq18 | IdentityId::Eq19)
    }

    /// Whether the printed formula differs from the one that holds.
    pub fn has_correction(self) -> bool {
        use IdentityId::*;
        matches!(self, Eq6 | Eq8 | Eq9 | Eq13 | Eq16 | Eq17 | Eq20 | Eq21)
    }

    /// One-line summary of the formula (corrected reading).
    pub fn summary(self) -> &'static str {
        use IdentityId::*;
        match self {
            Eq5 => "sum C(r,k) [a^i]_k[b1]_k/([alpha]_k[beta1]_k) x1^k F(+k) = F(slot1: +a_i+r / +a_i)",
            Eq6 => "sum C(r,k) [a]_k[b1^i]_k/([alpha]_k[beta1]_k) x1^k F(+k) = F(b_i -> b_i+r)",
            Eq7 => "sum C(r,k) [a]_k[b1]_k/((beta_i-r)_k[alpha]_k[beta1]_k) x1^k F(+k) = F(beta_i -> beta_i-r)",
            Eq8 => "sum C(r,k) (-1)^k (1-beta_i)_k/(2-beta_i-r)_k F(beta_i -> beta_i-k) = (-1)^r [a]_r[b1]_r/((beta_i-1)_r[alpha]_r[beta1]_r) x1^r F(+r)",
            Eq9 => "sum C(r,k) (-1)^k (beta_i+r-1)_k/(beta_i)_k F(beta_i -> beta_i+k) = [a]_r[b1]_r/((beta_i+r)_r[alpha]_r[beta1]_r) x1^r F(+r, beta_i -> beta_i+2r)",
            Eq10 => "sum (-r)_k/(a_i-r+1)_k F(1+k; 1 joined)(t..t) = (a_i-r)/a_i F(1-a_i+r; 1-a_i joined)(t..t)",
            Eq11 => "sum (-r)_k/(b_i-r+1)_k F(1+k; 1 slot1)(t..t) = (b_i-r)/b_i F(1-b_i+r; 1-b_i slot1)(t..t)",
            Eq12 => "sum (-r)_k/(2-a_i-r)_k F(1+k; 1 joined)(t..t) = (a_i+r-1)/(a_i-1) F(a_i -> a_i+r)(t..t)",
            Eq13 => "sum (-r)_k/(2-b_i-r)_k F(1+k; 1 slot1)(t..t) = (b_i+r-1)/(b_i-1) F(b_i -> b_i+r)(t..t)",
            Eq14 => "sum (-r)_k/(2-2r)_k F(1+k; 1 joined)(t..t) = (2r-1)/(r-1) F(2r; r joined)(t..t)",
            Eq15 => "sum (-r)_k/(2-2r)_k F(1+k; 1 slot1)(t..t) = (2r-1)/(r-1) F(2r; r slot1)(t..t)",
            Eq16 => "sum (-r)_k/(1-2r)_k F(1+k; 1 joined)(t..t) = (1+r)_r/(r)_r F(1+2r; 1+r joined)(t..t)",
            Eq17 => "sum (-r)_k/(1-2r)_k F(1+k; 1 slot1)(t..t) = (1+r)_r/(r)_r F(1+2r; 1+r slot1)(t..t)",
            Eq18 => "sum C(r,k) (-1)^k (-r)_k/(1+a_i-r)_k F((j+r)/P; (j+r-k)/P joined)(x1^P..) = (-1)^r (1+a_i)_r/(-a_i)_r F((j+a_i+r)/P; (j+a_i)/P joined)(x1^P..)",
            Eq19 => "sum C(r,k) (-1)^k (-r)_k/(1+b_i-r)_k F((j+r)/P; (j+r-k)/P slot1)(x1^P,x2..) = (-1)^r (1+b_i)_r/(-b_i)_r F((j+b_i+r)/P; (j+b_i)/P slot1)(x1^P,x2..)",
            Eq20 => "sum C(r,k) (-1)^k (a_{i+1})_k/(a_{i+1}-a_i-r+1)_k F(a_{i+1} -> a_{i+1}+k) = (a_i)_r/(a_i-a_{i+1})_r F(a_i -> a_i+r)",
            Eq21 => "sum C(r,k) (-1)^k (b_{i+1})_k/(b_{i+1}-b_i-r+1)_k F(b_{i+1} -> b_{i+1}+k) = (b_i)_r/(b_i-b_{i+1})_r F(b_i -> b_i+r)",
        }
    }

    /// What the literal reading changes, for ids that have one.
    pub fn correction_note(self) -> Option<&'static str> {
        use IdentityId::*;
        Some(match self {
            Eq6 => "printed k-sum coefficient uses subscript r ([a]_r[b1^i]_r/([alpha]_r[beta1]_r)); it must be k",
            Eq8 => "printed x1^k sits on the left-hand side and x1^r is missing on the right; they belong as x1^r on the right only",
            Eq9 => "printed x1^k on the left-hand side does not belong there",
            Eq13 => "printed superscripts p+1, l+1 put the 1+k / 1 pair in the joined row; it belongs in the slot-1 row",
            Eq16 | Eq17 => "printed prefactor 2 equals (1+r)_r/(r)_r only for r >= 1; at r = 0 the factor is 1",
            Eq20 => "printed k-sum is missing the binomial C(r,k)",
            Eq21 => "printed k-sum is missing C(r,k) and drops b_i instead of b_{i+1} from the slot-1 row",
            _ => return None,
        })
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EQ{}", self.number())
    }
}

impl FromStr for IdentityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t
            .strip_prefix("EQ")
            .or_else(|| t.strip_prefix("eq"))
            .or_else(|| t.strip_prefix("Eq"))
            .unwrap_or(t);
        digits
            .parse::<u32>()
            .ok()
            .and_then(IdentityId::from_number)
            .ok_or_else(|| Error::Parse(format!("unknown identity id {s:?}")))
    }
}

impl Serialize for IdentityId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IdentityId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reading {
    #[default]
    Corrected,
    Literal,
}

impl FromStr for Reading {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Reading::Corrected),
            "literal" => Ok(Reading::Literal),
            _ => Err(Error::Parse(format!("unknown reading {s:?}"))),
        }
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reading::Corrected => "corrected",
            Reading::Literal => "literal",
        })
    }
}

fn default_index() -> usize {
    1
}

fn default_cap() -> u32 {
    DEFAULT_CAP
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityInstance {
    pub id: IdentityId,
    pub spec: KdfSpec,
    /// 1-based parameter index.
    #[serde(default = "default_index")]
    pub i: usize,
    pub r: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_alpha: Option<u32>,
    #[serde(default)]
    pub reading: Reading,
    #[serde(default = "default_cap")]
    pub cap: u32,
}

impl IdentityInstance {
    pub fn new(id: IdentityId, spec: KdfSpec, i: usize, r: u32) -> Self {
        let power_alpha = id.uses_power().then_some(2);
        let cap = power_alpha.map_or(DEFAULT_CAP, default_power_cap);
        IdentityInstance { id, spec, i, r, power_alpha, reading: Reading::Corrected, cap }
    }

    pub fn with_reading(mut self, reading: Reading) -> Self {
        self.reading = reading;
        self
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_power(mut self, power: u32) -> Self {
        self.power_alpha = Some(power);
        self
    }
}

/// Default cap for the power formulas: three nonzero layers of `x1^P`.
pub fn default_power_cap(power: u32) -> u32 {
    2 * power + 3
}

/// A quantity that must not vanish for a formula to be defined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Condition {
    /// `value != 0`
    Nonzero { label: String, value: Rational },
    /// `(base)_j != 0` for every `j <= len`
    PochNonzero { label: String, base: Rational, len: u32 },
}

impl Condition {
    pub fn holds(&self) -> bool {
        match self {
            Condition::Nonzero { value, .. } => !value.is_zero(),
            Condition::PochNonzero { base, len, .. } => !poch_vanishes_within(base, *len),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Condition::Nonzero { label, .. } | Condition::PochNonzero { label, .. } => label,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Nonzero { label, value } => write!(f, "{label} = {value} must be nonzero"),
            Condition::PochNonzero { label, base, len } => {
                write!(f, "({label})_j with {label} = {base} must be nonzero for j <= {len}")
            }
        }
    }
}

/// Exact coefficient `numer / prod(denominators)`, with the denominators
/// kept symbolic so that they can be scanned for zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coefficient {
    numer: Rational,
    denoms: Vec<Condition>,
}

impl Coefficient {
    pub fn one() -> Self {
        Coefficient { numer: Rational::one(), denoms: Vec::new() }
    }

    pub fn times(mut self, x: Rational) -> Self {
        self.numer *= x;
        self
    }

    pub fn over(mut self, label: impl Into<String>, value: Rational) -> Self {
        self.denoms.push(Condition::Nonzero { label: label.into(), value });
        self
    }

    pub fn over_poch(mut self, label: impl Into<String>, base: Rational, len: u32) -> Self {
        self.denoms.push(Condition::PochNonzero { label: label.into(), base, len });
        self
    }

    /// Divides by `[list]_len`, one condition per entry.
    pub fn over_list(mut self, label: &str, list: &[Rational], len: u32) -> Self {
        for (j, x) in list.iter().enumerate() {
            self = self.over_poch(format!("{label}_{}", j + 1), x.clone(), len);
        }
        self
    }

    pub fn denominators(&self) -> &[Condition] {
        &self.denoms
    }

    pub fn value(&self) -> Result<Rational> {
        let mut den = Rational::one();
        for d in &self.denoms {
            let v = match d {
                Condition::Nonzero { value, .. } => value.clone(),
                Condition::PochNonzero { base, len, .. } => poch(base, *len),
            };
            if v.is_zero() {
                return Err(Error::PoleInParameters(d.to_string()));
            }
            den *= v;
        }
        self.numer.checked_div(&den)
    }
}

/// `coef * x1^shift * F[spec]` under the form's binding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summand {
    pub coef: Coefficient,
    pub shift: u32,
    pub spec: KdfSpec,
}

/// Fully bound data of one formula instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityForm {
    pub binding: SlotBinding,
    pub var_count: usize,
    pub lhs: Vec<Summand>,
    pub rhs: Vec<Summand>,
}

impl IdentityForm {
    /// Every non-vanishing requirement of both sides at truncation `cap`:
    /// coefficient denominators, plus each denominator parameter of each
    /// expanded series up to the index it reaches within the cap.
    pub fn conditions(&self, cap: u32) -> Vec<Condition> {
        let mut out = Vec::new();
        for (side, terms) in [("lhs", &self.lhs), ("rhs", &self.rhs)] {
            for (k, s) in terms.iter().enumerate() {
                if s.shift > cap {
                    continue;
                }
                let tag = if side == "lhs" { format!("lhs[k={k}]") } else { "rhs".to_string() };
                for d in s.coef.denominators() {
                    out.push(relabel(d, &format!("{tag} coefficient: ")));
                }
                let (joined, per_slot) = self.binding.reach(cap - s.shift);
                for (j, x) in s.spec.alpha.iter().enumerate() {
                    out.push(Condition::PochNonzero {
                        label: format!("{tag} alpha_{}", j + 1),
                        base: x.clone(),
                        len: joined,
                    });
                }
                for (t, row) in s.spec.beta.iter().enumerate() {
                    for (j, x) in row.iter().enumerate() {
                        out.push(Condition::PochNonzero {
                            label: format!("{tag} beta^({})_{}", t + 1, j + 1),
                            base: x.clone(),
                            len: per_slot[t],
                        });
                    }
                }
            }
        }
        out
    }

    pub fn build(&self, terms: &[Summand], cap: u32) -> Result<TruncatedSeries> {
        let mut acc = TruncatedSeries::zero(self.var_count, cap);
        for s in terms {
            if s.shift > cap {
                continue;
            }
            let c = s.coef.value()?;
            if c.is_zero() {
                continue;
            }
            let f = expand(&s.spec, &self.binding, self.var_count, cap - s.shift)?;
            let shifted = f.lift_shift(&MultiIndex::unit(self.var_count, 0, s.shift))?;
            acc = acc.add(&shifted.scale(&c))?;
        }
        Ok(acc)
    }
}

fn relabel(c: &Condition, prefix: &str) -> Condition {
    match c {
        Condition::Nonzero { label, value } => {
            Condition::Nonzero { label: format!("{prefix}{label}"), value: value.clone() }
        }
        Condition::PochNonzero { label, base, len } => {
            Condition::PochNonzero { label: format!("{prefix}{label}"), base: base.clone(), len: *len }
        }
    }
}

fn prepend(list: &[Rational], front: Vec<Rational>) -> Vec<Rational> {
    let mut out = front;
    out.extend_from_slice(list);
    out
}

fn q(n: i64) -> Rational {
    Rational::from_integer(n)
}

fn binom_q(r: u32, k: u32) -> Rational {
    binom(r, k).into()
}

/// `(j + shift) / power` for `j = 1..=power`.
fn multiplication_row(shift: &Rational, power: u32) -> Vec<Rational> {
    let p = q(power as i64);
    (1..=power as i64)
        .map(|j| (q(j) + shift).checked_div(&p).expect("power >= 1"))
        .collect()
}

fn check_index(inst: &IdentityInstance) -> Result<()> {
    let shape = inst.spec.shape();
    if inst.id.index_domain() != IndexDomain::Unused {
        let range = inst.id.index_range(&shape);
        if range == 0 {
            return Err(Error::NotApplicable(format!("{} needs a nonempty index range for shape {shape:?}", inst.id)));
        }
        if inst.i == 0 || inst.i > range {
            return Err(Error::NotApplicable(format!("{}: index i = {} outside 1..={range}", inst.id, inst.i)));
        }
    }
    match (inst.id.uses_power(), inst.power_alpha) {
        (true, Some(p)) if p >= 2 => Ok(()),
        (true, Some(p)) => Err(Error::NotApplicable(format!("{}: power exponent {p} must be >= 2", inst.id))),
        (true, None) => Err(Error::NotApplicable(format!("{} requires powerAlpha", inst.id))),
        (false, Some(_)) => Err(Error::NotApplicable(format!("{} takes no powerAlpha", inst.id))),
        (false, None) => Ok(()),
    }
}

/// Turns an instance into its two sides.
pub fn describe(inst: &IdentityInstance) -> Result<IdentityForm> {
    use IdentityId::*;
    check_index(inst)?;
    let spec = &inst.spec;
    let n = spec.n();
    let r = inst.r;
    let rq = q(r as i64);
    let i = inst.i;
    let literal = inst.reading == Reading::Literal;
    let ks = 0..=r;

    let identity = (SlotBinding::identity(n), n);
    let collapsed = (SlotBinding::collapsed(n, 1), 1);

    let single = |coef: Coefficient, shift: u32, spec: KdfSpec| vec![Summand { coef, shift, spec }];

    let (binding, lhs, rhs) = match inst.id {
        Eq5 => {
            let ai = list_get(&spec.a, i)?.clone();
            let a_rest = list_drop(&spec.a, i)?;
            let lhs = ks
                .map(|k| {
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * list_poch(&a_rest, k) * list_poch(&spec.b[0], k))
                        .over_list("alpha", &spec.alpha, k)
                        .over_list("beta^(1)", &spec.beta[0], k);
                    Summand { coef, shift: k, spec: shifted_by(spec, k) }
                })
                .collect();
            let mut out = spec.clone();
            out.b[0] = prepend(&spec.b[0], vec![&ai + &rq]);
            out.beta[0] = prepend(&spec.beta[0], vec![ai]);
            (identity, lhs, single(Coefficient::one(), 0, out))
        }
        Eq6 => {
            let bi = list_get(&spec.b[0], i)?.clone();
            let b_rest = list_drop(&spec.b[0], i)?;
            let lhs = ks
                .map(|k| {
                    let j = if literal { r } else { k };
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * list_poch(&spec.a, j) * list_poch(&b_rest, j))
                        .over_list("alpha", &spec.alpha, j)
                        .over_list("beta^(1)", &spec.beta[0], j);
                    Summand { coef, shift: k, spec: shifted_by(spec, k) }
                })
                .collect();
            let mut out = spec.clone();
            out.b[0] = prepend(&b_rest, vec![&bi + &rq]);
            (identity, lhs, single(Coefficient::one(), 0, out))
        }
        Eq7 => {
            let bi = list_get(&spec.beta[0], i)?.clone();
            let lowered = &bi - &rq;
            let lhs = ks
                .map(|k| {
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * list_poch(&spec.a, k) * list_poch(&spec.b[0], k))
                        .over_poch("beta_i-r", lowered.clone(), k)
                        .over_list("alpha", &spec.alpha, k)
                        .over_list("beta^(1)", &spec.beta[0], k);
                    Summand { coef, shift: k, spec: shifted_by(spec, k) }
                })
                .collect();
            let mut out = spec.clone();
            out.beta[0] = prepend(&list_drop(&spec.beta[0], i)?, vec![lowered]);
            (identity, lhs, single(Coefficient::one(), 0, out))
        }
        Eq8 => {
            let bi = list_get(&spec.beta[0], i)?.clone();
            let rest = list_drop(&spec.beta[0], i)?;
            let lhs = ks
                .map(|k| {
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * Rational::sign_power(k) * poch(&(q(1) - &bi), k))
                        .over_poch("2-beta_i-r", q(2) - &bi - &rq, k);
                    let mut s = spec.clone();
                    s.beta[0] = prepend(&rest, vec![&bi - &q(k as i64)]);
                    Summand { coef, shift: if literal { k } else { 0 }, spec: s }
                })
                .collect();
            let shifted = shifted_by(spec, r);
            let coef = Coefficient::one()
                .times(Rational::sign_power(r) * list_poch(&spec.a, r) * list_poch(&spec.b[0], r))
                .over_poch("beta_i-1", &bi - &q(1), r)
                .over_list("alpha", &spec.alpha, r)
                .over_list("beta^(1)", &spec.beta[0], r);
            (identity, lhs, single(coef, if literal { 0 } else { r }, shifted))
        }
        Eq9 => {
            let bi = list_get(&spec.beta[0], i)?.clone();
            let rest = list_drop(&spec.beta[0], i)?;
            let lhs = ks
                .map(|k| {
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * Rational::sign_power(k) * poch(&(&bi + &rq - q(1)), k))
                        .over_poch("beta_i", bi.clone(), k);
                    let mut s = spec.clone();
                    s.beta[0] = prepend(&rest, vec![&bi + &q(k as i64)]);
                    Summand { coef, shift: if literal { k } else { 0 }, spec: s }
                })
                .collect();
            let mut shifted = shifted_by(spec, r);
            shifted.beta[0] = prepend(&list_shift(&rest, &rq), vec![&bi + q(2 * r as i64)]);
            let coef = Coefficient::one()
                .times(list_poch(&spec.a, r) * list_poch(&spec.b[0], r))
                .over_poch("beta_i+r", &bi + &rq, r)
                .over_list("alpha", &spec.alpha, r)
                .over_list("beta^(1)", &spec.beta[0], r);
            (identity, lhs, single(coef, r, shifted))
        }
        Eq10 | Eq12 | Eq14 | Eq16 | Eq11 | Eq13 | Eq15 | Eq17 => {
            let in_slot = matches!(inst.id, Eq11 | Eq13 | Eq15 | Eq17);
            // literal EQ13 puts the 1+k / 1 pair where its superscripts say
            let pair_in_slot = in_slot && !(inst.id == Eq13 && literal);
            let with_pair = |top: Rational, bottom: Rational, drop_upper: Option<usize>| -> Result<KdfSpec> {
                let mut s = spec.clone();
                if pair_in_slot || (in_slot && drop_upper.is_some()) {
                    let base = match drop_upper {
                        Some(j) => list_drop(&spec.b[0], j)?,
                        None => spec.b[0].clone(),
                    };
                    s.b[0] = prepend(&base, vec![top]);
                    if drop_upper.is_none() {
                        s.beta[0] = prepend(&spec.beta[0], vec![bottom]);
                    }
                } else {
                    let base = match drop_upper {
                        Some(j) => list_drop(&spec.a, j)?,
                        None => spec.a.clone(),
                    };
                    s.a = prepend(&base, vec![top]);
                    if drop_upper.is_none() {
                        s.alpha = prepend(&spec.alpha, vec![bottom]);
                    }
                }
                Ok(s)
            };
            let lhs_den = |label: &str, base: Rational| -> Result<Vec<Summand>> {
                ks.clone()
                    .map(|k| {
                        let coef = Coefficient::one()
                            .times(poch(&(-&rq), k))
                            .over_poch(label.to_string(), base.clone(), k);
                        Ok(Summand { coef, shift: 0, spec: with_pair(q(1 + k as i64), q(1), None)? })
                    })
                    .collect()
            };
            let param = |j: usize| -> Result<Rational> {
                Ok(if in_slot { list_get(&spec.b[0], j)?.clone() } else { list_get(&spec.a, j)?.clone() })
            };
            let (lhs, rhs) = match inst.id {
                Eq10 | Eq11 => {
                    let c = param(i)?;
                    let lhs = lhs_den("c_i-r+1", &c - &rq + q(1))?;
                    let coef = Coefficient::one().times(&c - &rq).over("c_i", c.clone());
                    let out = with_pair(q(1) - &c + &rq, q(1) - &c, None)?;
                    (lhs, single(coef, 0, out))
                }
                Eq12 | Eq13 => {
                    let c = param(i)?;
                    let lhs = lhs_den("2-c_i-r", q(2) - &c - &rq)?;
                    let coef = Coefficient::one().times(&c + &rq - q(1)).over("c_i-1", &c - q(1));
                    let out = with_pair(&c + &rq, q(0), Some(i))?;
                    (lhs, single(coef, 0, out))
                }
                Eq14 | Eq15 => {
                    let lhs = lhs_den("2-2r", q(2) - q(2 * r as i64))?;
                    let coef = Coefficient::one().times(q(2 * r as i64 - 1)).over("r-1", &rq - q(1));
                    let out = with_pair(q(2 * r as i64), rq.clone(), None)?;
                    (lhs, single(coef, 0, out))
                }
                _ => {
                    let lhs = lhs_den("1-2r", q(1) - q(2 * r as i64))?;
                    let coef = if literal {
                        Coefficient::one().times(q(2))
                    } else {
                        Coefficient::one().times(poch(&(q(1) + &rq), r)).over_poch("r", rq.clone(), r)
                    };
                    let out = with_pair(q(1 + 2 * r as i64), q(1) + &rq, None)?;
                    (lhs, single(coef, 0, out))
                }
            };
            // printed slot-1 variants take 1/x1, x2, ..., xn; the default
            // binds every slot to the one variable
            let binding = if in_slot && literal { identity } else { collapsed };
            (binding, lhs, rhs)
        }
        Eq18 | Eq19 => {
            let power = inst.power_alpha.expect("checked");
            let in_slot = inst.id == Eq19;
            let c = if in_slot { list_get(&spec.b[0], i)?.clone() } else { list_get(&spec.a, i)?.clone() };
            let place = |top: Vec<Rational>, bottom: Vec<Rational>| {
                let mut s = spec.clone();
                if in_slot {
                    s.b[0] = prepend(&spec.b[0], top);
                    s.beta[0] = prepend(&spec.beta[0], bottom);
                } else {
                    s.a = prepend(&spec.a, top);
                    s.alpha = prepend(&spec.alpha, bottom);
                }
                s
            };
            let lhs = ks
                .map(|k| {
                    let coef = Coefficient::one()
                        .times(binom_q(r, k) * Rational::sign_power(k) * poch(&(-&rq), k))
                        .over_poch("1+c_i-r", q(1) + &c - &rq, k);
                    let s = place(multiplication_row(&rq, power), multiplication_row(&(&rq - q(k as i64)), power));
                    Summand { coef, shift: 0, spec: s }
                })
                .collect();
            let coef = Coefficient::one()
                .times(Rational::sign_power(r) * poch(&(q(1) + &c), r))
                .over_poch("-c_i", -&c, r);
            let out = place(multiplication_row(&(&c + &rq), power), multiplication_row(&c, power));
            let binding = if in_slot {
                (SlotBinding::leading_power(n, power), n)
            } else {
                (SlotBinding::collapsed(n, power), 1)
            };
            (binding, lhs, single(coef, 0, out))
        }
        Eq20 | Eq21 => {
            let in_slot = inst.id == Eq21;
            let list = if in_slot { &spec.b[0] } else { &spec.a };
            let c = list_get(list, i)?.clone();
            let d = list_get(list, i + 1)?.clone();
            let set = |row: Vec<Rational>| {
                let mut s = spec.clone();
                if in_slot {
                    s.b[0] = row;
                } else {
                    s.a = row;
                }
                s
            };
            // literal EQ21 removes entry i (b_i) where entry i+1 is meant
            let dropped = if in_slot && literal { i } else { i + 1 };
            let lhs_rest = list_drop(list, dropped)?;
            let lhs = ks
                .map(|k| {
                    let weight = if literal { q(1) } else { binom_q(r, k) };
                    let coef = Coefficient::one()
                        .times(weight * Rational::sign_power(k) * poch(&d, k))
                        .over_poch("c_{i+1}-c_i-r+1", &d - &c - &rq + q(1), k);
                    Summand { coef, shift: 0, spec: set(prepend(&lhs_rest, vec![&d + q(k as i64)])) }
                })
                .collect();
            let coef = Coefficient::one().times(poch(&c, r)).over_poch("c_i-c_{i+1}", &c - &d, r);
            let out = set(prepend(&list_drop(list, i)?, vec![&c + &rq]));
            (identity, lhs, single(coef, 0, out))
        }
    };
    let (binding, var_count) = binding;
    Ok(IdentityForm { binding, var_count, lhs, rhs })
}

/// `a`, `alpha`, `b^(1)`, `beta^(1)` shifted by `k`; the matching
/// prefactor is carried by the summand's coefficient.
fn shifted_by(spec: &KdfSpec, k: u32) -> KdfSpec {
    let kq = q(k as i64);
    let mut s = spec.clone();
    s.a = list_shift(&spec.a, &kq);
    s.alpha = list_shift(&spec.alpha, &kq);
    s.b[0] = list_shift(&spec.b[0], &kq);
    s.beta[0] = list_shift(&spec.beta[0], &kq);
    s
}

/// All non-vanishing requirements of the instance at its cap.
pub fn preconditions(inst: &IdentityInstance) -> Result<Vec<Condition>> {
    Ok(describe(inst)?.conditions(inst.cap))
}

/// The requirements that fail.
pub fn violated_preconditions(inst: &IdentityInstance) -> Result<Vec<Condition>> {
    Ok(preconditions(inst)?.into_iter().filter(|c| !c.holds()).collect())
}

fn checked_form(inst: &IdentityInstance) -> Result<IdentityForm> {
    let form = describe(inst)?;
    if let Some(c) = form.conditions(inst.cap).into_iter().find(|c| !c.holds()) {
        return Err(Error::PoleInParameters(c.to_string()));
    }
    Ok(form)
}

pub fn build_lhs(inst: &IdentityInstance) -> Result<TruncatedSeries> {
    let form = checked_form(inst)?;
    form.build(&form.lhs, inst.cap)
}

pub fn build_rhs(inst: &IdentityInstance) -> Result<TruncatedSeries> {
    let form = checked_form(inst)?;
    form.build(&form.rhs, inst.cap)
}

/// Both sides at once.
pub fn build_sides(inst: &IdentityInstance) -> Result<(TruncatedSeries, TruncatedSeries)> {
    let form = checked_form(inst)?;
    Ok((form.build(&form.lhs, inst.cap)?, form.build(&form.rhs, inst.cap)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Pole,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Pole => "pole",
            Status::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub monomial: MultiIndex,
    pub lhs: Rational,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub status: Status,
    pub cap_checked: u32,
    pub coefficients_compared: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<Mismatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl VerificationReport {
    fn bare(status: Status, cap: u32, detail: Option<String>) -> Self {
        VerificationReport { status, cap_checked: cap, coefficients_compared: 0, first_mismatch: None, detail }
    }

    /// Compares two already-built sides.
    pub fn compare(lhs: &TruncatedSeries, rhs: &TruncatedSeries) -> Result<Self> {
        let compared = monomial_count(lhs.var_count(), lhs.cap());
        let first_mismatch = lhs
            .first_difference(rhs)?
            .map(|(monomial, lhs, rhs)| Mismatch { monomial, lhs, rhs });
        Ok(VerificationReport {
            status: if first_mismatch.is_some() { Status::Fail } else { Status::Pass },
            cap_checked: lhs.cap(),
            coefficients_compared: compared,
            first_mismatch,
            detail: None,
        })
    }

    pub fn from_error(e: &Error, cap: u32) -> Self {
        match e {
            Error::NotApplicable(m) => Self::bare(Status::NotApplicable, cap, Some(m.clone())),
            Error::PoleInParameters(m) => Self::bare(Status::Pole, cap, Some(m.clone())),
            other => Self::bare(Status::NotApplicable, cap, Some(other.to_string())),
        }
    }
}

pub fn verify(inst: &IdentityInstance) -> VerificationReport {
    match build_sides(inst).and_then(|(l, r)| VerificationReport::compare(&l, &r)) {
        Ok(rep) => rep,
        Err(e) => VerificationReport::from_error(&e, inst.cap),
    }
}

/// Mixes a parent seed with a stream label and an index into a child seed
/// (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A rational with numerator in `[-9, 9]` and denominator in `{1, 2, 3}`.
pub fn random_rational<R: Rng>(rng: &mut R) -> Rational {
    let num = rng.gen_range(-9i64..=9);
    let den = rng.gen_range(1i64..=3);
    Rational::new(num, den).expect("nonzero denominator")
}

fn random_list<R: Rng>(rng: &mut R, len: usize) -> Vec<Rational> {
    (0..len).map(|_| random_rational(rng)).collect()
}

/// Smallest shape requirements of an id, as `(p, q_1, m_1)` lower bounds.
fn shape_floor(id: IdentityId) -> (usize, usize, usize) {
    match id.index_domain() {
        IndexDomain::Joined { short } => (1 + short, 0, 0),
        IndexDomain::SlotOneUpper { short } => (0, 1 + short, 0),
        IndexDomain::SlotOneLower => (0, 0, 1),
        IndexDomain::Unused => (0, 0, 0),
    }
}

/// A small random shape valid for `id`: `n` in 1..=3, list lengths in 0..=2.
pub fn random_shape<R: Rng>(rng: &mut R, id: IdentityId) -> Shape {
    let n = rng.gen_range(1..=3usize);
    let (p0, q0, m0) = shape_floor(id);
    let mut shape = Shape {
        p: rng.gen_range(0..=2usize).max(p0),
        l: rng.gen_range(0..=2usize),
        q: (0..n).map(|_| rng.gen_range(0..=2usize)).collect(),
        m: (0..n).map(|_| rng.gen_range(0..=2usize)).collect(),
    };
    shape.q[0] = shape.q[0].max(q0);
    shape.m[0] = shape.m[0].max(m0);
    shape
}

/// Draws a pole-free instance of `id` with the given shape. Deterministic in
/// `seed`. The power formulas use `powerAlpha` in {2, 3} and a cap of at
/// least `2 * powerAlpha + 3`.
pub fn random_instance(
    seed: u64,
    id: IdentityId,
    shape: &Shape,
    r_max: u32,
    cap: u32,
) -> Result<IdentityInstance> {
    random_instance_with_budget(seed, id, shape, r_max, cap, DEFAULT_RETRIES)
}

pub fn random_instance_with_budget(
    seed: u64,
    id: IdentityId,
    shape: &Shape,
    r_max: u32,
    cap: u32,
    budget: usize,
) -> Result<IdentityInstance> {
    if shape.n() == 0 || shape.q.len() != shape.m.len() {
        return Err(Error::ShapeMismatch(format!("bad shape {shape:?}")));
    }
    let range = id.index_range(shape);
    if range == 0 {
        return Err(Error::NotApplicable(format!("{id} has no admissible index for shape {shape:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let spec = KdfSpec::new(
            random_list(&mut rng, shape.p),
            random_list(&mut rng, shape.l),
            shape.q.iter().map(|&len| random_list(&mut rng, len)).collect(),
            shape.m.iter().map(|&len| random_list(&mut rng, len)).collect(),
        )?;
        let i = rng.gen_range(1..=range);
        let r = rng.gen_range(0..=r_max);
        let mut inst = IdentityInstance::new(id, spec, i, r).with_cap(cap);
        if id.uses_power() {
            let power = rng.gen_range(2..=3u32);
            inst = inst.with_power(power).with_cap(cap.max(default_power_cap(power)));
        }
        if violated_preconditions(&inst)?.is_empty() {
            return Ok(inst);
        }
    }
    Err(Error::ExhaustedRetries(budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qs(v: &[&str]) -> Vec<Rational> {
        v.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn spec(a: &[&str], alpha: &[&str], b: &[&[&str]], beta: &[&[&str]]) -> KdfSpec {
        KdfSpec::new(qs(a), qs(alpha), b.iter().map(|r| qs(r)).collect(), beta.iter().map(|r| qs(r)).collect())
            .unwrap()
    }

    fn generic() -> KdfSpec {
        spec(&["1/2", "-7/3"], &["5/2"], &[&["1/3", "2"], &["-5/2"]], &[&["7/2", "-1/3"], &["4/3"]])
    }

    #[test]
    fn id_round_trip() {
        for id in IdentityId::ALL {
            assert_eq!(id.to_string().parse::<IdentityId>().unwrap(), id);
        }
        assert!("EQ4".parse::<IdentityId>().is_err());
        assert!("EQ22".parse::<IdentityId>().is_err());
    }

    #[test]
    fn r_zero_sides_agree() {
        for id in IdentityId::ALL {
            if matches!(id, IdentityId::Eq14 | IdentityId::Eq15) {
                continue;
            }
            let inst = IdentityInstance::new(id, generic(), 1, 0);
            let (l, r) = build_sides(&inst).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert_eq!(l, r, "{id}");
            assert_eq!(verify(&inst).status, Status::Pass, "{id}");
        }
    }

    #[test]
    fn r_zero_for_eq14_is_a_pole() {
        // the right-hand side carries the lower parameter r = 0
        for id in [IdentityId::Eq14, IdentityId::Eq15] {
            assert_eq!(verify(&IdentityInstance::new(id, generic(), 1, 0)).status, Status::Pole);
        }
    }

    #[test]
    fn eq14_r_one_is_a_pole() {
        let inst = IdentityInstance::new(IdentityId::Eq14, generic(), 1, 1);
        let bad = violated_preconditions(&inst).unwrap();
        assert!(bad.iter().any(|c| c.label().contains("r-1")), "{bad:?}");
        assert_eq!(verify(&inst).status, Status::Pole);
    }

    #[test]
    fn eq7_pochhammer_zero_scan() {
        let s = spec(&["1/2"], &[], &[&["1/3"]], &[&["2"]]);
        let inst = IdentityInstance::new(IdentityId::Eq7, s, 1, 3);
        let bad = violated_preconditions(&inst).unwrap();
        assert!(bad.iter().any(|c| c.label().contains("beta_i-r")), "{bad:?}");
    }

    #[test]
    fn eq5_generic_has_no_violation() {
        let inst = IdentityInstance::new(IdentityId::Eq5, generic(), 2, 3);
        assert!(violated_preconditions(&inst).unwrap().is_empty());
    }

    #[test]
    fn eq5_worked_instance_passes() {
        let s = spec(&["1/2"], &[], &[&["1"], &["1"]], &[&["3/2"], &["2"]]);
        let inst = IdentityInstance::new(IdentityId::Eq5, s, 1, 2).with_cap(5);
        let rep = verify(&inst);
        assert_eq!(rep.status, Status::Pass);
        assert_eq!(rep.coefficients_compared, 21);
    }

    #[test]
    fn eq6_literal_fails_corrected_passes() {
        let inst = IdentityInstance::new(IdentityId::Eq6, generic(), 2, 2);
        assert_eq!(verify(&inst).status, Status::Pass);
        let lit = verify(&inst.clone().with_reading(Reading::Literal));
        assert_eq!(lit.status, Status::Fail);
        let m = lit.first_mismatch.unwrap();
        assert_eq!(m.monomial, MultiIndex::zero(2));
    }

    #[test]
    fn not_applicable_shapes() {
        let s = spec(&["1/2"], &[], &[&["1/3"]], &[&[]]);
        for (id, i) in [(IdentityId::Eq20, 1), (IdentityId::Eq21, 1), (IdentityId::Eq7, 1), (IdentityId::Eq5, 2)] {
            assert_eq!(verify(&IdentityInstance::new(id, s.clone(), i, 1)).status, Status::NotApplicable, "{id}");
        }
        let mut inst = IdentityInstance::new(IdentityId::Eq18, s.clone(), 1, 1);
        inst.power_alpha = None;
        assert_eq!(verify(&inst).status, Status::NotApplicable);
        inst.power_alpha = Some(1);
        assert_eq!(verify(&inst).status, Status::NotApplicable);
        let inst = IdentityInstance::new(IdentityId::Eq5, s, 1, 1).with_power(2);
        assert_eq!(verify(&inst).status, Status::NotApplicable);
    }

    #[test]
    fn random_instance_is_deterministic_and_pole_free() {
        let shape = Shape { p: 2, l: 1, q: vec![1, 2], m: vec![2, 0] };
        for id in IdentityId::ALL {
            if id.index_range(&shape) == 0 {
                continue;
            }
            let a = random_instance(42, id, &shape, 4, 7).unwrap();
            let b = random_instance(42, id, &shape, 4, 7).unwrap();
            assert_eq!(a, b);
            assert!(violated_preconditions(&a).unwrap().is_empty());
        }
    }

    #[test]
    fn random_instance_rejects_bad_shape() {
        let shape = Shape { p: 1, l: 0, q: vec![1], m: vec![0] };
        assert!(matches!(
            random_instance(1, IdentityId::Eq20, &shape, 2, 5),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn exhausted_retries() {
        // EQ14 with r_max = 1 can never avoid r in {0, 1}
        let shape = Shape { p: 0, l: 0, q: vec![0], m: vec![0] };
        assert_eq!(
            random_instance(3, IdentityId::Eq14, &shape, 1, 5),
            Err(Error::ExhaustedRetries(DEFAULT_RETRIES))
        );
    }

    #[test]
    fn instance_json_shape() {
        let inst = IdentityInstance::new(IdentityId::Eq18, spec(&["1/2"], &[], &[&[]], &[&[]]), 1, 2);
        let json = serde_json::to_string(&inst).unwrap();
        assert_eq!(
            json,
            r#"{"id":"EQ18","spec":{"n":1,"a":["1/2"],"alpha":[],"b":[[]],"beta":[[]]},"i":1,"r":2,"powerAlpha":2,"reading":"corrected","cap":7}"#
        );
        let back: IdentityInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn report_json_shape() {
        let inst = IdentityInstance::new(IdentityId::Eq6, generic(), 1, 2).with_reading(Reading::Literal);
        let rep = verify(&inst);
        let v: serde_json::Value = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["status"], "fail");
        assert_eq!(v["capChecked"], 7);
        assert!(v["firstMismatch"]["monomial"].is_array());
        assert!(v["firstMismatch"]["lhs"].is_string());
        let pass = verify(&inst.with_reading(Reading::Corrected));
        let v: serde_json::Value = serde_json::to_value(&pass).unwrap();
        assert!(v.get("firstMismatch").is_none());
    }
}
