//! Lauricella-type families as parameter bundles, and the four concluding
//! summation formulas for `F_B`, `Xi_1`, `F_D` and `Phi_D`.
//!
//! Each concluding formula is assembled from [`family_spec`] in the
//! family's own parameters and checked exactly. The same check also builds
//! the general formula it specializes (EQ6 or EQ16) over the same bundle
//! and requires the two pairs of sides to be identical series.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_arith::{binom, poch, Rational};
use crate::identities::{
    build_sides, random_rational, Coefficient, IdentityForm, IdentityId, IdentityInstance, Reading, Status,
    Summand, VerificationReport, DEFAULT_RETRIES,
};
use crate::kdf_core::{KdfSpec, SlotBinding};
use crate::mseries::TruncatedSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "F_B")]
    FB,
    #[serde(rename = "F_D")]
    FD,
    Xi1,
    #[serde(rename = "Phi_D")]
    PhiD,
    Phi2,
    Psi2,
    Phi3,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 7] = [
        FamilyKind::FB,
        FamilyKind::FD,
        FamilyKind::Xi1,
        FamilyKind::PhiD,
        FamilyKind::Phi2,
        FamilyKind::Psi2,
        FamilyKind::Phi3,
    ];

    /// Required lengths of the `a`, `b`, `c` lists for `n` variables.
    pub fn arity(self, n: usize) -> (usize, usize, usize) {
        let below = n.saturating_sub(1);
        match self {
            FamilyKind::FB => (n, n, 1),
            FamilyKind::FD => (1, n, 1),
            FamilyKind::Xi1 => (n, below, 1),
            FamilyKind::PhiD => (1, below, 1),
            FamilyKind::Phi2 => (0, n, 1),
            FamilyKind::Psi2 => (1, 0, n),
            FamilyKind::Phi3 => (0, 1, 1),
        }
    }
}

/// Parameters of a family member. `c` holds one entry except for `Psi2`,
/// which has one lower parameter per variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyParams {
    #[serde(default)]
    pub a: Vec<Rational>,
    #[serde(default)]
    pub b: Vec<Rational>,
    #[serde(default)]
    pub c: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LowerParam {
    One(Rational),
    Many(Vec<Rational>),
}

/// JSON form `{kind, n, a, b, c}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub kind: FamilyKind,
    pub n: usize,
    #[serde(default)]
    pub a: Vec<Rational>,
    #[serde(default)]
    pub b: Vec<Rational>,
    pub c: LowerParam,
}

impl FamilyDoc {
    pub fn params(&self) -> FamilyParams {
        let c = match &self.c {
            LowerParam::One(x) => vec![x.clone()],
            LowerParam::Many(v) => v.clone(),
        };
        FamilyParams { a: self.a.clone(), b: self.b.clone(), c }
    }

    pub fn spec(&self) -> Result<KdfSpec> {
        family_spec(self.kind, &self.params(), self.n)
    }
}

/// The bundle whose expansion is the family's defining series.
pub fn family_spec(kind: FamilyKind, params: &FamilyParams, n: usize) -> Result<KdfSpec> {
    if n == 0 {
        return Err(Error::ShapeMismatch("a family needs at least one variable".into()));
    }
    let (na, nb, nc) = kind.arity(n);
    if params.a.len() != na || params.b.len() != nb || params.c.len() != nc {
        return Err(Error::ShapeMismatch(format!(
            "{kind:?} with n = {n} takes (a, b, c) lengths ({na}, {nb}, {nc}), got ({}, {}, {})",
            params.a.len(),
            params.b.len(),
            params.c.len()
        )));
    }
    let (a, b, c) = (&params.a, &params.b, &params.c);
    let empty = vec![Vec::new(); n];
    let spec = match kind {
        FamilyKind::FB => {
            KdfSpec::new(vec![], c.clone(), (0..n).map(|t| vec![a[t].clone(), b[t].clone()]).collect(), empty)
        }
        FamilyKind::FD | FamilyKind::Phi2 => {
            KdfSpec::new(a.clone(), c.clone(), b.iter().map(|x| vec![x.clone()]).collect(), empty)
        }
        FamilyKind::Xi1 => {
            let rows = (0..n)
                .map(|t| {
                    let mut row = vec![a[t].clone()];
                    row.extend(b.get(t).cloned());
                    row
                })
                .collect();
            KdfSpec::new(vec![], c.clone(), rows, empty)
        }
        FamilyKind::PhiD => {
            let rows = (0..n).map(|t| b.get(t).cloned().into_iter().collect()).collect();
            KdfSpec::new(a.clone(), c.clone(), rows, empty)
        }
        FamilyKind::Psi2 => {
            KdfSpec::new(a.clone(), vec![], empty.clone(), c.iter().map(|x| vec![x.clone()]).collect())
        }
        FamilyKind::Phi3 => {
            let mut rows = empty.clone();
            rows[0] = b.clone();
            KdfSpec::new(vec![], c.clone(), rows, empty)
        }
    }?;
    Ok(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConclusionId {
    Eq22,
    Eq23,
    Eq24,
    Eq25,
}

impl ConclusionId {
    pub const ALL: [ConclusionId; 4] = [ConclusionId::Eq22, ConclusionId::Eq23, ConclusionId::Eq24, ConclusionId::Eq25];

    pub fn family(self) -> FamilyKind {
        match self {
            ConclusionId::Eq22 => FamilyKind::FB,
            ConclusionId::Eq23 => FamilyKind::Xi1,
            ConclusionId::Eq24 => FamilyKind::FD,
            ConclusionId::Eq25 => FamilyKind::PhiD,
        }
    }

    /// The general formula this one specializes.
    pub fn general(self) -> IdentityId {
        match self {
            ConclusionId::Eq22 | ConclusionId::Eq23 => IdentityId::Eq6,
            ConclusionId::Eq24 | ConclusionId::Eq25 => IdentityId::Eq16,
        }
    }

    pub fn correction_note(self) -> &'static str {
        match self {
            ConclusionId::Eq22 | ConclusionId::Eq23 => {
                "printed right-hand side binds every argument to x1; the specialization gives x1, ..., xn"
            }
            ConclusionId::Eq24 | ConclusionId::Eq25 => {
                "printed k-sum uses 1+r where 1+k is meant, and prefactor 2 where (1+r)_r/(r)_r is meant"
            }
        }
    }

    /// Smallest number of variables the formula makes sense for.
    pub fn min_n(self) -> usize {
        match self {
            ConclusionId::Eq23 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ConclusionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EQ{}", *self as u32 + 22)
    }
}

impl FromStr for ConclusionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConclusionId::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown conclusion id {s:?}")))
    }
}

impl Serialize for ConclusionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConclusionId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Free parameters of a concluding formula. EQ22/EQ23 use `a`, `b`, `c`;
/// EQ24/EQ25 only `b` (their joined pair is fixed by the formula).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConclusionInstance {
    pub which: ConclusionId,
    pub n: usize,
    #[serde(default)]
    pub a: Vec<Rational>,
    #[serde(default)]
    pub b: Vec<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Rational>,
    pub r: u32,
    #[serde(default)]
    pub reading: Reading,
    #[serde(default = "default_cap")]
    pub cap: u32,
}

fn default_cap() -> u32 {
    crate::identities::DEFAULT_CAP
}

fn q(n: i64) -> Rational {
    Rational::from_integer(n)
}

impl ConclusionInstance {
    fn c(&self) -> Result<Rational> {
        self.c.clone().ok_or_else(|| Error::ShapeMismatch(format!("{} needs c", self.which)))
    }

    fn check_shape(&self) -> Result<()> {
        if self.n < self.which.min_n() {
            return Err(Error::NotApplicable(format!("{} needs n >= {}", self.which, self.which.min_n())));
        }
        let (na, nb, _) = self.which.family().arity(self.n);
        let na = if matches!(self.which, ConclusionId::Eq24 | ConclusionId::Eq25) { 0 } else { na };
        if self.a.len() != na || self.b.len() != nb {
            return Err(Error::ShapeMismatch(format!(
                "{} with n = {} takes {na} a's and {nb} b's",
                self.which, self.n
            )));
        }
        Ok(())
    }

    fn family(&self, a: Vec<Rational>, b: Vec<Rational>, c: Rational) -> Result<KdfSpec> {
        family_spec(self.which.family(), &FamilyParams { a, b, c: vec![c] }, self.n)
    }

    /// Both sides written in the family's own parameters.
    pub fn form(&self) -> Result<IdentityForm> {
        self.check_shape()?;
        let n = self.n;
        let r = self.r;
        let rq = q(r as i64);
        let literal = self.reading == Reading::Literal;
        match self.which {
            ConclusionId::Eq22 | ConclusionId::Eq23 => {
                let c = self.c()?;
                let b1 = self.b.first().cloned().ok_or_else(|| Error::NotApplicable("b_1 is required".into()))?;
                let lhs = (0..=r)
                    .map(|k| {
                        let kq = q(k as i64);
                        let mut a = self.a.clone();
                        a[0] = &a[0] + &kq;
                        let mut b = self.b.clone();
                        b[0] = &b[0] + &kq;
                        let coef = Coefficient::one()
                            .times(Rational::from(binom(r, k)) * poch(&b1, k))
                            .over_poch("c", c.clone(), k);
                        Ok(Summand { coef, shift: k, spec: self.family(a, b, &c + &kq)? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut a = self.a.clone();
                a[0] = &a[0] + &rq;
                let rhs = vec![Summand { coef: Coefficient::one(), shift: 0, spec: self.family(a, self.b.clone(), c)? }];
                Ok(IdentityForm { binding: SlotBinding::identity(n), var_count: n, lhs, rhs })
            }
            ConclusionId::Eq24 | ConclusionId::Eq25 => {
                let lhs = (0..=r)
                    .map(|k| {
                        let top = if literal { q(1) + &rq } else { q(1 + k as i64) };
                        let coef = Coefficient::one()
                            .times(poch(&(-&rq), k))
                            .over_poch("1-2r", q(1 - 2 * r as i64), k);
                        Ok(Summand { coef, shift: 0, spec: self.family(vec![top], self.b.clone(), q(1))? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let coef = if literal {
                    Coefficient::one().times(q(2))
                } else {
                    Coefficient::one().times(poch(&(q(1) + &rq), r)).over_poch("r", rq.clone(), r)
                };
                let spec = self.family(vec![q(1 + 2 * r as i64)], self.b.clone(), q(1) + &rq)?;
                Ok(IdentityForm {
                    binding: SlotBinding::collapsed(n, 1),
                    var_count: 1,
                    lhs,
                    rhs: vec![Summand { coef, shift: 0, spec }],
                })
            }
        }
    }

    /// Builds both sides. The literal EQ22/EQ23 right-hand side takes every
    /// argument equal to x1.
    pub fn sides(&self) -> Result<(TruncatedSeries, TruncatedSeries)> {
        let form = self.form()?;
        if let Some(c) = form.conditions(self.cap).into_iter().find(|c| !c.holds()) {
            return Err(Error::PoleInParameters(c.to_string()));
        }
        let lhs = form.build(&form.lhs, self.cap)?;
        let rhs_form = match (self.which, self.reading) {
            (ConclusionId::Eq22 | ConclusionId::Eq23, Reading::Literal) => {
                IdentityForm { binding: SlotBinding::collapsed(self.n, 1), ..form.clone() }
            }
            _ => form.clone(),
        };
        let rhs = rhs_form.build(&rhs_form.rhs, self.cap)?;
        Ok((lhs, rhs))
    }

    /// The general-formula instance this one specializes, over the same
    /// parameter bundle.
    pub fn general_instance(&self) -> Result<IdentityInstance> {
        self.check_shape()?;
        let (spec, i) = match self.which {
            ConclusionId::Eq22 | ConclusionId::Eq23 => (self.family(self.a.clone(), self.b.clone(), self.c()?)?, 1),
            ConclusionId::Eq24 | ConclusionId::Eq25 => {
                // the family with its joined pair removed; EQ16 re-inserts it
                let mut s = self.family(vec![q(1)], self.b.clone(), q(1))?;
                s.a.clear();
                s.alpha.clear();
                (s, 1)
            }
        };
        Ok(IdentityInstance::new(self.which.general(), spec, i, self.r)
            .with_cap(self.cap)
            .with_reading(Reading::Corrected))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConclusionReport {
    pub which: ConclusionId,
    pub report: VerificationReport,
    /// Whether both sides coincide with the general formula's sides.
    pub consistent: bool,
}

pub fn check_conclusion(inst: &ConclusionInstance) -> ConclusionReport {
    let outcome = inst.sides().and_then(|(l, r)| Ok((VerificationReport::compare(&l, &r)?, l, r)));
    match outcome {
        Ok((report, l, r)) => {
            let consistent = inst
                .general_instance()
                .and_then(|g| build_sides(&g))
                .map(|(gl, gr)| gl == l && gr == r)
                .unwrap_or(false);
            ConclusionReport { which: inst.which, report, consistent }
        }
        Err(e) => ConclusionReport {
            which: inst.which,
            report: VerificationReport::from_error(&e, inst.cap),
            consistent: false,
        },
    }
}

impl ConclusionReport {
    pub fn passed(&self) -> bool {
        self.report.status == Status::Pass && self.consistent
    }
}

/// A pole-free random instance, deterministic in `seed`. `n` is drawn from
/// `min_n..=3`.
pub fn random_conclusion(seed: u64, which: ConclusionId, r_max: u32, cap: u32) -> Result<ConclusionInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..DEFAULT_RETRIES {
        let n = rng.gen_range(which.min_n()..=3);
        let (na, nb, _) = which.family().arity(n);
        let uses_ac = matches!(which, ConclusionId::Eq22 | ConclusionId::Eq23);
        let a = if uses_ac { (0..na).map(|_| random_rational(&mut rng)).collect() } else { vec![] };
        let b = (0..nb).map(|_| random_rational(&mut rng)).collect();
        let c = uses_ac.then(|| random_rational(&mut rng));
        let r = rng.gen_range(0..=r_max);
        let inst = ConclusionInstance { which, n, a, b, c, r, reading: Reading::Corrected, cap };
        let form = inst.form()?;
        if form.conditions(cap).iter().all(|c| c.holds()) {
            return Ok(inst);
        }
    }
    Err(Error::ExhaustedRetries(DEFAULT_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::factorial;
    use crate::kdf_core::expand;
    use crate::mseries::MultiIndex;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn params(a: &[&str], b: &[&str], c: &[&str]) -> FamilyParams {
        FamilyParams {
            a: a.iter().map(|s| r(s)).collect(),
            b: b.iter().map(|s| r(s)).collect(),
            c: c.iter().map(|s| r(s)).collect(),
        }
    }

    #[test]
    fn fd_one_variable_is_gauss() {
        let spec = family_spec(FamilyKind::FD, &params(&["1/3"], &["-5/2"], &["7/4"]), 1).unwrap();
        let f = expand(&spec, &SlotBinding::identity(1), 1, 6).unwrap();
        for s in 0..=6u32 {
            let want = (poch(&r("1/3"), s) * poch(&r("-5/2"), s))
                .checked_div(&(poch(&r("7/4"), s) * Rational::from(factorial(s))))
                .unwrap();
            assert_eq!(f.coefficient(&MultiIndex::new(vec![s])), want);
        }
    }

    #[test]
    fn fb_and_fd_agree_for_one_variable() {
        let fb = family_spec(FamilyKind::FB, &params(&["1/3"], &["2"], &["5"]), 1).unwrap();
        let fd = family_spec(FamilyKind::FD, &params(&["1/3"], &["2"], &["5"]), 1).unwrap();
        let bind = SlotBinding::identity(1);
        assert_eq!(expand(&fb, &bind, 1, 6).unwrap(), expand(&fd, &bind, 1, 6).unwrap());
    }

    #[test]
    fn xi1_two_variables() {
        let p = params(&["1/2", "-3"], &["4/3"], &["5/2"]);
        let spec = family_spec(FamilyKind::Xi1, &p, 2).unwrap();
        let f = expand(&spec, &SlotBinding::identity(2), 2, 4).unwrap();
        for s1 in 0..=4u32 {
            for s2 in 0..=4 - s1 {
                let num = poch(&p.a[0], s1) * poch(&p.b[0], s1) * poch(&p.a[1], s2);
                let den = poch(&p.c[0], s1 + s2) * Rational::from(factorial(s1)) * Rational::from(factorial(s2));
                let want = num.checked_div(&den).unwrap();
                assert_eq!(f.coefficient(&MultiIndex::new(vec![s1, s2])), want);
            }
        }
    }

    #[test]
    fn arity_is_enforced() {
        assert!(matches!(
            family_spec(FamilyKind::FB, &params(&["1"], &["1"], &["1"]), 2),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(family_spec(FamilyKind::Psi2, &params(&["1"], &[], &["1", "2"]), 2).is_ok());
    }

    #[test]
    fn family_doc_json() {
        let doc: FamilyDoc =
            serde_json::from_str(r#"{"kind":"F_D","n":2,"a":["1/2"],"b":["1/3","2"],"c":"3/2"}"#).unwrap();
        assert_eq!(doc.spec().unwrap().shape().q, vec![1, 1]);
        let psi: FamilyDoc =
            serde_json::from_str(r#"{"kind":"Psi2","n":2,"a":["1/2"],"c":["3/2","2"]}"#).unwrap();
        assert_eq!(psi.spec().unwrap().shape().m, vec![1, 1]);
    }

    fn eq24(b: &[&str], r_: u32) -> ConclusionInstance {
        ConclusionInstance {
            which: ConclusionId::Eq24,
            n: b.len(),
            a: vec![],
            b: b.iter().map(|s| r(s)).collect(),
            c: None,
            r: r_,
            reading: Reading::Corrected,
            cap: 6,
        }
    }

    #[test]
    fn eq24_worked_instance() {
        let rep = check_conclusion(&eq24(&["1/2", "1/3"], 2));
        assert_eq!(rep.report.status, Status::Pass);
        assert!(rep.consistent);
    }

    #[test]
    fn eq22_r_zero_and_eq23_pole() {
        let base = ConclusionInstance {
            which: ConclusionId::Eq22,
            n: 2,
            a: vec![r("1/2"), r("2/3")],
            b: vec![r("-1/3"), r("5")],
            c: Some(r("7/2")),
            r: 0,
            reading: Reading::Corrected,
            cap: 6,
        };
        assert!(check_conclusion(&base).passed());
        let xi = ConclusionInstance {
            which: ConclusionId::Eq23,
            a: vec![r("1/2"), r("2/3")],
            b: vec![r("-1/3")],
            c: Some(r("-1")),
            r: 3,
            ..base
        };
        assert_eq!(check_conclusion(&xi).report.status, Status::Pole);
    }

    #[test]
    fn literal_readings_fail() {
        let mut inst = eq24(&["1/2", "1/3"], 2);
        inst.reading = Reading::Literal;
        assert_eq!(check_conclusion(&inst).report.status, Status::Fail);
        let fb = ConclusionInstance {
            which: ConclusionId::Eq22,
            n: 2,
            a: vec![r("1/2"), r("2/3")],
            b: vec![r("-1/3"), r("5")],
            c: Some(r("7/2")),
            r: 1,
            reading: Reading::Literal,
            cap: 6,
        };
        let rep = check_conclusion(&fb);
        assert_eq!(rep.report.status, Status::Fail);
        assert!(rep.report.first_mismatch.is_some());
    }

    #[test]
    fn random_conclusions_pass() {
        for which in ConclusionId::ALL {
            for k in 0..5 {
                let inst = random_conclusion(100 + k, which, 4, 6).unwrap();
                let rep = check_conclusion(&inst);
                assert!(rep.passed(), "{which} {inst:?} {rep:?}");
            }
        }
    }
}
