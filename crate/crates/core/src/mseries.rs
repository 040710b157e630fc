//! Sparse multivariate power series truncated at a total-degree cap.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_arith::Rational;

/// Exponent vector of a monomial.
///
/// Ordered graded-lexicographically: lower total degree first, then by
/// decreasing exponent of the first variable, then the second, and so on.
/// So `1 < x1 < x2 < x1^2 < x1 x2 < x2^2`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// The monomial `x_var^power` in `len` variables.
    pub fn unit(len: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; len];
        e[var] = power;
        MultiIndex(e)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, var: usize) -> u32 {
        self.0[var]
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", v + 1)?;
            } else {
                write!(f, "x{}^{}", v + 1, e)?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// A power series in `var_count` variables known exactly up to total degree
/// `cap`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruncatedSeries {
    var_count: usize,
    cap: u32,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl TruncatedSeries {
    pub fn zero(var_count: usize, cap: u32) -> Self {
        TruncatedSeries { var_count, cap, terms: BTreeMap::new() }
    }

    pub fn one(var_count: usize, cap: u32) -> Self {
        Self::constant(var_count, cap, Rational::one())
    }

    pub fn constant(var_count: usize, cap: u32, c: Rational) -> Self {
        let mut s = Self::zero(var_count, cap);
        s.add_term(MultiIndex::zero(var_count), c);
        s
    }

    /// Builds a series from `(index, coefficient)` pairs. Repeated indices
    /// accumulate; indices above the cap are dropped.
    pub fn from_terms<I>(var_count: usize, cap: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Rational)>,
    {
        let mut s = Self::zero(var_count, cap);
        for (idx, c) in terms {
            if idx.len() != var_count {
                return Err(Error::ShapeMismatch(format!(
                    "index of length {} in a series of {var_count} variables",
                    idx.len()
                )));
            }
            s.add_term(idx, c);
        }
        Ok(s)
    }

    pub fn var_count(&self) -> usize {
        self.var_count
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: &MultiIndex) -> Rational {
        self.terms.get(idx).cloned().unwrap_or_else(Rational::zero)
    }

    /// Terms in graded-lex order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    /// Adds `c * x^idx` in place, dropping it if it lies above the cap.
    pub(crate) fn add_term(&mut self, idx: MultiIndex, c: Rational) {
        debug_assert_eq!(idx.len(), self.var_count);
        if c.is_zero() || idx.degree() > self.cap {
            return;
        }
        match self.terms.entry(idx) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn check_shape(&self, other: &TruncatedSeries) -> Result<()> {
        if self.var_count != other.var_count || self.cap != other.cap {
            return Err(Error::ShapeMismatch(format!(
                "({} vars, cap {}) vs ({} vars, cap {})",
                self.var_count, self.cap, other.var_count, other.cap
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.add(&other.negate())
    }

    pub fn negate(&self) -> TruncatedSeries {
        let terms = self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect();
        TruncatedSeries { var_count: self.var_count, cap: self.cap, terms }
    }

    pub fn scale(&self, c: &Rational) -> TruncatedSeries {
        if c.is_zero() {
            return Self::zero(self.var_count, self.cap);
        }
        let terms = self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        TruncatedSeries { var_count: self.var_count, cap: self.cap, terms }
    }

    /// Multiplies by the monomial `x^m`, keeping the cap. Terms pushed past the
    /// cap are dropped.
    pub fn shift_monomial(&self, m: &MultiIndex) -> Result<TruncatedSeries> {
        self.shift_into(m, self.cap)
    }

    /// Multiplies by `x^m` and raises the cap by `deg(m)`. Every coefficient of
    /// the product up to the new cap is determined by the known part of
    /// `self`, so nothing is lost.
    pub fn lift_shift(&self, m: &MultiIndex) -> Result<TruncatedSeries> {
        self.shift_into(m, self.cap + m.degree())
    }

    fn shift_into(&self, m: &MultiIndex, cap: u32) -> Result<TruncatedSeries> {
        if m.len() != self.var_count {
            return Err(Error::ShapeMismatch(format!(
                "shift of length {} in a series of {} variables",
                m.len(),
                self.var_count
            )));
        }
        let mut out = Self::zero(self.var_count, cap);
        for (idx, c) in &self.terms {
            let shifted = idx.plus(m);
            if shifted.degree() <= cap {
                out.terms.insert(shifted, c.clone());
            }
        }
        Ok(out)
    }

    /// Cauchy product truncated at the common cap.
    pub fn mul(&self, other: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_shape(other)?;
        let mut out = Self::zero(self.var_count, self.cap);
        for (i, a) in &self.terms {
            let room = self.cap - i.degree();
            for (j, b) in &other.terms {
                if j.degree() > room {
                    // graded order: everything after is at least this degree
                    break;
                }
                out.add_term(i.plus(j), a * b);
            }
        }
        Ok(out)
    }

    /// `r`-fold formal partial derivative in variable `var`. The result is
    /// known only up to `cap - r`, which becomes its cap.
    pub fn partial_derivative(&self, var: usize, r: u32) -> Result<TruncatedSeries> {
        if var >= self.var_count {
            return Err(Error::IndexOutOfRange { index: var, len: self.var_count });
        }
        if r == 0 {
            return Ok(self.clone());
        }
        let cap = self.cap.saturating_sub(r);
        let mut out = Self::zero(self.var_count, cap);
        for (idx, c) in &self.terms {
            let e = idx.get(var);
            if e < r {
                continue;
            }
            let falling: Rational = (0..r).map(|j| Rational::from(e - j)).product();
            let mut exps = idx.exponents().to_vec();
            exps[var] -= r;
            out.add_term(MultiIndex(exps), c * falling);
        }
        Ok(out)
    }

    /// Drops everything above `cap`, which must not exceed the current cap.
    pub fn truncate(&self, cap: u32) -> Result<TruncatedSeries> {
        if cap > self.cap {
            return Err(Error::ShapeMismatch(format!(
                "cannot raise cap from {} to {cap} by truncation",
                self.cap
            )));
        }
        let terms = self
            .terms
            .iter()
            .filter(|(k, _)| k.degree() <= cap)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Ok(TruncatedSeries { var_count: self.var_count, cap, terms })
    }

    /// The graded-lex-first monomial where the two series differ, with both
    /// coefficients.
    pub fn first_difference(
        &self,
        other: &TruncatedSeries,
    ) -> Result<Option<(MultiIndex, Rational, Rational)>> {
        self.check_shape(other)?;
        let mut a = self.terms.iter().peekable();
        let mut b = other.terms.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ok(None),
                (Some((ka, va)), None) => return Ok(Some(((*ka).clone(), (*va).clone(), Rational::zero()))),
                (None, Some((kb, vb))) => return Ok(Some(((*kb).clone(), Rational::zero(), (*vb).clone()))),
                (Some((ka, va)), Some((kb, vb))) => match ka.cmp(kb) {
                    Ordering::Less => return Ok(Some(((*ka).clone(), (*va).clone(), Rational::zero()))),
                    Ordering::Greater => return Ok(Some(((*kb).clone(), Rational::zero(), (*vb).clone()))),
                    Ordering::Equal => {
                        if va != vb {
                            return Ok(Some(((*ka).clone(), (*va).clone(), (*vb).clone())));
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }

    /// Evaluates the stored polynomial at a floating-point point.
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(idx, c)| {
                let mono: f64 = idx
                    .exponents()
                    .iter()
                    .zip(point)
                    .map(|(&e, &x)| x.powi(e as i32))
                    .product();
                c.to_f64() * mono
            })
            .sum()
    }

    /// One `coef * x1^e1 x2^e2` line per term, graded-lex order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (idx, c) in &self.terms {
            if idx.degree() == 0 {
                out.push_str(&format!("{c}\n"));
            } else {
                out.push_str(&format!("{c} * {idx}\n"));
            }
        }
        if out.is_empty() {
            out.push_str("0\n");
        }
        out.push_str(&format!("+ O(deg > {})\n", self.cap));
        out
    }
}

impl fmt::Debug for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncatedSeries(vars={}, cap={}) {{", self.var_count, self.cap)?;
        for (i, (idx, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{idx}: {c}")?;
        }
        f.write_str("}")
    }
}

/// Number of monomials of total degree at most `cap` in `vars` variables.
pub fn monomial_count(vars: usize, cap: u32) -> u64 {
    // C(cap + vars, vars)
    let mut acc: u128 = 1;
    for j in 1..=vars as u128 {
        acc = acc * (cap as u128 + j) / j;
    }
    acc as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    fn series(vars: usize, cap: u32, terms: &[(&[u32], &str)]) -> TruncatedSeries {
        TruncatedSeries::from_terms(vars, cap, terms.iter().map(|(e, c)| (mi(e), q(c)))).unwrap()
    }

    #[test]
    fn graded_lex_order() {
        let mut v = vec![mi(&[0, 2]), mi(&[1, 1]), mi(&[0, 0]), mi(&[2, 0]), mi(&[0, 1]), mi(&[1, 0])];
        v.sort();
        assert_eq!(v, vec![mi(&[0, 0]), mi(&[1, 0]), mi(&[0, 1]), mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])]);
    }

    #[test]
    fn add_examples() {
        let s = series(2, 3, &[(&[1, 0], "1"), (&[0, 2], "-2/3")]);
        let zero = TruncatedSeries::zero(2, 3);
        assert_eq!(s.add(&zero).unwrap(), s);
        assert!(s.add(&s.negate()).unwrap().is_zero());
        let a = series(1, 3, &[(&[1], "1")]);
        let b = series(1, 3, &[(&[1], "1/2")]);
        assert_eq!(a.add(&b).unwrap(), series(1, 3, &[(&[1], "3/2")]));
    }

    #[test]
    fn add_shape_mismatch() {
        let a = TruncatedSeries::one(1, 3);
        assert!(matches!(a.add(&TruncatedSeries::one(1, 4)), Err(Error::ShapeMismatch(_))));
        assert!(matches!(a.add(&TruncatedSeries::one(2, 3)), Err(Error::ShapeMismatch(_))));
        assert!(matches!(a.mul(&TruncatedSeries::one(2, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn scale_examples() {
        let s = series(2, 3, &[(&[1, 0], "1"), (&[0, 2], "-2/3")]);
        assert_eq!(s.scale(&Rational::one()), s);
        assert!(s.scale(&Rational::zero()).is_zero());
        assert_eq!(series(1, 2, &[(&[0], "3/4")]).scale(&q("2/3")), series(1, 2, &[(&[0], "1/2")]));
    }

    #[test]
    fn shift_examples() {
        let s = series(2, 3, &[(&[1, 0], "1"), (&[0, 2], "-2/3")]);
        assert_eq!(s.shift_monomial(&MultiIndex::zero(2)).unwrap(), s);
        assert_eq!(
            TruncatedSeries::one(2, 3).shift_monomial(&mi(&[2, 0])).unwrap(),
            series(2, 3, &[(&[2, 0], "1")])
        );
        assert!(series(1, 3, &[(&[3], "5")]).shift_monomial(&mi(&[1])).unwrap().is_zero());
        let lifted = series(1, 3, &[(&[3], "5")]).lift_shift(&mi(&[1])).unwrap();
        assert_eq!(lifted.cap(), 4);
        assert_eq!(lifted.coefficient(&mi(&[4])), q("5"));
    }

    #[test]
    fn mul_examples() {
        let s = series(2, 3, &[(&[0, 0], "2"), (&[1, 0], "1"), (&[0, 2], "-2/3")]);
        assert_eq!(s.mul(&TruncatedSeries::one(2, 3)).unwrap(), s);
        let p = series(1, 2, &[(&[0], "1"), (&[1], "1")]);
        let m = series(1, 2, &[(&[0], "1"), (&[1], "-1")]);
        assert_eq!(p.mul(&m).unwrap(), series(1, 2, &[(&[0], "1"), (&[2], "-1")]));
        let top = series(1, 4, &[(&[4], "1")]);
        let x = series(1, 4, &[(&[1], "1")]);
        assert!(top.mul(&x).unwrap().is_zero());
    }

    #[test]
    fn derivative_examples() {
        let s = series(2, 4, &[(&[2, 1], "3"), (&[0, 1], "1")]);
        assert_eq!(s.partial_derivative(0, 0).unwrap(), s);
        assert_eq!(
            series(1, 3, &[(&[2], "1/2")]).partial_derivative(0, 1).unwrap(),
            series(1, 2, &[(&[1], "1")])
        );
        let lin = series(1, 3, &[(&[0], "4"), (&[1], "7")]);
        let d2 = lin.partial_derivative(0, 2).unwrap();
        assert!(d2.is_zero());
        assert_eq!(d2.cap(), 1);
        assert_eq!(series(1, 1, &[]).partial_derivative(0, 3).unwrap().cap(), 0);
        assert!(matches!(s.partial_derivative(2, 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn first_difference_is_graded_lex_first() {
        let a = series(2, 3, &[(&[0, 1], "1"), (&[2, 0], "1")]);
        let b = series(2, 3, &[(&[0, 1], "1"), (&[1, 1], "1"), (&[2, 0], "2")]);
        let (idx, l, r) = a.first_difference(&b).unwrap().unwrap();
        assert_eq!(idx, mi(&[2, 0]));
        assert_eq!((l, r), (q("1"), q("2")));
        assert_eq!(a.first_difference(&a).unwrap(), None);
    }

    #[test]
    fn render_is_canonical() {
        let s = series(2, 2, &[(&[0, 1], "-1/2"), (&[0, 0], "1"), (&[1, 1], "3")]);
        assert_eq!(s.render(), "1\n-1/2 * x2\n3 * x1 x2\n+ O(deg > 2)\n");
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomial_count(1, 7), 8);
        assert_eq!(monomial_count(2, 2), 6);
        assert_eq!(monomial_count(3, 7), 120);
    }
}
