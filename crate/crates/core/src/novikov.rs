//! Discrete submonoids of `Q>=0 x 2Z` and truncated Novikov scalars.
//!
//! A [`NovikovScalar`] is a finite sum `sum a_i T^{lambda_i} e^{mu_i/2}` with rational
//! coefficients and exponents, together with a precision `p` meaning the value is only
//! known modulo `T^p`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational numbers.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Formats a rational as `p` or `p/q`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, NovikovError> {
    let s = s.trim();
    let bad = || NovikovError::Parse(format!("bad rational `{s}`"));
    match s.split_once('/') {
        Some((a, b)) => {
            let n = BigInt::from_str(a.trim()).map_err(|_| bad())?;
            let d = BigInt::from_str(b.trim()).map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(BigInt::from_str(s).map_err(|_| bad())?)),
    }
}

pub fn factorial(n: usize) -> Q {
    let mut f = BigInt::one();
    for i in 2..=n {
        f *= BigInt::from(i);
    }
    Q::from_integer(f)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NovikovError {
    #[error("invalid monoid: {0}")]
    InvalidMonoid(String),
    #[error("invalid monoid element: {0}")]
    InvalidElement(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("scalar is not invertible: {0}")]
    NotInvertible(String),
    #[error("exponential undefined: {0}")]
    ExpUndefined(String),
}

/// An element `beta = (E(beta), mu(beta))` of a discrete submonoid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonoidElement {
    pub energy: Q,
    pub maslov: i64,
}

impl MonoidElement {
    pub fn new(energy: Q, maslov: i64) -> Result<Self, NovikovError> {
        if energy.is_negative() {
            return Err(NovikovError::InvalidElement("energy must be >= 0".into()));
        }
        if maslov % 2 != 0 {
            return Err(NovikovError::InvalidElement("maslov must be even".into()));
        }
        if energy.is_zero() && maslov != 0 {
            return Err(NovikovError::InvalidElement(
                "energy 0 forces maslov 0".into(),
            ));
        }
        Ok(MonoidElement { energy, maslov })
    }

    pub fn zero() -> Self {
        MonoidElement { energy: Q::zero(), maslov: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.energy.is_zero() && self.maslov == 0
    }

    pub fn add(&self, o: &MonoidElement) -> MonoidElement {
        MonoidElement { energy: &self.energy + &o.energy, maslov: self.maslov + o.maslov }
    }

    /// `self - o`, if it is still a valid label (energy >= 0).
    pub fn sub(&self, o: &MonoidElement) -> Option<MonoidElement> {
        let e = &self.energy - &o.energy;
        if e.is_negative() {
            return None;
        }
        let m = self.maslov - o.maslov;
        if e.is_zero() && m != 0 {
            return None;
        }
        Some(MonoidElement { energy: e, maslov: m })
    }

    /// The Novikov weight `T^{E} e^{mu/2}` as a scalar.
    pub fn weight(&self) -> NovikovScalar {
        NovikovScalar::monomial(Q::one(), self.energy.clone(), self.maslov)
    }
}

impl Ord for MonoidElement {
    fn cmp(&self, o: &Self) -> Ordering {
        self.energy.cmp(&o.energy).then(self.maslov.cmp(&o.maslov))
    }
}

impl PartialOrd for MonoidElement {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for MonoidElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", fmt_q(&self.energy), self.maslov)
    }
}

/// A finitely generated discrete submonoid; generators have positive energy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteMonoid {
    generators: Vec<MonoidElement>,
}

impl DiscreteMonoid {
    pub fn new(mut generators: Vec<MonoidElement>) -> Result<Self, NovikovError> {
        for g in &generators {
            if !g.energy.is_positive() {
                return Err(NovikovError::InvalidMonoid(format!(
                    "generator {g} has energy <= 0"
                )));
            }
            if g.maslov % 2 != 0 {
                return Err(NovikovError::InvalidMonoid(format!("generator {g}: maslov must be even")));
            }
        }
        generators.sort();
        generators.dedup();
        Ok(DiscreteMonoid { generators })
    }

    pub fn trivial() -> Self {
        DiscreteMonoid { generators: Vec::new() }
    }

    pub fn generators(&self) -> &[MonoidElement] {
        &self.generators
    }

    /// All sums of generators with energy `< e_cut`, sorted by `(energy, maslov)`.
    pub fn enumerate(&self, e_cut: &Q) -> Vec<MonoidElement> {
        let mut seen: BTreeSet<MonoidElement> = BTreeSet::new();
        let zero = MonoidElement::zero();
        if &zero.energy >= e_cut {
            return Vec::new();
        }
        let mut frontier = vec![zero.clone()];
        seen.insert(zero);
        while let Some(b) = frontier.pop() {
            for g in &self.generators {
                let s = b.add(g);
                if &s.energy < e_cut && seen.insert(s.clone()) {
                    frontier.push(s);
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Every way of writing `beta` as a sum of generators, as multiplicity vectors.
    pub fn decompositions(&self, beta: &MonoidElement) -> Vec<Vec<u32>> {
        fn go(
            gens: &[MonoidElement],
            i: usize,
            rest: &MonoidElement,
            cur: &mut Vec<u32>,
            out: &mut Vec<Vec<u32>>,
        ) {
            if rest.is_zero() {
                let mut v = cur.clone();
                v.resize(gens.len(), 0);
                out.push(v);
                return;
            }
            if i == gens.len() {
                return;
            }
            let mut r = rest.clone();
            let mut c = 0u32;
            loop {
                cur.push(c);
                go(gens, i + 1, &r, cur, out);
                cur.pop();
                match r.sub(&gens[i]) {
                    Some(n) => {
                        r = n;
                        c += 1;
                    }
                    None => break,
                }
            }
        }
        let mut out = Vec::new();
        go(&self.generators, 0, beta, &mut Vec::new(), &mut out);
        out
    }

    pub fn contains(&self, beta: &MonoidElement) -> bool {
        beta.is_zero() || !self.decompositions(beta).is_empty()
    }

    /// The monoid generated by the union of both generating sets.
    pub fn join(&self, extra: &[MonoidElement]) -> Result<Self, NovikovError> {
        let mut g = self.generators.clone();
        g.extend(extra.iter().cloned());
        DiscreteMonoid::new(g)
    }

    pub fn min_energy(&self) -> Option<Q> {
        self.generators.iter().map(|g| g.energy.clone()).min()
    }
}

/// One term `coef * T^lambda * e^{mu/2}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub lambda: Q,
    pub mu: i64,
    pub coef: Q,
}

/// A truncated Novikov scalar. `prec == None` means exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NovikovScalar {
    terms: Vec<Term>,
    prec: Option<Q>,
}

fn min_prec(a: &Option<Q>, b: &Option<Q>) -> Option<Q> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (Some(x), Some(y)) => Some(x.min(y).clone()),
    }
}

fn add_prec(p: &Option<Q>, v: &Option<Q>) -> Option<Q> {
    match (p, v) {
        (Some(p), Some(v)) => Some(p + v),
        _ => None,
    }
}

impl NovikovScalar {
    pub fn zero() -> Self {
        NovikovScalar { terms: Vec::new(), prec: None }
    }

    pub fn one() -> Self {
        Self::from_q(Q::one())
    }

    pub fn from_q(c: Q) -> Self {
        Self::monomial(c, Q::zero(), 0)
    }

    pub fn monomial(coef: Q, lambda: Q, mu: i64) -> Self {
        Self::from_terms(vec![Term { lambda, mu, coef }], None)
    }

    /// Builds a normalized scalar: sorted, merged, zero and out-of-precision terms dropped.
    pub fn from_terms(terms: Vec<Term>, prec: Option<Q>) -> Self {
        let mut acc: BTreeMap<(Q, i64), Q> = BTreeMap::new();
        for t in terms {
            if let Some(p) = &prec {
                if &t.lambda >= p {
                    continue;
                }
            }
            *acc.entry((t.lambda, t.mu)).or_insert_with(Q::zero) += t.coef;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((lambda, mu), coef)| Term { lambda, mu, coef })
            .collect();
        NovikovScalar { terms, prec }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn precision(&self) -> Option<&Q> {
        self.prec.as_ref()
    }

    pub fn with_precision(&self, p: Option<Q>) -> Self {
        Self::from_terms(self.terms.clone(), min_prec(&self.prec, &p))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Least exponent among nonzero terms; `None` stands for `+infinity`.
    pub fn valuation(&self) -> Option<Q> {
        self.terms.first().map(|t| t.lambda.clone())
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut t = self.terms.clone();
        t.extend(o.terms.iter().cloned());
        Self::from_terms(t, min_prec(&self.prec, &o.prec))
    }

    pub fn neg(&self) -> Self {
        NovikovScalar {
            terms: self
                .terms
                .iter()
                .map(|t| Term { lambda: t.lambda.clone(), mu: t.mu, coef: -&t.coef })
                .collect(),
            prec: self.prec.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &Q) -> Self {
        if c.is_zero() {
            return NovikovScalar { terms: Vec::new(), prec: self.prec.clone() };
        }
        NovikovScalar {
            terms: self
                .terms
                .iter()
                .map(|t| Term { lambda: t.lambda.clone(), mu: t.mu, coef: &t.coef * c })
                .collect(),
            prec: self.prec.clone(),
        }
    }

    /// Multiplication with pessimistic precision `min(p_a + v(b), p_b + v(a))`.
    pub fn mul(&self, o: &Self) -> Self {
        let prec = min_prec(
            &add_prec(&self.prec, &o.valuation().or_else(|| o.prec.clone())),
            &add_prec(&o.prec, &self.valuation().or_else(|| self.prec.clone())),
        );
        let prec = match (&self.prec, &o.prec, prec) {
            (None, None, _) => None,
            (_, _, p) => p,
        };
        let mut t = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                t.push(Term {
                    lambda: &a.lambda + &b.lambda,
                    mu: a.mu + b.mu,
                    coef: &a.coef * &b.coef,
                });
            }
        }
        Self::from_terms(t, prec)
    }

    /// Drops terms with `lambda >= e_cut`; precision becomes `min(p, e_cut)`.
    pub fn truncate(&self, e_cut: &Q) -> Self {
        Self::from_terms(self.terms.clone(), min_prec(&self.prec, &Some(e_cut.clone())))
    }

    /// Multiplies by `T^{shift}`; precision moves with it.
    pub fn shift_energy(&self, shift: &Q) -> Self {
        NovikovScalar {
            terms: self
                .terms
                .iter()
                .map(|t| Term { lambda: &t.lambda + shift, mu: t.mu, coef: t.coef.clone() })
                .collect(),
            prec: self.prec.as_ref().map(|p| p + shift),
        }
    }

    /// Inverse, computed to precision `min(own precision, cap)` relative to the leading term.
    pub fn inverse(&self, cap: &Q) -> Result<Self, NovikovError> {
        let lead = self
            .terms
            .first()
            .ok_or_else(|| NovikovError::NotInvertible("zero".into()))?
            .clone();
        let inv_lead = NovikovScalar::monomial(Q::one() / &lead.coef, -&lead.lambda, -lead.mu);
        // self = lead * (1 + u), v(u) > 0
        let u = self.mul(&inv_lead).sub(&Self::one());
        let rel_prec = match self.prec.as_ref() {
            Some(p) => (p - &lead.lambda).min(cap.clone()),
            None => cap.clone(),
        };
        let vu = match u.valuation() {
            None => return Ok(inv_lead.with_precision(Some(&rel_prec - &lead.lambda))),
            Some(v) => v,
        };
        if !vu.is_positive() {
            return Err(NovikovError::NotInvertible("leading energy has several Maslov terms".into()));
        }
        let mut sum = Self::one();
        let mut pow = Self::one();
        let neg_u = u.neg().truncate(&rel_prec);
        let mut n = 1i64;
        while &vu * q(n) < rel_prec {
            pow = pow.mul(&neg_u).truncate(&rel_prec);
            sum = sum.add(&pow);
            n += 1;
        }
        Ok(sum.truncate(&rel_prec).mul(&inv_lead))
    }

    /// Integer power; negative powers use [`NovikovScalar::inverse`] with the given cap.
    pub fn pow(&self, n: i64, cap: &Q) -> Result<Self, NovikovError> {
        let base = if n < 0 { self.inverse(cap)? } else { self.clone() };
        let mut r = Self::one();
        for _ in 0..n.unsigned_abs() {
            r = r.mul(&base).truncate(cap);
        }
        Ok(r)
    }

    /// `exp(self)` for a scalar of positive valuation, truncated at `cap`.
    pub fn exp(&self, cap: &Q) -> Result<Self, NovikovError> {
        let v = match self.valuation() {
            None => return Ok(Self::one().with_precision(self.prec.clone()).truncate(cap)),
            Some(v) => v,
        };
        if !v.is_positive() {
            return Err(NovikovError::ExpUndefined(format!(
                "argument has valuation {} <= 0",
                fmt_q(&v)
            )));
        }
        if self.terms.iter().any(|t| t.mu != 0) {
            return Err(NovikovError::ExpUndefined("argument is not grading-neutral".into()));
        }
        let mut sum = Self::one();
        let mut pow = Self::one();
        let mut n = 1usize;
        while &v * q(n as i64) < *cap {
            pow = pow.mul(self).truncate(cap).scale(&(Q::one() / q(n as i64)));
            sum = sum.add(&pow);
            n += 1;
        }
        let prec = match &self.prec {
            Some(p) => Some(p.clone().min(cap.clone())),
            None => Some(cap.clone()),
        };
        Ok(sum.with_precision(prec))
    }
}

impl fmt::Display for NovikovScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        if self.terms.is_empty() {
            s.push('0');
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coef.is_negative();
            if i > 0 {
                s.push_str(if neg { " - " } else { " + " });
            } else if neg {
                s.push('-');
            }
            let c = t.coef.abs();
            let mut parts = Vec::new();
            let trivial_mono = t.lambda.is_zero() && t.mu == 0;
            if !c.is_one() || trivial_mono {
                parts.push(fmt_q(&c));
            }
            if !t.lambda.is_zero() {
                parts.push(if t.lambda.denom().is_one() && !t.lambda.is_negative() {
                    format!("T^{}", fmt_q(&t.lambda))
                } else {
                    format!("T^({})", fmt_q(&t.lambda))
                });
            }
            if t.mu != 0 {
                parts.push(if t.mu < 0 { format!("e^({})", t.mu / 2) } else { format!("e^{}", t.mu / 2) });
            }
            s.push_str(&parts.join("*"));
        }
        if let Some(p) = &self.prec {
            if p.denom().is_one() && !p.is_negative() {
                s.push_str(&format!(" (prec T^{})", fmt_q(p)));
            } else {
                s.push_str(&format!(" (prec T^({}))", fmt_q(p)));
            }
        }
        f.write_str(&s)
    }
}

fn parse_exponent(s: &str) -> Result<Q, NovikovError> {
    let s = s.trim();
    let inner = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(s);
    parse_q(inner)
}

impl FromStr for NovikovScalar {
    type Err = NovikovError;

    /// Accepts the output grammar of `Display`, e.g. `1 + 2/3*T^(1/2)*e^1 (prec T^2)`.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let mut body = input.trim();
        let mut prec = None;
        if let Some(i) = body.find("(prec") {
            let tail = body[i + 5..].trim();
            let tail = tail
                .strip_suffix(')')
                .ok_or_else(|| NovikovError::Parse("unclosed precision".into()))?
                .trim();
            let e = tail
                .strip_prefix("T^")
                .ok_or_else(|| NovikovError::Parse("precision must read T^p".into()))?;
            prec = Some(parse_exponent(e)?);
            body = body[..i].trim();
        }
        // split into signed terms at top-level + and -
        let mut terms = Vec::new();
        let mut depth = 0i32;
        let mut cur = String::new();
        let mut sign = 1i64;
        let mut pending_sign = None;
        let chars: Vec<char> = body.chars().collect();
        let flush = |cur: &mut String, sign: i64, terms: &mut Vec<Term>| -> Result<(), NovikovError> {
            let t = cur.trim();
            if t.is_empty() {
                return Err(NovikovError::Parse(format!("empty term in `{input}`")));
            }
            let mut coef = Q::one();
            let mut lambda = Q::zero();
            let mut mu = 0i64;
            for f in t.split('*') {
                let f = f.trim();
                if let Some(e) = f.strip_prefix("T^") {
                    lambda += parse_exponent(e)?;
                } else if f == "T" {
                    lambda += Q::one();
                } else if let Some(e) = f.strip_prefix("e^") {
                    let h = parse_exponent(e)?;
                    if !h.denom().is_one() {
                        return Err(NovikovError::Parse("e exponent must be an integer".into()));
                    }
                    mu += 2 * i64::try_from(h.numer().clone())
                        .map_err(|_| NovikovError::Parse("e exponent too large".into()))?;
                } else if f == "e" {
                    mu += 2;
                } else {
                    coef *= parse_q(f)?;
                }
            }
            terms.push(Term { lambda, mu, coef: coef * q(sign) });
            cur.clear();
            Ok(())
        };
        for (i, &ch) in chars.iter().enumerate() {
            match ch {
                '(' => {
                    depth += 1;
                    cur.push(ch);
                }
                ')' => {
                    depth -= 1;
                    cur.push(ch);
                }
                '+' | '-' if depth == 0 => {
                    let prev = chars[..i].iter().rev().find(|c| !c.is_whitespace());
                    let is_binary = matches!(prev, Some(c) if *c != '^' && *c != '*');
                    if is_binary && !cur.trim().is_empty() {
                        flush(&mut cur, sign, &mut terms)?;
                        sign = if ch == '-' { -1 } else { 1 };
                    } else if cur.trim().is_empty() {
                        pending_sign = Some(if ch == '-' { -1 } else { 1 });
                        sign *= pending_sign.unwrap();
                    } else {
                        cur.push(ch);
                    }
                }
                _ => cur.push(ch),
            }
        }
        let _ = pending_sign;
        if body != "0" {
            flush(&mut cur, sign, &mut terms)?;
        }
        Ok(NovikovScalar::from_terms(terms, prec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn me(e: Q, m: i64) -> MonoidElement {
        MonoidElement::new(e, m).unwrap()
    }

    #[test]
    fn enumerate_examples() {
        let g = DiscreteMonoid::new(vec![me(q(1), 0)]).unwrap();
        assert_eq!(g.enumerate(&qf(5, 2)), vec![me(q(0), 0), me(q(1), 0), me(q(2), 0)]);
        assert_eq!(DiscreteMonoid::trivial().enumerate(&q(10)), vec![MonoidElement::zero()]);
    }

    #[test]
    fn rejects_nonpositive_generators() {
        assert!(DiscreteMonoid::new(vec![MonoidElement::zero()]).is_err());
        assert!(MonoidElement::new(q(1), 1).is_err());
        assert!(MonoidElement::new(q(0), 2).is_err());
    }

    #[test]
    fn scalar_examples() {
        let t = |l: i64| NovikovScalar::monomial(Q::one(), q(l), 0);
        let a = t(1).add(&t(2)).truncate(&q(3));
        let b = NovikovScalar::one().sub(&t(1)).truncate(&q(3));
        let p = a.mul(&b);
        assert_eq!(p.terms(), &[Term { lambda: q(1), mu: 0, coef: q(1) }]);
        assert_eq!(p.precision(), Some(&q(3)));
        let x = NovikovScalar::monomial(q(1), q(1), 2);
        let y = NovikovScalar::monomial(q(1), qf(1, 2), -2);
        assert_eq!(x.mul(&y), NovikovScalar::monomial(q(1), qf(3, 2), 0));
    }

    #[test]
    fn valuation_examples() {
        let a: NovikovScalar = "2*T^(1/2) - 3*T^2".parse().unwrap();
        assert_eq!(a.valuation(), Some(qf(1, 2)));
        assert_eq!(NovikovScalar::from_q(q(5)).valuation(), Some(q(0)));
        assert_eq!(NovikovScalar::zero().valuation(), None);
    }

    #[test]
    fn truncate_examples() {
        let a: NovikovScalar = "1 + 2*T + 3*T^2".parse().unwrap();
        assert_eq!(a.truncate(&q(2)).to_string(), "1 + 2*T^1 (prec T^2)");
        let b: NovikovScalar = "T^(1/2)*e^1 + T*e^(-1)".parse().unwrap();
        assert_eq!(b.truncate(&q(1)).terms().len(), 1);
    }

    #[test]
    fn display_roundtrip() {
        let s = "1 + 2/3*T^(1/2)*e^1 (prec T^2)";
        let a: NovikovScalar = s.parse().unwrap();
        assert_eq!(a.to_string(), s);
        let b: NovikovScalar = a.to_string().parse().unwrap();
        assert_eq!(a, b);
        let z: NovikovScalar = "0".parse().unwrap();
        assert!(z.is_zero());
        let n: NovikovScalar = "-T^(-1/4)*e^(-1) - 5".parse().unwrap();
        assert_eq!(n.to_string().parse::<NovikovScalar>().unwrap(), n);
    }

    #[test]
    fn inverse_and_exp() {
        let a: NovikovScalar = "1 + T".parse().unwrap();
        let inv = a.inverse(&q(4)).unwrap();
        let one = a.mul(&inv).truncate(&q(4));
        assert_eq!(one.terms(), NovikovScalar::one().terms());
        let x: NovikovScalar = "T".parse().unwrap();
        let e = x.exp(&q(3)).unwrap();
        assert_eq!(e.to_string(), "1 + T^1 + 1/2*T^2 (prec T^3)");
        assert!(NovikovScalar::one().exp(&q(3)).is_err());
    }

    #[test]
    fn decompositions_count() {
        let g = DiscreteMonoid::new(vec![me(q(1), 0), me(q(2), 0)]).unwrap();
        assert_eq!(g.decompositions(&me(q(4), 0)).len(), 3);
    }
}
