//! Exact polynomial coefficients: univariate polynomials, continuous piecewise polynomials on
//! `[0,1]`, and their bivariate analogues on `[0,1]^2`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::novikov::{fmt_q, q, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("breakpoints must be strictly increasing from 0 to 1")]
    BadBreakpoints,
    #[error("piece count does not match breakpoints")]
    PieceCount,
    #[error("discontinuous at t = {0}")]
    Discontinuous(String),
    #[error("reparametrization is not monotone on [{0}, {1}]")]
    NotMonotone(String, String),
    #[error("preimage of breakpoint {0} is not rational")]
    IrrationalPreimage(String),
    #[error("reparametrization must map the endpoints onto {{0, 1}}")]
    Endpoints,
}

/// A univariate polynomial with rational coefficients, lowest degree first, trimmed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct UPoly(Vec<Q>);

impl UPoly {
    pub fn new(mut c: Vec<Q>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        UPoly(c)
    }

    pub fn zero() -> Self {
        UPoly(Vec::new())
    }

    pub fn constant(c: Q) -> Self {
        UPoly::new(vec![c])
    }

    /// The identity polynomial `t`.
    pub fn var() -> Self {
        UPoly::new(vec![q(0), q(1)])
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn eval(&self, t: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.0.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let z = Q::zero();
        UPoly::new((0..n).map(|i| self.0.get(i).unwrap_or(&z) + o.0.get(i).unwrap_or(&z)).collect())
    }

    pub fn neg(&self) -> Self {
        UPoly(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn scale(&self, s: &Q) -> Self {
        UPoly::new(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return UPoly::zero();
        }
        let mut r = vec![Q::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        UPoly::new(r)
    }

    pub fn derivative(&self) -> Self {
        UPoly::new(self.0.iter().enumerate().skip(1).map(|(i, c)| c * q(i as i64)).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn antiderivative(&self) -> Self {
        let mut r = vec![Q::zero()];
        r.extend(self.0.iter().enumerate().map(|(i, c)| c / q(i as i64 + 1)));
        UPoly::new(r)
    }

    /// `self(inner(s))`.
    pub fn compose(&self, inner: &UPoly) -> Self {
        let mut acc = UPoly::zero();
        for c in self.0.iter().rev() {
            acc = acc.mul(inner).add(&UPoly::constant(c.clone()));
        }
        acc
    }

    /// Remainder of division by `d` (nonzero).
    fn rem(&self, d: &UPoly) -> UPoly {
        let mut r = self.0.clone();
        let dl = d.0.last().expect("nonzero divisor").clone();
        let dn = d.0.len();
        while r.len() >= dn && !r.is_empty() {
            let f = r.last().unwrap().clone() / &dl;
            let shift = r.len() - dn;
            for (i, c) in d.0.iter().enumerate() {
                r[shift + i] -= &f * c;
            }
            r.pop();
            while r.last().is_some_and(|x| x.is_zero()) {
                r.pop();
            }
        }
        UPoly::new(r)
    }

    fn sign_at(&self, t: &Q) -> i32 {
        let v = self.eval(t);
        if v.is_positive() {
            1
        } else if v.is_negative() {
            -1
        } else {
            0
        }
    }

    /// Number of distinct real roots in the open interval `(a, b)`, by Sturm sequences.
    pub fn count_roots_open(&self, a: &Q, b: &Q) -> usize {
        if self.degree().unwrap_or(0) == 0 {
            return 0;
        }
        // square-free part so that Sturm counts distinct roots
        let mut g = (self.clone(), self.derivative());
        while !g.1.is_zero() {
            let r = g.0.rem(&g.1);
            g = (g.1, r);
        }
        let p = if g.0.degree().unwrap_or(0) > 0 { div_exact(self, &g.0) } else { self.clone() };
        let mut seq = vec![p.clone(), p.derivative()];
        loop {
            let n = seq.len();
            if seq[n - 1].is_zero() {
                seq.pop();
                break;
            }
            let r = seq[n - 2].rem(&seq[n - 1]).neg();
            if r.is_zero() {
                break;
            }
            seq.push(r);
        }
        let var = |t: &Q| -> usize {
            let signs: Vec<i32> = seq.iter().map(|s| s.sign_at(t)).filter(|&s| s != 0).collect();
            signs.windows(2).filter(|w| w[0] != w[1]).count()
        };
        let mut count = var(a) as i64 - var(b) as i64;
        // Sturm counts roots in (a, b]; drop a root at b
        if p.eval(b).is_zero() {
            count -= 1;
        }
        count.max(0) as usize
    }

    /// Rational roots in the closed interval `[a, b]`, sorted.
    pub fn rational_roots(&self, a: &Q, b: &Q) -> Option<Vec<Q>> {
        if self.is_zero() {
            return None;
        }
        let mut out = Vec::new();
        let mut c = self.0.clone();
        let mut zero_root = false;
        while c.first().is_some_and(|x| x.is_zero()) {
            c.remove(0);
            zero_root = true;
        }
        if zero_root && a <= &Q::zero() && &Q::zero() <= b {
            out.push(Q::zero());
        }
        if c.len() > 1 {
            let l = c.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            let ints: Vec<BigInt> = c.iter().map(|x| (x * Q::from_integer(l.clone())).to_integer()).collect();
            let a0 = ints[0].abs();
            let an = ints[ints.len() - 1].abs();
            let limit = BigInt::from(1_000_000_000_000i64);
            if a0 > limit || an > limit {
                return None;
            }
            let p = UPoly::new(c);
            for num in divisors(&a0) {
                for den in divisors(&an) {
                    for s in [1, -1] {
                        let r = Q::new(num.clone() * s, den.clone());
                        if &r >= a && &r <= b && p.eval(&r).is_zero() && !out.contains(&r) {
                            out.push(r);
                        }
                    }
                }
            }
        }
        out.sort();
        Some(out)
    }

    pub fn fmt_var(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts: Vec<String> = Vec::new();
        for (i, c) in self.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mono = match i {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{i}"),
            };
            let s = if mono.is_empty() {
                fmt_q(c)
            } else if c.is_one() {
                mono
            } else if *c == -Q::one() {
                format!("-{mono}")
            } else {
                format!("{}*{mono}", fmt_q(c))
            };
            parts.push(s);
        }
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(p);
            }
        }
        out
    }
}

fn div_exact(a: &UPoly, d: &UPoly) -> UPoly {
    let mut r = a.0.clone();
    let dl = d.0.last().unwrap().clone();
    let dn = d.0.len();
    let mut quo = vec![Q::zero(); r.len().saturating_sub(dn) + 1];
    while r.len() >= dn {
        let f = r.last().unwrap().clone() / &dl;
        let shift = r.len() - dn;
        for (i, c) in d.0.iter().enumerate() {
            r[shift + i] -= &f * c;
        }
        quo[shift] = f;
        r.pop();
    }
    UPoly::new(quo)
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    if n.is_zero() {
        return vec![BigInt::one()];
    }
    let mut out = Vec::new();
    let mut i = BigInt::one();
    while &i * &i <= *n {
        if (n % &i).is_zero() {
            out.push(i.clone());
            let j = n / &i;
            if j != i {
                out.push(j);
            }
        }
        i += 1;
    }
    out
}

impl fmt::Display for UPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fmt_var("t"))
    }
}

fn merge_grids(a: &[Q], b: &[Q]) -> Vec<Q> {
    let mut g: Vec<Q> = a.iter().chain(b.iter()).cloned().collect();
    g.sort();
    g.dedup();
    g
}

fn piece_index(breaks: &[Q], t: &Q) -> usize {
    let n = breaks.len() - 1;
    (0..n).find(|&i| t < &breaks[i + 1]).unwrap_or(n - 1)
}

/// A piecewise polynomial on `[0,1]` with rational breakpoints.
///
/// Values are taken right-continuously at interior breakpoints (and from the last piece at 1).
/// Continuity is not enforced here: derivatives of continuous functions may jump, and
/// [`PiecewisePoly::is_continuous`] is checked where the model demands it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PiecewisePoly {
    breaks: Vec<Q>,
    pieces: Vec<UPoly>,
}

impl PiecewisePoly {
    pub fn new(breaks: Vec<Q>, pieces: Vec<UPoly>) -> Result<Self, PolyError> {
        if breaks.len() < 2
            || breaks[0] != Q::zero()
            || breaks[breaks.len() - 1] != Q::one()
            || breaks.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(PolyError::BadBreakpoints);
        }
        if pieces.len() + 1 != breaks.len() {
            return Err(PolyError::PieceCount);
        }
        Ok(PiecewisePoly { breaks, pieces }.normalized())
    }

    pub fn poly(p: UPoly) -> Self {
        PiecewisePoly { breaks: vec![Q::zero(), Q::one()], pieces: vec![p] }
    }

    pub fn constant(c: Q) -> Self {
        Self::poly(UPoly::constant(c))
    }

    pub fn var() -> Self {
        Self::poly(UPoly::var())
    }

    pub fn breaks(&self) -> &[Q] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[UPoly] {
        &self.pieces
    }

    fn normalized(mut self) -> Self {
        let mut i = 0;
        while i + 1 < self.pieces.len() {
            if self.pieces[i] == self.pieces[i + 1] {
                self.pieces.remove(i + 1);
                self.breaks.remove(i + 1);
            } else {
                i += 1;
            }
        }
        self
    }

    /// Pieces over a finer grid.
    pub fn refine(&self, grid: &[Q]) -> Vec<UPoly> {
        grid.windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / q(2);
                self.pieces[piece_index(&self.breaks, &mid)].clone()
            })
            .collect()
    }

    fn zip(&self, o: &Self, f: impl Fn(&UPoly, &UPoly) -> UPoly) -> Self {
        let grid = merge_grids(&self.breaks, &o.breaks);
        let a = self.refine(&grid);
        let b = o.refine(&grid);
        PiecewisePoly { breaks: grid, pieces: a.iter().zip(&b).map(|(x, y)| f(x, y)).collect() }.normalized()
    }

    pub fn map_pieces(&self, f: impl Fn(&UPoly) -> UPoly) -> Self {
        PiecewisePoly { breaks: self.breaks.clone(), pieces: self.pieces.iter().map(f).collect() }.normalized()
    }

    pub fn eval(&self, t: &Q) -> Q {
        self.pieces[piece_index(&self.breaks, t)].eval(t)
    }

    pub fn eval_left(&self, t: &Q) -> Q {
        let i = (0..self.pieces.len()).find(|&i| t <= &self.breaks[i + 1]).unwrap_or(self.pieces.len() - 1);
        self.pieces[i].eval(t)
    }

    pub fn is_continuous(&self) -> bool {
        self.discontinuity().is_none()
    }

    pub fn discontinuity(&self) -> Option<Q> {
        (1..self.pieces.len())
            .find(|&i| self.pieces[i - 1].eval(&self.breaks[i]) != self.pieces[i].eval(&self.breaks[i]))
            .map(|i| self.breaks[i].clone())
    }

    pub fn is_constant(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].degree().unwrap_or(0) == 0
    }

    pub fn derivative(&self) -> Self {
        self.map_pieces(|p| p.derivative())
    }

    /// The continuous antiderivative `s -> ∫_a^s self`.
    pub fn antiderivative_from(&self, a: &Q) -> Self {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut acc = Q::zero();
        for (i, p) in self.pieces.iter().enumerate() {
            let ad = p.antiderivative();
            let shift = &acc - ad.eval(&self.breaks[i]);
            let piece = ad.add(&UPoly::constant(shift));
            acc = piece.eval(&self.breaks[i + 1]);
            pieces.push(piece);
        }
        let f = PiecewisePoly { breaks: self.breaks.clone(), pieces };
        let base = f.eval(a);
        f.map_pieces(|p| p.sub(&UPoly::constant(base.clone())))
    }

    pub fn integrate(&self, a: &Q, b: &Q) -> Q {
        self.antiderivative_from(a).eval(b)
    }

    /// Restriction to `[a, b]` stretched affinely onto `[0, 1]`.
    pub fn restrict(&self, a: &Q, b: &Q) -> Self {
        let len = b - a;
        let inner = UPoly::new(vec![a.clone(), len.clone()]);
        let mut breaks = vec![Q::zero()];
        let mut pieces = Vec::new();
        for i in 0..self.pieces.len() {
            let (l, r) = (&self.breaks[i], &self.breaks[i + 1]);
            if r <= a || l >= b {
                continue;
            }
            let hi = if r < b { (r - a) / &len } else { Q::one() };
            pieces.push(self.pieces[i].compose(&inner));
            breaks.push(hi);
        }
        PiecewisePoly { breaks, pieces }.normalized()
    }

    /// `[0, at]` from `left` squeezed from `[0,1]`, `[at, 1]` from `right` likewise.
    pub fn splice(left: &Self, right: &Self, at: &Q) -> Self {
        let mut breaks = Vec::new();
        let mut pieces = Vec::new();
        let inv_l = UPoly::new(vec![Q::zero(), Q::one() / at]);
        for (i, p) in left.pieces.iter().enumerate() {
            breaks.push(&left.breaks[i] * at);
            pieces.push(p.compose(&inv_l));
        }
        let rl = Q::one() - at;
        let inv_r = UPoly::new(vec![-(at / &rl), Q::one() / &rl]);
        for (i, p) in right.pieces.iter().enumerate() {
            breaks.push(at + &right.breaks[i] * &rl);
            pieces.push(p.compose(&inv_r));
        }
        breaks.push(Q::one());
        PiecewisePoly { breaks, pieces }.normalized()
    }

    /// `self(inner(s))` for a piecewise-monotone `inner` with values in `[0,1]`.
    pub fn compose(&self, inner: &PiecewisePoly) -> Result<Self, PolyError> {
        let mut breaks = vec![Q::zero()];
        let mut pieces = Vec::new();
        for (i, p) in inner.pieces.iter().enumerate() {
            let (l, r) = (&inner.breaks[i], &inner.breaks[i + 1]);
            if p.degree().unwrap_or(0) == 0 {
                let c = p.eval(l);
                pieces.push(UPoly::constant(self.eval(&c)));
                breaks.push(r.clone());
                continue;
            }
            let dp = p.derivative();
            if dp.count_roots_open(l, r) > 0 {
                return Err(PolyError::NotMonotone(fmt_q(l), fmt_q(r)));
            }
            let (vl, vr) = (p.eval(l), p.eval(r));
            let (lo, hi) = if vl < vr { (vl, vr) } else { (vr, vl) };
            let mut cuts = Vec::new();
            for b in &self.breaks[1..self.breaks.len() - 1] {
                if b > &lo && b < &hi {
                    let shifted = p.sub(&UPoly::constant(b.clone()));
                    let roots = shifted
                        .rational_roots(l, r)
                        .ok_or_else(|| PolyError::IrrationalPreimage(fmt_q(b)))?;
                    let root = roots
                        .into_iter()
                        .find(|x| x > l && x < r)
                        .ok_or_else(|| PolyError::IrrationalPreimage(fmt_q(b)))?;
                    cuts.push(root);
                }
            }
            cuts.sort();
            let mut pts = vec![l.clone()];
            pts.extend(cuts);
            pts.push(r.clone());
            for w in pts.windows(2) {
                let mid = (&w[0] + &w[1]) / q(2);
                let outer = &self.pieces[piece_index(&self.breaks, &p.eval(&mid))];
                pieces.push(outer.compose(p));
                breaks.push(w[1].clone());
            }
        }
        Ok(PiecewisePoly { breaks, pieces }.normalized())
    }
}

impl fmt::Display for PiecewisePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.len() == 1 {
            return write!(f, "{}", self.pieces[0]);
        }
        let parts: Vec<String> = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| format!("[{},{}]: {}", fmt_q(&self.breaks[i]), fmt_q(&self.breaks[i + 1]), p))
            .collect();
        write!(f, "{{{}}}", parts.join("; "))
    }
}

/// Coefficients that can be differentiated in a parameter: `t` is variable 0, `s` is 1.
pub trait Differentiable: crate::graded::Coeff {
    fn partial(&self, var: usize) -> Self;
}

impl Differentiable for PiecewisePoly {
    fn partial(&self, var: usize) -> Self {
        match var {
            0 => self.derivative(),
            _ => <Self as crate::graded::Coeff>::zero(),
        }
    }
}

impl crate::graded::Coeff for PiecewisePoly {
    fn zero() -> Self {
        Self::poly(UPoly::zero())
    }
    fn from_q(c: Q) -> Self {
        Self::constant(c)
    }
    fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.is_zero())
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }
    fn neg(&self) -> Self {
        self.map_pieces(|p| p.neg())
    }
    fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.mul(b))
    }
    fn scale(&self, c: &Q) -> Self {
        self.map_pieces(|p| p.scale(c))
    }
}

/// A bivariate polynomial in `(t, s)`, keyed by exponents `(i, j)` of `t^i s^j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BPoly(BTreeMap<(u32, u32), Q>);

impl BPoly {
    pub fn zero() -> Self {
        BPoly(BTreeMap::new())
    }

    pub fn constant(c: Q) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert((0, 0), c);
        }
        BPoly(m)
    }

    pub fn from_t(p: &UPoly) -> Self {
        BPoly(p.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| ((i as u32, 0), c.clone())).collect())
    }

    pub fn from_s(p: &UPoly) -> Self {
        BPoly(p.0.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| ((0, i as u32), c.clone())).collect())
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Q> {
        &self.0
    }

    pub fn from_terms(t: BTreeMap<(u32, u32), Q>) -> Self {
        BPoly(t.into_iter().filter(|(_, c)| !c.is_zero()).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut m = self.0.clone();
        for (k, c) in &o.0 {
            let e = m.entry(*k).or_insert_with(Q::zero);
            *e += c;
            if e.is_zero() {
                m.remove(k);
            }
        }
        BPoly(m)
    }

    pub fn neg(&self) -> Self {
        BPoly(self.0.iter().map(|(k, c)| (*k, -c)).collect())
    }

    pub fn scale(&self, s: &Q) -> Self {
        if s.is_zero() {
            return BPoly::zero();
        }
        BPoly(self.0.iter().map(|(k, c)| (*k, c * s)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut m: BTreeMap<(u32, u32), Q> = BTreeMap::new();
        for ((a, b), c) in &self.0 {
            for ((x, y), d) in &o.0 {
                *m.entry((a + x, b + y)).or_insert_with(Q::zero) += c * d;
            }
        }
        BPoly::from_terms(m)
    }

    pub fn d_t(&self) -> Self {
        BPoly::from_terms(
            self.0.iter().filter(|((i, _), _)| *i > 0).map(|((i, j), c)| ((i - 1, *j), c * q(*i as i64))).collect(),
        )
    }

    pub fn d_s(&self) -> Self {
        BPoly::from_terms(
            self.0.iter().filter(|((_, j), _)| *j > 0).map(|((i, j), c)| ((*i, j - 1), c * q(*j as i64))).collect(),
        )
    }

    pub fn eval(&self, t: &Q, s: &Q) -> Q {
        let mut acc = Q::zero();
        for ((i, j), c) in &self.0 {
            acc += c * num_traits::pow(t.clone(), *i as usize) * num_traits::pow(s.clone(), *j as usize);
        }
        acc
    }
}

impl fmt::Display for BPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|((i, j), c)| {
                let mut mono = Vec::new();
                match i {
                    0 => {}
                    1 => mono.push("t".to_string()),
                    _ => mono.push(format!("t^{i}")),
                }
                match j {
                    0 => {}
                    1 => mono.push("s".to_string()),
                    _ => mono.push(format!("s^{j}")),
                }
                if mono.is_empty() {
                    fmt_q(c)
                } else {
                    format!("{}*{}", fmt_q(c), mono.join("*"))
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

/// A piecewise bivariate polynomial on a rectangular grid of `[0,1]^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PiecewiseBPoly {
    tb: Vec<Q>,
    sb: Vec<Q>,
    /// `cells[i][j]` lives on `[tb_i, tb_{i+1}] x [sb_j, sb_{j+1}]`.
    cells: Vec<Vec<BPoly>>,
}

impl PiecewiseBPoly {
    pub fn new(tb: Vec<Q>, sb: Vec<Q>, cells: Vec<Vec<BPoly>>) -> Result<Self, PolyError> {
        for b in [&tb, &sb] {
            if b.len() < 2 || b[0] != Q::zero() || b[b.len() - 1] != Q::one() || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(PolyError::BadBreakpoints);
            }
        }
        if cells.len() + 1 != tb.len() || cells.iter().any(|r| r.len() + 1 != sb.len()) {
            return Err(PolyError::PieceCount);
        }
        Ok(PiecewiseBPoly { tb, sb, cells }.normalized())
    }

    pub fn poly(p: BPoly) -> Self {
        PiecewiseBPoly { tb: vec![Q::zero(), Q::one()], sb: vec![Q::zero(), Q::one()], cells: vec![vec![p]] }
    }

    /// `f(t)` viewed as a function of `(t, s)`.
    pub fn from_t(f: &PiecewisePoly) -> Self {
        PiecewiseBPoly {
            tb: f.breaks.clone(),
            sb: vec![Q::zero(), Q::one()],
            cells: f.pieces.iter().map(|p| vec![BPoly::from_t(p)]).collect(),
        }
    }

    /// `f(s)` viewed as a function of `(t, s)`.
    pub fn from_s(f: &PiecewisePoly) -> Self {
        PiecewiseBPoly {
            tb: vec![Q::zero(), Q::one()],
            sb: f.breaks.clone(),
            cells: vec![f.pieces.iter().map(BPoly::from_s).collect()],
        }
    }

    pub fn t_breaks(&self) -> &[Q] {
        &self.tb
    }

    pub fn s_breaks(&self) -> &[Q] {
        &self.sb
    }

    pub fn cells(&self) -> &[Vec<BPoly>] {
        &self.cells
    }

    fn normalized(mut self) -> Self {
        let mut i = 0;
        while i + 1 < self.cells.len() {
            if self.cells[i] == self.cells[i + 1] {
                self.cells.remove(i + 1);
                self.tb.remove(i + 1);
            } else {
                i += 1;
            }
        }
        let mut j = 0;
        while j + 1 < self.sb.len() - 1 {
            if self.cells.iter().all(|r| r[j] == r[j + 1]) {
                for r in &mut self.cells {
                    r.remove(j + 1);
                }
                self.sb.remove(j + 1);
            } else {
                j += 1;
            }
        }
        self
    }

    fn refine(&self, tg: &[Q], sg: &[Q]) -> Vec<Vec<BPoly>> {
        tg.windows(2)
            .map(|wt| {
                let mt = (&wt[0] + &wt[1]) / q(2);
                let i = piece_index(&self.tb, &mt);
                sg.windows(2)
                    .map(|ws| {
                        let ms = (&ws[0] + &ws[1]) / q(2);
                        self.cells[i][piece_index(&self.sb, &ms)].clone()
                    })
                    .collect()
            })
            .collect()
    }

    fn zip(&self, o: &Self, f: impl Fn(&BPoly, &BPoly) -> BPoly) -> Self {
        let tg = merge_grids(&self.tb, &o.tb);
        let sg = merge_grids(&self.sb, &o.sb);
        let a = self.refine(&tg, &sg);
        let b = o.refine(&tg, &sg);
        let cells = a
            .iter()
            .zip(&b)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| f(x, y)).collect())
            .collect();
        PiecewiseBPoly { tb: tg, sb: sg, cells }.normalized()
    }

    pub fn map_cells(&self, f: impl Fn(&BPoly) -> BPoly) -> Self {
        PiecewiseBPoly {
            tb: self.tb.clone(),
            sb: self.sb.clone(),
            cells: self.cells.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
        .normalized()
    }

    pub fn d_t(&self) -> Self {
        self.map_cells(|p| p.d_t())
    }

    pub fn d_s(&self) -> Self {
        self.map_cells(|p| p.d_s())
    }

    pub fn eval(&self, t: &Q, s: &Q) -> Q {
        self.cells[piece_index(&self.tb, t)][piece_index(&self.sb, s)].eval(t, s)
    }
}

impl fmt::Display for PiecewiseBPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.cells.len() == 1 && self.cells[0].len() == 1 {
            return write!(f, "{}", self.cells[0][0]);
        }
        let mut parts = Vec::new();
        for (i, r) in self.cells.iter().enumerate() {
            for (j, c) in r.iter().enumerate() {
                parts.push(format!(
                    "[{},{}]x[{},{}]: {}",
                    fmt_q(&self.tb[i]),
                    fmt_q(&self.tb[i + 1]),
                    fmt_q(&self.sb[j]),
                    fmt_q(&self.sb[j + 1]),
                    c
                ));
            }
        }
        write!(f, "{{{}}}", parts.join("; "))
    }
}

impl crate::graded::Coeff for PiecewiseBPoly {
    fn zero() -> Self {
        Self::poly(BPoly::zero())
    }
    fn from_q(c: Q) -> Self {
        Self::poly(BPoly::constant(c))
    }
    fn is_zero(&self) -> bool {
        self.cells.iter().all(|r| r.iter().all(|c| c.is_zero()))
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }
    fn neg(&self) -> Self {
        self.map_cells(|p| p.neg())
    }
    fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.mul(b))
    }
    fn scale(&self, c: &Q) -> Self {
        self.map_cells(|p| p.scale(c))
    }
}

impl Differentiable for PiecewiseBPoly {
    fn partial(&self, var: usize) -> Self {
        match var {
            0 => self.d_t(),
            1 => self.d_s(),
            _ => <Self as crate::graded::Coeff>::zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded::Coeff;
    use crate::novikov::qf;

    fn pp(breaks: &[Q], pieces: Vec<UPoly>) -> PiecewisePoly {
        PiecewisePoly::new(breaks.to_vec(), pieces).unwrap()
    }

    #[test]
    fn upoly_basics() {
        let t = UPoly::var();
        let p = t.mul(&t).add(&UPoly::constant(q(1)));
        assert_eq!(p.eval(&q(2)), q(5));
        assert_eq!(p.derivative(), t.scale(&q(2)));
        assert_eq!(p.antiderivative().eval(&q(1)), qf(4, 3));
        assert_eq!(p.to_string(), "1 + t^2");
        assert_eq!(p.compose(&t.scale(&q(2))).eval(&q(1)), q(5));
        let r = t.sub(&UPoly::constant(qf(1, 3))).mul(&t.sub(&UPoly::constant(qf(1, 2))));
        assert_eq!(r.rational_roots(&q(0), &q(1)).unwrap(), vec![qf(1, 3), qf(1, 2)]);
        assert_eq!(r.count_roots_open(&q(0), &q(1)), 2);
        assert_eq!(r.count_roots_open(&q(0), &qf(1, 2)), 1);
    }

    #[test]
    fn piecewise_antiderivative_is_continuous() {
        let h = qf(1, 2);
        let f = pp(&[q(0), h.clone(), q(1)], vec![UPoly::constant(q(1)), UPoly::var()]);
        assert!(!f.is_continuous());
        let a = f.antiderivative_from(&q(0));
        assert!(a.is_continuous());
        assert_eq!(a.eval(&q(1)), h.clone() + (q(1) - qf(1, 4)) / q(2));
        assert_eq!(a.derivative(), f);
        assert_eq!(f.integrate(&h, &q(1)), qf(3, 8));
    }

    #[test]
    fn compose_splits_at_preimages() {
        let h = qf(1, 2);
        let f = pp(&[q(0), h.clone(), q(1)], vec![UPoly::var(), UPoly::constant(h.clone())]);
        let sq = PiecewisePoly::poly(UPoly::var().mul(&UPoly::var()));
        // t = s^2 crosses 1/2 at an irrational point
        assert!(f.compose(&sq).is_err());
        let lin = PiecewisePoly::poly(UPoly::var());
        assert_eq!(f.compose(&lin).unwrap(), f);
        let smooth = PiecewisePoly::poly(UPoly::new(vec![q(0), q(0), q(3), q(-2)]));
        let g = f.compose(&smooth).unwrap();
        assert_eq!(g.breaks(), &[q(0), h.clone(), q(1)]);
    }

    #[test]
    fn splice_and_restrict() {
        let f = PiecewisePoly::var();
        let s = PiecewisePoly::splice(&f, &f, &qf(1, 2));
        assert_eq!(s.eval(&qf(1, 4)), qf(1, 2));
        assert_eq!(s.eval(&qf(3, 4)), qf(1, 2));
        assert_eq!(s.restrict(&q(0), &qf(1, 2)), f);
    }

    #[test]
    fn bivariate_ops() {
        let t = PiecewiseBPoly::from_t(&PiecewisePoly::var());
        let s = PiecewiseBPoly::from_s(&PiecewisePoly::var());
        let p = t.mul(&s);
        assert_eq!(p.d_t(), s);
        assert_eq!(p.eval(&q(2), &q(3)), q(6));
        assert!(p.add(&p.neg()).is_zero());
    }
}
