//! Deformation by bounding cochains, the Maurer–Cartan value `m(e^b)`, the divisor
//! identity and the energy shift `y_i -> T^{c_i} y_i`.
//!
//! A cochain `b` has two parts. The divisor part sits on degree-1 divisor elements with
//! grading-neutral coefficients; when these have valuation zero, the series `m(e^b)` is
//! summed in closed form through the divisor identity and the coordinates `y_i = e^{x_i}`.
//! The high part must have positive valuation, so its insertion sums are finite mod `T^E`.

use std::collections::BTreeMap;

use num_traits::Signed;
use rayon::prelude::*;
use thiserror::Error;

use crate::ainf::{AinfError, FilteredAinfAlgebra};
use crate::graded::{family_add, Coeff, MultiOp, OpFamily, OpKind};
use crate::novikov::{factorial, fmt_q, q, DiscreteMonoid, MonoidElement, NovikovError, NovikovScalar, Q};
use crate::report::{Report, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeformError {
    #[error("basis index {0} out of range")]
    OutOfRange(usize),
    #[error("divisor element {0} must have degree 1, found {1}")]
    DivisorDegree(String, i64),
    #[error("element {0} appears in both the divisor and the high part")]
    Overlap(String),
    #[error("coefficient of {0} must be grading-neutral")]
    NotNeutral(String),
    #[error("coefficient of {0} has a term T^{1} e^({2}/2) of total degree {3}, expected 1")]
    Degree(String, String, i64, i64),
    #[error("zero-valuation insertion of {0} without a divisor declaration")]
    ZeroValuation(String),
    #[error("deform_by_b needs a cochain with zero divisor part")]
    DivisorPart,
    #[error("divergent configuration: {0}")]
    Divergent(String),
    #[error("divisor property fails with {0} violation(s)")]
    DivisorProperty(usize),
    #[error("divisor coordinate of {0} has valuation {1} outside (-{2}, {2})")]
    OutOfRegion(String, String, String),
    #[error("label {0} has shifted energy {1}")]
    ShiftedEnergy(MonoidElement, String),
    #[error("no divisor pairing recorded for label {0}")]
    MissingPairing(MonoidElement),
    #[error("divisor pairing is not additive: {0}")]
    NotAdditive(String),
    #[error("expected {expected} shift(s), got {got}")]
    ShiftLength { expected: usize, got: usize },
    #[error("insertion sums need every arity; the algebra is only known up to arity {0}")]
    ArityBound(usize),
    #[error(transparent)]
    Ainf(#[from] AinfError),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
}

/// Coefficient of a divisor element, either `x` itself or the coordinate `y = e^x`.
///
/// A rational `x != 0` of valuation zero has an irrational exponential, so such
/// coefficients are given through `y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DivisorCoeff {
    X(NovikovScalar),
    Y(NovikovScalar),
}

impl DivisorCoeff {
    /// `y = e^x`, truncated at `cap` when it has to be computed.
    pub fn y(&self, cap: &Q) -> Result<NovikovScalar, DeformError> {
        match self {
            DivisorCoeff::Y(y) => Ok(y.clone()),
            DivisorCoeff::X(x) => Ok(x.exp(cap)?),
        }
    }

    fn scalar(&self) -> &NovikovScalar {
        match self {
            DivisorCoeff::X(s) | DivisorCoeff::Y(s) => s,
        }
    }
}

/// `b = Σ x_i e_i + b_high`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoundingData {
    pub divisor: BTreeMap<usize, DivisorCoeff>,
    pub high: BTreeMap<usize, NovikovScalar>,
}

impl BoundingData {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn high(high: BTreeMap<usize, NovikovScalar>) -> Self {
        BoundingData { divisor: BTreeMap::new(), high }
    }

    pub fn is_zero(&self) -> bool {
        self.divisor.values().all(|c| c.scalar().is_zero() && matches!(c, DivisorCoeff::X(_)))
            && self.high.values().all(|c| c.is_zero())
    }

    /// Degree and valuation checks against the algebra.
    pub fn validate<C: Coeff>(&self, a: &FilteredAinfAlgebra<C>) -> Result<(), DeformError> {
        let name = |i: usize| a.space.name(i).to_string();
        for (&i, c) in &self.divisor {
            if i >= a.dim() {
                return Err(DeformError::OutOfRange(i));
            }
            if a.space.deg(i) != 1 {
                return Err(DeformError::DivisorDegree(name(i), a.space.deg(i)));
            }
            if self.high.contains_key(&i) {
                return Err(DeformError::Overlap(name(i)));
            }
            if c.scalar().terms().iter().any(|t| t.mu != 0) {
                return Err(DeformError::NotNeutral(name(i)));
            }
        }
        for (&i, c) in &self.high {
            if i >= a.dim() {
                return Err(DeformError::OutOfRange(i));
            }
            for t in c.terms() {
                let total = a.space.deg(i) + t.mu;
                if total != 1 {
                    return Err(DeformError::Degree(name(i), fmt_q(&t.lambda), t.mu, total));
                }
                if !t.lambda.is_positive() {
                    return Err(DeformError::ZeroValuation(name(i)));
                }
            }
        }
        Ok(())
    }

    pub fn add(&self, o: &BoundingData) -> Result<BoundingData, DeformError> {
        let mut out = self.clone();
        for (i, c) in &o.high {
            let e = out.high.entry(*i).or_insert_with(NovikovScalar::zero);
            *e = e.add(c);
        }
        for (i, c) in &o.divisor {
            let merged = match (out.divisor.get(i), c) {
                (None, c) => c.clone(),
                (Some(DivisorCoeff::X(a)), DivisorCoeff::X(b)) => DivisorCoeff::X(a.add(b)),
                (Some(DivisorCoeff::Y(a)), DivisorCoeff::Y(b)) => DivisorCoeff::Y(a.mul(b)),
                _ => return Err(DeformError::Divergent("cannot add x and y coordinates".into())),
            };
            out.divisor.insert(*i, merged);
        }
        Ok(out)
    }
}

type Inserts = BTreeMap<usize, Vec<(MonoidElement, Q)>>;

fn inserts_of(coeffs: impl IntoIterator<Item = (usize, NovikovScalar)>) -> Result<Inserts, DeformError> {
    let mut out = Inserts::new();
    for (i, c) in coeffs {
        let terms: Vec<(MonoidElement, Q)> = c
            .terms()
            .iter()
            .map(|t| Ok((MonoidElement::new(t.lambda.clone(), t.mu)?, t.coef.clone())))
            .collect::<Result<_, NovikovError>>()?;
        if !terms.is_empty() {
            out.insert(i, terms);
        }
    }
    Ok(out)
}

/// Every way of replacing the inputs at `positions` by terms of `b`, with the combined label
/// and coefficient, pruned at `e_cut`.
fn label_choices(
    tuple: &[usize],
    positions: &[usize],
    base: &MonoidElement,
    ins: &Inserts,
    e_cut: &Q,
) -> Vec<(MonoidElement, Q)> {
    let mut acc = vec![(base.clone(), q(1))];
    for &p in positions {
        let mut next = Vec::new();
        for (lab, c) in &acc {
            for (l, x) in &ins[&tuple[p]] {
                let nl = lab.add(l);
                if nl.energy < *e_cut {
                    next.push((nl, c * x));
                }
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// `Σ m(b^{l_0}, x_1, b^{l_1}, ..., x_k, b^{l_k})` as an operation family. With `full`, only
/// the arity-0 part (every input replaced by `b`) is produced.
fn insertion_family(a: &FilteredAinfAlgebra, ins: &Inserts, full: bool) -> OpFamily<Q> {
    let parts: Vec<OpFamily<Q>> = a
        .ops
        .par_iter()
        .map(|((_, beta), op)| {
            let mut out = OpFamily::new();
            for (t, v) in &op.entries {
                let slots: Vec<usize> = (0..t.len()).filter(|&j| ins.contains_key(&t[j])).collect();
                if full && slots.len() < t.len() {
                    continue;
                }
                let subsets: Vec<u64> = if full { vec![(1u64 << slots.len()) - 1] } else { (0..1u64 << slots.len()).collect() };
                for mask in subsets {
                    let chosen: Vec<usize> =
                        slots.iter().enumerate().filter(|(s, _)| mask >> s & 1 == 1).map(|(_, &p)| p).collect();
                    let rest: Vec<usize> =
                        t.iter().enumerate().filter(|(j, _)| !chosen.contains(j)).map(|(_, &x)| x).collect();
                    for (lab, c) in label_choices(t, &chosen, beta, ins, &a.e_cut) {
                        let mut m = MultiOp::new(rest.len(), lab, OpKind::Structure);
                        m.add_vec(rest.clone(), v, &c);
                        family_add(&mut out, m);
                    }
                }
            }
            out
        })
        .collect();
    let mut fam = OpFamily::new();
    for p in parts {
        for (_, op) in p {
            family_add(&mut fam, op);
        }
    }
    fam.retain(|_, op| !op.is_zero());
    fam
}

/// The deformed structure `m^b` with `b` of zero divisor part, mod `T^{E_cut}`.
pub fn deform_by_b(a: &FilteredAinfAlgebra, b: &BoundingData) -> Result<FilteredAinfAlgebra, DeformError> {
    b.validate(a)?;
    if !b.divisor.values().all(|c| matches!(c, DivisorCoeff::X(x) if x.is_zero())) {
        return Err(DeformError::DivisorPart);
    }
    if let Some(k) = a.arity_bound {
        return Err(DeformError::ArityBound(k));
    }
    let ins = inserts_of(b.high.iter().map(|(i, c)| (*i, c.clone())))?;
    if ins.is_empty() {
        return Ok(a.clone());
    }
    let labels: Vec<MonoidElement> = ins.values().flatten().map(|(l, _)| l.clone()).collect();
    let monoid = a.monoid.join(&labels)?;
    let ops = insertion_family(a, &ins, false);
    let out = FilteredAinfAlgebra { monoid, ops, ..a.clone() };
    out.validate()?;
    Ok(out)
}

/// `m_0` as a Novikov vector, exact mod `T^{E_cut}`.
pub fn curvature(a: &FilteredAinfAlgebra) -> Vec<NovikovScalar> {
    let mut out = vec![NovikovScalar::zero(); a.dim()];
    for ((k, beta), op) in &a.ops {
        if *k != 0 {
            continue;
        }
        if let Some(v) = op.get(&[]) {
            for (j, c) in v {
                out[*j] = out[*j].add(&beta.weight().scale(c));
            }
        }
    }
    out.into_iter().map(|x| x.truncate(&a.e_cut)).collect()
}

/// Options of [`mc_value`].
#[derive(Clone, Debug)]
pub struct McOptions {
    /// Half-width of the admissible valuation window for divisor coordinates; defaults to
    /// half the smallest generator energy.
    pub delta: Option<Q>,
    /// Largest number of divisor insertions checked before the closed form is used.
    pub m_bound: usize,
    /// Largest arity checked before the closed form is used.
    pub k_max: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions { delta: None, m_bound: 3, k_max: 3 }
    }
}

/// Additive map `beta -> (∂beta ∩ e_i)_i` on the declared divisor elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorPairingData {
    pub divisors: Vec<usize>,
    values: BTreeMap<MonoidElement, Vec<i64>>,
}

impl DivisorPairingData {
    pub fn new(divisors: Vec<usize>, values: BTreeMap<MonoidElement, Vec<i64>>) -> Result<Self, DeformError> {
        let n = divisors.len();
        if let Some((b, v)) = values.iter().find(|(_, v)| v.len() != n) {
            return Err(DeformError::NotAdditive(format!("label {b} has {} value(s), expected {n}", v.len())));
        }
        let mut values = values;
        match values.get(&MonoidElement::zero()) {
            Some(v) if v.iter().any(|&x| x != 0) => {
                return Err(DeformError::NotAdditive("nonzero value at the zero label".into()))
            }
            _ => {
                values.insert(MonoidElement::zero(), vec![0; n]);
            }
        }
        Ok(DivisorPairingData { divisors, values })
    }

    /// Extends values on the generators additively to every label below `e_cut`.
    pub fn from_generators(
        divisors: Vec<usize>,
        monoid: &DiscreteMonoid,
        on_generators: &BTreeMap<MonoidElement, Vec<i64>>,
        e_cut: &Q,
    ) -> Result<Self, DeformError> {
        let n = divisors.len();
        let gens = monoid.generators();
        let gv: Vec<&Vec<i64>> = gens
            .iter()
            .map(|g| on_generators.get(g).ok_or_else(|| DeformError::MissingPairing(g.clone())))
            .collect::<Result<_, _>>()?;
        let mut values = BTreeMap::new();
        for beta in monoid.enumerate(e_cut) {
            let mut seen: Option<Vec<i64>> = None;
            for dec in monoid.decompositions(&beta) {
                let mut v = vec![0i64; n];
                for (j, &c) in dec.iter().enumerate() {
                    for (i, x) in v.iter_mut().enumerate() {
                        *x += c as i64 * gv[j][i];
                    }
                }
                match &seen {
                    Some(s) if *s != v => {
                        return Err(DeformError::NotAdditive(format!("two decompositions of {beta} disagree")))
                    }
                    _ => seen = Some(v),
                }
            }
            values.insert(beta, seen.unwrap_or_else(|| vec![0; n]));
        }
        Self::new(divisors, values)
    }

    pub fn get(&self, beta: &MonoidElement) -> Option<&[i64]> {
        self.values.get(beta).map(|v| v.as_slice())
    }

    pub fn values(&self) -> &BTreeMap<MonoidElement, Vec<i64>> {
        &self.values
    }

    fn require(&self, beta: &MonoidElement) -> Result<&[i64], DeformError> {
        self.get(beta).ok_or_else(|| DeformError::MissingPairing(beta.clone()))
    }

    /// Violations of `g(b1 + b2) = g(b1) + g(b2)` among recorded labels.
    pub fn additivity_report(&self) -> Report {
        let mut rep = Report::default();
        for (b1, v1) in &self.values {
            for (b2, v2) in self.values.range(b1.clone()..) {
                let s = b1.add(b2);
                if let Some(v) = self.values.get(&s) {
                    if v.iter().zip(v1.iter().zip(v2)).any(|(x, (y, z))| *x != y + z) {
                        rep.push(Violation::note("divisor-additivity", format!("{b1} + {b2} = {s}")));
                    }
                }
            }
        }
        rep
    }

    /// `E(beta) + Σ c_i g_i(beta)`.
    pub fn shifted_energy(&self, beta: &MonoidElement, c: &[Q]) -> Result<Q, DeformError> {
        let g = self.require(beta)?;
        Ok(g.iter().zip(c).fold(beta.energy.clone(), |acc, (gi, ci)| acc + q(*gi) * ci))
    }

    fn shift_label(&self, beta: &MonoidElement, c: &[Q]) -> Result<MonoidElement, DeformError> {
        let e = self.shifted_energy(beta, c)?;
        if e.is_negative() || (e.is_zero() && !beta.is_zero()) {
            return Err(DeformError::ShiftedEnergy(beta.clone(), fmt_q(&e)));
        }
        Ok(MonoidElement::new(e, beta.maslov)?)
    }

    /// The same pairing on the shifted labels.
    pub fn shift(&self, c: &[Q]) -> Result<Self, DeformError> {
        self.check_len(c)?;
        let mut values = BTreeMap::new();
        for (b, v) in &self.values {
            let s = self.shift_label(b, c)?;
            if values.insert(s.clone(), v.clone()).is_some_and(|old| old != *v) {
                return Err(DeformError::NotAdditive(format!("two labels shift to {s}")));
            }
        }
        Self::new(self.divisors.clone(), values)
    }

    fn check_len(&self, c: &[Q]) -> Result<(), DeformError> {
        if c.len() != self.divisors.len() {
            return Err(DeformError::ShiftLength { expected: self.divisors.len(), got: c.len() });
        }
        Ok(())
    }

    /// The smallest ratio of shifted to original energy over the generators, and the
    /// shifted generators.
    fn generator_ratio(&self, monoid: &DiscreteMonoid, c: &[Q]) -> Result<(Q, Vec<MonoidElement>), DeformError> {
        let mut r: Option<Q> = None;
        let mut gens = Vec::new();
        for g in monoid.generators() {
            let s = self.shift_label(g, c)?;
            let ratio = &s.energy / &g.energy;
            r = Some(r.map_or(ratio.clone(), |x| x.min(ratio)));
            gens.push(s);
        }
        Ok((r.unwrap_or_else(|| q(1)), gens))
    }
}

/// Checks, for every label, `k <= k_max` and `1 <= m <= m_bound`, that the sum of all
/// `m`-fold divisor insertions into `m_{k+m,beta}` equals
/// `(1/m!) (Σ_i (∂beta ∩ e_i) x_i)^m m_{k,beta}` as an identity in formal `x_i`.
pub fn check_divisor_property(a: &FilteredAinfAlgebra, d: &DivisorPairingData, m_bound: usize, k_max: usize) -> Report {
    let mut rep = d.additivity_report();
    for &i in &d.divisors {
        if i >= a.dim() || a.space.deg(i) != 1 {
            rep.push(Violation::note("divisor-degree", format!("divisor element {i} must have degree 1")));
            return rep;
        }
    }
    let slot: BTreeMap<usize, usize> = d.divisors.iter().enumerate().map(|(s, &i)| (i, s)).collect();
    let labels: Vec<&MonoidElement> = {
        let mut l: Vec<_> = a.ops.keys().map(|(_, b)| b).collect();
        l.sort();
        l.dedup();
        l
    };
    let known = |k: usize| a.arity_bound.is_none_or(|b| k <= b);
    for beta in labels {
        let Some(g) = d.get(beta) else {
            rep.push(Violation::note("divisor-pairing", format!("no pairing for label {beta}")));
            continue;
        };
        // (k, rest, multiset of divisor slots) -> discrepancy
        let mut diff: BTreeMap<(usize, Vec<usize>, Vec<usize>), MultiOp<Q>> = BTreeMap::new();
        let mut bump = |k: usize, rest: Vec<usize>, alpha: Vec<usize>, v: &crate::graded::SVec<Q>, c: &Q| {
            let key = (k, rest.clone(), alpha);
            let e = diff.entry(key).or_insert_with(|| MultiOp::new(k, beta.clone(), OpKind::Structure));
            e.add_vec(rest, v, c);
        };
        for ((kk, _), op) in &a.ops {
            if &op.label != beta {
                continue;
            }
            for (t, v) in &op.entries {
                let div_pos: Vec<usize> = (0..t.len()).filter(|&j| slot.contains_key(&t[j])).collect();
                for mask in 1u64..1 << div_pos.len() {
                    let m = mask.count_ones() as usize;
                    if m > m_bound || kk - m > k_max {
                        continue;
                    }
                    let chosen: Vec<usize> =
                        div_pos.iter().enumerate().filter(|(s, _)| mask >> s & 1 == 1).map(|(_, &p)| p).collect();
                    let rest: Vec<usize> =
                        t.iter().enumerate().filter(|(j, _)| !chosen.contains(j)).map(|(_, &x)| x).collect();
                    let mut alpha: Vec<usize> = chosen.iter().map(|&p| slot[&t[p]]).collect();
                    alpha.sort();
                    bump(kk - m, rest, alpha, v, &q(1));
                }
            }
            if *kk > k_max {
                continue;
            }
            for m in 1..=m_bound {
                if !known(kk + m) {
                    continue;
                }
                for alpha in multisets(d.divisors.len(), m) {
                    let c = multiset_weight(g, &alpha);
                    if c.is_zero() {
                        continue;
                    }
                    for (t, v) in &op.entries {
                        bump(*kk, t.clone(), alpha.clone(), v, &-c.clone());
                    }
                }
            }
        }
        for ((k, _, alpha), op) in diff {
            for (t, v) in &op.entries {
                if v.is_empty() {
                    continue;
                }
                let disc = v.iter().map(|(i, c)| (*i, c.to_string())).collect();
                let names: Vec<&str> = alpha.iter().map(|&s| a.space.name(d.divisors[s])).collect();
                rep.push(
                    Violation::new("divisor", k, beta.clone(), t.clone(), disc)
                        .with_note(format!("m={}, inserted {}", alpha.len(), names.join(","))),
                );
            }
        }
    }
    rep.sorted()
}

fn multisets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(n, m, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, m, 0, &mut Vec::new(), &mut out);
    out
}

/// `Π_i g_i^{α_i} / α_i!` for a sorted multiset `alpha`.
fn multiset_weight(g: &[i64], alpha: &[usize]) -> Q {
    let mut c = q(1);
    let mut i = 0;
    while i < alpha.len() {
        let j = alpha[i..].iter().take_while(|&&s| s == alpha[i]).count();
        c = c * q(g[alpha[i]]).pow(j as i32) / factorial(j);
        i += j;
    }
    c
}

/// `m(e^b) = Σ_k m_k(b, ..., b)`.
///
/// A zero divisor part, or one of positive valuation without divisor data, is summed
/// directly. Otherwise the divisor identity is verified up to `opts` and the divisor
/// insertions are resummed as `Π_i y_i^{∂beta ∩ e_i}` per label. The result is exact mod
/// `T^P` where `P` is reported as the precision of every component.
pub fn mc_value(
    a: &FilteredAinfAlgebra,
    b: &BoundingData,
    divisor: Option<&DivisorPairingData>,
    opts: &McOptions,
) -> Result<Vec<NovikovScalar>, DeformError> {
    b.validate(a)?;
    if let Some(k) = a.arity_bound {
        return Err(DeformError::ArityBound(k));
    }
    let active: BTreeMap<usize, &DivisorCoeff> =
        b.divisor.iter().filter(|(_, c)| !matches!(c, DivisorCoeff::X(x) if x.is_zero())).map(|(i, c)| (*i, c)).collect();
    let high = b.high.iter().map(|(i, c)| (*i, c.clone()));
    match divisor {
        None if active.is_empty() => Ok(full_insertion(a, &inserts_of(high)?)),
        None => {
            let mut all: Vec<(usize, NovikovScalar)> = high.collect();
            for (i, c) in active {
                match c {
                    DivisorCoeff::X(x) if x.valuation().is_some_and(|v| v.is_positive()) => all.push((i, x.clone())),
                    _ => {
                        return Err(DeformError::Divergent(format!(
                            "divisor coefficient of {} has valuation zero and no divisor data",
                            a.space.name(i)
                        )))
                    }
                }
            }
            Ok(full_insertion(a, &inserts_of(all)?))
        }
        Some(d) => closed_form(a, b, d, opts),
    }
}

fn full_insertion(a: &FilteredAinfAlgebra, ins: &Inserts) -> Vec<NovikovScalar> {
    let fam = insertion_family(a, ins, true);
    let mut out = vec![NovikovScalar::zero(); a.dim()];
    for ((_, beta), op) in &fam {
        if let Some(v) = op.get(&[]) {
            for (j, c) in v {
                out[*j] = out[*j].add(&beta.weight().scale(c));
            }
        }
    }
    out.into_iter().map(|x| x.truncate(&a.e_cut)).collect()
}

fn closed_form(
    a: &FilteredAinfAlgebra,
    b: &BoundingData,
    d: &DivisorPairingData,
    opts: &McOptions,
) -> Result<Vec<NovikovScalar>, DeformError> {
    let rep = check_divisor_property(a, d, opts.m_bound, opts.k_max);
    if !rep.is_ok() {
        return Err(DeformError::DivisorProperty(rep.len()));
    }
    for i in b.divisor.keys() {
        if !d.divisors.contains(i) {
            return Err(DeformError::Divergent(format!("{} is not a declared divisor", a.space.name(*i))));
        }
    }
    let delta = match &opts.delta {
        Some(x) => x.clone(),
        None => a.monoid.min_energy().unwrap_or_else(|| a.e_cut.clone()) / q(2),
    };
    // Coordinates y_i, with valuations v_i inside the window.
    let wide = &a.e_cut * q(2) + q(1);
    let mut ys = Vec::new();
    let mut vs = Vec::new();
    for &i in &d.divisors {
        let y = match b.divisor.get(&i) {
            Some(c) => c.y(&wide)?,
            None => NovikovScalar::one(),
        };
        let v = y.valuation().ok_or_else(|| DeformError::Divergent(format!("y of {} is zero", a.space.name(i))))?;
        if v.abs() >= delta {
            return Err(DeformError::OutOfRegion(a.space.name(i).into(), fmt_q(&v), fmt_q(&delta)));
        }
        ys.push(y);
        vs.push(v);
    }
    let (r, _) = d.generator_ratio(&a.monoid, &vs)?;
    let prec = if r < q(1) { &a.e_cut * &r } else { a.e_cut.clone() };
    let ins = inserts_of(b.high.iter().map(|(i, c)| (*i, c.clone())))?;
    // Σ_k m_{k,beta}(b_high, ..., b_high) per label, before the weight T^beta.
    let mut per_label: BTreeMap<MonoidElement, Vec<NovikovScalar>> = BTreeMap::new();
    for ((_, beta), op) in &a.ops {
        let slot = per_label.entry(beta.clone()).or_insert_with(|| vec![NovikovScalar::zero(); a.dim()]);
        let zero = MonoidElement::zero();
        for (t, v) in &op.entries {
            if t.iter().any(|x| !ins.contains_key(x)) {
                continue;
            }
            let all: Vec<usize> = (0..t.len()).collect();
            for (lab, c) in label_choices(t, &all, &zero, &ins, &wide) {
                let w = lab.weight().scale(&c);
                for (j, x) in v {
                    slot[*j] = slot[*j].add(&w.scale(x));
                }
            }
        }
    }
    let mut out = vec![NovikovScalar::zero().truncate(&prec); a.dim()];
    for (beta, vals) in per_label {
        if vals.iter().all(|x| x.is_zero()) {
            continue;
        }
        let g = d.require(&beta)?;
        let shift = d.shifted_energy(&beta, &vs)?;
        if !beta.is_zero() && !shift.is_positive() {
            return Err(DeformError::ShiftedEnergy(beta, fmt_q(&shift)));
        }
        let slack: Q = g.iter().zip(&vs).map(|(gi, vi)| (q(*gi) * vi).abs()).sum();
        let cap = &prec - &beta.energy + &slack * q(2) + q(1);
        let mut factor = beta.weight();
        for (gi, y) in g.iter().zip(&ys) {
            factor = factor.mul(&y.pow(*gi, &cap)?);
        }
        for (o, x) in out.iter_mut().zip(vals) {
            *o = o.add(&factor.mul(&x).truncate(&prec));
        }
    }
    Ok(out.into_iter().map(|x| x.truncate(&prec)).collect())
}

/// Moves the weight of every `m_{k,beta}` from `T^{E(beta)}` to
/// `T^{E(beta) + Σ c_i (∂beta ∩ e_i)}`.
///
/// Labels at or above `E_cut` may shift below it, so the result is truncated at
/// `r E_cut` where `r < 1` is the smallest energy ratio over the shifted generators.
pub fn energy_shift(a: &FilteredAinfAlgebra, d: &DivisorPairingData, c: &[Q]) -> Result<FilteredAinfAlgebra, DeformError> {
    d.check_len(c)?;
    let (r, gens) = d.generator_ratio(&a.monoid, c)?;
    let e_cut = if r < q(1) { &a.e_cut * &r } else { a.e_cut.clone() };
    let mut ops = OpFamily::new();
    for ((_, beta), op) in &a.ops {
        let s = d.shift_label(beta, c)?;
        if s.energy >= e_cut {
            continue;
        }
        let mut o = op.clone();
        o.label = s;
        family_add(&mut ops, o);
    }
    let out = FilteredAinfAlgebra { monoid: DiscreteMonoid::new(gens)?, ops, e_cut, ..a.clone() };
    out.validate()?;
    Ok(out)
}
