//! Filtered cyclic A∞ algebras and morphisms mod `T^E`, with verifiers for every axiom.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::graded::{
    family_add, insert_compose, prefix_sign, tensor_compose, Budget, Coeff, FamilyIndex,
    GradedSpace, MultiOp, OpFamily, OpKind, Pairing, SVec,
};
use crate::linalg::Mat;
use crate::novikov::{DiscreteMonoid, MonoidElement, Q};
use crate::report::{Report, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AinfError {
    #[error("m_{{0,(0,0)}} must vanish")]
    CurvatureAtZero,
    #[error("label {0} is not in the monoid")]
    LabelNotInMonoid(MonoidElement),
    #[error("label {0} has energy at or above the truncation level")]
    LabelAboveCut(MonoidElement),
    #[error("operation ({k},{beta}) breaks the degree discipline at input {tuple:?} -> output {out}")]
    Degree { k: usize, beta: MonoidElement, tuple: Vec<usize>, out: usize },
    #[error("unit must have degree 0, found degree {0}")]
    InvalidUnit(i64),
    #[error("unit index {0} out of range")]
    UnitOutOfRange(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("operation stored under ({0},{1}) has a different arity or label")]
    KeyMismatch(usize, MonoidElement),
    #[error("monoid mismatch between source and target")]
    MonoidMismatch,
    #[error("morphisms are not composable: {0}")]
    NotComposable(String),
    #[error("f_{{0,(0,0)}} must vanish")]
    MorphismConstantAtZero,
}

/// A gapped cyclic filtered A∞ algebra mod `T^{e_cut}`.
///
/// `arity_bound`, when set, means only operations of arity at most this bound are known;
/// verifiers then only test relations whose every term is known.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredAinfAlgebra<C: Coeff = Q> {
    pub space: GradedSpace,
    pub pairing: Pairing,
    pub monoid: DiscreteMonoid,
    pub ops: OpFamily<C>,
    pub e_cut: Q,
    pub unit: Option<usize>,
    pub arity_bound: Option<usize>,
}

impl<C: Coeff> FilteredAinfAlgebra<C> {
    pub fn new(
        space: GradedSpace,
        pairing: Pairing,
        monoid: DiscreteMonoid,
        ops: Vec<MultiOp<C>>,
        e_cut: Q,
        unit: Option<usize>,
    ) -> Result<Self, AinfError> {
        let mut fam = OpFamily::new();
        for op in ops {
            family_add(&mut fam, op);
        }
        let a = FilteredAinfAlgebra { space, pairing, monoid, ops: fam, e_cut, unit, arity_bound: None };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), AinfError> {
        let d = self.space.dim();
        if self.pairing.matrix.rows != d || self.pairing.matrix.cols != d {
            return Err(AinfError::Dimension(format!(
                "pairing is {}x{}, space has dimension {d}",
                self.pairing.matrix.rows, self.pairing.matrix.cols
            )));
        }
        if let Some(u) = self.unit {
            if u >= d {
                return Err(AinfError::UnitOutOfRange(u));
            }
            if self.space.deg(u) != 0 {
                return Err(AinfError::InvalidUnit(self.space.deg(u)));
            }
        }
        validate_family(&self.ops, &self.monoid, &self.e_cut, d, true)?;
        let sd = self.space.sdegrees();
        for op in self.ops.values() {
            if let Some((tuple, out)) = op.degree_violations(&sd, &sd).into_iter().next() {
                return Err(AinfError::Degree { k: op.arity, beta: op.label.clone(), tuple, out });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn sdeg(&self) -> Vec<i64> {
        self.space.sdegrees()
    }

    pub fn op(&self, k: usize, beta: &MonoidElement) -> Option<&MultiOp<C>> {
        self.ops.get(&(k, beta.clone()))
    }

    /// `m_{1,(0,0)}`, or the zero map.
    pub fn m1(&self) -> MultiOp<C> {
        self.op(1, &MonoidElement::zero())
            .cloned()
            .unwrap_or_else(|| MultiOp::new(1, MonoidElement::zero(), OpKind::Structure))
    }

    /// Drops every operation with label energy at or above `e`.
    pub fn truncate(&self, e: &Q) -> Self {
        let mut a = self.clone();
        a.ops.retain(|(_, b), _| b.energy < *e);
        if *e < a.e_cut {
            a.e_cut = e.clone();
        }
        a
    }

    /// The unfiltered slice `beta = (0,0)`.
    pub fn zero_slice(&self) -> Self {
        let mut a = self.clone();
        a.ops.retain(|(_, b), _| b.is_zero());
        a
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D + Copy) -> FilteredAinfAlgebra<D> {
        let mut ops = OpFamily::new();
        for op in self.ops.values() {
            family_add(&mut ops, op.map(f));
        }
        FilteredAinfAlgebra {
            space: self.space.clone(),
            pairing: self.pairing.clone(),
            monoid: self.monoid.clone(),
            ops,
            e_cut: self.e_cut.clone(),
            unit: self.unit,
            arity_bound: self.arity_bound,
        }
    }

    /// Largest relation arity every term of which is known.
    pub fn checkable_k(&self, k_max: usize) -> Option<usize> {
        match self.arity_bound {
            Some(0) => None,
            Some(b) => Some(k_max.min(b - 1)),
            None => Some(k_max),
        }
    }
}

pub(crate) fn validate_family<C: Coeff>(
    fam: &OpFamily<C>,
    monoid: &DiscreteMonoid,
    e_cut: &Q,
    _dim: usize,
    structure: bool,
) -> Result<(), AinfError> {
    for ((k, b), op) in fam {
        if op.arity != *k || &op.label != b {
            return Err(AinfError::KeyMismatch(*k, b.clone()));
        }
        if !monoid.contains(b) {
            return Err(AinfError::LabelNotInMonoid(b.clone()));
        }
        if b.energy >= *e_cut {
            return Err(AinfError::LabelAboveCut(b.clone()));
        }
        if *k == 0 && b.is_zero() && !op.is_zero() {
            return Err(if structure {
                AinfError::CurvatureAtZero
            } else {
                AinfError::MorphismConstantAtZero
            });
        }
    }
    Ok(())
}

/// Renders a family of residual operations as violations.
pub fn family_report<C: Coeff>(fam: &OpFamily<C>, check: &str) -> Report {
    let mut rep = Report::default();
    for ((k, b), op) in fam {
        for (t, v) in &op.entries {
            let disc = v.iter().map(|(i, c)| (*i, c.to_string())).collect();
            rep.push(Violation::new(check, *k, b.clone(), t.clone(), disc));
        }
    }
    rep
}

fn merge_families<C: Coeff>(parts: Vec<OpFamily<C>>) -> OpFamily<C> {
    let mut out = OpFamily::new();
    for p in parts {
        for (_, op) in p {
            family_add(&mut out, op);
        }
    }
    out
}

/// The signed double sum `sum (-1)^* m(x_1, ..., m(x_i, ...), ...)` for all arities
/// `k <= k_max` and labels below `e_cut`.
pub fn ainf_relation<C: Coeff>(
    ops: &OpFamily<C>,
    sdeg: &[i64],
    k_max: usize,
    e_cut: &Q,
) -> OpFamily<C> {
    let outers: Vec<&MultiOp<C>> = ops.values().filter(|o| o.arity > 0).collect();
    let parts: Vec<OpFamily<C>> = outers
        .par_iter()
        .map(|o| {
            let mut fam = OpFamily::new();
            for i in ops.values() {
                if o.arity + i.arity - 1 > k_max || o.label.add(&i.label).energy >= *e_cut {
                    continue;
                }
                for slot in 0..o.arity {
                    family_add(
                        &mut fam,
                        insert_compose(o, i, slot, sdeg, true, OpKind::Homotopy { shift: 2 }),
                    );
                }
            }
            fam
        })
        .collect();
    merge_families(parts)
}

pub fn verify_ainf<C: Coeff>(a: &FilteredAinfAlgebra<C>, k_max: usize) -> Report {
    let Some(k) = a.checkable_k(k_max) else {
        return Report::default();
    };
    family_report(&ainf_relation(&a.ops, &a.sdeg(), k, &a.e_cut), "ainf").sorted()
}

/// `<m(x_1..x_k), x_0>` as a sparse form keyed by `(x_1, ..., x_k, x_0)`.
pub fn pairing_form<C: Coeff>(op: &MultiOp<C>, pairing: &Pairing) -> BTreeMap<Vec<usize>, C> {
    let d = pairing.matrix.rows;
    let cols: Vec<Vec<(usize, Q)>> = (0..d)
        .map(|j| {
            (0..d)
                .filter(|&x0| !Coeff::is_zero(pairing.get(j, x0)))
                .map(|x0| (x0, pairing.get(j, x0).clone()))
                .collect()
        })
        .collect();
    let mut form: BTreeMap<Vec<usize>, C> = BTreeMap::new();
    for (t, v) in &op.entries {
        for (j, c) in v {
            for (x0, p) in &cols[*j] {
                let mut key = t.clone();
                key.push(*x0);
                let e = form.entry(key).or_insert_with(C::zero);
                e.add_assign(&c.scale(p));
            }
        }
    }
    form.retain(|_, c| !c.is_zero());
    form
}

fn rot_right(key: &[usize]) -> Vec<usize> {
    let mut r = Vec::with_capacity(key.len());
    r.push(key[key.len() - 1]);
    r.extend_from_slice(&key[..key.len() - 1]);
    r
}

fn rot_left(key: &[usize]) -> Vec<usize> {
    let mut r = key[1..].to_vec();
    r.push(key[0]);
    r
}

/// Cyclic symmetry residuals of a single operation: for every key `(x_1..x_k, x_0)`,
/// `<m(x_1..x_k),x_0> - (-1)^{deg'x_0 sum deg'x_i} <m(x_0..x_{k-1}),x_k>`.
pub fn cyclic_residuals<C: Coeff>(
    op: &MultiOp<C>,
    pairing: &Pairing,
    sdeg: &[i64],
) -> Vec<(Vec<usize>, C)> {
    if op.arity == 0 {
        return Vec::new();
    }
    let form = pairing_form(op, pairing);
    let mut keys: BTreeSet<Vec<usize>> = form.keys().cloned().collect();
    keys.extend(form.keys().map(|k| rot_left(k)));
    let mut out = Vec::new();
    for key in keys {
        let x0 = key[key.len() - 1];
        let rest: i64 = key[..key.len() - 1].iter().map(|&i| sdeg[i]).sum();
        let sign = if (sdeg[x0] * rest).rem_euclid(2) == 0 { 1 } else { -1 };
        let lhs = form.get(&key).cloned().unwrap_or_else(C::zero);
        let rhs = form.get(&rot_right(&key)).cloned().unwrap_or_else(C::zero);
        let diff = lhs.add(&rhs.signed(-sign));
        if !diff.is_zero() {
            out.push((key, diff));
        }
    }
    out
}

pub fn cyclic_family_report<C: Coeff>(
    fam: &OpFamily<C>,
    pairing: &Pairing,
    sdeg: &[i64],
    k_max: usize,
    check: &str,
) -> Report {
    let ops: Vec<&MultiOp<C>> = fam.values().filter(|o| o.arity <= k_max).collect();
    let parts: Vec<Vec<Violation>> = ops
        .par_iter()
        .map(|op| {
            cyclic_residuals(op, pairing, sdeg)
                .into_iter()
                .map(|(key, diff)| {
                    Violation::new(check, op.arity, op.label.clone(), key, vec![(0, diff.to_string())])
                })
                .collect()
        })
        .collect();
    let mut rep = Report::default();
    for p in parts {
        rep.violations.extend(p);
    }
    rep.sorted()
}

pub fn verify_cyclic<C: Coeff>(a: &FilteredAinfAlgebra<C>, k_max: usize) -> Report {
    cyclic_family_report(&a.ops, &a.pairing, &a.sdeg(), k_max, "cyclic")
}

/// Every operation in `fam` other than `m_{2,(0,0)}` must vanish on inputs containing `unit`.
pub fn insertion_report<C: Coeff>(
    fam: &OpFamily<C>,
    unit: usize,
    k_max: usize,
    skip_m2: bool,
    check: &str,
) -> Report {
    let mut rep = Report::default();
    for ((k, b), op) in fam {
        if *k > k_max || (skip_m2 && *k == 2 && b.is_zero()) {
            continue;
        }
        for (t, v) in &op.entries {
            if t.contains(&unit) {
                let disc = v.iter().map(|(i, c)| (*i, c.to_string())).collect();
                rep.push(Violation::new(check, *k, b.clone(), t.clone(), disc));
            }
        }
    }
    rep
}

pub fn verify_unital<C: Coeff>(a: &FilteredAinfAlgebra<C>, k_max: usize) -> Result<Report, AinfError> {
    let Some(e) = a.unit else {
        return Ok(Report::default());
    };
    if a.space.deg(e) != 0 {
        return Err(AinfError::InvalidUnit(a.space.deg(e)));
    }
    let mut rep = insertion_report(&a.ops, e, k_max, true, "unit");
    if k_max >= 2 {
        let zero = MonoidElement::zero();
        let m2 = a.op(2, &zero);
        for x in 0..a.dim() {
            let sgn = if a.space.deg(x).rem_euclid(2) == 0 { 1 } else { -1 };
            for (tuple, s) in [(vec![e, x], 1), (vec![x, e], sgn)] {
                let got = m2.and_then(|m| m.get(&tuple)).cloned().unwrap_or_default();
                let mut diff = got;
                crate::graded::svec_add(&mut diff, x, &C::one().signed(-s));
                if !diff.is_empty() {
                    let disc = diff.iter().map(|(i, c)| (*i, c.to_string())).collect();
                    rep.push(Violation::new("unit", 2, zero.clone(), tuple, disc));
                }
            }
        }
    }
    Ok(rep.sorted())
}

/// A gapped filtered A∞ homomorphism `source -> target` mod `T^{e_cut}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AinfMorphism<C: Coeff = Q> {
    pub source: FilteredAinfAlgebra<C>,
    pub target: FilteredAinfAlgebra<C>,
    pub maps: OpFamily<C>,
    pub e_cut: Q,
    pub arity_bound: Option<usize>,
}

impl<C: Coeff> AinfMorphism<C> {
    pub fn new(
        source: FilteredAinfAlgebra<C>,
        target: FilteredAinfAlgebra<C>,
        maps: Vec<MultiOp<C>>,
        e_cut: Q,
    ) -> Result<Self, AinfError> {
        if source.monoid != target.monoid {
            return Err(AinfError::MonoidMismatch);
        }
        let mut fam = OpFamily::new();
        for op in maps {
            family_add(&mut fam, op);
        }
        validate_family(&fam, &source.monoid, &e_cut, source.dim(), false)?;
        let (si, so) = (source.sdeg(), target.sdeg());
        for op in fam.values() {
            if let Some((tuple, out)) = op.degree_violations(&si, &so).into_iter().next() {
                return Err(AinfError::Degree { k: op.arity, beta: op.label.clone(), tuple, out });
            }
        }
        Ok(AinfMorphism { source, target, maps: fam, e_cut, arity_bound: None })
    }

    pub fn identity(a: &FilteredAinfAlgebra<C>) -> Self {
        let mut maps = OpFamily::new();
        family_add(&mut maps, MultiOp::identity(a.dim()));
        AinfMorphism {
            source: a.clone(),
            target: a.clone(),
            maps,
            e_cut: a.e_cut.clone(),
            arity_bound: None,
        }
    }

    pub fn map(&self, k: usize, beta: &MonoidElement) -> Option<&MultiOp<C>> {
        self.maps.get(&(k, beta.clone()))
    }

    fn checkable_k(&self, k_max: usize) -> Option<usize> {
        let mut k = Some(k_max);
        for b in [self.arity_bound, self.source.arity_bound, self.target.arity_bound].into_iter().flatten() {
            k = match (k, b) {
                (_, 0) => None,
                (Some(k), b) => Some(k.min(b - 1)),
                (None, _) => None,
            };
        }
        k
    }
}

/// `sum m'(f (x) ... (x) f)`: the left-hand side of the morphism equation.
pub fn morphism_lhs<C: Coeff>(
    target_ops: &OpFamily<C>,
    f: &OpFamily<C>,
    sdeg_src: &[i64],
    k_max: usize,
    e_cut: &Q,
) -> OpFamily<C> {
    let idx = FamilyIndex::new(f);
    let budget = Budget { e_cut: e_cut.clone(), max_arity: Some(k_max), target: None };
    let ops: Vec<&MultiOp<C>> = target_ops.values().filter(|o| o.label.energy < *e_cut).collect();
    let parts: Vec<OpFamily<C>> = ops
        .par_iter()
        .map(|m| {
            let slots = vec![&idx; m.arity];
            tensor_compose(m, &slots, None, sdeg_src, &budget, OpKind::Homotopy { shift: 1 })
        })
        .collect();
    merge_families(parts)
}

/// `sum (-1)^* f(x_1, ..., m(x_i, ...), ...)`: the right-hand side of the morphism equation.
pub fn morphism_rhs<C: Coeff>(
    f: &OpFamily<C>,
    source_ops: &OpFamily<C>,
    sdeg_src: &[i64],
    k_max: usize,
    e_cut: &Q,
) -> OpFamily<C> {
    let fs: Vec<&MultiOp<C>> = f.values().filter(|o| o.arity > 0).collect();
    let parts: Vec<OpFamily<C>> = fs
        .par_iter()
        .map(|g| {
            let mut fam = OpFamily::new();
            for m in source_ops.values() {
                if g.arity + m.arity - 1 > k_max || g.label.add(&m.label).energy >= *e_cut {
                    continue;
                }
                for slot in 0..g.arity {
                    family_add(
                        &mut fam,
                        insert_compose(g, m, slot, sdeg_src, true, OpKind::Homotopy { shift: 1 }),
                    );
                }
            }
            fam
        })
        .collect();
    merge_families(parts)
}

fn sub_families<C: Coeff>(a: OpFamily<C>, b: OpFamily<C>) -> OpFamily<C> {
    let mut out = a;
    for (_, op) in b {
        family_add(&mut out, op.neg());
    }
    out
}

pub fn verify_morphism<C: Coeff>(f: &AinfMorphism<C>, k_max: usize) -> Result<Report, AinfError> {
    if f.source.monoid != f.target.monoid {
        return Err(AinfError::MonoidMismatch);
    }
    let Some(k) = f.checkable_k(k_max) else {
        return Ok(Report::default());
    };
    let e = min_q(&[&f.e_cut, &f.source.e_cut, &f.target.e_cut]);
    let sd = f.source.sdeg();
    let lhs = morphism_lhs(&f.target.ops, &f.maps, &sd, k, &e);
    let rhs = morphism_rhs(&f.maps, &f.source.ops, &sd, k, &e);
    Ok(family_report(&sub_families(lhs, rhs), "morphism").sorted())
}

pub(crate) fn min_q(xs: &[&Q]) -> Q {
    xs.iter().min().map(|x| (*x).clone()).expect("nonempty")
}

/// Residual forms of the cyclic morphism conditions, excluding the `(2,(0,0))` slot, keyed
/// by inputs `(x_1, ..., x_k)`.
pub fn cyclic_morphism_forms<C: Coeff>(
    maps: &OpFamily<C>,
    target_pairing: &Pairing,
    k_max: usize,
    e_cut: &Q,
) -> BTreeMap<(usize, MonoidElement), BTreeMap<Vec<usize>, C>> {
    let d = target_pairing.matrix.rows;
    let mut out: BTreeMap<(usize, MonoidElement), BTreeMap<Vec<usize>, C>> = BTreeMap::new();
    let list: Vec<&MultiOp<C>> = maps.values().collect();
    let zero = MonoidElement::zero();
    for f1 in &list {
        for f2 in &list {
            let k = f1.arity + f2.arity;
            let b = f1.label.add(&f2.label);
            if k > k_max || b.energy >= *e_cut || (k == 2 && b == zero) {
                continue;
            }
            let form = out.entry((k, b)).or_default();
            for (t1, v1) in &f1.entries {
                for (t2, v2) in &f2.entries {
                    let mut s = C::zero();
                    for (i, a) in v1 {
                        for (j, c) in v2 {
                            debug_assert!(*i < d && *j < d);
                            let p = target_pairing.get(*i, *j);
                            if !Coeff::is_zero(p) {
                                s.add_assign(&a.mul(c).scale(p));
                            }
                        }
                    }
                    if !s.is_zero() {
                        let mut key = t1.clone();
                        key.extend_from_slice(t2);
                        form.entry(key).or_insert_with(C::zero).add_assign(&s);
                    }
                }
            }
        }
    }
    for f in out.values_mut() {
        f.retain(|_, c| !c.is_zero());
    }
    out.retain(|_, f| !f.is_empty());
    out
}

pub fn verify_cyclic_morphism<C: Coeff>(f: &AinfMorphism<C>, k_max: usize) -> Result<Report, AinfError> {
    if f.source.monoid != f.target.monoid {
        return Err(AinfError::MonoidMismatch);
    }
    let mut rep = Report::default();
    let zero = MonoidElement::zero();
    let d = f.source.dim();
    let f1 = f.map(1, &zero);
    let img = |x: usize| -> SVec<C> {
        f1.and_then(|m| m.get(&[x])).cloned().unwrap_or_default()
    };
    let imgs: Vec<SVec<C>> = (0..d).map(img).collect();
    for x in 0..d {
        for y in 0..d {
            let got = f.target.pairing.eval(&imgs[x], &imgs[y]);
            let want = C::from_q(f.source.pairing.get(x, y).clone());
            let diff = got.add(&want.neg());
            if !diff.is_zero() {
                rep.push(Violation::new("cyclic-morphism-linear", 2, zero.clone(), vec![x, y], vec![(0, diff.to_string())]));
            }
        }
    }
    let e = min_q(&[&f.e_cut, &f.source.e_cut, &f.target.e_cut]);
    for ((k, b), form) in cyclic_morphism_forms(&f.maps, &f.target.pairing, k_max, &e) {
        for (t, c) in form {
            rep.push(Violation::new("cyclic-morphism", k, b.clone(), t, vec![(0, c.to_string())]));
        }
    }
    Ok(rep.sorted())
}

/// `(g o f)_{k,beta} = sum g_{l,beta_0} o (f_{k_1,beta_1} (x) ... (x) f_{k_l,beta_l})`.
pub fn compose_morphisms<C: Coeff>(
    g: &AinfMorphism<C>,
    f: &AinfMorphism<C>,
) -> Result<AinfMorphism<C>, AinfError> {
    if f.target.space != g.source.space || f.target.monoid != g.source.monoid {
        return Err(AinfError::NotComposable("target of f differs from source of g".into()));
    }
    let e = min_q(&[&g.e_cut, &f.e_cut]);
    let max_arity = match (f.arity_bound, g.arity_bound) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let idx = FamilyIndex::new(&f.maps);
    let budget = Budget { e_cut: e.clone(), max_arity, target: None };
    let sd = f.source.sdeg();
    let gs: Vec<&MultiOp<C>> = g.maps.values().collect();
    let parts: Vec<OpFamily<C>> = gs
        .par_iter()
        .map(|gop| {
            let slots = vec![&idx; gop.arity];
            tensor_compose(gop, &slots, None, &sd, &budget, OpKind::Morphism)
        })
        .collect();
    let maps = merge_families(parts);
    Ok(AinfMorphism {
        source: f.source.clone(),
        target: g.target.clone(),
        maps,
        e_cut: e,
        arity_bound: max_arity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingConvention {
    AngleToParen,
    ParenToAngle,
}

/// The companion pairing `(u,v) = (-1)^{deg u} <u,v>`; the map is an involution.
pub fn convert_pairing_convention(space: &GradedSpace, pairing: &Pairing, _dir: PairingConvention) -> Pairing {
    let d = space.dim();
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let v = pairing.get(i, j).clone();
            m.set(i, j, if space.deg(i).rem_euclid(2) == 0 { v } else { -v });
        }
    }
    Pairing::new(m)
}

/// Cyclic symmetry in the round-bracket convention:
/// `(x_0, m(x_1..x_k)) = (-1)^{deg'x_0 sum deg'x_i} (x_1, m(x_2..x_k,x_0))`.
pub fn verify_cyclic_paren<C: Coeff>(
    ops: &OpFamily<C>,
    space: &GradedSpace,
    paren: &Pairing,
    k_max: usize,
) -> Report {
    let sdeg = space.sdegrees();
    let d = space.dim();
    let mut rep = Report::default();
    for op in ops.values().filter(|o| o.arity > 0 && o.arity <= k_max) {
        // form keyed by (x_0, x_1, ..., x_k)
        let mut form: BTreeMap<Vec<usize>, C> = BTreeMap::new();
        for (t, v) in &op.entries {
            for (j, c) in v {
                for x0 in 0..d {
                    let p = paren.get(x0, *j);
                    if Coeff::is_zero(p) {
                        continue;
                    }
                    let mut key = vec![x0];
                    key.extend_from_slice(t);
                    form.entry(key).or_insert_with(C::zero).add_assign(&c.scale(p));
                }
            }
        }
        form.retain(|_, c| !c.is_zero());
        let mut keys: BTreeSet<Vec<usize>> = form.keys().cloned().collect();
        keys.extend(form.keys().map(|k| rot_right(k)));
        for key in keys {
            let rest: Vec<usize> = (1..key.len()).collect();
            let s = prefix_sign(&sdeg, &rest.iter().map(|&i| key[i]).collect::<Vec<_>>());
            let sign = if sdeg[key[0]].rem_euclid(2) == 0 { 1 } else { s };
            let lhs = form.get(&key).cloned().unwrap_or_else(C::zero);
            let rhs = form.get(&rot_left(&key)).cloned().unwrap_or_else(C::zero);
            let diff = lhs.add(&rhs.signed(-sign));
            if !diff.is_zero() {
                rep.push(Violation::new("cyclic-paren", op.arity, op.label.clone(), key, vec![(0, diff.to_string())]));
            }
        }
    }
    rep.sorted()
}
