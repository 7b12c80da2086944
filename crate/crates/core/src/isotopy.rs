//! Pseudo-isotopies of cyclic filtered A∞ algebras with piecewise-polynomial time
//! dependence: verification, the `dt`-extended ("hat") structure, integration to cyclic
//! A∞ isomorphisms, extension to higher energy, reparametrization, transfer to canonical
//! models, and two-parameter families.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::ainf::{
    ainf_relation, cyclic_family_report, family_report, insertion_report, validate_family, verify_ainf,
    verify_cyclic, verify_unital, AinfError, AinfMorphism, FilteredAinfAlgebra,
};
use crate::graded::{
    family_add, insert_compose, prefix_sign, tensor_compose, Budget, Coeff, FamilyIndex, GradedSpace, MultiOp,
    OpFamily, OpKind, Pairing,
};
use crate::linalg::Mat;
use crate::novikov::{fmt_q, q, MonoidElement, Q};
use crate::poly::{Differentiable, PiecewiseBPoly, PiecewisePoly, PolyError, UPoly};
use crate::report::{Report, Violation};
use crate::transfer::{transfer_canonical, HodgeData, TransferError};
use crate::trees::{RibbonTree, Tree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsotopyError {
    #[error("coefficient of ({k}, {beta}) at {tuple:?} jumps at t = {at}")]
    Discontinuous { k: usize, beta: MonoidElement, tuple: Vec<usize>, at: String },
    #[error("boundary mismatch: {0}")]
    BoundaryMismatch(String),
    #[error("junction mismatch: the first isotopy does not end where the second starts")]
    JunctionMismatch,
    #[error("interval [{0}, {1}] is not inside [0, 1] in increasing order")]
    BadInterval(String, String),
    #[error("reparametrization must map 0 to {0} and 1 to {1}")]
    BadReparametrization(String, String),
    #[error("pseudo-isotopy fails verification with {0} violations; first: {1}")]
    Unverified(usize, String),
    #[error("connection label {0} lies outside the extension window")]
    ConnectionLevel(MonoidElement),
    #[error("connection at ({k}, {beta}) violates the degree rule at {tuple:?}")]
    ConnectionDegree { k: usize, beta: MonoidElement, tuple: Vec<usize> },
    #[error(transparent)]
    Ainf(#[from] AinfError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
}

fn to_q_coeffs(op: &MultiOp<Q>) -> MultiOp<PiecewisePoly> {
    op.map(|c| PiecewisePoly::constant(c.clone()))
}

// ---------------------------------------------------------------------------------------
// Hat structures

/// A linear map `L` on basis vectors; acting on a vector-valued function it sends
/// `f(t) v` to `∂f (t) L(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub var: usize,
    pub map: MultiOp<Q>,
}

/// A filtered A∞ structure on forms `x + dt∧y (+ ds∧z + dt∧ds∧w)` with function
/// coefficients. `algebra.ops` holds the coefficient-multilinear part, and the derivations
/// complete `m̂_{1,(0,0)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HatAlgebra<C: Coeff> {
    pub algebra: FilteredAinfAlgebra<C>,
    pub derivations: Vec<Derivation>,
}

/// The operations `x ↦ base(x) + dt∧(conn(x) ∓ Σ ± base(.., y_i, ..))` on `C ⊕ dt·C`,
/// where `y` inputs are indices shifted by `dim` and the outer sign is the parity of `base`.
pub fn hat_ops<C: Coeff>(base: &OpFamily<C>, conn: &OpFamily<C>, sdeg: &[i64]) -> OpFamily<C> {
    let dim = sdeg.len();
    let mut out = OpFamily::new();
    for op in base.values() {
        let mut h = MultiOp::new(op.arity, op.label.clone(), op.kind);
        for (t, v) in &op.entries {
            h.add_vec(t.clone(), v, &C::one());
            let shifted: crate::graded::SVec<C> = v.iter().map(|(j, c)| (j + dim, c.clone())).collect();
            for i in 0..t.len() {
                let mut ti = t.clone();
                ti[i] += dim;
                let s = if op.kind.is_odd() { -1 } else { 1 } * prefix_sign(sdeg, &t[..i]);
                h.add_vec(ti, &shifted, &C::one().signed(s));
            }
        }
        family_add(&mut out, h);
    }
    for op in conn.values() {
        let mut h = MultiOp::new(op.arity, op.label.clone(), OpKind::Structure);
        for (t, v) in &op.entries {
            let shifted: crate::graded::SVec<C> = v.iter().map(|(j, c)| (j + dim, c.clone())).collect();
            h.add_vec(t.clone(), &shifted, &C::one());
        }
        family_add(&mut out, h);
    }
    out
}

impl<C: Coeff> HatAlgebra<C> {
    pub fn base(a: FilteredAinfAlgebra<C>) -> Self {
        HatAlgebra { algebra: a, derivations: Vec::new() }
    }

    /// Adjoins a parameter `var` with connection `conn`; new basis names get `prefix`.
    pub fn extend(&self, conn: &OpFamily<C>, var: usize, prefix: &str) -> Self {
        let a = &self.algebra;
        let d = a.dim();
        let sdeg = a.sdeg();
        let mut basis: Vec<(String, i64)> = (0..d).map(|i| (a.space.name(i).to_string(), a.space.deg(i))).collect();
        basis.extend((0..d).map(|i| (format!("{prefix}{}", a.space.name(i)), a.space.deg(i) + 1)));
        let space = GradedSpace::new(basis, a.space.n() + 1).expect("prefixed names are fresh");
        let mut pm = Mat::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                pm.set(i, j, a.pairing.get(i, j).clone());
            }
        }
        let ops = hat_ops(&a.ops, conn, &sdeg);
        let algebra = FilteredAinfAlgebra {
            space,
            pairing: Pairing::new(pm),
            monoid: a.monoid.clone(),
            ops,
            e_cut: a.e_cut.clone(),
            unit: a.unit,
            arity_bound: a.arity_bound,
        };
        let mut derivations = Vec::new();
        for der in &self.derivations {
            let mut map = MultiOp::new(1, MonoidElement::zero(), OpKind::Homotopy { shift: 1 });
            for (t, v) in &der.map.entries {
                map.add_vec(t.clone(), v, &q(1));
                let shifted: crate::graded::SVec<Q> = v.iter().map(|(j, c)| (j + d, c.clone())).collect();
                map.add_vec(vec![t[0] + d], &shifted, &q(-1));
            }
            derivations.push(Derivation { var: der.var, map });
        }
        let mut map = MultiOp::new(1, MonoidElement::zero(), OpKind::Homotopy { shift: 1 });
        for i in 0..d {
            map.add_entry(vec![i], i + d, &q(1));
        }
        derivations.push(Derivation { var, map });
        HatAlgebra { algebra, derivations }
    }
}

fn post_map<C: Coeff>(op: &MultiOp<C>, l: &MultiOp<Q>, dim: usize) -> MultiOp<C> {
    let cols: Vec<crate::graded::SVec<Q>> =
        (0..dim).map(|i| l.get(&[i]).cloned().unwrap_or_default()).collect();
    op.post_linear(&cols)
}

/// Checks the A∞ relations of a hat structure, including the derivation terms:
/// `ainf` (order zero, carries all content), `derivation` (each derivation graded-commutes
/// with every operation) and `derivation-square`.
pub fn verify_hat<C: Differentiable>(h: &HatAlgebra<C>, k_max: usize) -> Report {
    let a = &h.algebra;
    let dim = a.dim();
    let sdeg = a.sdeg();
    let Some(kk) = a.checkable_k(k_max) else {
        return Report::default();
    };
    let mut rel = ainf_relation(&a.ops, &sdeg, kk, &a.e_cut);
    for der in &h.derivations {
        for op in a.ops.values().filter(|o| o.arity <= kk) {
            let mut dop = op.map(|c| c.partial(der.var));
            dop.kind = OpKind::Homotopy { shift: 2 };
            family_add(&mut rel, post_map(&dop, &der.map, dim));
        }
    }
    let mut rep = family_report(&rel, "ainf");
    for der in &h.derivations {
        let lc = der.map.map(|c| C::from_q(c.clone()));
        for op in a.ops.values().filter(|o| o.arity <= kk) {
            for slot in 0..op.arity {
                let mut r = post_map(op, &der.map, dim);
                r.kind = OpKind::Homotopy { shift: 2 };
                r.add_op(&insert_compose(op, &lc, slot, &sdeg, true, r.kind));
                for (t, v) in &r.entries {
                    let disc = v.iter().map(|(i, c)| (*i, c.to_string())).collect();
                    rep.push(
                        Violation::new("derivation", op.arity, op.label.clone(), t.clone(), disc)
                            .with_note(format!("variable {}, slot {}", der.var, slot + 1)),
                    );
                }
            }
        }
    }
    for (i, u) in h.derivations.iter().enumerate() {
        for w in &h.derivations[i..] {
            let mut r = insert_compose(&u.map, &w.map, 0, &sdeg, false, OpKind::Homotopy { shift: 2 });
            if !std::ptr::eq(u, w) {
                r.add_op(&insert_compose(&w.map, &u.map, 0, &sdeg, false, r.kind));
            }
            for (t, v) in &r.entries {
                let disc = v.iter().map(|(i, c)| (*i, fmt_q(c))).collect();
                rep.push(Violation::new("derivation-square", 1, MonoidElement::zero(), t.clone(), disc));
            }
        }
    }
    rep.sorted()
}

// ---------------------------------------------------------------------------------------
// One-parameter pseudo-isotopies

/// `(m^t, c^t)` on `[0,1]`. `m` carries the base data; `c` has the degree of a morphism.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoIsotopy {
    pub m: FilteredAinfAlgebra<PiecewisePoly>,
    pub c: OpFamily<PiecewisePoly>,
}

impl PseudoIsotopy {
    pub fn new(m: FilteredAinfAlgebra<PiecewisePoly>, c: OpFamily<PiecewisePoly>) -> Result<Self, IsotopyError> {
        m.validate()?;
        validate_family(&c, &m.monoid, &m.e_cut, m.dim(), false)?;
        let sd = m.sdeg();
        for op in c.values() {
            if let Some((tuple, _)) = op.degree_violations(&sd, &sd).into_iter().next() {
                return Err(IsotopyError::ConnectionDegree { k: op.arity, beta: op.label.clone(), tuple });
            }
        }
        Ok(PseudoIsotopy { m, c })
    }

    /// `m^t ≡ a`, `c ≡ 0`.
    pub fn constant(a: &FilteredAinfAlgebra) -> Self {
        PseudoIsotopy { m: a.map_coeffs(|c| PiecewisePoly::constant(c.clone())), c: OpFamily::new() }
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// The algebra `m^t` at a fixed time.
    pub fn slice(&self, t: &Q) -> FilteredAinfAlgebra {
        self.m.map_coeffs(|p| p.eval(t))
    }

    /// The connection `c^t` at a fixed time.
    pub fn c_slice(&self, t: &Q) -> OpFamily<Q> {
        let mut out = OpFamily::new();
        for op in self.c.values() {
            family_add(&mut out, op.map(|p| p.eval(t)));
        }
        out
    }

    pub fn truncate(&self, e: &Q) -> Self {
        let mut c = self.c.clone();
        c.retain(|(_, b), _| b.energy < *e);
        PseudoIsotopy { m: self.m.truncate(e), c }
    }

    fn continuity(&self) -> Result<(), IsotopyError> {
        for fam in [&self.m.ops, &self.c] {
            for op in fam.values() {
                for (t, v) in &op.entries {
                    for p in v.values() {
                        if let Some(at) = p.discontinuity() {
                            return Err(IsotopyError::Discontinuous {
                                k: op.arity,
                                beta: op.label.clone(),
                                tuple: t.clone(),
                                at: fmt_q(&at),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `dm/dt + Σ (-1)^* c(.., m(..), ..) − Σ m(.., c(..), ..)` up to arity `k_max`.
pub fn isotopy_residual(
    m: &OpFamily<PiecewisePoly>,
    c: &OpFamily<PiecewisePoly>,
    sdeg: &[i64],
    k_max: usize,
    e_cut: &Q,
) -> OpFamily<PiecewisePoly> {
    let kind = OpKind::Homotopy { shift: 1 };
    let mut out = OpFamily::new();
    for op in m.values().filter(|o| o.arity <= k_max) {
        let mut d = op.map(|p| p.derivative());
        d.kind = kind;
        family_add(&mut out, d);
    }
    let pairs: Vec<(&MultiOp<PiecewisePoly>, &MultiOp<PiecewisePoly>, bool)> = c
        .values()
        .flat_map(|co| m.values().flat_map(move |mo| [(co, mo, true), (mo, co, false)]))
        .filter(|(o, i, _)| {
            o.arity > 0 && o.arity + i.arity - 1 <= k_max && o.label.add(&i.label).energy < *e_cut
        })
        .collect();
    let parts: Vec<MultiOp<PiecewisePoly>> = pairs
        .par_iter()
        .map(|(o, i, c_outer)| {
            let mut acc = MultiOp::new(o.arity + i.arity - 1, o.label.add(&i.label), kind);
            for slot in 0..o.arity {
                let r = insert_compose(o, i, slot, sdeg, *c_outer, kind);
                if *c_outer {
                    acc.add_op(&r);
                } else {
                    acc.add_op(&r.neg());
                }
            }
            acc
        })
        .collect();
    for p in parts {
        family_add(&mut out, p);
    }
    out
}

/// Checks every pseudo-isotopy axiom as an exact polynomial identity per piece.
pub fn verify_isotopy(pi: &PseudoIsotopy, k_max: usize) -> Result<Report, IsotopyError> {
    pi.continuity()?;
    let m = &pi.m;
    let sdeg = m.sdeg();
    let mut rep = verify_ainf(m, k_max);
    rep.extend(verify_cyclic(m, k_max));
    rep.extend(cyclic_family_report(&pi.c, &m.pairing, &sdeg, k_max, "cyclic-c"));
    let kk = m.checkable_k(k_max).unwrap_or(0);
    rep.extend(family_report(&isotopy_residual(&m.ops, &pi.c, &sdeg, kk, &m.e_cut), "isotopy-eq"));
    for op in m.ops.values().filter(|o| o.label.is_zero() && o.arity <= k_max) {
        for (t, v) in &op.entries {
            for (j, p) in v {
                if !p.is_constant() {
                    rep.push(
                        Violation::new("constant-level0", op.arity, op.label.clone(), t.clone(), vec![(*j, p.to_string())])
                            .with_note("m at level zero depends on t"),
                    );
                }
            }
        }
    }
    for op in pi.c.values().filter(|o| o.label.is_zero() && o.arity <= k_max) {
        rep.extend(family_report(&[((op.arity, op.label.clone()), op.clone())].into_iter().collect(), "constant-level0"));
    }
    rep.extend(verify_unital(m, k_max)?);
    if let Some(e) = m.unit {
        rep.extend(insertion_report(&pi.c, e, k_max, false, "unit-c"));
    }
    Ok(rep.sorted())
}

/// The structure `m̂` on `C ⊕ dt·C` with the derivation `x ↦ dt∧dx/dt`.
pub fn hat_structure(pi: &PseudoIsotopy) -> HatAlgebra<PiecewisePoly> {
    HatAlgebra::base(pi.m.clone()).extend(&pi.c, 0, "dt.")
}

// ---------------------------------------------------------------------------------------
// Integration

/// Verification applied by [`integrate_to_morphism`] before integrating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegrateOptions {
    /// Arity up to which the isotopy is verified first; `None` skips verification.
    pub verify_k_max: Option<usize>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { verify_k_max: Some(4) }
    }
}

/// `F(s) = δ·id − ∫_{τ0}^s Σ c^u ∘ (F(u) ⊗ ... ⊗ F(u)) du`, level by level in energy.
pub fn flow(pi: &PseudoIsotopy, tau0: &Q) -> OpFamily<PiecewisePoly> {
    let dim = pi.dim();
    let sdeg = pi.m.sdeg();
    let mut f: OpFamily<PiecewisePoly> = OpFamily::new();
    family_add(&mut f, MultiOp::identity(dim));
    for beta in pi.m.monoid.enumerate(&pi.m.e_cut) {
        if beta.is_zero() {
            continue;
        }
        let idx = FamilyIndex::new(&f);
        let budget = Budget { e_cut: pi.m.e_cut.clone(), max_arity: None, target: Some(beta.clone()) };
        let mut level: OpFamily<PiecewisePoly> = OpFamily::new();
        for c in pi.c.values().filter(|c| c.label.energy <= beta.energy) {
            let slots = vec![&idx; c.arity];
            for (_, op) in tensor_compose(c, &slots, None, &sdeg, &budget, OpKind::Morphism) {
                family_add(&mut level, op);
            }
        }
        for (_, op) in level {
            let mut g = op.map(|p| p.antiderivative_from(tau0).neg());
            g.kind = OpKind::Morphism;
            family_add(&mut f, g);
        }
    }
    f
}

fn check_interval(tau0: &Q, tau1: &Q) -> Result<(), IsotopyError> {
    if *tau0 < q(0) || tau1 < tau0 || *tau1 > q(1) {
        return Err(IsotopyError::BadInterval(fmt_q(tau0), fmt_q(tau1)));
    }
    Ok(())
}

fn require_verified(pi: &PseudoIsotopy, opts: &IntegrateOptions) -> Result<(), IsotopyError> {
    if let Some(k) = opts.verify_k_max {
        let rep = verify_isotopy(pi, k)?;
        if !rep.is_ok() {
            return Err(IsotopyError::Unverified(rep.len(), rep.violations[0].to_string()));
        }
    }
    Ok(())
}

/// The cyclic A∞ homomorphism `m^{τ0} → m^{τ1}` given by summing over trees with time
/// allocations.
pub fn integrate_to_morphism(
    pi: &PseudoIsotopy,
    tau0: &Q,
    tau1: &Q,
    opts: &IntegrateOptions,
) -> Result<AinfMorphism, IsotopyError> {
    check_interval(tau0, tau1)?;
    require_verified(pi, opts)?;
    let f = flow(pi, tau0);
    let mut maps = OpFamily::new();
    for op in f.values() {
        family_add(&mut maps, op.map(|p| p.eval(tau1)));
    }
    Ok(AinfMorphism {
        source: pi.slice(tau0),
        target: pi.slice(tau1),
        maps,
        e_cut: pi.m.e_cut.clone(),
        arity_bound: None,
    })
}

/// The contribution of one tree: `value(Γ; s) = −∫_{τ0}^s c^u_{root} ∘ ⊗ value(Γ_i; u) du`,
/// evaluated at `τ1`.
pub fn integrate_tree(pi: &PseudoIsotopy, tree: &RibbonTree, tau0: &Q, tau1: &Q) -> MultiOp<Q> {
    let sdeg = pi.m.sdeg();
    let dim = pi.dim();
    fn rec(pi: &PseudoIsotopy, t: &Tree, tau0: &Q, sdeg: &[i64], dim: usize) -> MultiOp<PiecewisePoly> {
        match t {
            Tree::Leaf => MultiOp::identity(dim),
            Tree::Node { label, children } => {
                let subs: Vec<MultiOp<PiecewisePoly>> = children.iter().map(|c| rec(pi, c, tau0, sdeg, dim)).collect();
                let Some(c) = pi.c.get(&(children.len(), label.clone())) else {
                    return MultiOp::new(t.leaves(), t.label_sum(), OpKind::Morphism);
                };
                let s = crate::transfer::compose_single(c, &subs, sdeg);
                let mut out = s.map(|p| p.antiderivative_from(tau0).neg());
                out.kind = OpKind::Morphism;
                out
            }
        }
    }
    rec(pi, &tree.top, tau0, &sdeg, dim).map(|p| p.eval(tau1))
}

/// `∫` over the order polytope of `tree` inside `[τ0, τ1]` of `Π_v p_v(τ_v)`, with
/// `integrands` listed in preorder over interior vertices.
pub fn order_polytope_integral(tree: &RibbonTree, integrands: &[UPoly], tau0: &Q, tau1: &Q) -> Q {
    fn rec(t: &Tree, ps: &[UPoly], next: &mut usize, tau0: &Q) -> PiecewisePoly {
        match t {
            Tree::Leaf => PiecewisePoly::constant(q(1)),
            Tree::Node { children, .. } => {
                let p = PiecewisePoly::poly(ps[*next].clone());
                *next += 1;
                let mut acc = p;
                for c in children {
                    let v = rec(c, ps, next, tau0);
                    acc = Coeff::mul(&acc, &v);
                }
                acc.antiderivative_from(tau0)
            }
        }
    }
    let mut next = 0;
    rec(&tree.top, integrands, &mut next, tau0).eval(tau1)
}

// ---------------------------------------------------------------------------------------
// Extension

/// Extends `pi` (mod `T^{E0}`) to `T^{E1}` where `m1` is the new `t = 1` end (mod `T^{E1}`),
/// adding the connection terms `extra_c` at the new levels (the classical construction uses
/// none). At each new level `m^τ = m^1 + ∫_τ^1 [Σ ±c∘m − Σ m∘c] dt`.
pub fn extend_isotopy(
    pi: &PseudoIsotopy,
    m1: &FilteredAinfAlgebra,
    extra_c: &OpFamily<PiecewisePoly>,
) -> Result<PseudoIsotopy, IsotopyError> {
    let e0 = pi.m.e_cut.clone();
    let e1 = m1.e_cut.clone();
    if pi.m.monoid != m1.monoid {
        return Err(AinfError::MonoidMismatch.into());
    }
    if e1 < e0 {
        return Err(IsotopyError::BoundaryMismatch(format!(
            "new cut {} is below the current cut {}",
            fmt_q(&e1),
            fmt_q(&e0)
        )));
    }
    let end = pi.slice(&q(1));
    let low = m1.truncate(&e0);
    if end.ops != low.ops {
        let key = end
            .ops
            .keys()
            .chain(low.ops.keys())
            .find(|k| end.ops.get(*k) != low.ops.get(*k))
            .cloned()
            .expect("families differ");
        return Err(IsotopyError::BoundaryMismatch(format!("operation ({}, {}) differs at t = 1", key.0, key.1)));
    }
    for b in extra_c.keys().map(|(_, b)| b) {
        if b.energy < e0 || b.energy >= e1 {
            return Err(IsotopyError::ConnectionLevel(b.clone()));
        }
    }
    let sdeg = pi.m.sdeg();
    let mut m_ops = pi.m.ops.clone();
    let mut c_ops = pi.c.clone();
    for op in extra_c.values() {
        family_add(&mut c_ops, op.clone());
    }
    let kind = OpKind::Homotopy { shift: 1 };
    for beta in m1.monoid.enumerate(&e1) {
        if beta.energy < e0 {
            continue;
        }
        let mut integrand: BTreeMap<usize, MultiOp<PiecewisePoly>> = BTreeMap::new();
        for co in c_ops.values() {
            for mo in m_ops.values() {
                if co.label.add(&mo.label) != beta {
                    continue;
                }
                for (o, i, signed) in [(co, mo, true), (mo, co, false)] {
                    for slot in 0..o.arity {
                        let r = insert_compose(o, i, slot, &sdeg, signed, kind);
                        let r = if signed { r } else { r.neg() };
                        integrand.entry(r.arity).or_insert_with(|| MultiOp::new(r.arity, beta.clone(), kind)).add_op(&r);
                    }
                }
            }
        }
        let mut level: OpFamily<PiecewisePoly> = OpFamily::new();
        for op in m1.ops.values().filter(|o| o.label == beta) {
            family_add(&mut level, to_q_coeffs(op));
        }
        for (_, op) in integrand {
            let mut g = op.map(|p| p.antiderivative_from(&q(1)).neg());
            g.kind = OpKind::Structure;
            family_add(&mut level, g);
        }
        for (_, op) in level {
            family_add(&mut m_ops, op);
        }
    }
    let m = FilteredAinfAlgebra {
        space: pi.m.space.clone(),
        pairing: pi.m.pairing.clone(),
        monoid: m1.monoid.clone(),
        ops: m_ops,
        e_cut: e1,
        unit: pi.m.unit,
        arity_bound: match (pi.m.arity_bound, m1.arity_bound) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        },
    };
    PseudoIsotopy::new(m, c_ops)
}

// ---------------------------------------------------------------------------------------
// Reparametrization and concatenation

/// `m^s = m^{t(s)}`, `c^s = t'(s) c^{t(s)}` for a monotone `t(s)`.
pub fn pullback(pi: &PseudoIsotopy, t_of_s: &PiecewisePoly) -> Result<PseudoIsotopy, IsotopyError> {
    let (a, b) = (t_of_s.eval(&q(0)), t_of_s.eval_left(&q(1)));
    if !((a == q(0) && b == q(1)) || (a == q(1) && b == q(0))) {
        return Err(IsotopyError::BadReparametrization(fmt_q(&a), fmt_q(&b)));
    }
    if let Some(at) = t_of_s.discontinuity() {
        return Err(IsotopyError::Poly(PolyError::NotMonotone(fmt_q(&at), fmt_q(&at))));
    }
    let dt = t_of_s.derivative();
    let compose_all = |fam: &OpFamily<PiecewisePoly>, scale: bool| -> Result<OpFamily<PiecewisePoly>, IsotopyError> {
        let mut out = OpFamily::new();
        for op in fam.values() {
            let mut n = MultiOp::new(op.arity, op.label.clone(), op.kind);
            for (t, v) in &op.entries {
                for (j, p) in v {
                    let mut r = p.compose(t_of_s)?;
                    if scale {
                        r = Coeff::mul(&r, &dt);
                    }
                    n.add_entry(t.clone(), *j, &r);
                }
            }
            family_add(&mut out, n);
        }
        Ok(out)
    };
    let mut m = pi.m.clone();
    m.ops = compose_all(&pi.m.ops, false)?;
    let c = compose_all(&pi.c, true)?;
    Ok(PseudoIsotopy { m, c })
}

/// The isotopy run backwards, from `m^1` to `m^0`.
pub fn reverse(pi: &PseudoIsotopy) -> PseudoIsotopy {
    pullback(pi, &PiecewisePoly::poly(UPoly::new(vec![q(1), q(-1)]))).expect("affine reparametrization")
}

/// `3u² − 2u³` mapped from `[l, r]` onto `[a, b]`.
fn smoothstep_piece(l: &Q, r: &Q, a: &Q, b: &Q) -> UPoly {
    let u = UPoly::new(vec![-(l / (r - l)), q(1) / (r - l)]);
    let s = UPoly::new(vec![q(0), q(0), q(3), q(-2)]).compose(&u);
    s.scale(&(b - a)).add(&UPoly::constant(a.clone()))
}

/// Reparametrizes so that `m` is constant and `c` vanishes on `[0, 1/8]` and `[7/8, 1]`,
/// with `c` also vanishing at every breakpoint of the original coefficients.
pub fn flatten(pi: &PseudoIsotopy) -> Result<PseudoIsotopy, IsotopyError> {
    let mut grid: Vec<Q> = vec![q(0), q(1)];
    for fam in [&pi.m.ops, &pi.c] {
        for op in fam.values() {
            for v in op.entries.values() {
                for p in v.values() {
                    grid.extend(p.breaks().iter().cloned());
                }
            }
        }
    }
    grid.sort();
    grid.dedup();
    let lo = crate::novikov::qf(1, 8);
    let width = crate::novikov::qf(3, 4);
    let s_of = |t: &Q| &lo + &width * t;
    let mut breaks = vec![q(0)];
    let mut pieces = vec![UPoly::constant(q(0))];
    for w in grid.windows(2) {
        breaks.push(s_of(&w[0]));
        pieces.push(smoothstep_piece(&s_of(&w[0]), &s_of(&w[1]), &w[0], &w[1]));
    }
    breaks.push(s_of(&q(1)));
    pieces.push(UPoly::constant(q(1)));
    breaks.push(q(1));
    pullback(pi, &PiecewisePoly::new(breaks, pieces)?)
}

/// `pi1` followed by `pi2`, each flattened and run at double speed.
pub fn concat(pi1: &PseudoIsotopy, pi2: &PseudoIsotopy) -> Result<PseudoIsotopy, IsotopyError> {
    if pi1.slice(&q(1)) != pi2.slice(&q(0)) || pi1.m.space != pi2.m.space || pi1.m.pairing != pi2.m.pairing {
        return Err(IsotopyError::JunctionMismatch);
    }
    let (a, b) = (flatten(pi1)?, flatten(pi2)?);
    let half = crate::novikov::qf(1, 2);
    let first = |p: &PiecewisePoly| p.restrict(&q(0), &q(1));
    let splice = |l: &OpFamily<PiecewisePoly>, r: &OpFamily<PiecewisePoly>, scale: bool| -> OpFamily<PiecewisePoly> {
        let keys: std::collections::BTreeSet<(usize, MonoidElement)> = l.keys().chain(r.keys()).cloned().collect();
        let mut out = OpFamily::new();
        for key in keys {
            let (lo, ro) = (l.get(&key), r.get(&key));
            let kind = lo.or(ro).map(|o| o.kind).expect("key present");
            let mut n = MultiOp::new(key.0, key.1.clone(), kind);
            let tuples: std::collections::BTreeSet<(Vec<usize>, usize)> = lo
                .iter()
                .chain(ro.iter())
                .flat_map(|o| o.entries.iter().flat_map(|(t, v)| v.keys().map(move |j| (t.clone(), *j))))
                .collect();
            for (t, j) in tuples {
                let get = |o: Option<&MultiOp<PiecewisePoly>>| {
                    o.and_then(|o| o.get(&t)).and_then(|v| v.get(&j)).cloned().unwrap_or_else(PiecewisePoly::zero)
                };
                let (mut pl, mut pr) = (first(&get(lo)), get(ro));
                if scale {
                    pl = pl.scale(&q(2));
                    pr = pr.scale(&q(2));
                }
                n.add_entry(t, j, &PiecewisePoly::splice(&pl, &pr, &half));
            }
            family_add(&mut out, n);
        }
        out
    };
    let mut m = a.m.clone();
    m.ops = splice(&a.m.ops, &b.m.ops, false);
    let c = splice(&a.c, &b.c, true);
    Ok(PseudoIsotopy { m, c })
}

// ---------------------------------------------------------------------------------------
// Canonical models

/// Transfers a pseudo-isotopy to the harmonic space: `m^{t,can}` pointwise in `t`, and
/// `c^{t,can}` through the marked-vertex tree sum, with arities up to `k_max + 1`.
pub fn canonical_isotopy(pi: &PseudoIsotopy, h: &HodgeData, k_max: usize) -> Result<PseudoIsotopy, IsotopyError> {
    let can = transfer_canonical(&pi.m, h, k_max);
    let (c, _) = marked_tree_sums(pi, h, &can.morphism.maps, &can.algebra.sdeg(), k_max);
    Ok(PseudoIsotopy { m: can.algebra, c })
}

/// `(c^{t,can}, h^t)`, summed over trees with a marked vertex, where `f` are the transfer
/// maps `H → C`.
pub fn marked_tree_sums(
    pi: &PseudoIsotopy,
    h: &HodgeData,
    f: &OpFamily<PiecewisePoly>,
    sdeg_h: &[i64],
    k_max: usize,
) -> (OpFamily<PiecewisePoly>, OpFamily<PiecewisePoly>) {
    let arity_cap = k_max + 1;
    let g_cols: Vec<crate::graded::SVec<Q>> = mat_cols(&h.g);
    let proj_cols: Vec<crate::graded::SVec<Q>> = mat_cols(&h.to_h);
    let stable: Vec<&MultiOp<PiecewisePoly>> =
        pi.m.ops.values().filter(|o| !(o.label.is_zero() && o.arity <= 1)).collect();
    let f_idx = FamilyIndex::new(f);
    let mut hfam: OpFamily<PiecewisePoly> = OpFamily::new();
    let mut ccan: OpFamily<PiecewisePoly> = OpFamily::new();
    for beta in pi.m.monoid.enumerate(&pi.m.e_cut) {
        if beta.is_zero() {
            continue;
        }
        for k in 0..=arity_cap {
            let budget = Budget { e_cut: pi.m.e_cut.clone(), max_arity: Some(k), target: Some(beta.clone()) };
            let mut cf = MultiOp::new(k, beta.clone(), OpKind::Morphism);
            for c in pi.c.values().filter(|c| c.label.energy <= beta.energy) {
                let slots = vec![&f_idx; c.arity];
                if let Some(r) = tensor_compose(c, &slots, None, sdeg_h, &budget, OpKind::Morphism).get(&(k, beta.clone())) {
                    cf.add_op(r);
                }
            }
            let mut mh = MultiOp::new(k, beta.clone(), OpKind::Morphism);
            {
                let h_idx = FamilyIndex::new(&hfam);
                for m in &stable {
                    if m.label.energy > beta.energy {
                        continue;
                    }
                    for i in 0..m.arity {
                        let mut slots = vec![&f_idx; m.arity];
                        slots[i] = &h_idx;
                        if let Some(r) =
                            tensor_compose(m, &slots, Some(i), sdeg_h, &budget, OpKind::Morphism).get(&(k, beta.clone()))
                        {
                            mh.add_op(r);
                        }
                    }
                }
            }
            let mut hk = cf.clone();
            hk.add_op(&mh);
            let mut hk = hk.post_linear(&g_cols);
            hk.kind = OpKind::Homotopy { shift: -1 };
            let mut ck = cf;
            ck.add_op(&mh);
            let mut ck = ck.post_linear(&proj_cols);
            ck.kind = OpKind::Morphism;
            family_add(&mut hfam, hk);
            family_add(&mut ccan, ck);
        }
    }
    (ccan, hfam)
}

fn mat_cols(m: &Mat) -> Vec<crate::graded::SVec<Q>> {
    (0..m.cols)
        .map(|j| {
            (0..m.rows)
                .filter(|&i| !Coeff::is_zero(m.get(i, j)))
                .map(|i| (i, m.get(i, j).clone()))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------------------
// Two-parameter families

/// `(m^{t,s}, c^{t,s}, d^{t,s}, e^{t,s})` on `[0,1]²`: `c` is the `t`-connection, `d` the
/// `s`-connection and `e` (odd) their curvature term.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoIsotopy2 {
    pub m: FilteredAinfAlgebra<PiecewiseBPoly>,
    pub c: OpFamily<PiecewiseBPoly>,
    pub d: OpFamily<PiecewiseBPoly>,
    pub e: OpFamily<PiecewiseBPoly>,
}

fn lift_family(fam: &OpFamily<PiecewisePoly>, f: impl Fn(&PiecewisePoly) -> PiecewiseBPoly + Copy) -> OpFamily<PiecewiseBPoly> {
    let mut out = OpFamily::new();
    for op in fam.values() {
        family_add(&mut out, op.map(f));
    }
    out
}

impl PseudoIsotopy2 {
    /// The `s`-independent family `(m^t, c^t, 0, 0)`.
    pub fn promote_t(pi: &PseudoIsotopy) -> Self {
        PseudoIsotopy2 {
            m: pi.m.map_coeffs(PiecewiseBPoly::from_t),
            c: lift_family(&pi.c, PiecewiseBPoly::from_t),
            d: OpFamily::new(),
            e: OpFamily::new(),
        }
    }

    /// The `t`-independent family `(m^s, 0, c^s, 0)`.
    pub fn promote_s(pi: &PseudoIsotopy) -> Self {
        PseudoIsotopy2 {
            m: pi.m.map_coeffs(PiecewiseBPoly::from_s),
            c: OpFamily::new(),
            d: lift_family(&pi.c, PiecewiseBPoly::from_s),
            e: OpFamily::new(),
        }
    }

    /// The structure on `x + dt∧y + ds∧z + dt∧ds∧w` (indices in blocks of `dim`).
    pub fn hat(&self) -> HatAlgebra<PiecewiseBPoly> {
        let t_hat = HatAlgebra::base(self.m.clone()).extend(&self.c, 0, "dt.");
        let conn = hat_ops(&self.d, &self.e, &self.m.sdeg());
        t_hat.extend(&conn, 1, "ds.")
    }
}

/// Checks the two-parameter axioms: the A∞ relations of the four-component structure,
/// cyclic symmetry of all four families and the level-zero conditions.
pub fn verify_isotopy2(pi: &PseudoIsotopy2, k_max: usize) -> Report {
    let dim = pi.m.dim();
    let mut rep = Report::default();
    for v in verify_hat(&pi.hat(), k_max).violations {
        let comp = v.discrepancy.first().map(|(i, _)| ["x", "y", "z", "w"][(i / dim).min(3)]).unwrap_or("x");
        let v = if v.check == "ainf" { v.with_note(format!("{comp}-component")) } else { v };
        rep.push(v);
    }
    let sdeg = pi.m.sdeg();
    rep.extend(verify_cyclic(&pi.m, k_max));
    for (fam, name) in [(&pi.c, "cyclic-c"), (&pi.d, "cyclic-d"), (&pi.e, "cyclic-e")] {
        rep.extend(cyclic_family_report(fam, &pi.m.pairing, &sdeg, k_max, name));
    }
    for op in pi.m.ops.values().filter(|o| o.label.is_zero()) {
        for (t, v) in &op.entries {
            for (j, p) in v {
                if !Coeff::is_zero(&p.d_t()) || !Coeff::is_zero(&p.d_s()) {
                    rep.push(Violation::new("constant-level0", op.arity, op.label.clone(), t.clone(), vec![(*j, p.to_string())]));
                }
            }
        }
    }
    for fam in [&pi.c, &pi.d, &pi.e] {
        for op in fam.values().filter(|o| o.label.is_zero()) {
            rep.extend(family_report(&[((op.arity, op.label.clone()), op.clone())].into_iter().collect(), "constant-level0"));
        }
    }
    rep.sorted()
}
