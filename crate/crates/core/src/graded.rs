//! Graded spaces, pairings, sparse multilinear operations and the Koszul sign engine.
//!
//! Everything lives on the shifted complex: `deg' x = deg x - 1` is the primitive and all
//! signs below are expressions in shifted degrees.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::linalg::Mat;
use crate::novikov::{fmt_q, MonoidElement, NovikovScalar, Q};
use crate::report::{Report, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradedError {
    #[error("insertion index {index} out of range for {len} inputs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("arity mismatch: operation takes {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("duplicate basis name `{0}`")]
    DuplicateName(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// A finite graded vector space with a distinguished basis and pairing degree `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedSpace {
    names: Vec<String>,
    degrees: Vec<i64>,
    n: i64,
}

impl GradedSpace {
    pub fn new(basis: Vec<(String, i64)>, n: i64) -> Result<Self, GradedError> {
        let mut seen = std::collections::BTreeSet::new();
        for (name, _) in &basis {
            if !seen.insert(name.clone()) {
                return Err(GradedError::DuplicateName(name.clone()));
            }
        }
        let (names, degrees) = basis.into_iter().unzip();
        Ok(GradedSpace { names, degrees, n })
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|x| x == name)
    }

    pub fn deg(&self, i: usize) -> i64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    /// Shifted degree `deg - 1`.
    pub fn sdeg(&self, i: usize) -> i64 {
        self.degrees[i] - 1
    }

    pub fn sdegrees(&self) -> Vec<i64> {
        self.degrees.iter().map(|d| d - 1).collect()
    }
}

/// The pairing matrix `entries[i][j] = <e_i, e_j>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    pub matrix: Mat,
}

impl Pairing {
    pub fn new(matrix: Mat) -> Self {
        Pairing { matrix }
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        self.matrix.get(i, j)
    }

    pub fn eval<C: Coeff>(&self, x: &SVec<C>, y: &SVec<C>) -> C {
        let mut s = C::zero();
        for (i, a) in x {
            for (j, b) in y {
                let p = self.matrix.get(*i, *j);
                if !p.is_zero() {
                    s.add_assign(&a.mul(b).scale(p));
                }
            }
        }
        s
    }
}

fn parity(n: i64) -> i32 {
    if n.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Sign rules of the Koszul engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignRule {
    /// `(-1)^{deg'x_1 + ... + deg'x_{i-1}}` for an operation inserted at position `i` (1-based).
    AinfInsertion(usize),
    /// `(-1)^{deg'x_0 (deg'x_1 + ... + deg'x_k)}`; the first list entry is `x_0`.
    CyclicRotation,
    /// `(-1)^{1 + deg'x deg'y}`; the list is `[x, y]`.
    PairingSwap,
    /// `(-1)^{deg'x_1 + ... + deg'x_{j-1}}` for an odd tensor factor starting at input `j` (1-based).
    TensorInsertion(usize),
}

/// The sign mandated by `rule` for the given shifted degrees.
pub fn koszul_sign(sdegs: &[i64], rule: SignRule) -> Result<i32, GradedError> {
    match rule {
        SignRule::AinfInsertion(i) | SignRule::TensorInsertion(i) => {
            if i == 0 || i > sdegs.len() + 1 {
                return Err(GradedError::IndexOutOfRange { index: i, len: sdegs.len() });
            }
            Ok(parity(sdegs[..i - 1].iter().sum()))
        }
        SignRule::CyclicRotation => {
            let Some((x0, rest)) = sdegs.split_first() else {
                return Ok(1);
            };
            Ok(parity(x0 * rest.iter().sum::<i64>()))
        }
        SignRule::PairingSwap => {
            if sdegs.len() != 2 {
                return Err(GradedError::IndexOutOfRange { index: 2, len: sdegs.len() });
            }
            Ok(parity(1 + sdegs[0] * sdegs[1]))
        }
    }
}

/// Sign of a prefix sum of shifted degrees, `(-1)^{sum}`.
pub fn prefix_sign(sdegs: &[i64], idx: &[usize]) -> i32 {
    parity(idx.iter().map(|&i| sdegs[i]).sum())
}

/// Coefficient rings the multilinear machinery works over.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn zero() -> Self;
    fn from_q(q: Q) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, q: &Q) -> Self;
    fn add_assign(&mut self, o: &Self) {
        *self = self.add(o);
    }
    fn one() -> Self {
        Self::from_q(num_traits::One::one())
    }
    fn signed(&self, s: i32) -> Self {
        if s < 0 {
            self.neg()
        } else {
            self.clone()
        }
    }
}

impl Coeff for Q {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn from_q(q: Q) -> Self {
        q
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, q: &Q) -> Self {
        self * q
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
}

/// Sparse vector over the distinguished basis.
pub type SVec<C> = BTreeMap<usize, C>;

pub fn svec_add<C: Coeff>(acc: &mut SVec<C>, i: usize, c: &C) {
    if c.is_zero() {
        return;
    }
    match acc.get_mut(&i) {
        Some(v) => {
            v.add_assign(c);
            if v.is_zero() {
                acc.remove(&i);
            }
        }
        None => {
            acc.insert(i, c.clone());
        }
    }
}

pub fn svec_axpy<C: Coeff>(acc: &mut SVec<C>, a: &C, x: &SVec<C>) {
    for (i, c) in x {
        svec_add(acc, *i, &a.mul(c));
    }
}

pub fn basis_vec<C: Coeff>(i: usize) -> SVec<C> {
    let mut v = SVec::new();
    v.insert(i, C::one());
    v
}

pub fn dense_to_svec(v: &[Q]) -> SVec<Q> {
    v.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.clone())).collect()
}

/// Which degree discipline an operation obeys.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    /// `deg' out = sum deg' in + 1 - mu`.
    Structure,
    /// `deg' out = sum deg' in - mu`.
    Morphism,
    /// `deg' out = sum deg' in + shift - mu`.
    Homotopy { shift: i64 },
}

impl OpKind {
    pub fn shift(&self) -> i64 {
        match self {
            OpKind::Structure => 1,
            OpKind::Morphism => 0,
            OpKind::Homotopy { shift } => *shift,
        }
    }

    /// Whether the operation has odd degree on the shifted complex (for even Maslov labels).
    pub fn is_odd(&self) -> bool {
        self.shift().rem_euclid(2) == 1
    }
}

/// A sparse multilinear map `B_k(C[1]) -> C'[1]` labelled by a monoid element.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiOp<C> {
    pub arity: usize,
    pub label: MonoidElement,
    pub kind: OpKind,
    pub entries: BTreeMap<Vec<usize>, SVec<C>>,
}

impl<C: Coeff> MultiOp<C> {
    pub fn new(arity: usize, label: MonoidElement, kind: OpKind) -> Self {
        MultiOp { arity, label, kind, entries: BTreeMap::new() }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::new(1, MonoidElement::zero(), OpKind::Morphism);
        for i in 0..dim {
            op.add_entry(vec![i], i, &C::one());
        }
        op
    }

    /// Identity-shaped map sending input `i` to the vector `cols[i]`.
    pub fn linear(cols: &[SVec<C>], label: MonoidElement, kind: OpKind) -> Self {
        let mut op = Self::new(1, label, kind);
        for (i, c) in cols.iter().enumerate() {
            for (j, v) in c {
                op.add_entry(vec![i], *j, v);
            }
        }
        op
    }

    pub fn add_entry(&mut self, tuple: Vec<usize>, out: usize, c: &C) {
        debug_assert_eq!(tuple.len(), self.arity);
        if c.is_zero() {
            return;
        }
        let e = self.entries.entry(tuple.clone()).or_default();
        svec_add(e, out, c);
        if e.is_empty() {
            self.entries.remove(&tuple);
        }
    }

    pub fn add_vec(&mut self, tuple: Vec<usize>, v: &SVec<C>, scale: &C) {
        if v.is_empty() || scale.is_zero() {
            return;
        }
        let e = self.entries.entry(tuple.clone()).or_default();
        svec_axpy(e, scale, v);
        if e.is_empty() {
            self.entries.remove(&tuple);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tuple: &[usize]) -> Option<&SVec<C>> {
        self.entries.get(tuple)
    }

    pub fn add_op(&mut self, o: &MultiOp<C>) {
        self.add_scaled(o, &C::one());
    }

    pub fn add_scaled(&mut self, o: &MultiOp<C>, s: &C) {
        assert_eq!(self.arity, o.arity, "adding operations of different arity");
        for (t, v) in &o.entries {
            self.add_vec(t.clone(), v, s);
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale_q(&self, q: &Q) -> Self {
        self.map(|c| c.scale(q))
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> MultiOp<D> {
        let mut out = MultiOp::new(self.arity, self.label.clone(), self.kind);
        for (t, v) in &self.entries {
            let w: SVec<D> = v.iter().map(|(i, c)| (*i, f(c))).filter(|(_, c)| !c.is_zero()).collect();
            if !w.is_empty() {
                out.entries.insert(t.clone(), w);
            }
        }
        out
    }

    /// Post-composes with a linear map given column-wise (`cols[j]` = image of basis `j`).
    pub fn post_linear(&self, cols: &[SVec<Q>]) -> Self {
        let mut out = MultiOp::new(self.arity, self.label.clone(), self.kind);
        for (t, v) in &self.entries {
            let mut w = SVec::new();
            for (j, c) in v {
                for (i, a) in &cols[*j] {
                    svec_add(&mut w, *i, &c.scale(a));
                }
            }
            if !w.is_empty() {
                out.entries.insert(t.clone(), w);
            }
        }
        out
    }

    /// Multilinear evaluation on sparse arguments.
    pub fn apply(&self, args: &[&SVec<C>]) -> Result<SVec<C>, GradedError> {
        if args.len() != self.arity {
            return Err(GradedError::ArityMismatch { expected: self.arity, got: args.len() });
        }
        let mut out = SVec::new();
        for (t, v) in &self.entries {
            let mut c = C::one();
            let mut zero = false;
            for (slot, &b) in t.iter().enumerate() {
                match args[slot].get(&b) {
                    Some(x) => c = c.mul(x),
                    None => {
                        zero = true;
                        break;
                    }
                }
            }
            if !zero {
                svec_axpy(&mut out, &c, v);
            }
        }
        Ok(out)
    }

    /// Entries violating the degree discipline: `(tuple, output index)`.
    pub fn degree_violations(&self, in_sdeg: &[i64], out_sdeg: &[i64]) -> Vec<(Vec<usize>, usize)> {
        let mut bad = Vec::new();
        for (t, v) in &self.entries {
            let s: i64 = t.iter().map(|&i| in_sdeg[i]).sum();
            let want = s + self.kind.shift() - self.label.maslov;
            for j in v.keys() {
                if out_sdeg[*j] != want {
                    bad.push((t.clone(), *j));
                }
            }
        }
        bad
    }
}

/// Operations keyed by `(arity, label)`.
pub type OpFamily<C> = BTreeMap<(usize, MonoidElement), MultiOp<C>>;

pub fn family_add<C: Coeff>(fam: &mut OpFamily<C>, op: MultiOp<C>) {
    if op.is_zero() {
        return;
    }
    let key = (op.arity, op.label.clone());
    match fam.get_mut(&key) {
        Some(e) => {
            e.add_op(&op);
            if e.is_zero() {
                fam.remove(&key);
            }
        }
        None => {
            fam.insert(key, op);
        }
    }
}

/// `outer(x_1, ..., inner(x_{slot+1}, ...), ...)` with the insertion sign
/// `(-1)^{deg'x_1 + ... + deg'x_slot}` when `signed` is set. `slot` is 0-based.
pub fn insert_compose<C: Coeff>(
    outer: &MultiOp<C>,
    inner: &MultiOp<C>,
    slot: usize,
    sdeg: &[i64],
    signed: bool,
    kind: OpKind,
) -> MultiOp<C> {
    let arity = outer.arity + inner.arity - 1;
    let mut out = MultiOp::new(arity, outer.label.add(&inner.label), kind);
    // index inner entries by output basis index
    let mut by_out: BTreeMap<usize, Vec<(&Vec<usize>, &C)>> = BTreeMap::new();
    for (t, v) in &inner.entries {
        for (j, c) in v {
            by_out.entry(*j).or_default().push((t, c));
        }
    }
    for (a, w) in &outer.entries {
        let Some(list) = by_out.get(&a[slot]) else { continue };
        let sign = if signed { prefix_sign(sdeg, &a[..slot]) } else { 1 };
        for (b, c) in list {
            let mut t = Vec::with_capacity(arity);
            t.extend_from_slice(&a[..slot]);
            t.extend_from_slice(b);
            t.extend_from_slice(&a[slot + 1..]);
            out.add_vec(t, w, &c.signed(sign));
        }
    }
    out
}

/// Index of a family of maps by output basis element, for tensor compositions.
pub struct FamilyIndex<'a, C> {
    by_out: BTreeMap<usize, Vec<(&'a MonoidElement, &'a Vec<usize>, &'a C)>>,
}

impl<'a, C: Coeff> FamilyIndex<'a, C> {
    pub fn new(fam: &'a OpFamily<C>) -> Self {
        let mut by_out: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        for op in fam.values() {
            for (t, v) in &op.entries {
                for (j, c) in v {
                    by_out.entry(*j).or_default().push((&op.label, t, c));
                }
            }
        }
        FamilyIndex { by_out }
    }

    pub fn from_ops(ops: impl IntoIterator<Item = &'a MultiOp<C>>) -> Self {
        let mut by_out: BTreeMap<usize, Vec<_>> = BTreeMap::new();
        for op in ops {
            for (t, v) in &op.entries {
                for (j, c) in v {
                    by_out.entry(*j).or_default().push((&op.label, t, c));
                }
            }
        }
        FamilyIndex { by_out }
    }
}

/// Limits applied while expanding tensor compositions.
#[derive(Clone, Debug)]
pub struct Budget {
    /// Only labels with energy strictly below this are produced.
    pub e_cut: Q,
    /// Only arities up to this are produced.
    pub max_arity: Option<usize>,
    /// If set, only this exact label is produced.
    pub target: Option<MonoidElement>,
}

/// `op o (F_1 (x) ... (x) F_l)` where slot `i` draws from `slots[i]`, summed over all
/// arities and labels of the factors. If `odd_slot` is `Some(i)`, the factor in slot `i` is
/// odd and contributes the sign `(-1)^{deg' of inputs before it}`. Factors in other slots
/// must be even.
pub fn tensor_compose<C: Coeff>(
    op: &MultiOp<C>,
    slots: &[&FamilyIndex<'_, C>],
    odd_slot: Option<usize>,
    sdeg: &[i64],
    budget: &Budget,
    kind: OpKind,
) -> OpFamily<C> {
    assert_eq!(slots.len(), op.arity);
    let mut out: BTreeMap<(usize, MonoidElement), MultiOp<C>> = BTreeMap::new();
    struct St<'b, C> {
        tuple: Vec<usize>,
        label: MonoidElement,
        coef: C,
        sign_prefix: Option<i64>,
        _p: std::marker::PhantomData<&'b ()>,
    }
    for (a, w) in &op.entries {
        let mut states: Vec<St<C>> = vec![St {
            tuple: Vec::new(),
            label: op.label.clone(),
            coef: C::one(),
            sign_prefix: None,
            _p: std::marker::PhantomData,
        }];
        for (slot, &b) in a.iter().enumerate() {
            let Some(list) = slots[slot].by_out.get(&b) else {
                states.clear();
                break;
            };
            let mut next = Vec::new();
            for st in &states {
                for (lab, t, c) in list {
                    let label = st.label.add(lab);
                    if label.energy >= budget.e_cut {
                        continue;
                    }
                    if let Some(tg) = &budget.target {
                        if label.energy > tg.energy {
                            continue;
                        }
                    }
                    let arity = st.tuple.len() + t.len();
                    if let Some(m) = budget.max_arity {
                        if arity > m {
                            continue;
                        }
                    }
                    let mut tuple = st.tuple.clone();
                    let sign_prefix = if odd_slot == Some(slot) {
                        Some(tuple.iter().map(|&i| sdeg[i]).sum())
                    } else {
                        st.sign_prefix
                    };
                    tuple.extend_from_slice(t);
                    next.push(St {
                        tuple,
                        label,
                        coef: st.coef.mul(c),
                        sign_prefix,
                        _p: std::marker::PhantomData,
                    });
                }
            }
            states = next;
            if states.is_empty() {
                break;
            }
        }
        for st in states {
            if let Some(tg) = &budget.target {
                if &st.label != tg {
                    continue;
                }
            }
            let sign = st.sign_prefix.map_or(1, parity);
            let key = (st.tuple.len(), st.label.clone());
            let e = out
                .entry(key)
                .or_insert_with(|| MultiOp::new(st.tuple.len(), st.label.clone(), kind));
            e.add_vec(st.tuple, w, &st.coef.signed(sign));
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Multilinear evaluation with Novikov coefficients, including the label weight
/// `T^{E(beta)} e^{mu(beta)/2}`, truncated at `e_cut`.
pub fn apply_novikov(
    op: &MultiOp<Q>,
    args: &[Vec<NovikovScalar>],
    e_cut: &Q,
) -> Result<Vec<NovikovScalar>, GradedError> {
    if args.len() != op.arity {
        return Err(GradedError::ArityMismatch { expected: op.arity, got: args.len() });
    }
    let dim_out = op.entries.values().flat_map(|v| v.keys()).max().map_or(0, |m| m + 1);
    let dim_out = dim_out.max(args.first().map_or(0, |a| a.len()));
    let mut out = vec![NovikovScalar::zero(); dim_out];
    let w = op.label.weight();
    for (t, v) in &op.entries {
        let mut c = w.clone();
        for (slot, &b) in t.iter().enumerate() {
            c = c.mul(&args[slot][b]).truncate(e_cut);
            if c.is_zero() {
                break;
            }
        }
        if c.is_zero() {
            continue;
        }
        for (j, a) in v {
            out[*j] = out[*j].add(&c.scale(a)).truncate(e_cut);
        }
    }
    Ok(out)
}

/// Degree support, graded antisymmetry and nondegeneracy of a pairing.
pub fn check_pairing_axioms(space: &GradedSpace, pairing: &Pairing) -> Report {
    let mut rep = Report::default();
    let d = space.dim();
    if pairing.matrix.rows != d || pairing.matrix.cols != d {
        rep.push(Violation::note(
            "pairing-shape",
            format!("pairing is {}x{}, space has dimension {d}", pairing.matrix.rows, pairing.matrix.cols),
        ));
        return rep;
    }
    for i in 0..d {
        for j in 0..d {
            let v = pairing.get(i, j);
            if !v.is_zero() && space.deg(i) + space.deg(j) != space.n() {
                rep.push(Violation::pair("pairing-degree", i, j, fmt_q(v)));
            }
            let s = parity(1 + space.sdeg(i) * space.sdeg(j));
            let w = pairing.get(j, i) * Q::from_integer(s.into());
            if v != &w {
                rep.push(Violation::pair("pairing-antisymmetry", i, j, fmt_q(&(v - w))));
            }
        }
    }
    if pairing.matrix.inverse().is_none() {
        rep.push(Violation::note("pairing-nondegenerate", "pairing matrix is singular".into()));
    }
    rep
}
