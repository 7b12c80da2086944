//! Hodge data `(Π, G)` for `m_{1,(0,0)}` and homotopy transfer to the canonical model on
//! cohomology via ribbon-tree sums.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ainf::{AinfMorphism, FilteredAinfAlgebra};
use crate::graded::{
    family_add, tensor_compose, Budget, Coeff, FamilyIndex, GradedSpace, MultiOp, OpFamily, OpKind,
    Pairing, SVec,
};
use crate::linalg::Mat;
use crate::novikov::{q, MonoidElement, NovikovScalar, Q};
use crate::report::{Report, Violation};
use crate::trees::{RibbonTree, Tree, TreeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("pairing is degenerate")]
    DegeneratePairing,
    #[error("m1 does not square to zero")]
    NotDifferential,
    #[error("m1 violates the duality <m1 x, y> = (-1)^(deg'x deg'y) <m1 y, x> at ({0}, {1})")]
    Duality(usize, usize),
    #[error("the unit is exact, so it cannot be harmonic")]
    UnitExact,
    #[error("no isotropic complement found in degree {0}")]
    Isotropic(i64),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BasisTag {
    B,
    D,
    H,
}

/// `C = B ⊕ D ⊕ H` with `B = Im m1`, `D` isotropic, `H` harmonic; `G` and `Π` as matrices
/// acting on column vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct HodgeData {
    pub pi: Mat,
    pub pi_b: Mat,
    pub pi_d: Mat,
    pub g: Mat,
    /// Harmonic basis vectors, in coordinates of the ambient basis.
    pub harmonic: Vec<Vec<Q>>,
    /// The working basis `[B | D | H]` with tags.
    pub working: Vec<(BasisTag, Vec<Q>)>,
    /// `h x dim` matrix of harmonic coordinates of `Π x`.
    pub to_h: Mat,
}

pub(crate) fn dense_op(op: &MultiOp<Q>, dim: usize) -> Mat {
    let mut m = Mat::zeros(dim, dim);
    for (t, v) in &op.entries {
        for (i, c) in v {
            m.set(*i, t[0], c.clone());
        }
    }
    m
}

fn vec_degree(space: &GradedSpace, v: &[Q]) -> i64 {
    v.iter()
        .enumerate()
        .find(|(_, c)| !Coeff::is_zero(*c))
        .map(|(i, _)| space.deg(i))
        .expect("nonzero vector")
}

fn pair_vec(p: &Pairing, x: &[Q], y: &[Q]) -> Q {
    let mut s = Q::from_integer(0.into());
    for (i, a) in x.iter().enumerate() {
        if Coeff::is_zero(a) {
            continue;
        }
        for (j, b) in y.iter().enumerate() {
            if !Coeff::is_zero(b) {
                s += a * b * p.get(i, j);
            }
        }
    }
    s
}

fn sign(e: i64) -> Q {
    if e.rem_euclid(2) == 0 {
        q(1)
    } else {
        q(-1)
    }
}

/// Hodge data for `m1` on a space with a nondegenerate pairing.
pub fn build_hodge(
    space: &GradedSpace,
    pairing: &Pairing,
    m1: &MultiOp<Q>,
    unit: Option<usize>,
) -> Result<HodgeData, TransferError> {
    let dim = space.dim();
    if pairing.matrix.inverse().is_none() {
        return Err(TransferError::DegeneratePairing);
    }
    let m = dense_op(m1, dim);
    if !m.mul(&m).is_zero() {
        return Err(TransferError::NotDifferential);
    }
    for x in 0..dim {
        for y in 0..dim {
            let mx = m.col(x);
            let my = m.col(y);
            let lhs = pair_vec(pairing, &mx, &unit_vec(dim, y));
            let rhs = pair_vec(pairing, &my, &unit_vec(dim, x)) * sign(space.sdeg(x) * space.sdeg(y));
            if lhs != rhs {
                return Err(TransferError::Duality(x, y));
            }
        }
    }
    let mut degrees: Vec<i64> = space.degrees().to_vec();
    degrees.sort();
    degrees.dedup();

    // W: basis vectors complementing ker m1, B = m1(W); kernels per degree
    let mut w_vecs: Vec<Vec<Q>> = Vec::new();
    let mut kernel: Vec<Vec<Q>> = Vec::new();
    for &p in &degrees {
        let idx: Vec<usize> = (0..dim).filter(|&i| space.deg(i) == p).collect();
        let cols: Vec<Vec<Q>> = idx.iter().map(|&i| m.col(i)).collect();
        let mp = Mat::from_cols(dim, &cols);
        let mut r = mp.clone();
        for piv in r.rref() {
            w_vecs.push(unit_vec(dim, idx[piv]));
        }
        for ns in mp.nullspace() {
            let mut v = vec![q(0); dim];
            for (a, &i) in idx.iter().enumerate() {
                v[i] = ns[a].clone();
            }
            kernel.push(v);
        }
    }
    if let Some(e) = unit {
        let ev = unit_vec(dim, e);
        let needs = w_vecs.iter().any(|w| !Coeff::is_zero(&pair_vec(pairing, &ev, w)));
        if needs {
            let k0 = kernel
                .iter()
                .find(|k| !Coeff::is_zero(&pair_vec(pairing, &ev, k)))
                .ok_or(TransferError::UnitExact)?
                .clone();
            let ek = pair_vec(pairing, &ev, &k0);
            for w in &mut w_vecs {
                let c = pair_vec(pairing, &ev, w) / &ek;
                if !Coeff::is_zero(&c) {
                    for i in 0..dim {
                        w[i] = &w[i] - &c * &k0[i];
                    }
                }
            }
        }
    }
    let b_vecs: Vec<Vec<Q>> = w_vecs.iter().map(|w| m.mul_vec(w)).collect();

    // H = {x : <x, B ⊕ W> = 0}
    let rows: Vec<Vec<Q>> = b_vecs
        .iter()
        .chain(w_vecs.iter())
        .map(|v| pairing.matrix.mul_vec(v))
        .collect();
    let mut harmonic: Vec<Vec<Q>> = if rows.is_empty() {
        (0..dim).map(|i| unit_vec(dim, i)).collect()
    } else {
        Mat::from_rows(rows).nullspace()
    };
    if let Some(e) = unit {
        let ev = unit_vec(dim, e);
        let mut basis = vec![ev.clone()];
        for h in harmonic {
            let mut cand = basis.clone();
            cand.push(h.clone());
            if Mat::from_cols(dim, &cand).rank() == cand.len() {
                basis = cand;
            }
        }
        if Mat::from_cols(dim, &basis).rank() != basis.len()
            || basis.len() != dim - b_vecs.len() - w_vecs.len()
        {
            return Err(TransferError::UnitExact);
        }
        harmonic = basis;
    }

    // D: isotropic Gram-Schmidt, d_j = w_j + (element of B of the same degree)
    let mut order: Vec<usize> = (0..w_vecs.len()).collect();
    order.sort_by_key(|&j| vec_degree(space, &w_vecs[j]));
    let mut d_vecs: Vec<Option<Vec<Q>>> = vec![None; w_vecs.len()];
    let mut done: Vec<usize> = Vec::new();
    for &j in &order {
        let w = &w_vecs[j];
        let p = vec_degree(space, w);
        let bs: Vec<&Vec<Q>> = b_vecs.iter().filter(|b| vec_degree(space, b) == p).collect();
        let mut eq_rows: Vec<Vec<Q>> = Vec::new();
        let mut rhs: Vec<Q> = Vec::new();
        for &i in &done {
            let di = d_vecs[i].as_ref().expect("computed");
            if vec_degree(space, di) + p != space.n() {
                continue;
            }
            eq_rows.push(bs.iter().map(|b| pair_vec(pairing, b, di)).collect());
            rhs.push(-pair_vec(pairing, w, di));
        }
        if 2 * p == space.n() {
            eq_rows.push(bs.iter().map(|b| pair_vec(pairing, w, b) + pair_vec(pairing, b, w)).collect());
            rhs.push(-pair_vec(pairing, w, w));
        }
        let mut d = w.clone();
        if !eq_rows.is_empty() && !bs.is_empty() {
            let sol = Mat::from_rows(eq_rows).solve(&rhs).ok_or(TransferError::Isotropic(p))?;
            for (y, b) in sol.iter().zip(&bs) {
                for i in 0..dim {
                    d[i] = &d[i] + y * &b[i];
                }
            }
        } else if rhs.iter().any(|r| !Coeff::is_zero(r)) {
            return Err(TransferError::Isotropic(p));
        }
        d_vecs[j] = Some(d);
        done.push(j);
    }
    let d_vecs: Vec<Vec<Q>> = d_vecs.into_iter().map(|d| d.expect("computed")).collect();

    let nb = b_vecs.len();
    let nh = harmonic.len();
    let mut cols: Vec<Vec<Q>> = Vec::with_capacity(dim);
    cols.extend(b_vecs.iter().cloned());
    cols.extend(d_vecs.iter().cloned());
    cols.extend(harmonic.iter().cloned());
    let basis = Mat::from_cols(dim, &cols);
    let inv = basis.inverse().ok_or(TransferError::DegeneratePairing)?;
    let block = |lo: usize, hi: usize| -> Mat {
        let mut sel = Mat::zeros(dim, dim);
        for i in lo..hi {
            sel.set(i, i, q(1));
        }
        basis.mul(&sel).mul(&inv)
    };
    let pi_b = block(0, nb);
    let pi_d = block(nb, 2 * nb);
    let pi = block(2 * nb, dim);
    // G(b_j) = -d_j, zero on D and H
    let mut g = Mat::zeros(dim, dim);
    for (j, d) in d_vecs.iter().enumerate() {
        for x in 0..dim {
            let c = inv.get(j, x);
            if Coeff::is_zero(c) {
                continue;
            }
            for i in 0..dim {
                if !Coeff::is_zero(&d[i]) {
                    let v = g.get(i, x) - c * &d[i];
                    g.set(i, x, v);
                }
            }
        }
    }
    let mut to_h = Mat::zeros(nh, dim);
    for a in 0..nh {
        for x in 0..dim {
            to_h.set(a, x, inv.get(2 * nb + a, x).clone());
        }
    }
    let mut working = Vec::with_capacity(dim);
    working.extend(b_vecs.into_iter().map(|v| (BasisTag::B, v)));
    working.extend(d_vecs.into_iter().map(|v| (BasisTag::D, v)));
    working.extend(harmonic.iter().cloned().map(|v| (BasisTag::H, v)));
    Ok(HodgeData { pi, pi_b, pi_d, g, harmonic, working, to_h })
}

fn unit_vec(dim: usize, i: usize) -> Vec<Q> {
    let mut v = vec![q(0); dim];
    v[i] = q(1);
    v
}

/// Hodge data of an algebra's `m_{1,(0,0)}`.
pub fn build_hodge_for(a: &FilteredAinfAlgebra) -> Result<HodgeData, TransferError> {
    build_hodge(&a.space, &a.pairing, &a.m1(), a.unit)
}

/// Checks the five Hodge identities as exact matrix equations.
pub fn check_hodge(space: &GradedSpace, pairing: &Pairing, m1: &MultiOp<Q>, h: &HodgeData) -> Report {
    let dim = space.dim();
    let m = dense_op(m1, dim);
    let p = &pairing.matrix;
    let mut rep = Report::default();
    let mut mat_check = |name: &str, diff: Mat| {
        for i in 0..dim {
            for j in 0..dim {
                let v = diff.get(i, j);
                if !Coeff::is_zero(v) {
                    rep.push(Violation::pair(name, i, j, crate::novikov::fmt_q(v)));
                }
            }
        }
    };
    mat_check("pi-idempotent", h.pi.mul(&h.pi).sub(&h.pi));
    let homotopy = Mat::identity(dim).sub(&h.pi).add(&m.mul(&h.g).add(&h.g.mul(&m)));
    mat_check("homotopy", homotopy);
    mat_check("g-square", h.g.mul(&h.g));
    // <Πx, y> = x^T Π^T P y
    mat_check("pi-selfadjoint", h.pi.transpose().mul(p).sub(&p.mul(&h.pi)));
    let pg = p.mul(&h.g); // <x, G y> = (P G)[x][y]
    let mut gd = Mat::zeros(dim, dim);
    for x in 0..dim {
        for y in 0..dim {
            let s = sign(space.deg(x) * space.deg(y));
            gd.set(x, y, pg.get(x, y) - s * pg.get(y, x));
        }
    }
    mat_check("g-duality", gd);
    let hm = Mat::from_cols(dim, &h.harmonic);
    if h.pi.rank() != h.harmonic.len() || !h.pi.mul(&hm).sub(&hm).is_zero() || !m.mul(&hm).is_zero() {
        rep.push(Violation::note("pi-image", "image of the projector differs from the harmonic span".into()));
    }
    rep
}

fn mat_cols(m: &Mat) -> Vec<SVec<Q>> {
    (0..m.cols)
        .map(|j| {
            (0..m.rows)
                .filter(|&i| !Coeff::is_zero(m.get(i, j)))
                .map(|i| (i, m.get(i, j).clone()))
                .collect()
        })
        .collect()
}

/// The harmonic space with its induced pairing, degrees and names.
pub fn harmonic_space(space: &GradedSpace, pairing: &Pairing, h: &HodgeData) -> (GradedSpace, Pairing) {
    let mut basis = Vec::new();
    for (a, v) in h.harmonic.iter().enumerate() {
        let nz: Vec<usize> = (0..v.len()).filter(|&i| !Coeff::is_zero(&v[i])).collect();
        let name = if nz.len() == 1 && v[nz[0]] == q(1) {
            space.name(nz[0]).to_string()
        } else {
            format!("[h{a}]")
        };
        basis.push((name, vec_degree(space, v)));
    }
    let mut names = std::collections::BTreeSet::new();
    for (n, _) in &mut basis {
        while !names.insert(n.clone()) {
            n.push('\'');
        }
    }
    let hs = GradedSpace::new(basis, space.n()).expect("names deduplicated");
    let nh = h.harmonic.len();
    let mut pm = Mat::zeros(nh, nh);
    for a in 0..nh {
        for b in 0..nh {
            pm.set(a, b, pair_vec(pairing, &h.harmonic[a], &h.harmonic[b]));
        }
    }
    (hs, Pairing::new(pm))
}

fn is_stable(op: &MultiOp<impl Coeff>) -> bool {
    !(op.label.is_zero() && op.arity <= 1)
}

/// Output of the tree transfer.
#[derive(Clone, Debug)]
pub struct Canonical<C: Coeff> {
    pub algebra: FilteredAinfAlgebra<C>,
    pub morphism: AinfMorphism<C>,
}

/// `f_{k,beta}` and `m^can_{k,beta}` via the aggregated tree recursion
/// `f = G ∘ Σ m ∘ (f ⊗ ... ⊗ f)`, `m^can = Π ∘ Σ m ∘ (f ⊗ ... ⊗ f)` over stable `m`,
/// computed for arities up to `k_max + 1`.
pub fn transfer_canonical<C: Coeff>(
    a: &FilteredAinfAlgebra<C>,
    h: &HodgeData,
    k_max: usize,
) -> Canonical<C> {
    let arity_cap = k_max + 1;
    let (hs, hp) = harmonic_space(&a.space, &a.pairing, h);
    let sdeg_h = hs.sdegrees();
    let g_cols = mat_cols(&h.g);
    let proj_cols = mat_cols(&h.to_h);
    let zero = MonoidElement::zero();
    let mut iota = MultiOp::new(1, zero.clone(), OpKind::Morphism);
    for (i, v) in h.harmonic.iter().enumerate() {
        for (j, c) in v.iter().enumerate() {
            iota.add_entry(vec![i], j, &C::from_q(c.clone()));
        }
    }
    let mut f: OpFamily<C> = OpFamily::new();
    family_add(&mut f, iota);
    let mut mcan: OpFamily<C> = OpFamily::new();
    let stable: Vec<&MultiOp<C>> = a.ops.values().filter(|o| is_stable(o)).collect();
    for beta in a.monoid.enumerate(&a.e_cut) {
        for k in 0..=arity_cap {
            if k <= 1 && beta.is_zero() {
                continue;
            }
            let sum = aggregate(&stable, &f, &sdeg_h, &beta, k, &a.e_cut);
            let Some(s) = sum else { continue };
            let fk = s.post_linear(&g_cols);
            let mk = s.post_linear(&proj_cols);
            if !fk.is_zero() {
                let mut fk = fk;
                fk.kind = OpKind::Morphism;
                family_add(&mut f, fk);
            }
            if !mk.is_zero() {
                let mut mk = mk;
                mk.kind = OpKind::Structure;
                family_add(&mut mcan, mk);
            }
        }
    }
    let algebra = FilteredAinfAlgebra {
        space: hs,
        pairing: hp,
        monoid: a.monoid.clone(),
        ops: mcan,
        e_cut: a.e_cut.clone(),
        unit: a.unit.map(|_| 0),
        arity_bound: Some(arity_cap),
    };
    let morphism = AinfMorphism {
        source: algebra.clone(),
        target: a.clone(),
        maps: f,
        e_cut: a.e_cut.clone(),
        arity_bound: Some(arity_cap),
    };
    Canonical { algebra, morphism }
}

/// `Σ_{ops} op ∘ (f ⊗ ... ⊗ f)` restricted to arity `k` and label `beta`.
pub(crate) fn aggregate<C: Coeff>(
    ops: &[&MultiOp<C>],
    f: &OpFamily<C>,
    sdeg: &[i64],
    beta: &MonoidElement,
    k: usize,
    e_cut: &Q,
) -> Option<MultiOp<C>> {
    let idx = FamilyIndex::new(f);
    let budget = Budget { e_cut: e_cut.clone(), max_arity: Some(k), target: Some(beta.clone()) };
    let mut acc: Option<MultiOp<C>> = None;
    for op in ops {
        if op.label.energy > beta.energy {
            continue;
        }
        let slots = vec![&idx; op.arity];
        let out = tensor_compose(op, &slots, None, sdeg, &budget, OpKind::Morphism);
        if let Some(r) = out.get(&(k, beta.clone())) {
            match &mut acc {
                Some(x) => x.add_op(r),
                None => acc = Some(r.clone()),
            }
        }
    }
    acc.filter(|x| !x.is_zero())
}

/// Per-tree maps `f_Γ` and `m_Γ` (the latter in harmonic coordinates), by direct recursion.
/// The bare tree gives `(ι, Π ∘ m1 ∘ ι)`.
pub fn tree_maps(a: &FilteredAinfAlgebra, h: &HodgeData, t: &RibbonTree) -> (MultiOp<Q>, MultiOp<Q>) {
    let (hs, _) = harmonic_space(&a.space, &a.pairing, h);
    let sdeg_h = hs.sdegrees();
    let g_cols = mat_cols(&h.g);
    let proj_cols = mat_cols(&h.to_h);
    let mut iota = MultiOp::new(1, MonoidElement::zero(), OpKind::Morphism);
    for (i, v) in h.harmonic.iter().enumerate() {
        for (j, c) in v.iter().enumerate() {
            iota.add_entry(vec![i], j, c);
        }
    }
    // m_v ∘ (f_Γ1 ⊗ ... ⊗ f_Γl) at a vertex, before applying G or Π
    fn body(a: &FilteredAinfAlgebra, iota: &MultiOp<Q>, sdeg_h: &[i64], g_cols: &[SVec<Q>], t: &Tree) -> MultiOp<Q> {
        match t {
            Tree::Leaf => iota.clone(),
            Tree::Node { label, children } => {
                let subs: Vec<MultiOp<Q>> = children
                    .iter()
                    .map(|c| match c {
                        Tree::Leaf => iota.clone(),
                        _ => body(a, iota, sdeg_h, g_cols, c).post_linear(g_cols),
                    })
                    .collect();
                match a.op(subs.len(), label) {
                    Some(m) => compose_single(m, &subs, sdeg_h),
                    None => MultiOp::new(t.leaves(), t.label_sum(), OpKind::Morphism),
                }
            }
        }
    }
    match &t.top {
        Tree::Leaf => {
            let mut m = compose_single(&a.m1(), &[iota.clone()], &sdeg_h).post_linear(&proj_cols);
            m.kind = OpKind::Structure;
            (iota, m)
        }
        top => {
            let s = body(a, &iota, &sdeg_h, &g_cols, top);
            let mut f = s.post_linear(&g_cols);
            f.kind = OpKind::Morphism;
            let mut m = s.post_linear(&proj_cols);
            m.kind = OpKind::Structure;
            (f, m)
        }
    }
}

/// `m ∘ (f_1 ⊗ ... ⊗ f_l)` for single even maps `f_i`.
pub fn compose_single<C: Coeff>(m: &MultiOp<C>, subs: &[MultiOp<C>], sdeg: &[i64]) -> MultiOp<C> {
    let idx: Vec<FamilyIndex<C>> = subs.iter().map(|s| FamilyIndex::from_ops([s])).collect();
    let slots: Vec<&FamilyIndex<C>> = idx.iter().collect();
    let budget = Budget { e_cut: Q::from_integer(i64::MAX.into()), max_arity: None, target: None };
    let arity: usize = subs.iter().map(|s| s.arity).sum();
    let label = subs.iter().fold(m.label.clone(), |acc, s| acc.add(&s.label));
    let out = tensor_compose(m, &slots, None, sdeg, &budget, OpKind::Morphism);
    out.get(&(arity, label.clone()))
        .cloned()
        .unwrap_or_else(|| MultiOp::new(arity, label, OpKind::Morphism))
}

/// Unrooted view of a ribbon tree: vertex 0 is the root exterior vertex, leaves are
/// exterior vertices `1..=k` in planar order, and every neighbour list is in counterclockwise
/// order starting with the edge towards the root.
#[derive(Clone, Debug)]
pub struct FlagTree {
    pub adj: Vec<Vec<usize>>,
    /// `Some(i)` for the exterior vertex carrying input `x_i`, `None` for interior vertices.
    pub exterior: Vec<Option<usize>>,
    pub labels: Vec<Option<MonoidElement>>,
}

impl FlagTree {
    pub fn new(t: &RibbonTree) -> Self {
        let mut ft = FlagTree { adj: vec![vec![]], exterior: vec![Some(0)], labels: vec![None] };
        let mut next_leaf = 1;
        fn add(ft: &mut FlagTree, parent: usize, t: &Tree, next_leaf: &mut usize) {
            let me = ft.adj.len();
            ft.adj.push(vec![parent]);
            ft.adj[parent].push(me);
            match t {
                Tree::Leaf => {
                    ft.exterior.push(Some(*next_leaf));
                    ft.labels.push(None);
                    *next_leaf += 1;
                }
                Tree::Node { label, children } => {
                    ft.exterior.push(None);
                    ft.labels.push(Some(label.clone()));
                    for c in children {
                        add(ft, me, c, next_leaf);
                    }
                }
            }
        }
        add(&mut ft, 0, &t.top, &mut next_leaf);
        ft
    }

    /// All flags `(v, e)` as (interior vertex, neighbour).
    pub fn flags(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.adj.len() {
            if self.exterior[v].is_none() {
                for &u in &self.adj[v] {
                    out.push((v, u));
                }
            }
        }
        out
    }

    /// Neighbours of `v` in cyclic order starting at `start`.
    fn rotated(&self, v: usize, start: usize) -> Vec<usize> {
        let a = &self.adj[v];
        let p = a.iter().position(|&x| x == start).expect("adjacent");
        a[p..].iter().chain(a[..p].iter()).copied().collect()
    }

    /// `f` of the branch at `u` seen from `v`, with the exterior inputs it consumes in order.
    fn branch(
        &self,
        a: &FilteredAinfAlgebra,
        g_cols: &[SVec<Q>],
        sdeg: &[i64],
        v: usize,
        u: usize,
    ) -> (MultiOp<Q>, Vec<usize>) {
        if let Some(i) = self.exterior[u] {
            return (MultiOp::identity(a.dim()), vec![i]);
        }
        let nbrs = self.rotated(u, v);
        let mut subs = Vec::new();
        let mut ext = Vec::new();
        for &w in &nbrs[1..] {
            let (op, e) = self.branch(a, g_cols, sdeg, u, w);
            subs.push(op);
            ext.extend(e);
        }
        let label = self.labels[u].clone().expect("interior");
        let s = match a.op(subs.len(), &label) {
            Some(m) => compose_single(m, &subs, sdeg),
            None => MultiOp::new(ext.len(), label, OpKind::Morphism),
        };
        (s.post_linear(g_cols), ext)
    }
}

/// The flag value of `(Γ, v, e)` as a `(k+1)`-form keyed by `(x_1, ..., x_k, x_0)`, together
/// with the total label of the tree.
pub fn flag_form(
    a: &FilteredAinfAlgebra,
    h: &HodgeData,
    ft: &FlagTree,
    flag: (usize, usize),
) -> Result<BTreeMap<Vec<usize>, Q>, TransferError> {
    let (v, e) = flag;
    if v >= ft.adj.len() || ft.exterior[v].is_some() || !ft.adj[v].contains(&e) {
        return Err(TreeError::InvalidFlag(format!("({v}, {e})")).into());
    }
    let sdeg = a.sdeg();
    let g_cols = mat_cols(&h.g);
    let nbrs = ft.rotated(v, e);
    let (f0, ext0) = ft.branch(a, &g_cols, &sdeg, v, nbrs[0]);
    let mut subs = Vec::new();
    let mut order = Vec::new();
    for &u in &nbrs[1..] {
        let (op, ext) = ft.branch(a, &g_cols, &sdeg, v, u);
        subs.push(op);
        order.extend(ext);
    }
    order.extend(ext0.iter().copied());
    let label = ft.labels[v].clone().expect("interior");
    let k = order.len() - 1;
    // `order` is a rotation of the exterior sequence S = (1, ..., k, 0)
    let s_seq: Vec<usize> = (1..=k).chain(std::iter::once(0)).collect();
    let shift = s_seq.iter().position(|&x| x == order[0]).expect("exterior vertex");
    debug_assert!((0..=k).all(|i| order[i] == s_seq[(i + shift) % (k + 1)]));
    let mut form = BTreeMap::new();
    let Some(m) = a.op(subs.len(), &label) else {
        return Ok(form);
    };
    let top = compose_single(m, &subs, &sdeg);
    let nsub = top.arity;
    for (t, vout) in &top.entries {
        for (t0, w) in &f0.entries {
            let val = a.pairing.eval(vout, w);
            if Coeff::is_zero(&val) {
                continue;
            }
            // position i of the rotated tuple holds exterior vertex order[i]
            let mut by_ext = vec![0usize; k + 1];
            for (i, &b) in t.iter().chain(t0.iter()).enumerate() {
                by_ext[order[i]] = b;
            }
            debug_assert_eq!(t.len(), nsub);
            let key: Vec<usize> = (1..=k).map(|i| by_ext[i]).chain(std::iter::once(by_ext[0])).collect();
            let moved: i64 = key[..shift].iter().map(|&b| sdeg[b]).sum();
            let rest: i64 = key[shift..].iter().map(|&b| sdeg[b]).sum();
            let val = if (moved * rest).rem_euclid(2) == 0 { val } else { -val };
            let e = form.entry(key).or_insert_with(|| q(0));
            *e += val;
        }
    }
    form.retain(|_, c: &mut Q| !Coeff::is_zero(c));
    Ok(form)
}

/// The flag value on given basis inputs `(x_1, ..., x_k, x_0)`, weighted by `T^{E(β)} e^{μ(β)/2}`.
pub fn flag_value(
    a: &FilteredAinfAlgebra,
    h: &HodgeData,
    t: &RibbonTree,
    flag: (usize, usize),
    inputs: &[usize],
) -> Result<NovikovScalar, TransferError> {
    let ft = FlagTree::new(t);
    let form = flag_form(a, h, &ft, flag)?;
    let c = form.get(inputs).cloned().unwrap_or_else(|| q(0));
    Ok(t.beta().weight().scale(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::torus_algebra;

    #[test]
    fn zero_differential_gives_identity() {
        let a = torus_algebra();
        let h = build_hodge_for(&a).unwrap();
        assert_eq!(h.pi, Mat::identity(4));
        assert!(h.g.is_zero());
        assert!(check_hodge(&a.space, &a.pairing, &a.m1(), &h).is_ok());
    }
}
