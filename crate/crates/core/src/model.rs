//! De Rham type models: finite Poincaré-duality DGAs turned into cyclic A∞ algebras
//! with `m_1(u) = (-1)^{deg u} du`, `m_2(u,v) = (-1)^{deg u deg v + deg u} u∧v` and
//! `<u,v> = (-1)^{deg u deg v + deg u} ∫ u∧v`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::ainf::{AinfError, FilteredAinfAlgebra};
use crate::graded::{svec_add, GradedSpace, MultiOp, OpKind, Pairing, SVec};
use crate::linalg::Mat;
use crate::novikov::{q, DiscreteMonoid, MonoidElement, Q};

/// A finite graded-commutative DGA with an integration functional.
#[derive(Clone, Debug, PartialEq)]
pub struct PdAlgebra {
    pub names: Vec<String>,
    pub degrees: Vec<i64>,
    pub n: i64,
    pub wedge: BTreeMap<(usize, usize), SVec<Q>>,
    pub d: Vec<SVec<Q>>,
    pub integral: SVec<Q>,
    pub unit: Option<usize>,
}

fn sgn(e: i64) -> Q {
    if e.rem_euclid(2) == 0 {
        q(1)
    } else {
        q(-1)
    }
}

impl PdAlgebra {
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn space(&self) -> GradedSpace {
        GradedSpace::new(self.names.iter().cloned().zip(self.degrees.iter().copied()).collect(), self.n)
            .expect("names are unique")
    }

    pub fn integrate(&self, v: &SVec<Q>) -> Q {
        v.iter().filter_map(|(i, c)| self.integral.get(i).map(|w| c * w)).sum()
    }

    pub fn pairing(&self) -> Pairing {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for ((u, v), w) in &self.wedge {
            let (a, b) = (self.degrees[*u], self.degrees[*v]);
            m.set(*u, *v, sgn(a * b + a) * self.integrate(w));
        }
        Pairing::new(m)
    }

    pub fn m1(&self) -> MultiOp<Q> {
        let mut op = MultiOp::new(1, MonoidElement::zero(), OpKind::Structure);
        for (u, du) in self.d.iter().enumerate() {
            let s = sgn(self.degrees[u]);
            for (j, c) in du {
                op.add_entry(vec![u], *j, &(c * &s));
            }
        }
        op
    }

    pub fn m2(&self) -> MultiOp<Q> {
        let mut op = MultiOp::new(2, MonoidElement::zero(), OpKind::Structure);
        for ((u, v), w) in &self.wedge {
            let (a, b) = (self.degrees[*u], self.degrees[*v]);
            let s = sgn(a * b + a);
            for (j, c) in w {
                op.add_entry(vec![*u, *v], *j, &(c * &s));
            }
        }
        op
    }

    pub fn to_ainf(&self, monoid: DiscreteMonoid, e_cut: Q) -> Result<FilteredAinfAlgebra, AinfError> {
        FilteredAinfAlgebra::new(self.space(), self.pairing(), monoid, vec![self.m1(), self.m2()], e_cut, self.unit)
    }

    /// Re-expresses the algebra in the basis whose `i`-th vector has old coordinates
    /// `p.col(i)`. `p` must be invertible and degree preserving.
    pub fn change_basis(&self, p: &Mat) -> PdAlgebra {
        let inv = p.inverse().expect("basis change must be invertible");
        let dim = self.dim();
        let to_new = |v: &SVec<Q>| -> SVec<Q> {
            let mut out = SVec::new();
            for (a, c) in v {
                for i in 0..dim {
                    let x = inv.get(i, *a);
                    if !num_traits::Zero::is_zero(x) {
                        svec_add(&mut out, i, &(c * x));
                    }
                }
            }
            out
        };
        let col = |i: usize| -> SVec<Q> {
            (0..dim)
                .filter(|&a| !num_traits::Zero::is_zero(p.get(a, i)))
                .map(|a| (a, p.get(a, i).clone()))
                .collect()
        };
        let cols: Vec<SVec<Q>> = (0..dim).map(col).collect();
        let mut wedge = BTreeMap::new();
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = SVec::new();
                for (a, x) in &cols[i] {
                    for (b, y) in &cols[j] {
                        if let Some(w) = self.wedge.get(&(*a, *b)) {
                            for (t, c) in w {
                                svec_add(&mut acc, *t, &(c * x * y));
                            }
                        }
                    }
                }
                let nw = to_new(&acc);
                if !nw.is_empty() {
                    wedge.insert((i, j), nw);
                }
            }
        }
        let d = (0..dim)
            .map(|i| {
                let mut acc = SVec::new();
                for (a, x) in &cols[i] {
                    for (t, c) in &self.d[*a] {
                        svec_add(&mut acc, *t, &(c * x));
                    }
                }
                to_new(&acc)
            })
            .collect();
        let integral = (0..dim)
            .filter_map(|i| {
                let v = self.integrate(&cols[i]);
                (!num_traits::Zero::is_zero(&v)).then_some((i, v))
            })
            .collect();
        let unit = self.unit.map(|u| {
            let v = to_new(&[(u, q(1))].into_iter().collect());
            assert!(v.len() == 1 && v.values().all(|c| *c == q(1)), "basis change must fix the unit");
            *v.keys().next().expect("nonzero")
        });
        PdAlgebra { names: self.names.clone(), degrees: self.degrees.clone(), n: self.n, wedge, d, integral, unit }
    }
}

/// Cohomology of the 2-torus: basis `1, e1, e2, e1e2` with `m_1 = 0`.
pub fn torus() -> PdAlgebra {
    let mut b = SkeletonBuilder::new(2);
    let h = b.push("e1", 1);
    let hs = b.push("e2", 1);
    b.pair(h, hs, q(1));
    b.finish()
}

/// The torus model as a filtered algebra with trivial monoid.
pub fn torus_algebra() -> FilteredAinfAlgebra {
    torus().to_ainf(DiscreteMonoid::trivial(), q(1)).expect("torus model is valid")
}

/// Chevalley–Eilenberg model of a nilpotent Lie algebra: the exterior algebra on degree-one
/// generators `names` with `d(g_k) = Σ c g_i g_j` over `(i, j, c)` in `dg[k]` (`i < j`).
/// The top monomial integrates to 1. Jacobi and unimodularity are the caller's duty.
pub fn exterior_model(names: &[&str], dg: &[Vec<(usize, usize, Q)>]) -> PdAlgebra {
    let g = names.len();
    let subsets: Vec<u32> = {
        let mut v: Vec<u32> = (0..1u32 << g).collect();
        v.sort_by_key(|m| (m.count_ones(), *m));
        v
    };
    let index: BTreeMap<u32, usize> = subsets.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let name = |m: u32| -> String {
        if m == 0 {
            return "1".into();
        }
        (0..g).filter(|i| m >> i & 1 == 1).map(|i| names[i]).collect::<Vec<_>>().join("")
    };
    // sign of sorting a ∪ b when a, b are disjoint and concatenated a then b
    let merge = |a: u32, b: u32| -> Option<Q> {
        if a & b != 0 {
            return None;
        }
        let mut inv = 0;
        for i in 0..g {
            if a >> i & 1 == 1 {
                inv += (b & ((1u32 << i) - 1)).count_ones();
            }
        }
        Some(sgn(inv as i64))
    };
    let mut wedge = BTreeMap::new();
    for &a in &subsets {
        for &b in &subsets {
            if let Some(s) = merge(a, b) {
                wedge.insert((index[&a], index[&b]), [(index[&(a | b)], s)].into_iter().collect());
            }
        }
    }
    let mut d = vec![SVec::new(); subsets.len()];
    for &m in &subsets {
        let mut acc = SVec::new();
        let mut before = 0;
        for k in 0..g {
            if m >> k & 1 == 0 {
                continue;
            }
            // d(a g_k b) = (-1)^{|a|} a d(g_k) b
            let rest = m & !(1u32 << k);
            let lower = rest & ((1u32 << k) - 1);
            let upper = rest & !((1u32 << k) - 1);
            for (i, j, c) in &dg[k] {
                let dgk = (1u32 << i) | (1u32 << j);
                let Some(s1) = merge(lower, dgk) else { continue };
                let Some(s2) = merge(lower | dgk, upper) else { continue };
                let v = c * s1 * s2 * sgn(before);
                svec_add(&mut acc, index[&(lower | dgk | upper)], &v);
            }
            before += 1;
        }
        d[index[&m]] = acc;
    }
    let top = (1u32 << g) - 1;
    PdAlgebra {
        names: subsets.iter().map(|m| name(*m)).collect(),
        degrees: subsets.iter().map(|m| m.count_ones() as i64).collect(),
        n: g as i64,
        wedge,
        d,
        integral: [(index[&top], q(1))].into_iter().collect(),
        unit: Some(0),
    }
}

/// The Heisenberg nilmanifold: generators `x, y, z` with `dz = xy`.
pub fn heisenberg() -> PdAlgebra {
    exterior_model(&["x", "y", "z"], &[vec![], vec![], vec![(0, 1, q(1))]])
}

/// Builds `span(1) ⊕ V ⊕ span(vol)` with `u∧v = I(u,v) vol` on `V`.
pub struct SkeletonBuilder {
    n: i64,
    names: Vec<String>,
    degrees: Vec<i64>,
    form: BTreeMap<(usize, usize), Q>,
    d: BTreeMap<usize, (usize, Q)>,
}

impl SkeletonBuilder {
    pub fn new(n: i64) -> Self {
        SkeletonBuilder { n, names: vec!["1".into()], degrees: vec![0], form: BTreeMap::new(), d: BTreeMap::new() }
    }

    pub fn push(&mut self, name: &str, deg: i64) -> usize {
        self.names.push(name.to_string());
        self.degrees.push(deg);
        self.names.len() - 1
    }

    /// Sets `I(u,v) = c` and the graded-symmetric partner `I(v,u)`.
    pub fn pair(&mut self, u: usize, v: usize, c: Q) {
        let s = sgn(self.degrees[u] * self.degrees[v]);
        self.form.insert((v, u), &c * s);
        self.form.insert((u, v), c);
    }

    pub fn set_d(&mut self, u: usize, v: usize, c: Q) {
        self.d.insert(u, (v, c));
    }

    pub fn finish(self) -> PdAlgebra {
        let mut names = self.names;
        let mut degrees = self.degrees;
        names.push("vol".into());
        degrees.push(self.n);
        let dim = names.len();
        let vol = dim - 1;
        let mut wedge = BTreeMap::new();
        for i in 0..dim {
            let mut one = SVec::new();
            one.insert(i, q(1));
            wedge.insert((0, i), one.clone());
            wedge.insert((i, 0), one);
        }
        for ((u, v), c) in self.form {
            let mut w = SVec::new();
            w.insert(vol, c);
            wedge.insert((u, v), w);
        }
        let mut d = vec![SVec::new(); dim];
        for (u, (v, c)) in self.d {
            d[u].insert(v, c);
        }
        let mut integral = SVec::new();
        integral.insert(vol, q(1));
        PdAlgebra { names, degrees, n: self.n, wedge, d, integral, unit: Some(0) }
    }
}

/// Shape of a random model.
#[derive(Clone, Debug)]
pub struct ModelShape {
    pub n: i64,
    /// Degrees `p` of harmonic pairs `(h, h*)` with `deg h* = n - p`.
    pub harmonic: Vec<i64>,
    /// Degrees `p` of acyclic quadruples `a, da, a*, da*` with `deg a = p`.
    pub acyclic: Vec<i64>,
    /// Number of self-dual acyclic pairs `a, da` (requires `n = 3`).
    pub self_dual: usize,
}

impl ModelShape {
    pub fn dim(&self) -> usize {
        2 + 2 * self.harmonic.len() + 4 * self.acyclic.len() + 2 * self.self_dual
    }
}

pub fn skeleton(shape: &ModelShape) -> PdAlgebra {
    let n = shape.n;
    let mut b = SkeletonBuilder::new(n);
    for (i, &p) in shape.harmonic.iter().enumerate() {
        let h = b.push(&format!("h{i}"), p);
        let hs = b.push(&format!("h{i}*"), n - p);
        b.pair(h, hs, q(1));
    }
    for (i, &p) in shape.acyclic.iter().enumerate() {
        let a = b.push(&format!("a{i}"), p);
        let da = b.push(&format!("b{i}"), p + 1);
        let a_s = b.push(&format!("a{i}*"), n - p - 1);
        let da_s = b.push(&format!("b{i}*"), n - p);
        b.set_d(a, da, q(1));
        b.set_d(a_s, da_s, q(1));
        b.pair(a, da_s, q(1));
        b.pair(da, a_s, sgn(p + 1));
    }
    for i in 0..shape.self_dual {
        assert_eq!(n, 3, "self-dual acyclic pairs need n = 3");
        let a = b.push(&format!("s{i}"), 1);
        let da = b.push(&format!("t{i}"), 2);
        b.set_d(a, da, q(1));
        b.pair(a, da, q(1));
    }
    b.finish()
}

/// Small random rational in `[-range, range]` with denominators up to 2.
pub fn rand_q<R: Rng>(rng: &mut R, range: i64) -> Q {
    let num = rng.gen_range(-range..=range);
    let den = rng.gen_range(1..=2);
    Q::new(num.into(), den.into())
}

/// A random degree-preserving basis change fixing the unit (index 0). Vectors of degree 0
/// may pick up multiples of the unit and vectors of degree `n` multiples of `vol`.
pub fn random_basis_change<R: Rng>(rng: &mut R, a: &PdAlgebra) -> Mat {
    let dim = a.dim();
    let vol = dim - 1;
    loop {
        let mut p = Mat::zeros(dim, dim);
        p.set(0, 0, q(1));
        for i in 1..dim {
            for j in 1..dim {
                if a.degrees[i] == a.degrees[j] {
                    let v = if i == j { q(rng.gen_range(1..=2)) } else { rand_q(rng, 1) };
                    p.set(i, j, v);
                }
            }
            if a.degrees[i] == 0 {
                p.set(0, i, rand_q(rng, 1));
            }
        }
        let _ = vol;
        if p.inverse().is_some() {
            return p;
        }
    }
}

/// A random model of the given shape in a randomly changed basis.
pub fn random_model<R: Rng>(rng: &mut R, shape: &ModelShape) -> PdAlgebra {
    let s = skeleton(shape);
    let p = random_basis_change(rng, &s);
    s.change_basis(&p)
}

/// A random shape with ambient degree 2 or 3 and dimension at most `max_dim`.
pub fn random_shape<R: Rng>(rng: &mut R, max_dim: usize) -> ModelShape {
    let n = if rng.gen_bool(0.5) { 2 } else { 3 };
    let mut shape = ModelShape { n, harmonic: vec![], acyclic: vec![], self_dual: 0 };
    loop {
        let choice = rng.gen_range(0..4);
        let mut next = shape.clone();
        match choice {
            0 => next.harmonic.push(rng.gen_range(0..=n)),
            1 if n == 3 => next.acyclic.push(1),
            1 => next.acyclic.push(rng.gen_range(0..=1)),
            2 if n == 3 => next.self_dual += 1,
            _ => break,
        }
        if next.dim() > max_dim {
            break;
        }
        shape = next;
    }
    shape
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ainf::{verify_ainf, verify_cyclic, verify_unital};
    use crate::graded::check_pairing_axioms;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn torus_passes() {
        let a = torus_algebra();
        assert!(check_pairing_axioms(&a.space, &a.pairing).is_ok());
        assert!(verify_ainf(&a, 5).is_ok());
        assert!(verify_cyclic(&a, 5).is_ok());
        assert!(verify_unital(&a, 5).unwrap().is_ok());
        let e1 = a.space.index_of("e1").unwrap();
        let e2 = a.space.index_of("e2").unwrap();
        let m2 = a.op(2, &MonoidElement::zero()).unwrap();
        assert_eq!(m2.get(&[e1, e2]).unwrap().get(&3), Some(&q(1)));
    }

    #[test]
    fn heisenberg_is_cyclic_dga() {
        let a = heisenberg().to_ainf(DiscreteMonoid::trivial(), q(1)).unwrap();
        assert!(check_pairing_axioms(&a.space, &a.pairing).is_ok());
        assert!(verify_ainf(&a, 4).is_ok());
        assert!(verify_cyclic(&a, 4).is_ok());
        assert!(verify_unital(&a, 4).unwrap().is_ok());
        assert!(!a.m1().is_zero());
    }

    #[test]
    fn random_models_are_cyclic_dgas() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let shape = random_shape(&mut rng, 8);
            let m = random_model(&mut rng, &shape);
            let a = m.to_ainf(DiscreteMonoid::trivial(), q(1)).unwrap();
            let r = check_pairing_axioms(&a.space, &a.pairing);
            assert!(r.is_ok(), "{shape:?}\n{r}");
            let r = verify_ainf(&a, 4);
            assert!(r.is_ok(), "{shape:?}\n{r}");
            let r = verify_cyclic(&a, 4);
            assert!(r.is_ok(), "{shape:?}\n{r}");
            assert!(verify_unital(&a, 4).unwrap().is_ok());
        }
    }
}
