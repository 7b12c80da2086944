//! Random cyclic operations and random gapped filtered A∞ algebras for testing.

use std::collections::BTreeMap;

use rand::Rng;

use crate::ainf::FilteredAinfAlgebra;
use crate::deform::DivisorPairingData;
use crate::graded::{family_add, Coeff, GradedSpace, MultiOp, OpFamily, OpKind, Pairing};
use crate::isotopy::{extend_isotopy, IsotopyError, PseudoIsotopy};
use crate::model::{exterior_model, rand_q, random_model, random_shape};
use crate::novikov::{factorial, q, qf, DiscreteMonoid, MonoidElement, Q};
use crate::poly::{PiecewisePoly, UPoly};

/// A random operation of the given arity, label and kind whose pairing form is cyclically
/// symmetric and which vanishes whenever the unit is an input. Each admissible rotation
/// orbit is kept with probability `density` and seeded with `coeff(rng)`.
#[allow(clippy::too_many_arguments)]
pub fn random_cyclic_op<R: Rng, C: Coeff>(
    rng: &mut R,
    space: &GradedSpace,
    pairing: &Pairing,
    arity: usize,
    label: &MonoidElement,
    kind: OpKind,
    unit: Option<usize>,
    density: f64,
    mut coeff: impl FnMut(&mut R) -> C,
) -> MultiOp<C> {
    let dim = space.dim();
    let sdeg = space.sdegrees();
    let total = space.n() - 2 - kind.shift() + label.maslov;
    let pinv = pairing.matrix.inverse().expect("pairing is nondegenerate");
    let mut form: std::collections::BTreeMap<Vec<usize>, C> = Default::default();
    let mut key = vec![0usize; arity + 1];
    'keys: loop {
        let admissible = key.iter().map(|&i| sdeg[i]).sum::<i64>() == total
            && !unit.is_some_and(|e| key.contains(&e))
            && !form.contains_key(&key);
        if admissible {
            // Walk the orbit under rot_right, where ψ(rot_right K) = s(K) ψ(K).
            let mut orbit = vec![(key.clone(), 1i32)];
            let mut cur = key.clone();
            let mut sign = 1i32;
            loop {
                let x0 = sdeg[cur[arity]];
                let rest: i64 = cur[..arity].iter().map(|&i| sdeg[i]).sum();
                if (x0 * rest).rem_euclid(2) == 1 {
                    sign = -sign;
                }
                cur.rotate_right(1);
                if cur == key {
                    break;
                }
                orbit.push((cur.clone(), sign));
            }
            let consistent = sign == 1;
            let keep = consistent && rng.gen_bool(density);
            let v = if keep { coeff(rng) } else { C::zero() };
            for (k, s) in orbit {
                form.insert(k, v.signed(s));
            }
        }
        for i in (0..=arity).rev() {
            key[i] += 1;
            if key[i] < dim {
                continue 'keys;
            }
            key[i] = 0;
        }
        break;
    }
    let mut op = MultiOp::new(arity, label.clone(), kind);
    for (k, psi) in form {
        if psi.is_zero() {
            continue;
        }
        let (t, x0) = (k[..arity].to_vec(), k[arity]);
        for j in 0..dim {
            let p = pinv.get(x0, j);
            if !Coeff::is_zero(p) {
                op.add_entry(t.clone(), j, &psi.scale(p));
            }
        }
    }
    op
}

/// A random affine-in-`t` coefficient `a + b t`.
pub fn random_affine<R: Rng>(rng: &mut R) -> PiecewisePoly {
    PiecewisePoly::poly(UPoly::new(vec![rand_q(rng, 2), rand_q(rng, 2)]))
}

/// Random cyclic connection terms with arities `0..=max_arity` at the given labels.
pub fn random_connection<R: Rng>(
    rng: &mut R,
    a: &FilteredAinfAlgebra<PiecewisePoly>,
    labels: &[MonoidElement],
    max_arity: usize,
    density: f64,
) -> OpFamily<PiecewisePoly> {
    let mut out = OpFamily::new();
    for b in labels {
        for k in 0..=max_arity {
            let op = random_cyclic_op(rng, &a.space, &a.pairing, k, b, OpKind::Morphism, a.unit, density, random_affine);
            if !op.is_zero() {
                family_add(&mut out, op);
            }
        }
    }
    out
}

/// Parameters of [`random_gapped_algebra`].
#[derive(Clone, Debug)]
pub struct GappedSpec {
    pub max_dim: usize,
    pub generators: Vec<MonoidElement>,
    pub e_cut: Q,
    pub rounds: usize,
    pub density: f64,
    /// Adds the curvature `λ·e` at the first generator of Maslov index 2.
    pub curvature: bool,
}

impl Default for GappedSpec {
    fn default() -> Self {
        GappedSpec {
            max_dim: 6,
            generators: vec![
                MonoidElement::new(q(1), 0).expect("valid"),
                MonoidElement::new(crate::novikov::qf(3, 2), 2).expect("valid"),
            ],
            e_cut: crate::novikov::qf(21, 10),
            rounds: 2,
            density: 0.5,
            curvature: true,
        }
    }
}

/// A random cyclic unital gapped algebra: a random Poincaré duality model deformed by
/// `rounds` random pseudo-isotopies with connection terms at every positive level.
pub fn random_gapped_algebra<R: Rng>(rng: &mut R, spec: &GappedSpec) -> Result<FilteredAinfAlgebra, IsotopyError> {
    let monoid = DiscreteMonoid::new(spec.generators.clone()).expect("valid generators");
    let shape = loop {
        let s = random_shape(rng, spec.max_dim);
        if s.dim() >= spec.max_dim.min(4) {
            break s;
        }
    };
    let mut a = random_model(rng, &shape).to_ainf(monoid.clone(), spec.e_cut.clone())?;
    if spec.curvature {
        if let (Some(b), Some(e)) = (monoid.generators().iter().find(|g| g.maslov == 2), a.unit) {
            let mut m0 = MultiOp::new(0, b.clone(), OpKind::Structure);
            m0.add_entry(vec![], e, &rand_q(rng, 2));
            family_add(&mut a.ops, m0);
        }
    }
    let e0 = monoid.min_energy().unwrap_or_else(|| spec.e_cut.clone());
    let labels: Vec<MonoidElement> = monoid.enumerate(&spec.e_cut).into_iter().filter(|b| !b.is_zero()).collect();
    for _ in 0..spec.rounds {
        let base = PseudoIsotopy::constant(&a.truncate(&e0));
        let c = random_connection(rng, &base.m, &labels, 2, spec.density);
        let pi = extend_isotopy(&base, &a, &c)?;
        a = pi.slice(&q(0));
    }
    Ok(a)
}

/// `T³` cohomology (`a, b, c`) with divisors `a, b` and quantum operations satisfying the
/// divisor identity by construction. Random seeds `s_k` (`k ≤ 2`) on the remaining classes
/// are spread over divisor insertions as `m_{k+m}(.. d_{i_1} .. d_{i_m} ..) = Π g · k!/(k+m)! s_k`
/// up to arity `k_cap`. Labels are `(1, 2)` with `g = (1, 0)` and `(3/2, 0)` with
/// `g = (1, −1)`; `E_cut = 2`.
pub fn divisor_algebra<R: Rng>(rng: &mut R, k_cap: usize) -> (FilteredAinfAlgebra, DivisorPairingData) {
    let pd = exterior_model(&["a", "b", "c"], &[vec![], vec![], vec![]]);
    let g1 = MonoidElement::new(q(1), 2).expect("valid");
    let g2 = MonoidElement::new(qf(3, 2), 0).expect("valid");
    let monoid = DiscreteMonoid::new(vec![g1.clone(), g2.clone()]).expect("valid");
    let mut alg = pd.to_ainf(monoid.clone(), q(2)).expect("valid model");
    let da = alg.space.index_of("a").expect("a");
    let db = alg.space.index_of("b").expect("b");
    let gen_values: BTreeMap<MonoidElement, Vec<i64>> = [(g1.clone(), vec![1, 0]), (g2.clone(), vec![1, -1])].into();
    let pairing =
        DivisorPairingData::from_generators(vec![da, db], &monoid, &gen_values, &alg.e_cut).expect("additive");
    let sd = alg.sdeg();
    let free: Vec<usize> = (1..alg.dim()).filter(|&i| i != da && i != db).collect();
    let mut seeds = OpFamily::new();
    for beta in [&g1, &g2] {
        for k in 0..=2usize {
            let mut op = MultiOp::new(k, beta.clone(), OpKind::Structure);
            let mut tuples: Vec<Vec<usize>> = vec![vec![]];
            for _ in 0..k {
                tuples = tuples.iter().flat_map(|p| free.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
            }
            for tu in tuples {
                let target = tu.iter().map(|&i| sd[i]).sum::<i64>() + 1 - beta.maslov;
                for j in 0..alg.dim() {
                    if sd[j] == target && rng.gen_bool(0.5) {
                        op.add_entry(tu.clone(), j, &rand_q(rng, 3));
                    }
                }
            }
            if !op.is_zero() {
                family_add(&mut seeds, op);
            }
        }
    }
    for ((k, beta), s) in &seeds {
        let g = pairing.get(beta).expect("generator").to_vec();
        for m in 0..=k_cap.saturating_sub(*k) {
            let mut op = MultiOp::new(k + m, beta.clone(), OpKind::Structure);
            let w = factorial(*k) / factorial(k + m);
            for (tu, v) in &s.entries {
                for mask in 0u32..1 << (k + m) {
                    if mask.count_ones() as usize != m {
                        continue;
                    }
                    for word in 0u32..1 << m {
                        let mut full = Vec::with_capacity(k + m);
                        let mut c = w.clone();
                        let (mut si, mut di) = (0, 0);
                        for p in 0..k + m {
                            if mask >> p & 1 == 1 {
                                let which = (word >> di & 1) as usize;
                                full.push([da, db][which]);
                                c *= q(g[which]);
                                di += 1;
                            } else {
                                full.push(tu[si]);
                                si += 1;
                            }
                        }
                        op.add_vec(full, v, &c);
                    }
                }
            }
            family_add(&mut alg.ops, op);
        }
    }
    alg.ops.retain(|_, op| !op.is_zero());
    alg.validate().expect("valid by construction");
    (alg, pairing)
}
