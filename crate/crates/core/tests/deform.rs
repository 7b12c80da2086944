use std::collections::BTreeMap;

use cainf::ainf::{verify_ainf, verify_cyclic, verify_unital, FilteredAinfAlgebra};
use cainf::deform::{
    check_divisor_property, curvature, deform_by_b, energy_shift, mc_value, BoundingData, DeformError, DivisorCoeff,
    DivisorPairingData, McOptions,
};
use cainf::graded::{apply_novikov, family_add, MultiOp, OpKind};
use cainf::model::{rand_q, torus};
use cainf::novikov::{q, qf, DiscreteMonoid, MonoidElement, NovikovScalar, Q};
use cainf::random::{divisor_algebra, random_gapped_algebra, GappedSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn me(e: Q, m: i64) -> MonoidElement {
    MonoidElement::new(e, m).unwrap()
}

fn t(coef: i64, lambda: Q) -> NovikovScalar {
    NovikovScalar::monomial(q(coef), lambda, 0)
}

/// A cochain with positive-valuation terms on random odd-degree basis elements.
fn random_b(rng: &mut ChaCha8Rng, a: &FilteredAinfAlgebra) -> BoundingData {
    let mut high = BTreeMap::new();
    let odd: Vec<usize> = (0..a.dim()).filter(|&i| a.space.deg(i) % 2 == 1).collect();
    for &i in &odd {
        if high.is_empty() && i == *odd.last().unwrap() || rng.gen_bool(0.6) {
            let lambda = [qf(1, 4), qf(1, 2)][rng.gen_range(0..2)].clone();
            let c = loop {
                let c = rand_q(rng, 2);
                if c != q(0) {
                    break c;
                }
            };
            high.insert(i, NovikovScalar::monomial(c, lambda, 1 - a.space.deg(i)));
        }
    }
    BoundingData::high(high)
}

fn gapped(seed: u64, n: usize) -> Vec<FilteredAinfAlgebra> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GappedSpec { rounds: 1, max_dim: 6, ..GappedSpec::default() };
    (0..n).map(|_| random_gapped_algebra(&mut rng, &spec).unwrap()).collect()
}

fn torus_with_quantum_term() -> (FilteredAinfAlgebra, usize, usize) {
    let beta0 = me(q(1), 0);
    let mut a = torus().to_ainf(DiscreteMonoid::new(vec![beta0.clone()]).unwrap(), q(3)).unwrap();
    let e1 = a.space.index_of("e1").unwrap();
    let vol = a.space.index_of("vol").unwrap();
    let mut m = MultiOp::new(2, beta0, OpKind::Structure);
    m.add_entry(vec![e1, e1], vol, &q(1));
    family_add(&mut a.ops, m);
    a.validate().unwrap();
    (a, e1, vol)
}

#[test]
fn deformed_structures_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nontrivial = 0;
    for a in gapped(41, 10) {
        let b = random_b(&mut rng, &a);
        let ab = deform_by_b(&a, &b).unwrap();
        if ab != a {
            nontrivial += 1;
        }
        let r = verify_ainf(&ab, 4);
        assert!(r.is_ok(), "{r}");
        let r = verify_cyclic(&ab, 4);
        assert!(r.is_ok(), "{r}");
        let r = verify_unital(&ab, 4).unwrap();
        assert!(r.is_ok(), "{r}");
        // m^b_0 is m(e^b).
        assert_eq!(curvature(&ab), mc_value(&a, &b, None, &McOptions::default()).unwrap());
    }
    assert!(nontrivial >= 6);
}

#[test]
fn torus_with_quantum_term_by_hand() {
    let (a, e1, vol) = torus_with_quantum_term();
    // b = T^{1/2} e1; m_{2,0}(b,b) = 0 and m_{2,beta0}(b,b) = T^2 vol.
    let b = BoundingData::high([(e1, t(1, qf(1, 2)))].into());
    let ab = deform_by_b(&a, &b).unwrap();
    let mut expected = vec![NovikovScalar::zero(); a.dim()];
    expected[vol] = t(1, q(2));
    assert_eq!(strip(&curvature(&ab), &q(3)), expected);
    assert!(!curvature(&ab).iter().all(|x| x.is_zero()));
    // Without the quantum term the same b is a bounding cochain.
    let plain = torus().to_ainf(a.monoid.clone(), q(3)).unwrap();
    let pb = deform_by_b(&plain, &b).unwrap();
    assert!(curvature(&pb).iter().all(|x| x.is_zero()));
    assert!(mc_value(&plain, &b, None, &McOptions::default()).unwrap().iter().all(|x| x.is_zero()));
    assert!(pb.op(0, &me(q(1), 0)).is_none());
}

#[test]
fn trivial_mc_values() {
    let (a, e1, _) = torus_with_quantum_term();
    assert_eq!(mc_value(&a, &BoundingData::zero(), None, &McOptions::default()).unwrap(), curvature(&a));
    // m(e^b) vanishes for b in ker m_1 on which every higher operation vanishes.
    let plain = torus().to_ainf(a.monoid.clone(), q(3)).unwrap();
    let b = BoundingData::high([(e1, t(2, qf(1, 3)))].into());
    assert!(mc_value(&plain, &b, None, &McOptions::default()).unwrap().iter().all(|x| x.is_zero()));
}

#[test]
fn deforming_twice_adds_cochains() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for a in gapped(43, 5) {
        let b1 = random_b(&mut rng, &a);
        let b2 = random_b(&mut rng, &a);
        let twice = deform_by_b(&deform_by_b(&a, &b1).unwrap(), &b2).unwrap();
        let once = deform_by_b(&a, &b1.add(&b2).unwrap()).unwrap();
        assert_eq!(twice.ops, once.ops);
    }
}

struct DivisorInstance {
    alg: FilteredAinfAlgebra,
    pairing: DivisorPairingData,
}

fn divisor_instance(seed: u64, k_cap: usize) -> DivisorInstance {
    let (alg, pairing) = divisor_algebra(&mut ChaCha8Rng::seed_from_u64(seed), k_cap);
    DivisorInstance { alg, pairing }
}

/// `Σ_K m_K(b, ..., b)` by direct multilinear evaluation.
fn brute_mc(a: &FilteredAinfAlgebra, b: &[NovikovScalar]) -> Vec<NovikovScalar> {
    let mut out = vec![NovikovScalar::zero(); a.dim()];
    for op in a.ops.values() {
        let args = vec![b.to_vec(); op.arity];
        let v = apply_novikov(op, &args, &a.e_cut).unwrap();
        for (o, x) in out.iter_mut().zip(v) {
            *o = o.add(&x).truncate(&a.e_cut);
        }
    }
    out
}

fn strip(v: &[NovikovScalar], cut: &Q) -> Vec<NovikovScalar> {
    v.iter().map(|x| NovikovScalar::from_terms(x.truncate(cut).terms().to_vec(), None)).collect()
}

#[test]
fn divisor_property_checks() {
    // No quantum operations: vacuous apart from the classical part, which satisfies it.
    let inst = divisor_instance(1, 6);
    let classical = inst.alg.zero_slice();
    assert!(check_divisor_property(&classical, &inst.pairing, 3, 3).is_ok());
    let r = check_divisor_property(&inst.alg, &inst.pairing, 3, 3);
    assert!(r.is_ok(), "{r}");
    // Perturb one divisor insertion entry.
    let (key, tuple) = inst
        .alg
        .ops
        .iter()
        .filter(|((k, b), _)| *k >= 1 && *k <= 3 && !b.is_zero())
        .find_map(|(key, op)| {
            op.entries.keys().find(|tu| tu.contains(&inst.pairing.divisors[0])).map(|tu| (key.clone(), tu.clone()))
        })
        .unwrap();
    let mut bad = inst.alg.clone();
    let out = *inst.alg.ops[&key].entries[&tuple].keys().next().unwrap();
    bad.ops.get_mut(&key).unwrap().add_entry(tuple.clone(), out, &q(1));
    let r = check_divisor_property(&bad, &inst.pairing, 3, 3);
    assert!(r.loci().contains(&(key.0 - 1, key.1.clone())), "{r}");
}

#[test]
fn closed_form_matches_brute_force() {
    for seed in 0..4 {
        let inst = divisor_instance(seed, 6);
        let a = &inst.alg;
        let da = inst.pairing.divisors[0];
        let db = inst.pairing.divisors[1];
        let c = a.space.index_of("c").unwrap();
        let abc = a.space.index_of("abc").unwrap();
        let xa = t(1, qf(1, 4)).add(&t(-2, qf(1, 2)));
        let xb = t(3, qf(1, 4));
        let hc = t(1, qf(1, 2));
        let habc = NovikovScalar::monomial(q(2), qf(1, 2), -2);
        let b = BoundingData {
            divisor: [(da, DivisorCoeff::X(xa.clone())), (db, DivisorCoeff::X(xb.clone()))].into(),
            high: [(c, hc.clone()), (abc, habc.clone())].into(),
        };
        let mut vec_b = vec![NovikovScalar::zero(); a.dim()];
        vec_b[da] = xa;
        vec_b[db] = xb;
        vec_b[c] = hc;
        vec_b[abc] = habc;
        let oracle = brute_mc(a, &vec_b);
        assert!(oracle.iter().any(|x| !x.is_zero()));
        let closed = mc_value(a, &b, Some(&inst.pairing), &McOptions::default()).unwrap();
        assert_eq!(strip(&closed, &a.e_cut), strip(&oracle, &a.e_cut));
        // The direct sum without divisor data agrees too.
        let direct = mc_value(a, &b, None, &McOptions::default()).unwrap();
        assert_eq!(strip(&direct, &a.e_cut), strip(&oracle, &a.e_cut));
    }
}

#[test]
fn energy_shift_single_divisor() {
    let (a, e1, _) = torus_with_quantum_term();
    let beta0 = me(q(1), 0);
    let d = DivisorPairingData::from_generators(vec![e1], &a.monoid, &[(beta0.clone(), vec![1])].into(), &a.e_cut)
        .unwrap();
    assert_eq!(energy_shift(&a, &d, &[q(0)]).unwrap(), a);
    let s = energy_shift(&a, &d, &[qf(1, 2)]).unwrap();
    let moved = me(qf(3, 2), 0);
    assert_eq!(s.op(2, &moved), a.op(2, &beta0).map(|o| MultiOp { label: moved.clone(), ..o.clone() }).as_ref());
    assert!(s.op(2, &beta0).is_none());
    assert!(verify_ainf(&s, 4).is_ok());
    assert!(matches!(energy_shift(&a, &d, &[q(-1)]), Err(DeformError::ShiftedEnergy(..))));
}

#[test]
fn energy_shift_preserves_the_axioms() {
    for a in gapped(47, 4) {
        let dim = a.dim();
        let divisors: Vec<usize> = (0..dim).filter(|&i| a.space.deg(i) == 1).take(1).collect();
        if divisors.is_empty() {
            continue;
        }
        let gens: BTreeMap<MonoidElement, Vec<i64>> =
            a.monoid.generators().iter().enumerate().map(|(j, g)| (g.clone(), vec![1 - j as i64])).collect();
        let d = DivisorPairingData::from_generators(divisors, &a.monoid, &gens, &a.e_cut).unwrap();
        let s = energy_shift(&a, &d, &[qf(-1, 4)]).unwrap();
        assert!(s.e_cut < a.e_cut);
        assert!(verify_ainf(&s, 4).is_ok());
        assert!(verify_cyclic(&s, 4).is_ok());
        assert!(verify_unital(&s, 4).unwrap().is_ok());
    }
}

#[test]
fn shift_commutes_with_mc_value() {
    let opts = McOptions::default();
    for seed in 0..3 {
        let inst = divisor_instance(seed, 6);
        let a = &inst.alg;
        let (da, db) = (inst.pairing.divisors[0], inst.pairing.divisors[1]);
        let c = a.space.index_of("c").unwrap();
        let ya = NovikovScalar::from_q(q(2)).add(&t(1, qf(1, 2)));
        let yb = NovikovScalar::from_q(qf(-1, 3));
        let shift = [qf(-1, 4), qf(1, 8)];
        let high: BTreeMap<usize, NovikovScalar> = [(c, t(1, qf(1, 4)))].into();
        let b = BoundingData { divisor: [(da, DivisorCoeff::Y(ya.clone())), (db, DivisorCoeff::Y(yb.clone()))].into(), high: high.clone() };
        let moved = BoundingData {
            divisor: [
                (da, DivisorCoeff::Y(ya.shift_energy(&shift[0]))),
                (db, DivisorCoeff::Y(yb.shift_energy(&shift[1]))),
            ]
            .into(),
            high,
        };
        let sa = energy_shift(a, &inst.pairing, &shift).unwrap();
        let sd = inst.pairing.shift(&shift).unwrap();
        let lhs = mc_value(&sa, &b, Some(&sd), &opts).unwrap();
        let rhs = mc_value(a, &moved, Some(&inst.pairing), &opts).unwrap();
        assert_eq!(sa.e_cut, qf(3, 2));
        assert_eq!(lhs, rhs);
        assert!(lhs.iter().any(|x| !x.is_zero()));
    }
}

#[test]
fn region_guard() {
    let inst = divisor_instance(2, 6);
    let a = &inst.alg;
    let da = inst.pairing.divisors[0];
    let with_y = |y: NovikovScalar| BoundingData { divisor: [(da, DivisorCoeff::Y(y))].into(), high: BTreeMap::new() };
    let opts = McOptions::default();
    // delta defaults to half the smallest generator energy, here 1/2.
    for v in [qf(-3, 8), q(0), qf(1, 4), qf(7, 16)] {
        assert!(mc_value(a, &with_y(t(1, v.clone())), Some(&inst.pairing), &opts).is_ok(), "{v}");
    }
    for v in [qf(1, 2), qf(-1, 2), q(1)] {
        let r = mc_value(a, &with_y(t(1, v.clone())), Some(&inst.pairing), &opts);
        assert!(matches!(r, Err(DeformError::OutOfRegion(..))), "{v}: {r:?}");
    }
    let narrow = McOptions { delta: Some(qf(1, 8)), ..McOptions::default() };
    assert!(matches!(
        mc_value(a, &with_y(t(1, qf(1, 4))), Some(&inst.pairing), &narrow),
        Err(DeformError::OutOfRegion(..))
    ));
    // Zero valuation without divisor data diverges.
    let x0 = BoundingData { divisor: [(da, DivisorCoeff::X(NovikovScalar::from_q(q(1))))].into(), high: BTreeMap::new() };
    assert!(matches!(mc_value(a, &x0, None, &opts), Err(DeformError::Divergent(_))));
    // An algebra failing the divisor identity is refused.
    let mut bad = a.clone();
    let key = bad.ops.keys().find(|(k, b)| *k == 1 && !b.is_zero()).cloned().unwrap();
    let db = inst.pairing.divisors[1];
    let sd = bad.sdeg();
    let out = (0..bad.dim()).find(|&j| sd[j] == sd[db] + 1 - key.1.maslov).unwrap();
    bad.ops.get_mut(&key).unwrap().add_entry(vec![db], out, &q(1));
    assert!(matches!(mc_value(&bad, &with_y(t(1, q(0))), Some(&inst.pairing), &opts), Err(DeformError::DivisorProperty(_))));
    // deform_by_b refuses divisor parts.
    assert!(matches!(deform_by_b(a, &with_y(t(1, q(0)))), Err(DeformError::DivisorPart)));
}
