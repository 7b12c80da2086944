use cainf::graded::{koszul_sign, SignRule};
use cainf::novikov::{fmt_q, parse_q, q, DiscreteMonoid, MonoidElement, NovikovScalar, Term, Q};
use cainf::poly::{PiecewisePoly, UPoly};
use cainf::trees::{enumerate_trees, order_polytope_volume, tree_partial_order};
use proptest::prelude::*;

fn rational() -> impl Strategy<Value = Q> {
    (-20i64..=20, 1i64..=6).prop_map(|(n, d)| Q::new(n.into(), d.into()))
}

fn energy() -> impl Strategy<Value = Q> {
    (0i64..=12, 1i64..=4).prop_map(|(n, d)| Q::new(n.into(), d.into()))
}

fn scalar() -> impl Strategy<Value = NovikovScalar> {
    prop::collection::vec((energy(), -2i64..=2, rational()), 0..5).prop_map(|ts| {
        NovikovScalar::from_terms(ts.into_iter().map(|(lambda, h, coef)| Term { lambda, mu: 2 * h, coef }).collect(), None)
    })
}

/// Scalars of positive valuation and Maslov index 0.
fn small() -> impl Strategy<Value = NovikovScalar> {
    prop::collection::vec((1i64..=8, rational()), 0..4).prop_map(|ts| {
        NovikovScalar::from_terms(ts.into_iter().map(|(n, coef)| Term { lambda: Q::new(n.into(), 4.into()), mu: 0, coef }).collect(), None)
    })
}

fn upoly() -> impl Strategy<Value = UPoly> {
    prop::collection::vec(rational(), 0..5).prop_map(UPoly::new)
}

proptest! {
    #[test]
    fn rationals_print_and_parse(x in rational()) {
        prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
    }

    #[test]
    fn scalars_print_and_parse(x in scalar(), p in proptest::option::of(energy())) {
        let x = match p { Some(p) => x.truncate(&p), None => x };
        prop_assert_eq!(x.to_string().parse::<NovikovScalar>().unwrap(), x);
    }

    #[test]
    fn ring_axioms(a in scalar(), b in scalar(), c in scalar()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert!(a.sub(&a).is_zero());
    }

    #[test]
    fn valuation_is_superadditive(a in scalar(), b in scalar()) {
        if let (Some(va), Some(vb)) = (a.valuation(), b.valuation()) {
            let vab = a.mul(&b).valuation();
            prop_assert!(vab.is_none_or(|v| v >= &va + &vb));
        }
    }

    #[test]
    fn inverse_inverts(a in scalar(), cap in 1i64..=4) {
        let cap = q(cap);
        let lead = a.valuation();
        let single_lead = a.terms().iter().filter(|t| Some(&t.lambda) == lead.as_ref()).count() == 1;
        match a.inverse(&cap) {
            Ok(inv) => prop_assert_eq!(a.mul(&inv).truncate(&cap), NovikovScalar::one().truncate(&cap)),
            Err(_) => prop_assert!(a.is_zero() || !single_lead),
        }
    }

    #[test]
    fn exp_is_a_homomorphism(x in small(), y in small()) {
        let cap = q(3);
        let lhs = x.add(&y).exp(&cap).unwrap();
        let rhs = x.exp(&cap).unwrap().mul(&y.exp(&cap).unwrap()).truncate(&cap);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn calculus(p in upoly(), a in rational(), b in rational()) {
        prop_assert_eq!(p.antiderivative().derivative(), p.clone());
        let pp = PiecewisePoly::poly(p.clone());
        let big = pp.antiderivative_from(&a);
        prop_assert_eq!(big.eval(&b) - big.eval(&a), pp.integrate(&a, &b));
        let mid = (&a + &b) / q(2);
        prop_assert_eq!(pp.integrate(&a, &mid) + pp.integrate(&mid, &b), pp.integrate(&a, &b));
    }

    #[test]
    fn full_turn_of_rotations_is_even(degs in prop::collection::vec(-2i64..=3, 1..6)) {
        // A full turn of cyclic rotations has total sign 1.
        let mut d = degs.clone();
        let mut total = 1;
        for _ in 0..d.len() {
            total *= koszul_sign(&d, SignRule::CyclicRotation).unwrap();
            d.rotate_left(1);
        }
        prop_assert_eq!(total, 1);
    }

    #[test]
    fn polytope_volume_counts_linear_extensions(e in 0i64..=3, k in 0usize..=3) {
        let g = DiscreteMonoid::new(vec![MonoidElement::new(q(1), 0).unwrap()]).unwrap();
        for t in enumerate_trees(k, &MonoidElement::new(q(e), 0).unwrap(), &g).unwrap() {
            let o = tree_partial_order(&t);
            let n = o.len();
            let fact: Q = (1..=n).map(|i| q(i as i64)).product();
            prop_assert_eq!(order_polytope_volume(&o) * fact, Q::from_integer((o.linear_extensions() as i64).into()));
        }
    }
}
