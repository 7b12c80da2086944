use cainf::ainf::{verify_ainf, verify_cyclic, verify_cyclic_morphism, verify_morphism, verify_unital, FilteredAinfAlgebra};
use cainf::graded::{family_add, MultiOp, OpKind};
use cainf::model::{heisenberg, random_basis_change, random_model, random_shape, torus_algebra};
use cainf::novikov::{q, DiscreteMonoid, MonoidElement};
use cainf::transfer::{build_hodge_for, check_hodge, transfer_canonical};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn curved(mut a: FilteredAinfAlgebra, lambda: i64) -> FilteredAinfAlgebra {
    let beta = MonoidElement::new(q(1), 2).unwrap();
    a.monoid = DiscreteMonoid::new(vec![beta.clone()]).unwrap();
    a.e_cut = q(3);
    let mut m0 = MultiOp::new(0, beta, OpKind::Structure);
    m0.add_entry(vec![], a.unit.unwrap(), &q(lambda));
    family_add(&mut a.ops, m0);
    a.validate().unwrap();
    a
}

fn check_all(a: &FilteredAinfAlgebra, k_max: usize) {
    let h = build_hodge_for(a).unwrap();
    let r = check_hodge(&a.space, &a.pairing, &a.m1(), &h);
    assert!(r.is_ok(), "{r}");
    let can = transfer_canonical(a, &h, k_max);
    let r = verify_ainf(&can.algebra, k_max);
    assert!(r.is_ok(), "ainf\n{r}");
    let r = verify_cyclic(&can.algebra, k_max);
    assert!(r.is_ok(), "cyclic\n{r}");
    let r = verify_unital(&can.algebra, k_max).unwrap();
    assert!(r.is_ok(), "unital\n{r}");
    let r = verify_morphism(&can.morphism, k_max).unwrap();
    assert!(r.is_ok(), "morphism\n{r}");
    let r = verify_cyclic_morphism(&can.morphism, k_max).unwrap();
    assert!(r.is_ok(), "cyclic morphism\n{r}");
    assert!(can.algebra.m1().is_zero());
}

#[test]
fn torus_transfer() {
    check_all(&torus_algebra(), 4);
    check_all(&curved(torus_algebra(), 3), 3);
}

#[test]
fn random_model_transfer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..12 {
        let shape = random_shape(&mut rng, 8);
        let m = random_model(&mut rng, &shape);
        let a = m.to_ainf(DiscreteMonoid::trivial(), q(1)).unwrap();
        check_all(&a, 4);
        if i % 3 == 0 {
            check_all(&curved(a, 2), 3);
        }
    }
}

#[test]
fn random_models_exercise_homotopy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut nontrivial = 0;
    let mut higher = 0;
    for _ in 0..12 {
        let shape = random_shape(&mut rng, 8);
        let a = random_model(&mut rng, &shape).to_ainf(DiscreteMonoid::trivial(), q(1)).unwrap();
        let h = build_hodge_for(&a).unwrap();
        if !h.g.is_zero() {
            nontrivial += 1;
        }
        let can = transfer_canonical(&a, &h, 4);
        if can.algebra.ops.keys().any(|(k, _)| *k >= 3) {
            higher += 1;
        }
    }
    eprintln!("nontrivial G: {nontrivial}, higher products: {higher}");
    assert!(nontrivial > 0);
}

#[test]
fn heisenberg_transfer_has_massey_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = heisenberg();
    for i in 0..3 {
        let m = if i == 0 { base.clone() } else { base.change_basis(&random_basis_change(&mut rng, &base)) };
        let a = m.to_ainf(DiscreteMonoid::trivial(), q(1)).unwrap();
        check_all(&a, 4);
        check_all(&curved(a.clone(), 1), 3);
        let h = build_hodge_for(&a).unwrap();
        let can = transfer_canonical(&a, &h, 4);
        assert_eq!(can.algebra.dim(), 6);
        assert!(can.algebra.op(3, &MonoidElement::zero()).is_some_and(|o| !o.is_zero()));
    }
}
