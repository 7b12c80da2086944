use cainf::isotopy::order_polytope_integral;
use cainf::model::rand_q;
use cainf::novikov::{factorial, q, DiscreteMonoid, MonoidElement, Q};
use cainf::poly::UPoly;
use cainf::trees::{enumerate_trees, order_polytope_volume, tree_partial_order, RibbonTree, Tree};
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum over orderings compatible with "child before parent" of the iterated integral over
/// `τ0 ≤ τ_{σ(1)} ≤ ... ≤ τ_{σ(n)} ≤ τ1`.
fn simplex_sum(parents: &[Option<usize>], ps: &[UPoly], tau0: &Q, tau1: &Q) -> Q {
    let n = parents.len();
    let mut total = q(0);
    for perm in (0..n).permutations(n) {
        let pos: Vec<usize> = (0..n).map(|v| perm.iter().position(|&w| w == v).unwrap()).collect();
        if (0..n).any(|v| parents[v].is_some_and(|p| pos[v] > pos[p])) {
            continue;
        }
        let mut g = UPoly::constant(q(1));
        for &v in &perm {
            let h = g.mul(&ps[v]).antiderivative();
            g = h.sub(&UPoly::constant(h.eval(tau0)));
        }
        total += g.eval(tau1);
    }
    total
}

fn random_poly(rng: &mut ChaCha8Rng) -> UPoly {
    let deg = rng.gen_range(0..=3);
    UPoly::new((0..=deg).map(|_| rand_q(rng, 3)).collect())
}

#[test]
fn recursive_integration_matches_linear_extensions() {
    let g = DiscreteMonoid::new(vec![MonoidElement::new(q(1), 0).unwrap()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut trees: Vec<RibbonTree> = Vec::new();
    for e in 0..=4 {
        for k in 0..=4 {
            let beta = MonoidElement::new(q(e), 0).unwrap();
            trees.extend(enumerate_trees(k, &beta, &g).unwrap().into_iter().filter(|t| t.interior_count() <= 4));
        }
    }
    let mut by_size = [0usize; 5];
    for t in &trees {
        if by_size[t.interior_count()] == 60 {
            continue;
        }
        by_size[t.interior_count()] += 1;
        let parents = tree_partial_order(t).parent;
        let ps: Vec<UPoly> = (0..parents.len()).map(|_| random_poly(&mut rng)).collect();
        let a = Q::new(rng.gen_range(0..4).into(), 4.into());
        let b = &a + Q::new(rng.gen_range(0..4).into(), 4.into());
        assert_eq!(order_polytope_integral(t, &ps, &a, &b), simplex_sum(&parents, &ps, &a, &b), "{}", t.encoding());
    }
    assert!(by_size[1..].iter().all(|&c| c > 0), "{by_size:?}");
}

#[test]
fn chain_volumes_are_inverse_factorials() {
    let b = MonoidElement::new(q(1), 0).unwrap();
    let mut t = Tree::Leaf;
    for n in 1..=6 {
        t = Tree::node(b.clone(), vec![t]);
        let rt = RibbonTree::new(t.clone()).unwrap();
        let ones = vec![UPoly::constant(q(1)); n];
        let expected = q(1) / factorial(n);
        assert_eq!(order_polytope_integral(&rt, &ones, &q(0), &q(1)), expected);
        assert_eq!(order_polytope_volume(&tree_partial_order(&rt)), expected);
    }
}
