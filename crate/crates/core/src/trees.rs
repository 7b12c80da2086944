//! Rooted planar trees with monoid-labelled interior vertices, their partial order and
//! order-polytope volumes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::novikov::{factorial, parse_q, DiscreteMonoid, MonoidElement, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("label {0} is not in the monoid")]
    NotInMonoid(MonoidElement),
    #[error("cannot parse tree encoding `{0}`")]
    Parse(String),
    #[error("invalid flag: {0}")]
    InvalidFlag(String),
    #[error("unstable vertex: label (0,0) with {0} children")]
    Unstable(usize),
}

/// A subtree hanging below an edge: either a bare edge ending in a leaf or an interior vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    Leaf,
    Node { label: MonoidElement, children: Vec<Tree> },
}

impl Tree {
    pub fn node(label: MonoidElement, children: Vec<Tree>) -> Self {
        Tree::Node { label, children }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Tree::Leaf => 1,
            Tree::Node { children, .. } => children.iter().map(|c| c.leaves()).sum(),
        }
    }

    pub fn interior_count(&self) -> usize {
        match self {
            Tree::Leaf => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(|c| c.interior_count()).sum::<usize>(),
        }
    }

    pub fn label_sum(&self) -> MonoidElement {
        match self {
            Tree::Leaf => MonoidElement::zero(),
            Tree::Node { label, children } => {
                children.iter().fold(label.clone(), |acc, c| acc.add(&c.label_sum()))
            }
        }
    }

    pub fn is_stable(&self) -> bool {
        match self {
            Tree::Leaf => true,
            Tree::Node { label, children } => {
                (!label.is_zero() || children.len() >= 2) && children.iter().all(|c| c.is_stable())
            }
        }
    }

    /// Interior vertices in preorder as `(label, parent preorder index)`.
    pub fn interior_vertices(&self) -> Vec<(MonoidElement, Option<usize>)> {
        fn go(t: &Tree, parent: Option<usize>, out: &mut Vec<(MonoidElement, Option<usize>)>) {
            if let Tree::Node { label, children } = t {
                let me = out.len();
                out.push((label.clone(), parent));
                for c in children {
                    go(c, Some(me), out);
                }
            }
        }
        let mut out = Vec::new();
        go(self, None, &mut out);
        out
    }

    fn encode(&self, out: &mut String) {
        match self {
            Tree::Leaf => out.push('x'),
            Tree::Node { label, children } => {
                out.push('[');
                out.push_str(&crate::novikov::fmt_q(&label.energy));
                out.push(',');
                out.push_str(&label.maslov.to_string());
                out.push('|');
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    c.encode(out);
                }
                out.push(']');
            }
        }
    }
}

/// A tree of `Gr(beta, k)`: the root exterior vertex is implicit above `top`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RibbonTree {
    pub top: Tree,
}

impl RibbonTree {
    pub fn new(top: Tree) -> Result<Self, TreeError> {
        fn check(t: &Tree) -> Result<(), TreeError> {
            if let Tree::Node { label, children } = t {
                if label.is_zero() && children.len() < 2 {
                    return Err(TreeError::Unstable(children.len()));
                }
                for c in children {
                    check(c)?;
                }
            }
            Ok(())
        }
        check(&top)?;
        Ok(RibbonTree { top })
    }

    pub fn bare() -> Self {
        RibbonTree { top: Tree::Leaf }
    }

    /// Number of non-root exterior vertices.
    pub fn k(&self) -> usize {
        self.top.leaves()
    }

    pub fn beta(&self) -> MonoidElement {
        self.top.label_sum()
    }

    pub fn interior_count(&self) -> usize {
        self.top.interior_count()
    }

    /// Canonical root-first preorder encoding, e.g. `[0,0|x x]`.
    pub fn encoding(&self) -> String {
        let mut s = String::new();
        self.top.encode(&mut s);
        s
    }
}

impl fmt::Display for RibbonTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoding())
    }
}

impl FromStr for RibbonTree {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, TreeError> {
        let err = || TreeError::Parse(s.to_string());
        let bytes: Vec<char> = s.trim().chars().collect();
        fn parse(b: &[char], pos: &mut usize, src: &str) -> Result<Tree, TreeError> {
            let err = || TreeError::Parse(src.to_string());
            match b.get(*pos) {
                Some('x') => {
                    *pos += 1;
                    Ok(Tree::Leaf)
                }
                Some('[') => {
                    *pos += 1;
                    let start = *pos;
                    while b.get(*pos).is_some_and(|c| *c != '|') {
                        *pos += 1;
                    }
                    let head: String = b.get(start..*pos).ok_or_else(err)?.iter().collect();
                    *pos += 1;
                    let (e, m) = head.split_once(',').ok_or_else(err)?;
                    let energy = parse_q(e.trim()).map_err(|_| err())?;
                    let maslov: i64 = m.trim().parse().map_err(|_| err())?;
                    let label = MonoidElement::new(energy, maslov).map_err(|_| err())?;
                    let mut children = Vec::new();
                    loop {
                        match b.get(*pos) {
                            Some(']') => {
                                *pos += 1;
                                break;
                            }
                            Some(' ') => *pos += 1,
                            Some(_) => children.push(parse(b, pos, src)?),
                            None => return Err(err()),
                        }
                    }
                    Ok(Tree::Node { label, children })
                }
                _ => Err(err()),
            }
        }
        let mut pos = 0;
        let t = parse(&bytes, &mut pos, s)?;
        if pos != bytes.len() {
            return Err(err());
        }
        RibbonTree::new(t)
    }
}

/// Enumerates `Gr(beta, k)` with memoization over `(beta, k)`.
pub struct TreeEnumerator {
    levels: Vec<MonoidElement>,
    memo: HashMap<(MonoidElement, usize), Vec<Tree>>,
    seq_memo: HashMap<(MonoidElement, usize), Vec<Vec<Tree>>>,
}

impl TreeEnumerator {
    /// `levels` must contain every monoid element up to the largest label queried.
    pub fn new(monoid: &DiscreteMonoid, e_max: &Q) -> Self {
        let levels = monoid.enumerate(&(e_max + Q::from_integer(1.into())));
        TreeEnumerator { levels, memo: HashMap::new(), seq_memo: HashMap::new() }
    }

    fn below(&self, beta: &MonoidElement) -> Vec<MonoidElement> {
        self.levels.iter().filter(|b| b.energy <= beta.energy).cloned().collect()
    }

    fn is_level(&self, beta: &MonoidElement) -> bool {
        self.levels.contains(beta)
    }

    /// Subtrees (leaf or interior-rooted) with `k` leaves and label sum `beta`.
    pub fn subtrees(&mut self, beta: &MonoidElement, k: usize) -> Vec<Tree> {
        if let Some(v) = self.memo.get(&(beta.clone(), k)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if beta.is_zero() && k == 1 {
            out.push(Tree::Leaf);
        }
        for b0 in self.below(beta) {
            let Some(rest) = beta.sub(&b0) else { continue };
            if !self.is_level(&rest) {
                continue;
            }
            if b0.is_zero() {
                for seq in self.long_sequences(beta, k) {
                    out.push(Tree::node(b0.clone(), seq));
                }
            } else {
                for seq in self.sequences(&rest, k) {
                    out.push(Tree::node(b0.clone(), seq));
                }
            }
        }
        self.memo.insert((beta.clone(), k), out.clone());
        out
    }

    /// Sequences of length at least two; the first part never takes everything, which keeps
    /// the recursion well founded.
    fn long_sequences(&mut self, beta: &MonoidElement, k: usize) -> Vec<Vec<Tree>> {
        let mut out = Vec::new();
        for b1 in self.below(beta) {
            let Some(rest) = beta.sub(&b1) else { continue };
            if !self.is_level(&rest) {
                continue;
            }
            for k1 in 0..=k {
                if (b1.is_zero() && k1 == 0) || (rest.is_zero() && k1 == k) {
                    continue;
                }
                let firsts = self.subtrees(&b1, k1);
                if firsts.is_empty() {
                    continue;
                }
                let tails = self.sequences(&rest, k - k1);
                for f in &firsts {
                    for t in &tails {
                        let mut s = Vec::with_capacity(t.len() + 1);
                        s.push(f.clone());
                        s.extend(t.iter().cloned());
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    /// Ordered lists of subtrees with total leaves `k` and total label `beta`.
    fn sequences(&mut self, beta: &MonoidElement, k: usize) -> Vec<Vec<Tree>> {
        if let Some(v) = self.seq_memo.get(&(beta.clone(), k)) {
            return v.clone();
        }
        let mut out = Vec::new();
        if beta.is_zero() && k == 0 {
            out.push(Vec::new());
        }
        for b1 in self.below(beta) {
            let Some(rest) = beta.sub(&b1) else { continue };
            if !self.is_level(&rest) {
                continue;
            }
            for k1 in 0..=k {
                if b1.is_zero() && k1 == 0 {
                    continue;
                }
                let firsts = self.subtrees(&b1, k1);
                if firsts.is_empty() {
                    continue;
                }
                let tails = self.sequences(&rest, k - k1);
                for f in &firsts {
                    for t in &tails {
                        let mut s = Vec::with_capacity(t.len() + 1);
                        s.push(f.clone());
                        s.extend(t.iter().cloned());
                        out.push(s);
                    }
                }
            }
        }
        self.seq_memo.insert((beta.clone(), k), out.clone());
        out
    }
}

/// All trees of `Gr(beta, k)` in deterministic order.
pub fn enumerate_trees(k: usize, beta: &MonoidElement, monoid: &DiscreteMonoid) -> Result<Vec<RibbonTree>, TreeError> {
    if !monoid.contains(beta) {
        return Err(TreeError::NotInMonoid(beta.clone()));
    }
    let mut en = TreeEnumerator::new(monoid, &beta.energy);
    Ok(en.subtrees(beta, k).into_iter().map(|top| RibbonTree { top }).collect())
}

/// The partial order `v < v'` iff `v'` lies on the path from `v` to the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeOrder {
    pub parent: Vec<Option<usize>>,
}

impl TreeOrder {
    pub fn from_parents(parent: Vec<Option<usize>>) -> Self {
        TreeOrder { parent }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// `v <= w` in the tree order.
    pub fn le(&self, v: usize, w: usize) -> bool {
        let mut cur = Some(v);
        while let Some(c) = cur {
            if c == w {
                return true;
            }
            cur = self.parent[c];
        }
        false
    }

    pub fn maxima(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.parent[v].is_none()).collect()
    }

    /// Number of orderings `sigma` of the vertices with `v < w => sigma(v) before sigma(w)`.
    pub fn linear_extensions(&self) -> u128 {
        let n = self.len();
        assert!(n <= 24, "too many vertices for exact linear-extension counting");
        // below[w] = bitmask of strict predecessors of w
        let below: Vec<u32> = (0..n)
            .map(|w| (0..n).filter(|&v| v != w && self.le(v, w)).fold(0u32, |m, v| m | (1 << v)))
            .collect();
        let mut dp = vec![0u128; 1 << n];
        dp[0] = 1;
        for mask in 0..(1usize << n) {
            let c = dp[mask];
            if c == 0 {
                continue;
            }
            for w in 0..n {
                if mask & (1 << w) == 0 && (below[w] as usize) & !mask == 0 {
                    dp[mask | (1 << w)] += c;
                }
            }
        }
        dp[(1 << n) - 1]
    }
}

pub fn tree_partial_order(t: &RibbonTree) -> TreeOrder {
    TreeOrder { parent: t.top.interior_vertices().into_iter().map(|(_, p)| p).collect() }
}

/// Volume of the order polytope `{tau in [0,1]^n : v < w => tau(v) <= tau(w)}`.
pub fn order_polytope_volume(o: &TreeOrder) -> Q {
    Q::from_integer(o.linear_extensions().into()) / factorial(o.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::novikov::{q, qf};

    fn me(e: i64, m: i64) -> MonoidElement {
        MonoidElement::new(q(e), m).unwrap()
    }

    #[test]
    fn small_counts() {
        let g = DiscreteMonoid::new(vec![me(1, 0)]).unwrap();
        let z = MonoidElement::zero();
        assert_eq!(enumerate_trees(1, &z, &g).unwrap(), vec![RibbonTree::bare()]);
        let t2 = enumerate_trees(2, &z, &g).unwrap();
        assert_eq!(t2.len(), 1);
        assert_eq!(t2[0].encoding(), "[0,0|x x]");
        // associahedron vertices: Catalan numbers count binary trees, all planar trees counted by
        // little Schroeder numbers
        assert_eq!(enumerate_trees(3, &z, &g).unwrap().len(), 3);
        assert_eq!(enumerate_trees(4, &z, &g).unwrap().len(), 11);
        assert!(enumerate_trees(2, &me(2, 2), &g).is_err());
    }

    #[test]
    fn encoding_roundtrip() {
        let g = DiscreteMonoid::new(vec![me(1, 0), MonoidElement::new(qf(3, 2), 2).unwrap()]).unwrap();
        let b = MonoidElement::new(qf(5, 2), 2).unwrap();
        for k in 0..3 {
            for t in enumerate_trees(k, &b, &g).unwrap() {
                let s = t.encoding();
                assert_eq!(s.parse::<RibbonTree>().unwrap(), t);
                assert_eq!(t.k(), k);
                assert_eq!(t.beta(), b);
            }
        }
    }

    #[test]
    fn volumes() {
        let chain = TreeOrder::from_parents(vec![None, Some(0), Some(1)]);
        assert_eq!(order_polytope_volume(&chain), qf(1, 6));
        let v = TreeOrder::from_parents(vec![None, Some(0), Some(0)]);
        assert_eq!(order_polytope_volume(&v), qf(1, 3));
        let anti = TreeOrder::from_parents(vec![None, None, None]);
        assert_eq!(order_polytope_volume(&anti), q(1));
    }
}
