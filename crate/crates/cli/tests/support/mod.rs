#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use cainf::ainf::FilteredAinfAlgebra;
use cainf::deform::{BoundingData, DivisorCoeff};
use cainf::graded::{family_add, MultiOp, OpFamily, OpKind};
use cainf::isotopy::{extend_isotopy, PseudoIsotopy};
use cainf::model::{random_model, random_shape, torus, torus_algebra};
use cainf::novikov::{q, qf, DiscreteMonoid, MonoidElement, NovikovScalar, Q};
use cainf::random::{divisor_algebra, random_connection, random_gapped_algebra, GappedSpec};
use cainf_cli::doc::{AlgebraDoc, Document};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn me(e: Q, m: i64) -> MonoidElement {
    MonoidElement::new(e, m).unwrap()
}

pub fn labels(a: &FilteredAinfAlgebra) -> Vec<MonoidElement> {
    a.monoid.enumerate(&a.e_cut).into_iter().filter(|b| !b.is_zero()).collect()
}

/// A random model with an acyclic part, curved by `3·T·e` at the Maslov-2 label `(1, 2)`.
pub fn acyclic(seed: u64) -> FilteredAinfAlgebra {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = loop {
        let s = random_shape(&mut rng, 8);
        if !s.acyclic.is_empty() {
            break s;
        }
    };
    let beta = me(q(1), 2);
    let mut a = random_model(&mut rng, &shape).to_ainf(DiscreteMonoid::new(vec![beta.clone()]).unwrap(), q(3)).unwrap();
    let mut m0 = MultiOp::new(0, beta, OpKind::Structure);
    m0.add_entry(vec![], a.unit.unwrap(), &q(3));
    family_add(&mut a.ops, m0);
    a.validate().unwrap();
    a
}

pub fn gapped(rng: &mut ChaCha8Rng, rounds: usize) -> FilteredAinfAlgebra {
    random_gapped_algebra(rng, &GappedSpec { rounds, ..Default::default() }).unwrap()
}

/// A pseudo-isotopy ending at `a`, constant below the first level.
pub fn random_isotopy(rng: &mut ChaCha8Rng, a: &FilteredAinfAlgebra) -> PseudoIsotopy {
    let e0 = a.monoid.min_energy().unwrap();
    let base = PseudoIsotopy::constant(&a.truncate(&e0));
    let c = random_connection(rng, &base.m, &labels(a), 2, 0.5);
    extend_isotopy(&base, a, &c).unwrap()
}

pub fn isotopies(seed: u64, n: usize) -> Vec<PseudoIsotopy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let a = gapped(&mut rng, 1);
            random_isotopy(&mut rng, &a)
        })
        .collect()
}

/// The torus over the monoid `{(1, 0)}` with `m_{2,(1,0)}(e1, e1) = vol`.
pub fn quantum_torus() -> FilteredAinfAlgebra {
    let beta = me(q(1), 0);
    let mut a = torus().to_ainf(DiscreteMonoid::new(vec![beta.clone()]).unwrap(), q(3)).unwrap();
    let e1 = a.space.index_of("e1").unwrap();
    let vol = a.space.index_of("vol").unwrap();
    let mut m = MultiOp::new(2, beta, OpKind::Structure);
    m.add_entry(vec![e1, e1], vol, &q(1));
    family_add(&mut a.ops, m);
    a.validate().unwrap();
    a
}

pub fn monomial(c: i64, lambda: Q, mu: i64) -> NovikovScalar {
    NovikovScalar::monomial(q(c), lambda, mu)
}

/// The divisor instance, complete up to arity 6, with `y_a = 2 + T^{1/2}`, `y_b = -1/3` and `T^{1/4} c`.
pub fn divisor_doc(seed: u64) -> AlgebraDoc {
    let (alg, pairing) = divisor_algebra(&mut ChaCha8Rng::seed_from_u64(seed), 6);
    let (da, db) = (pairing.divisors[0], pairing.divisors[1]);
    let c = alg.space.index_of("c").unwrap();
    let ya = NovikovScalar::from_q(q(2)).add(&monomial(1, qf(1, 2), 0));
    let bounding = BoundingData {
        divisor: [(da, DivisorCoeff::Y(ya)), (db, DivisorCoeff::Y(NovikovScalar::from_q(qf(-1, 3))))].into(),
        high: [(c, monomial(1, qf(1, 4), 0))].into(),
    };
    AlgebraDoc { algebra: alg, divisor: Some(pairing), bounding: Some(bounding) }
}

/// Named fixture documents, also checked in under `tests/fixtures`.
pub fn fixtures() -> Vec<(&'static str, Document)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = gapped(&mut rng, 1);
    let iso = random_isotopy(&mut rng, &g);
    let qt = quantum_torus();
    let e1 = qt.space.index_of("e1").unwrap();
    let bounded =
        AlgebraDoc { algebra: qt, divisor: None, bounding: Some(BoundingData::high(BTreeMap::from([(e1, monomial(1, qf(1, 2), 0))]))) };
    vec![
        ("torus.json", Document::Algebra(AlgebraDoc::plain(torus_algebra()))),
        ("acyclic.json", Document::Algebra(AlgebraDoc::plain(acyclic(3)))),
        ("gapped.json", Document::Algebra(AlgebraDoc::plain(g.clone()))),
        ("const.iso.json", Document::Isotopy(PseudoIsotopy::constant(&g))),
        ("gapped.iso.json", Document::Isotopy(iso)),
        ("quantum_torus.json", Document::Algebra(bounded)),
    ]
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary with `CAINF_THREADS` set to `threads` when given.
pub fn cainf(args: &[&str], stdin: Option<&str>, threads: Option<usize>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cainf"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    match threads {
        Some(n) => cmd.env(cainf::THREADS_ENV, n.to_string()),
        None => cmd.env_remove(cainf::THREADS_ENV),
    };
    let mut child = cmd.spawn().expect("spawn cainf");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            pipe.write_all(s.as_bytes()).unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn nonzero(f: &OpFamily<Q>) -> OpFamily<Q> {
    f.iter().filter(|(_, o)| !o.is_zero()).map(|(k, o)| (k.clone(), o.clone())).collect()
}
