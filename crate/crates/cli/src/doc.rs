//! JSON documents: a versioned header, sorted keys, rationals as `"p/q"` strings and basis
//! elements referred to by name.

use std::collections::BTreeMap;
use std::fmt;

use cainf::ainf::{AinfMorphism, FilteredAinfAlgebra};
use cainf::deform::{BoundingData, DivisorCoeff, DivisorPairingData};
use cainf::graded::{family_add, Coeff, GradedSpace, MultiOp, OpFamily, OpKind, Pairing};
use cainf::isotopy::{PseudoIsotopy, PseudoIsotopy2};
use cainf::linalg::Mat;
use cainf::novikov::{fmt_q, parse_q, DiscreteMonoid, MonoidElement, NovikovScalar, Term, Q};
use cainf::poly::{BPoly, PiecewiseBPoly, PiecewisePoly, UPoly};
use serde_json::{Map, Value};

pub const FORMAT: &str = "cainf";
pub const VERSION: u64 = 1;

/// A parse failure with the offending field and, when known, its line in the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for DocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if !self.field.is_empty() {
            write!(f, "field `{}`: ", self.field)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for DocError {}

#[derive(Clone, Debug, PartialEq)]
enum Seg {
    Key(String),
    Index(usize),
}

fn render_path(path: &[Seg]) -> String {
    let mut s = String::new();
    for seg in path {
        match seg {
            Seg::Key(k) => {
                if !s.is_empty() {
                    s.push('.');
                }
                s.push_str(k);
            }
            Seg::Index(i) => s.push_str(&format!("[{i}]")),
        }
    }
    s
}

/// An algebra with its optional deformation blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraDoc {
    pub algebra: FilteredAinfAlgebra,
    pub divisor: Option<DivisorPairingData>,
    pub bounding: Option<BoundingData>,
}

impl AlgebraDoc {
    pub fn plain(algebra: FilteredAinfAlgebra) -> Self {
        AlgebraDoc { algebra, divisor: None, bounding: None }
    }
}

/// One enumerated ribbon tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeEntry {
    pub encoding: String,
    pub interior: usize,
    pub volume: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreesDoc {
    pub monoid: DiscreteMonoid,
    pub k: usize,
    pub beta: MonoidElement,
    pub trees: Vec<TreeEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Document {
    Algebra(AlgebraDoc),
    Isotopy(PseudoIsotopy),
    Isotopy2(PseudoIsotopy2),
    Morphism(AinfMorphism),
    Trees(TreesDoc),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Algebra(_) => "algebra",
            Document::Isotopy(_) => "isotopy",
            Document::Isotopy2(_) => "isotopy2",
            Document::Morphism(_) => "morphism",
            Document::Trees(_) => "trees",
        }
    }
}

// ---------------------------------------------------------------------------------------
// Reading

/// A position inside the parsed JSON value.
#[derive(Clone)]
struct At<'a> {
    v: &'a Value,
    path: Vec<Seg>,
}

type R<T> = Result<T, DocError>;

impl<'a> At<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> R<T> {
        Err(DocError { line: None, column: None, field: render_path(&self.path), message: msg.into() })
    }

    fn obj(&self) -> R<&'a Map<String, Value>> {
        match self.v.as_object() {
            Some(m) => Ok(m),
            None => self.err("expected an object"),
        }
    }

    fn opt(&self, key: &str) -> R<Option<At<'a>>> {
        Ok(self.obj()?.get(key).filter(|v| !v.is_null()).map(|v| {
            let mut path = self.path.clone();
            path.push(Seg::Key(key.to_string()));
            At { v, path }
        }))
    }

    fn key(&self, key: &str) -> R<At<'a>> {
        match self.opt(key)? {
            Some(a) => Ok(a),
            None => self.err(format!("missing field `{key}`")),
        }
    }

    fn items(&self) -> R<Vec<At<'a>>> {
        match self.v.as_array() {
            Some(a) => Ok(a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut path = self.path.clone();
                    path.push(Seg::Index(i));
                    At { v, path }
                })
                .collect()),
            None => self.err("expected an array"),
        }
    }

    fn entries(&self) -> R<Vec<(String, At<'a>)>> {
        Ok(self
            .obj()?
            .iter()
            .map(|(k, v)| {
                let mut path = self.path.clone();
                path.push(Seg::Key(k.clone()));
                (k.clone(), At { v, path })
            })
            .collect())
    }

    fn str(&self) -> R<&'a str> {
        match self.v.as_str() {
            Some(s) => Ok(s),
            None => self.err("expected a string"),
        }
    }

    fn int(&self) -> R<i64> {
        match self.v.as_i64() {
            Some(s) => Ok(s),
            None => self.err("expected an integer"),
        }
    }

    fn usize(&self) -> R<usize> {
        match self.v.as_u64() {
            Some(s) => Ok(s as usize),
            None => self.err("expected a nonnegative integer"),
        }
    }

    fn q(&self) -> R<Q> {
        match self.v {
            Value::String(s) => parse_q(s).or_else(|e| self.err(e.to_string())),
            Value::Number(n) => match n.as_i64() {
                Some(i) => Ok(Q::from_integer(i.into())),
                None => self.err("non-integer numbers must be written as \"p/q\" strings"),
            },
            _ => self.err("expected a rational \"p/q\""),
        }
    }
}

/// Coefficients that can be written into and read from documents.
trait DocCoeff: Coeff {
    fn encode(&self) -> Value;
    fn decode_at(at: &At<'_>) -> R<Self>;
}

impl DocCoeff for Q {
    fn encode(&self) -> Value {
        Value::String(fmt_q(self))
    }

    fn decode_at(at: &At<'_>) -> R<Self> {
        at.q()
    }
}

fn encode_upoly(p: &UPoly) -> Value {
    Value::Array(p.coeffs().iter().map(|c| c.encode()).collect())
}

fn decode_upoly(at: &At<'_>) -> R<UPoly> {
    Ok(UPoly::new(at.items()?.iter().map(|c| c.q()).collect::<R<_>>()?))
}

fn decode_breaks(at: &At<'_>) -> R<Vec<Q>> {
    at.items()?.iter().map(|c| c.q()).collect()
}

impl DocCoeff for PiecewisePoly {
    fn encode(&self) -> Value {
        if self.pieces().len() == 1 {
            return encode_upoly(&self.pieces()[0]);
        }
        let mut m = Map::new();
        m.insert("breaks".into(), Value::Array(self.breaks().iter().map(|b| b.encode()).collect()));
        m.insert("pieces".into(), Value::Array(self.pieces().iter().map(encode_upoly).collect()));
        Value::Object(m)
    }

    fn decode_at(at: &At<'_>) -> R<Self> {
        match at.v {
            Value::String(_) | Value::Number(_) => Ok(PiecewisePoly::constant(at.q()?)),
            Value::Array(_) => Ok(PiecewisePoly::poly(decode_upoly(at)?)),
            _ => {
                let breaks = decode_breaks(&at.key("breaks")?)?;
                let pieces = at.key("pieces")?.items()?.iter().map(decode_upoly).collect::<R<_>>()?;
                PiecewisePoly::new(breaks, pieces).or_else(|e| at.err(e.to_string()))
            }
        }
    }
}

fn encode_bpoly(p: &BPoly) -> Value {
    Value::Array(
        p.terms()
            .iter()
            .map(|((i, j), c)| Value::Array(vec![Value::from(*i), Value::from(*j), c.encode()]))
            .collect(),
    )
}

fn decode_bpoly(at: &At<'_>) -> R<BPoly> {
    let mut terms: BTreeMap<(u32, u32), Q> = BTreeMap::new();
    for t in at.items()? {
        let parts = t.items()?;
        if parts.len() != 3 {
            return t.err("a term is [t-exponent, s-exponent, coefficient]");
        }
        let key = (parts[0].usize()? as u32, parts[1].usize()? as u32);
        let e = terms.entry(key).or_insert_with(|| Q::from_integer(0.into()));
        *e += parts[2].q()?;
    }
    terms.retain(|_, c| !Coeff::is_zero(c));
    Ok(BPoly::from_terms(terms))
}

impl DocCoeff for PiecewiseBPoly {
    fn encode(&self) -> Value {
        if self.cells().len() == 1 && self.cells()[0].len() == 1 {
            return encode_bpoly(&self.cells()[0][0]);
        }
        let mut m = Map::new();
        m.insert("t_breaks".into(), Value::Array(self.t_breaks().iter().map(|b| b.encode()).collect()));
        m.insert("s_breaks".into(), Value::Array(self.s_breaks().iter().map(|b| b.encode()).collect()));
        m.insert(
            "cells".into(),
            Value::Array(self.cells().iter().map(|row| Value::Array(row.iter().map(encode_bpoly).collect())).collect()),
        );
        Value::Object(m)
    }

    fn decode_at(at: &At<'_>) -> R<Self> {
        match at.v {
            Value::String(_) | Value::Number(_) => Ok(PiecewiseBPoly::poly(BPoly::constant(at.q()?))),
            Value::Array(_) => Ok(PiecewiseBPoly::poly(decode_bpoly(at)?)),
            _ => {
                let tb = decode_breaks(&at.key("t_breaks")?)?;
                let sb = decode_breaks(&at.key("s_breaks")?)?;
                let cells = at
                    .key("cells")?
                    .items()?
                    .iter()
                    .map(|row| row.items()?.iter().map(decode_bpoly).collect::<R<Vec<_>>>())
                    .collect::<R<_>>()?;
                PiecewiseBPoly::new(tb, sb, cells).or_else(|e| at.err(e.to_string()))
            }
        }
    }
}

fn encode_label(b: &MonoidElement) -> Value {
    let mut m = Map::new();
    m.insert("energy".into(), b.energy.encode());
    m.insert("maslov".into(), Value::from(b.maslov));
    Value::Object(m)
}

fn decode_label(at: &At<'_>) -> R<MonoidElement> {
    let e = at.key("energy")?.q()?;
    let mu = at.key("maslov")?.int()?;
    MonoidElement::new(e, mu).or_else(|err| at.err(err.to_string()))
}

/// A term list, or the display string when the scalar carries a precision.
pub fn encode_scalar(s: &NovikovScalar) -> Value {
    if s.precision().is_some() {
        return Value::String(s.to_string());
    }
    Value::Array(
        s.terms()
            .iter()
            .map(|t| {
                let mut m = Map::new();
                m.insert("coef".into(), t.coef.encode());
                m.insert("energy".into(), t.lambda.encode());
                m.insert("maslov".into(), Value::from(t.mu));
                Value::Object(m)
            })
            .collect(),
    )
}

fn decode_scalar(at: &At<'_>) -> R<NovikovScalar> {
    match at.v {
        Value::String(s) => s.parse().or_else(|e: cainf::novikov::NovikovError| at.err(e.to_string())),
        Value::Number(_) => Ok(NovikovScalar::from_q(at.q()?)),
        _ => {
            let mut terms = Vec::new();
            for t in at.items()? {
                let mu = t.key("maslov")?.int()?;
                if mu % 2 != 0 {
                    return t.err("maslov must be even");
                }
                terms.push(Term { lambda: t.key("energy")?.q()?, mu, coef: t.key("coef")?.q()? });
            }
            Ok(NovikovScalar::from_terms(terms, None))
        }
    }
}

/// The shared frame of every algebra-like document.
struct Frame {
    space: GradedSpace,
    pairing: Pairing,
    monoid: DiscreteMonoid,
    e_cut: Q,
    unit: Option<usize>,
    arity_bound: Option<usize>,
}

fn encode_frame<C: Coeff>(a: &FilteredAinfAlgebra<C>, m: &mut Map<String, Value>) {
    m.insert("n".into(), Value::from(a.space.n()));
    m.insert(
        "basis".into(),
        Value::Array(
            (0..a.dim())
                .map(|i| {
                    let mut b = Map::new();
                    b.insert("name".into(), Value::from(a.space.name(i)));
                    b.insert("deg".into(), Value::from(a.space.deg(i)));
                    Value::Object(b)
                })
                .collect(),
        ),
    );
    m.insert(
        "pairing".into(),
        Value::Array(
            (0..a.dim())
                .map(|i| Value::Array((0..a.dim()).map(|j| a.pairing.get(i, j).encode()).collect()))
                .collect(),
        ),
    );
    m.insert("monoid".into(), Value::Array(a.monoid.generators().iter().map(encode_label).collect()));
    m.insert("e_cut".into(), a.e_cut.encode());
    if let Some(u) = a.unit {
        m.insert("unit".into(), Value::from(a.space.name(u)));
    }
    if let Some(b) = a.arity_bound {
        m.insert("arity_bound".into(), Value::from(b));
    }
}

fn decode_frame(at: &At<'_>) -> R<Frame> {
    let n = at.key("n")?.int()?;
    let mut basis = Vec::new();
    for b in at.key("basis")?.items()? {
        basis.push((b.key("name")?.str()?.to_string(), b.key("deg")?.int()?));
    }
    let dim = basis.len();
    let space = {
        let b = at.key("basis")?;
        GradedSpace::new(basis, n).or_else(|e| b.err(e.to_string()))?
    };
    let p_at = at.key("pairing")?;
    let rows = p_at.items()?;
    if rows.len() != dim {
        return p_at.err(format!("expected {dim} rows, found {}", rows.len()));
    }
    let mut mat = Mat::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let cols = row.items()?;
        if cols.len() != dim {
            return row.err(format!("expected {dim} entries, found {}", cols.len()));
        }
        for (j, c) in cols.iter().enumerate() {
            mat.set(i, j, c.q()?);
        }
    }
    let m_at = at.key("monoid")?;
    let gens = m_at.items()?.iter().map(decode_label).collect::<R<Vec<_>>>()?;
    let monoid = DiscreteMonoid::new(gens).or_else(|e| m_at.err(e.to_string()))?;
    let unit = match at.opt("unit")? {
        Some(u) => Some(name_index(&space, &u)?),
        None => None,
    };
    let arity_bound = at.opt("arity_bound")?.map(|a| a.usize()).transpose()?;
    Ok(Frame { space, pairing: Pairing::new(mat), monoid, e_cut: at.key("e_cut")?.q()?, unit, arity_bound })
}

fn name_index(space: &GradedSpace, at: &At<'_>) -> R<usize> {
    let name = at.str()?;
    match space.index_of(name) {
        Some(i) => Ok(i),
        None => at.err(format!("unknown basis element `{name}`")),
    }
}

fn encode_ops<C: DocCoeff>(fam: &OpFamily<C>, src: &GradedSpace, dst: &GradedSpace) -> Value {
    let mut out = Vec::new();
    for ((k, beta), op) in fam {
        if op.is_zero() {
            continue;
        }
        let entries: Vec<Value> = op
            .entries
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(t, v)| {
                let mut e = Map::new();
                e.insert("in".into(), Value::Array(t.iter().map(|&i| Value::from(src.name(i))).collect()));
                let outs: Map<String, Value> = v.iter().map(|(j, c)| (dst.name(*j).to_string(), c.encode())).collect();
                e.insert("out".into(), Value::Object(outs));
                Value::Object(e)
            })
            .collect();
        let mut o = Map::new();
        o.insert("k".into(), Value::from(*k));
        o.insert("beta".into(), encode_label(beta));
        o.insert("entries".into(), Value::Array(entries));
        out.push(Value::Object(o));
    }
    Value::Array(out)
}

fn decode_ops<C: DocCoeff>(
    at: &At<'_>,
    src: &GradedSpace,
    dst: &GradedSpace,
    kind: OpKind,
) -> R<OpFamily<C>> {
    let mut fam = OpFamily::new();
    let (si, so) = (src.sdegrees(), dst.sdegrees());
    for o in at.items()? {
        let k = o.key("k")?.usize()?;
        let beta = decode_label(&o.key("beta")?)?;
        let mut op = MultiOp::new(k, beta, kind);
        for e in o.key("entries")?.items()? {
            let in_at = e.key("in")?;
            let tuple = in_at.items()?.iter().map(|n| name_index(src, n)).collect::<R<Vec<_>>>()?;
            if tuple.len() != k {
                return in_at.err(format!("expected {k} input(s), found {}", tuple.len()));
            }
            for (name, c) in e.key("out")?.entries()? {
                let j = match dst.index_of(&name) {
                    Some(j) => j,
                    None => return c.err(format!("unknown basis element `{name}`")),
                };
                op.add_entry(tuple.clone(), j, &C::decode_at(&c)?);
            }
        }
        if let Some((t, j)) = op.degree_violations(&si, &so).into_iter().next() {
            let names: Vec<&str> = t.iter().map(|&i| src.name(i)).collect();
            return o.err(format!("degree rule fails at input ({}) -> {}", names.join(", "), dst.name(j)));
        }
        family_add(&mut fam, op);
    }
    fam.retain(|_, op| !op.is_zero());
    Ok(fam)
}

fn algebra_from<C: DocCoeff>(f: Frame, ops: OpFamily<C>, at: &At<'_>) -> R<FilteredAinfAlgebra<C>> {
    let a = FilteredAinfAlgebra {
        space: f.space,
        pairing: f.pairing,
        monoid: f.monoid,
        ops,
        e_cut: f.e_cut,
        unit: f.unit,
        arity_bound: f.arity_bound,
    };
    a.validate().or_else(|e| at.err(e.to_string()))?;
    Ok(a)
}

fn decode_algebra<C: DocCoeff>(at: &At<'_>) -> R<FilteredAinfAlgebra<C>> {
    let f = decode_frame(at)?;
    let ops = decode_ops(&at.key("ops")?, &f.space, &f.space, OpKind::Structure)?;
    algebra_from(f, ops, at)
}

fn encode_algebra<C: DocCoeff>(a: &FilteredAinfAlgebra<C>, m: &mut Map<String, Value>) {
    encode_frame(a, m);
    m.insert("ops".into(), encode_ops(&a.ops, &a.space, &a.space));
}

fn encode_divisor(d: &DivisorPairingData, space: &GradedSpace) -> Value {
    let mut m = Map::new();
    m.insert("elements".into(), Value::Array(d.divisors.iter().map(|&i| Value::from(space.name(i))).collect()));
    m.insert(
        "values".into(),
        Value::Array(
            d.values()
                .iter()
                .filter(|(b, _)| !b.is_zero())
                .map(|(b, g)| {
                    let mut e = Map::new();
                    e.insert("beta".into(), encode_label(b));
                    e.insert("g".into(), Value::Array(g.iter().map(|x| Value::from(*x)).collect()));
                    Value::Object(e)
                })
                .collect(),
        ),
    );
    Value::Object(m)
}

fn decode_divisor(at: &At<'_>, space: &GradedSpace) -> R<DivisorPairingData> {
    let divisors = at.key("elements")?.items()?.iter().map(|n| name_index(space, n)).collect::<R<Vec<_>>>()?;
    let mut values = BTreeMap::new();
    for e in at.key("values")?.items()? {
        let g = e.key("g")?.items()?.iter().map(|x| x.int()).collect::<R<Vec<_>>>()?;
        values.insert(decode_label(&e.key("beta")?)?, g);
    }
    let d = DivisorPairingData::new(divisors, values).or_else(|e| at.err(e.to_string()))?;
    if let Some(v) = d.additivity_report().violations.first() {
        return at.err(format!("pairing is not additive: {}", v.note.clone().unwrap_or_default()));
    }
    Ok(d)
}

fn encode_bounding(b: &BoundingData, space: &GradedSpace) -> Value {
    let mut m = Map::new();
    let div: Map<String, Value> = b
        .divisor
        .iter()
        .map(|(i, c)| {
            let mut e = Map::new();
            match c {
                DivisorCoeff::X(x) => e.insert("x".into(), encode_scalar(x)),
                DivisorCoeff::Y(y) => e.insert("y".into(), encode_scalar(y)),
            };
            (space.name(*i).to_string(), Value::Object(e))
        })
        .collect();
    m.insert("divisor".into(), Value::Object(div));
    let high: Map<String, Value> = b.high.iter().map(|(i, c)| (space.name(*i).to_string(), encode_scalar(c))).collect();
    m.insert("high".into(), Value::Object(high));
    Value::Object(m)
}

fn decode_bounding(at: &At<'_>, a: &FilteredAinfAlgebra) -> R<BoundingData> {
    let mut b = BoundingData::zero();
    let lookup = |name: &str, c: &At<'_>| match a.space.index_of(name) {
        Some(i) => Ok(i),
        None => c.err(format!("unknown basis element `{name}`")),
    };
    if let Some(d) = at.opt("divisor")? {
        for (name, c) in d.entries()? {
            let i = lookup(&name, &c)?;
            let coeff = match (c.opt("x")?, c.opt("y")?) {
                (Some(x), None) => DivisorCoeff::X(decode_scalar(&x)?),
                (None, Some(y)) => DivisorCoeff::Y(decode_scalar(&y)?),
                _ => return c.err("give exactly one of `x` and `y`"),
            };
            b.divisor.insert(i, coeff);
        }
    }
    if let Some(h) = at.opt("high")? {
        for (name, c) in h.entries()? {
            let i = lookup(&name, &c)?;
            b.high.insert(i, decode_scalar(&c)?);
        }
    }
    b.validate(a).or_else(|e| at.err(e.to_string()))?;
    Ok(b)
}

fn header(kind: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("format".into(), Value::from(FORMAT));
    m.insert("version".into(), Value::from(VERSION));
    m.insert("kind".into(), Value::from(kind));
    m
}

/// Rebuilds every object with keys inserted in sorted order.
fn canonical(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<String, Value> = m.into_iter().map(|(k, v)| (k, canonical(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        v => v,
    }
}

/// Pretty-printed canonical JSON with a trailing newline.
pub fn to_text(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&canonical(v)).expect("documents serialize");
    s.push('\n');
    s
}

pub fn serialize(doc: &Document) -> String {
    let mut m = header(doc.kind());
    match doc {
        Document::Algebra(d) => {
            encode_algebra(&d.algebra, &mut m);
            if let Some(div) = &d.divisor {
                m.insert("divisor".into(), encode_divisor(div, &d.algebra.space));
            }
            if let Some(b) = &d.bounding {
                m.insert("bounding".into(), encode_bounding(b, &d.algebra.space));
            }
        }
        Document::Isotopy(pi) => {
            encode_algebra(&pi.m, &mut m);
            m.insert("connection".into(), encode_ops(&pi.c, &pi.m.space, &pi.m.space));
        }
        Document::Isotopy2(pi) => {
            encode_algebra(&pi.m, &mut m);
            let s = &pi.m.space;
            m.insert("connection_t".into(), encode_ops(&pi.c, s, s));
            m.insert("connection_s".into(), encode_ops(&pi.d, s, s));
            m.insert("curvature_ts".into(), encode_ops(&pi.e, s, s));
        }
        Document::Morphism(f) => {
            let mut src = Map::new();
            encode_algebra(&f.source, &mut src);
            let mut dst = Map::new();
            encode_algebra(&f.target, &mut dst);
            m.insert("source".into(), Value::Object(src));
            m.insert("target".into(), Value::Object(dst));
            m.insert("maps".into(), encode_ops(&f.maps, &f.source.space, &f.target.space));
            m.insert("e_cut".into(), f.e_cut.encode());
            if let Some(b) = f.arity_bound {
                m.insert("arity_bound".into(), Value::from(b));
            }
        }
        Document::Trees(t) => {
            m.insert("monoid".into(), Value::Array(t.monoid.generators().iter().map(encode_label).collect()));
            m.insert("k".into(), Value::from(t.k));
            m.insert("beta".into(), encode_label(&t.beta));
            m.insert("count".into(), Value::from(t.trees.len()));
            m.insert(
                "trees".into(),
                Value::Array(
                    t.trees
                        .iter()
                        .map(|e| {
                            let mut o = Map::new();
                            o.insert("encoding".into(), Value::from(e.encoding.clone()));
                            o.insert("interior".into(), Value::from(e.interior));
                            o.insert("volume".into(), e.volume.encode());
                            Value::Object(o)
                        })
                        .collect(),
                ),
            );
        }
    }
    to_text(Value::Object(m))
}

fn decode_document(root: &At<'_>) -> R<Document> {
    let format = root.key("format")?;
    if format.str()? != FORMAT {
        return format.err(format!("expected \"{FORMAT}\""));
    }
    let version = root.key("version")?;
    if version.v.as_u64() != Some(VERSION) {
        return version.err(format!("unsupported version; this build reads version {VERSION}"));
    }
    let kind = root.key("kind")?;
    match kind.str()? {
        "algebra" => {
            let algebra: FilteredAinfAlgebra = decode_algebra(root)?;
            let divisor = root.opt("divisor")?.map(|d| decode_divisor(&d, &algebra.space)).transpose()?;
            let bounding = root.opt("bounding")?.map(|b| decode_bounding(&b, &algebra)).transpose()?;
            Ok(Document::Algebra(AlgebraDoc { algebra, divisor, bounding }))
        }
        "isotopy" => {
            let m: FilteredAinfAlgebra<PiecewisePoly> = decode_algebra(root)?;
            let c = match root.opt("connection")? {
                Some(c) => decode_ops(&c, &m.space, &m.space, OpKind::Morphism)?,
                None => OpFamily::new(),
            };
            PseudoIsotopy::new(m, c).map(Document::Isotopy).or_else(|e| root.err(e.to_string()))
        }
        "isotopy2" => {
            let m: FilteredAinfAlgebra<PiecewiseBPoly> = decode_algebra(root)?;
            let s = m.space.clone();
            let fam = |key: &str, kind: OpKind| -> R<OpFamily<PiecewiseBPoly>> {
                match root.opt(key)? {
                    Some(c) => decode_ops(&c, &s, &s, kind),
                    None => Ok(OpFamily::new()),
                }
            };
            let c = fam("connection_t", OpKind::Morphism)?;
            let d = fam("connection_s", OpKind::Morphism)?;
            let e = fam("curvature_ts", OpKind::Homotopy { shift: -1 })?;
            Ok(Document::Isotopy2(PseudoIsotopy2 { m, c, d, e }))
        }
        "morphism" => {
            let src_at = root.key("source")?;
            let dst_at = root.key("target")?;
            let source: FilteredAinfAlgebra = decode_algebra(&src_at)?;
            let target: FilteredAinfAlgebra = decode_algebra(&dst_at)?;
            let maps = decode_ops(&root.key("maps")?, &source.space, &target.space, OpKind::Morphism)?;
            let e_cut = root.key("e_cut")?.q()?;
            let arity_bound = root.opt("arity_bound")?.map(|a| a.usize()).transpose()?;
            let mut f = AinfMorphism::new(source, target, maps.into_values().collect(), e_cut)
                .or_else(|e| root.err(e.to_string()))?;
            f.arity_bound = arity_bound;
            Ok(Document::Morphism(f))
        }
        "trees" => {
            let m_at = root.key("monoid")?;
            let gens = m_at.items()?.iter().map(decode_label).collect::<R<Vec<_>>>()?;
            let monoid = DiscreteMonoid::new(gens).or_else(|e| m_at.err(e.to_string()))?;
            let mut trees = Vec::new();
            for t in root.key("trees")?.items()? {
                trees.push(TreeEntry {
                    encoding: t.key("encoding")?.str()?.to_string(),
                    interior: t.key("interior")?.usize()?,
                    volume: t.key("volume")?.q()?,
                });
            }
            let count = root.key("count")?;
            if count.usize()? != trees.len() {
                return count.err("count does not match the number of trees");
            }
            Ok(Document::Trees(TreesDoc { monoid, k: root.key("k")?.usize()?, beta: decode_label(&root.key("beta")?)?, trees }))
        }
        other => kind.err(format!("unknown document kind `{other}`")),
    }
}

/// Parses a document, reporting failures with the line of the offending field.
pub fn parse_document(text: &str) -> Result<Document, DocError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DocError {
        line: Some(e.line()),
        column: Some(e.column()),
        field: String::new(),
        message: format!("syntax error: {e}"),
    })?;
    let root = At { v: &value, path: Vec::new() };
    decode_document(&root).map_err(|mut e| {
        e.line = locate(text, &e.field);
        e
    })
}

/// Line of the value at a rendered field path, found by walking the text.
fn locate(text: &str, field: &str) -> Option<usize> {
    let path = parse_path(field);
    let mut w = Walker { s: text.as_bytes(), i: 0, line: 1 };
    w.find(&path)
}

fn parse_path(field: &str) -> Vec<Seg> {
    let mut out = Vec::new();
    for part in field.split('.').filter(|p| !p.is_empty()) {
        let (key, rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if !key.is_empty() {
            out.push(Seg::Key(key.to_string()));
        }
        for idx in rest.split('[').filter(|s| !s.is_empty()) {
            if let Ok(i) = idx.trim_end_matches(']').parse() {
                out.push(Seg::Index(i));
            }
        }
    }
    out
}

struct Walker<'a> {
    s: &'a [u8],
    i: usize,
    line: usize,
}

impl Walker<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] as char).is_whitespace() {
            if self.s[self.i] == b'\n' {
                self.line += 1;
            }
            self.i += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.i + 1;
        self.i += 1;
        while self.i < self.s.len() && self.s[self.i] != b'"' {
            if self.s[self.i] == b'\\' {
                self.i += 1;
            }
            self.i += 1;
        }
        let out = String::from_utf8_lossy(&self.s[start..self.i.min(self.s.len())]).into_owned();
        self.i += 1;
        out
    }

    fn skip_value(&mut self) {
        self.ws();
        match self.s.get(self.i) {
            Some(b'"') => {
                self.string();
            }
            Some(b'{') | Some(b'[') => {
                let close = if self.s[self.i] == b'{' { b'}' } else { b']' };
                self.i += 1;
                loop {
                    self.ws();
                    match self.s.get(self.i) {
                        None => return,
                        Some(&c) if c == close => {
                            self.i += 1;
                            return;
                        }
                        Some(b',') | Some(b':') => self.i += 1,
                        _ => self.skip_value(),
                    }
                }
            }
            Some(_) => {
                while self.i < self.s.len() && !b",}]\n\r\t ".contains(&self.s[self.i]) {
                    self.i += 1;
                }
            }
            None => {}
        }
    }

    fn find(&mut self, path: &[Seg]) -> Option<usize> {
        self.ws();
        let Some(seg) = path.first() else { return Some(self.line) };
        match (seg, self.s.get(self.i)) {
            (Seg::Key(k), Some(b'{')) => {
                self.i += 1;
                loop {
                    self.ws();
                    match self.s.get(self.i)? {
                        b'}' => return None,
                        b',' => self.i += 1,
                        b'"' => {
                            let key = self.string();
                            self.ws();
                            self.i += 1; // ':'
                            if &key == k {
                                return self.find(&path[1..]);
                            }
                            self.skip_value();
                        }
                        _ => return None,
                    }
                }
            }
            (Seg::Index(n), Some(b'[')) => {
                self.i += 1;
                let mut idx = 0;
                loop {
                    self.ws();
                    match self.s.get(self.i)? {
                        b']' => return None,
                        b',' => {
                            self.i += 1;
                            idx += 1;
                        }
                        _ => {
                            if idx == *n {
                                return self.find(&path[1..]);
                            }
                            self.skip_value();
                        }
                    }
                }
            }
            _ => None,
        }
    }
}
