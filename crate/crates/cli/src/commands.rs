//! Subcommands as pure functions from documents and flags to an [`Outcome`].

use anyhow::{anyhow, bail, Context, Result};
use cainf::ainf::{verify_ainf, verify_cyclic, verify_cyclic_morphism, verify_morphism, verify_unital};
use cainf::deform::{self, check_divisor_property, deform_by_b, energy_shift, mc_value, McOptions};
use cainf::graded::{GradedSpace, OpFamily};
use cainf::isotopy::{extend_isotopy, integrate_to_morphism, verify_isotopy, verify_isotopy2, IntegrateOptions};
use cainf::novikov::{fmt_q, DiscreteMonoid, MonoidElement, Q};
use cainf::poly::PiecewisePoly;
use cainf::transfer::{build_hodge_for, transfer_canonical};
use cainf::trees::{enumerate_trees, order_polytope_volume, tree_partial_order};
use cainf::{FilteredAinfAlgebra, Report};
use serde_json::{Map, Value};

use crate::doc::{encode_scalar, serialize, to_text, AlgebraDoc, Document, TreeEntry, TreesDoc};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Transfer,
    IsotopyVerify,
    IsotopyIntegrate,
    IsotopyExtend,
    Deform,
    Trees,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Transfer => "transfer",
            Command::IsotopyVerify => "isotopy-verify",
            Command::IsotopyIntegrate => "isotopy-integrate",
            Command::IsotopyExtend => "isotopy-extend",
            Command::Deform => "deform",
            Command::Trees => "trees",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Flags {
    pub k_max: usize,
    pub e_cut: Option<Q>,
    pub tau0: Q,
    pub tau1: Q,
    pub shift: Option<Vec<Q>>,
    pub delta: Option<Q>,
    pub m_bound: usize,
    pub k: usize,
    pub energy: Q,
    pub maslov: i64,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            k_max: 4,
            e_cut: None,
            tau0: Q::from_integer(0.into()),
            tau1: Q::from_integer(1.into()),
            shift: None,
            delta: None,
            m_bound: 3,
            k: 2,
            energy: Q::from_integer(0.into()),
            maslov: 0,
        }
    }
}

/// Documents a command consumes: the primary input and any auxiliary one.
#[derive(Clone, Debug, Default)]
pub struct Inputs {
    pub primary: Option<Document>,
    /// The algebra of `isotopy-extend`.
    pub algebra: Option<Document>,
    /// The isotopy whose connection `isotopy-extend` adds at the new levels.
    pub connection: Option<Document>,
}

/// One named check with the spaces used to name its tuples and outputs.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub report: Report,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Check {
    fn new(name: &str, report: Report, input: &GradedSpace, output: &GradedSpace) -> Self {
        Check {
            name: name.to_string(),
            report: report.sorted(),
            inputs: input.names().to_vec(),
            outputs: output.names().to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    pub checks: Vec<Check>,
    /// Computed values shown alongside the checks, in order.
    pub info: Vec<(String, Value)>,
    /// The primary output document.
    pub output: Option<Document>,
    /// The morphism written by `transfer`.
    pub morphism: Option<Document>,
}

impl Outcome {
    fn new(command: Command) -> Self {
        Outcome { command, checks: Vec::new(), info: Vec::new(), output: None, morphism: None }
    }

    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.report.len()).sum()
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.violations() == 0 {
            0
        } else {
            1
        }
    }

    pub fn report_text(&self) -> String {
        let mut s = format!("{}\n", self.command.name());
        for (k, v) in &self.info {
            s.push_str(&format!("  {k}: {}\n", info_text(v)));
        }
        for c in &self.checks {
            if c.report.is_ok() {
                s.push_str(&format!("  {}: ok\n", c.name));
                continue;
            }
            s.push_str(&format!("  {}: {} violation(s)\n", c.name, c.report.len()));
            for v in &c.report.violations {
                let tuple: Vec<&str> = v.tuple.iter().map(|&i| lookup(&c.inputs, i)).collect();
                s.push_str(&format!("    [{}] k={} beta={} tuple=({})", v.check, v.k, v.beta, tuple.join(", ")));
                if !v.discrepancy.is_empty() {
                    let parts: Vec<String> =
                        v.discrepancy.iter().map(|(i, x)| format!("{}: {x}", lookup(&c.outputs, *i))).collect();
                    s.push_str(&format!(" discrepancy {{{}}}", parts.join(", ")));
                }
                if let Some(n) = &v.note {
                    s.push_str(&format!(" ({n})"));
                }
                s.push('\n');
            }
        }
        s.push_str(&format!("result: {}\n", if self.exit_code() == 0 { "pass" } else { "fail" }));
        s
    }

    pub fn report_json(&self) -> String {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let vs: Vec<Value> = c
                    .report
                    .violations
                    .iter()
                    .map(|v| {
                        let mut o = Map::new();
                        o.insert("check".into(), Value::from(v.check.clone()));
                        o.insert("k".into(), Value::from(v.k));
                        o.insert("beta".into(), label_json(&v.beta));
                        o.insert(
                            "tuple".into(),
                            Value::Array(v.tuple.iter().map(|&i| Value::from(lookup(&c.inputs, i))).collect()),
                        );
                        o.insert(
                            "discrepancy".into(),
                            Value::Object(
                                v.discrepancy
                                    .iter()
                                    .map(|(i, x)| (lookup(&c.outputs, *i).to_string(), Value::from(x.clone())))
                                    .collect(),
                            ),
                        );
                        if let Some(n) = &v.note {
                            o.insert("note".into(), Value::from(n.clone()));
                        }
                        Value::Object(o)
                    })
                    .collect();
                let mut o = Map::new();
                o.insert("name".into(), Value::from(c.name.clone()));
                o.insert("ok".into(), Value::from(c.report.is_ok()));
                o.insert("violations".into(), Value::Array(vs));
                Value::Object(o)
            })
            .collect();
        let mut m = Map::new();
        m.insert("command".into(), Value::from(self.command.name()));
        m.insert("ok".into(), Value::from(self.exit_code() == 0));
        m.insert("checks".into(), Value::Array(checks));
        m.insert("info".into(), Value::Object(self.info.iter().cloned().collect()));
        to_text(Value::Object(m))
    }

    pub fn output_text(&self) -> Option<String> {
        self.output.as_ref().map(serialize)
    }

    pub fn morphism_text(&self) -> Option<String> {
        self.morphism.as_ref().map(serialize)
    }
}

fn lookup(names: &[String], i: usize) -> &str {
    names.get(i).map(String::as_str).unwrap_or("?")
}

fn label_json(b: &MonoidElement) -> Value {
    let mut m = Map::new();
    m.insert("energy".into(), Value::from(fmt_q(&b.energy)));
    m.insert("maslov".into(), Value::from(b.maslov));
    Value::Object(m)
}

fn info_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn algebra_checks(out: &mut Outcome, prefix: &str, a: &FilteredAinfAlgebra, k_max: usize) -> Result<()> {
    let Some(k) = a.checkable_k(k_max) else { return Ok(()) };
    let s = &a.space;
    out.checks.push(Check::new(&format!("{prefix}ainf"), verify_ainf(a, k), s, s));
    out.checks.push(Check::new(&format!("{prefix}cyclic"), verify_cyclic(a, k), s, s));
    if a.unit.is_some() {
        out.checks.push(Check::new(&format!("{prefix}unital"), verify_unital(a, k)?, s, s));
    }
    Ok(())
}

fn morphism_checks(out: &mut Outcome, f: &cainf::AinfMorphism, k_max: usize) -> Result<()> {
    let k = match f.arity_bound {
        Some(0) => return Ok(()),
        Some(b) => k_max.min(b - 1),
        None => k_max,
    };
    let (s, t) = (&f.source.space, &f.target.space);
    out.checks.push(Check::new("morphism", verify_morphism(f, k)?, s, t));
    out.checks.push(Check::new("cyclic-morphism", verify_cyclic_morphism(f, k)?, s, s));
    Ok(())
}

fn truncated(doc: Document, e: &Option<Q>) -> Document {
    let Some(e) = e else { return doc };
    match doc {
        Document::Algebra(mut d) => {
            d.algebra = d.algebra.truncate(e);
            Document::Algebra(d)
        }
        Document::Isotopy(pi) => Document::Isotopy(pi.truncate(e)),
        other => other,
    }
}

fn expect_algebra(doc: Option<Document>, what: &str) -> Result<AlgebraDoc> {
    match doc {
        Some(Document::Algebra(d)) => Ok(d),
        Some(other) => bail!("{what}: expected an algebra document, found `{}`", other.kind()),
        None => bail!("{what}: missing input document"),
    }
}

fn expect_isotopy(doc: Option<Document>, what: &str) -> Result<cainf::PseudoIsotopy> {
    match doc {
        Some(Document::Isotopy(pi)) => Ok(pi),
        Some(other) => bail!("{what}: expected an isotopy document, found `{}`", other.kind()),
        None => bail!("{what}: missing input document"),
    }
}

/// Runs one subcommand. Errors are failures to run (exit 2); violations are reported in the
/// outcome.
pub fn run_command(cmd: Command, inputs: Inputs, flags: &Flags) -> Result<Outcome> {
    let mut out = Outcome::new(cmd);
    let primary = inputs.primary.map(|d| truncated(d, &flags.e_cut));
    let k_max = flags.k_max;
    match cmd {
        Command::Verify => match primary.ok_or_else(|| anyhow!("verify: missing input document"))? {
            Document::Algebra(d) => {
                algebra_checks(&mut out, "", &d.algebra, k_max)?;
                if let Some(div) = &d.divisor {
                    let rep = check_divisor_property(&d.algebra, div, flags.m_bound, k_max);
                    out.checks.push(Check::new("divisor", rep, &d.algebra.space, &d.algebra.space));
                }
            }
            Document::Morphism(f) => morphism_checks(&mut out, &f, k_max)?,
            Document::Isotopy(pi) => {
                let s = &pi.m.space;
                out.checks.push(Check::new("isotopy", verify_isotopy(&pi, k_max)?, s, s));
            }
            Document::Isotopy2(pi) => {
                let s = &pi.m.space;
                out.checks.push(Check::new("isotopy2", verify_isotopy2(&pi, k_max), s, s));
            }
            Document::Trees(_) => bail!("verify: tree listings carry no axioms to check"),
        },
        Command::Transfer => {
            let d = expect_algebra(primary, "transfer")?;
            let h = build_hodge_for(&d.algebra).context("building Hodge data")?;
            let can = transfer_canonical(&d.algebra, &h, k_max);
            algebra_checks(&mut out, "", &can.algebra, k_max)?;
            morphism_checks(&mut out, &can.morphism, k_max)?;
            out.output = Some(Document::Algebra(AlgebraDoc::plain(can.algebra)));
            out.morphism = Some(Document::Morphism(can.morphism));
        }
        Command::IsotopyVerify => match primary.ok_or_else(|| anyhow!("isotopy-verify: missing input document"))? {
            Document::Isotopy(pi) => {
                let s = &pi.m.space;
                out.checks.push(Check::new("isotopy", verify_isotopy(&pi, k_max)?, s, s));
            }
            Document::Isotopy2(pi) => {
                let s = &pi.m.space;
                out.checks.push(Check::new("isotopy2", verify_isotopy2(&pi, k_max), s, s));
            }
            other => bail!("isotopy-verify: expected an isotopy document, found `{}`", other.kind()),
        },
        Command::IsotopyIntegrate => {
            let pi = expect_isotopy(primary, "isotopy-integrate")?;
            let opts = IntegrateOptions { verify_k_max: Some(k_max) };
            let f = integrate_to_morphism(&pi, &flags.tau0, &flags.tau1, &opts)?;
            out.info.push(("tau0".into(), Value::from(fmt_q(&flags.tau0))));
            out.info.push(("tau1".into(), Value::from(fmt_q(&flags.tau1))));
            morphism_checks(&mut out, &f, k_max)?;
            out.output = Some(Document::Morphism(f));
        }
        Command::IsotopyExtend => {
            let pi = expect_isotopy(primary, "isotopy-extend")?;
            let m1 = expect_algebra(inputs.algebra, "isotopy-extend")?;
            let extra = match inputs.connection {
                Some(doc) => expect_isotopy(Some(doc), "isotopy-extend --connection")?.c,
                None => OpFamily::<PiecewisePoly>::new(),
            };
            let ext = extend_isotopy(&pi, &m1.algebra, &extra)?;
            let s = &ext.m.space;
            out.checks.push(Check::new("isotopy", verify_isotopy(&ext, k_max)?, s, s));
            out.output = Some(Document::Isotopy(ext));
        }
        Command::Deform => run_deform(&mut out, expect_algebra(primary, "deform")?, flags)?,
        Command::Trees => {
            let monoid = match primary {
                Some(Document::Algebra(d)) => d.algebra.monoid,
                Some(Document::Trees(t)) => t.monoid,
                Some(other) => bail!("trees: expected an algebra document, found `{}`", other.kind()),
                None => DiscreteMonoid::trivial(),
            };
            let beta = MonoidElement::new(flags.energy.clone(), flags.maslov)?;
            let trees = enumerate_trees(flags.k, &beta, &monoid)?
                .iter()
                .map(|t| TreeEntry {
                    encoding: t.encoding(),
                    interior: t.interior_count(),
                    volume: order_polytope_volume(&tree_partial_order(t)),
                })
                .collect::<Vec<_>>();
            out.info.push(("count".into(), Value::from(trees.len())));
            out.info.push(("trees".into(), Value::from(trees.iter().map(|t| t.encoding.clone()).collect::<Vec<_>>())));
            out.output = Some(Document::Trees(TreesDoc { monoid, k: flags.k, beta, trees }));
        }
    }
    Ok(out)
}

/// The A∞ check on `new`, plus cyclicity and unitality when `old` has them.
fn inherited_checks(out: &mut Outcome, old: &FilteredAinfAlgebra, new: &FilteredAinfAlgebra, k: usize) -> Result<()> {
    let s = &new.space;
    out.checks.push(Check::new("ainf", verify_ainf(new, k), s, s));
    if verify_cyclic(old, k).is_ok() {
        out.checks.push(Check::new("cyclic", verify_cyclic(new, k), s, s));
    }
    if old.unit.is_some() && verify_unital(old, k)?.is_ok() {
        out.checks.push(Check::new("unital", verify_unital(new, k)?, s, s));
    }
    Ok(())
}

fn run_deform(out: &mut Outcome, d: AlgebraDoc, flags: &Flags) -> Result<()> {
    let a = &d.algebra;
    let s = &a.space;
    if let Some(c) = &flags.shift {
        let div = d.divisor.as_ref().ok_or_else(|| anyhow!("deform --shift needs a divisor block"))?;
        let shifted = energy_shift(a, div, c)?;
        out.info.push(("e_cut".into(), Value::from(fmt_q(&shifted.e_cut))));
        inherited_checks(out, a, &shifted, flags.k_max)?;
        let divisor = Some(div.shift(c)?);
        out.output = Some(Document::Algebra(AlgebraDoc { algebra: shifted, divisor, bounding: None }));
        return Ok(());
    }
    let b = d.bounding.clone().ok_or_else(|| anyhow!("deform: the document has no bounding block"))?;
    let opts = McOptions { delta: flags.delta.clone(), m_bound: flags.m_bound, k_max: flags.k_max };
    if let Some(div) = &d.divisor {
        let rep = check_divisor_property(a, div, flags.m_bound, flags.k_max);
        out.checks.push(Check::new("divisor", rep, s, s));
    }
    let mc = mc_value(a, &b, d.divisor.as_ref(), &opts)?;
    let mc_json: Map<String, Value> = mc
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| (s.name(i).to_string(), encode_scalar(v)))
        .collect();
    let strict = mc_json.is_empty();
    out.info.push(("mc_value".into(), Value::Object(mc_json)));
    out.info.push(("strict".into(), Value::from(strict)));
    let has_divisor_part = b.divisor.values().any(|c| !matches!(c, deform::DivisorCoeff::X(x) if x.is_zero()));
    if has_divisor_part {
        out.info.push(("deformed".into(), Value::from("skipped: nonzero divisor part")));
        return Ok(());
    }
    let deformed = deform_by_b(a, &b)?;
    inherited_checks(out, a, &deformed, flags.k_max)?;
    out.output = Some(Document::Algebra(AlgebraDoc { algebra: deformed, divisor: d.divisor, bounding: None }));
    Ok(())
}
