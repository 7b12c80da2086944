mod support;

use std::fs;

use cainf::ainf::AinfMorphism;
use cainf::isotopy::PseudoIsotopy;
use cainf::deform::DivisorPairingData;
use cainf_cli::doc::{parse_document, serialize, AlgebraDoc, Document};
use cainf_cli::{run_command, Command, Flags, Inputs};
use support::*;

fn bless_or_compare(name: &str, text: &str) {
    let path = fixture_dir().join(name);
    if std::env::var_os("CAINF_BLESS").is_some() {
        fs::write(&path, text).unwrap();
    }
    let stored = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(stored, text, "{name} is stale; rerun with CAINF_BLESS=1");
}

#[test]
fn fixtures_are_current_and_canonical() {
    for (name, doc) in fixtures() {
        let text = serialize(&doc);
        bless_or_compare(name, &text);
        assert_eq!(parse_document(&text).unwrap(), doc, "{name}");
    }
}

fn path(name: &str) -> String {
    fixture_dir().join(name).display().to_string()
}

#[test]
fn verify_torus_passes() {
    let r = cainf(&["verify", &path("torus.json")], None, None);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("ainf: ok") && r.stdout.contains("unital: ok"), "{}", r.stdout);
}

#[test]
fn transfer_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["acyclic.json", "gapped.json"] {
        let can = dir.path().join(format!("can-{name}"));
        let f = dir.path().join(format!("f-{name}"));
        let (can_s, f_s) = (can.display().to_string(), f.display().to_string());
        let r = cainf(&["transfer", &path(name), "--out", &can_s, "--morphism-out", &f_s, "--k-max", "3"], None, None);
        assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
        let r = cainf(&["verify", &can_s], None, None);
        assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
        let r = cainf(&["verify", &f_s, "--k-max", "3"], None, None);
        assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
        assert!(r.stdout.contains("cyclic-morphism: ok"));
    }
}

#[test]
fn stdin_stdout_pipeline() {
    let torus = fs::read_to_string(path("acyclic.json")).unwrap();
    let t = cainf(&["transfer", "-", "--out", "-", "--k-max", "3"], Some(&torus), None);
    assert_eq!(t.code, 0, "{}", t.stderr);
    assert!(t.stderr.contains("result: pass"));
    let v = cainf(&["verify", "-"], Some(&t.stdout), None);
    assert_eq!(v.code, 0, "{}", v.stdout);
}

#[test]
fn constant_isotopy_integrates_to_identity() {
    let r = cainf(&["isotopy-integrate", &path("const.iso.json"), "--tau0", "0", "--tau1", "1", "--out", "-"], None, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let Document::Isotopy(pi) = parse_document(&fs::read_to_string(path("const.iso.json")).unwrap()).unwrap() else {
        panic!("not an isotopy")
    };
    let a = pi.slice(&cainf::novikov::q(0));
    assert_eq!(r.stdout, serialize(&Document::Morphism(AinfMorphism::identity(&a))));
    assert_eq!(pi, PseudoIsotopy::constant(&a));
}

#[test]
fn isotopy_commands() {
    let r = cainf(&["isotopy-verify", &path("gapped.iso.json")], None, None);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let r = cainf(&["isotopy-integrate", &path("gapped.iso.json"), "--tau0", "1/3", "--tau1", "3/4"], None, None);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("morphism: ok"));
    // Extending the truncated isotopy back to the end algebra.
    let dir = tempfile::tempdir().unwrap();
    let low = dir.path().join("low.json");
    let end = dir.path().join("end.json");
    let Document::Isotopy(pi) = parse_document(&fs::read_to_string(path("gapped.iso.json")).unwrap()).unwrap() else {
        panic!()
    };
    let e0 = pi.m.monoid.min_energy().unwrap();
    fs::write(&low, serialize(&Document::Isotopy(pi.truncate(&e0)))).unwrap();
    let end_alg = AlgebraDoc::plain(pi.slice(&cainf::novikov::q(1)));
    fs::write(&end, serialize(&Document::Algebra(end_alg))).unwrap();
    let r = cainf(
        &["isotopy-extend", &low.display().to_string(), &end.display().to_string(), "--connection", &path("gapped.iso.json")],
        None,
        None,
    );
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("isotopy: ok"));
}

#[test]
fn odd_maslov_is_rejected() {
    let text = fs::read_to_string(path("gapped.json")).unwrap();
    let bad = text.replacen("\"maslov\": 2", "\"maslov\": 3", 1);
    assert_ne!(bad, text);
    let r = cainf(&["verify", "-"], Some(&bad), None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("maslov must be even"), "{}", r.stderr);
    assert!(r.stderr.contains("line "), "{}", r.stderr);
}

#[test]
fn violations_exit_one_with_located_report() {
    let text = fs::read_to_string(path("torus.json")).unwrap();
    let Document::Algebra(mut d) = parse_document(&text).unwrap() else { panic!() };
    let e1 = d.algebra.space.index_of("e1").unwrap();
    let vol = d.algebra.space.index_of("vol").unwrap();
    let key = d.algebra.ops.keys().find(|(k, _)| *k == 2).cloned().unwrap();
    d.algebra.ops.get_mut(&key).unwrap().add_entry(vec![e1, e1], vol, &cainf::novikov::q(1));
    let out = run_command(Command::Verify, Inputs { primary: Some(Document::Algebra(d)), ..Default::default() }, &Flags::default())
        .unwrap();
    assert_eq!(out.exit_code(), 1);
    let text = out.report_text();
    assert!(text.contains("cyclic:") && text.contains("tuple=("), "{text}");
    let json: serde_json::Value = serde_json::from_str(&out.report_json()).unwrap();
    assert_eq!(json["ok"], false);
    assert!(json["checks"].as_array().unwrap().iter().any(|c| c["ok"] == false && !c["violations"][0]["tuple"].is_null()));
}

#[test]
fn deform_reports_the_mc_value() {
    let r = cainf(&["deform", &path("quantum_torus.json"), "--json"], None, None);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    let json: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(json["info"]["strict"], false);
    assert_eq!(json["info"]["mc_value"]["vol"], "T^2 (prec T^3)");
    // Divisor-compatible up to arity 6, so checks stop at k_max + m_bound = 6.
    let dir = tempfile::tempdir().unwrap();
    let div = dir.path().join("divisor.json").display().to_string();
    fs::write(&div, serialize(&Document::Algebra(divisor_doc(1)))).unwrap();
    let r = cainf(&["deform", &div, "--k-max", "3"], None, None);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.contains("divisor: ok") && r.stdout.contains("skipped"), "{}", r.stdout);
    // The divisor instance is not A-infinity; shift the quantum torus instead.
    let qt = quantum_torus();
    let e1 = qt.space.index_of("e1").unwrap();
    let beta = me(cainf::novikov::q(1), 0);
    let d = DivisorPairingData::from_generators(vec![e1], &qt.monoid, &[(beta, vec![1])].into(), &qt.e_cut).unwrap();
    let shifted = dir.path().join("shift.json").display().to_string();
    let doc = AlgebraDoc { algebra: qt, divisor: Some(d), bounding: None };
    fs::write(&shifted, serialize(&Document::Algebra(doc))).unwrap();
    let r = cainf(&["deform", &shifted, "--shift=-1/2", "--out", "-"], None, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stderr.contains("e_cut: 3/2") && r.stderr.contains("ainf: ok"), "{}", r.stderr);
    let Document::Algebra(out) = parse_document(&r.stdout).unwrap() else { panic!() };
    assert_eq!(out.algebra.monoid.generators(), &[me(cainf::novikov::qf(1, 2), 0)]);
    let r = cainf(&["deform", &div, "--k-max", "3", "--delta", "0"], None, None);
    assert_eq!(r.code, 2);
}

#[test]
fn trees_lists_encodings() {
    let r = cainf(&["trees", &path("gapped.json"), "--k", "1", "--energy", "2", "--maslov", "0", "--out", "-"], None, None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let Document::Trees(t) = parse_document(&r.stdout).unwrap() else { panic!() };
    assert!(!t.trees.is_empty());
    let r = cainf(&["trees", "--k", "3"], None, None);
    assert!(r.stdout.contains("count: 3"), "{}", r.stdout);
}

#[test]
fn e_cut_flag_truncates() {
    let r = cainf(&["verify", &path("gapped.json"), "--e-cut", "1", "--json"], None, None);
    assert_eq!(r.code, 0);
    let full = cainf(&["verify", &path("gapped.json"), "--json"], None, None);
    assert_eq!(full.code, 0);
}
