use std::fs;
use std::path::PathBuf;
use std::process::Command;

use reflspan_core::algebra::{eval_core, fuse_relation, parse_fusions, refl_to_core, rel_project, CoreExpr};
use reflspan_core::analysis::{contains, satisfiable_witness};
use reflspan_core::classify::{classify, VariablePartition};
use reflspan_core::eval::{evaluate, test_tuple_witness, TestMode};
use reflspan_core::refx::parse_refx;
use reflspan_core::word::render_word;
use reflspan_core::{demo, Nfa, SpanTuple, ValidOrder};

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn run(args: &[&str]) -> (String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_reflspan"))
        .args(args)
        .current_dir(data())
        .output()
        .expect("binary runs");
    (String::from_utf8(out.stdout).unwrap(), out.status.code().unwrap())
}

fn spanner(name: &str) -> Nfa {
    let text = fs::read_to_string(data().join(name)).unwrap();
    if name.ends_with(".refx") {
        parse_refx(&text).unwrap().compile().unwrap()
    } else {
        Nfa::from_file_str(&text).unwrap()
    }
}

fn doc(name: &str) -> String {
    fs::read_to_string(data().join(name)).unwrap().trim_end_matches('\n').to_string()
}

#[test]
fn eval_matches_library() {
    let m = spanner("intro.refx");
    let rel = evaluate(&m, &doc("abaac.txt")).unwrap();
    assert_eq!(rel.len(), 3);
    assert_eq!(run(&["eval", "-s", "intro.refx", "-d", "abaac.txt"]), (rel.render(), 0));
    assert_eq!(
        run(&["eval", "-s", "intro.refx", "-d", "abaac.txt", "--format", "count"]),
        ("3\n".to_string(), 0)
    );
    let json = format!("{}\n", serde_json::to_string_pretty(&rel.to_json()).unwrap());
    assert_eq!(run(&["--json", "eval", "-s", "intro.refx", "-d", "abaac.txt"]), (json, 0));
}

#[test]
fn classify_matches_library() {
    let m = spanner("intro.refx");
    let r = classify(&m).unwrap();
    assert_eq!(run(&["classify", "-s", "intro.refx"]), (r.render(m.alphabet()), 0));
    let m = spanner("copy.refx");
    let r = classify(&m).unwrap();
    let (out, code) = run(&["classify", "-s", "copy.refx", "--require", "hierarchical,reference-bounded"]);
    assert_eq!((out, code), (r.render(m.alphabet()), 0));
}

#[test]
fn classify_rejects_unclosed_marker() {
    let m = spanner("unclosed.json");
    let r = classify(&m).unwrap();
    let (out, code) = run(&["classify", "-s", "unclosed.json"]);
    assert_eq!(code, 3);
    assert_eq!(out, r.render(m.alphabet()));
    assert!(out.contains("witness: [<x a]"));
}

#[test]
fn tuple_test_and_nonempty() {
    let m = spanner("intro.refx");
    let t = SpanTuple::parse_json(r#"{"x":[1,3],"y":[3,5]}"#).unwrap();
    let w = test_tuple_witness(&m, "abaac", &t, &TestMode::General).unwrap().unwrap();
    let expected = format!("true\nwitness: {}\n", render_word(&w, m.alphabet()));
    assert_eq!(
        run(&["test", "-s", "intro.refx", "-d", "abaac.txt", "-t", r#"{"x":[1,3],"y":[3,5]}"#]),
        (expected, 0)
    );
    let (out, code) = run(&["test", "-s", "intro.refx", "-d", "abaac.txt", "-t", r#"{"x":[1,2],"y":[3,5]}"#]);
    assert_eq!((out.as_str(), code), ("false\n", 1));
    assert_eq!(run(&["nonempty", "-s", "copy.refx", "-d", "aabaa.txt"]), ("true\n".into(), 0));
    assert_eq!(run(&["nonempty", "-s", "copy.refx", "-d", "abaac.txt"]).1, 3);
}

#[test]
fn static_analysis() {
    let m = spanner("copy.refx");
    let (d, t) = satisfiable_witness(&m).unwrap().unwrap();
    let expected = format!("true\ndocument: {d}\ntuple: {}\n", t.render(m.vars()));
    assert_eq!(run(&["sat", "-s", "copy.refx"]), (expected, 0));
    assert_eq!(run(&["hier", "-s", "intro.refx"]), ("true\n".into(), 0));
    assert_eq!(run(&["funct", "-s", "intro.refx"]), ("true\n".into(), 0));
}

#[test]
fn containment_matches_library() {
    let (n, w) = (spanner("narrow.refx"), spanner("wide.refx"));
    let p = VariablePartition::parse(&fs::read_to_string(data().join("partition.cfg")).unwrap()).unwrap();
    let ord = ValidOrder::default_for(2);
    assert!(contains(&n, &w, &p, &ord).unwrap().holds);
    let args = ["contains", "-s", "narrow.refx", "-S", "wide.refx", "--partition", "partition.cfg"];
    assert_eq!(run(&args), ("true\n".into(), 0));
    let c = contains(&w, &n, &p, &ord).unwrap();
    let (d, t) = c.witness.unwrap();
    let expected = format!("false\ndocument: {d}\ntuple: {}\n", t.render(w.vars()));
    let args = ["contains", "-s", "wide.refx", "-S", "narrow.refx", "--partition", "partition.cfg"];
    assert_eq!(run(&args), (expected, 1));
    let (out, code) = run(&["equiv", "-s", "narrow.refx", "-S", "narrow.refx"]);
    assert_eq!((out.as_str(), code), ("true\n", 0));
}

#[test]
fn core_expressions() {
    let text = fs::read_to_string(data().join("pair.cfg")).unwrap();
    let e = CoreExpr::from_config(&text, &data()).unwrap();
    let rel = eval_core(&e, "aacaa").unwrap();
    assert_eq!(rel.len(), 1);
    assert_eq!(run(&["eval", "-e", "pair.cfg", "-d", "aacaa.txt"]), (rel.render(), 0));

    let m = spanner("fusion.refx");
    let plan = parse_fusions("x,y->u;y,z->v").unwrap();
    let rel = rel_project(
        &fuse_relation(&evaluate(&m, "aabaaa").unwrap(), &plan).unwrap(),
        &["u".to_string(), "v".to_string()],
    );
    let args = ["fuse", "-s", "fusion.refx", "-d", "aabaaa.txt", "--fuse", "x,y->u;y,z->v", "--project", "u,v"];
    assert_eq!(run(&args), (rel.render(), 0));
    assert_eq!(rel.render(), "(u ↦ [1,4⟩, v ↦ [3,7⟩)\n");
}

#[test]
fn compilers_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("reflspan-golden-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let out = dir.join("refl.json");
    let (text, code) = run(&["compile", "to-refl", "-e", "pair.cfg", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let mut lines = text.lines();
    let fuse = lines.next().unwrap().strip_prefix("fuse=").unwrap().to_string();
    let project = lines.next().unwrap().strip_prefix("project=").unwrap().to_string();
    let (fused, _) = run(&["fuse", "-s", out.to_str().unwrap(), "-d", "aacaa.txt", "--fuse", &fuse, "--project", &project]);
    let (direct, _) = run(&["eval", "-e", "pair.cfg", "-d", "aacaa.txt"]);
    assert_eq!(fused, direct);

    let cfg = dir.join("core.cfg");
    let (text, code) = run(&["compile", "to-core", "-s", "copy.refx", "-o", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let e = refl_to_core(&spanner("copy.refx")).unwrap();
    assert_eq!(text, e.render_config("core.nfa.json"));
    let (via_core, _) = run(&["eval", "-e", cfg.to_str().unwrap(), "-d", "aabaa.txt"]);
    let (direct, _) = run(&["eval", "-s", "copy.refx", "-d", "aabaa.txt"]);
    assert_eq!(via_core, direct);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn email_demo() {
    assert_eq!(demo::repeat_authors(&doc("corpus.txt")).unwrap(), vec!["alice"]);
    assert_eq!(run(&["demo", "email", "--doc", "corpus.txt"]), ("alice\n".into(), 0));
    assert_eq!(run(&["demo", "email"]), ("alice\n".into(), 0));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).1, 2);
    assert_eq!(run(&["eval", "-s", "intro.refx", "-d", "missing.txt"]).1, 2);
    assert_eq!(run(&["classify", "-s", "intro.refx", "--require", "shiny"]).1, 2);
    assert_eq!(run(&["classify", "-s", "intro.refx", "--require", "reference-bounded"]).1, 0);
    assert_eq!(run(&["hier", "-s", "unclosed.json"]).1, 3);
    assert_eq!(run(&["eval", "-s", "intro.refx", "-d", "abaac.txt", "--max-configs", "1"]).1, 4);
}
