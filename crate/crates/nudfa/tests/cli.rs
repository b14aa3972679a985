//! End-to-end runs of the command-line front end on temporary files.

mod common;

use std::path::{Path, PathBuf};

use nudfa::algebra::AlgebraFile;
use nudfa::cc::CCircuit;
use nudfa::cli::{run, EquationFile, Outcome};
use nudfa::compiler::compile_nilpotent;
use nudfa::fieldpoly::Cnf;
use nudfa::fixtures;
use nudfa::program::{sum_program, AlgProgram, ProgramFile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

use common::*;

fn nudfa(args: &[&str]) -> Outcome {
    run(std::iter::once("nudfa").chain(args.iter().copied()))
}

fn json(o: &Outcome) -> Value {
    serde_json::from_str(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}{}", o.stdout, o.stderr))
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// AND of two bits over Z6mod2: each bit reads as 1 or 3, accept a sum of 0.
fn and2() -> AlgProgram {
    sum_program(&fixtures::z6mod2(), "+", 2, 1, 3, vec![0]).unwrap()
}

fn program_file(dir: &TempDir, name: &str, p: &AlgProgram) -> PathBuf {
    let text = serde_json::to_string_pretty(&p.to_file(&fixtures::z6mod2())).unwrap();
    put(dir, name, &text)
}

#[test]
fn con_reports_the_z6mod2_chain() {
    let o = nudfa(&["con", "--algebra", "fixtures:Z6mod2"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o);
    assert_eq!(v["rank"], 2);
    assert_eq!(v["kappa"], "0,2,4|1,3,5");
    assert_eq!(v["sigma"], "0,2,4|1,3,5");
    assert_eq!(v["congruences"].as_array().unwrap().len(), 3);
    let dot = nudfa(&["con", "--algebra", "fixtures:Z6mod2", "--format", "dot"]);
    assert_eq!(dot.code, 0);
    assert!(dot.stdout.starts_with("digraph"));
}

#[test]
fn compile_and_verify_and2() {
    let dir = TempDir::new().unwrap();
    let prog = program_file(&dir, "and2.json", &and2());
    let out = dir.path().join("and2.cc.json");
    let o = nudfa(&[
        "compile",
        "--program",
        s(&prog),
        "--out",
        s(&out),
        "--verify-n",
        "2",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o);
    assert_eq!(v["verified"], true);
    assert_eq!((v["m"].as_u64(), v["p"].as_u64()), (Some(2), Some(3)));

    let ok = nudfa(&["verify", "--program", s(&prog), "--circuit", s(&out)]);
    assert_eq!(ok.code, 0);
    assert_eq!(json(&ok)["matches"], true);

    let flipped = program_file(
        &dir,
        "nand2.json",
        &and2().with_accepting(vec![1, 2, 3, 4, 5]),
    );
    let bad = nudfa(&["verify", "--program", s(&flipped), "--circuit", s(&out)]);
    assert_eq!(bad.code, 1);
    let v = json(&bad);
    assert_eq!(v["matches"], false);
    assert!(v["mismatch"].as_str().unwrap().contains('0'));

    let shape = nudfa(&[
        "ccshape",
        "--circuit",
        s(&out),
        "--shape",
        "AND(*)∘MOD(2)∘MOD(3)",
    ]);
    assert_eq!(shape.code, 0, "{}", shape.stdout);
    let wrong = nudfa(&["ccshape", "--circuit", s(&out), "--shape", "MOD(5)"]);
    assert_eq!(wrong.code, 1);

    for (input, want) in [("00", false), ("01", false), ("10", false), ("11", true)] {
        let e = nudfa(&["cceval", "--circuit", s(&out), "--input", input]);
        assert_eq!(json(&e)["value"], want, "input {input}");
    }
}

#[test]
fn verify_on_zero_inputs() {
    let dir = TempDir::new().unwrap();
    let alg = fixtures::z6mod2();
    let mut c = nudfa::circuit::AlgCircuit::new(0);
    let k = c.constant(3);
    let p = AlgProgram::new(c.with_output(k), 0, vec![], vec![3]).unwrap();
    let cc = compile_nilpotent(&alg, &p, None).unwrap();
    let prog = program_file(&dir, "const.json", &p);
    let circ = put(&dir, "const.cc.json", &serde_json::to_string(&cc).unwrap());
    let o = nudfa(&["verify", "--program", s(&prog), "--circuit", s(&circ)]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    assert_eq!(json(&o)["rows"], 1);
}

#[test]
fn fixtures_self_test() {
    let o = nudfa(&["fixtures"]);
    assert_eq!(o.code, 0);
    let rows = json(&o);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), fixtures::NAMES.len());
    assert!(rows.iter().all(|r| r["self_test"] == true));
}

#[test]
fn solve_commands() {
    let dir = TempDir::new().unwrap();
    let prog = program_file(&dir, "and2.json", &and2());
    let o = nudfa(&["solve", "progcsat", "--program", s(&prog), "--exhaustive"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o);
    assert_eq!(v["result"]["status"], "sat");
    assert_eq!(v["result"]["witness"], serde_json::json!([1, 1]));

    let sampled = nudfa(&[
        "solve",
        "progcsat",
        "--program",
        s(&prog),
        "--sample",
        "0",
        "--seed",
        "7",
    ]);
    assert_eq!(sampled.code, 0);
    let again = nudfa(&[
        "solve",
        "progcsat",
        "--program",
        s(&prog),
        "--sample",
        "0",
        "--seed",
        "7",
    ]);
    assert_eq!(sampled.stdout, again.stdout);

    // x + x = 2 over Z6mod2 has solutions 1 and 4
    let alg = fixtures::z6mod2();
    let mut l = nudfa::circuit::AlgCircuit::new(1);
    let x = l.var(0);
    let xx = l.gate(0, vec![x, x]);
    let lhs = l.with_output(xx);
    let mut r = nudfa::circuit::AlgCircuit::new(1);
    let two = r.constant(2);
    let rhs = r.with_output(two);
    let eq = EquationFile {
        algebra: "Z6mod2".into(),
        lhs: lhs.to_repr(&alg),
        rhs: rhs.to_repr(&alg),
    };
    let eqp = put(&dir, "eq.json", &serde_json::to_string(&eq).unwrap());
    let direct = json(&nudfa(&["solve", "csat", "--equation", s(&eqp)]));
    assert_eq!(direct["result"]["status"], "sat");
    assert_eq!(direct["result"]["witness"], serde_json::json!([1]));
    let reduced = json(&nudfa(&[
        "solve",
        "csat",
        "--equation",
        s(&eqp),
        "--reduce",
        "--exhaustive",
    ]));
    assert_eq!(reduced["result"]["status"], "sat");
    let a = reduced["assignment"][0].as_u64().unwrap();
    assert_eq!(2 * a % 6, 2);
    let id = json(&nudfa(&[
        "solve",
        "ceqv",
        "--equation",
        s(&eqp),
        "--meet-irreducibles",
    ]));
    assert_eq!(id["result"]["status"], "fails");
    let id2 = json(&nudfa(&[
        "solve",
        "ceqv",
        "--equation",
        s(&eqp),
        "--reduce",
        "--exhaustive",
    ]));
    assert_eq!(id2["result"]["status"], "sat");
}

#[test]
fn lattice_gadget_command() {
    let dir = TempDir::new().unwrap();
    let cnf = put(&dir, "f.cnf", "p cnf 3 2\n1 -2 0\n2 3 0\n");
    let o = nudfa(&["gadget", "lattice", "--cnf", s(&cnf)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let file: ProgramFile = serde_json::from_str(&o.stdout).unwrap();
    let lat2 = fixtures::lat2();
    let p = file.to_program(&lat2).unwrap();
    let phi = Cnf::parse_dimacs("p cnf 3 2\n1 -2 0\n2 3 0\n").unwrap();
    for (i, v) in p.truth_table(&lat2).unwrap().into_iter().enumerate() {
        assert_eq!(v, phi.eval(&bits(i, 3)));
    }
    let tp = nudfa(&[
        "gadget",
        "twoprime",
        "--algebra",
        "fixtures:Z6mod2",
        "--cnf",
        s(&cnf),
    ]);
    assert_eq!(tp.code, 1);
    assert_eq!(json(&tp)["outcome"], "failed");
}

#[test]
fn exit_codes() {
    assert_eq!(nudfa(&["--help"]).code, 0);
    assert_eq!(nudfa(&["--version"]).code, 0);
    assert_eq!(nudfa(&["frobnicate"]).code, 2);
    assert_eq!(nudfa(&["con", "--algebra", "fixtures:Nope"]).code, 2);
    assert_eq!(nudfa(&["con", "--algebra", "/no/such/file.json"]).code, 2);
    let dir = TempDir::new().unwrap();
    let junk = put(&dir, "junk.json", "{ not json");
    assert_eq!(
        nudfa(&["cceval", "--circuit", s(&junk), "--input", "0"]).code,
        2
    );
    // CSat reduction over a non-nilpotent algebra is refused
    let alg = fixtures::s3();
    let mut l = nudfa::circuit::AlgCircuit::new(1);
    let x = l.var(0);
    let lhs = l.with_output(x);
    let mut r = nudfa::circuit::AlgCircuit::new(1);
    let c = r.constant(0);
    let eq = EquationFile {
        algebra: "S3".into(),
        lhs: lhs.to_repr(&alg),
        rhs: r.with_output(c).to_repr(&alg),
    };
    let eqp = put(&dir, "eq.json", &serde_json::to_string(&eq).unwrap());
    let o = nudfa(&["solve", "csat", "--equation", s(&eqp), "--reduce"]);
    assert_eq!(o.code, 1, "{}", o.stderr);
}

#[test]
fn formats_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for name in fixtures::NAMES {
        let f = fixtures::load(name).unwrap();
        let file = AlgebraFile::from_parts(&f.algebra, f.malcev.as_ref());
        let text = serde_json::to_string(&file).unwrap();
        let (alg, d) = serde_json::from_str::<AlgebraFile>(&text)
            .unwrap()
            .into_parts()
            .unwrap();
        assert_eq!(alg.ops, f.algebra.ops);
        assert_eq!(d.is_some(), f.malcev.is_some());

        let p = random_program(&mut rng, &f.algebra, 4, 5);
        let text = serde_json::to_string(&p.to_file(&f.algebra)).unwrap();
        let back = serde_json::from_str::<ProgramFile>(&text)
            .unwrap()
            .to_program(&f.algebra)
            .unwrap();
        assert_eq!(
            back.truth_table(&f.algebra).unwrap(),
            p.truth_table(&f.algebra).unwrap()
        );
        assert_eq!(
            serde_json::to_string(&back.to_file(&f.algebra)).unwrap(),
            text
        );

        let eq = random_equation(&mut rng, &f.algebra, 2, 3);
        let file = EquationFile {
            algebra: name.to_string(),
            lhs: eq.lhs.to_repr(&f.algebra),
            rhs: eq.rhs.to_repr(&f.algebra),
        };
        let text = serde_json::to_string(&file).unwrap();
        let back: EquationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        back.to_equation(&f.algebra).unwrap();
    }
    for _ in 0..10 {
        let c = random_mod_mod(&mut rng, 5, 2, 3, 3);
        let text = serde_json::to_string(&c).unwrap();
        let back: CCircuit = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let phi = random_cnf(&mut rng, 6, 5, 3);
        assert_eq!(Cnf::parse_dimacs(&phi.to_dimacs()).unwrap(), phi);
    }
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_nonconstant_program(&mut rng, &fixtures::z6mod2(), 4, 6);
    let prog = program_file(&dir, "p.json", &p);
    for args in [
        vec!["compile", "--program", s(&prog), "--trace-sizes"],
        vec![
            "solve",
            "progcsat",
            "--program",
            s(&prog),
            "--sample",
            "5",
            "--seed",
            "3",
        ],
        vec!["con", "--algebra", "fixtures:S3"],
        vec![
            "localize",
            "--algebra",
            "fixtures:Z6mod2",
            "--lower",
            "0",
            "--upper",
            "1",
            "--through",
            "5",
        ],
    ] {
        let a = nudfa(&args);
        let b = nudfa(&args);
        assert_eq!(a.code, 0, "{args:?}: {}", a.stderr);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}
