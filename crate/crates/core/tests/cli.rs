use std::fs;
use std::path::Path;
use std::process::Command;

use fpcex::cli::{run, CSV_HEADER, EXIT_ERROR, EXIT_SAT, EXIT_TIMEOUT, EXIT_UNSAT};
use fpcex::fpbits::parse_hex;
use fpcex::model::derive;
use fpcex::parser::parse;
use fpcex::propagate::{concrete_eval, EvalVerdict};

fn fpcex(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("fpcex").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, src: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, src).unwrap();
    p.to_string_lossy().into_owned()
}

const SAT_SRC: &str = "# expect: SAT\ninput x in [0, 100]; input y in [0, 100]; z = x * y; assume(x > 3); assert(z < 1000 || y < 50);\n";
const UNSAT_SRC: &str = "# expect: UNSAT\ninput x in [-10, 10]; assume(x >= 2); assume(x <= 1); assert(x > 0);\n";

#[test]
fn exit_codes_follow_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let sat = write(dir.path(), "sat.fpv", SAT_SRC);
    let unsat = write(dir.path(), "unsat.fpv", UNSAT_SRC);
    let (code, out, _) = fpcex(&[&sat]);
    assert_eq!(code, EXIT_SAT, "{out}");
    assert!(out.starts_with("SAT sat strategy=globalocc features=diversify"), "{out}");
    assert!(out.contains(" witness x=0x"), "{out}");
    let (code, out, _) = fpcex(&["--strategy", "lex", "--restrict", &unsat]);
    assert_eq!(code, EXIT_UNSAT);
    assert!(out.starts_with("UNSAT unsat strategy=lex features=restrict+diversify nodes=0"), "{out}");
    let f23 = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/f23.fpv");
    let (code, out, _) = fpcex(&["--strategy", "lex", "--diversify", "0", "--nodes", "50", f23.to_str().unwrap()]);
    assert_eq!(code, EXIT_TIMEOUT, "{out}");
    assert!(out.contains("nodes=50 "), "{out}");
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = fpcex(&["/nonexistent/nothing.fpv"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("nothing.fpv"), "{err}");
    let bad = write(dir.path(), "bad.fpv", "input x in [0, 1];\nassert(x < );\n");
    let (code, _, err) = fpcex(&[&bad]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("bad.fpv:2:"), "{err}");
    let ok = write(dir.path(), "ok.fpv", SAT_SRC);
    assert_eq!(fpcex(&["--strategy", "fastest", &ok]).0, EXIT_ERROR);
    assert_eq!(fpcex(&["--timeout", "-1", &ok]).0, EXIT_ERROR);
    assert_eq!(fpcex(&[]).0, EXIT_ERROR);
    assert_eq!(fpcex(&["--help"]).0, 0);
}

#[test]
fn strategy_names_are_case_insensitive() {
    let dir = tempfile::tempdir().unwrap();
    let sat = write(dir.path(), "sat.fpv", SAT_SRC);
    for name in ["width", "CARD", "Density", "absorption", "lex", "degree", "localocc", "GlobalOcc", "maxDens"] {
        assert_eq!(fpcex(&["--strategy", name, &sat]).0, EXIT_SAT, "{name}");
    }
}

#[test]
fn inspect_prints_the_model() {
    let f23 = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/f23.fpv");
    let (code, out, _) = fpcex(&["--inspect", f23.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("X (6 variables):"), "{out}");
    assert!(out.contains("I = {x, y} (|I| = 2)"), "{out}");
    assert!(out.contains("disjuncts: 1"), "{out}");
    let dir = tempfile::tempdir().unwrap();
    let one = write(dir.path(), "one.fpv", "input x in [0, 4]; y = x * x; assert(y != 2);");
    let (_, out, _) = fpcex(&["--inspect", &one]);
    assert!(out.contains("|I| = 1"), "{out}");
    assert!(out.contains("note:"), "{out}");
}

#[test]
fn csv_witness_reparses_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let sat = write(dir.path(), "sat.fpv", SAT_SRC);
    let csv_path = dir.path().join("run.csv");
    let args = ["--strategy", "density", "--csv", csv_path.to_str().unwrap(), &sat];
    assert_eq!(fpcex(&args).0, EXIT_SAT);
    let first = fs::read_to_string(&csv_path).unwrap();
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let row = rd.records().next().unwrap().unwrap();
    assert_eq!(&row[3], "SAT");
    let inputs: Vec<f64> = row[8]
        .split(';')
        .map(|kv| parse_hex(kv.split_once('=').unwrap().1).unwrap())
        .collect();
    let ds = derive(&parse(SAT_SRC).unwrap()).unwrap();
    assert!(ds.models.iter().any(|m| concrete_eval(m, &inputs) == EvalVerdict::Counterexample));
    // every column but t_s is stable across runs
    assert_eq!(fpcex(&args).0, EXIT_SAT);
    let second = fs::read_to_string(&csv_path).unwrap();
    let strip = |s: &str| -> Vec<String> {
        s.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(4);
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn binary_reports_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let unsat = write(dir.path(), "unsat.fpv", UNSAT_SRC);
    let st = Command::new(env!("CARGO_BIN_EXE_fpcex")).arg(&unsat).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_UNSAT));
    let st = Command::new(env!("CARGO_BIN_EXE_fpcex")).arg("missing.fpv").output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_ERROR));
}

#[test]
fn bench_writes_run_and_summary_csv() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    fs::create_dir(&suite).unwrap();
    write(&suite, "a_sat.fpv", SAT_SRC);
    write(&suite, "b_unsat.fpv", UNSAT_SRC);
    let out = dir.path().join("report.csv");
    let (code, text, err) = fpcex(&[
        "bench",
        "--dir",
        suite.to_str().unwrap(),
        "--timeout",
        "5",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(text.contains("restrict+diversify"), "{text}");
    assert!(text.contains("a_sat: |I| = 2, |X| = 3"), "{text}");
    let runs = fs::read_to_string(&out).unwrap();
    assert_eq!(runs.lines().count(), 1 + 2 * 32);
    assert!(dir.path().join("report.summary.csv").exists());
    // a wrong annotation is reported and fails the run
    write(&suite, "c_wrong.fpv", &UNSAT_SRC.replace("expect: UNSAT", "expect: SAT"));
    let (code, text, _) = fpcex(&["bench", "--dir", suite.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_ERROR);
    assert!(text.contains("PROBLEM: c_wrong"), "{text}");
}
