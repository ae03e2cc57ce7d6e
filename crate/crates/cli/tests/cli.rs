use std::path::Path;
use std::process::{Command, Output};

fn flickersim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flickersim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn pst_line(out: &Output) -> f64 {
    text(&out.stdout)
        .lines()
        .find_map(|l| l.strip_prefix("pst "))
        .expect("pst line")
        .trim()
        .parse()
        .unwrap()
}

// the 0.05 Hz high-pass startup transient needs about 20 s to die out
const SHORT: [&str; 4] = ["--window", "30", "--settle", "30"];

#[test]
fn measure_pure_carrier_above_three_fundamentals() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["measure", "--mc", "1.0", "--shape", "sin", "--fm", "500", "--depth", "5"];
    args.extend(SHORT);
    let out = flickersim(&args, dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(pst_line(&out) < 0.05);
    let stdout = text(&out.stdout);
    assert!(stdout.contains("below_floor true"));
    assert!(stdout.contains("decimation 4"));
}

#[test]
fn measure_zero_depth_and_pinst_dump() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["measure", "--mc", "0.8", "--shape", "rect", "--fm", "208.8", "--depth", "0"];
    args.extend(SHORT);
    args.extend(["--dump-pinst", "--out", "dump"]);
    let out = flickersim(&args, dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(pst_line(&out) < 0.05);
    let trace = std::fs::read_to_string(dir.path().join("dump/p_inst.csv")).unwrap();
    assert!(trace.starts_with("time_s,p_inst\n"));
    assert_eq!(trace.lines().count(), 1 + 30 * 500);
}

#[test]
fn invalid_parameters_exit_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = flickersim(&["measure", "--mc", "1.5", "--fm", "8.8", "--depth", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("m_c"), "{}", text(&out.stderr));

    let out = flickersim(&["measure", "--shape", "saw", "--fm", "8.8", "--depth", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("shape"));

    let out = flickersim(&["measure", "--fm", "8.8", "--depth", "250"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("depth"));
}

#[test]
fn sweep_writes_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("mini.plan");
    std::fs::write(
        &plan,
        "stage = 1\nshapes = [\"sin\", \"rect\"]\nfm_grid = [8.8, 208.8]\ndepth_grid = [5.0]\nrecord_wall_time = false\n\n[[carriers]]\nm_c = 0.8\n",
    )
    .unwrap();
    let mut args = vec!["sweep", "mini.plan", "--out", "out", "--workers", "1"];
    args.extend(SHORT);
    let out = flickersim(&args, dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let o = dir.path().join("out");
    for f in ["results.csv", "checkpoint.csv", "summary.txt", "summary.json", "run_meta.json", "mini_mc0p8_depth5.svg"] {
        assert!(o.join(f).exists(), "{f} missing");
    }
    let first = std::fs::read(o.join("results.csv")).unwrap();
    assert_eq!(text(&first).lines().count(), 5);

    let again = flickersim(&args, dir.path());
    assert!(again.status.success());
    assert!(text(&again.stderr).contains("(4 resumed)"), "{}", text(&again.stderr));
    assert_eq!(std::fs::read(o.join("results.csv")).unwrap(), first);
    // nothing escapes the output directory
    let mut entries: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    entries.sort();
    assert_eq!(entries, vec!["mini.plan", "out"]);
}

#[test]
fn sweep_plan_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.plan"), "stage = 1\nshapes = []\n[[carriers]]\nm_c = 0.8\n").unwrap();
    let out = flickersim(&["sweep", "empty.plan"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("grid is empty"));

    std::fs::write(dir.path().join("typo.plan"), "stage = 1\nshapez = [\"sin\"]\n").unwrap();
    assert_eq!(flickersim(&["sweep", "typo.plan"], dir.path()).status.code(), Some(2));
}

#[test]
fn validate_quick_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = flickersim(&["validate", "--quick"], dir.path());
    assert!(a.status.success(), "{}", text(&a.stdout));
    let b = flickersim(&["validate", "--quick"], dir.path());
    assert_eq!(a.stdout, b.stdout);
    assert!(text(&a.stdout).contains("PASS weighting peak frequency"));
}
