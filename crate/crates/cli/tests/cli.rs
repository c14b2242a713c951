use std::path::Path;
use std::process::{Command, Output};

use segprior::grid::write_pgm_file;
use segprior::BinaryMask;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segprior"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_writes_items_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    ok(&[
        "generate",
        "--family",
        "two-tissue",
        "--items",
        "3",
        "--height",
        "24",
        "--width",
        "24",
        "--out",
        p(&out),
    ]);
    for i in 0..3 {
        assert!(out.join(format!("item{i:04}_logits.psg")).is_file());
        assert!(out.join(format!("item{i:04}_truth0.pgm")).is_file());
        assert!(out.join(format!("item{i:04}_truth1.pgm")).is_file());
    }
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 1 + 3 * 2);
}

#[test]
fn refine_recovers_a_generated_blob() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "generate",
        "--items",
        "1",
        "--height",
        "24",
        "--width",
        "24",
        "--seed",
        "3",
        "--out",
        p(&data),
    ]);
    let res = dir.path().join("res");
    let stdout = ok(&[
        "refine",
        "--logits",
        p(&data.join("item0000_logits.psg")),
        "--truth",
        p(&data.join("item0000_truth0.pgm")),
        "--loss",
        "dice+size",
        "--epochs",
        "30",
        "--lr",
        "20",
        "--out",
        p(&res),
    ]);
    assert!(stdout.starts_with("final dice"));
    assert!(res.join("pred0.pgm").is_file() && res.join("probabilities.psg").is_file());
    let traj = std::fs::read_to_string(res.join("trajectory.csv")).unwrap();
    assert!(traj.lines().count() > 1);

    let score = ok(&[
        "score",
        p(&res.join("pred0.pgm")),
        p(&data.join("item0000_truth0.pgm")),
    ]);
    let row: Vec<&str> = score.lines().nth(1).unwrap().split(',').collect();
    let dsc: f64 = row[2].parse().unwrap();
    assert!(dsc > 0.8, "{dsc}");
}

#[test]
fn score_reports_perfect_and_undefined_cases() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pgm");
    let empty = dir.path().join("e.pgm");
    write_pgm_file(&a, &BinaryMask::from_rows(&[[0, 1, 1], [0, 0, 0]]).unwrap()).unwrap();
    write_pgm_file(
        &empty,
        &BinaryMask::from_rows(&[[0, 0, 0], [0, 0, 0]]).unwrap(),
    )
    .unwrap();
    let out = ok(&["score", p(&a), p(&a), p(&empty), p(&a)]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "pred,truth,dsc,hd,cc_error");
    assert!(lines[1].ends_with(",1.000000,0.000000,0"), "{}", lines[1]);
    assert!(lines[2].ends_with(",0.000000,undefined,1"), "{}", lines[2]);
}

#[test]
fn score_rejects_unpaired_masks() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pgm");
    write_pgm_file(&a, &BinaryMask::from_rows(&[[1]]).unwrap()).unwrap();
    let out = run(&["score", p(&a), p(&a), p(&a)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("pairs"));
}

#[test]
fn edt_prints_plain_and_signed_grids() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.pgm");
    write_pgm_file(&m, &BinaryMask::from_rows(&[[1, 0, 0]]).unwrap()).unwrap();
    assert_eq!(ok(&["edt", p(&m)]), "0.000000,1.000000,2.000000\n");
    assert_eq!(
        ok(&["edt", "--signed", p(&m)]),
        "-1.000000,1.000000,2.000000\n"
    );
    let csv = dir.path().join("d.csv");
    ok(&["edt", p(&m), "--out", p(&csv)]);
    assert_eq!(
        std::fs::read_to_string(csv).unwrap(),
        "0.000000,1.000000,2.000000\n"
    );
}

#[test]
fn edt_of_an_empty_mask_fails() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.pgm");
    write_pgm_file(&m, &BinaryMask::from_rows(&[[0, 0]]).unwrap()).unwrap();
    assert!(!run(&["edt", p(&m)]).status.success());
}

#[test]
fn bench_writes_tables_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(
        &plan,
        "[dataset]\nfamily = blob\nheight = 24\nwidth = 24\nitems = 6\n\n[refine]\nepochs = 5\nlearning_rate = 20\n",
    )
    .unwrap();
    let out = dir.path().join("report");
    let text = ok(&[
        "bench",
        p(&plan),
        "--out",
        p(&out),
        "--runs",
        "1",
        "--loss",
        "dice,dice+boundary",
        "--sequential",
    ]);
    assert!(text.contains("dice+boundary"));
    let dsc = std::fs::read_to_string(out.join("dsc.csv")).unwrap();
    assert_eq!(dsc.lines().next().unwrap(), "structure,dice,dice+boundary");
}

#[test]
fn bench_needs_an_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(&plan, "[bench]\nruns = 1\n").unwrap();
    let out = run(&["bench", p(&plan)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn bench_reports_the_bad_plan_line() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(&plan, "[bench]\nruns = 1\nbogus = 2\n").unwrap();
    let out = run(&["bench", p(&plan), "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 3"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_loss_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(&plan, "").unwrap();
    let out = run(&[
        "bench",
        p(&plan),
        "--out",
        p(dir.path()),
        "--loss",
        "dice+magic",
    ]);
    assert!(!out.status.success());
}
