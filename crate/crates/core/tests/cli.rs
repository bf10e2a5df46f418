//! End-to-end tests of the command-line driver: each test runs the real
//! binary against files in a temp directory and checks outputs and exit
//! codes.

use mpocert::formats::{
    load_json, save_json, EncoderFile, HmmFile, MpoFile, PcpFile, SearchFile, SolutionFile,
    VerdictFile,
};
use mpocert::hmm::Hmm;
use mpocert::mpo::MpoInstance;
use mpocert::pcp::PcpInstance;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpocert"))
}

fn run(cmd: &mut Command) -> (i32, String) {
    let output = cmd.output().expect("binary runs");
    let code = output.status.code().expect("no signal");
    (code, String::from_utf8_lossy(&output.stdout).into_owned())
}

fn write_classic(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("classic.pcp.json");
    save_json(&path, &PcpFile::from_instance(&PcpInstance::classic())).unwrap();
    path
}

#[test]
fn compile_is_deterministic_and_matches_known_shape() {
    let dir = tempfile::tempdir().unwrap();
    let pcp = write_classic(dir.path());
    let mpo_path = dir.path().join("classic.mpo.json");

    let (code, stdout) = run(bin()
        .args(["compile", "--pcp"])
        .arg(&pcp)
        .arg("--out-mpo")
        .arg(&mpo_path));
    assert_eq!(code, 0, "compile failed: {stdout}");
    assert!(stdout.contains("bond_dim=18"), "stdout: {stdout}");

    let mpo_file: MpoFile = load_json(&mpo_path).unwrap();
    let mpo = mpo_file.to_instance().unwrap();
    assert_eq!(mpo.physical_dim(), 2);
    assert_eq!(mpo.bond_dim(), 18);
    assert!(mpo.is_diagonal());
    assert!(mpo_file.manifest.is_some());

    let encoder_path = dir.path().join("classic.mpo.encoder.json");
    let encoder_file: EncoderFile = load_json(&encoder_path).unwrap();
    assert_eq!(encoder_file.codes, vec![vec![1, 2, 2], vec![2, 1, 2], vec![2, 2, 1]]);

    // Same inputs, same bytes.
    let rerun_path = dir.path().join("again.mpo.json");
    let (code, _) = run(bin()
        .args(["compile", "--pcp"])
        .arg(&pcp)
        .arg("--out-mpo")
        .arg(&rerun_path));
    assert_eq!(code, 0);
    let first = std::fs::read(&mpo_path).unwrap();
    let second = std::fs::read(&rerun_path).unwrap();
    assert_eq!(first, second);
}

#[test]
fn check_and_search_find_the_first_violation() {
    let dir = tempfile::tempdir().unwrap();
    let pcp = write_classic(dir.path());
    let mpo_path = dir.path().join("classic.mpo.json");
    run(bin()
        .args(["compile", "--pcp"])
        .arg(&pcp)
        .arg("--out-mpo")
        .arg(&mpo_path));

    let verdict_path = dir.path().join("verdict.json");
    let (code, stdout) = run(bin()
        .args(["check", "--mpo"])
        .arg(&mpo_path)
        .args(["--n", "3", "--out"])
        .arg(&verdict_path));
    assert_eq!(code, 0, "check failed: {stdout}");
    let verdict: VerdictFile = load_json(&verdict_path).unwrap();
    assert_eq!(verdict.verdict.decision, "not_positive");
    assert_eq!(verdict.verdict.min_value.kind, "exact");
    assert_eq!(verdict.verdict.min_value.value, "-1");
    assert_eq!(verdict.verdict.witness_word.as_deref(), Some(&[2, 2, 2][..]));

    // Size 2 is fine, size 3 is the first violation.
    let search_path = dir.path().join("search.json");
    let (code, stdout) = run(bin()
        .args(["search", "--mpo"])
        .arg(&mpo_path)
        .args(["--n-max", "4", "--out"])
        .arg(&search_path));
    assert_eq!(code, 0);
    assert!(stdout.contains("status=violation n=3"), "stdout: {stdout}");
    let search: SearchFile = load_json(&search_path).unwrap();
    assert_eq!(search.status, "violation");
    assert_eq!(search.violation.unwrap().n, 3);
}

#[test]
fn pcp_solver_reports_solution_none_and_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let pcp = write_classic(dir.path());
    let out = dir.path().join("solution.json");

    let (code, stdout) = run(bin()
        .args(["pcp", "--pcp"])
        .arg(&pcp)
        .args(["--n", "4", "--out"])
        .arg(&out));
    assert_eq!(code, 0);
    assert!(stdout.contains("status=solution"), "stdout: {stdout}");
    let solution: SolutionFile = load_json(&out).unwrap();
    assert_eq!(solution.witness.as_deref(), Some(&[3, 2, 3, 1][..]));

    let (code, stdout) = run(bin().args(["pcp", "--pcp"]).arg(&pcp).args(["--n", "2"]));
    assert_eq!(code, 0);
    assert!(stdout.contains("status=none"), "stdout: {stdout}");

    // A starved node budget cannot decide and must say so.
    let (code, stdout) = run(bin()
        .env("MPOCERT_PCP_BUDGET", "3")
        .args(["pcp", "--pcp"])
        .arg(&pcp)
        .args(["--n", "6"]));
    assert_eq!(code, 2);
    assert!(stdout.contains("status=unknown"), "stdout: {stdout}");
}

#[test]
fn hmm_command_evaluates_word_probability() {
    let dir = tempfile::tempdir().unwrap();
    let hmm_path = dir.path().join("iid.hmm.json");
    save_json(&hmm_path, &HmmFile::from_hmm(&Hmm::uniform_iid(2))).unwrap();

    let (code, stdout) = run(bin()
        .args(["hmm", "--hmm"])
        .arg(&hmm_path)
        .args(["--word", "121"]));
    assert_eq!(code, 0);
    assert!(stdout.contains("prob=1.25000000000000000e-1"), "stdout: {stdout}");
    assert!(stdout.contains("stationary=true"), "stdout: {stdout}");
}

#[test]
fn probe_without_detection_stays_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let mpo_path = dir.path().join("identity.mpo.json");
    save_json(&mpo_path, &MpoFile::from_instance(&MpoInstance::identity(2))).unwrap();

    let (code, stdout) = run(bin()
        .args(["check", "--mpo"])
        .arg(&mpo_path)
        .args(["--n", "4", "--mode", "probe", "--chi", "1,2", "--restarts", "2"]));
    assert_eq!(code, 2, "stdout: {stdout}");
    assert!(stdout.contains("decision=inconclusive"), "stdout: {stdout}");
}

#[test]
fn errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();

    let (code, _) = run(bin().args(["pcp", "--pcp"]).arg(&bad).args(["--n", "2"]));
    assert_eq!(code, 1);

    let (code, _) = run(bin().args(["check", "--no-such-flag"]));
    assert_eq!(code, 1);

    let pcp = write_classic(dir.path());
    let (code, _) = run(bin()
        .args(["pcp", "--pcp"])
        .arg(&pcp)
        .args(["--n", "2", "--n-max", "3"]));
    assert_eq!(code, 1);

    // Schema tags are checked, not just JSON shape.
    let (code, _) = run(bin().args(["check", "--mpo"]).arg(&pcp).args(["--n", "2"]));
    assert_eq!(code, 1);
}
