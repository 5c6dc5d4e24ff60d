use std::path::Path;
use std::process::{Command, Output};

use hetnet_secrecy::harness::{read_csv, CSV_HEADER};

fn stb(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stb")).args(args).current_dir(dir).output().expect("spawn stb")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = "[network]\np_f_db = 40\n[experiment]\nschemes = [\"stb_om\", \"stb_smf\"]\ntrials = 2\nseed = 9\n";

#[test]
fn run_writes_the_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    let out = stb(&["run", "--config", "exp.toml", "--sweep", "p_m_db=30:40:10", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert!(!text.contains('\r'));
    let table = read_csv(&dir.path().join("r.csv")).unwrap();
    assert_eq!(table.rows.len(), 2 * 2 * 2);
    assert!(table.rows.iter().all(|r| r.status == "ok" && r.secrecy_rate_bits > 0.0));
    assert!(table.rows.iter().filter(|r| r.scheme == "stb_om").all(|r| r.sinr_fu_mean.is_nan()));
    assert!(table.rows.iter().filter(|r| r.scheme == "stb_smf").all(|r| r.sinr_fu_mean > 0.0));
}

#[test]
fn untimed_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    let a = stb(&["--threads", "1", "run", "--config", "exp.toml", "--sweep", "p_m_db=35", "--no-timing"], dir.path());
    let b = stb(&["--threads", "3", "run", "--config", "exp.toml", "--sweep", "p_m_db=35", "--no-timing"], dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "exp.toml", SMALL);
    let out = stb(
        &["run", "--config", "exp.toml", "--sweep", "p_f_db=20,30", "--schemes", "stb_smf", "--trials", "1", "--seed", "4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let table = hetnet_secrecy::harness::read_csv_from(out.stdout.as_slice()).unwrap();
    let keys: Vec<(String, String, f64)> =
        table.rows.iter().map(|r| (r.scheme.clone(), r.sweep_param.clone(), r.sweep_value_db)).collect();
    assert_eq!(
        keys,
        vec![("stb_smf".into(), "p_f_db".into(), 20.0), ("stb_smf".into(), "p_f_db".into(), 30.0)]
    );
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "[network]\nn_m = \"ten\"\n");
    write(dir.path(), "dims.toml", "[network]\nn_m = 2\nm_users = 2\n");
    write(dir.path(), "ok.toml", SMALL);
    let cases: [&[&str]; 6] = [
        &["run", "--config", "missing.toml"],
        &["run", "--config", "bad.toml"],
        &["run", "--config", "dims.toml"],
        &["run", "--config", "ok.toml", "--schemes", "nope"],
        &["run", "--config", "ok.toml", "--sweep", "p_m_db=45:30:3"],
        &["figure", "fig99"],
    ];
    for args in cases {
        assert_eq!(stb(args, dir.path()).status.code(), Some(1), "{args:?}");
    }
    assert_eq!(stb(&["bogus"], dir.path()).status.code(), Some(1));
}

#[test]
fn exhausted_error_budget_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // FU targets no FBS can meet: every STB-JMF row fails
    write(
        dir.path(),
        "hard.toml",
        "[network]\np_f_db = -30\ngamma_fu = 50.0\n[experiment]\nschemes = [\"stb_jmf\"]\ntrials = 1\n",
    );
    let out = stb(&["run", "--config", "hard.toml", "--sweep", "p_m_db=30"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let table = hetnet_secrecy::harness::read_csv_from(out.stdout.as_slice()).unwrap();
    assert_eq!(table.rows[0].status, "qos_infeasible");
    assert!(table.rows[0].secrecy_rate_bits.is_nan());
}

#[test]
fn verify_passes_on_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = stb(&["verify", "--instances", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn fig3_emits_trace_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = stb(&["figure", "fig3", "--trials", "1", "--no-timing"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let table = hetnet_secrecy::harness::read_csv_from(out.stdout.as_slice()).unwrap();
    assert!(table.rows.iter().all(|r| r.status == "trace" && r.scheme == "stb_om"));
    let values: Vec<f64> = table.rows.iter().filter(|r| r.iterations == 0).map(|r| r.sweep_value_db).collect();
    assert_eq!(values, vec![30.0, 40.0, 45.0]);
}
