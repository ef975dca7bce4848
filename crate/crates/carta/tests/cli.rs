use std::fs;
use std::process::Command;

use carta::builtin::builtin_problem;
use carta::trajectory_file::{load_trajectory, save_trajectory};
use tempfile::tempdir;

fn carta(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_carta")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn plan_then_validate() {
    let dir = tempdir().unwrap();
    let traj = dir.path().join("t.csv");
    let log = dir.path().join("log.csv");
    let (code, _, err) = carta(&[
        "plan", "--problem", "panda-circle", "--k", "40", "--clock", "tick",
        "--out", traj.to_str().unwrap(), "--log", log.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let log_text = fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("elapsed_s,length_rad,length_m,max_pos_err_m,max_rot_err_rad,valid\n"));
    assert!(log_text.contains(",true"));

    let (code, _, err) = carta(&["validate", "--problem", "panda-circle", "--traj", traj.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    let p = builtin_problem("panda-circle").unwrap();
    let mut t = load_trajectory(&traj, &p.chain).unwrap();
    t.configs_mut()[50][0] += 8f64.to_radians();
    let bad = dir.path().join("bad.csv");
    save_trajectory(&bad, &p.chain, &t).unwrap();
    let (code, out, err) = carta(&["validate", "--problem", "panda-circle", "--traj", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    let text = format!("{out}{err}");
    assert!(text.contains("step"), "{text}");
}

#[test]
fn make_path_feeds_a_custom_problem() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("line.csv");
    let (code, _, err) = carta(&[
        "make-path", "--kind", "line", "--n", "30", "--center", "0.45,-0.1,0.3", "--rpy", "3.14159265358979,0,0",
        "--offset", "0,0.2,0", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let traj = dir.path().join("t.csv");
    let (code, _, err) = carta(&[
        "plan", "--chain", "panda", "--path", path.to_str().unwrap(), "--k", "30", "--clock", "tick",
        "--out", traj.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (code, _, _) = carta(&["validate", "--chain", "panda", "--path", path.to_str().unwrap(), "--traj", traj.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn bench_writes_a_metrics_table() {
    let dir = tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    fs::write(
        &suite,
        "format = 1\nrepeats = 2\n[[problem]]\nname = \"small\"\nchain = \"panda\"\n\
         path_spec = { kind = \"circle\", radius = 0.1, center = [0.5, 0.0, 0.4], rpy = [3.141592653589793, 0.0, 0.0], plane = \"xy\", n = 30 }\n\
         params = { k = 30 }\n",
    )
    .unwrap();
    let table = dir.path().join("m.csv");
    let (code, _, err) = carta(&[
        "bench", "--suite", suite.to_str().unwrap(), "--clock", "tick", "--out-table", table.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&table).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("small,2,"), "{row}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(carta(&["plan", "--bogus"]).0, 2);
    assert_eq!(carta(&["plan", "--problem", "no-such-problem"]).0, 2);
    assert_eq!(carta(&[]).0, 2);
    let (code, out, _) = carta(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("make-path"));
}
