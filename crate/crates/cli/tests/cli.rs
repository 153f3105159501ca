use std::process::Command;

fn hpgeo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hpgeo"))
}

#[test]
fn mesh_writes_svg_with_one_polygon_per_element() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpgeo()
        .args(["mesh", "--domain", "lshape", "--p", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let elements: usize = stdout.split_whitespace().next().unwrap().parse().unwrap();
    let svg = std::fs::read_to_string(dir.path().join("mesh_lshape_p2.svg")).unwrap();
    assert_eq!(svg.matches("<polygon").count(), elements);
}

#[test]
fn study_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = hpgeo()
        .args(["study", "--manufactured", "--eps", "0.1,0.01", "--pmax", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("square.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("domain,eps,sigma,p,N,error,iters,seconds\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 4);
    assert!(dir.path().join("square_convergence.svg").exists());
    assert!(dir.path().join("mesh_square_p4.svg").exists());

    let fit = hpgeo().arg("fit").arg(&csv).output().unwrap();
    assert!(fit.status.success());
    let lines = String::from_utf8(fit.stdout).unwrap();
    assert_eq!(lines.lines().count(), 2);
    for l in lines.lines() {
        let b: f64 = l.split(",b=").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert!(b > 0.0, "{l}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(&cfg, "domain = \"slit\"\neps = [0.5]\np_max = 2\nreference_offset = 1\n").unwrap();
    let out = hpgeo()
        .args(["study", "--config"])
        .arg(&cfg)
        .args(["--eps", "0.25", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("slit.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("slit,0.25,0.25,")));
}

#[test]
fn invalid_input_exits_with_2() {
    let out = hpgeo().args(["solve", "--eps", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hpgeo().args(["mesh", "--sigma", "1.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = hpgeo().args(["solve", "--domain", "/nonexistent/domain.toml"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn solve_reports_a_row() {
    let out = hpgeo().args(["solve", "--manufactured", "--eps", "0.1", "--p", "3"]).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("p=3") && s.contains("error="), "{s}");
}
