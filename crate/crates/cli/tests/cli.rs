use std::path::Path;
use std::process::{Command, Output};

fn codedcam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codedcam"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("CODEDCAM_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = codedcam(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

const SMALL: [&str; 2] = ["--bins.count=9", "--mask.grid=15"];

fn synth_sized(root: &Path, frames: &str, width: &str, height: &str) -> String {
    let data = s(&root.join("data"));
    ok(&["synth", "--out", &data, "--frames", frames, "--width", width, "--height", height]);
    data
}

fn synth(root: &Path, frames: &str) -> String {
    synth_sized(root, frames, "96", "72")
}

#[test]
fn pipeline_writes_one_pose_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "5");
    let out = dir.path().join("run");
    let stdout = ok(&[&SMALL[..], &["pipeline", "--dataset", &data, "--out", &s(&out)]].concat());
    assert!(stdout.contains("ate_m="));
    let traj = std::fs::read_to_string(out.join("trajectory.txt")).unwrap();
    assert_eq!(traj.lines().count(), 5);
    for f in ["manifest.json", "metrics.json", "report.json", "coded/rgb.txt", "depth/depth.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn manifest_rerun_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&[&SMALL[..], &["--seed=9", "pipeline", "--dataset", &data, "--out", &s(&a)]].concat());
    let manifest = s(&a.join("manifest.json"));
    ok(&["--config", &manifest, "pipeline", "--dataset", &data, "--out", &s(&b)]);
    for f in ["trajectory.txt", "metrics.json", "report.json", "coded/rgb/000000.pfm", "depth/depth/000002.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stagewise_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3");
    let p = |n: &str| s(&dir.path().join(n));
    ok(&[&SMALL[..], &["render", "--dataset", &data, "--out", &p("coded")]].concat());
    ok(&[&SMALL[..], &["depth", "--coded", &p("coded"), "--out", &p("depth"), "--dataset", &data]].concat());
    ok(&[&SMALL[..], &["vo", "--coded", &p("coded"), "--depth", &p("depth"), "--out", &p("vo")]].concat());
    let traj = dir.path().join("vo/trajectory.txt");
    assert_eq!(std::fs::read_to_string(&traj).unwrap().lines().count(), 3);
    let gt = format!("{data}/groundtruth.txt");
    let stdout = ok(&["ate", "--est", &s(&traj), "--gt", &gt]);
    let ate: f64 = stdout.trim().rsplit('=').next().unwrap().trim().parse().unwrap();
    assert!(ate < 0.05, "{stdout}");
    ok(&[&SMALL[..], &["psf", "--out", &p("psf")]].concat());
    for f in ["psf/psf/index.txt", "psf/mask.txt", "psf/bins.txt", "psf/manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}

#[test]
fn ate_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "4");
    let gt = format!("{data}/groundtruth.txt");
    let stdout = ok(&["ate", "--est", &gt, "--gt", &gt]);
    assert!(stdout.contains("0.000000"), "{stdout}");
}

#[test]
fn ablation_over_mask_sizes_has_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_sized(dir.path(), "4", "160", "120");
    let out = dir.path().join("abl");
    let stdout = ok(&["--bins.count=9", "ablate", "--dataset", &data, "--axis", "mask_size", "--values", "11,23,51", "--out", &s(&out)]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r["is_base"] == true).count(), 1);
    assert!(stdout.lines().count() >= 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(&dir.path().join("x"));
    // invalid configuration
    let r = codedcam(&["--camera.f_number=-1", "psf", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("camera.f_number"));
    let r = codedcam(&["--camera.nope=1", "psf", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    // bad command line
    assert_eq!(codedcam(&["frobnicate"]).status.code(), Some(2));
    // missing input is a runtime failure
    let missing = s(&dir.path().join("missing"));
    assert_eq!(codedcam(&["pipeline", "--dataset", &missing, "--out", &out]).status.code(), Some(1));
    // config file syntax errors name the line
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nbins.count=abc\n").unwrap();
    let r = codedcam(&["--config", &s(&cfg), "psf", "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 2"));
}
