use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SCENE: &str = "[bounds]\ncenter = 0, 0, 0\nside = 0.36\n[scene]\nkind = points\npoint = 0.02, -0.03, 0.01\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmcw-recon")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn with_scene() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scene.cfg"), SCENE).unwrap();
    dir
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = run(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("reconstruct"));
    assert_eq!(code(&run(dir.path(), &[])), 1);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(dir.path(), &["simulate", "--scene", "x.cfg"])), 1);
    assert_eq!(code(&run(dir.path(), &["reconstruct", "--dataset", "d", "--out", "o", "--field", "mesh"])), 1);
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fmcw-recon"))
        .current_dir(dir.path())
        .env("FMCW_RECON_THREADS", "zero")
        .args(["gradcheck"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("FMCW_RECON_THREADS"));
}

#[test]
fn simulate_backproject_evaluate() {
    let dir = with_scene();
    let p = dir.path();
    let sim = run(p, &["simulate", "--scene", "scene.cfg", "--out", "data.bin"]);
    assert_eq!(code(&sim), 0, "{}", stderr(&sim));
    assert_eq!(String::from_utf8_lossy(&sim.stdout).trim(), "poses 360 K 16");

    let bp = run(p, &["backproject", "--dataset", "data.bin", "--resolution", "24", "--out", "bp"]);
    assert_eq!(code(&bp), 0, "{}", stderr(&bp));
    for f in ["volume.raw", "volume.raw.hdr", "volume.ply", "volume_z.pgm"] {
        assert!(p.join("bp").join(f).is_file(), "{f}");
    }
    assert_eq!(fs::metadata(p.join("bp/volume.raw")).unwrap().len(), 4 * 24 * 24 * 24);
    assert!(fs::read_to_string(p.join("bp/volume.ply")).unwrap().starts_with("ply\n"));

    for _ in 0..2 {
        let ev = run(p, &["evaluate", "--pred", "bp/volume.raw", "--gt", "scene.cfg", "--out", "m.csv"]);
        assert_eq!(code(&ev), 0, "{}", stderr(&ev));
    }
    let mut reader = csv::Reader::from_path(p.join("m.csv")).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, ["iou", "chamfer", "hausdorff", "psnr", "ssim"]);
    let rows: Vec<Vec<f64>> =
        reader.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
    let (iou, chamfer) = (rows[0][0], rows[0][1]);
    assert!((0.0..=1.0).contains(&iou));
    // A point target images to a blob a few voxels (15 mm) across.
    assert!(chamfer > 0.0 && chamfer < 0.05, "{chamfer}");
}

#[test]
fn reconstruct_writes_history() {
    let dir = with_scene();
    let p = dir.path();
    fs::write(p.join("train.cfg"), "[train]\niterations = 12\n").unwrap();
    assert_eq!(code(&run(p, &["simulate", "--scene", "scene.cfg", "--out", "data.bin"])), 0);
    let out = run(
        p,
        &["reconstruct", "--dataset", "data.bin", "--field", "voxel:16", "--train", "train.cfg", "--out", "rec"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(p.join("rec/history.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().get(0), Some("step"));
    assert_eq!(reader.records().count(), 12);
    assert!(String::from_utf8_lossy(&out.stdout).contains("method spectral steps 12"));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = with_scene();
    let p = dir.path();
    fs::write(p.join("junk.bin"), b"not a dataset").unwrap();
    let out = run(p, &["backproject", "--dataset", "junk.bin", "--out", "bp"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad magic"));

    assert_eq!(code(&run(p, &["backproject", "--dataset", "missing.bin", "--out", "bp"])), 2);

    fs::write(p.join("bad.cfg"), "[bounds]\nside = 0.36\n[scene]\nkind = points\npoint = 0.1, oops, 0\n").unwrap();
    let out = run(p, &["simulate", "--scene", "bad.cfg", "--out", "d.bin"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(":5:"), "{}", stderr(&out));

    fs::write(p.join("far.cfg"), "[bounds]\nside = 0.36\n[scene]\nkind = points\npoint = 0.5, 0, 0\n").unwrap();
    assert_eq!(code(&run(p, &["simulate", "--scene", "far.cfg", "--out", "d.bin"])), 2);

    assert_eq!(code(&run(p, &["simulate", "--scene", "scene.cfg", "--out", "data.bin"])), 0);
    assert_eq!(code(&run(p, &["backproject", "--dataset", "data.bin", "--resolution", "8", "--out", "bp"])), 0);
    fs::write(p.join("moved.cfg"), SCENE.replace("center = 0, 0, 0", "center = 0.1, 0, 0")).unwrap();
    let out = run(p, &["evaluate", "--pred", "bp/volume.raw", "--gt", "moved.cfg", "--out", "m.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("shape mismatch"));
}

#[test]
fn gradcheck_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), &["gradcheck"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("gradcheck passed"));
    let broken = run(dir.path(), &["gradcheck", "--break-gradient", "1e-3"]);
    assert_eq!(code(&broken), 3);
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["bench", "--scene-sizes", "200,400", "--models", "spectral,rq", "--repeats", "1", "--out", "b.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(dir.path().join("b.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| &r[2] == "16" && &r[3] == "256"));
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() >= 0.0));
}
