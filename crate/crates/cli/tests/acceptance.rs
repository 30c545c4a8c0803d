//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use fmcw_recon::experiments::{
    bench, gradcheck, loss_sensitivity, model_equivalence_error, quality_comparison, random_scene,
    regularization_ablation, simulate, BundledScene, DeskScale, GradcheckField, GradcheckOptions, Setup,
};
use fmcw_recon::forward::ForwardKind;
use fmcw_recon::geometry::Aperture;
use fmcw_recon::io::{export_volume, read_dataset, read_volume, write_dataset, MeasurementSet};
use fmcw_recon::recon::{train, LossWeights, TrainConfig};
use fmcw_recon::scene::VoxelField;
use fmcw_recon::signal::{tone_spectrum_closed_form, ToneParams, DEFAULT_START_FREQUENCY};
use fmcw_recon::{Error, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail(msg: impl Into<String>) -> Outcome {
    Err(msg.into())
}

fn lib<T>(r: fmcw_recon::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("error: {e}"))
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    // Random scenes keep clear of the first pose.
    for _ in 0..100 {
        let (queries, sigma) = lib(random_scene(&setup, &mut rng, 64))?;
        worst = worst.max(lib(model_equivalence_error(&setup, &queries, &sigma, 0))?);
    }
    let secs = started.elapsed().as_secs_f64();
    let msg = format!("max |closed form - DFT(time)| = {worst:.2e} over 100 scenes, {secs:.2} s");
    if worst < 1e-10 && secs < 5.0 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

/// Direct O(N^2) DFT with 1/N normalization.
fn naive_dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * C64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum::<C64>()
                / n as f64
        })
        .collect()
}

fn samples(p: &ToneParams, n: usize) -> Vec<C64> {
    (0..n).map(|t| C64::from_polar(p.amplitude, p.omega * t as f64 + p.phase)).collect()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut random_err, mut centered_min, mut half_err) = (0.0f64, 1.0f64, 0.0f64);
    for &n in &[8usize, 64, 256] {
        let bins: Vec<usize> = (0..n).collect();
        for _ in 0..1000 {
            let p = ToneParams {
                amplitude: rng.random_range(0.1..2.0),
                phase: rng.random_range(-PI..PI),
                omega: rng.random_range(0.0..2.0 * PI),
            };
            let closed = tone_spectrum_closed_form(&p, n, &bins);
            let direct = naive_dft(&samples(&p, n));
            for (a, b) in closed.bins.iter().zip(&direct) {
                random_err = random_err.max((a - b).norm());
            }
        }
        for k in 0..n {
            let centered = ToneParams { amplitude: 1.0, phase: 0.3, omega: 2.0 * PI * k as f64 / n as f64 };
            let z = tone_spectrum_closed_form(&centered, n, &bins);
            let total: f64 = z.bins.iter().map(|v| v.norm_sqr()).sum();
            centered_min = centered_min.min(z.bins[k].norm_sqr() / total);

            let half = ToneParams { omega: 2.0 * PI * (k as f64 + 0.5) / n as f64, ..centered };
            let z = tone_spectrum_closed_form(&half, n, &bins);
            for (j, v) in z.bins.iter().enumerate() {
                let d = half.omega - 2.0 * PI * j as f64 / n as f64;
                let predicted = ((n as f64 * d / 2.0).sin() / (d / 2.0).sin()).abs() / n as f64;
                half_err = half_err.max((v.norm() - predicted).abs());
            }
        }
    }
    let msg = format!(
        "random-tone error {random_err:.2e}, bin-centered energy fraction {centered_min:.12}, half-bin error {half_err:.2e}"
    );
    if random_err < 1e-12 && centered_min >= 1.0 - 1e-10 && half_err < 1e-12 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let mut field = lib(VoxelField::filled(setup.bounds, [64; 3], 0.1))?;
    let truth = BundledScene::Single.points(&field);
    let data = lib(simulate(&setup, &truth, ForwardKind::SpectralClosedForm))?;
    let cfg = TrainConfig::default();
    lib(train(&mut field, &data, &LossWeights::default(), &cfg))?;
    let got = field.coords(field.argmax());
    let want = field.coords(field.voxel_of(&truth.positions()[0]).expect("inside"));
    let offset = (0..3).map(|a| got[a].abs_diff(want[a])).max().expect("three axes");
    let secs = started.elapsed().as_secs_f64();
    let msg = format!(
        "{} steps at 64^3: argmax {got:?}, truth {want:?}, offset {offset} voxel(s), {secs:.1} s",
        cfg.iterations
    );
    if cfg.iterations == 500 && offset <= 1 && secs < 300.0 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_4() -> Outcome {
    let voxel = lib(gradcheck(GradcheckField::Voxel, 4, GradcheckOptions::default()))?;
    let inr = lib(gradcheck(GradcheckField::Inr, 4, GradcheckOptions::default()))?;
    let adjoint = voxel.adjoint_error.max(inr.adjoint_error);
    let msg = format!("adjoint {adjoint:.2e}, voxel FD {:.2e}, INR FD {:.2e}", voxel.fd_error, inr.fd_error);
    if adjoint < 1e-12 && voxel.fd_error < 1e-5 && inr.fd_error < 1e-4 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_5() -> Outcome {
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let models = [ForwardKind::RangeQuantized, ForwardKind::SpectralClosedForm, ForwardKind::TimeDomain];
    let rows = lib(bench(&setup, &[100_000], &models, 5, 5))?;
    let t = |k| rows.iter().find(|r| r.model == k).map(|r| r.seconds).expect("timed");
    let (rq, sp, td) = (t(models[0]), t(models[1]), t(models[2]));
    let k = rows[0].k_bins;
    let msg = format!("K={k}: rq {rq:.2e} s, spectral {sp:.2e} s, time {td:.2e} s, time/spectral {:.1}", td / sp);
    if k == 16 && rq < sp && sp < td && td >= 2.0 * sp {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_6() -> Outcome {
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let desk = DeskScale::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for scene in [BundledScene::Single, BundledScene::TwoPoints, BundledScene::SphereShell] {
        let rows = lib(quality_comparison(&setup, scene, &desk))?;
        let c = |m: &str| rows.iter().find(|r| r.method == m).map(|r| r.report.chamfer).expect("method row");
        let (sp, rq, bp) = (c("spectral"), c("rq"), c("backprojection"));
        ok &= sp < rq && sp <= 1.5 * bp;
        parts.push(format!("{} {sp:.4}/{rq:.4}/{bp:.4}", scene.name()));
    }
    let msg = format!("chamfer spectral/rq/backprojection: {}", parts.join(", "));
    if ok {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_7() -> Outcome {
    let rows = lib(regularization_ablation(&Setup::reference(4e9), &DeskScale::default()))?;
    let (off, on) = (rows[0].spurious_fraction, rows[1].spurious_fraction);
    let drop = 1.0 - on / off;
    let msg = format!("spurious fraction {off:.4} -> {on:.4} ({:.1}% lower)", 100.0 * drop);
    if !rows[0].regularized && rows[1].regularized && drop >= 0.3 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn criterion_8() -> Outcome {
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let grid = lib(VoxelField::zeros(setup.bounds, [32; 3]))?;
    let truth = BundledScene::SphereShell.points(&grid);
    let rows = lib(loss_sensitivity(&setup, &truth, &[1e-4, 1e-3, 1e-2, 1e-1], 4, 8))?;
    let monotone = rows[1..].windows(2).all(|w| w[1].magnitude_mse >= w[0].magnitude_mse);
    let jump = rows[1].complex_mse / rows[0].complex_mse;
    let mags: Vec<String> = rows[1..].iter().map(|r| format!("{:.2e}", r.magnitude_mse)).collect();
    let msg = format!("magnitude MSE {} ; complex MSE x{jump:.0} from 1e-4 to 1e-3", mags.join(" <= "));
    if monotone && jump >= 10.0 {
        Ok(msg)
    } else {
        fail(msg)
    }
}

fn expect_error(
    what: &str,
    got: fmcw_recon::Result<impl std::fmt::Debug>,
    matches: fn(&Error) -> bool,
) -> Result<(), String> {
    match got {
        Err(e) if matches(&e) => Ok(()),
        other => Err(format!("{what}: unexpected {other:?}")),
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let setup = Setup::reference(DEFAULT_START_FREQUENCY);
    let grid = lib(VoxelField::zeros(setup.bounds, [16; 3]))?;
    let data = lib(simulate(&setup, &BundledScene::TwoPoints.points(&grid), ForwardKind::SpectralClosedForm))?;
    // Stored spectra are f32 and the aperture is stored as a pose list.
    let data = MeasurementSet {
        aperture: lib(Aperture::from_poses(data.aperture.poses.clone()))?,
        spectra: data
            .spectra
            .iter()
            .map(|s| s.iter().map(|z| C64::new(z.re as f32 as f64, z.im as f32 as f64)).collect())
            .collect(),
        ..data
    };
    let path = dir.path().join("data.bin");
    lib(write_dataset(&path, &data))?;
    let bytes = fs::read(&path).map_err(|e| e.to_string())?;
    let back = lib(read_dataset(&path))?;
    let again = dir.path().join("again.bin");
    lib(write_dataset(&again, &back))?;
    if back != data || fs::read(&again).map_err(|e| e.to_string())? != bytes {
        return fail("dataset round trip differs");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let values = (0..grid.len()).map(|_| rng.random::<f32>() as f64).collect();
    let vol = lib(VoxelField::from_values(grid.bounds, grid.resolution, values))?;
    let vpath = dir.path().join("vol.raw");
    lib(export_volume(&vol, &vpath))?;
    if lib(read_volume(&vpath))? != vol {
        return fail("volume round trip differs");
    }

    let corrupt = |name: &str, content: &[u8]| -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, content).expect("temp write");
        p
    };
    let mut magic = bytes.clone();
    magic[0] = b'X';
    let mut version = bytes.clone();
    version[4..8].copy_from_slice(&99u32.to_le_bytes());
    expect_error("bad magic", read_dataset(corrupt("magic.bin", &magic)), |e| {
        matches!(e, Error::BadMagic { offset: 0, .. })
    })?;
    expect_error("bad version", read_dataset(corrupt("version.bin", &version)), |e| {
        matches!(e, Error::VersionUnsupported { version: 99, .. })
    })?;
    expect_error("truncated dataset", read_dataset(corrupt("short.bin", &bytes[..bytes.len() - 3])), |e| {
        matches!(e, Error::TruncatedFile { .. })
    })?;
    expect_error("empty dataset", read_dataset(corrupt("empty.bin", &[])), |e| {
        matches!(e, Error::TruncatedFile { offset: 0, .. })
    })?;
    let raw = fs::read(&vpath).map_err(|e| e.to_string())?;
    fs::write(&vpath, &raw[..raw.len() - 4]).map_err(|e| e.to_string())?;
    expect_error("truncated volume", read_volume(&vpath), |e| matches!(e, Error::TruncatedFile { .. }))?;
    fs::write(&vpath, &raw).map_err(|e| e.to_string())?;
    fs::write(dir.path().join("vol.raw.hdr"), "resolution = 16, 16\n").map_err(|e| e.to_string())?;
    expect_error("bad volume header", read_volume(&vpath), |e| matches!(e, Error::Parse { .. }))?;
    Ok(format!("dataset ({} bytes) and volume round trip bit-exactly; 6 corrupt fixtures rejected", bytes.len()))
}

/// Runs the CLI in `dir` and returns its stdout.
fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fmcw-recon"))
        .current_dir(dir)
        .args(args)
        .args(["--seed", "10", "--reproducible"])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("entry").path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).expect("prefix").to_path_buf(), fs::read(&p).expect("file")));
            }
        }
    }
    out.sort();
    out
}

const SCENE: &str = "[bounds]\ncenter = 0, 0, 0\nside = 0.36\n[scene]\nkind = two\ngrid = 16\n";
const TRAIN: &str = "[train]\niterations = 15\n";

fn cli_session(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    fs::write(dir.join("scene.cfg"), SCENE).map_err(|e| e.to_string())?;
    fs::write(dir.join("train.cfg"), TRAIN).map_err(|e| e.to_string())?;
    let mut logs = Vec::new();
    let commands: &[&[&str]] = &[
        &["simulate", "--scene", "scene.cfg", "--out", "data.bin"],
        &["simulate", "--scene", "scene.cfg", "--forward", "time", "--out", "data_time.bin"],
        &["reconstruct", "--dataset", "data.bin", "--field", "voxel:16", "--train", "train.cfg", "--out", "vox"],
        &["reconstruct", "--dataset", "data.bin", "--field", "inr:16", "--train", "train.cfg", "--out", "inr"],
        &[
            "reconstruct",
            "--dataset",
            "data.bin",
            "--field",
            "voxel:16",
            "--train",
            "train.cfg",
            "--baseline",
            "rq",
            "--out",
            "rq",
        ],
        &["backproject", "--dataset", "data.bin", "--resolution", "16", "--out", "bp"],
        &["evaluate", "--pred", "vox/volume.raw", "--gt", "scene.cfg", "--out", "metrics.csv"],
        &["ablate", "--what", "regularization", "--resolution", "12", "--iterations", "5", "--out", "reg"],
        &["ablate", "--what", "bandwidth", "--resolution", "12", "--iterations", "5", "--out", "bw"],
        &["ablate", "--what", "startfreq", "--resolution", "12", "--iterations", "5", "--out", "f0"],
        &["ablate", "--what", "sheet", "--resolution", "12", "--iterations", "5", "--out", "sheet"],
        &["ablate", "--what", "loss-sensitivity", "--out", "ls"],
        &["gradcheck", "--field", "voxel"],
        &["gradcheck", "--field", "inr"],
    ];
    for args in commands {
        logs.extend(cli(dir, args)?);
    }
    fs::write(dir.join("stdout.log"), logs).map_err(|e| e.to_string())?;
    Ok(tree(dir))
}

fn criterion_10() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = cli_session(a.path())?;
    let second = cli_session(b.path())?;
    if first.len() != second.len() {
        return fail(format!("{} vs {} output files", first.len(), second.len()));
    }
    for ((pa, ca), (pb, cb)) in first.iter().zip(&second) {
        if pa != pb || ca != cb {
            return fail(format!("{} differs between runs", pa.display()));
        }
    }
    Ok(format!("{} output files identical across two runs of every subcommand except bench", first.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("forward-model equivalence", criterion_1),
        ("closed-form DFT oracle", criterion_2),
        ("single-scatterer reconstruction", criterion_3),
        ("gradient correctness", criterion_4),
        ("runtime ordering", criterion_5),
        ("quality ordering", criterion_6),
        ("regularization ablation", criterion_7),
        ("loss-sensitivity shape", criterion_8),
        ("persistence", criterion_9),
        ("determinism", criterion_10),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let (verdict, detail) = match check() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("{verdict} #{id:<2} {name}: {detail} [{:.1} s]", started.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
