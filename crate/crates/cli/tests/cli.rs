//! End-to-end runs of the `chamap` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chamap::config::{mask_config_to_string, mesh_config_to_string};
use chamap::{synth_samples, MeshConfig, XorMaskSet};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chamap"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("chamap-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(output: Output) -> (String, String) {
    let stdout = String::from_utf8_lossy(&output.stdout).into_owned();
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(
        output.status.success(),
        "stdout:\n{stdout}\nstderr:\n{stderr}"
    );
    (stdout, stderr)
}

/// Writes the total 32-CHA mask set and a matching mesh into `dir`.
fn write_sim_configs(dir: &Path) -> (PathBuf, PathBuf) {
    let masks = dir.join("masks.cfg");
    let mesh = dir.join("mesh.cfg");
    fs::write(
        &masks,
        mask_config_to_string(&XorMaskSet::random_quadrant_valid(42, 5, 32).unwrap()),
    )
    .unwrap();
    fs::write(&mesh, mesh_config_to_string(&MeshConfig::default_knl())).unwrap();
    (masks, mesh)
}

#[test]
fn map_histogram_counts_every_line() {
    let dir = workdir("map");
    let out = dir.join("hist.csv");
    ok(bin()
        .args(["map", "--start", "0x0", "--len", "0x100000"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let csv = fs::read_to_string(&out).unwrap();
    let mut cha_total = 0u64;
    let mut quad_total = 0u64;
    let mut unmapped = 0u64;
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let kind = parts.next().unwrap();
        let _id = parts.next().unwrap();
        let count: u64 = parts.next().unwrap().parse().unwrap();
        match kind {
            "cha" => cha_total += count,
            "quadrant" => quad_total += count,
            "unmapped" => unmapped = count,
            other => panic!("unexpected kind {other}"),
        }
    }
    let lines = 0x100000 / 64;
    assert_eq!(quad_total, lines);
    assert_eq!(cha_total + unmapped, lines);
    assert!(
        unmapped > 0,
        "38-of-64 default should leave some lines unmapped"
    );
}

#[test]
fn learn_recovers_a_planted_mapping_end_to_end() {
    let dir = workdir("learn");
    let planted = XorMaskSet::random_quadrant_valid(7, 6, 64).unwrap();
    let samples = synth_samples(&planted, 128, 11).unwrap();
    let csv_path = dir.join("samples.csv");
    fs::write(&csv_path, chamap::config::samples_to_csv(&samples)).unwrap();

    let out = dir.join("recovered.cfg");
    let (_, stderr) = ok(bin()
        .arg("learn")
        .arg("--samples")
        .arg(&csv_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    assert!(stderr.contains("exactly"), "stderr: {stderr}");
    let recovered = chamap::config::load_mask_config(&out).unwrap();
    assert_eq!(recovered, planted);
}

#[test]
fn dense_subnuma_schedule_simulates_with_zero_far_matrix_traffic() {
    let dir = workdir("subnuma");
    let (masks, mesh) = write_sim_configs(&dir);
    let sched = dir.join("sub.txt");
    ok(bin()
        .args([
            "schedule",
            "--dense-rows",
            "256",
            "--dense-cols",
            "256",
            "--elem-bytes",
            "4",
            "--scheduler",
            "subnuma",
        ])
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .arg("--out")
        .arg(&sched)
        .output()
        .unwrap());

    // Same seed and configs reproduce the schedule byte for byte.
    let first = fs::read_to_string(&sched).unwrap();
    ok(bin()
        .args([
            "schedule",
            "--dense-rows",
            "256",
            "--dense-cols",
            "256",
            "--elem-bytes",
            "4",
            "--scheduler",
            "subnuma",
        ])
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .arg("--out")
        .arg(&sched)
        .output()
        .unwrap());
    assert_eq!(fs::read_to_string(&sched).unwrap(), first);

    let report = dir.join("report.csv");
    let (stdout, _) = ok(bin()
        .arg("simulate")
        .arg("--schedule")
        .arg(&sched)
        .arg("--layout")
        .arg(sched.with_extension("layout"))
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap());
    let b_line = stdout
        .lines()
        .find(|l| l.starts_with("structure B"))
        .expect("per-structure summary");
    let toks: Vec<&str> = b_line.split_whitespace().collect();
    let far_pos = toks.iter().position(|&t| t == "far").unwrap();
    assert_eq!(toks[far_pos + 1], "0", "B line: {b_line}");

    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("tile_col,tile_row,"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn dense_sequential_schedule_sees_mostly_far_matrix_traffic() {
    let dir = workdir("sequential");
    let (masks, mesh) = write_sim_configs(&dir);
    let sched = dir.join("seq.txt");
    ok(bin()
        .args([
            "schedule",
            "--dense-rows",
            "256",
            "--dense-cols",
            "256",
            "--elem-bytes",
            "4",
            "--scheduler",
            "sequential",
        ])
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .arg("--out")
        .arg(&sched)
        .output()
        .unwrap());
    let (stdout, _) = ok(bin()
        .arg("simulate")
        .arg("--schedule")
        .arg(&sched)
        .arg("--layout")
        .arg(sched.with_extension("layout"))
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .output()
        .unwrap());
    let b_line = stdout
        .lines()
        .find(|l| l.starts_with("structure B"))
        .expect("per-structure summary");
    let pct: f64 = b_line
        .rsplit('(')
        .next()
        .unwrap()
        .trim_end_matches([')', '%'])
        .trim()
        .parse()
        .unwrap();
    assert!((70.0..=80.0).contains(&pct), "B far percentage {pct}");
}

#[test]
fn sparse_greedy_pipeline_runs() {
    let dir = workdir("greedy");
    let (masks, mesh) = write_sim_configs(&dir);
    let mtx = dir.join("m.mtx");
    let mut body = String::from("%%MatrixMarket matrix coordinate real general\n32 32 96\n");
    for r in 0..32 {
        for k in 0..3 {
            body.push_str(&format!("{} {} 1.0\n", r + 1, (r + k * 7) % 32 + 1));
        }
    }
    fs::write(&mtx, body).unwrap();

    let sched = dir.join("greedy.txt");
    let (stdout, _) = ok(bin()
        .arg("schedule")
        .arg("--matrix")
        .arg(&mtx)
        .args(["--scheduler", "greedy", "--max-width", "4"])
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .arg("--out")
        .arg(&sched)
        .output()
        .unwrap());
    assert!(stdout.contains("statements"), "{stdout}");

    let (stdout, _) = ok(bin()
        .arg("simulate")
        .arg("--schedule")
        .arg(&sched)
        .arg("--layout")
        .arg(sched.with_extension("layout"))
        .arg("--mask-config")
        .arg(&masks)
        .arg("--mesh-config")
        .arg(&mesh)
        .output()
        .unwrap());
    assert!(stdout.contains("mean latency"), "{stdout}");
}

#[test]
fn pool_is_deterministic_and_pin_names_missing_pages() {
    let (a, _) = ok(bin().args(["pool", "--seed", "3"]).output().unwrap());
    let (b, _) = ok(bin().args(["pool", "--seed", "3"]).output().unwrap());
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 16);

    let (pinned, _) = ok(bin()
        .args(["pin", "--required", "0x0,0x40000000", "--seed", "3"])
        .output()
        .unwrap());
    assert_eq!(
        pinned.lines().filter(|l| l.starts_with("assigned")).count(),
        2
    );
    assert_eq!(
        pinned.lines().filter(|l| l.starts_with("freed")).count(),
        14
    );

    // k=16 lies outside the 16 GiB space.
    let out = bin()
        .args(["pin", "--required", "0x400000000", "--seed", "3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("0x400000000"), "stderr: {stderr}");
}

#[test]
fn subnuma_rejects_sparse_input() {
    let dir = workdir("subnuma-sparse");
    let mtx = dir.join("m.mtx");
    fs::write(
        &mtx,
        "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.0\n",
    )
    .unwrap();
    let out = bin()
        .arg("schedule")
        .arg("--matrix")
        .arg(&mtx)
        .args(["--scheduler", "subnuma"])
        .arg("--out")
        .arg(dir.join("s.txt"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("dense"), "stderr: {stderr}");
}
