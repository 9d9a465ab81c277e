use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rpr_core::{
    compute_slice, direct_kinematics, inverse_kinematics, DkpOptions, JointVector,
    ManipulatorGeometry, Pose, SliceSpec,
};
use tempfile::TempDir;

fn geometry_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

fn rpr3(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpr3"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Small sweep in `dir`, returning the cloud CSV path.
fn small_sweep(dir: &Path) -> PathBuf {
    let geom = geometry_path();
    let o = rpr3(
        dir,
        &[
            "sweep",
            geom.to_str().unwrap(),
            "--rho1",
            "30:50:2",
            "--n-theta1",
            "180",
            "--n-alpha",
            "180",
            "--rho-bounds",
            "0:60",
            "-o",
            "cloud.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("cloud.csv")
}

fn small_box(dir: &Path) -> PathBuf {
    small_sweep(dir);
    let o = rpr3(
        dir,
        &[
            "maxbox",
            "cloud.csv",
            "--center",
            "35,25,45",
            "-o",
            "box.toml",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("box.toml")
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn ply_vertices(path: &Path) -> usize {
    let text = fs::read_to_string(path).unwrap();
    let line = text
        .lines()
        .find(|l| l.starts_with("element vertex"))
        .unwrap();
    let n = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert_eq!(
        text.split("end_header\n").nth(1).unwrap().lines().count(),
        n
    );
    n
}

/// `(x, y, alpha)` of each listed assembly mode.
fn assembly_modes(text: &str) -> Vec<[f64; 3]> {
    text.lines()
        .filter(|l| l.starts_with("  ") && l.contains("x = "))
        .map(|l| {
            let field = |name: &str| -> f64 {
                let start = l.find(name).unwrap() + name.len();
                l[start..]
                    .split([',', ' '])
                    .next()
                    .unwrap()
                    .parse()
                    .unwrap()
            };
            [field("x = "), field("y = "), field("alpha = ")]
        })
        .collect()
}

#[test]
fn sweep_csv_and_ply_agree() {
    let dir = TempDir::new().unwrap();
    let csv = small_sweep(dir.path());
    let rows = data_rows(&csv);
    assert!(rows > 0);
    assert_eq!(ply_vertices(&dir.path().join("cloud.ply")), rows);
    assert!(dir.path().join("cloud.manifest.toml").exists());
}

#[test]
fn image_rows_count_every_regular_solution() {
    let dir = TempDir::new().unwrap();
    small_box(dir.path());
    let geom = geometry_path();
    let o = rpr3(
        dir.path(),
        &[
            "image",
            geom.to_str().unwrap(),
            "box.toml",
            "--n",
            "5",
            "-o",
            "ws.csv",
            "--ply",
            "ws.ply",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&dir.path().join("ws.csv"));
    assert_eq!(ply_vertices(&dir.path().join("ws.ply")), rows);

    // recount independently from the box limits
    let report: toml::Table =
        toml::from_str(&fs::read_to_string(dir.path().join("box.toml")).unwrap()).unwrap();
    let limits = report["box"]["limits"].as_array().unwrap();
    let axis = |i: usize, k: usize| {
        let lo = limits[i]["min"].as_float().unwrap();
        let hi = limits[i]["max"].as_float().unwrap();
        lo + (hi - lo) * k as f64 / 4.0
    };
    let reference = ManipulatorGeometry::reference();
    let mut total = 0;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                let q = JointVector::new(axis(0, i), axis(1, j), axis(2, k));
                total += direct_kinematics(&reference, &q, &DkpOptions::default())
                    .unwrap()
                    .len();
            }
        }
    }
    let manifest: toml::Table =
        toml::from_str(&fs::read_to_string(dir.path().join("ws.manifest.toml")).unwrap()).unwrap();
    let singular = manifest["params"]["singular_samples"].as_integer().unwrap() as usize;
    assert_eq!(rows + singular, total);
}

#[test]
fn invalid_input_exits_one() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let g = geom.to_str().unwrap();
    assert_eq!(
        code(&rpr3(
            dir.path(),
            &["slice", g, "--rho1", "-1", "-o", "s.csv"]
        )),
        1
    );
    assert_eq!(
        code(&rpr3(
            dir.path(),
            &["sweep", g, "--rho1", "0:10:0", "-o", "c.csv"]
        )),
        1
    );
    assert_eq!(code(&rpr3(dir.path(), &["check", g])), 1);
    assert_eq!(code(&rpr3(dir.path(), &["check", g, "--pose", "1,2"])), 1);
    assert_eq!(
        code(&rpr3(dir.path(), &["check", g, "--joints", "-1,5,5"])),
        1
    );
    assert!(!dir.path().join("s.csv").exists());
}

#[test]
fn missing_files_exit_two() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let g = geom.to_str().unwrap();
    assert_eq!(
        code(&rpr3(
            dir.path(),
            &["image", g, "missing.toml", "-o", "ws.csv"]
        )),
        2
    );
    assert_eq!(
        code(&rpr3(
            dir.path(),
            &["slice", "missing.toml", "--rho1", "17", "-o", "s.csv"]
        )),
        2
    );
    assert_eq!(
        code(&rpr3(
            dir.path(),
            &["maxbox", "missing.csv", "--center", "1,1,1", "-o", "b.toml"]
        )),
        2
    );
}

#[test]
fn oversized_margin_is_a_degenerate_box() {
    let dir = TempDir::new().unwrap();
    small_sweep(dir.path());
    let o = rpr3(
        dir.path(),
        &[
            "maxbox",
            "cloud.csv",
            "--center",
            "35,25,45",
            "--security",
            "9",
            "-o",
            "b.toml",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(!dir.path().join("b.toml").exists());
}

#[test]
fn check_reports_degenerate_leg() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let o = rpr3(
        dir.path(),
        &["check", geom.to_str().unwrap(), "--pose", "0,0,0"],
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("degenerate leg"), "{}", stdout(&o));
}

#[test]
fn check_flags_a_surface_pose_as_singular() {
    let reference = ManipulatorGeometry::reference();
    let slice = compute_slice(
        &reference,
        &SliceSpec {
            rho_bounds: [0.0, 60.0],
            ..SliceSpec::at(17.0)
        },
    )
    .unwrap();
    let p = slice
        .points
        .iter()
        .min_by(|a, b| {
            a.line_det(&reference)
                .unwrap()
                .abs()
                .total_cmp(&b.line_det(&reference).unwrap().abs())
        })
        .unwrap();
    let pose = p.pose();
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let target = format!("{},{},{}", pose.x, pose.y, pose.alpha);
    let o = rpr3(
        dir.path(),
        &["check", geom.to_str().unwrap(), "--pose", &target],
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("singular: true"), "{}", stdout(&o));

    let o = rpr3(
        dir.path(),
        &["check", geom.to_str().unwrap(), "--pose", "10,12,0.5"],
    );
    assert!(stdout(&o).contains("singular: false"));
    assert!(stdout(&o).contains("aspect: "));
}

#[test]
fn joints_of_a_pose_list_that_pose() {
    let reference = ManipulatorGeometry::reference();
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    for pose in [
        Pose::new(3.0, 4.0, 0.5),
        Pose::new(-6.0, 12.5, 2.0),
        Pose::new(14.0, -3.0, -1.0),
    ] {
        let q = inverse_kinematics(&reference, &pose);
        let joints = format!("{},{},{}", q.rho1, q.rho2, q.rho3);
        let o = rpr3(
            dir.path(),
            &["check", geom.to_str().unwrap(), "--joints", &joints],
        );
        assert_eq!(code(&o), 0);
        let modes = assembly_modes(&stdout(&o));
        assert!(!modes.is_empty() && modes.len() <= 6);
        let found = modes.iter().any(|m| {
            let da = (m[2] - pose.alpha).rem_euclid(std::f64::consts::TAU);
            (m[0] - pose.x).abs() < 1e-6
                && (m[1] - pose.y).abs() < 1e-6
                && da.min(std::f64::consts::TAU - da) < 1e-6
        });
        assert!(found, "{pose:?} not in {modes:?}");
    }
}

#[test]
fn degrees_flag_converts_angles() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let g = geom.to_str().unwrap();
    let deg = stdout(&rpr3(
        dir.path(),
        &["check", g, "--degrees", "--pose", "10,12,30"],
    ));
    assert!(deg.contains("alpha = 30 deg"), "{deg}");
    let rad = stdout(&rpr3(
        dir.path(),
        &[
            "check",
            g,
            "--pose",
            &format!("10,12,{}", 30f64.to_radians()),
        ],
    ));
    let joints = |t: &str| {
        t.lines()
            .find(|l| l.starts_with("joints:"))
            .unwrap()
            .to_string()
    };
    assert_eq!(joints(&deg), joints(&rad));
    assert_eq!(assembly_modes(&deg).len(), assembly_modes(&rad).len());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let g = geom.to_str().unwrap();
    for (threads, out) in [("1", "one.csv"), ("4", "four.csv")] {
        let o = rpr3(
            dir.path(),
            &["--threads", threads, "slice", g, "--rho1", "21", "-o", out],
        );
        assert_eq!(code(&o), 0);
    }
    assert_eq!(
        fs::read(dir.path().join("one.csv")).unwrap(),
        fs::read(dir.path().join("four.csv")).unwrap()
    );
}

#[test]
fn replay_detects_changed_outputs() {
    let dir = TempDir::new().unwrap();
    let geom = geometry_path();
    let o = rpr3(
        dir.path(),
        &[
            "slice",
            geom.to_str().unwrap(),
            "--rho1",
            "17",
            "-o",
            "s.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let o = rpr3(dir.path(), &["replay", "s.manifest.toml"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ok s.csv"));

    let manifest = dir.path().join("s.manifest.toml");
    let mut table: toml::Table = toml::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    table["outputs"]["s.csv"] = toml::Value::String("0".repeat(64));
    fs::write(&manifest, toml::to_string(&table).unwrap()).unwrap();
    let o = rpr3(dir.path(), &["replay", "s.manifest.toml"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("changed s.csv"));
}
