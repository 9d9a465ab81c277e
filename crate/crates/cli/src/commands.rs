use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rpr_core::export::{
    format_sig, write_cloud_csv, write_cloud_ply, write_workspace_csv, write_workspace_ply,
};
use rpr_core::kinematics::{max_constraint_residual, pose_det};
use rpr_core::{
    build_box, compute_slice, cube_image, inverse_kinematics, leg_angles, leg_lines_det,
    load_geometry, singularity_residual, solve_direct_kinematics, Aspect, BoxCheck, BoxQuery,
    DkpOptions, Domain, HjParams, HjResult, ImageOptions, JointVector, ManipulatorGeometry, Pose,
    SingularityCloud, SingularityFreeBox, SliceSpec, SweepSpec, VerifySpec,
};
use serde::{Deserialize, Serialize};

use crate::args::{CheckArgs, GridArgs, ImageArgs, MaxboxArgs, SliceArgs, SweepArgs};
use crate::manifest::RunManifest;

/// Poses with `|det|` at or below this are reported as singular.
const SINGULAR_DET: f64 = 1e-8;

pub struct Ctx {
    pub args: Vec<String>,
    pub degrees: bool,
}

impl Ctx {
    fn angle_in(&self, a: f64) -> f64 {
        if self.degrees {
            a.to_radians()
        } else {
            a
        }
    }

    fn angle_out(&self, a: f64) -> String {
        if self.degrees {
            format!("{} deg", g(a.to_degrees()))
        } else {
            g(a)
        }
    }
}

fn g(x: f64) -> String {
    format_sig(x, 12)
}

fn read_geometry(path: &Path) -> Result<ManipulatorGeometry> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading geometry {}", path.display()))?;
    load_geometry(&text).with_context(|| format!("geometry {}", path.display()))
}

fn slice_spec(grid: &GridArgs, rho1: f64) -> SliceSpec {
    SliceSpec {
        rho1,
        n_theta1: grid.n_theta1,
        n_alpha: grid.n_alpha,
        tol_root: grid.tol_root,
        rho_bounds: grid.rho_bounds,
        scan: grid.scan.into(),
    }
}

fn write_script(manifest: &mut RunManifest, path: &Option<PathBuf>, script: String) -> Result<()> {
    if let Some(path) = path {
        manifest.write_output(path, script.as_bytes())?;
    }
    Ok(())
}

pub fn slice(ctx: &Ctx, a: &SliceArgs) -> Result<()> {
    let geom = read_geometry(&a.geometry)?;
    let spec = slice_spec(&a.grid, a.rho1);
    let slice = compute_slice(&geom, &spec)?;
    eprintln!("slice rho1 = {}: {} points", g(a.rho1), slice.points.len());

    let mut manifest = RunManifest::new("slice", &ctx.args);
    manifest.geometry_fingerprint = Some(geom.fingerprint());
    manifest.input("geometry", &a.geometry);
    manifest.param("slice", &spec)?;
    manifest.param("stats", &slice.stats)?;
    manifest.param("points", &slice.points.len())?;

    let cloud = SingularityCloud {
        spec: SweepSpec {
            rho1_start: a.rho1,
            rho1_end: a.rho1,
            rho1_step: 1.0,
            slice: spec,
        },
        slices: vec![slice],
        geometry_fingerprint: geom.fingerprint(),
    };
    let mut csv = Vec::new();
    write_cloud_csv(&cloud, &mut csv)?;
    manifest.write_output(&a.output, &csv)?;
    let script = format!(
        "set datafile separator ','\nset title 'singular curves, rho1 = {}'\nset xlabel 'rho2'\nset ylabel 'rho3'\nset size ratio -1\nplot '{}' every ::1 using 2:3 with points pt 7 ps 0.2 notitle\n",
        g(a.rho1),
        a.output.display()
    );
    write_script(&mut manifest, &a.gnuplot, script)?;
    manifest.save_next_to(&a.output)?;
    Ok(())
}

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let geom = read_geometry(&a.geometry)?;
    let [start, end, step] = a.rho1;
    let spec = SweepSpec {
        rho1_start: start,
        rho1_end: end,
        rho1_step: step,
        slice: slice_spec(&a.grid, start),
    };
    spec.validate()?;
    let cloud = rpr_core::sweep_surface(&geom, &spec)?;
    eprintln!(
        "sweep: {} slices, {} points",
        cloud.slices.len(),
        cloud.len()
    );

    let mut manifest = RunManifest::new("sweep", &ctx.args);
    manifest.geometry_fingerprint = Some(geom.fingerprint());
    manifest.input("geometry", &a.geometry);
    manifest.param("sweep", &spec)?;
    manifest.param("domain", &Domain::from_sweep(&spec))?;
    manifest.param("stats", &cloud.stats())?;
    manifest.param("points", &cloud.len())?;
    manifest.param("cloud_fingerprint", &cloud.fingerprint())?;

    let mut csv = Vec::new();
    write_cloud_csv(&cloud, &mut csv)?;
    manifest.write_output(&a.output, &csv)?;
    let ply_path = a
        .ply
        .clone()
        .unwrap_or_else(|| a.output.with_extension("ply"));
    let mut ply = Vec::new();
    write_cloud_ply(&cloud, &mut ply)?;
    manifest.write_output(&ply_path, &ply)?;
    let script = format!(
        "set datafile separator ','\nset title 'singularity surface'\nset xlabel 'rho1'\nset ylabel 'rho2'\nset zlabel 'rho3'\nsplot '{}' every ::1 using 1:2:3 with dots notitle\n",
        a.output.display()
    );
    write_script(&mut manifest, &a.gnuplot, script)?;
    manifest.save_next_to(&a.output)?;
    Ok(())
}

/// Contents of a box report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    #[serde(rename = "box")]
    pub cube: SingularityFreeBox,
    pub search: SearchSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<BoxCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub initial_center: JointVector,
    pub initial_d_min: f64,
    pub d_min: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub optimizer: HjParams,
    pub domain: Domain,
    pub trace: Vec<rpr_core::boxsearch::TraceEntry>,
}

impl SearchSummary {
    fn new(query: &BoxQuery, hj: HjResult) -> Self {
        Self {
            initial_center: query.center0,
            initial_d_min: hj.initial_d_min,
            d_min: hj.d_min,
            iterations: hj.iterations,
            evaluations: hj.evaluations,
            optimizer: query.optimizer,
            domain: query.domain,
            trace: hj.trace,
        }
    }
}

pub fn maxbox(ctx: &Ctx, a: &MaxboxArgs) -> Result<()> {
    let text =
        fs::read(&a.cloud).with_context(|| format!("reading cloud {}", a.cloud.display()))?;
    let points = rpr_core::export::read_cloud_csv(text.as_slice())?;

    let sibling = crate::manifest::manifest_path(&a.cloud);
    let cloud_manifest = if sibling.exists() {
        Some(RunManifest::load(&sibling)?)
    } else {
        None
    };
    let from_manifest =
        |key: &str| -> Option<toml::Value> { cloud_manifest.as_ref()?.params.get(key).cloned() };
    let domain = match (a.domain, from_manifest("domain")) {
        (Some([lo, hi]), _) => Domain::new(lo, hi)?,
        (None, Some(v)) => v.try_into().context("domain in cloud manifest")?,
        (None, None) => bail!(
            "no search domain: pass --domain or keep {} next to the cloud",
            sibling.display()
        ),
    };
    let spec: SweepSpec = match from_manifest("sweep") {
        Some(v) => v.try_into().context("sweep spec in cloud manifest")?,
        None => SweepSpec::default(),
    };
    let geometry = cloud_manifest
        .as_ref()
        .and_then(|m| m.geometry_fingerprint.clone())
        .unwrap_or_default();
    let cloud = SingularityCloud::from_points(points, spec, geometry.clone());

    let query = BoxQuery {
        center0: JointVector::from_array(a.center),
        security: a.security,
        domain,
        optimizer: HjParams {
            initial_step: a.initial_step,
            reduction: a.reduction,
            min_step: a.min_step,
            max_iters: a.max_iters,
        },
    };
    let (cube, hj) = build_box(&cloud, &query)?;
    eprintln!(
        "clearance {} at start, {} at ({}, {}, {}); half-width {}",
        g(hj.initial_d_min),
        g(hj.d_min),
        g(cube.center.rho1),
        g(cube.center.rho2),
        g(cube.center.rho3),
        g(cube.half_width())
    );

    let mut manifest = RunManifest::new("maxbox", &ctx.args);
    if !geometry.is_empty() {
        manifest.geometry_fingerprint = Some(geometry);
    }
    manifest.input("cloud", &a.cloud);
    manifest.param("query", &query)?;
    manifest.param("points", &cloud.len())?;
    let verification = match &a.verify {
        Some(path) => {
            let geom = read_geometry(path)?;
            manifest.input("verify_geometry", path);
            let spec = VerifySpec {
                rho1_step: a.verify_step,
                grid: a.verify_grid,
            };
            let check = rpr_core::verify_box(&geom, &cube, &spec)?;
            if check.is_clear() {
                eprintln!(
                    "verification: {} slices, no singular point inside",
                    check.slices
                );
            } else {
                eprintln!(
                    "warning: {} singular point(s) inside the box at re-slicing step {}, up to {} deep",
                    check.intruders.len(),
                    g(spec.rho1_step),
                    g(check.max_depth)
                );
            }
            Some(check)
        }
        None => None,
    };
    let report = BoxReport {
        cube,
        search: SearchSummary::new(&query, hj),
        verification,
    };
    let text = toml::to_string(&report).context("serializing box report")?;
    manifest.write_output(&a.output, text.as_bytes())?;
    manifest.save_next_to(&a.output)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<BoxReport> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading box report {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing box report {}", path.display()))
}

pub fn image(ctx: &Ctx, a: &ImageArgs) -> Result<()> {
    let geom = read_geometry(&a.geometry)?;
    let report = read_report(&a.report)?;
    let opts = ImageOptions {
        n_per_axis: a.n,
        dkp: DkpOptions {
            alpha_grid: a.alpha_grid,
            ..DkpOptions::default()
        },
        ..ImageOptions::default()
    };
    let image = cube_image(&geom, &report.cube, &opts)?;
    let groups: BTreeMap<String, usize> = image
        .groups()
        .into_iter()
        .map(|(aspect, v)| (aspect.label().to_string(), v.len()))
        .collect();
    eprintln!(
        "image: {} samples in {} aspect group(s), {} singular, {} unreachable grid points",
        image.samples.len(),
        groups.len(),
        image.violations.len(),
        image.unreachable
    );

    let mut manifest = RunManifest::new("image", &ctx.args);
    manifest.geometry_fingerprint = Some(geom.fingerprint());
    manifest.input("geometry", &a.geometry);
    manifest.input("report", &a.report);
    manifest.param("options", &opts)?;
    manifest.param("box", &report.cube)?;
    manifest.param("aspect_counts", &groups)?;
    manifest.param("singular_samples", &image.violations.len())?;
    manifest.param("near_singular_samples", &image.near_singular)?;
    manifest.param("unreachable_grid_points", &image.unreachable)?;

    let mut csv = Vec::new();
    write_workspace_csv(&image.samples, &mut csv)?;
    manifest.write_output(&a.output, &csv)?;
    if let Some(path) = &a.ply {
        let mut ply = Vec::new();
        write_workspace_ply(&image.samples, &mut ply)?;
        manifest.write_output(path, &ply)?;
    }
    let script = format!(
        "set datafile separator ','\nset title 'workspace image'\nset xlabel 'x'\nset ylabel 'y'\nset size ratio -1\nf = '{}'\nplot f every ::1 using 1:(strcol(8) eq '+' ? $2 : NaN) with dots title 'det > 0', \\\n     f every ::1 using 1:(strcol(8) eq '-' ? $2 : NaN) with dots title 'det < 0'\n",
        a.output.display()
    );
    write_script(&mut manifest, &a.gnuplot, script)?;
    manifest.save_next_to(&a.output)?;
    Ok(())
}

pub fn check(ctx: &Ctx, a: &CheckArgs) -> Result<()> {
    let geom = read_geometry(&a.geometry)?;
    let mut out = String::new();
    let opts = DkpOptions::default();
    let q = match (a.target.pose, a.target.joints) {
        (Some([x, y, alpha]), _) => {
            let pose = Pose::new(x, y, ctx.angle_in(alpha));
            let q = inverse_kinematics(&geom, &pose);
            writeln!(
                out,
                "pose: x = {}, y = {}, alpha = {}",
                g(pose.x),
                g(pose.y),
                ctx.angle_out(pose.alpha)
            )?;
            writeln!(out, "joints: {}, {}, {}", g(q.rho1), g(q.rho2), g(q.rho3))?;
            match leg_angles(&geom, &pose) {
                Ok(angles) => {
                    let det = leg_lines_det(&geom, &angles);
                    writeln!(
                        out,
                        "leg angles: {}, {}, {}",
                        ctx.angle_out(angles.theta1),
                        ctx.angle_out(angles.theta2),
                        ctx.angle_out(angles.theta3)
                    )?;
                    writeln!(out, "residual: {}", g(singularity_residual(&geom, &angles)))?;
                    writeln!(out, "det: {}", g(det))?;
                    writeln!(out, "singular: {}", det.abs() <= SINGULAR_DET)?;
                    if det.abs() > SINGULAR_DET {
                        writeln!(out, "aspect: {}", Aspect::of(det).label())?;
                    }
                }
                Err(e) => writeln!(out, "degenerate leg: {e}")?,
            }
            q
        }
        (None, Some(j)) => {
            let q = JointVector::from_array(j);
            writeln!(out, "joints: {}, {}, {}", g(q.rho1), g(q.rho2), g(q.rho3))?;
            q
        }
        (None, None) => unreachable!("clap requires --pose or --joints"),
    };
    q.check_non_negative()?;
    let report = solve_direct_kinematics(&geom, &q, &opts)?;
    writeln!(out, "assembly modes: {}", report.solutions.len())?;
    for (i, s) in report.solutions.iter().enumerate() {
        let det = pose_det(&geom, &s.pose)
            .map(g)
            .unwrap_or_else(|_| "undefined".into());
        writeln!(
            out,
            "  {}: x = {}, y = {}, alpha = {}, det = {}, loop residual = {}",
            i + 1,
            g(s.pose.x),
            g(s.pose.y),
            ctx.angle_out(s.pose.alpha),
            det,
            g(max_constraint_residual(&geom, &s.pose, &q))
        )?;
    }
    print!("{out}");
    Ok(())
}
