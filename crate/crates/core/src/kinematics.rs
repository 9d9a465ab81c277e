//! Inverse and direct kinematics, leg angles and the leg-line determinant.
//!
//! A pose places the operational point `B1` at `(x, y)` with platform
//! orientation `alpha`. Leg `i` joins the base anchor `Ai` to the platform
//! vertex `Bi`; its angle `theta_i` is measured from the global x-axis.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ManipulatorGeometry;

/// Leg lengths at or below this are treated as degenerate: the leg angle is undefined.
pub const EPS_LEN: f64 = 1e-9;

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Signed shortest angular difference `a - b`, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
}

impl Pose {
    /// Builds a pose with `alpha` wrapped into `[0, 2π)`.
    pub fn new(x: f64, y: f64, alpha: f64) -> Self {
        Self {
            x,
            y,
            alpha: normalize_angle(alpha),
        }
    }

    /// Chebyshev distance in `(x, y, alpha)`, with the angle difference wrapped.
    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max(angle_diff(self.alpha, other.alpha).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointVector {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

impl JointVector {
    pub fn new(rho1: f64, rho2: f64, rho3: f64) -> Self {
        Self { rho1, rho2, rho3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.rho1, self.rho2, self.rho3]
    }

    pub fn check_non_negative(&self) -> Result<()> {
        for (i, v) in self.to_array().into_iter().enumerate() {
            if !(v >= 0.0) {
                return Err(Error::NegativeJoint {
                    leg: i + 1,
                    value: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegAngles {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl LegAngles {
    pub fn new(theta1: f64, theta2: f64, theta3: f64) -> Self {
        Self {
            theta1,
            theta2,
            theta3,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }
}

/// Line `a·x + b·y + c = 0` with `(a, b)` a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LegLine {
    /// Signed distance of a point to the line.
    pub fn eval(&self, p: Vector2<f64>) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }
}

/// Platform vertices `B1`, `B2`, `B3` for a pose.
pub fn attachment_points(geom: &ManipulatorGeometry, pose: &Pose) -> [Vector2<f64>; 3] {
    let b1 = Vector2::new(pose.x, pose.y);
    let b2 = b1 + geom.d1() * Vector2::new(pose.alpha.cos(), pose.alpha.sin());
    let ab = pose.alpha + geom.beta();
    let b3 = b1 + geom.d3() * Vector2::new(ab.cos(), ab.sin());
    [b1, b2, b3]
}

pub fn inverse_kinematics(geom: &ManipulatorGeometry, pose: &Pose) -> JointVector {
    let b = attachment_points(geom, pose);
    let a = geom.base_anchors();
    JointVector::new(
        (b[0] - a[0]).norm(),
        (b[1] - a[1]).norm(),
        (b[2] - a[2]).norm(),
    )
}

pub fn leg_angles(geom: &ManipulatorGeometry, pose: &Pose) -> Result<LegAngles> {
    let b = attachment_points(geom, pose);
    let a = geom.base_anchors();
    let mut theta = [0.0; 3];
    for i in 0..3 {
        let v = b[i] - a[i];
        let len = v.norm();
        if len <= EPS_LEN {
            return Err(Error::DegenerateLeg {
                leg: i + 1,
                length: len,
                eps: EPS_LEN,
            });
        }
        theta[i] = normalize_angle(v.y.atan2(v.x));
    }
    Ok(LegAngles::new(theta[0], theta[1], theta[2]))
}

/// The three leg axes: line `i` passes through `Ai` with direction `(cos θi, sin θi)`.
pub fn leg_lines(geom: &ManipulatorGeometry, angles: &LegAngles) -> [LegLine; 3] {
    let anchors = geom.base_anchors();
    let mut lines = [LegLine {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    }; 3];
    for (line, (anchor, theta)) in lines.iter_mut().zip(anchors.iter().zip(angles.to_array())) {
        let (s, c) = theta.sin_cos();
        line.a = s;
        line.b = -c;
        line.c = -(s * anchor.x - c * anchor.y);
    }
    lines
}

/// Determinant of the stacked line coefficients.
///
/// Vanishes exactly when the three leg axes are concurrent or parallel. With
/// the `(sin θ, -cos θ)` normalisation of [`leg_lines`] it coincides with the
/// closed-form singularity polynomial (normalisation factor 1).
pub fn leg_lines_det(geom: &ManipulatorGeometry, angles: &LegAngles) -> f64 {
    let l = leg_lines(geom, angles);
    Matrix3::new(
        l[0].a, l[0].b, l[0].c, //
        l[1].a, l[1].b, l[1].c, //
        l[2].a, l[2].b, l[2].c,
    )
    .determinant()
}

/// Normalised leg-line determinant evaluated at a pose.
pub fn pose_det(geom: &ManipulatorGeometry, pose: &Pose) -> Result<f64> {
    Ok(leg_lines_det(geom, &leg_angles(geom, pose)?))
}

/// The four loop-closure residuals relating a pose and a joint vector.
///
/// Leg directions come from the pose; a zero-length leg contributes its
/// length along the x-axis so the residual stays defined.
pub fn constraint_residuals(geom: &ManipulatorGeometry, pose: &Pose, q: &JointVector) -> [f64; 4] {
    let b = attachment_points(geom, pose);
    let a = geom.base_anchors();
    let rho = q.to_array();
    let mut tip = [Vector2::zeros(); 3];
    for i in 0..3 {
        let v = b[i] - a[i];
        let len = v.norm();
        let u = if len > 0.0 {
            v / len
        } else {
            Vector2::new(1.0, 0.0)
        };
        tip[i] = a[i] + rho[i] * u;
    }
    let (sa, ca) = pose.alpha.sin_cos();
    let (sab, cab) = (pose.alpha + geom.beta()).sin_cos();
    [
        tip[1].x - tip[0].x - geom.d1() * ca,
        tip[1].y - tip[0].y - geom.d1() * sa,
        tip[2].x - tip[0].x - geom.d3() * cab,
        tip[2].y - tip[0].y - geom.d3() * sab,
    ]
}

pub fn max_constraint_residual(geom: &ManipulatorGeometry, pose: &Pose, q: &JointVector) -> f64 {
    let leg_err = inverse_kinematics(geom, pose)
        .to_array()
        .into_iter()
        .zip(q.to_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    constraint_residuals(geom, pose, q)
        .into_iter()
        .map(f64::abs)
        .fold(leg_err, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkpOptions {
    /// Number of uniform samples of `alpha` over one turn.
    pub alpha_grid: usize,
    /// Early-exit tolerance on the first-leg length residual during refinement.
    pub tolerance: f64,
    /// Roots closer than this in `alpha` are merged.
    pub dedup_radius: f64,
    /// Maximum loop-closure residual accepted for a returned pose.
    pub residual_check: f64,
}

impl Default for DkpOptions {
    fn default() -> Self {
        Self {
            alpha_grid: 3600,
            tolerance: 1e-12,
            dedup_radius: 1e-7,
            residual_check: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkpSolution {
    pub pose: Pose,
    /// 2 when two roots merged within the dedup radius or a tangential root was found.
    pub multiplicity: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DkpReport {
    pub solutions: Vec<DkpSolution>,
    /// Candidate roots discarded by the residual check.
    pub rejected_roots: usize,
    /// Roots that landed where the linear elimination is singular.
    pub degenerate_alphas: usize,
}

impl DkpReport {
    pub fn poses(&self) -> Vec<Pose> {
        self.solutions.iter().map(|s| s.pose).collect()
    }
}

/// Per-orientation elimination of the position of `B1`.
///
/// For a fixed `alpha`, subtracting the first circle constraint from the
/// other two gives a 2×2 linear system `M·B1 = r`. Writing the solution as
/// `N / D` (Cramer), the remaining constraint `|B1|² = ρ1²` becomes the
/// smooth function `G(α) = |N|² − ρ1² D²`, free of poles where `D = 0`.
struct Eliminator<'a> {
    geom: &'a ManipulatorGeometry,
    rho_sq: [f64; 3],
}

struct Elimination {
    /// Rows of the linear system, `row_i · B1 = rhs_i`.
    rows: [Vector2<f64>; 2],
    rhs: [f64; 2],
    det: f64,
    numer: Vector2<f64>,
}

impl<'a> Eliminator<'a> {
    fn new(geom: &'a ManipulatorGeometry, q: &JointVector) -> Self {
        Self {
            geom,
            rho_sq: [q.rho1 * q.rho1, q.rho2 * q.rho2, q.rho3 * q.rho3],
        }
    }

    fn eliminate(&self, alpha: f64) -> Elimination {
        let g = self.geom;
        let (sa, ca) = alpha.sin_cos();
        let (sab, cab) = (alpha + g.beta()).sin_cos();
        // Offsets Bi - Ai - B1 for legs 2 and 3.
        let u2 = Vector2::new(g.d1() * ca - g.a2x(), g.d1() * sa);
        let u3 = Vector2::new(g.d3() * cab - g.a3x(), g.d3() * sab - g.a3y());
        let rows = [2.0 * u2, 2.0 * u3];
        let rhs = [
            self.rho_sq[1] - self.rho_sq[0] - u2.norm_squared(),
            self.rho_sq[2] - self.rho_sq[0] - u3.norm_squared(),
        ];
        let det = rows[0].x * rows[1].y - rows[0].y * rows[1].x;
        let numer = Vector2::new(
            rhs[0] * rows[1].y - rows[0].y * rhs[1],
            rows[0].x * rhs[1] - rows[1].x * rhs[0],
        );
        Elimination {
            rows,
            rhs,
            det,
            numer,
        }
    }

    fn g(&self, alpha: f64) -> f64 {
        let e = self.eliminate(alpha);
        e.numer.norm_squared() - self.rho_sq[0] * e.det * e.det
    }
}

/// Bisection on a bracket with a sign change; returns the endpoint with the smaller |f|.
fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    stop: impl Fn(f64, f64) -> bool,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 || stop(mid, fm) {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if flo.abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Minimises `f` on `[lo, hi]` by golden-section search.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[derive(Debug, Clone, Copy)]
struct Root {
    alpha: f64,
    multiplicity: u8,
}

/// Finds the real roots of a periodic function sampled on a uniform grid.
///
/// Sign changes between neighbouring samples (the last pair wraps around)
/// are refined by bisection. Samples whose |f| is a local minimum without a
/// sign change are probed by golden-section search on `sign·f`: a sign flip
/// at the minimum yields two roots, a near-zero minimum a tangential root.
fn periodic_roots<F: Fn(f64) -> f64>(
    f: &F,
    n: usize,
    refine_stop: impl Fn(f64, f64) -> bool + Copy,
) -> Vec<Root> {
    let step = TAU / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    let mut fs: Vec<f64> = xs[..n].iter().map(|&x| f(x)).collect();
    fs.push(fs[0]);
    let mut roots = Vec::new();
    for i in 0..n {
        let (f0, f1) = (fs[i], fs[i + 1]);
        if f0 == 0.0 {
            roots.push(Root {
                alpha: xs[i],
                multiplicity: 1,
            });
            continue;
        }
        if f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            roots.push(Root {
                alpha: bisect(f, xs[i], xs[i + 1], f0, refine_stop),
                multiplicity: 1,
            });
            continue;
        }
        // Tangential probe around sample i+1 over [x_i, x_{i+2}].
        let j = i + 1;
        let next = if j == n { fs[1] } else { fs[j + 1] };
        let fj = fs[j];
        if fj == 0.0 || (fj < 0.0) != (f0 < 0.0) || (fj < 0.0) != (next < 0.0) {
            continue;
        }
        if fj.abs() > f0.abs() || fj.abs() > next.abs() {
            continue;
        }
        let sign = fj.signum();
        let (lo, hi) = (xs[i], xs[i] + 2.0 * step);
        let (xm, fm) = golden_min(|x| sign * f(x), lo, hi, 200);
        if fm < 0.0 {
            let flo = f(lo);
            roots.push(Root {
                alpha: bisect(f, lo, xm, flo, refine_stop),
                multiplicity: 1,
            });
            let fxm = f(xm);
            roots.push(Root {
                alpha: bisect(f, xm, hi, fxm, refine_stop),
                multiplicity: 1,
            });
        } else {
            roots.push(Root {
                alpha: xm,
                multiplicity: 2,
            });
        }
    }
    for r in &mut roots {
        r.alpha = normalize_angle(r.alpha);
    }
    roots.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    roots
}

/// Merges roots closer than `radius` (circularly), bumping multiplicity.
fn dedup_roots(roots: Vec<Root>, radius: f64) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match out.last_mut() {
            Some(last) if (r.alpha - last.alpha).abs() < radius => {
                last.multiplicity = last.multiplicity.max(2);
            }
            _ => out.push(r),
        }
    }
    if out.len() > 1 {
        let first = out[0];
        let last = out[out.len() - 1];
        if angle_diff(first.alpha, last.alpha).abs() < radius {
            out[0].multiplicity = first.multiplicity.max(2);
            out.pop();
        }
    }
    out
}

/// Candidate positions of `B1` at a root where the elimination is singular:
/// the two linear rows are parallel, so intersect the usable row with the
/// first circle instead.
fn degenerate_candidates(e: &Elimination, rho1: f64) -> Vec<Vector2<f64>> {
    let (row, rhs) = if e.rows[0].norm() >= e.rows[1].norm() {
        (e.rows[0], e.rhs[0])
    } else {
        (e.rows[1], e.rhs[1])
    };
    let n = row.norm();
    if n == 0.0 {
        return Vec::new();
    }
    let normal = row / n;
    let offset = rhs / n;
    let h2 = rho1 * rho1 - offset * offset;
    if h2 < 0.0 {
        return Vec::new();
    }
    let foot = normal * offset;
    let tangent = Vector2::new(-normal.y, normal.x);
    let h = h2.sqrt();
    vec![foot + h * tangent, foot - h * tangent]
}

/// All real assembly modes for a joint vector, with diagnostics.
pub fn solve_direct_kinematics(
    geom: &ManipulatorGeometry,
    q: &JointVector,
    opts: &DkpOptions,
) -> Result<DkpReport> {
    q.check_non_negative()?;
    if opts.alpha_grid < 8 {
        return Err(Error::InvalidParameter(format!(
            "alpha grid {} < 8",
            opts.alpha_grid
        )));
    }
    let elim = Eliminator::new(geom, q);
    let g = |a: f64| elim.g(a);
    let tol = opts.tolerance;
    let rho1 = q.rho1;
    let stop = |a: f64, _gv: f64| {
        let e = elim.eliminate(a);
        e.det != 0.0 && ((e.numer / e.det).norm() - rho1).abs() <= tol
    };
    let roots = dedup_roots(periodic_roots(&g, opts.alpha_grid, stop), opts.dedup_radius);

    let mut report = DkpReport::default();
    let scale = geom.d1().max(geom.d3()) + geom.base_scale();
    for root in roots {
        let e = elim.eliminate(root.alpha);
        let candidates = if e.det.abs() > 1e-10 * scale * scale {
            vec![e.numer / e.det]
        } else {
            report.degenerate_alphas += 1;
            degenerate_candidates(&e, rho1)
        };
        let mut accepted = false;
        for b1 in candidates {
            let pose = Pose::new(b1.x, b1.y, root.alpha);
            if max_constraint_residual(geom, &pose, q) < opts.residual_check {
                report.solutions.push(DkpSolution {
                    pose,
                    multiplicity: root.multiplicity,
                });
                accepted = true;
            }
        }
        if !accepted {
            report.rejected_roots += 1;
        }
    }
    report.solutions.sort_by(|a, b| {
        a.pose
            .alpha
            .total_cmp(&b.pose.alpha)
            .then(a.pose.x.total_cmp(&b.pose.x))
            .then(a.pose.y.total_cmp(&b.pose.y))
    });
    if report.solutions.len() > 6 {
        return Err(Error::TooManySolutions(report.solutions.len()));
    }
    Ok(report)
}

/// All real assembly modes for a joint vector, sorted by orientation.
pub fn direct_kinematics(
    geom: &ManipulatorGeometry,
    q: &JointVector,
    opts: &DkpOptions,
) -> Result<Vec<Pose>> {
    Ok(solve_direct_kinematics(geom, q, opts)?.poses())
}
