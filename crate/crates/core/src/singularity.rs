//! Parallel singularities in joint space.
//!
//! A configuration is singular when the three leg axes meet at one point,
//! possibly at infinity. Fixing `rho1` turns that condition into a scalar
//! function of the platform orientation `alpha` and the first leg angle
//! `theta1`; its zero set, mapped through the leg lengths of legs 2 and 3,
//! is a set of curves in the `(rho2, rho3)` plane. Stacking such slices over
//! a range of `rho1` samples the singularity surface.

use std::f64::consts::TAU;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::{golden_min, leg_lines_det, normalize_angle, LegAngles, Pose, EPS_LEN};
use crate::model::ManipulatorGeometry;

/// Closed-form singularity polynomial in the three leg angles.
pub fn singularity_residual(geom: &ManipulatorGeometry, angles: &LegAngles) -> f64 {
    let (s1, c1) = angles.theta1.sin_cos();
    let (s2, c2) = angles.theta2.sin_cos();
    let (s3, c3) = angles.theta3.sin_cos();
    let s31 = s3 * c1 - c3 * s1;
    let s12 = s1 * c2 - c1 * s2;
    geom.a2x() * s2 * s31 + (geom.a3x() * s3 - geom.a3y() * c3) * s12
}

/// Pose with `B1` at distance `rho1` from `A1` along `theta1`.
pub fn reduced_pose(rho1: f64, alpha: f64, theta1: f64) -> Pose {
    let (s1, c1) = theta1.sin_cos();
    Pose::new(rho1 * c1, rho1 * s1, alpha)
}

/// Leg vectors `B2 - A2` and `B3 - A3` in the reduced parametrisation.
fn leg_vectors(
    geom: &ManipulatorGeometry,
    rho1: f64,
    alpha: f64,
    theta1: f64,
) -> (Vector2<f64>, Vector2<f64>) {
    let (s1, c1) = theta1.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    let (sab, cab) = (alpha + geom.beta()).sin_cos();
    let b1 = Vector2::new(rho1 * c1, rho1 * s1);
    let v2 = b1 + Vector2::new(geom.d1() * ca - geom.a2x(), geom.d1() * sa);
    let v3 = b1 + Vector2::new(geom.d3() * cab - geom.a3x(), geom.d3() * sab - geom.a3y());
    (v2, v3)
}

/// Lengths of legs 2 and 3 for `B1 = rho1 (cos θ1, sin θ1)` and orientation `alpha`.
pub fn leg_lengths_from(
    geom: &ManipulatorGeometry,
    rho1: f64,
    alpha: f64,
    theta1: f64,
) -> (f64, f64) {
    let (v2, v3) = leg_vectors(geom, rho1, alpha, theta1);
    (v2.norm(), v3.norm())
}

#[inline]
fn residual_from_vectors(
    geom: &ManipulatorGeometry,
    s1: f64,
    c1: f64,
    v2: Vector2<f64>,
    v3: Vector2<f64>,
) -> Option<f64> {
    let r2 = v2.norm();
    let r3 = v3.norm();
    if r2 <= EPS_LEN || r3 <= EPS_LEN {
        return None;
    }
    let (c2, s2) = (v2.x / r2, v2.y / r2);
    let (c3, s3) = (v3.x / r3, v3.y / r3);
    let s31 = s3 * c1 - c3 * s1;
    let s12 = s1 * c2 - c1 * s2;
    Some(geom.a2x() * s2 * s31 + (geom.a3x() * s3 - geom.a3y() * c3) * s12)
}

fn reduced_residual_opt(
    geom: &ManipulatorGeometry,
    rho1: f64,
    alpha: f64,
    theta1: f64,
) -> Option<f64> {
    let (s1, c1) = theta1.sin_cos();
    let (v2, v3) = leg_vectors(geom, rho1, alpha, theta1);
    residual_from_vectors(geom, s1, c1, v2, v3)
}

/// The singularity polynomial with legs 2 and 3 eliminated through the
/// loop-closure equations, as a function of `(rho1, alpha, theta1)`.
pub fn reduced_residual(
    geom: &ManipulatorGeometry,
    rho1: f64,
    alpha: f64,
    theta1: f64,
) -> Result<f64> {
    let (v2, v3) = leg_vectors(geom, rho1, alpha, theta1);
    for (leg, v) in [(2, v2), (3, v3)] {
        if v.norm() <= EPS_LEN {
            return Err(Error::DegenerateLeg {
                leg,
                length: v.norm(),
                eps: EPS_LEN,
            });
        }
    }
    let (s1, c1) = theta1.sin_cos();
    Ok(residual_from_vectors(geom, s1, c1, v2, v3).expect("legs checked above"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub alpha: f64,
    pub theta1: f64,
}

impl SingularPoint {
    pub fn joints(&self) -> [f64; 3] {
        [self.rho1, self.rho2, self.rho3]
    }

    pub fn pose(&self) -> Pose {
        reduced_pose(self.rho1, self.alpha, self.theta1)
    }

    /// Leg angles of the generating configuration. `theta1` is the generating
    /// angle itself, so this stays defined on the `rho1 = 0` slice.
    pub fn leg_angles(&self, geom: &ManipulatorGeometry) -> Result<LegAngles> {
        let (v2, v3) = leg_vectors(geom, self.rho1, self.alpha, self.theta1);
        for (leg, v) in [(2, v2), (3, v3)] {
            if v.norm() <= EPS_LEN {
                return Err(Error::DegenerateLeg {
                    leg,
                    length: v.norm(),
                    eps: EPS_LEN,
                });
            }
        }
        Ok(LegAngles::new(
            self.theta1,
            normalize_angle(v2.y.atan2(v2.x)),
            normalize_angle(v3.y.atan2(v3.x)),
        ))
    }

    /// Leg-line determinant at the generating configuration.
    pub fn line_det(&self, geom: &ManipulatorGeometry) -> Result<f64> {
        Ok(leg_lines_det(geom, &self.leg_angles(geom)?))
    }
}

/// Which grid variable is scanned line by line; the other is the root variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    /// For each `theta1` grid value, find roots in `alpha`.
    ThetaOuter,
    /// For each `alpha` grid value, find roots in `theta1`.
    AlphaOuter,
    /// Union of both scans. Branches nearly parallel to either grid
    /// direction are otherwise sampled sparsely.
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub rho1: f64,
    pub n_theta1: usize,
    pub n_alpha: usize,
    pub tol_root: f64,
    /// Inclusive filter `[min, max]` applied to `rho2` and `rho3`.
    pub rho_bounds: [f64; 2],
    #[serde(default)]
    pub scan: ScanOrder,
}

impl Default for SliceSpec {
    fn default() -> Self {
        Self {
            rho1: 0.0,
            n_theta1: 720,
            n_alpha: 720,
            tol_root: 1e-10,
            rho_bounds: [1e-9, 50.0],
            scan: ScanOrder::Both,
        }
    }
}

impl SliceSpec {
    pub fn at(rho1: f64) -> Self {
        Self {
            rho1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho1.is_finite() && self.rho1 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho1 = {} must be finite and >= 0",
                self.rho1
            )));
        }
        if self.n_theta1 < 8 || self.n_alpha < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid counts ({}, {}) must be at least 8",
                self.n_theta1, self.n_alpha
            )));
        }
        if !(self.tol_root > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol_root = {} must be positive",
                self.tol_root
            )));
        }
        let [lo, hi] = self.rho_bounds;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho bounds [{lo}, {hi}] need 0 <= min < max"
            )));
        }
        Ok(())
    }
}

/// Per-slice bookkeeping of cells that produced no point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceStats {
    /// Grid samples where leg 2 or 3 is degenerate.
    pub degenerate_cells: usize,
    /// Brackets whose refinement did not reach the residual tolerance
    /// (sign flips across a degenerate pocket rather than a root).
    pub rejected_brackets: usize,
    /// Roots recovered by the tangential probe.
    pub tangential_roots: usize,
    /// Roots dropped by the `rho_bounds` filter.
    pub out_of_bounds: usize,
}

impl SliceStats {
    fn merge(&mut self, o: &SliceStats) {
        self.degenerate_cells += o.degenerate_cells;
        self.rejected_brackets += o.rejected_brackets;
        self.tangential_roots += o.tangential_roots;
        self.out_of_bounds += o.out_of_bounds;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub rho1: f64,
    pub points: Vec<SingularPoint>,
    pub stats: SliceStats,
}

/// Refines a sign-change bracket of `f` on `[lo, hi]`.
///
/// Stops as soon as |f| < tol, otherwise halves down to floating-point
/// resolution. Returns `None` if the bracket hits an undefined sample or
/// never reaches the tolerance.
fn refine_bracket<F: Fn(f64) -> Option<f64>>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    fhi: f64,
    tol: f64,
) -> Option<f64> {
    if flo.abs() < tol {
        return Some(lo);
    }
    if fhi.abs() < tol {
        return Some(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm.abs() < tol {
            return Some(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    None
}

/// Roots of `f` along one periodic scan line sampled at `values`.
fn line_roots<F: Fn(f64) -> Option<f64>>(
    f: &F,
    values: &[Option<f64>],
    tol: f64,
    stats: &mut SliceStats,
) -> Vec<f64> {
    let n = values.len();
    let step = TAU / n as f64;
    let mut roots = Vec::new();
    stats.degenerate_cells += values.iter().filter(|v| v.is_none()).count();
    for i in 0..n {
        let (Some(f0), Some(f1)) = (values[i], values[(i + 1) % n]) else {
            continue;
        };
        let (x0, x1) = (i as f64 * step, (i + 1) as f64 * step);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0) {
            match refine_bracket(f, x0, x1, f0, f1, tol) {
                Some(r) => roots.push(r),
                None => stats.rejected_brackets += 1,
            }
        } else if f0.abs() < 10.0 * tol {
            // Tangential contact: the sample is almost a root but neither
            // neighbouring cell changes sign.
            let Some(fp) = values[(i + n - 1) % n] else {
                continue;
            };
            if (fp < 0.0) != (f0 < 0.0) {
                continue;
            }
            let sign = f0.signum();
            let (lo, hi) = (x0 - step, x1);
            let (xm, fm) = golden_min(|x| f(x).map_or(f64::INFINITY, |v| sign * v), lo, hi, 200);
            if fm.abs() < tol {
                roots.push(xm);
                stats.tangential_roots += 1;
            } else if fm < 0.0 {
                let flo = f(lo);
                let fxm = f(xm);
                let fhi = f(hi);
                if let (Some(flo), Some(fxm), Some(fhi)) = (flo, fxm, fhi) {
                    for r in [
                        refine_bracket(f, lo, xm, flo, fxm, tol),
                        refine_bracket(f, xm, hi, fxm, fhi, tol),
                    ] {
                        match r {
                            Some(r) => {
                                roots.push(r);
                                stats.tangential_roots += 1;
                            }
                            None => stats.rejected_brackets += 1,
                        }
                    }
                }
            }
        }
    }
    roots
}

fn grid_trig(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| (i as f64 * TAU / n as f64).sin_cos())
        .collect()
}

/// Emits the point for a refined root `(alpha, theta1)` if it passes the filters.
fn emit(
    geom: &ManipulatorGeometry,
    spec: &SliceSpec,
    alpha: f64,
    theta1: f64,
    stats: &mut SliceStats,
) -> Option<SingularPoint> {
    let alpha = normalize_angle(alpha);
    let theta1 = normalize_angle(theta1);
    let (rho2, rho3) = leg_lengths_from(geom, spec.rho1, alpha, theta1);
    let [lo, hi] = spec.rho_bounds;
    if rho2 < lo.max(EPS_LEN) || rho2 > hi || rho3 < lo.max(EPS_LEN) || rho3 > hi {
        stats.out_of_bounds += 1;
        return None;
    }
    match reduced_residual_opt(geom, spec.rho1, alpha, theta1) {
        Some(r) if r.abs() < spec.tol_root => Some(SingularPoint {
            rho1: spec.rho1,
            rho2,
            rho3,
            alpha,
            theta1,
        }),
        _ => {
            stats.rejected_brackets += 1;
            None
        }
    }
}

fn scan_theta_outer(
    geom: &ManipulatorGeometry,
    spec: &SliceSpec,
) -> (Vec<SingularPoint>, SliceStats) {
    let alpha_trig = grid_trig(spec.n_alpha);
    let beta_trig: Vec<(f64, f64)> = (0..spec.n_alpha)
        .map(|j| (j as f64 * TAU / spec.n_alpha as f64 + geom.beta()).sin_cos())
        .collect();
    let rho1 = spec.rho1;
    let lines: Vec<(Vec<SingularPoint>, SliceStats)> = (0..spec.n_theta1)
        .into_par_iter()
        .map(|i| {
            let theta1 = i as f64 * TAU / spec.n_theta1 as f64;
            let (s1, c1) = theta1.sin_cos();
            let b1 = Vector2::new(rho1 * c1, rho1 * s1);
            let values: Vec<Option<f64>> = alpha_trig
                .iter()
                .zip(&beta_trig)
                .map(|(&(sa, ca), &(sab, cab))| {
                    let v2 = b1 + Vector2::new(geom.d1() * ca - geom.a2x(), geom.d1() * sa);
                    let v3 = b1
                        + Vector2::new(geom.d3() * cab - geom.a3x(), geom.d3() * sab - geom.a3y());
                    residual_from_vectors(geom, s1, c1, v2, v3)
                })
                .collect();
            let mut stats = SliceStats::default();
            let f = |alpha: f64| reduced_residual_opt(geom, rho1, alpha, theta1);
            let points = line_roots(&f, &values, spec.tol_root, &mut stats)
                .into_iter()
                .filter_map(|alpha| emit(geom, spec, alpha, theta1, &mut stats))
                .collect();
            (points, stats)
        })
        .collect();
    flatten(lines)
}

fn scan_alpha_outer(
    geom: &ManipulatorGeometry,
    spec: &SliceSpec,
) -> (Vec<SingularPoint>, SliceStats) {
    let theta_trig = grid_trig(spec.n_theta1);
    let rho1 = spec.rho1;
    let lines: Vec<(Vec<SingularPoint>, SliceStats)> = (0..spec.n_alpha)
        .into_par_iter()
        .map(|j| {
            let alpha = j as f64 * TAU / spec.n_alpha as f64;
            let (sa, ca) = alpha.sin_cos();
            let (sab, cab) = (alpha + geom.beta()).sin_cos();
            let o2 = Vector2::new(geom.d1() * ca - geom.a2x(), geom.d1() * sa);
            let o3 = Vector2::new(geom.d3() * cab - geom.a3x(), geom.d3() * sab - geom.a3y());
            let values: Vec<Option<f64>> = theta_trig
                .iter()
                .map(|&(s1, c1)| {
                    let b1 = Vector2::new(rho1 * c1, rho1 * s1);
                    residual_from_vectors(geom, s1, c1, b1 + o2, b1 + o3)
                })
                .collect();
            let mut stats = SliceStats::default();
            let f = |theta1: f64| reduced_residual_opt(geom, rho1, alpha, theta1);
            let points = line_roots(&f, &values, spec.tol_root, &mut stats)
                .into_iter()
                .filter_map(|theta1| emit(geom, spec, alpha, theta1, &mut stats))
                .collect();
            (points, stats)
        })
        .collect();
    flatten(lines)
}

fn flatten(lines: Vec<(Vec<SingularPoint>, SliceStats)>) -> (Vec<SingularPoint>, SliceStats) {
    let mut stats = SliceStats::default();
    let mut points = Vec::new();
    for (p, s) in lines {
        points.extend(p);
        stats.merge(&s);
    }
    (points, stats)
}

fn sort_points(points: &mut Vec<SingularPoint>) {
    points.sort_by(|a, b| {
        a.theta1
            .total_cmp(&b.theta1)
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.rho2.total_cmp(&b.rho2))
            .then(a.rho3.total_cmp(&b.rho3))
    });
    points.dedup_by(|a, b| a == b);
}

/// Singular points in the `(rho2, rho3)` plane at fixed `rho1`.
///
/// Each scan line is sampled on a uniform periodic grid, sign changes of
/// [`reduced_residual`] are bracketed and refined by bisection, and samples
/// that nearly vanish without a sign change get a golden-section probe.
/// Output is sorted by `(theta1, alpha)`.
pub fn compute_slice(geom: &ManipulatorGeometry, spec: &SliceSpec) -> Result<Slice> {
    spec.validate()?;
    let (mut points, stats) = match spec.scan {
        ScanOrder::ThetaOuter => scan_theta_outer(geom, spec),
        ScanOrder::AlphaOuter => scan_alpha_outer(geom, spec),
        ScanOrder::Both => {
            let (mut p, mut s) = scan_theta_outer(geom, spec);
            let (p2, s2) = scan_alpha_outer(geom, spec);
            p.extend(p2);
            s.merge(&s2);
            (p, s)
        }
    };
    sort_points(&mut points);
    Ok(Slice {
        rho1: spec.rho1,
        points,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub rho1_start: f64,
    pub rho1_end: f64,
    pub rho1_step: f64,
    /// Template for every slice; its `rho1` is overwritten.
    pub slice: SliceSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            rho1_start: 0.0,
            rho1_end: 50.0,
            rho1_step: 0.5,
            slice: SliceSpec::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1_start >= 0.0 && self.rho1_end > self.rho1_start && self.rho1_end.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "rho1 range [{}, {}] needs 0 <= start < end",
                self.rho1_start, self.rho1_end
            )));
        }
        if !(self.rho1_step > 0.0 && self.rho1_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho1 step {} must be positive",
                self.rho1_step
            )));
        }
        SliceSpec {
            rho1: self.rho1_start,
            ..self.slice
        }
        .validate()
    }

    /// Slice positions `start + k·step`, up to and including `end`.
    pub fn rho1_values(&self) -> Vec<f64> {
        let span = (self.rho1_end - self.rho1_start) / self.rho1_step;
        let count = (span + 1e-9).floor() as usize;
        (0..=count)
            .map(|k| self.rho1_start + k as f64 * self.rho1_step)
            .collect()
    }
}

/// A sampled singularity surface: slices ordered by ascending `rho1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularityCloud {
    pub slices: Vec<Slice>,
    pub spec: SweepSpec,
    pub geometry_fingerprint: String,
}

impl SingularityCloud {
    /// Groups loose points into slices by their exact `rho1` value.
    pub fn from_points(
        mut points: Vec<SingularPoint>,
        spec: SweepSpec,
        geometry_fingerprint: String,
    ) -> Self {
        points.sort_by(|a, b| a.rho1.total_cmp(&b.rho1));
        let mut slices: Vec<Slice> = Vec::new();
        for p in points {
            match slices.last_mut() {
                Some(s) if s.rho1 == p.rho1 => s.points.push(p),
                _ => slices.push(Slice {
                    rho1: p.rho1,
                    points: vec![p],
                    stats: SliceStats::default(),
                }),
            }
        }
        for s in &mut slices {
            sort_points(&mut s.points);
        }
        Self {
            slices,
            spec,
            geometry_fingerprint,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &SingularPoint> + '_ {
        self.slices.iter().flat_map(|s| s.points.iter())
    }

    pub fn len(&self) -> usize {
        self.slices.iter().map(|s| s.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_at(&self, rho1: f64) -> Option<&Slice> {
        self.slices.iter().find(|s| s.rho1 == rho1)
    }

    pub fn stats(&self) -> SliceStats {
        let mut total = SliceStats::default();
        for s in &self.slices {
            total.merge(&s.stats);
        }
        total
    }

    /// Hex digest of the point coordinates, in order.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for p in self.points() {
            for v in [p.rho1, p.rho2, p.rho3, p.alpha, p.theta1] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stacks slices over the `rho1` range of the spec. Slices run in parallel.
pub fn sweep_surface(geom: &ManipulatorGeometry, spec: &SweepSpec) -> Result<SingularityCloud> {
    spec.validate()?;
    let slices = spec
        .rho1_values()
        .into_par_iter()
        .map(|rho1| compute_slice(geom, &SliceSpec { rho1, ..spec.slice }))
        .collect::<Result<Vec<_>>>()?;
    Ok(SingularityCloud {
        slices,
        spec: *spec,
        geometry_fingerprint: geom.fingerprint(),
    })
}
