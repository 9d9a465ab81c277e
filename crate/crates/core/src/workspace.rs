//! Workspace images of joint-space boxes.
//!
//! Every joint vector of a singularity-free box has the same number of
//! assembly modes, and each mode stays on one side of the singularity
//! locus. The sign of the leg-line determinant therefore labels the aspect
//! a workspace sample belongs to.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxsearch::SingularityFreeBox;
use crate::error::{Error, Result};
use crate::kinematics::{
    direct_kinematics, inverse_kinematics, leg_angles, leg_lines_det, DkpOptions, JointVector, Pose,
};
use crate::model::ManipulatorGeometry;
use crate::singularity::singularity_residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Aspect {
    Negative,
    Positive,
}

impl Aspect {
    pub fn of(det: f64) -> Self {
        if det > 0.0 {
            Aspect::Positive
        } else {
            Aspect::Negative
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Aspect::Positive => "+",
            Aspect::Negative => "-",
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Aspect::Positive => 1,
            Aspect::Negative => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceSample {
    pub pose: Pose,
    pub source_q: JointVector,
    /// Leg-line determinant at the pose.
    pub det: f64,
    pub aspect: Aspect,
    /// Position of `source_q` on the sampling grid.
    pub grid_index: [usize; 3],
}

/// A DKP solution that sits on (or numerically at) the singularity locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularSample {
    pub pose: Pose,
    pub source_q: JointVector,
    pub det: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageOptions {
    pub n_per_axis: usize,
    /// Samples with |det| at or below this are singular.
    pub det_floor: f64,
    /// Samples with |det| below this are counted as near-singular.
    pub near_singular: f64,
    pub dkp: DkpOptions,
}

impl Default for ImageOptions {
    fn default() -> Self {
        Self {
            n_per_axis: 25,
            det_floor: 1e-8,
            near_singular: 1e-3,
            dkp: DkpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeImage {
    /// Sorted by grid index (lexicographic in `source_q`), then by orientation.
    pub samples: Vec<WorkspaceSample>,
    /// Solutions that break the box's singularity-free claim.
    pub violations: Vec<SingularSample>,
    pub near_singular: usize,
    /// Grid joint vectors without any real assembly mode.
    pub unreachable: usize,
    pub n_per_axis: usize,
}

impl CubeImage {
    pub fn groups(&self) -> BTreeMap<Aspect, Vec<WorkspaceSample>> {
        let mut groups: BTreeMap<Aspect, Vec<WorkspaceSample>> = BTreeMap::new();
        for s in &self.samples {
            groups.entry(s.aspect).or_default().push(*s);
        }
        groups
    }

    /// Connected components per aspect of the sample adjacency graph.
    ///
    /// Two samples are adjacent when their grid joint vectors are neighbours
    /// along one axis and their poses lie within `link_radius` (Chebyshev in
    /// `(x, y, alpha)`). Component sizes are returned largest first. When a
    /// geometry yields more components than determinant signs, these
    /// components are the finer aspect labelling.
    pub fn components(&self, link_radius: f64) -> BTreeMap<Aspect, Vec<usize>> {
        let mut by_grid: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            by_grid.entry(s.grid_index).or_default().push(i);
        }
        let mut uf = UnionFind::<usize>::new(self.samples.len());
        for (idx, members) in &by_grid {
            for axis in 0..3 {
                let mut n = *idx;
                n[axis] += 1;
                let Some(neighbours) = by_grid.get(&n) else {
                    continue;
                };
                for &a in members {
                    let sa = &self.samples[a];
                    // nearest pose of the same aspect at the neighbouring grid point
                    let best = neighbours
                        .iter()
                        .copied()
                        .filter(|&b| self.samples[b].aspect == sa.aspect)
                        .map(|b| (sa.pose.distance(&self.samples[b].pose), b))
                        .min_by(|x, y| x.0.total_cmp(&y.0));
                    if let Some((d, b)) = best {
                        if d <= link_radius {
                            uf.union(a, b);
                        }
                    }
                }
            }
        }
        let mut sizes: BTreeMap<Aspect, BTreeMap<usize, usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            *sizes
                .entry(s.aspect)
                .or_default()
                .entry(uf.find(i))
                .or_default() += 1;
        }
        sizes
            .into_iter()
            .map(|(aspect, comps)| {
                let mut v: Vec<usize> = comps.into_values().collect();
                v.sort_unstable_by(|a, b| b.cmp(a));
                (aspect, v)
            })
            .collect()
    }
}

/// Joint vectors on an `n³` grid spanning the margined box, inclusive.
pub fn box_grid(b: &SingularityFreeBox, n: usize) -> Vec<([usize; 3], JointVector)> {
    let axis = |i: usize, k: usize| {
        let l = b.limits[i];
        l.min + (l.max - l.min) * k as f64 / (n - 1) as f64
    };
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out.push((
                    [i, j, k],
                    JointVector::new(axis(0, i), axis(1, j), axis(2, k)),
                ));
            }
        }
    }
    out
}

/// Maps the box through direct kinematics and labels every solution by aspect.
pub fn cube_image(
    geom: &ManipulatorGeometry,
    b: &SingularityFreeBox,
    opts: &ImageOptions,
) -> Result<CubeImage> {
    if opts.n_per_axis < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_per_axis {} < 2",
            opts.n_per_axis
        )));
    }
    let grid = box_grid(b, opts.n_per_axis);
    let per_q: Vec<Vec<Pose>> = grid
        .par_iter()
        .map(|(_, q)| direct_kinematics(geom, q, &opts.dkp))
        .collect::<Result<_>>()?;

    let mut image = CubeImage {
        samples: Vec::new(),
        violations: Vec::new(),
        near_singular: 0,
        unreachable: 0,
        n_per_axis: opts.n_per_axis,
    };
    for ((index, q), poses) in grid.iter().zip(per_q) {
        if poses.is_empty() {
            image.unreachable += 1;
        }
        for pose in poses {
            let det = leg_angles(geom, &pose)
                .ok()
                .map(|a| leg_lines_det(geom, &a));
            match det {
                Some(det) if det.abs() > opts.det_floor => {
                    if det.abs() < opts.near_singular {
                        image.near_singular += 1;
                    }
                    image.samples.push(WorkspaceSample {
                        pose,
                        source_q: *q,
                        det,
                        aspect: Aspect::of(det),
                        grid_index: *index,
                    });
                }
                _ => image.violations.push(SingularSample {
                    pose,
                    source_q: *q,
                    det,
                }),
            }
        }
    }
    Ok(image)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub aspect: Aspect,
}

pub fn project_xy(samples: &[WorkspaceSample]) -> Vec<ProjectedPoint> {
    samples
        .iter()
        .map(|s| ProjectedPoint {
            x: s.pose.x,
            y: s.pose.y,
            aspect: s.aspect,
        })
        .collect()
}

/// Rectangle in the `(x, y)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

/// Scalar whose zero set marks workspace singularities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    /// Closed-form singularity polynomial.
    Residual,
    /// Determinant of the leg-line coefficients.
    LineDet,
}

/// A zero crossing on one grid edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// Grid node the edge starts from, and whether the edge runs along y.
    pub node: [usize; 2],
    pub vertical: bool,
    /// Detector values at the two edge endpoints.
    pub ends: [f64; 2],
}

/// Detector values on the `resolution × resolution` node grid; `None` where a leg degenerates.
pub fn singularity_field(
    geom: &ManipulatorGeometry,
    region: &Region,
    alpha: f64,
    resolution: usize,
    detector: Detector,
) -> Vec<Vec<Option<f64>>> {
    let coord = |r: [f64; 2], k: usize| r[0] + (r[1] - r[0]) * k as f64 / (resolution - 1) as f64;
    (0..resolution)
        .into_par_iter()
        .map(|i| {
            (0..resolution)
                .map(|j| {
                    let pose = Pose::new(coord(region.x, i), coord(region.y, j), alpha);
                    let angles = leg_angles(geom, &pose).ok()?;
                    Some(match detector {
                        Detector::Residual => singularity_residual(geom, &angles),
                        Detector::LineDet => leg_lines_det(geom, &angles),
                    })
                })
                .collect()
        })
        .collect()
}

/// Zero set of the singularity condition over an `(x, y)` grid at fixed `alpha`.
///
/// Each grid edge whose endpoint values change sign contributes one point,
/// placed by linear interpolation. Nodes with a degenerate leg are skipped.
pub fn workspace_singularity_scan(
    geom: &ManipulatorGeometry,
    region: &Region,
    alpha: f64,
    resolution: usize,
) -> Result<Vec<CurvePoint>> {
    scan_with(geom, region, alpha, resolution, Detector::Residual)
}

pub fn scan_with(
    geom: &ManipulatorGeometry,
    region: &Region,
    alpha: f64,
    resolution: usize,
    detector: Detector,
) -> Result<Vec<CurvePoint>> {
    if resolution < 16 {
        return Err(Error::InvalidParameter(format!(
            "resolution {resolution} < 16"
        )));
    }
    if !(region.x[1] > region.x[0] && region.y[1] > region.y[0]) {
        return Err(Error::InvalidParameter(format!("empty region {region:?}")));
    }
    let field = singularity_field(geom, region, alpha, resolution, detector);
    let coord = |r: [f64; 2], k: f64| r[0] + (r[1] - r[0]) * k / (resolution - 1) as f64;
    let mut out = Vec::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let Some(f0) = field[i][j] else {
                continue;
            };
            for vertical in [false, true] {
                let (ni, nj) = if vertical { (i, j + 1) } else { (i + 1, j) };
                if ni >= resolution || nj >= resolution {
                    continue;
                }
                let Some(f1) = field[ni][nj] else {
                    continue;
                };
                let crosses = (f0 == 0.0) || (f1 != 0.0 && (f0 < 0.0) != (f1 < 0.0));
                if !crosses {
                    continue;
                }
                let t = if f0 == 0.0 { 0.0 } else { f0 / (f0 - f1) };
                let (x, y) = if vertical {
                    (coord(region.x, i as f64), coord(region.y, j as f64 + t))
                } else {
                    (coord(region.x, i as f64 + t), coord(region.y, j as f64))
                };
                out.push(CurvePoint {
                    x,
                    y,
                    node: [i, j],
                    vertical,
                    ends: [f0, f1],
                });
            }
        }
    }
    Ok(out)
}

/// Checks that each sample's pose maps back to its grid joint vector.
pub fn ik_roundtrip_error(geom: &ManipulatorGeometry, s: &WorkspaceSample) -> f64 {
    let q = inverse_kinematics(geom, &s.pose);
    (q.rho1 - s.source_q.rho1)
        .abs()
        .max((q.rho2 - s.source_q.rho2).abs())
        .max((q.rho3 - s.source_q.rho3).abs())
}
