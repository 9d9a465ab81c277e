//! Largest singularity-free cubes in joint space.
//!
//! The clearance of a joint vector is its Chebyshev distance to the sampled
//! singularity surface, capped by its distance to the boundary of the
//! sampled domain (beyond which the cloud says nothing). A Hooke–Jeeves
//! pattern search moves the centre to a local maximum of that clearance;
//! the cube of half-width `d_min` around it, shrunk by a security margin,
//! yields the joint limits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::JointVector;
use crate::model::ManipulatorGeometry;
use crate::singularity::{compute_slice, SingularPoint, SingularityCloud, SliceSpec, SweepSpec};

/// L∞ distance between two joint vectors.
pub fn chebyshev_distance(p: &JointVector, q: &JointVector) -> f64 {
    (p.rho1 - q.rho1)
        .abs()
        .max((p.rho2 - q.rho2).abs())
        .max((p.rho3 - q.rho3).abs())
}

fn chebyshev(p: [f64; 3], q: [f64; 3]) -> f64 {
    (p[0] - q[0])
        .abs()
        .max((p[1] - q[1]).abs())
        .max((p[2] - q[2]).abs())
}

/// Axis-aligned joint-space region, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Domain {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(lo[i].is_finite() && hi[i].is_finite() && hi[i] > lo[i]) {
                return Err(Error::InvalidParameter(format!(
                    "domain axis {} has bounds [{}, {}]",
                    i + 1,
                    lo[i],
                    hi[i]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The region a sweep actually samples: its `rho1` range times the
    /// `rho2`/`rho3` filter.
    pub fn from_sweep(spec: &SweepSpec) -> Self {
        let [lo, hi] = spec.slice.rho_bounds;
        Self {
            lo: [spec.rho1_start, lo, lo],
            hi: [spec.rho1_end, hi, hi],
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.lo[i] && p[i] <= self.hi[i])
    }

    /// Distance from an interior point to the nearest face, with the axis
    /// and side (`false` = lower) of that face.
    pub fn boundary_distance(&self, p: [f64; 3]) -> (f64, usize, bool) {
        let mut best = (f64::INFINITY, 0, false);
        for i in 0..3 {
            let lo = p[i] - self.lo[i];
            let hi = self.hi[i] - p[i];
            if lo < best.0 {
                best = (lo, i, false);
            }
            if hi < best.0 {
                best = (hi, i, true);
            }
        }
        best
    }
}

/// What bounds the clearance of a centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    Point(SingularPoint),
    Boundary { axis: usize, upper: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clearance {
    pub d: f64,
    pub witness: Witness,
}

/// Below this many points the reduction runs on one thread.
const PARALLEL_THRESHOLD: usize = 1 << 15;

/// Nearest cloud point in the Chebyshev metric; ties go to the earliest point.
fn nearest_point(points: &[SingularPoint], c: [f64; 3]) -> Option<(f64, usize)> {
    let better = |a: (f64, usize), b: (f64, usize)| {
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    if points.len() < PARALLEL_THRESHOLD {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (chebyshev(c, p.joints()), i))
            .reduce(better)
    } else {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| (chebyshev(c, p.joints()), i))
            .reduce_with(better)
    }
}

/// Flat, contiguous view of a cloud for repeated clearance queries.
#[derive(Debug, Clone)]
pub struct ClearanceField {
    points: Vec<SingularPoint>,
    domain: Domain,
}

impl ClearanceField {
    pub fn new(cloud: &SingularityCloud, domain: Domain) -> Self {
        Self {
            points: cloud.points().copied().collect(),
            domain,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn clearance(&self, center: &JointVector) -> Result<Clearance> {
        let c = center.to_array();
        if !self.domain.contains(c) {
            return Err(Error::CenterOutsideDomain { center: c });
        }
        let (db, axis, upper) = self.domain.boundary_distance(c);
        let mut best = Clearance {
            d: db,
            witness: Witness::Boundary { axis, upper },
        };
        if let Some((d, i)) = nearest_point(&self.points, c) {
            // a cloud point at the same distance as the boundary wins the tie
            if d <= best.d {
                best = Clearance {
                    d,
                    witness: Witness::Point(self.points[i]),
                };
            }
        }
        Ok(best)
    }
}

/// Chebyshev clearance of `center` from the cloud and the domain boundary.
pub fn min_clearance(
    cloud: &SingularityCloud,
    center: &JointVector,
    domain: &Domain,
) -> Result<Clearance> {
    ClearanceField::new(cloud, *domain).clearance(center)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjParams {
    pub initial_step: f64,
    pub reduction: f64,
    pub min_step: f64,
    pub max_iters: usize,
}

impl Default for HjParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            reduction: 0.5,
            min_step: 0.125,
            max_iters: 10_000,
        }
    }
}

impl HjParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_step > 0.0
            && self.initial_step >= self.min_step
            && self.initial_step.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "steps need 0 < min_step ({}) <= initial_step ({})",
                self.min_step, self.initial_step
            )));
        }
        if !(self.reduction > 0.0 && self.reduction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reduction {} must lie in (0, 1)",
                self.reduction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxQuery {
    pub center0: JointVector,
    pub security: f64,
    pub domain: Domain,
    pub optimizer: HjParams,
}

impl BoxQuery {
    pub fn new(center0: JointVector, domain: Domain) -> Self {
        Self {
            center0,
            security: 0.1,
            domain,
            optimizer: HjParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(self.security >= 0.0 && self.security.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "security margin {} must be >= 0",
                self.security
            )));
        }
        let c = self.center0.to_array();
        let inside = (0..3).all(|i| c[i] > self.domain.lo[i] && c[i] < self.domain.hi[i]);
        if !inside {
            return Err(Error::CenterOutsideDomain { center: c });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    Start,
    Exploratory,
    Pattern,
    Shrink,
}

/// One accepted point (or step reduction) of the pattern search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub kind: MoveKind,
    pub center: JointVector,
    pub value: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjResult {
    pub center: JointVector,
    pub d_min: f64,
    pub initial_d_min: f64,
    pub witness: Witness,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

struct Objective<'f> {
    field: &'f ClearanceField,
    evaluations: usize,
}

impl Objective<'_> {
    /// Clearance, or −∞ outside the domain so such moves never improve.
    fn eval(&mut self, c: [f64; 3]) -> f64 {
        self.evaluations += 1;
        self.field
            .clearance(&JointVector::from_array(c))
            .map_or(f64::NEG_INFINITY, |cl| cl.d)
    }
}

/// Exploratory moves around `base` with value `f_base`: each axis in order
/// tries `+step`, then `-step`, keeping the first strict improvement.
fn explore(obj: &mut Objective, base: [f64; 3], f_base: f64, step: f64) -> ([f64; 3], f64) {
    let mut x = base;
    let mut fx = f_base;
    for axis in 0..3 {
        for dir in [1.0, -1.0] {
            let mut trial = x;
            trial[axis] += dir * step;
            let ft = obj.eval(trial);
            if ft > fx {
                x = trial;
                fx = ft;
                break;
            }
        }
    }
    (x, fx)
}

/// Hooke–Jeeves pattern search maximising the clearance.
///
/// Ties count as failures, so the search cannot cycle on plateaus of the
/// piecewise-linear objective. With integer start points and the default
/// steps every visited centre lies on the 1/8 lattice around the start.
pub fn hooke_jeeves_maximize(cloud: &SingularityCloud, query: &BoxQuery) -> Result<HjResult> {
    query.validate()?;
    let field = ClearanceField::new(cloud, query.domain);
    hooke_jeeves_on(&field, query)
}

pub(crate) fn hooke_jeeves_on(field: &ClearanceField, query: &BoxQuery) -> Result<HjResult> {
    let params = query.optimizer;
    let mut obj = Objective {
        field,
        evaluations: 0,
    };
    let mut base = query.center0.to_array();
    let mut f_base = obj.eval(base);
    let initial = f_base;
    let mut step = params.initial_step;
    let mut iterations = 0;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        kind: MoveKind::Start,
        center: query.center0,
        value: f_base,
        step,
    }];

    while step >= params.min_step && iterations < params.max_iters {
        iterations += 1;
        let (x, fx) = explore(&mut obj, base, f_base, step);
        if fx > f_base {
            trace.push(TraceEntry {
                iteration: iterations,
                kind: MoveKind::Exploratory,
                center: JointVector::from_array(x),
                value: fx,
                step,
            });
            // Pattern moves: keep jumping along the successful direction
            // while the exploration around the jump point improves.
            let (mut prev, mut cur, mut f_cur) = (base, x, fx);
            loop {
                if iterations >= params.max_iters {
                    break;
                }
                let jump = [
                    2.0 * cur[0] - prev[0],
                    2.0 * cur[1] - prev[1],
                    2.0 * cur[2] - prev[2],
                ];
                let f_jump = obj.eval(jump);
                let (y, fy) = explore(&mut obj, jump, f_jump, step);
                if fy > f_cur {
                    iterations += 1;
                    trace.push(TraceEntry {
                        iteration: iterations,
                        kind: MoveKind::Pattern,
                        center: JointVector::from_array(y),
                        value: fy,
                        step,
                    });
                    prev = cur;
                    cur = y;
                    f_cur = fy;
                } else {
                    break;
                }
            }
            base = cur;
            f_base = f_cur;
        } else {
            step *= params.reduction;
            trace.push(TraceEntry {
                iteration: iterations,
                kind: MoveKind::Shrink,
                center: JointVector::from_array(base),
                value: f_base,
                step,
            });
        }
    }

    let center = JointVector::from_array(base);
    let clearance = field.clearance(&center)?;
    Ok(HjResult {
        center,
        d_min: clearance.d,
        initial_d_min: initial,
        witness: clearance.witness,
        iterations,
        evaluations: obj.evaluations,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub min: f64,
    pub max: f64,
}

/// Optimised cube and the joint limits it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityFreeBox {
    pub center: JointVector,
    pub d_min: f64,
    pub edge: f64,
    pub security: f64,
    pub limits: [JointLimit; 3],
    pub witness: Witness,
    pub cloud_fingerprint: String,
}

impl SingularityFreeBox {
    /// Assembles the box for an optimised centre and clearance.
    pub fn from_clearance(
        center: JointVector,
        d_min: f64,
        security: f64,
        witness: Witness,
        cloud_fingerprint: String,
    ) -> Result<Self> {
        if d_min <= security {
            return Err(Error::BoxDegenerate { d_min, security });
        }
        let half = d_min - security;
        let c = center.to_array();
        let limits = [0, 1, 2].map(|i| JointLimit {
            min: c[i] - half,
            max: c[i] + half,
        });
        Ok(Self {
            center,
            d_min,
            edge: 2.0 * d_min,
            security,
            limits,
            witness,
            cloud_fingerprint,
        })
    }

    /// Half-width of the margined cube, `d_min - s`.
    pub fn half_width(&self) -> f64 {
        self.d_min - self.security
    }

    /// True when `q` lies strictly inside the margined cube.
    pub fn contains_strictly(&self, q: [f64; 3]) -> bool {
        (0..3).all(|i| q[i] > self.limits[i].min && q[i] < self.limits[i].max)
    }
}

/// Optimises the cube centre and applies the security margin.
pub fn build_box(
    cloud: &SingularityCloud,
    query: &BoxQuery,
) -> Result<(SingularityFreeBox, HjResult)> {
    let result = hooke_jeeves_maximize(cloud, query)?;
    let b = SingularityFreeBox::from_clearance(
        result.center,
        result.d_min,
        query.security,
        result.witness,
        cloud.fingerprint(),
    )?;
    Ok((b, result))
}

/// Sampling used to re-check a box independently of the cloud it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifySpec {
    /// Spacing of the re-sliced `rho1` values (multiples of this step).
    pub rho1_step: f64,
    /// Grid count for both `theta1` and `alpha`.
    pub grid: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            rho1_step: 0.25,
            grid: 1440,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCheck {
    pub spec: VerifySpec,
    pub slices: usize,
    /// Singular points found within the box's `rho2`/`rho3` range.
    pub points_in_range: usize,
    /// Points strictly inside the margined cube, by `rho1` then slice order.
    pub intruders: Vec<SingularPoint>,
    /// Largest `half_width - distance` over the intruders; 0 when none.
    pub max_depth: f64,
}

impl BoxCheck {
    pub fn is_clear(&self) -> bool {
        self.intruders.is_empty()
    }
}

/// Re-slices the box's joint ranges at a finer sampling and reports
/// singular points strictly inside the margined cube.
///
/// The optimised cube is only clear of the cloud it was computed from; the
/// surface between slices can still reach into it, typically at a corner
/// where the surface is steep in `rho1`.
pub fn verify_box(
    geom: &ManipulatorGeometry,
    b: &SingularityFreeBox,
    spec: &VerifySpec,
) -> Result<BoxCheck> {
    if !(spec.rho1_step > 0.0 && spec.rho1_step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "verification step {} must be positive",
            spec.rho1_step
        )));
    }
    let [l1, l2, l3] = b.limits;
    let bounds = [l2.min.min(l3.min).max(0.0), l2.max.max(l3.max)];
    let first = (l1.min.max(0.0) / spec.rho1_step).ceil() as i64;
    let last = (l1.max / spec.rho1_step).floor() as i64;
    let slices = (first..=last)
        .into_par_iter()
        .map(|k| {
            let slice = SliceSpec {
                rho1: k as f64 * spec.rho1_step,
                n_theta1: spec.grid,
                n_alpha: spec.grid,
                rho_bounds: bounds,
                ..SliceSpec::default()
            };
            compute_slice(geom, &slice)
        })
        .collect::<Result<Vec<_>>>()?;
    let center = b.center.to_array();
    let mut check = BoxCheck {
        spec: *spec,
        slices: slices.len(),
        points_in_range: 0,
        intruders: Vec::new(),
        max_depth: 0.0,
    };
    for slice in slices {
        check.points_in_range += slice.points.len();
        for p in slice.points {
            if b.contains_strictly(p.joints()) {
                check.max_depth = check
                    .max_depth
                    .max(b.half_width() - chebyshev(center, p.joints()));
                check.intruders.push(p);
            }
        }
    }
    Ok(check)
}
