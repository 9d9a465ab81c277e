//! Joint-space singularity analysis for planar 3-RPR parallel manipulators.
//!
//! The pipeline: [`singularity::sweep_surface`] samples the parallel
//! singularity surface in joint space as a stack of fixed-`rho1` slices,
//! [`boxsearch::build_box`] grows the largest Chebyshev cube around a start
//! point that stays clear of it, and [`workspace::cube_image`] maps that
//! cube through direct kinematics into the platform workspace.

pub mod boxsearch;
pub mod error;
pub mod export;
pub mod kinematics;
pub mod model;
pub mod singularity;
pub mod workspace;

pub use boxsearch::{
    build_box, chebyshev_distance, hooke_jeeves_maximize, min_clearance, verify_box, BoxCheck,
    BoxQuery, Clearance, Domain, HjParams, HjResult, SingularityFreeBox, VerifySpec, Witness,
};
pub use error::{Error, Result};
pub use kinematics::{
    attachment_points, direct_kinematics, inverse_kinematics, leg_angles, leg_lines, leg_lines_det,
    solve_direct_kinematics, DkpOptions, JointVector, LegAngles, LegLine, Pose, EPS_LEN,
};
pub use model::{load_geometry, platform_angle, ManipulatorGeometry};
pub use singularity::{
    compute_slice, leg_lengths_from, reduced_residual, singularity_residual, sweep_surface,
    ScanOrder, SingularPoint, SingularityCloud, Slice, SliceSpec, SweepSpec,
};
pub use workspace::{
    cube_image, project_xy, workspace_singularity_scan, Aspect, CubeImage, ImageOptions, Region,
    WorkspaceSample,
};
