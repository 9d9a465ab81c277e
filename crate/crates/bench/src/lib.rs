//! Benchmark fixtures shared by the criterion targets.

use rpr_core::{
    sweep_surface, Domain, ManipulatorGeometry, SingularityCloud, SliceSpec, SweepSpec,
};

pub fn slice_spec(rho1: f64, n: usize) -> SliceSpec {
    SliceSpec {
        rho1,
        n_theta1: n,
        n_alpha: n,
        rho_bounds: [0.0, 60.0],
        ..SliceSpec::default()
    }
}

/// Reference surface over `rho1` in [0, 50] with an `n x n` grid per slice.
pub fn reference_cloud(step: f64, n: usize) -> (SingularityCloud, Domain) {
    let spec = SweepSpec {
        rho1_start: 0.0,
        rho1_end: 50.0,
        rho1_step: step,
        slice: slice_spec(0.0, n),
    };
    let cloud = sweep_surface(&ManipulatorGeometry::reference(), &spec).expect("reference sweep");
    (cloud, Domain::from_sweep(&spec))
}
