//! Sweeps the reference manipulator's singularity surface, grows a
//! singularity-free cube from each start point and images it.
//!
//! `cargo run --release -p rpr-core --example reference_pipeline`

use rpr_core::{
    build_box, cube_image, sweep_surface, verify_box, BoxQuery, Domain, ImageOptions, JointVector,
    ManipulatorGeometry, SliceSpec, SweepSpec, VerifySpec,
};

fn main() -> rpr_core::Result<()> {
    let geom = ManipulatorGeometry::reference();
    let spec = SweepSpec {
        rho1_start: 0.0,
        rho1_end: 50.0,
        rho1_step: 0.5,
        slice: SliceSpec {
            rho_bounds: [0.0, 60.0],
            ..SliceSpec::default()
        },
    };
    let cloud = sweep_surface(&geom, &spec)?;
    println!(
        "{} singular points in {} slices",
        cloud.len(),
        cloud.slices.len()
    );

    for start in [[35.0, 25.0, 45.0], [30.0, 50.0, 35.0]] {
        let query = BoxQuery::new(JointVector::from_array(start), Domain::from_sweep(&spec));
        let (cube, hj) = build_box(&cloud, &query)?;
        let c = cube.center;
        println!(
            "start {start:?}: clearance {:.4} -> {:.4} at ({}, {}, {}) after {} iterations",
            hj.initial_d_min, hj.d_min, c.rho1, c.rho2, c.rho3, hj.iterations
        );
        let image = cube_image(&geom, &cube, &ImageOptions::default())?;
        for (aspect, samples) in image.groups() {
            println!("  aspect {}: {} poses", aspect.label(), samples.len());
        }
        let check = verify_box(&geom, &cube, &VerifySpec::default())?;
        println!(
            "  re-slicing: {} points inside, max depth {:.4}",
            check.intruders.len(),
            check.max_depth
        );
    }
    Ok(())
}
