use roadgrade_core::io::report::{timing_csv, waypoints_csv};
use roadgrade_core::patch::build_patches;
use roadgrade_core::sim::{flat_scenario, hills_scenario, run_end_to_end};
use roadgrade_core::{BiasModel, EstimatorConfig, FilterMode, Pose};

#[test]
fn seeded_noisy_world_repeats() {
    let mut spec = hills_scenario(3);
    spec.length = 150.0;
    spec.lidar.azimuth_step_deg = 0.5;
    let sc = spec.build().unwrap();
    let cfg = EstimatorConfig {
        measurement_variance: 0.4,
        ..Default::default()
    };
    let a = run_end_to_end(&sc, &cfg, FilterMode::Incremental).unwrap();
    let b = run_end_to_end(&sc, &cfg, FilterMode::Incremental).unwrap();
    assert_eq!(a.track, b.track);
    assert_eq!(waypoints_csv(&a.rows()), waypoints_csv(&b.rows()));
    assert_eq!(a.points_per_frame, b.points_per_frame);
    assert!(!timing_csv(&a.timing()).is_empty());
}

#[test]
fn noiseless_flat_world_is_level() {
    let mut spec = flat_scenario();
    spec.length = 120.0;
    let sc = spec.build().unwrap();
    let cfg = EstimatorConfig::default().with_bias(BiasModel::default());
    let out = run_end_to_end(&sc, &cfg, FilterMode::Full).unwrap();
    let mut n = 0;
    for k in 0..sc.path.len() {
        if let Some(g) = out.track.filtered_grade(k) {
            assert!(g.abs() < 1e-6, "waypoint {k}: {g}");
            n += 1;
        }
    }
    assert!(n > 100);
}

#[test]
fn patch_centres_follow_heading() {
    let cfg = EstimatorConfig::default();
    for yaw_deg in [0.0f64, 30.0, 90.0, -135.0] {
        let pose = Pose::from_degrees(5.0, -2.0, 0.0, 0.0, 0.0, yaw_deg).unwrap();
        let (front, rear) = build_patches(&pose, &cfg, 0);
        let dx = front.center[0] - rear.center[0];
        let dy = front.center[1] - rear.center[1];
        assert!((dx - cfg.wheelbase * yaw_deg.to_radians().sin()).abs() < 1e-12);
        assert!((dy - cfg.wheelbase * yaw_deg.to_radians().cos()).abs() < 1e-12);
    }
}
