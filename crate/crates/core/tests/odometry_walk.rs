use roadgrade_core::sim::{corrupt_odometry, OdometryModel};
use roadgrade_core::RigidTransform;

#[test]
fn z_walk_variance_grows_linearly() {
    let sigma = 0.01;
    let model = OdometryModel {
        translation_walk: [0.0, 0.0, sigma],
        ..Default::default()
    };
    let truth = RigidTransform::from_translation(3.0, 4.0, 5.0);
    for k in [10u64, 40] {
        let errs: Vec<f64> = (0..2000u64)
            .map(|seed| corrupt_odometry(&truth, &model, k, seed).translation().z - 5.0)
            .collect();
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = k as f64 * sigma * sigma;
        assert!((var / expected - 1.0).abs() < 0.2, "k = {k}: var {var} vs {expected}");
    }
}

#[test]
fn walk_leaves_other_axes_alone() {
    let model = OdometryModel {
        translation_walk: [0.0, 0.0, 0.05],
        ..Default::default()
    };
    let truth = RigidTransform::from_translation(1.0, 2.0, 3.0);
    let out = corrupt_odometry(&truth, &model, 25, 9);
    assert_eq!(out.translation().x, 1.0);
    assert_eq!(out.translation().y, 2.0);
    assert_eq!(out.rotation(), truth.rotation());
}
