use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use swarmsim::vehicles::rover_step;
use swarmsim::vision::{compensated_tag_velocity, detect_tag, estimate_rigid_transform, RigidTransform2};
use swarmsim::{AgentId, AgentState, CameraModel, NoiseModel, Pose2D, RoverCommand, RoverState, Vec3};

fn hovering(x: f64, y: f64, z: f64) -> AgentState {
    AgentState::new(AgentId(0), Vec3::new(x, y, z))
}

#[test]
fn noise_std_matches_sigma() {
    let cam = CameraModel::default();
    let noise = NoiseModel {
        sigma_pos: 0.05,
        sigma_yaw: 0.0,
        dropout_prob: 0.0,
    };
    let leader = hovering(0.0, 0.0, 2.0);
    let pad = Pose2D::new(0.0, 0.0, 0.0);
    let truth = Vec3::new(0.0, 0.0, -1.3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut sums = [0.0f64; 3];
    let mut squares = [0.0f64; 3];
    for k in 0..n {
        let obs = detect_tag(&leader, &pad, 0.7, &cam, &noise, k as f64 / 30.0, &mut rng).unwrap();
        let e = obs.relative_position - truth;
        for (i, v) in [e.x, e.y, e.z].into_iter().enumerate() {
            sums[i] += v;
            squares[i] += v * v;
        }
    }
    for i in 0..3 {
        let mean = sums[i] / n as f64;
        let std = ((squares[i] - n as f64 * mean * mean) / (n as f64 - 1.0)).sqrt();
        assert!((std / noise.sigma_pos - 1.0).abs() < 0.05, "axis {i}: std {std}");
    }
}

#[test]
fn compensated_velocity_in_camera_frame() {
    // rover drives at 1 m/s under a hovering leader, heading -x
    let cam = CameraModel::default();
    let noise = NoiseModel::noiseless();
    let leader = hovering(1.0, 0.0, 2.0);
    let cmd = RoverCommand { linear: 1.0, angular: 0.0 };
    let mut rover = RoverState::at_rest(Pose2D::new(1.2, 0.0, PI), 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut frames = Vec::new();
    let dt = 0.01;
    let mut last_frame = -1;
    for k in 1..=40 {
        rover = rover_step(&rover, &cmd, dt);
        let t = k as f64 * dt;
        let frame = (t * cam.rate + 1e-9).floor() as i64;
        if frame > last_frame {
            last_frame = frame;
            frames.extend(detect_tag(&leader, &rover.pose, rover.pad_height, &cam, &noise, t, &mut rng));
        }
    }
    assert!(frames.len() >= 10);
    let v = compensated_tag_velocity(&frames).unwrap();
    assert!((v - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-9, "{v:?}");
}

fn cone_direction() -> impl Strategy<Value = Vec3> {
    // directions strictly inside the default cone around -z
    (0.0..1.15f64, -PI..PI).prop_map(|(off, az)| Vec3::new(off.sin() * az.cos(), off.sin() * az.sin(), -off.cos()))
}

proptest! {
    #[test]
    fn detection_envelope(dir in cone_direction(), range in 0.0..6.0f64, seed in any::<u64>()) {
        let cam = CameraModel::default();
        let noise = NoiseModel { dropout_prob: 0.0, ..NoiseModel::default() };
        let leader = hovering(0.0, 0.0, 3.0);
        let tag = leader.position + dir * range;
        let pad = Pose2D::new(tag.x, tag.y, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = detect_tag(&leader, &pad, tag.z, &cam, &noise, 0.0, &mut rng);
        let inside = range >= cam.min_range && range <= cam.max_range;
        prop_assert_eq!(obs.is_some(), inside, "range {}", range);
    }

    #[test]
    fn rigid_transform_exact_on_clean_points(
        pts in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 3..12),
        theta in -PI..PI,
        tx in -5.0..5.0f64,
        ty in -5.0..5.0f64,
    ) {
        let prev: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let spread = prev.iter().map(|p| (p[0] - prev[0][0]).hypot(p[1] - prev[0][1])).fold(0.0, f64::max);
        prop_assume!(spread > 1e-3);
        let truth = RigidTransform2 { rotation: theta, translation: [tx, ty], rms_residual: 0.0 };
        let curr: Vec<[f64; 2]> = prev.iter().map(|&p| truth.apply(p)).collect();
        let est = estimate_rigid_transform(&prev, &curr).unwrap();
        prop_assert!(est.rms_residual < 1e-9);
        let d = (est.rotation - theta + PI).rem_euclid(2.0 * PI) - PI;
        prop_assert!(d.abs() < 1e-9);
    }

    #[test]
    fn rigid_transform_fits_noise_at_least_as_well_as_truth(
        pts in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 3..12),
        theta in -PI..PI,
        seed in any::<u64>(),
    ) {
        let prev: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let truth = RigidTransform2 { rotation: theta, translation: [0.4, -1.1], rms_residual: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.05).unwrap();
        let curr: Vec<[f64; 2]> = prev
            .iter()
            .map(|&p| {
                let [x, y] = truth.apply(p);
                [x + normal.sample(&mut rng), y + normal.sample(&mut rng)]
            })
            .collect();
        let Ok(est) = estimate_rigid_transform(&prev, &curr) else { return Ok(()) };
        prop_assert!(est.rms_residual <= truth.rms_error(&prev, &curr) + 1e-12);
    }
}
