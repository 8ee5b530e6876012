use swarmsim::metrics::{landing_rmse, rms, slot_error, RmseWindow};
use swarmsim::mission::PhaseKind;
use swarmsim::output::trace_csv;
use swarmsim::sim::EventKind;
use swarmsim::{run, run_batch, AgentId, Pose2D, Scenario, SimTrace, Vec3};

fn noisy(speed: f64, seed: u64) -> SimTrace {
    run(&Scenario::default().with_speed(speed).with_seed(seed)).unwrap()
}

#[test]
fn same_seed_same_trace() {
    let a = noisy(1.0, 11);
    let b = noisy(1.0, 11);
    assert_eq!(a, b);
    assert_eq!(trace_csv(&a), trace_csv(&b));
    assert_ne!(trace_csv(&a), trace_csv(&noisy(1.0, 12)));
}

#[test]
fn parallel_batch_matches_serial_runs() {
    let s = Scenario::default().with_speed(0.5);
    let serial = run_batch(&s, 8, 100, 0).unwrap();
    let parallel = run_batch(&s, 8, 100, 8).unwrap();
    assert_eq!(serial, parallel);
    for (i, t) in serial.iter().enumerate() {
        assert_eq!(t.seed, 100 + i as u64);
        assert_eq!(*t, run(&s.clone().with_seed(100 + i as u64)).unwrap());
    }
}

#[test]
fn observations_only_on_frame_ticks() {
    let t = noisy(0.5, 3);
    let rate = Scenario::default().camera.rate;
    let mut last = -1i64;
    for tick in &t.ticks {
        let frame = (tick.t * rate + 1e-9).floor() as i64;
        if frame == last {
            assert!(tick.observation.is_none(), "observation between frames at t={}", tick.t);
        }
        last = frame;
        if let Some(obs) = &tick.observation {
            assert_eq!(obs.timestamp, tick.t);
        }
    }
    let frames = t.ticks.iter().filter(|k| k.observation.is_some()).count() as f64;
    let duration = t.ticks.last().unwrap().t;
    assert!(frames <= duration * rate + 1.0);
}

#[test]
fn no_teleportation() {
    let s = Scenario::default();
    let v_max = s.leader_drone.v_max_xy.hypot(s.leader_drone.v_max_z);
    for speed in [0.0, 1.5] {
        let t = noisy(speed, 5);
        for pair in t.ticks.windows(2) {
            for (a, b) in pair[0].agents.iter().zip(&pair[1].agents) {
                let step = (b.position - a.position).norm();
                assert!(step <= (v_max + 1e-9) * t.dt, "agent {} moved {step} in one tick", a.id);
            }
        }
    }
}

#[test]
fn noiseless_static_landing_is_centimeter_exact() {
    let t = run(&Scenario::default().noiseless()).unwrap();
    assert_eq!(t.final_phase(), PhaseKind::Touchdown);
    for id in t.formation.ids() {
        let k = t.touchdown_tick(id).unwrap();
        assert!(slot_error(&t, k, id).unwrap() < 0.01);
    }
}

#[test]
fn landed_drones_ride_the_pad_and_stay_off() {
    let t = run(&Scenario::default().noiseless().with_speed(1.0)).unwrap();
    for id in t.formation.ids() {
        let k = t.touchdown_tick(id).unwrap();
        let offset = |tick: usize| {
            let rec = &t.ticks[tick];
            let a = rec.agents.iter().find(|a| a.id == id).unwrap();
            let p = &rec.rover.pose;
            let (s, c) = p.theta.sin_cos();
            let (dx, dy) = (a.position.x - p.x, a.position.y - p.y);
            (c * dx + s * dy, -s * dx + c * dy, a.position.z)
        };
        let at_touchdown = offset(k + 1);
        for tick in k + 1..t.ticks.len() {
            let a = t.ticks[tick].agents.iter().find(|a| a.id == id).unwrap();
            assert!(!a.motors_on);
            assert_eq!(a.velocity, Vec3::zero());
            let o = offset(tick);
            assert!((o.0 - at_touchdown.0).abs() < 1e-9 && (o.1 - at_touchdown.1).abs() < 1e-9);
            assert_eq!(o.2, at_touchdown.2);
        }
    }
}

#[test]
fn noiseless_touchdowns_respect_landing_threshold() {
    for speed in [0.0, 0.5, 1.0, 1.5] {
        let s = Scenario::default().noiseless().with_speed(speed);
        let t = run(&s).unwrap();
        for id in t.formation.ids() {
            let k = t.touchdown_tick(id).expect("landed");
            assert!(slot_error(&t, k, id).unwrap() <= s.mission.landing_threshold);
        }
    }
}

#[test]
fn events_are_causally_ordered() {
    let t = noisy(1.0, 9);
    for pair in t.events.windows(2) {
        assert!(pair[0].tick <= pair[1].tick);
    }
    let mut phase = PhaseKind::Search;
    for e in &t.events {
        assert_eq!(t.ticks[e.tick].t, e.t);
        if let EventKind::Phase { from, to } = e.kind {
            assert_eq!(from, phase);
            assert!(from.can_transition_to(to));
            phase = to;
        }
    }
    assert_eq!(phase, t.final_phase());
}

#[test]
fn in_formation_start_moves_with_the_rover() {
    let s = Scenario::default().with_speed(1.0).starting_in_formation();
    assert!(s.drones.iter().all(|d| d.velocity == Vec3::new(1.0, 0.0, 0.0)));
    let t = run(&s.noiseless()).unwrap();
    assert_eq!(t.final_phase(), PhaseKind::Touchdown);
}

/// Applies one planar rigid motion to every position in the trace.
fn moved(trace: &SimTrace, motion: &Pose2D) -> SimTrace {
    let mut t = trace.clone();
    for tick in &mut t.ticks {
        for a in &mut tick.agents {
            let [x, y] = motion.transform_point([a.position.x, a.position.y]);
            a.position = Vec3::new(x, y, a.position.z);
        }
        tick.rover.pose = motion.compose(&tick.rover.pose);
    }
    t
}

#[test]
fn rmse_is_frame_independent_and_consistent() {
    let t = noisy(1.0, 21);
    let r = landing_rmse(&t, RmseWindow::Phase).unwrap();
    let per: Vec<f64> = r.per_drone.values().copied().collect();
    assert!((rms(&per).unwrap() - r.overall).abs() < 1e-12);
    let m = landing_rmse(&moved(&t, &Pose2D::new(3.0, -7.0, 2.1)), RmseWindow::Phase).unwrap();
    for (id, v) in &r.per_drone {
        assert!((m.per_drone[id] - v).abs() < 1e-9);
    }
    let fin = landing_rmse(&t, RmseWindow::Final).unwrap();
    assert_eq!(fin.per_drone.len(), 3);
    assert!(fin.per_drone.contains_key(&AgentId(2)));
}
