use balance_demo::{initial_fraction_curve, link_trajectory, Simulation};

#[test]
fn trajectory_starts_at_x0_and_saturates() {
    let xs = link_trajectory(0.5, 2.0, 40.0, 50).unwrap();
    assert_eq!(xs.len(), 50);
    assert!((xs[0] - 0.5).abs() < 1e-12);
    assert!(xs.windows(2).all(|w| w[1] >= w[0]));
    assert!(xs[49] > 9.99 && xs[49] <= 10.0);
    assert!(link_trajectory(11.0, 1.0, 1.0, 5).is_err());
}

#[test]
fn fraction_curve_is_symmetric_and_decreasing() {
    let ys = initial_fraction_curve(-1.0, 1.0, 21);
    assert!((ys[10] - 0.5).abs() < 1e-12);
    assert!((ys[0] + ys[20] - 1.0).abs() < 1e-9);
    assert!(ys.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn simulation_reaches_balance_and_stops() {
    let mut sim = Simulation::create(12, 0.0, 0.5, true, 3).unwrap();
    assert_eq!(sim.weights().len(), 144);
    let mut f = sim.unbalanced_fraction();
    for _ in 0..10_000 {
        if sim.is_balanced() {
            break;
        }
        f = sim.run_events(100).unwrap();
    }
    assert!(sim.is_balanced());
    assert_eq!(f, 0.0);
    let events = sim.events();
    sim.run_events(100).unwrap();
    assert_eq!(sim.events(), events);
    assert!((sim.clock() - events * 0.5).abs() < 1e-9);
    assert!(Simulation::create(2, 0.0, 0.5, false, 1).is_err());
}
