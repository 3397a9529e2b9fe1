use reusable_pricing::{
    simulate, solve_dynamic, validate_against_analytic, DemandCurve, Instance, MdpConfig, Policy,
    SimConfig, Weights,
};

fn erlang_b(c: usize, load: f64) -> f64 {
    (1..=c).fold(1.0, |b, k| load * b / (k as f64 + load * b))
}

#[test]
fn erlang_b_by_simulation() {
    let w = Weights::new(0.2, 0.3, 0.5).unwrap();
    let i = Instance::new(5, 1.0, 0.0, w, DemandCurve::Linear { a: 1.0, b: 3.0 }, None).unwrap();
    let pol = Policy::constant(&i, 1.0).unwrap();
    let r = validate_against_analytic(&i, &pol, &SimConfig::new(2e4, 17, 20)).unwrap();
    assert!((r.analytic.service_level - (1.0 - erlang_b(5, 1.0))).abs() < 1e-10);
    let m = &r.estimate.mean;
    let se = &r.estimate.std_error;
    assert!(
        (m.service_level - (1.0 - erlang_b(5, 1.0))).abs() <= 3.0 * se.service_level,
        "{r:?}"
    );
    assert!(r.passed() && r.weighted_ok, "{r:?}");
}

#[test]
fn optimal_policy_simulates_to_its_gain() {
    let w = Weights::new(0.6, 0.1, 0.3).unwrap();
    let i = Instance::new(
        4,
        0.4,
        0.0,
        w,
        DemandCurve::Logistic {
            a: 1.5,
            b: 4.0,
            p0: 2.0,
        },
        None,
    )
    .unwrap();
    let sol = solve_dynamic(&i, &MdpConfig::default()).unwrap();
    let r = validate_against_analytic(&i, &sol.policy, &SimConfig::new(2e4, 5, 12)).unwrap();
    assert!(r.passed() && r.weighted_ok, "{r:?}");
    assert!((r.analytic.weighted(&w) - sol.eta).abs() < 1e-9);
}

#[test]
fn standard_error_shrinks_with_horizon() {
    let i = Instance::new(
        3,
        0.5,
        0.0,
        Weights::PROFIT,
        DemandCurve::Exponential { a: 0.8, b: 2.0 },
        None,
    )
    .unwrap();
    let pol = Policy::new(&i, vec![0.6, 0.9, 1.1]).unwrap();
    let short = simulate(&i, &pol, &SimConfig::new(2e3, 9, 40)).unwrap();
    let long = simulate(&i, &pol, &SimConfig::new(2e4, 9, 40)).unwrap();
    let target = 10f64.sqrt();
    for (a, b) in [
        (short.std_error.profit, long.std_error.profit),
        (short.std_error.market_share, long.std_error.market_share),
        (short.std_error.service_level, long.std_error.service_level),
    ] {
        let shrink = a / b;
        assert!(shrink > target / 1.5 && shrink < target * 1.5, "{shrink}");
    }
}
