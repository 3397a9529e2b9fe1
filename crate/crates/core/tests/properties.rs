use proptest::prelude::*;
use reusable_pricing::experiments::{AlphaMode, TestbedSpec};
use reusable_pricing::{
    best_static_rate, constructed_static_rate, objectives, ratio_r, ratio_r_tilde, ratio_report,
    solve_dynamic, static_policy::static_value, steady_state, z_from_policy, DemandCurve,
    DemandFamily, Instance, MdpConfig, Policy, Weights,
};

/// Stationary distribution of the birth-death generator by Gaussian
/// elimination on `πQ = 0`, with the last balance equation replaced by
/// `Σπ = 1`.
fn ctmc_oracle(mu: f64, rates: &[f64]) -> Vec<f64> {
    let c = rates.len();
    let n = c + 1;
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        if i >= 1 {
            q[i][i - 1] = rates[i - 1];
        }
        if i < c {
            q[i][i + 1] = (c - i) as f64 * mu;
        }
        let out: f64 = q[i].iter().sum();
        q[i][i] = -out;
    }
    // Rows of the system are columns of Q.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| q[i][j]).collect()).collect();
    let mut rhs = vec![0.0; n];
    a[n - 1] = vec![1.0; n];
    rhs[n - 1] = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                let pivot_row = a[col].clone();
                for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    x
}

/// Erlang loss probability by the textbook recursion.
fn erlang_b(c: usize, load: f64) -> f64 {
    (1..=c).fold(1.0, |b, k| load * b / (k as f64 + load * b))
}

fn linear(c: usize, mu: f64, b: f64) -> Instance {
    Instance::new(
        c,
        mu,
        0.0,
        Weights::PROFIT,
        DemandCurve::Linear { a: 1.0, b },
        None,
    )
    .unwrap()
}

fn weights() -> impl Strategy<Value = Weights> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_filter_map("nonzero", |(x, y, z)| {
        let s = x + y + z;
        (s > 1e-6)
            .then(|| Weights::new(x / s, y / s, 1.0 - x / s - y / s).ok())
            .flatten()
    })
}

fn curve() -> impl Strategy<Value = DemandCurve> {
    (0usize..3, 0.1..5.0f64, 0.5..10.0f64, 0.0..20.0f64).prop_map(|(k, a, b, p0)| match k {
        0 => DemandCurve::Linear { a, b },
        1 => DemandCurve::Exponential { a, b },
        _ => DemandCurve::Logistic { a, b, p0 },
    })
}

fn solvable_instance(max_c: usize) -> impl Strategy<Value = Instance> {
    (1..=max_c, 0.05..50.0f64, weights(), curve()).prop_filter_map(
        "admissible",
        |(c, inv_mu, w, curve)| {
            Instance::new(c, 1.0 / inv_mu, 0.0, w, curve, None)
                .ok()
                .filter(Instance::is_concave)
        },
    )
}

#[test]
fn erlang_b_five_units_unit_load() {
    let i = linear(5, 1.0, 2.0);
    let p = steady_state(&i, &Policy::constant(&i, 1.0).unwrap());
    let b = erlang_b(5, 1.0);
    assert!((b - 0.003_067_484_662_576_687).abs() < 1e-15);
    assert!((p.stockout() - b).abs() < 1e-10);
}

proptest! {
    #[test]
    fn steady_state_is_a_distribution(
        mu in 1e-3..10.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 1..40),
    ) {
        let i = linear(raw.len(), mu, 10.0);
        let rates: Vec<f64> = raw.iter().map(|x| 10.0 * x).collect();
        let p = steady_state(&i, &Policy::new(&i, rates).unwrap());
        prop_assert!(p.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_matches_linear_algebra(
        mu in 0.05..5.0f64,
        raw in prop::collection::vec(0.0..1.0f64, 1..9),
        zero_at in prop::option::of(0usize..9),
    ) {
        let mut rates: Vec<f64> = raw.iter().map(|x| 5.0 * x).collect();
        if let Some(k) = zero_at.filter(|k| *k < rates.len()) {
            rates[k] = 0.0;
        }
        let i = linear(rates.len(), mu, 5.0);
        let p = steady_state(&i, &Policy::new(&i, rates.clone()).unwrap());
        let oracle = ctmc_oracle(mu, &rates);
        for (x, y) in p.probs.iter().zip(&oracle) {
            prop_assert!((x - y).abs() < 1e-10, "{:?} vs {:?}", p.probs, oracle);
        }
    }

    #[test]
    fn constant_rate_stockout_is_erlang_b(c in 1usize..30, load in 0.01..50.0f64) {
        let i = linear(c, 1.0, 100.0);
        let p = steady_state(&i, &Policy::constant(&i, load).unwrap());
        prop_assert!((p.stockout() - erlang_b(c, load)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_policy_structure_and_static_ratio_chain(inst in solvable_instance(6)) {
        let sol = solve_dynamic(&inst, &MdpConfig::default()).unwrap();
        let rates = sol.policy.rates();
        let tol = 1e-9 * inst.max_rate.max(1.0);
        prop_assert!(rates.windows(2).all(|w| w[0] <= w[1] + tol), "{rates:?}");
        prop_assert!(rates[rates.len() - 1] <= inst.myopic_rate().unwrap() + tol);

        let r = ratio_report(&inst, &sol).unwrap().ratios_tilde;
        prop_assert!((r.market_share - r.service_level).abs() <= 1e-10, "{r:?}");
        prop_assert!(r.profit >= r.service_level - 1e-10, "{r:?}");
        prop_assert!(r.min_objective() >= 15.0 / 19.0 - 1e-9, "{r:?}");
    }

    #[test]
    fn best_static_dominates_constructed(inst in solvable_instance(4)) {
        let sol = solve_dynamic(&inst, &MdpConfig::default()).unwrap();
        let lt = constructed_static_rate(&inst, &sol);
        prop_assert!(static_value(&inst, best_static_rate(&inst)) >= static_value(&inst, lt) - 1e-9);
        let rep = ratio_report(&inst, &sol).unwrap();
        prop_assert!(rep.ratios_best.weighted >= rep.ratios_tilde.weighted - 1e-12);
        prop_assert!(rep.ratios_best.weighted <= 1.0 + 1e-9);
    }

    #[test]
    fn z_ratio_dominates_its_lower_bound(
        c in 4usize..9,
        raw in prop::collection::vec(-3.0..3.0f64, 8),
    ) {
        // Sorted rates give the monotone structure of optimal policies.
        let mut ratios: Vec<f64> = raw[..c].iter().map(|x| 10f64.powf(*x)).collect();
        ratios.sort_by(f64::total_cmp);
        let inst = Instance::new(c, 1.0, 0.0, Weights::SERVICE_LEVEL, DemandCurve::Reciprocal, Some(1e3)).unwrap();
        let z = z_from_policy(&inst, &Policy::new(&inst, ratios).unwrap());
        let r = ratio_r(&z);
        prop_assert!(r >= ratio_r_tilde(&z).unwrap() - 1e-12);
        prop_assert!((15.0 / 19.0 - 1e-12..=1.0 + 1e-12).contains(&r));
    }
}

#[test]
fn testbed_instances_are_reproducible() {
    let spec = TestbedSpec {
        alpha_mode: AlphaMode::UniformSimplex,
        ..TestbedSpec::table1(DemandFamily::Logistic, vec![3, 10], 20, 42)
    };
    for c in [3, 10] {
        for k in 0..20 {
            assert_eq!(spec.instance(c, k).unwrap(), spec.instance(c, k).unwrap());
        }
    }
    assert_ne!(spec.instance(3, 0).unwrap(), spec.instance(3, 1).unwrap());
    let reseeded = TestbedSpec {
        seed: 43,
        ..spec.clone()
    };
    assert_ne!(
        spec.instance(3, 0).unwrap(),
        reseeded.instance(3, 0).unwrap()
    );
}

#[test]
fn objectives_of_constant_policy_use_erlang_b() {
    let i = linear(4, 0.5, 3.0);
    let rate = 1.2;
    let o = objectives(&i, &Policy::constant(&i, rate).unwrap());
    let b = erlang_b(4, rate / 0.5);
    assert!((o.service_level - (1.0 - b)).abs() < 1e-12);
    assert!((o.market_share - rate * (1.0 - b)).abs() < 1e-12);
    // p(λ) = 3 − λ for a = 1, b = 3.
    assert!((o.profit - rate * (3.0 - rate) * (1.0 - b)).abs() < 1e-12);
}
