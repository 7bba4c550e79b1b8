use ctrlopt::*;
use proptest::prelude::*;

fn cfg(s0: f64, r: f64, sigma: f64, level: f64, h: TerminalKind) -> TailStrategyConfig {
    TailStrategyConfig {
        level,
        h,
        params: MarketParams::new(s0, r, sigma, 1.0).unwrap(),
    }
}

#[test]
fn at_the_money_call_matches_textbook_value() {
    let p = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let v = bs_expected_payoff(&p, TerminalKind::Call { strike: 100.0 }, 1.0).unwrap();
    // 100 (2 Φ(0.1) - 1)
    assert!((v - 7.965567455405804).abs() < 1e-9, "{v}");
}

#[test]
fn tail_price_matches_an_independent_quadrature() {
    // 2 ∫_{1/2}^{1} 100 (2 Φ(0.1 √t) - 1) dt by composite Simpson, Φ via statrs
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::new(0.0, 1.0).unwrap();
    let c = |t: f64| 100.0 * (2.0 * n.cdf(0.1 * t.sqrt()) - 1.0);
    let m = 4000;
    let h = 0.5 / m as f64;
    let mut s = c(0.5) + c(1.0);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * c(0.5 + i as f64 * h);
    }
    let oracle = 2.0 * s * h / 3.0;
    let got = tail_strategy_price(&cfg(
        100.0,
        0.0,
        0.2,
        2.0,
        TerminalKind::Call { strike: 100.0 },
    ))
    .unwrap()
    .value;
    assert!((got - oracle).abs() < 1e-7 * oracle, "{got} vs {oracle}");
    assert!((got - 6.868449).abs() < 1e-5);
}

#[test]
fn tail_strategy_spends_exactly_the_budget() {
    let s = tail_strategy(&cfg(100.0, 0.0, 0.2, 2.0, TerminalKind::Identity)).unwrap();
    assert_eq!(s.switch_time, 0.5);
    assert_eq!(s.cumulative(1.0), 1.0);
    let boundary = tail_strategy(&cfg(100.0, 0.0, 0.2, 1.0, TerminalKind::Identity)).unwrap();
    assert_eq!(boundary.switch_time, 0.0);
    assert!(boundary.degenerate);
    let pol = s.policy();
    assert_eq!(pol.control(0.49, 0.0, 0.0, 100.0), 0.0);
    assert_eq!(pol.control(0.5, 0.0, 0.0, 100.0), 2.0);
}

#[test]
fn monte_carlo_reproduces_the_tail_price() {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let spec = PayoffSpec {
        f: FKind::Call { strike: 100.0 },
        timing: PaymentTiming::TerminalCompounded,
        g: GKind::Identity,
        weight_mode: WeightMode::AdaptedFixedCumulative,
        bounds: ControlBounds::new(0.0, 2.0).unwrap(),
    };
    let c = TailStrategyConfig::from_spec(&spec, &params).unwrap();
    let exact = tail_strategy_price(&c).unwrap().value;
    let pol = tail_strategy(&c).unwrap().policy();
    let mc = evaluate_policy(
        &pol,
        &spec,
        &params,
        &McConfig {
            n_paths: 100_000,
            seed: 11,
            ..McConfig::default()
        },
    )
    .unwrap();
    assert!(
        (mc.value - exact).abs() <= 3.0 * mc.stderr,
        "{} ± {} vs {exact}",
        mc.value,
        mc.stderr
    );
}

#[test]
fn refuses_contracts_outside_the_theorem() {
    let params = MarketParams::new(100.0, 0.05, 0.2, 1.0).unwrap();
    let put = cfg(100.0, 0.05, 0.2, 2.0, TerminalKind::Put { strike: 100.0 });
    assert!(matches!(
        tail_strategy_price(&put),
        Err(PricingError::Refused(_))
    ));
    let spec = PayoffSpec {
        f: FKind::Call { strike: 100.0 },
        timing: PaymentTiming::TerminalCompounded,
        g: GKind::Cap { level: 5.0 },
        weight_mode: WeightMode::AdaptedFixedCumulative,
        bounds: ControlBounds::new(0.0, 2.0).unwrap(),
    };
    assert!(TailStrategyConfig::from_spec(&spec, &params).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity_prices_to_spot(s0 in 20.0..300.0f64, r in 0.0..0.1f64, sigma in 0.05..0.6f64, level in 1.2..6.0f64) {
        let p = tail_strategy_price(&cfg(s0, r, sigma, level, TerminalKind::Identity)).unwrap();
        prop_assert!((p.value - s0).abs() < 1e-7 * s0);
    }

    #[test]
    fn tail_beats_uniform_and_grows_with_the_cap(s0 in 70.0..130.0f64, sigma in 0.05..0.5f64, level in 1.2..4.0f64) {
        let h = TerminalKind::Call { strike: 100.0 };
        let lo = cfg(s0, 0.0, sigma, level, h);
        let hi = cfg(s0, 0.0, sigma, 1.5 * level, h);
        let p_lo = tail_strategy_price(&lo).unwrap().value;
        let p_hi = tail_strategy_price(&hi).unwrap().value;
        let uniform = tail_strategy_price(&cfg(s0, 0.0, sigma, 1.0, h)).unwrap().value;
        prop_assert!(p_lo >= uniform - 1e-9);
        prop_assert!(p_hi >= p_lo - 1e-9);
    }
}
