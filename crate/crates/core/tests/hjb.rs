use ctrlopt::hjb::{
    extract_policy, price_at, price_from_value, price_ladder, solve, solve_normalized, GridSpec,
    Retention, StateGrid, Variant,
};
use ctrlopt::*;

fn adapted(f: FKind, g: GKind, d0: f64, d1: f64) -> PayoffSpec {
    PayoffSpec {
        f,
        timing: PaymentTiming::TerminalCompounded,
        g,
        weight_mode: WeightMode::AdaptedFixedCumulative,
        bounds: ControlBounds::new(d0, d1).unwrap(),
    }
}

fn coarse() -> GridSpec {
    GridSpec {
        nx: 21,
        nz: 41,
        nt: 100,
        ..GridSpec::default()
    }
}

/// Best single-switch bang-bang control for a deterministic benefit rate,
/// with accrual stopped once the budget of 1 is spent.
fn single_switch_oracle(f: impl Fn(f64) -> f64, d0: f64, d1: f64, t_end: f64) -> f64 {
    let n_fine = 20_000;
    let h = t_end / n_fine as f64;
    let run = |u_of: &dyn Fn(f64) -> f64| {
        let (mut x, mut y) = (0.0, 0.0);
        for i in 0..n_fine {
            let t = (i as f64 + 0.5) * h;
            let du = (u_of(t) * h).min(1.0 - y);
            x += du * f(t);
            y += du;
        }
        x
    };
    let mut best = f64::NEG_INFINITY;
    for k in 0..=1000 {
        let tau = t_end * k as f64 / 1000.0;
        best = best.max(run(&|t| if t < tau { d0 } else { d1 }));
        best = best.max(run(&|t| if t < tau { d1 } else { d0 }));
    }
    best
}

#[test]
fn deterministic_price_matches_single_switch_search() {
    let (s0, k, r) = (100.0, 100.0, 0.05);
    let params = MarketParams::new(s0, r, 1e-12, 1.0).unwrap();
    let spec = adapted(FKind::Call { strike: k }, GKind::Identity, 0.2, 2.0);
    let f = |t: f64| (s0 * (r * 1.0).exp() - k * (r * (1.0 - t)).exp()).max(0.0);
    let oracle = (-r * 1.0f64).exp() * single_switch_oracle(f, 0.2, 2.0, 1.0);
    let h = price_ladder(
        Variant::Adapted,
        &params,
        &spec,
        &[0.2, 0.1, 0.05],
        &coarse(),
        false,
    )
    .unwrap();
    let rel = (h.price.value - oracle).abs() / oracle;
    assert!(
        rel < 0.01,
        "hjb {} oracle {oracle} rel {rel}",
        h.price.value
    );
}

#[test]
fn normalized_constant_benefit_prices_to_one() {
    let params = MarketParams::new(1.0, 0.0, 1e-12, 1.0).unwrap();
    let spec = PayoffSpec {
        f: FKind::Identity,
        timing: PaymentTiming::Spot,
        g: GKind::Identity,
        weight_mode: WeightMode::Normalized,
        bounds: ControlBounds::new(0.0, 2.0).unwrap(),
    };
    let p = price_at(Variant::Normalized, &params, &spec, 0.05, &coarse()).unwrap();
    assert!((p.value - 1.0).abs() < 0.02, "{}", p.value);
}

#[test]
fn normalized_value_ignores_unreachable_weight() {
    let params = MarketParams::new(100.0, 0.02, 0.2, 1.0).unwrap();
    let spec = PayoffSpec {
        f: FKind::Call { strike: 100.0 },
        timing: PaymentTiming::TerminalCompounded,
        g: GKind::Identity,
        weight_mode: WeightMode::Normalized,
        bounds: ControlBounds::new(0.5, 2.0).unwrap(),
    };
    let fam = build_family(0.1, &spec, &params).unwrap();
    let solve_with = |y_max: f64, ny: usize| {
        let g = GridSpec {
            nx: 21,
            ny,
            nz: 41,
            nt: 20,
            y_max: Some(y_max),
            ..GridSpec::default()
        };
        let grid = StateGrid::build(Variant::Normalized, &fam, &g).unwrap();
        let vf = solve_normalized(&params, &spec, &fam, &grid).unwrap();
        price_from_value(&vf, &params).unwrap().value
    };
    // same Δy, top moved from 3 to 6
    let a = solve_with(3.0, 121);
    let b = solve_with(6.0, 241);
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn raising_the_floor_never_raises_the_price() {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let free = adapted(FKind::Call { strike: 100.0 }, GKind::Identity, 0.0, 2.0);
    let floor = adapted(FKind::Call { strike: 100.0 }, GKind::Identity, 0.5, 2.0);
    let a = price_at(Variant::LinearReduced, &params, &free, 0.1, &coarse())
        .unwrap()
        .value;
    let b = price_at(Variant::LinearReduced, &params, &floor, 0.1, &coarse())
        .unwrap()
        .value;
    assert!(b <= a, "{b} > {a}");
}

#[test]
fn coarser_epsilon_stays_below_the_finest_estimate() {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let spec = adapted(FKind::Call { strike: 100.0 }, GKind::Identity, 0.0, 2.0);
    let h = price_ladder(
        Variant::LinearReduced,
        &params,
        &spec,
        &[0.2, 0.1, 0.05],
        &coarse(),
        true,
    )
    .unwrap();
    let top = h.raw.last().unwrap().value + h.delta_grid.unwrap();
    for p in &h.raw {
        assert!(p.value <= top);
    }
    assert!(h.price.has_flag("richardson"));
    assert!(h.price.diagnostic("raw_eps_0.05").is_some());
}

#[test]
fn extracted_policy_is_competitive_in_simulation() {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let spec = adapted(FKind::Call { strike: 100.0 }, GKind::Identity, 0.0, 2.0);
    let fam = build_family(0.05, &spec, &params).unwrap();
    let grid = StateGrid::build(Variant::LinearReduced, &fam, &GridSpec::default()).unwrap();
    let vf = solve(
        Variant::LinearReduced,
        &params,
        &spec,
        &fam,
        &grid,
        Retention::Full,
    )
    .unwrap();
    let hjb_policy = extract_policy(&vf, &fam);
    let cfg = McConfig {
        n_paths: 40_000,
        ..McConfig::default()
    };
    let mine = evaluate_policy(&hjb_policy, &spec, &params, &cfg).unwrap();
    for pol in builtin_policies(&spec, &params) {
        let other = evaluate_policy(&pol, &spec, &params, &cfg).unwrap();
        let se = (mine.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        assert!(
            mine.value >= other.value - 3.0 * se,
            "hjb {} < {} {}",
            mine.value,
            pol.name,
            other.value
        );
    }
}

#[test]
fn linear_reduced_refuses_nonlinear_terminal_reward() {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).unwrap();
    let spec = adapted(
        FKind::Call { strike: 100.0 },
        GKind::Cap { level: 5.0 },
        0.0,
        2.0,
    );
    let err = price_at(Variant::LinearReduced, &params, &spec, 0.1, &coarse()).unwrap_err();
    assert!(matches!(err, PricingError::Configuration { .. }), "{err}");
}
