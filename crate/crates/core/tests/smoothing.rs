use ctrlopt::*;
use proptest::prelude::*;

fn contract(g: GKind, d0: f64, d1: f64) -> (MarketParams, PayoffSpec) {
    let params = MarketParams::new(100.0, 0.03, 0.25, 1.0).unwrap();
    let spec = PayoffSpec {
        f: FKind::Call { strike: 100.0 },
        timing: PaymentTiming::TerminalCompounded,
        g,
        weight_mode: WeightMode::AdaptedFixedCumulative,
        bounds: ControlBounds::new(d0, d1).unwrap(),
    };
    (params, spec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regularized_data_never_exceeds_the_original(eps in 0.01..0.45f64, s in 1.0..400.0f64, t in 0.0..1.0f64, x in -5.0..60.0f64, cap in 1.0..30.0f64) {
        let (p, sp) = contract(GKind::Cap { level: cap }, 0.0, 2.0);
        let fam = build_family(eps, &sp, &p).unwrap();
        let f = eval_f(&sp, &p, s, t);
        let phi = fam.phi(s, t);
        prop_assert!(phi <= f + 1e-12 && phi >= 0.0);
        prop_assert!(fam.g_hat(x) <= sp.g.apply(x) + 1e-12);
    }

    #[test]
    fn cutoff_and_ramp_stay_in_the_unit_interval(eps in 0.01..0.45f64, a in 0.0..1.5f64, b in 0.0..1.5f64) {
        let (p, sp) = contract(GKind::Identity, 0.0, 2.0);
        let fam = build_family(eps, &sp, &p).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!((0.0..=1.0).contains(&fam.xi(lo)));
        prop_assert!(fam.xi(hi) <= fam.xi(lo));
        let (t0, t1) = (lo.min(1.0), hi.min(1.0));
        prop_assert!((0.0..=1.0).contains(&fam.psi(t0)));
        prop_assert!(fam.psi(t1) >= fam.psi(t0));
        for u in [0.0, 0.7, 2.0] {
            let h = fam.h(u, t0);
            prop_assert!(h >= u - 1e-12 && h <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn smaller_epsilon_gives_a_larger_benefit_cap(e1 in 0.02..0.2f64, s in 100.0..10000.0f64) {
        let (p, sp) = contract(GKind::Identity, 0.0, 2.0);
        let coarse = build_family(2.0 * e1, &sp, &p).unwrap();
        let fine = build_family(e1, &sp, &p).unwrap();
        prop_assert!(fine.phi(s, 0.5) >= coarse.phi(s, 0.5) - 1e-12);
        prop_assert!(fine.effective_budget() > coarse.effective_budget());
    }
}

#[test]
fn epsilon_outside_the_range_names_the_field() {
    let (p, sp) = contract(GKind::Identity, 0.0, 2.0);
    for eps in [0.0, 0.5, -0.1, f64::NAN] {
        assert_eq!(
            build_family(eps, &sp, &p).unwrap_err().field(),
            Some("epsilon")
        );
    }
}
