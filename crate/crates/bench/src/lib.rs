//! Shared fixtures for the criterion benches under `benches/`.

use ctrlopt::{ControlBounds, FKind, GKind, MarketParams, PaymentTiming, PayoffSpec, WeightMode};

/// ATM call on a zero-rate market with budget rate in `[0, 2]`.
pub fn reference_contract() -> (MarketParams, PayoffSpec) {
    let params = MarketParams::new(100.0, 0.0, 0.2, 1.0).expect("valid market");
    let spec = PayoffSpec {
        f: FKind::Call { strike: 100.0 },
        timing: PaymentTiming::TerminalCompounded,
        g: GKind::Identity,
        weight_mode: WeightMode::AdaptedFixedCumulative,
        bounds: ControlBounds::new(0.0, 2.0).expect("valid bounds"),
    };
    (params, spec)
}
