//! Pricing engine for controlled options: contracts whose holder steers a
//! weight process `u(t)` that spreads the benefit `f(S(t), t)` over time.
//!
//! Three routes to the price cross-check each other:
//!
//! * [`hjb`]: regularized Bellman equations solved backward on a grid,
//! * [`closed_form`]: the deferred "tail" strategy priced by quadrature,
//! * [`mc`]: Monte Carlo evaluation of feedback policies.

pub mod closed_form;
pub mod error;
pub mod estimate;
pub mod hjb;
pub mod market;
pub mod mc;
pub mod payoff;
pub mod policy;
pub mod quadrature;
pub mod smoothing;

pub use closed_form::{tail_strategy, tail_strategy_price, TailStrategy, TailStrategyConfig};
pub use error::{PricingError, Result};
pub use estimate::{EstimateMeta, GridShape, Method, PriceEstimate};
pub use market::{
    bs_expected_payoff, simulate_antithetic_paths, simulate_paths, MarketParams, PathSet,
    TerminalKind,
};
pub use mc::{builtin_policies, evaluate_policy, McConfig};
pub use payoff::{
    eval_f, payoff_adapted, payoff_normalized, ControlBounds, ControlPath, FKind, GKind,
    PaymentTiming, PayoffSpec, WeightMode,
};
pub use policy::{Policy, PolicyKind, PolicyTable};
pub use smoothing::{build_family, SmoothingFamily};
