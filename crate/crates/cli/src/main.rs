use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrlopt::hjb::Variant;
use ctrlopt::{ControlBounds, FKind, GKind, PaymentTiming, WeightMode};
use ctrlopt_cli::output::{json, sig12};
use ctrlopt_cli::run::{compare, convergence, export_value, price};
use ctrlopt_cli::{CliError, MethodName, RunConfig};

/// Prices options whose payoff weight is chosen by the holder.
#[derive(Parser)]
#[command(name = "ctrlopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price with the selected methods and print the JSON report.
    Price {
        #[arg(long, value_enum, value_delimiter = ',')]
        method: Vec<MethodArg>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// HJB price: ε ladder plus Richardson extrapolation.
    PriceHjb(Overrides),
    /// Monte Carlo value of one feedback policy.
    PriceMc(Overrides),
    /// Tail-strategy price by quadrature.
    PriceClosedForm(Overrides),
    /// Price with two or more methods and check the pairwise gaps.
    Compare {
        #[arg(long, value_enum, value_delimiter = ',')]
        methods: Vec<MethodArg>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// ε sweep and one grid refinement of the HJB price.
    Convergence(Overrides),
    /// Write value and policy slices of one HJB solve as CSV.
    ExportValue {
        /// ε of the solve; defaults to the finest rung of the ladder.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Export every n-th time slice (the last one is always written).
        #[arg(long, default_value_t = 50)]
        stride: usize,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hjb,
    Mc,
    #[value(alias = "closed_form")]
    ClosedForm,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FArg {
    Identity,
    Call,
    Put,
}

#[derive(Clone, Copy, ValueEnum)]
enum GArg {
    Identity,
    Call,
    Put,
    Cap,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimingArg {
    Spot,
    #[value(alias = "terminal_compounded")]
    TerminalCompounded,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adapted,
    Normalized,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Adapted,
    #[value(alias = "linear_reduced")]
    LinearReduced,
    Normalized,
}

/// Flags mirror the fields of the JSON config and override it.
#[derive(Args, Default)]
struct Overrides {
    /// JSON run config; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,

    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    t_horizon: Option<f64>,

    #[arg(long, value_enum)]
    f: Option<FArg>,
    /// Strike of a call or put `f`.
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long, value_enum)]
    timing: Option<TimingArg>,
    #[arg(long, value_enum)]
    g: Option<GArg>,
    /// Strike of a call or put `g`, or the level of a cap.
    #[arg(long)]
    g_level: Option<f64>,
    #[arg(long, value_enum)]
    weight_mode: Option<ModeArg>,
    #[arg(long)]
    d0: Option<f64>,
    #[arg(long)]
    d1: Option<f64>,

    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_delimiter = ',')]
    epsilon_ladder: Option<Vec<f64>>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    z_width: Option<f64>,
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    align_y: Option<bool>,
    #[arg(long)]
    delta_grid: Option<bool>,

    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    antithetic: Option<bool>,
    /// Builtin policy name, `hjb`, or `auto`.
    #[arg(long)]
    mc_policy: Option<String>,

    #[arg(long)]
    n_sigma: Option<f64>,
    #[arg(long)]
    hjb_rel_tol: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn strike_of(f: FKind) -> Option<f64> {
    match f {
        FKind::Call { strike } | FKind::Put { strike } => Some(strike),
        FKind::Identity => None,
    }
}

fn level_of(g: GKind) -> Option<f64> {
    match g {
        GKind::Call { strike } | GKind::Put { strike } => Some(strike),
        GKind::Cap { level } => Some(level),
        GKind::Identity => None,
    }
}

impl Overrides {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut c.out_dir, self.out_dir.map(Some));
        let p = &mut c.params;
        set(&mut p.s0, self.s0);
        set(&mut p.r, self.r);
        set(&mut p.sigma, self.sigma);
        set(&mut p.t_horizon, self.t_horizon);

        let s = &mut c.spec;
        if self.f.is_some() || self.strike.is_some() {
            let strike = self.strike.or(strike_of(s.f));
            let need =
                || CliError::config("spec.f.strike", "--strike is required for a call or put f");
            s.f = match self.f {
                Some(FArg::Identity) => FKind::Identity,
                Some(FArg::Call) => FKind::Call {
                    strike: strike.ok_or_else(need)?,
                },
                Some(FArg::Put) => FKind::Put {
                    strike: strike.ok_or_else(need)?,
                },
                None => match s.f {
                    FKind::Call { .. } => FKind::Call {
                        strike: strike.ok_or_else(need)?,
                    },
                    FKind::Put { .. } => FKind::Put {
                        strike: strike.ok_or_else(need)?,
                    },
                    FKind::Identity => {
                        return Err(CliError::config(
                            "spec.f.strike",
                            "identity f takes no strike",
                        ))
                    }
                },
            };
        }
        if self.g.is_some() || self.g_level.is_some() {
            let level = self.g_level.or(level_of(s.g));
            let need = || CliError::config("spec.g", "--g-level is required for this g");
            let kind = self.g.unwrap_or(match s.g {
                GKind::Identity => GArg::Identity,
                GKind::Call { .. } => GArg::Call,
                GKind::Put { .. } => GArg::Put,
                GKind::Cap { .. } => GArg::Cap,
            });
            s.g = match kind {
                GArg::Identity => GKind::Identity,
                GArg::Call => GKind::Call {
                    strike: level.ok_or_else(need)?,
                },
                GArg::Put => GKind::Put {
                    strike: level.ok_or_else(need)?,
                },
                GArg::Cap => GKind::Cap {
                    level: level.ok_or_else(need)?,
                },
            };
        }
        if let Some(t) = self.timing {
            s.timing = match t {
                TimingArg::Spot => PaymentTiming::Spot,
                TimingArg::TerminalCompounded => PaymentTiming::TerminalCompounded,
            };
        }
        if let Some(m) = self.weight_mode {
            s.weight_mode = match m {
                ModeArg::Adapted => WeightMode::AdaptedFixedCumulative,
                ModeArg::Normalized => WeightMode::Normalized,
            };
        }
        s.bounds = ControlBounds {
            d0: self.d0.unwrap_or(s.bounds.d0),
            d1: self.d1.unwrap_or(s.bounds.d1),
        };

        let h = &mut c.hjb;
        if let Some(v) = self.variant {
            h.variant = Some(match v {
                VariantArg::Adapted => Variant::Adapted,
                VariantArg::LinearReduced => Variant::LinearReduced,
                VariantArg::Normalized => Variant::Normalized,
            });
        }
        set(&mut h.epsilon_ladder, self.epsilon_ladder);
        set(&mut h.grid.nx, self.nx);
        set(&mut h.grid.ny, self.ny);
        set(&mut h.grid.nz, self.nz);
        set(&mut h.grid.nt, self.nt);
        set(&mut h.grid.z_width, self.z_width);
        set(&mut h.grid.y_max, self.y_max.map(Some));
        set(&mut h.grid.align_y, self.align_y);
        set(&mut h.delta_grid, self.delta_grid);

        let m = &mut c.mc;
        set(&mut m.n_paths, self.n_paths);
        set(&mut m.n_steps, self.n_steps);
        set(&mut m.seed, self.seed);
        set(&mut m.antithetic, self.antithetic);
        set(&mut m.policy, self.mc_policy);

        set(&mut c.compare.n_sigma, self.n_sigma);
        set(&mut c.compare.hjb_rel_tol, self.hjb_rel_tol);
        Ok(c)
    }
}

fn methods(args: &[MethodArg]) -> Vec<MethodName> {
    let mut out = Vec::new();
    for a in args {
        match a {
            MethodArg::Hjb => out.push(MethodName::Hjb),
            MethodArg::Mc => out.push(MethodName::Mc),
            MethodArg::ClosedForm => out.push(MethodName::ClosedForm),
            MethodArg::All => out.extend([MethodName::Hjb, MethodName::Mc, MethodName::ClosedForm]),
        }
    }
    out
}

fn with_methods(opts: Overrides, chosen: Vec<MethodName>) -> Result<RunConfig, CliError> {
    let mut c = opts.resolve()?;
    if !chosen.is_empty() {
        c.methods = chosen;
    }
    Ok(c)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price { method, opts } => {
            let c = with_methods(opts, methods(&method))?;
            print!("{}", json(&price(&c)?));
        }
        Command::PriceHjb(opts) => print!(
            "{}",
            json(&price(&with_methods(opts, vec![MethodName::Hjb])?)?)
        ),
        Command::PriceMc(opts) => print!(
            "{}",
            json(&price(&with_methods(opts, vec![MethodName::Mc])?)?)
        ),
        Command::PriceClosedForm(opts) => {
            print!(
                "{}",
                json(&price(&with_methods(opts, vec![MethodName::ClosedForm])?)?)
            )
        }
        Command::Compare { methods: m, opts } => {
            let c = with_methods(opts, methods(&m))?;
            let cmp = compare(&c)?;
            print!("{}", cmp.table);
            if cmp.breaches > 0 {
                return Err(CliError::Breach(cmp.breaches));
            }
        }
        Command::Convergence(opts) => {
            let c = opts.resolve()?;
            print!("{}", convergence(&c)?);
        }
        Command::ExportValue {
            epsilon,
            stride,
            opts,
        } => {
            let c = opts.resolve()?;
            let summary = export_value(&c, epsilon, stride)?;
            eprintln!(
                "price at epsilon {}: {}",
                sig12(summary.epsilon),
                sig12(summary.price)
            );
            print!("{}", json(&summary));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
