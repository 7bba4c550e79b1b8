//! The subcommands, as library functions returning their artifacts.

use std::path::{Path, PathBuf};

use ctrlopt::hjb::{
    extract_policy, price_at, price_ladder, richardson, solve, switching_values, Retention,
    StateGrid, Variant,
};
use ctrlopt::{
    build_family, builtin_policies, evaluate_policy, tail_strategy, tail_strategy_price, Policy,
    PriceEstimate, PricingError, TailStrategyConfig,
};
use serde::Serialize;

use crate::config::{MethodName, RunConfig};
use crate::error::CliError;
use crate::output::{csv_file, json, sig12, write_file, Table};

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: MethodName,
    pub label: String,
    pub estimate: PriceEstimate,
    /// Unextrapolated prices along the ε ladder.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub raw: Vec<PriceEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PriceReport {
    pub config: RunConfig,
    pub estimates: Vec<MethodReport>,
}

fn hjb_err(e: PricingError) -> CliError {
    CliError::prefixed("hjb", e)
}

fn finest_epsilon(cfg: &RunConfig) -> f64 {
    *cfg.hjb
        .epsilon_ladder
        .last()
        .expect("validated ladder is not empty")
}

fn mc_policy(cfg: &RunConfig) -> Result<Policy, CliError> {
    let wanted = cfg.mc.policy.as_str();
    if wanted == "hjb" {
        let eps = finest_epsilon(cfg);
        let variant = cfg.variant();
        let fam = build_family(eps, &cfg.spec, &cfg.params).map_err(hjb_err)?;
        let grid = StateGrid::build(variant, &fam, &cfg.hjb.grid).map_err(hjb_err)?;
        let vf = solve(
            variant,
            &cfg.params,
            &cfg.spec,
            &fam,
            &grid,
            Retention::Full,
        )
        .map_err(hjb_err)?;
        return Ok(extract_policy(&vf, &fam));
    }
    let all = builtin_policies(&cfg.spec, &cfg.params);
    let pick = if wanted == "auto" {
        all.iter()
            .find(|p| p.name == "tail")
            .or_else(|| all.first())
    } else {
        all.iter().find(|p| p.name == wanted)
    };
    pick.cloned().ok_or_else(|| {
        let names: Vec<&str> = all.iter().map(|p| p.name.as_str()).collect();
        CliError::config(
            "mc.policy",
            format!(
                "unknown policy `{wanted}`; choose auto, hjb, {}",
                names.join(", ")
            ),
        )
    })
}

pub fn run_method(cfg: &RunConfig, method: MethodName) -> Result<MethodReport, CliError> {
    match method {
        MethodName::Hjb => {
            let variant = cfg.variant();
            let rep = price_ladder(
                variant,
                &cfg.params,
                &cfg.spec,
                &cfg.hjb.epsilon_ladder,
                &cfg.hjb.grid,
                cfg.hjb.delta_grid,
            )
            .map_err(hjb_err)?;
            Ok(MethodReport {
                method,
                label: format!("hjb/{}", variant.name()),
                estimate: rep.price,
                raw: rep.raw,
            })
        }
        MethodName::ClosedForm => {
            let tc = TailStrategyConfig::from_spec(&cfg.spec, &cfg.params)?;
            let mut estimate = tail_strategy_price(&tc)?;
            estimate.meta.policy = Some("tail".into());
            let strategy = tail_strategy(&tc)?;
            estimate
                .meta
                .diagnostics
                .insert("switch_time".into(), strategy.switch_time);
            Ok(MethodReport {
                method,
                label: "closed_form/tail".into(),
                estimate,
                raw: Vec::new(),
            })
        }
        MethodName::Mc => {
            let policy = mc_policy(cfg)?;
            let estimate = evaluate_policy(&policy, &cfg.spec, &cfg.params, &cfg.mc.engine())?;
            Ok(MethodReport {
                method,
                label: format!("mc/{}", policy.name),
                estimate,
                raw: Vec::new(),
            })
        }
    }
}

fn dedup(methods: &[MethodName]) -> Vec<MethodName> {
    let mut out: Vec<MethodName> = Vec::new();
    for m in methods {
        if !out.contains(m) {
            out.push(*m);
        }
    }
    out
}

pub fn price(cfg: &RunConfig) -> Result<PriceReport, CliError> {
    cfg.validate()?;
    let estimates = dedup(&cfg.methods)
        .into_iter()
        .map(|m| run_method(cfg, m))
        .collect::<Result<Vec<_>, _>>()?;
    let report = PriceReport {
        config: cfg.clone(),
        estimates,
    };
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, "report.json", &json(&report))?;
    }
    Ok(report)
}

pub struct Comparison {
    pub report: PriceReport,
    pub table: Table,
    pub breaches: usize,
}

/// Deterministic allowance and Monte Carlo standard error of one estimate.
fn allowance(cfg: &RunConfig, r: &MethodReport) -> (f64, f64) {
    let e = &r.estimate;
    match r.method {
        MethodName::Mc => (0.0, e.stderr),
        MethodName::Hjb => {
            let dg = e.diagnostic("delta_grid").unwrap_or(0.0);
            (cfg.compare.hjb_rel_tol * e.value.abs() + dg, 0.0)
        }
        MethodName::ClosedForm => (e.diagnostic("rel_tol").unwrap_or(1e-8) * e.value.abs(), 0.0),
    }
}

pub fn compare(cfg: &RunConfig) -> Result<Comparison, CliError> {
    let methods = dedup(&cfg.methods);
    if methods.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two distinct methods".into(),
        ));
    }
    let report = price(cfg)?;
    let mut table = Table::new(&[
        "method_a",
        "price_a",
        "error_bar_a",
        "method_b",
        "price_b",
        "error_bar_b",
        "gap",
        "tolerance",
        "gap_in_tolerance",
        "within",
    ]);
    let k = cfg.compare.n_sigma;
    let mut breaches = 0;
    for (i, a) in report.estimates.iter().enumerate() {
        for b in &report.estimates[i + 1..] {
            let (da, sa) = allowance(cfg, a);
            let (db, sb) = allowance(cfg, b);
            let tol = k * (sa * sa + sb * sb).sqrt() + da + db;
            let gap = (a.estimate.value - b.estimate.value).abs();
            let units = if tol > 0.0 {
                gap / tol
            } else if gap == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let within = gap <= tol;
            if !within {
                breaches += 1;
            }
            table.push(vec![
                a.label.clone(),
                sig12(a.estimate.value),
                sig12(da + k * sa),
                b.label.clone(),
                sig12(b.estimate.value),
                sig12(db + k * sb),
                sig12(gap),
                sig12(tol),
                sig12(units),
                within.to_string(),
            ]);
        }
    }
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, "compare.csv", &table.to_string())?;
    }
    Ok(Comparison {
        report,
        table,
        breaches,
    })
}

/// ε sweep on the configured grid, its Richardson value, and the finest ε
/// on the configured and the refined grid.
pub fn convergence(cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    let variant = cfg.variant();
    let mut table = Table::new(&["sweep", "epsilon", "nx", "ny", "nz", "nt", "price"]);
    let shape_cells = |p: &PriceEstimate| -> Vec<String> {
        p.meta
            .grid
            .map(|g| g.iter().map(|n| n.to_string()).collect())
            .unwrap_or_else(|| vec![String::new(); 4])
    };
    let ladder = &cfg.hjb.epsilon_ladder;
    let mut raw = Vec::new();
    for &eps in ladder {
        let p = price_at(variant, &cfg.params, &cfg.spec, eps, &cfg.hjb.grid).map_err(hjb_err)?;
        let mut row = vec!["epsilon".to_string(), sig12(eps)];
        row.extend(shape_cells(&p));
        row.push(sig12(p.value));
        table.push(row);
        raw.push(p);
    }
    if ladder.len() >= 2 {
        let k = ladder.len() - 2;
        let extrapolated = richardson(ladder[k], raw[k].value, ladder[k + 1], raw[k + 1].value);
        let mut row = vec!["richardson".to_string(), "0".to_string()];
        row.extend(shape_cells(&raw[k + 1]));
        row.push(sig12(extrapolated));
        table.push(row);
    }
    let eps = finest_epsilon(cfg);
    let finest = raw.last().expect("ladder is not empty");
    let refined = price_at(
        variant,
        &cfg.params,
        &cfg.spec,
        eps,
        &cfg.hjb.grid.refined(),
    )
    .map_err(hjb_err)?;
    for p in [finest, &refined] {
        let mut row = vec!["grid".to_string(), sig12(eps)];
        row.extend(shape_cells(p));
        row.push(sig12(p.value));
        table.push(row);
    }
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, "convergence.csv", &table.to_string())?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportSummary {
    pub variant: Variant,
    pub epsilon: f64,
    pub grid: [usize; 4],
    pub price: f64,
    pub steps: Vec<usize>,
    pub value_file: PathBuf,
    pub policy_file: PathBuf,
}

/// Writes `value.csv` (t,x,y,z,J) and `policy.csv` (t,x,y,z,u) for every
/// `stride`-th time slice plus the last. For the normalized variant the x
/// column holds the running average x/y.
pub fn export_value(
    cfg: &RunConfig,
    epsilon: Option<f64>,
    stride: usize,
) -> Result<ExportSummary, CliError> {
    cfg.validate()?;
    if stride == 0 {
        return Err(CliError::Usage("--stride must be >= 1".into()));
    }
    let eps = epsilon.unwrap_or_else(|| finest_epsilon(cfg));
    let variant = cfg.variant();
    let fam = build_family(eps, &cfg.spec, &cfg.params).map_err(hjb_err)?;
    let grid = StateGrid::build(variant, &fam, &cfg.hjb.grid).map_err(hjb_err)?;
    let vf = solve(
        variant,
        &cfg.params,
        &cfg.spec,
        &fam,
        &grid,
        Retention::Full,
    )
    .map_err(hjb_err)?;
    let price = ctrlopt::hjb::price_from_value(&vf, &cfg.params)
        .map_err(hjb_err)?
        .value;
    let nt = grid.nt();
    let mut steps: Vec<usize> = (0..=nt).step_by(stride).collect();
    if steps.last() != Some(&nt) {
        steps.push(nt);
    }
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    write_slices(&dir, &vf, &fam, &steps)?;
    Ok(ExportSummary {
        variant,
        epsilon: eps,
        grid: grid.shape(),
        price,
        steps,
        value_file: dir.join("value.csv"),
        policy_file: dir.join("policy.csv"),
    })
}

fn write_slices(
    dir: &Path,
    vf: &ctrlopt::hjb::ValueFunction,
    fam: &ctrlopt::SmoothingFamily,
    steps: &[usize],
) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
    let g = &vf.grid;
    let b = fam.spec().bounds;
    let mut value = csv_file(dir, "value.csv")?;
    let mut policy = csv_file(dir, "policy.csv")?;
    value.write_record(["t", "x", "y", "z", "J"]).map_err(io)?;
    policy.write_record(["t", "x", "y", "z", "u"]).map_err(io)?;
    for &n in steps {
        let slice = vf.slice(n).expect("full retention keeps every slice");
        let sv = if n < g.nt() {
            switching_values(vf, fam, n)
        } else {
            None
        };
        let t = sig12(g.times[n]);
        for ix in 0..g.nx() {
            let x = sig12(g.x_nodes[ix]);
            for iy in 0..g.ny() {
                let y = sig12(g.y_nodes[iy]);
                for iz in 0..g.nz() {
                    let z = sig12(g.z_nodes[iz]);
                    let k = g.index(ix, iy, iz);
                    value
                        .write_record([t.as_str(), &x, &y, &z, &sig12(slice[k])])
                        .map_err(io)?;
                    if let Some(sv) = &sv {
                        let u = if sv[k] >= 0.0 { b.d1 } else { b.d0 };
                        policy
                            .write_record([t.as_str(), &x, &y, &z, &sig12(u)])
                            .map_err(io)?;
                    }
                }
            }
        }
    }
    value.flush()?;
    policy.flush()?;
    Ok(())
}
