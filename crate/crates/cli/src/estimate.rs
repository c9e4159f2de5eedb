use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use tvgroup::grouping::{curve_path, FitSummary};
use tvgroup::inference::{coef_stderr, default_window, normal_quantile_two_sided};
use tvgroup::panel::load_csv;
use tvgroup::selection::{default_interior_knots, LambdaGrid, LambdaRecord};
use tvgroup::spline::unit_grid;
use tvgroup::{build_design, select_lambda, SplineConfig};

use crate::output::{write_json, RunManifest};
use crate::{ensure_dir, CmdResult, Failure, FitArgs};

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Long-format CSV with header unit_id,time_index,y,x1,...,xp.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace the regressors by a constant (pure trend model).
    #[arg(long)]
    pub intercept_only: bool,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Add pointwise HAC standard errors and bands to the coefficient paths.
    #[arg(long)]
    pub se: bool,
    /// Band coverage level.
    #[arg(long, default_value_t = 0.9)]
    pub level: f64,
    /// HAC lag window (default floor(4 (T/100)^(2/9))).
    #[arg(long)]
    pub hac_window: Option<usize>,
    /// Points of the even grid on [0, 1] for coef_paths.csv.
    #[arg(long, default_value_t = 101)]
    pub path_points: usize,
}

#[derive(Serialize)]
struct ResolvedEstimate<'a> {
    input: &'a PathBuf,
    intercept_only: bool,
    degree: usize,
    interior_knots: usize,
    lambda_grid: LambdaGrid,
    fit: tvgroup::FitConfig,
    rho: f64,
    se: bool,
    level: f64,
    hac_window: usize,
    path_points: usize,
}

#[derive(Serialize)]
struct FitFile<'a> {
    n_units: usize,
    n_periods: usize,
    n_regressors: usize,
    time_invariant_regressors: &'a [bool],
    interior_knots: usize,
    basis_size: usize,
    knots: &'a [f64],
    rho: f64,
    ic: f64,
    #[serde(flatten)]
    fit: FitSummary,
    warnings: Vec<String>,
}

pub fn run(args: &EstimateArgs) -> CmdResult {
    let mut panel =
        load_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    if args.intercept_only {
        panel = panel.into_intercept_only();
    }
    if panel.n_regressors() == 0 {
        return Err(Failure::Input(anyhow::anyhow!(
            "input has no regressor columns; pass --intercept-only for a trend model"
        )));
    }
    if args.path_points < 2 {
        return Err(Failure::Input(anyhow::anyhow!(
            "--path-points must be at least 2"
        )));
    }
    let knots = args.fit.knots.unwrap_or_else(|| {
        default_interior_knots(panel.n_units(), panel.global_t(), panel.n_regressors())
    });
    let design = build_design(&panel, SplineConfig::new(args.fit.degree, knots)?)?;
    let grid = args.fit.lambda_grid.unwrap_or_default();
    let config = args.fit.fit_config();
    let window = args
        .hac_window
        .unwrap_or_else(|| default_window(panel.global_t()));
    let z = if args.se {
        Some(normal_quantile_two_sided(args.level)?)
    } else {
        None
    };

    let selection = select_lambda(&design, &grid.values(), &config, args.fit.rho)?;
    for w in selection.warnings() {
        eprintln!("warning: {w}");
    }
    let fit = &selection.best_fit;

    ensure_dir(&args.out)?;
    let resolved = ResolvedEstimate {
        input: &args.input,
        intercept_only: args.intercept_only,
        degree: args.fit.degree,
        interior_knots: knots,
        lambda_grid: grid,
        fit: config.clone(),
        rho: selection.rho,
        se: args.se,
        level: args.level,
        hac_window: window,
        path_points: args.path_points,
    };

    let fit_file = FitFile {
        n_units: design.n_units(),
        n_periods: design.global_t(),
        n_regressors: design.n_regressors(),
        time_invariant_regressors: design.time_invariant_regressors(),
        interior_knots: knots,
        basis_size: design.basis_size(),
        knots: design.basis().knots().as_slice(),
        rho: selection.rho,
        ic: selection.records[selection.best_index]
            .ic
            .unwrap_or(f64::NAN),
        fit: FitSummary::new(fit, &design),
        warnings: selection.warnings(),
    };
    write_json(&args.out.join("fit.json"), &fit_file)?;
    write_ic_trace(&args.out.join("ic_trace.csv"), &selection.records)?;

    let v = unit_grid(args.path_points);
    let mut w =
        csv::Writer::from_path(args.out.join("coef_paths.csv")).map_err(anyhow::Error::from)?;
    let mut header = vec!["group", "v", "coef", "pse", "post"];
    if args.se {
        header.extend(["se", "lower", "upper"]);
    }
    w.write_record(&header).map_err(anyhow::Error::from)?;
    for k in 0..fit.n_groups() {
        let pse = curve_path(&fit.pse_coefs[k], design.basis(), &v)?;
        let post = curve_path(&fit.post_coefs[k], design.basis(), &v)?;
        for (r, &vr) in v.iter().enumerate() {
            let se = match z {
                Some(_) => Some(coef_stderr(&design, fit, k, vr, Some(window))?),
                None => None,
            };
            for l in 0..design.n_regressors() {
                let mut row = vec![
                    (k + 1).to_string(),
                    format!("{vr:?}"),
                    (l + 1).to_string(),
                    format!("{:?}", pse[(r, l)]),
                    format!("{:?}", post[(r, l)]),
                ];
                if let (Some(z), Some(se)) = (z, &se) {
                    let est = post[(r, l)];
                    row.push(format!("{:?}", se[l]));
                    row.push(format!("{:?}", est - z * se[l]));
                    row.push(format!("{:?}", est + z * se[l]));
                }
                w.write_record(&row).map_err(anyhow::Error::from)?;
            }
        }
    }
    w.flush()?;

    RunManifest::new("estimate", &resolved, None)
        .inputs(&[&args.input])
        .outputs(&args.out, &["fit.json", "coef_paths.csv", "ic_trace.csv"])
        .write(&args.out)?;
    eprintln!(
        "selected lambda {} with {} groups (sizes {:?})",
        fit.lambda,
        fit.n_groups(),
        fit.partition.sizes()
    );
    Ok(())
}

fn write_ic_trace(path: &std::path::Path, records: &[LambdaRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "lambda",
        "ic",
        "n_groups",
        "sigma2",
        "iterations",
        "converged",
        "error",
    ])?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    for r in records {
        w.write_record([
            format!("{:?}", r.lambda),
            opt(r.ic),
            r.n_groups.map(|k| k.to_string()).unwrap_or_default(),
            opt(r.sigma2),
            r.iterations.map(|k| k.to_string()).unwrap_or_default(),
            r.converged.map(|b| b.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
