use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::{curve_path, post_lasso, GroupedFit, Partition};
use crate::inference::{coef_stderr, normal_quantile_two_sided};
use crate::panel::{build_design, SieveDesign};
use crate::selection::{default_interior_knots, select_lambda, LambdaGrid};
use crate::simulation::dgp::{gen_panel_with, Dgp, DgpSpec, ErrorModel, TruePanel};
use crate::simulation::metrics::{ari, rmse_paths};
use crate::solver::{AdmmDiagnostics, FitConfig};
use crate::spline::SplineConfig;

/// Pointwise band check at one point of the unit interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub v: f64,
    pub level: f64,
    /// HAC window; `None` uses the default for the panel length.
    pub window: Option<usize>,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            v: 0.5,
            level: 0.9,
            window: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyConfig {
    pub spec: DgpSpec,
    pub reps: usize,
    pub seed: u64,
    pub grid: LambdaGrid,
    pub fit: FitConfig,
    pub degree: usize,
    /// `None` picks the default for the design (see [`StudyConfig::knots`]).
    pub interior_knots: Option<usize>,
    /// `None` uses the default complexity weight.
    pub rho: Option<f64>,
    pub coverage: Option<CoverageConfig>,
}

impl StudyConfig {
    pub fn new(spec: DgpSpec, reps: usize, seed: u64) -> Self {
        let grid = default_grid(&spec);
        Self {
            spec,
            reps,
            seed,
            grid,
            fit: FitConfig::default(),
            degree: 3,
            interior_knots: None,
            rho: None,
            coverage: None,
        }
    }

    /// Interior knots actually used: the override, else 2 (trend model) or 1
    /// (other designs) with serially correlated errors or missing data, else
    /// the `(N T)^{1/7}` heuristic.
    pub fn knots(&self) -> usize {
        if let Some(k) = self.interior_knots {
            return k;
        }
        let reduced =
            matches!(self.spec.errors, ErrorModel::Ar1(_)) || self.spec.missing_share > 0.0;
        if reduced {
            if self.spec.dgp == Dgp::Trend {
                2
            } else {
                1
            }
        } else {
            default_interior_knots(self.spec.n, self.spec.t, self.spec.dgp.n_regressors())
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.fit.validate()?;
        SplineConfig::new(self.degree, self.knots())?;
        if self.reps == 0 {
            return Err(Error::InvalidConfig(
                "study needs at least one replication".into(),
            ));
        }
        if let Some(c) = &self.coverage {
            normal_quantile_two_sided(c.level)?;
            if !(0.0..=1.0).contains(&c.v) {
                return Err(Error::Domain { value: c.v });
            }
        }
        Ok(())
    }
}

/// Fifty-point linear tuning grids used for the simulation designs, by
/// model, sample size and error/missing-data variant.
pub fn default_grid(spec: &DgpSpec) -> LambdaGrid {
    let ar = matches!(spec.errors, ErrorModel::Ar1(_));
    let missing = spec.missing_share > 0.0;
    let (big_n, big_t) = (spec.n >= 100, spec.t >= 100);
    let (lo, hi) = match spec.dgp {
        Dgp::Trend => match (ar, missing) {
            (true, _) => (0.1, 20.0),
            (_, true) => (0.1, 10.0),
            _ => (0.1, 50.0),
        },
        Dgp::TrendExogenous => match (ar, missing, big_n, big_t) {
            (true, _, false, false) => (30.0, 75.0),
            (true, _, true, false) => (25.0, 65.0),
            (true, _, false, true) => (8.0, 25.0),
            (true, _, true, true) => (18.0, 37.0),
            (_, true, false, false) => (15.0, 47.0),
            (_, true, true, false) => (10.0, 30.0),
            (_, true, _, true) => (10.0, 60.0),
            (_, _, _, false) => (10.0, 35.0),
            _ => (1.0, 20.0),
        },
        Dgp::Dynamic => match (ar, missing, big_n, big_t) {
            (true, _, true, false) => (4.0, 20.0),
            (true, _, true, true) => (0.1, 8.0),
            (true, _, _, _) => (0.1, 20.0),
            (_, true, true, false) => (5.0, 25.0),
            (_, true, true, true) => (0.1, 9.0),
            (_, true, _, _) => (0.1, 20.0),
            _ => (0.01, 15.0),
        },
    };
    LambdaGrid::linear(lo, hi, 50)
}

/// Generator for replication `rep`: the master seed with its own stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub lambda: Option<f64>,
    pub n_groups: Option<usize>,
    pub correct_k: bool,
    pub exact: bool,
    pub ari: Option<f64>,
    pub rmse_pse: Vec<f64>,
    pub rmse_post: Vec<f64>,
    pub rmse_oracle: Vec<f64>,
    /// One cell per estimated group; empty when not evaluated.
    pub covered: Vec<CoverageCell>,
    pub coverage_excluded: bool,
    pub admm_converged: Option<bool>,
    pub floor_unmet: bool,
    pub error: Option<String>,
}

/// Band check for one estimated group, against the true group holding most
/// of its members.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageCell {
    pub group: usize,
    pub true_group: usize,
    /// Per coefficient.
    pub covered: Vec<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub v: f64,
    pub level: f64,
    /// Replications with the true number of groups.
    pub evaluated_reps: usize,
    /// Replications skipped because the number of groups was wrong.
    pub excluded_reps: usize,
    /// Per coefficient, covered and total (replication, group) cells.
    pub covered: Vec<usize>,
    pub total: Vec<usize>,
    pub rate: Vec<f64>,
    /// Per true group and coefficient.
    pub rate_by_true_group: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub interior_knots: usize,
    pub successful_reps: usize,
    pub failed_reps: usize,
    pub freq_correct_k: f64,
    pub freq_exact: f64,
    pub mean_ari: f64,
    pub mean_k: f64,
    pub rmse_pse: Vec<f64>,
    pub rmse_post: Vec<f64>,
    pub rmse_oracle: Vec<f64>,
    /// Share of replications where the penalized estimate has a larger RMSE
    /// (summed over coefficients) than the post-selection refit.
    pub share_pse_above_post: f64,
    pub coverage: Option<CoverageSummary>,
    pub records: Vec<ReplicationRecord>,
}

/// Infeasible fit pooling units by their true groups. No penalty is
/// applied, so the penalized and refit coefficients coincide.
pub fn oracle_fit(design: &SieveDesign, truth: &Partition) -> Result<GroupedFit> {
    let post = post_lasso(design, truth)?;
    let coefs: Vec<DMatrix<f64>> = post
        .coefs
        .iter()
        .map(|c| design.control_points(c.as_slice()))
        .collect();
    Ok(GroupedFit {
        lambda: 0.0,
        partition: truth.clone(),
        pse_coefs: coefs.clone(),
        post_coefs: coefs,
        post_active: post.coefs,
        residuals: post.residuals,
        sigma2: post.sigma2,
        diagnostics: AdmmDiagnostics {
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
        },
        reassigned: Vec::new(),
        floor_unmet: false,
    })
}

/// True paths on the estimation grid with the same level normalization as
/// the estimates: curves of time-invariant regressors have zero mean over the
/// sample clock.
pub fn identified_truth(dgp: Dgp, design: &SieveDesign, grid: &[f64]) -> Vec<DMatrix<f64>> {
    let fixed = design.time_invariant_regressors();
    let t = design.global_t();
    (0..Dgp::N_GROUPS)
        .map(|g| {
            let level: Vec<f64> = (0..dgp.n_regressors())
                .map(|l| {
                    (1..=t)
                        .map(|s| dgp.coefficients(g, s as f64 / t as f64)[l])
                        .sum::<f64>()
                        / t as f64
                })
                .collect();
            DMatrix::from_fn(grid.len(), dgp.n_regressors(), |r, l| {
                let c = dgp.coefficients(g, grid[r])[l];
                if fixed[l] {
                    c - level[l]
                } else {
                    c
                }
            })
        })
        .collect()
}

fn paths(fits: &[DMatrix<f64>], design: &SieveDesign, grid: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    fits.iter()
        .map(|cp| curve_path(cp, design.basis(), grid))
        .collect()
}

/// Majority true group of each estimated group.
fn match_groups(estimated: &Partition, truth: &Partition) -> Vec<usize> {
    (0..estimated.n_groups())
        .map(|k| {
            let mut counts = vec![0usize; truth.n_groups()];
            for i in estimated.members(k) {
                counts[truth.label(i)] += 1;
            }
            counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(g, _)| g)
                .unwrap_or(0)
        })
        .collect()
}

fn coverage_cells(
    design: &SieveDesign,
    fit: &GroupedFit,
    tp: &TruePanel,
    dgp: Dgp,
    cfg: &CoverageConfig,
) -> Result<Vec<CoverageCell>> {
    let z = normal_quantile_two_sided(cfg.level)?;
    let truth = identified_truth(dgp, design, &[cfg.v]);
    let matched = match_groups(&fit.partition, &tp.partition);
    (0..fit.n_groups())
        .map(|k| {
            let se = coef_stderr(design, fit, k, cfg.v, cfg.window)?;
            let est = curve_path(&fit.post_coefs[k], design.basis(), &[cfg.v])?;
            Ok(CoverageCell {
                group: k,
                true_group: matched[k],
                covered: (0..se.len())
                    .map(|l| (est[(0, l)] - truth[matched[k]][(0, l)]).abs() <= z * se[l])
                    .collect(),
            })
        })
        .collect()
}

fn run_replication(config: &StudyConfig, rep: usize) -> ReplicationRecord {
    let mut record = ReplicationRecord {
        rep,
        lambda: None,
        n_groups: None,
        correct_k: false,
        exact: false,
        ari: None,
        rmse_pse: Vec::new(),
        rmse_post: Vec::new(),
        rmse_oracle: Vec::new(),
        covered: Vec::new(),
        coverage_excluded: false,
        admm_converged: None,
        floor_unmet: false,
        error: None,
    };
    if let Err(e) = fill_replication(config, rep, &mut record) {
        record.error = Some(e.to_string());
    }
    record
}

fn fill_replication(
    config: &StudyConfig,
    rep: usize,
    record: &mut ReplicationRecord,
) -> Result<()> {
    let spec = &config.spec;
    let mut rng = replication_rng(config.seed, rep);
    let tp = gen_panel_with(spec, &mut rng)?;
    let design = build_design(&tp.panel, SplineConfig::new(config.degree, config.knots())?)?;
    let selection = select_lambda(&design, &config.grid.values(), &config.fit, config.rho)?;
    let fit = &selection.best_fit;

    let k0 = tp.partition.n_groups();
    record.lambda = Some(fit.lambda);
    record.n_groups = Some(fit.n_groups());
    record.correct_k = fit.n_groups() == k0;
    record.exact = fit.partition == tp.partition;
    record.ari = Some(ari(&fit.partition, &tp.partition)?);
    record.admm_converged = Some(fit.diagnostics.converged);
    record.floor_unmet = fit.floor_unmet;

    let grid: Vec<f64> = (1..=spec.t).map(|t| t as f64 / spec.t as f64).collect();
    let truth = identified_truth(spec.dgp, &design, &grid);
    let labels = fit.partition.labels();
    let true_labels = tp.partition.labels();
    record.rmse_pse = rmse_paths(
        &paths(&fit.pse_coefs, &design, &grid)?,
        labels,
        &truth,
        true_labels,
    )?;
    record.rmse_post = rmse_paths(
        &paths(&fit.post_coefs, &design, &grid)?,
        labels,
        &truth,
        true_labels,
    )?;
    let oracle = oracle_fit(&design, &tp.partition)?;
    record.rmse_oracle = rmse_paths(
        &paths(&oracle.post_coefs, &design, &grid)?,
        true_labels,
        &truth,
        true_labels,
    )?;

    if let Some(cov) = &config.coverage {
        if record.correct_k {
            record.covered = coverage_cells(&design, fit, &tp, spec.dgp, cov)?;
        } else {
            record.coverage_excluded = true;
        }
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn mean_vec<'a>(rows: impl Iterator<Item = &'a Vec<f64>> + Clone, p: usize) -> Vec<f64> {
    (0..p).map(|l| mean(rows.clone().map(|r| r[l]))).collect()
}

/// Runs the Monte Carlo study. Replications run in parallel, each from its
/// own seeded stream, so the report does not depend on the thread count.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let records: Vec<ReplicationRecord> = (0..config.reps)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();

    let ok: Vec<&ReplicationRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let n_ok = ok.len();
    let p = config.spec.dgp.n_regressors();
    let frac = |f: &dyn Fn(&ReplicationRecord) -> bool| {
        if n_ok == 0 {
            f64::NAN
        } else {
            ok.iter().filter(|r| f(r)).count() as f64 / n_ok as f64
        }
    };

    let coverage = config.coverage.map(|c| {
        let evaluated: Vec<&&ReplicationRecord> =
            ok.iter().filter(|r| !r.coverage_excluded).collect();
        let mut covered = vec![0usize; p];
        let mut total = vec![0usize; p];
        let mut by_group = vec![vec![(0usize, 0usize); p]; Dgp::N_GROUPS];
        for r in &evaluated {
            for cell in &r.covered {
                for (l, &hit) in cell.covered.iter().enumerate() {
                    total[l] += 1;
                    covered[l] += usize::from(hit);
                    let slot = &mut by_group[cell.true_group][l];
                    slot.0 += usize::from(hit);
                    slot.1 += 1;
                }
            }
        }
        let ratio = |c: usize, t: usize| {
            if t == 0 {
                f64::NAN
            } else {
                c as f64 / t as f64
            }
        };
        CoverageSummary {
            v: c.v,
            level: c.level,
            evaluated_reps: evaluated.len(),
            excluded_reps: n_ok - evaluated.len(),
            rate: covered
                .iter()
                .zip(&total)
                .map(|(&c, &t)| ratio(c, t))
                .collect(),
            rate_by_true_group: by_group
                .iter()
                .map(|row| row.iter().map(|&(c, t)| ratio(c, t)).collect())
                .collect(),
            covered,
            total,
        }
    });

    Ok(StudyReport {
        interior_knots: config.knots(),
        successful_reps: n_ok,
        failed_reps: records.len() - n_ok,
        freq_correct_k: frac(&|r| r.correct_k),
        freq_exact: frac(&|r| r.exact),
        mean_ari: mean(ok.iter().filter_map(|r| r.ari)),
        mean_k: mean(ok.iter().filter_map(|r| r.n_groups.map(|k| k as f64))),
        rmse_pse: mean_vec(ok.iter().map(|r| &r.rmse_pse), p),
        rmse_post: mean_vec(ok.iter().map(|r| &r.rmse_post), p),
        rmse_oracle: mean_vec(ok.iter().map(|r| &r.rmse_oracle), p),
        share_pse_above_post: frac(&|r| {
            r.rmse_pse.iter().sum::<f64>() > r.rmse_post.iter().sum::<f64>()
        }),
        coverage,
        config: config.clone(),
        records,
    })
}
