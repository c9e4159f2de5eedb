//! Tuning-parameter selection with a BIC-type information criterion.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::{fit_lambda, GroupedFit};
use crate::panel::SieveDesign;
use crate::solver::{adaptive_weights, preliminary_ols, FitConfig, PenalizedSystem};

/// Constant in the default complexity weight `c log(n) / sqrt(n)`.
pub const C_LAMBDA: f64 = 0.04;

/// `ln(sigma2) + rho * p * M * K`.
pub fn information_criterion(sigma2: f64, rho: f64, p: usize, m: usize, k: usize) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    Ok(sigma2.ln() + rho * (p * m * k) as f64)
}

/// `0.04 log(n) / sqrt(n)` for `n` total observations (`N T` when balanced).
pub fn default_rho(total_observations: usize) -> f64 {
    let n = total_observations as f64;
    C_LAMBDA * n.ln() / n.sqrt()
}

/// `max(floor((N T)^{1/7} - ln p), 1)`.
pub fn default_interior_knots(n: usize, t: usize, p: usize) -> usize {
    let raw = ((n * t) as f64).powf(1.0 / 7.0) - (p as f64).ln();
    (raw.floor().max(1.0)) as usize
}

/// Evenly spaced (linear or logarithmic) tuning values from `lo` to `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub log: bool,
}

impl LambdaGrid {
    pub fn linear(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            hi,
            n,
            log: false,
        }
    }

    pub fn log(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            lo,
            hi,
            n,
            log: true,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = |i: usize| i as f64 / (self.n - 1) as f64;
        if self.log {
            let (a, b) = (self.lo.ln(), self.hi.ln());
            (0..self.n).map(|i| (a + (b - a) * step(i)).exp()).collect()
        } else {
            (0..self.n)
                .map(|i| self.lo + (self.hi - self.lo) * step(i))
                .collect()
        }
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    /// Parses `lo:hi:n` or `lo:hi:n:log`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("lambda grid {s:?}: expected lo:hi:n[:log]"));
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        let log = match parts.get(3).map(|x| x.trim()) {
            None => false,
            Some("log") => true,
            Some(_) => return Err(bad()),
        };
        if n == 0 || lo.is_nan() || lo < 0.0 || hi.is_nan() || hi < lo || !hi.is_finite() {
            return Err(bad());
        }
        if log && lo <= 0.0 {
            return Err(Error::InvalidConfig("log-spaced grid needs lo > 0".into()));
        }
        Ok(Self { lo, hi, n, log })
    }
}

impl fmt::Display for LambdaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)?;
        if self.log {
            write!(f, ":log")?;
        }
        Ok(())
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self::log(0.01, 50.0, 50)
    }
}

/// Outcome of one grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub ic: Option<f64>,
    pub n_groups: Option<usize>,
    pub sigma2: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    pub records: Vec<LambdaRecord>,
    pub best_index: usize,
    pub best_fit: GroupedFit,
    pub rho: f64,
}

impl SelectionResult {
    pub fn grid(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    pub fn ic_values(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.ic).collect()
    }

    pub fn best_lambda(&self) -> f64 {
        self.records[self.best_index].lambda
    }

    pub fn warnings(&self) -> Vec<String> {
        self.records
            .iter()
            .filter_map(|r| {
                r.error
                    .as_ref()
                    .map(|e| format!("lambda {}: {e}", r.lambda))
            })
            .collect()
    }
}

/// Fits every grid value from one preliminary estimate and one set of
/// adaptive weights and returns the fit minimizing the criterion (ties go to
/// the smaller lambda). A failing grid point is recorded and skipped.
/// `rho = None` uses [`default_rho`] on the total observation count.
pub fn select_lambda(
    design: &SieveDesign,
    grid: &[f64],
    config: &FitConfig,
    rho: Option<f64>,
) -> Result<SelectionResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    config.validate()?;
    for &l in grid {
        config.with_lambda(l).validate()?;
    }
    let prelim = preliminary_ols(design)?;
    let weights = adaptive_weights(&prelim, config.kappa);
    let system = PenalizedSystem::new(design, config.admm_penalty)?;
    let rho = rho.unwrap_or_else(|| default_rho(design.total_observations()));
    let p = design.n_regressors();
    let m = design.basis_size();

    let outcomes: Vec<(LambdaRecord, Option<GroupedFit>)> = grid
        .par_iter()
        .map(|&lambda| {
            let fit = fit_lambda(
                design,
                &system,
                &prelim,
                &weights,
                &config.with_lambda(lambda),
            )
            .and_then(|fit| {
                let ic = information_criterion(fit.sigma2, rho, p, m, fit.n_groups())?;
                Ok((fit, ic))
            });
            match fit {
                Ok((fit, ic)) => (
                    LambdaRecord {
                        lambda,
                        ic: Some(ic),
                        n_groups: Some(fit.n_groups()),
                        sigma2: Some(fit.sigma2),
                        iterations: Some(fit.diagnostics.iterations),
                        converged: Some(fit.diagnostics.converged),
                        error: None,
                    },
                    Some(fit),
                ),
                Err(e) => (
                    LambdaRecord {
                        lambda,
                        ic: None,
                        n_groups: None,
                        sigma2: None,
                        iterations: None,
                        converged: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let best_index = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, (r, _))| r.ic.map(|ic| (i, ic, r.lambda)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)))
        .map(|(i, _, _)| i);
    let Some(best_index) = best_index else {
        let first = outcomes[0].0.error.clone().unwrap_or_default();
        return Err(Error::AllLambdasFailed(first));
    };

    let mut records = Vec::with_capacity(outcomes.len());
    let mut best_fit = None;
    for (i, (record, fit)) in outcomes.into_iter().enumerate() {
        if i == best_index {
            best_fit = fit;
        }
        records.push(record);
    }
    Ok(SelectionResult {
        records,
        best_index,
        best_fit: best_fit.expect("selected grid point has a fit"),
        rho,
    })
}
