//! Pointwise standard errors for post-selection coefficient functions with a
//! Bartlett-kernel HAC estimate of the score covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grouping::GroupedFit;
use crate::linalg::{spd_inverse, symmetrize};
use crate::panel::SieveDesign;

/// `floor(4 (T / 100)^{2/9})`.
pub fn default_window(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Bartlett weight `1 - h / (H + 1)` for `h <= H`, else 0.
pub fn bartlett_weight(h: usize, window: usize) -> f64 {
    if h > window {
        0.0
    } else {
        1.0 - h as f64 / (window + 1) as f64
    }
}

/// Kernel-weighted outer products of the scores of one group:
/// `sum_i sum_{s,t} w(|s - t|) z_is z_it' e_is e_it` over pairs of observed
/// periods at most `window` apart on the global clock.
pub fn hac_meat(
    design: &SieveDesign,
    fit: &GroupedFit,
    group: usize,
    window: usize,
) -> Result<DMatrix<f64>> {
    let members = fit.partition.members_checked(group)?;
    let q = design.dim();
    let mut meat = DMatrix::zeros(q, q);
    for i in members {
        let u = &design.units()[i];
        let e = &fit.residuals[i];
        let n = u.n_obs();
        // Scores z_it e_it as columns.
        let mut scores = u.z.transpose();
        for (mut col, &r) in scores.column_iter_mut().zip(e.iter()) {
            col *= r;
        }
        for a in 0..n {
            for b in a..n {
                let h = u.times[b] - u.times[a];
                if h > window {
                    break;
                }
                let w = bartlett_weight(h, window);
                let sa = scores.column(a);
                let sb = scores.column(b);
                if a == b {
                    meat.ger(w, &sa, &sa, 1.0);
                } else {
                    meat.ger(w, &sa, &sb, 1.0);
                    meat.ger(w, &sb, &sa, 1.0);
                }
            }
        }
    }
    symmetrize(&mut meat);
    Ok(meat)
}

/// Covariance of the coefficient functions of one group at `v`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefCovariance {
    pub group: usize,
    pub v: f64,
    pub window: usize,
    /// `p x p`, repaired to be positive semidefinite.
    pub covariance: Vec<Vec<f64>>,
    pub stderr: Vec<f64>,
    /// Eigenvalues clipped to zero during the repair.
    pub clipped: usize,
}

/// Sandwich covariance `L(v) A^{-1} B A^{-1} L(v)'` of the post-selection
/// curves, with `A` the pooled Gram matrix and `B` the HAC meat.
/// `window = None` uses [`default_window`] on the global panel length.
pub fn coef_covariance(
    design: &SieveDesign,
    fit: &GroupedFit,
    group: usize,
    v: f64,
    window: Option<usize>,
) -> Result<CoefCovariance> {
    let t = design.global_t();
    let window = window.unwrap_or_else(|| default_window(t));
    if window >= t {
        return Err(Error::HacWindow { window, periods: t });
    }
    let members = fit.partition.members_checked(group)?;
    let q = design.dim();
    let mut gram = DMatrix::zeros(q, q);
    for &i in &members {
        gram += &design.units()[i].gram;
    }
    let bread = spd_inverse(&gram).ok_or(Error::SingularGroupGram(group))?;
    let meat = hac_meat(design, fit, group, window)?;
    let loading = design.curve_loading(v)?;
    let lb = &loading * &bread;
    let mut cov = &lb * meat * lb.transpose();
    symmetrize(&mut cov);
    let (cov, clipped) = clip_psd(cov);
    let stderr = cov.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect();
    Ok(CoefCovariance {
        group,
        v,
        window,
        covariance: cov
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
        stderr,
        clipped,
    })
}

/// Pointwise standard errors of the `p` coefficient functions of `group` at `v`.
pub fn coef_stderr(
    design: &SieveDesign,
    fit: &GroupedFit,
    group: usize,
    v: f64,
    window: Option<usize>,
) -> Result<DVector<f64>> {
    let c = coef_covariance(design, fit, group, v, window)?;
    Ok(DVector::from_vec(c.stderr))
}

/// Two-sided normal critical value for a `level` interval.
pub fn normal_quantile_two_sided(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level {level} not in (0, 1)"
        )));
    }
    Ok(Normal::standard().inverse_cdf(0.5 + level / 2.0))
}

/// Eigenvalue clipping to the nearest positive semidefinite matrix.
fn clip_psd(m: DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let eig = m.symmetric_eigen();
    let clipped = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if clipped == 0 {
        return (eig.recompose(), 0);
    }
    let vals = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize(&mut out);
    (out, clipped)
}
