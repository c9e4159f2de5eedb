//! Simulated panels with three latent groups and smooth group-specific
//! coefficient functions.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouping::Partition;
use crate::panel::{Panel, UnitSeries};

/// Pre-sample periods simulated and discarded by the dynamic design.
pub const DYNAMIC_BURN_IN: usize = 100;

/// Logistic CDF `1 / (1 + exp(-(v - a) / b))`.
pub fn logistic_cdf(v: f64, a: f64, b: f64) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::InvalidConfig(
            "logistic scale must be nonzero".into(),
        ));
    }
    Ok(logistic(v, a, b))
}

fn logistic(v: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + (-(v - a) / b).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dgp {
    /// `y = gamma + beta_0(t/T) + e`.
    Trend,
    /// `y = gamma + beta_1(t/T) + beta_2(t/T) x + e`, `x ~ N(0, 1)`.
    TrendExogenous,
    /// `y_t = gamma + beta_3(t/T) y_{t-1} + e`.
    Dynamic,
}

impl Dgp {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::Trend),
            2 => Ok(Self::TrendExogenous),
            3 => Ok(Self::Dynamic),
            _ => Err(Error::InvalidConfig(format!(
                "unknown DGP {id}; expected 1, 2 or 3"
            ))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Self::Trend => 1,
            Self::TrendExogenous => 2,
            Self::Dynamic => 3,
        }
    }

    pub fn n_regressors(self) -> usize {
        match self {
            Self::TrendExogenous => 2,
            _ => 1,
        }
    }

    pub const N_GROUPS: usize = 3;

    /// True coefficient vector of `group` (0-based) at `v`.
    pub fn coefficients(self, group: usize, v: f64) -> Vec<f64> {
        let f = logistic;
        let (v2, v3) = (v * v, v * v * v);
        let trend = |g: usize| match g {
            0 => 6.0 * f(v, 0.5, 0.1),
            1 => 6.0 * (2.0 * v - 6.0 * v2 + 4.0 * v3 + f(v, 0.7, 0.05)),
            _ => 6.0 * (4.0 * v - 8.0 * v2 + 4.0 * v3 + f(v, 0.6, 0.05)),
        };
        match self {
            Self::Trend => vec![trend(group)],
            Self::TrendExogenous => {
                let slope = match group {
                    0 => 3.0 * (2.0 * v - 4.0 * v2 + 2.0 * v3 + f(v, 0.6, 0.1)),
                    1 => 3.0 * (v - 3.0 * v2 + 2.0 * v3 + f(v, 0.7, 0.04)),
                    _ => 3.0 * (0.5 * v - 0.5 * v2 + f(v, 0.4, 0.07)),
                };
                vec![0.5 * trend(group), slope]
            }
            Self::Dynamic => {
                let ar = match group {
                    0 => 1.5 * (-0.5 + 2.0 * v - 5.0 * v2 + 2.0 * v3 + f(v, 0.6, 0.03)),
                    1 => 1.5 * (-0.5 + v - 3.0 * v2 + 2.0 * v3 + f(v, 0.2, 0.04)),
                    _ => 1.5 * (-0.5 + 0.5 * v - 0.5 * v2 + f(v, 0.8, 0.07)),
                };
                vec![ar]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ErrorModel {
    Iid,
    /// `e_t = rho e_{t-1} + u_t`, started from its stationary distribution.
    Ar1(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub dgp: Dgp,
    pub n: usize,
    pub t: usize,
    pub shares: Vec<f64>,
    pub errors: ErrorModel,
    /// Fraction of each unit's periods removed at random.
    pub missing_share: f64,
}

impl DgpSpec {
    pub fn new(dgp: Dgp, n: usize, t: usize) -> Self {
        Self {
            dgp,
            n,
            t,
            shares: vec![0.3, 0.3, 0.4],
            errors: ErrorModel::Iid,
            missing_share: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 1 || self.t < 2 {
            return bad("need at least one unit and two periods".into());
        }
        if self.shares.len() != Dgp::N_GROUPS || self.shares.iter().any(|&s| s < 0.0) {
            return bad("group shares must be three nonnegative numbers".into());
        }
        if (self.shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("group shares must sum to one".into());
        }
        if !(0.0..1.0).contains(&self.missing_share) {
            return bad("missing share must lie in [0, 1)".into());
        }
        if let ErrorModel::Ar1(rho) = self.errors {
            if rho.abs() >= 1.0 {
                return bad("AR(1) error coefficient must be inside (-1, 1)".into());
            }
        }
        Ok(())
    }

    /// Contiguous blocks: group `k` gets `round(share_k N)` units and the last
    /// group the remainder.
    pub fn group_labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n);
        let k = self.shares.len();
        for (g, share) in self.shares.iter().enumerate().take(k - 1) {
            let size = (share * self.n as f64).round() as usize;
            let size = size.min(self.n - labels.len());
            labels.extend(std::iter::repeat_n(g, size));
        }
        labels.resize(self.n, k - 1);
        labels
    }
}

#[derive(Clone, Debug)]
pub struct TruePanel {
    pub panel: Panel,
    pub partition: Partition,
    /// Group label (0-based, in DGP order) of each unit.
    pub groups: Vec<usize>,
    pub fixed_effects: Vec<f64>,
    /// Per DGP group, the `T x p` true coefficients at `t/T`, `t = 1..T`.
    pub paths: Vec<DMatrix<f64>>,
}

pub fn true_paths(dgp: Dgp, t: usize) -> Vec<DMatrix<f64>> {
    let p = dgp.n_regressors();
    (0..Dgp::N_GROUPS)
        .map(|g| {
            let mut m = DMatrix::zeros(t, p);
            for s in 1..=t {
                let c = dgp.coefficients(g, s as f64 / t as f64);
                for l in 0..p {
                    m[(s - 1, l)] = c[l];
                }
            }
            m
        })
        .collect()
}

/// Simulates one panel. All randomness comes from a ChaCha8 stream seeded by
/// `seed`.
pub fn gen_panel(spec: &DgpSpec, seed: u64) -> Result<TruePanel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_panel_with(spec, &mut rng)
}

pub fn gen_panel_with<R: Rng>(spec: &DgpSpec, rng: &mut R) -> Result<TruePanel> {
    spec.validate()?;
    let groups = spec.group_labels();
    let t = spec.t;
    let p = spec.dgp.n_regressors();
    let paths = true_paths(spec.dgp, t);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };

    let mut fixed_effects = Vec::with_capacity(spec.n);
    let mut full_units = Vec::with_capacity(spec.n);
    for (i, &g) in groups.iter().enumerate() {
        let gamma = normal();
        fixed_effects.push(gamma);
        let burn = if spec.dgp == Dgp::Dynamic {
            DYNAMIC_BURN_IN
        } else {
            0
        };
        let total = burn + t;
        let mut eps = Vec::with_capacity(total);
        match spec.errors {
            ErrorModel::Iid => eps.extend((0..total).map(|_| normal())),
            ErrorModel::Ar1(rho) => {
                let mut e = normal() / (1.0 - rho * rho).sqrt();
                eps.push(e);
                for _ in 1..total {
                    e = rho * e + normal();
                    eps.push(e);
                }
            }
        }
        let mut y = Vec::with_capacity(t);
        let mut x = DMatrix::zeros(t, p);
        match spec.dgp {
            Dgp::Trend => {
                for s in 0..t {
                    x[(s, 0)] = 1.0;
                    y.push(gamma + paths[g][(s, 0)] + eps[s]);
                }
            }
            Dgp::TrendExogenous => {
                for s in 0..t {
                    let xs = normal();
                    x[(s, 0)] = 1.0;
                    x[(s, 1)] = xs;
                    y.push(gamma + paths[g][(s, 0)] + paths[g][(s, 1)] * xs + eps[s]);
                }
            }
            Dgp::Dynamic => {
                // Burn-in uses the coefficient at v = 0.
                let start = spec.dgp.coefficients(g, 0.0)[0];
                let mut prev = 0.0;
                for e in &eps[..burn] {
                    prev = gamma + start * prev + e;
                }
                for s in 0..t {
                    x[(s, 0)] = prev;
                    prev = gamma + paths[g][(s, 0)] * prev + eps[burn + s];
                    y.push(prev);
                }
            }
        }
        full_units.push(UnitSeries {
            id: (i + 1).to_string(),
            times: (1..=t).collect(),
            y,
            x,
        });
    }

    let units = if spec.missing_share > 0.0 {
        let drop = ((spec.missing_share * t as f64).round() as usize).min(t - 1);
        full_units
            .into_iter()
            .map(|u| {
                let mut removed = sample(rng, t, drop).into_vec();
                removed.sort_unstable();
                let keep: Vec<usize> = (0..t)
                    .filter(|s| removed.binary_search(s).is_err())
                    .collect();
                UnitSeries {
                    id: u.id,
                    times: keep.iter().map(|&s| u.times[s]).collect(),
                    y: keep.iter().map(|&s| u.y[s]).collect(),
                    x: DMatrix::from_fn(keep.len(), p, |r, c| u.x[(keep[r], c)]),
                }
            })
            .collect()
    } else {
        full_units
    };

    Ok(TruePanel {
        panel: Panel::new(units, Some(t))?,
        partition: Partition::from_labels(&groups),
        groups,
        fixed_effects,
        paths,
    })
}
