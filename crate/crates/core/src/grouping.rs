//! From fused coefficients to a partition, and the post-selection refit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::panel::SieveDesign;
use crate::solver::{
    admm_fit_with, AdmmDiagnostics, FitConfig, PairWeights, PenalizedSystem, UnitCoefs,
};
use crate::spline::{eval_basis_into, SplineBasis};

/// Disjoint, exhaustive grouping of units. Labels are `0..K` in order of
/// first appearance, so two partitions describing the same grouping compare
/// equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_groups: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Self {
            labels,
            n_groups: map.len(),
        }
    }

    pub fn single_group(n: usize) -> Self {
        Self::from_labels(&vec![0; n])
    }

    pub fn singletons(n: usize) -> Self {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, unit: usize) -> usize {
        self.labels[unit]
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == group)
            .collect()
    }

    /// As [`Self::members`], failing on an out-of-range group.
    pub fn members_checked(&self, group: usize) -> Result<Vec<usize>> {
        if group >= self.n_groups {
            return Err(Error::GroupIndex {
                index: group,
                groups: self.n_groups,
            });
        }
        Ok(self.members(group))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the graph linking units whose coefficient vectors
/// lie closer than `tol`. Chains are merged, so the result is transitive.
pub fn extract_partition(pi: &UnitCoefs, tol: f64) -> Partition {
    let n = pi.n_units();
    let mut sets = DisjointSets::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if pi.distance(i, j) < tol {
                sets.union(i, j);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| sets.find(i)).collect();
    Partition::from_labels(&roots)
}

/// Pooled least squares over a set of units.
fn pooled_coef(design: &SieveDesign, members: &[usize]) -> Option<DVector<f64>> {
    let q = design.dim();
    let mut gram = DMatrix::zeros(q, q);
    let mut zty = DVector::zeros(q);
    for &i in members {
        let u = &design.units()[i];
        gram += &u.gram;
        zty += &u.zty;
    }
    spd_solve(&gram, &zty)
}

#[derive(Clone, Debug)]
pub struct MinShareOutcome {
    pub partition: Partition,
    /// Units moved out of undersized groups, ascending.
    pub reassigned: Vec<usize>,
    /// No group reached the floor, so the partition was left unchanged.
    pub floor_unmet: bool,
}

/// Dissolves groups holding less than `min_share` of the units. Each of their
/// members joins the surviving group whose fitted post-selection coefficients
/// give it the smallest residual sum of squares (ties go to the lower label).
/// Undersized groups are processed in increasing size order and their units
/// in ascending index order.
pub fn enforce_min_share(
    partition: &Partition,
    design: &SieveDesign,
    min_share: f64,
) -> Result<MinShareOutcome> {
    let n = partition.n_units();
    let sizes = partition.sizes();
    let survives: Vec<bool> = sizes
        .iter()
        .map(|&s| s as f64 / n as f64 >= min_share)
        .collect();
    let unchanged = |floor_unmet| MinShareOutcome {
        partition: partition.clone(),
        reassigned: Vec::new(),
        floor_unmet,
    };
    if survives.iter().all(|&s| s) {
        return Ok(unchanged(false));
    }
    if !survives.iter().any(|&s| s) {
        return Ok(unchanged(true));
    }

    let survivors: Vec<usize> = (0..partition.n_groups()).filter(|&k| survives[k]).collect();
    let fitted = survivors
        .iter()
        .map(|&k| pooled_coef(design, &partition.members(k)).ok_or(Error::SingularGroupGram(k)))
        .collect::<Result<Vec<_>>>()?;

    let mut small: Vec<usize> = (0..partition.n_groups())
        .filter(|&k| !survives[k])
        .collect();
    small.sort_by_key(|&k| (sizes[k], k));

    let mut labels = partition.labels().to_vec();
    let mut reassigned = Vec::new();
    for k in small {
        for i in partition.members(k) {
            let u = &design.units()[i];
            let best = fitted
                .iter()
                .map(|c| u.ssr(c.as_slice()))
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (s, v)| if v < acc.1 { (s, v) } else { acc },
                )
                .0;
            labels[i] = survivors[best];
            reassigned.push(i);
        }
    }
    reassigned.sort_unstable();
    Ok(MinShareOutcome {
        partition: Partition::from_labels(&labels),
        reassigned,
        floor_unmet: false,
    })
}

#[derive(Clone, Debug)]
pub struct PostLasso {
    /// Group coefficients in the design's reduced coordinates.
    pub coefs: Vec<DVector<f64>>,
    /// Per-unit residuals of the within-transformed responses.
    pub residuals: Vec<DVector<f64>>,
    /// Residual sum of squares over the total number of observations.
    pub sigma2: f64,
}

/// Group-pooled least squares given a partition.
pub fn post_lasso(design: &SieveDesign, partition: &Partition) -> Result<PostLasso> {
    if partition.n_units() != design.n_units() {
        return Err(Error::DimensionMismatch {
            expected: design.n_units(),
            found: partition.n_units(),
        });
    }
    let coefs = (0..partition.n_groups())
        .map(|k| pooled_coef(design, &partition.members(k)).ok_or(Error::SingularGroupGram(k)))
        .collect::<Result<Vec<_>>>()?;
    let mut ssr = 0.0;
    let residuals = design
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let r = &u.y - &u.z * &coefs[partition.label(i)];
            ssr += r.norm_squared();
            r
        })
        .collect();
    Ok(PostLasso {
        coefs,
        residuals,
        sigma2: ssr / design.total_observations() as f64,
    })
}

/// A penalized fit at one tuning value with its grouping and refit.
#[derive(Clone, Debug)]
pub struct GroupedFit {
    pub lambda: f64,
    pub partition: Partition,
    /// Penalized estimate per group (`M x p`): the mean of the members'
    /// fused coefficients, excluding units moved by the group-size floor.
    pub pse_coefs: Vec<DMatrix<f64>>,
    /// Post-selection estimate per group (`M x p`).
    pub post_coefs: Vec<DMatrix<f64>>,
    /// Post-selection estimate in the design's reduced coordinates.
    pub post_active: Vec<DVector<f64>>,
    pub residuals: Vec<DVector<f64>>,
    pub sigma2: f64,
    pub diagnostics: AdmmDiagnostics,
    pub reassigned: Vec<usize>,
    pub floor_unmet: bool,
}

impl GroupedFit {
    pub fn n_groups(&self) -> usize {
        self.partition.n_groups()
    }
}

/// Fits one lambda: ADMM, thresholded grouping, group-size floor, refit.
pub fn fit_lambda(
    design: &SieveDesign,
    system: &PenalizedSystem,
    prelim: &UnitCoefs,
    weights: &PairWeights,
    config: &FitConfig,
) -> Result<GroupedFit> {
    let state = admm_fit_with(system, prelim, weights, config)?;
    let raw = extract_partition(&state.pi, config.tol_group);
    let outcome = enforce_min_share(&raw, design, config.min_group_share)?;
    let partition = outcome.partition;

    let q = design.dim();
    let mut sums = vec![DVector::<f64>::zeros(q); partition.n_groups()];
    let mut counts = vec![0usize; partition.n_groups()];
    for i in 0..design.n_units() {
        if outcome.reassigned.binary_search(&i).is_ok() {
            continue;
        }
        let k = partition.label(i);
        sums[k] += DVector::from_column_slice(state.pi.block(i));
        counts[k] += 1;
    }
    let pse_coefs = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| design.control_points((s / c as f64).as_slice()))
        .collect();

    let post = post_lasso(design, &partition)?;
    Ok(GroupedFit {
        lambda: config.lambda,
        pse_coefs,
        post_coefs: post
            .coefs
            .iter()
            .map(|c| design.control_points(c.as_slice()))
            .collect(),
        post_active: post.coefs,
        residuals: post.residuals,
        sigma2: post.sigma2,
        diagnostics: state.diagnostics(),
        reassigned: outcome.reassigned,
        floor_unmet: outcome.floor_unmet,
        partition,
    })
}

/// `Xi' b(v)` for each grid point, as rows of a `grid x p` matrix.
pub fn curve_path(
    control_points: &DMatrix<f64>,
    basis: &SplineBasis,
    grid: &[f64],
) -> Result<DMatrix<f64>> {
    if control_points.nrows() != basis.size() {
        return Err(Error::DimensionMismatch {
            expected: basis.size(),
            found: control_points.nrows(),
        });
    }
    let p = control_points.ncols();
    let mut b = vec![0.0; basis.size()];
    let mut out = DMatrix::zeros(grid.len(), p);
    for (r, &v) in grid.iter().enumerate() {
        eval_basis_into(basis.knots(), v, &mut b)?;
        for l in 0..p {
            out[(r, l)] = control_points
                .column(l)
                .iter()
                .zip(&b)
                .map(|(c, x)| c * x)
                .sum();
        }
    }
    Ok(out)
}

/// Post-selection coefficient functions of group `group` on `grid`.
pub fn coef_path(
    fit: &GroupedFit,
    basis: &SplineBasis,
    group: usize,
    grid: &[f64],
) -> Result<Vec<DVector<f64>>> {
    let cp = fit.post_coefs.get(group).ok_or(Error::GroupIndex {
        index: group,
        groups: fit.n_groups(),
    })?;
    let path = curve_path(cp, basis, grid)?;
    Ok(path.row_iter().map(|r| r.transpose()).collect())
}

/// Serializable view of a fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitSummary {
    pub lambda: f64,
    pub n_groups: usize,
    pub group_sizes: Vec<usize>,
    /// `(unit_id, group)` pairs, groups numbered from 1.
    pub assignment: Vec<(String, usize)>,
    /// Per group, `M` rows of `p` control points.
    pub pse_control_points: Vec<Vec<Vec<f64>>>,
    pub post_control_points: Vec<Vec<Vec<f64>>>,
    pub sigma2: f64,
    pub diagnostics: AdmmDiagnostics,
    pub reassigned_units: Vec<String>,
    pub floor_unmet: bool,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl FitSummary {
    pub fn new(fit: &GroupedFit, design: &SieveDesign) -> Self {
        let ids = design.units();
        Self {
            lambda: fit.lambda,
            n_groups: fit.n_groups(),
            group_sizes: fit.partition.sizes(),
            assignment: ids
                .iter()
                .enumerate()
                .map(|(i, u)| (u.id.clone(), fit.partition.label(i) + 1))
                .collect(),
            pse_control_points: fit.pse_coefs.iter().map(rows).collect(),
            post_control_points: fit.post_coefs.iter().map(rows).collect(),
            sigma2: fit.sigma2,
            diagnostics: fit.diagnostics,
            reassigned_units: fit.reassigned.iter().map(|&i| ids[i].id.clone()).collect(),
            floor_unmet: fit.floor_unmet,
        }
    }
}
