//! Pairwise adaptive group fused-Lasso fit of the unit-level sieve
//! coefficients, solved with ADMM.
//!
//! The objective for coefficients `pi = (pi_1, ..., pi_N)` is
//!
//! ```text
//! F(pi) = sum_i (1/T_i) ||y_i - Z_i pi_i||^2 + (lambda/N) sum_{i<j} w_ij ||pi_i - pi_j||
//! ```
//!
//! with `T_i` the number of observed periods of unit `i` (equal to `T` for a
//! balanced panel). ADMM works on `(T_ref/2) F` with `T_ref` the mean number of
//! observed periods, so a balanced panel runs exactly the classic iteration
//! with threshold `w_ij T lambda / (2 N theta)`.
//!
//! The pi-update solves `(H + theta Δ'Δ) pi = rhs` where `H` is block diagonal
//! and `Δ'Δ = (N I - 1 1') ⊗ I`. The system is a block-diagonal matrix minus a
//! rank-`q` correction, so it is factorized once through the Woodbury identity
//! and every solve costs `O(N q^2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_vec, spd_inverse, spd_solve, symmetrize};
use crate::panel::SieveDesign;

/// Floor on preliminary pairwise distances before they enter the adaptive
/// weights.
pub const WEIGHT_DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda: f64,
    pub kappa: f64,
    /// ADMM augmented-Lagrangian penalty.
    pub admm_penalty: f64,
    pub max_iter: usize,
    pub tol_admm: f64,
    pub tol_group: f64,
    pub min_group_share: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            kappa: 2.0,
            admm_penalty: 1.0,
            max_iter: 50_000,
            tol_admm: 1e-10,
            tol_group: 1e-3,
            min_group_share: 0.05,
        }
    }
}

impl FitConfig {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite nonnegative number");
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be a finite nonnegative number");
        }
        if !(self.admm_penalty > 0.0 && self.admm_penalty.is_finite()) {
            return bad("ADMM penalty must be positive");
        }
        if !(self.tol_admm > 0.0 && self.tol_group > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(0.0..1.0).contains(&self.min_group_share) {
            return bad("min_group_share must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Per-unit coefficient vectors of equal length, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitCoefs {
    dim: usize,
    data: Vec<f64>,
}

impl UnitCoefs {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(n_units: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; n_units * dim],
        }
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let dim = blocks.first().map_or(0, Vec::len);
        let data = blocks.concat();
        Self::new(dim, data)
    }

    pub fn n_units(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.block(i)
            .iter()
            .zip(self.block(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Reorders the unit blocks: block `k` of the result is block `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let data = perm
            .iter()
            .flat_map(|&i| self.block(i).iter().copied())
            .collect();
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// Position of the unordered pair `(i, j)`, `i < j`, in the lexicographic
/// enumeration `(0,1), (0,2), ..., (0,n-1), (1,2), ...`.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairWeights {
    n_units: usize,
    values: Vec<f64>,
}

impl PairWeights {
    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.values[pair_index(self.n_units, i, j)]
    }

    /// Weights in pair order.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn uniform(n_units: usize, value: f64) -> Self {
        Self {
            n_units,
            values: vec![value; n_units * n_units.saturating_sub(1) / 2],
        }
    }
}

/// Per-unit least squares `(Z_i' Z_i)^{-1} Z_i' y_i`.
pub fn preliminary_ols(design: &SieveDesign) -> Result<UnitCoefs> {
    let q = design.dim();
    let mut data = Vec::with_capacity(design.n_units() * q);
    for u in design.units() {
        let rank_error = || Error::RankDeficientUnit {
            unit: u.id.clone(),
            observations: u.n_obs(),
            columns: q,
        };
        // Demeaning removes one degree of freedom.
        if u.n_obs() < q + 1 {
            return Err(rank_error());
        }
        let coef = spd_solve(&u.gram, &u.zty).ok_or_else(rank_error)?;
        data.extend(coef.iter());
    }
    UnitCoefs::new(q, data)
}

/// `w_ij = ||pi_i - pi_j||^{-kappa}` with distances floored at
/// [`WEIGHT_DISTANCE_FLOOR`].
pub fn adaptive_weights(prelim: &UnitCoefs, kappa: f64) -> PairWeights {
    let n = prelim.n_units();
    let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = prelim.distance(i, j).max(WEIGHT_DISTANCE_FLOOR);
            values.push(d.powf(-kappa));
        }
    }
    PairWeights { n_units: n, values }
}

/// Group soft-thresholding `max(1 - tau/||psi||, 0) psi`.
pub fn soft_threshold(psi: &[f64], tau: f64) -> Vec<f64> {
    let mut out = psi.to_vec();
    soft_threshold_in_place(&mut out, tau);
    out
}

pub fn soft_threshold_in_place(psi: &mut [f64], tau: f64) {
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
    psi.iter_mut().for_each(|x| *x *= scale);
}

/// `F(pi)` as defined in the module documentation.
pub fn objective_value(
    design: &SieveDesign,
    pi: &UnitCoefs,
    lambda: f64,
    weights: &PairWeights,
) -> f64 {
    let n = design.n_units();
    let fit: f64 = design
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| u.ssr(pi.block(i)) / u.n_obs() as f64)
        .sum();
    let mut penalty = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            penalty += weights.get(i, j) * pi.distance(i, j);
        }
    }
    fit + lambda / n as f64 * penalty
}

/// The factorized pi-update system for a fixed ADMM penalty. Independent of
/// lambda, so one factorization serves a whole tuning grid.
#[derive(Clone, Debug)]
pub struct PenalizedSystem {
    n: usize,
    q: usize,
    admm_penalty: f64,
    /// `T_ref`: scaling of the augmented Lagrangian.
    scale: f64,
    /// Column-major `(w_i G_i + theta N I)^{-1}` per unit.
    d_inv: Vec<Vec<f64>>,
    /// Column-major `(theta^{-1} I - sum_i D_i^{-1})^{-1}`.
    s_inv: Vec<f64>,
    /// `w_i Z_i' y_i`, stacked.
    base_rhs: Vec<f64>,
}

impl PenalizedSystem {
    pub fn new(design: &SieveDesign, admm_penalty: f64) -> Result<Self> {
        if !(admm_penalty > 0.0 && admm_penalty.is_finite()) {
            return Err(Error::InvalidConfig("ADMM penalty must be positive".into()));
        }
        let n = design.n_units();
        let q = design.dim();
        let scale = design.mean_periods();
        let shift = admm_penalty * n as f64;
        let mut d_inv = Vec::with_capacity(n);
        let mut base_rhs = Vec::with_capacity(n * q);
        // theta^{-1} I - sum_i D_i^{-1} = (theta N)^{-1} sum_i D_i^{-1} w_i G_i,
        // accumulated in the second form to avoid cancellation.
        let mut s = DMatrix::<f64>::zeros(q, q);
        for u in design.units() {
            let w = scale / u.n_obs() as f64;
            let wg = &u.gram * w;
            let mut d = wg.clone();
            for k in 0..q {
                d[(k, k)] += shift;
            }
            let inv = spd_inverse(&d).ok_or_else(|| Error::RankDeficientUnit {
                unit: u.id.clone(),
                observations: u.n_obs(),
                columns: q,
            })?;
            s += &inv * &wg;
            base_rhs.extend((&u.zty * w).iter());
            d_inv.push(inv.as_slice().to_vec());
        }
        s /= shift;
        symmetrize(&mut s);
        let s_inv = spd_inverse(&s).ok_or_else(|| {
            Error::InvalidConfig("pooled sieve design is singular across all units".into())
        })?;
        Ok(Self {
            n,
            q,
            admm_penalty,
            scale,
            d_inv,
            s_inv: s_inv.as_slice().to_vec(),
            base_rhs,
        })
    }

    pub fn admm_penalty(&self) -> f64 {
        self.admm_penalty
    }

    /// Solves the pi-update system for a stacked right-hand side.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let q = self.q;
        let mut total = vec![0.0; q];
        for i in 0..self.n {
            let block = &mut out[i * q..(i + 1) * q];
            mat_vec(&self.d_inv[i], &rhs[i * q..(i + 1) * q], block);
            for (t, b) in total.iter_mut().zip(block.iter()) {
                *t += b;
            }
        }
        let mut w = vec![0.0; q];
        mat_vec(&self.s_inv, &total, &mut w);
        let mut corr = vec![0.0; q];
        for i in 0..self.n {
            mat_vec(&self.d_inv[i], &w, &mut corr);
            for (o, c) in out[i * q..(i + 1) * q].iter_mut().zip(&corr) {
                *o += c;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdmmState {
    pub pi: UnitCoefs,
    /// Pairwise difference variables, one block per pair in pair order.
    pub a: Vec<f64>,
    /// Scaled duals, same layout as `a`.
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

/// Convergence summary of an ADMM run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

impl AdmmState {
    pub fn diagnostics(&self) -> AdmmDiagnostics {
        AdmmDiagnostics {
            iterations: self.iterations,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            converged: self.converged,
        }
    }
}

/// Runs ADMM from `init` (normally the preliminary estimate).
pub fn admm_fit(
    design: &SieveDesign,
    init: &UnitCoefs,
    weights: &PairWeights,
    config: &FitConfig,
) -> Result<AdmmState> {
    config.validate()?;
    let system = PenalizedSystem::new(design, config.admm_penalty)?;
    admm_fit_with(&system, init, weights, config)
}

/// As [`admm_fit`], reusing a factorized system.
pub fn admm_fit_with(
    system: &PenalizedSystem,
    init: &UnitCoefs,
    weights: &PairWeights,
    config: &FitConfig,
) -> Result<AdmmState> {
    config.validate()?;
    let n = system.n;
    let q = system.q;
    if init.n_units() != n || init.dim() != q {
        return Err(Error::DimensionMismatch {
            expected: n * q,
            found: init.as_slice().len(),
        });
    }
    if weights.n_units() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.n_units(),
        });
    }
    if (config.admm_penalty - system.admm_penalty).abs() > 0.0 {
        return Err(Error::InvalidConfig(
            "factorized system was built for a different ADMM penalty".into(),
        ));
    }

    let theta = config.admm_penalty;
    let inv_theta = 1.0 / theta;
    let thresh_factor = system.scale * config.lambda / (2.0 * n as f64 * theta);
    let thresholds: Vec<f64> = weights
        .as_slice()
        .iter()
        .map(|w| w * thresh_factor)
        .collect();
    let n_pairs = thresholds.len();

    let mut pi = init.clone();
    let mut prev = init.as_slice().to_vec();
    let mut a = vec![0.0; n_pairs * q];
    let mut dual = vec![0.0; n_pairs * q];
    {
        let p = init.as_slice();
        for (a_k, (i, j)) in a.chunks_exact_mut(q).zip(pairs(n)) {
            for (c, x) in a_k.iter_mut().enumerate() {
                *x = p[i * q + c] - p[j * q + c];
            }
        }
    }
    // Delta' (theta a - v) for the next pi-update.
    let mut coupling = vec![0.0; n * q];
    fill_coupling(n, q, theta, &a, &dual, &mut coupling);

    let mut rhs = vec![0.0; n * q];
    let mut psi = vec![0.0; q];
    let mut primal_residual = 0.0;
    let mut dual_residual = 0.0;
    let mut iterations = 0;
    let mut converged = n < 2;

    while !converged && iterations < config.max_iter {
        iterations += 1;
        for (r, (b, c)) in rhs.iter_mut().zip(system.base_rhs.iter().zip(&coupling)) {
            *r = b + c;
        }
        prev.copy_from_slice(pi.as_slice());
        system.solve(&rhs, &mut pi.data);

        let p = pi.as_slice();
        coupling.iter_mut().for_each(|x| *x = 0.0);
        let mut primal_sq = 0.0;
        let mut blocks = a
            .chunks_exact_mut(q)
            .zip(dual.chunks_exact_mut(q))
            .zip(&thresholds);
        for i in 0..n {
            let pi_i = &p[i * q..(i + 1) * q];
            let (head, tail) = coupling.split_at_mut((i + 1) * q);
            let c_i = &mut head[i * q..];
            for (pi_j, c_j) in p[(i + 1) * q..]
                .chunks_exact(q)
                .zip(tail.chunks_exact_mut(q))
            {
                let ((a_k, v_k), &tau) = blocks.next().expect("one block per pair");
                let mut norm_sq = 0.0;
                for (((s, x), y), v) in psi.iter_mut().zip(pi_i).zip(pi_j).zip(v_k.iter()) {
                    *s = x - y + v * inv_theta;
                    norm_sq += *s * *s;
                }
                let norm = norm_sq.sqrt();
                let shrink = if norm > tau { 1.0 - tau / norm } else { 0.0 };
                let mut pair_sq = 0.0;
                for c in 0..q {
                    let a_new = shrink * psi[c];
                    let r = pi_i[c] - pi_j[c] - a_new;
                    pair_sq += r * r;
                    let v_new = v_k[c] + theta * r;
                    a_k[c] = a_new;
                    v_k[c] = v_new;
                    let e = theta * a_new - v_new;
                    c_i[c] += e;
                    c_j[c] -= e;
                }
                primal_sq += pair_sq;
            }
        }
        primal_residual = primal_sq.sqrt();
        dual_residual = theta * difference_norm(n, q, p, &prev);
        converged = primal_residual <= config.tol_admm;
    }

    Ok(AdmmState {
        pi,
        a,
        dual,
        iterations,
        primal_residual,
        dual_residual,
        converged,
    })
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
}

/// `Delta' (theta a - v)`.
fn fill_coupling(n: usize, q: usize, theta: f64, a: &[f64], dual: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for ((a_k, v_k), (i, j)) in a.chunks_exact(q).zip(dual.chunks_exact(q)).zip(pairs(n)) {
        for c in 0..q {
            let e = theta * a_k[c] - v_k[c];
            out[i * q + c] += e;
            out[j * q + c] -= e;
        }
    }
}

/// `||Δ (x - y)||` using `||Δ u||^2 = N ||u||^2 - ||sum_i u_i||^2`.
fn difference_norm(n: usize, q: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut total = vec![0.0; q];
    let mut sq = 0.0;
    for i in 0..n {
        for c in 0..q {
            let d = x[i * q + c] - y[i * q + c];
            total[c] += d;
            sq += d * d;
        }
    }
    let tot_sq: f64 = total.iter().map(|t| t * t).sum();
    (n as f64 * sq - tot_sq).max(0.0).sqrt()
}

/// Dense reference for `(H + theta Δ'Δ)^{-1} rhs`, used to check the
/// structured solve.
#[doc(hidden)]
pub fn dense_system_solve(
    design: &SieveDesign,
    admm_penalty: f64,
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = design.n_units();
    let q = design.dim();
    let scale = design.mean_periods();
    let mut h = DMatrix::<f64>::zeros(n * q, n * q);
    for (i, u) in design.units().iter().enumerate() {
        let w = scale / u.n_obs() as f64;
        for r in 0..q {
            for c in 0..q {
                h[(i * q + r, i * q + c)] = w * u.gram[(r, c)];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { (n - 1) as f64 } else { -1.0 } * admm_penalty;
            for c in 0..q {
                h[(i * q + c, j * q + c)] += v;
            }
        }
    }
    spd_solve(&h, &DVector::from_column_slice(rhs)).map(|x| x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_design, Panel, UnitSeries};
    use crate::spline::SplineConfig;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_design(n: usize, t: usize, p: usize, seed: u64) -> SieveDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..n)
            .map(|i| UnitSeries {
                id: i.to_string(),
                times: (1..=t).collect(),
                y: (0..t).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                x: DMatrix::from_fn(t, p, |_, _| rng.random::<f64>() + 0.5),
            })
            .collect();
        let panel = Panel::new(units, None).unwrap();
        build_design(&panel, SplineConfig::new(2, 1).unwrap()).unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&[3.0, 4.0], 5.0), vec![0.0, 0.0]);
        assert_eq!(soft_threshold(&[3.0, 4.0], 0.0), vec![3.0, 4.0]);
        assert_eq!(soft_threshold(&[3.0, 4.0], 2.5), vec![1.5, 2.0]);
        assert_eq!(soft_threshold(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn weight_examples() {
        let c = UnitCoefs::from_blocks(&[vec![0.0, 0.0], vec![0.3, 0.4], vec![0.3, 0.4]]).unwrap();
        let w = adaptive_weights(&c, 2.0);
        assert_abs_diff_eq!(w.get(0, 1), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.get(1, 0), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.get(1, 2), 1e24, epsilon = 1e12);
        let w0 = adaptive_weights(&c, 0.0);
        assert!(w0.as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn pair_index_enumerates_in_order() {
        let n = 6;
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(pair_index(n, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn structured_solve_matches_dense() {
        let design = random_design(5, 12, 2, 3);
        let system = PenalizedSystem::new(&design, 0.7).unwrap();
        let rhs: Vec<f64> = (0..design.n_units() * design.dim())
            .map(|k| (k as f64 * 0.37).sin())
            .collect();
        let mut fast = vec![0.0; rhs.len()];
        system.solve(&rhs, &mut fast);
        let dense = dense_system_solve(&design, 0.7, &rhs).unwrap();
        for (a, b) in fast.iter().zip(&dense) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn lambda_zero_returns_ols() {
        let design = random_design(4, 15, 1, 9);
        let prelim = preliminary_ols(&design).unwrap();
        let w = adaptive_weights(&prelim, 2.0);
        let state = admm_fit(&design, &prelim, &w, &FitConfig::default()).unwrap();
        assert!(state.converged);
        for (a, b) in state.pi.as_slice().iter().zip(prelim.as_slice()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_deficient_unit_named() {
        let design = random_design(2, 3, 2, 1);
        match preliminary_ols(&design) {
            Err(Error::RankDeficientUnit { unit, .. }) => assert_eq!(unit, "0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn objective_trivial_cases() {
        let design = random_design(3, 10, 1, 5);
        let prelim = preliminary_ols(&design).unwrap();
        let w = adaptive_weights(&prelim, 2.0);
        let fit_only: f64 = design
            .units()
            .iter()
            .enumerate()
            .map(|(i, u)| u.ssr(prelim.block(i)) / 10.0)
            .sum();
        assert_abs_diff_eq!(
            objective_value(&design, &prelim, 0.0, &w),
            fit_only,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = FitConfig::default();
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let mut c = FitConfig::default();
        c.min_group_share = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let design = random_design(4, 12, 1, 2);
        let prelim = preliminary_ols(&design).unwrap();
        let w = adaptive_weights(&prelim, 2.0);
        let cfg = FitConfig {
            lambda: 0.5,
            max_iter: 2,
            ..FitConfig::default()
        };
        let state = admm_fit(&design, &prelim, &w, &cfg).unwrap();
        assert_eq!(state.iterations, 2);
        assert!(!state.converged);
        assert!(state.primal_residual > cfg.tol_admm);
    }
}
