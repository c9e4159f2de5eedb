//! Clamped uniform B-spline bases on the unit interval.
//!
//! A basis of degree `d` with `M*` equidistant interior knots has
//! `M = M* + d + 1` functions. The knot sequence repeats `0` and `1` exactly
//! `d + 1` times, so any curve built from the basis interpolates its first and
//! last control points at `v = 0` and `v = 1`.
//!
//! Values are computed with the two-term de Boor recurrence restricted to the
//! `d + 1` functions that are nonzero on the knot span containing `v`. The last
//! span is closed on the right so that `b(1)` is the last unit vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub degree: usize,
    pub interior_knots: usize,
}

impl SplineConfig {
    pub fn new(degree: usize, interior_knots: usize) -> Result<Self> {
        let config = Self {
            degree,
            interior_knots,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::InvalidConfig(
                "spline degree must be at least 1".into(),
            ));
        }
        if self.interior_knots < 1 {
            return Err(Error::InvalidConfig(
                "at least one interior knot is required".into(),
            ));
        }
        Ok(())
    }

    /// Number of basis functions, `M* + d + 1`.
    pub fn basis_size(&self) -> usize {
        self.interior_knots + self.degree + 1
    }
}

/// Nondecreasing clamped knot sequence of length `M + d + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis_size(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Index `mu` of the span `[t_mu, t_{mu+1})` containing `v`, with the
    /// final nonempty span treated as closed.
    fn span(&self, v: f64) -> usize {
        let last = self.basis_size() - 1;
        if v >= self.knots[last + 1] {
            return last;
        }
        // Spans d..=last are the nonempty ones for clamped knots.
        let mut lo = self.degree;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if v < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }
}

pub fn build_knots(config: SplineConfig) -> Result<KnotVector> {
    config.validate()?;
    let d = config.degree;
    let interior = config.interior_knots;
    let step = (interior + 1) as f64;
    let mut knots = Vec::with_capacity(config.basis_size() + d + 1);
    knots.extend(std::iter::repeat_n(0.0, d + 1));
    knots.extend((1..=interior).map(|m| m as f64 / step));
    knots.extend(std::iter::repeat_n(1.0, d + 1));
    Ok(KnotVector { knots, degree: d })
}

/// Values of all `M` basis functions at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisVector {
    values: Vec<f64>,
}

impl BasisVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

pub fn eval_basis(knots: &KnotVector, v: f64) -> Result<BasisVector> {
    let mut values = vec![0.0; knots.basis_size()];
    eval_basis_into(knots, v, &mut values)?;
    Ok(BasisVector { values })
}

/// Writes `b(v)` into `out`, which must have length `M`.
pub fn eval_basis_into(knots: &KnotVector, v: f64, out: &mut [f64]) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain { value: v });
    }
    let m = knots.basis_size();
    if out.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: out.len(),
        });
    }
    let d = knots.degree;
    let t = &knots.knots;
    let mu = knots.span(v);

    // local[r] holds b_{mu-j+r, j}(v) after step j.
    let mut local = vec![0.0; d + 1];
    let mut left = vec![0.0; d + 1];
    let mut right = vec![0.0; d + 1];
    local[0] = 1.0;
    for j in 1..=d {
        left[j] = v - t[mu + 1 - j];
        right[j] = t[mu + j] - v;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            // Coincident knots: the recurrence coefficient is defined as 0.
            let temp = if denom > 0.0 { local[r] / denom } else { 0.0 };
            local[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        local[j] = saved;
    }

    out.iter_mut().for_each(|x| *x = 0.0);
    out[mu - d..=mu].copy_from_slice(&local);
    Ok(())
}

/// `Pi' b(v)`: the `p` coefficient functions at the point where `basis` was
/// evaluated. `control_points` is `M x p`.
pub fn eval_curve(control_points: &DMatrix<f64>, basis: &BasisVector) -> Result<DVector<f64>> {
    if control_points.nrows() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: control_points.nrows(),
        });
    }
    let b = DVector::from_column_slice(&basis.values);
    Ok(control_points.tr_mul(&b))
}

/// A spline configuration together with its knot sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis {
    config: SplineConfig,
    knots: KnotVector,
}

impl SplineBasis {
    pub fn new(config: SplineConfig) -> Result<Self> {
        let knots = build_knots(config)?;
        Ok(Self { config, knots })
    }

    pub fn config(&self) -> SplineConfig {
        self.config
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn size(&self) -> usize {
        self.config.basis_size()
    }

    pub fn eval(&self, v: f64) -> Result<BasisVector> {
        eval_basis(&self.knots, v)
    }

    /// Basis values on `grid`, one row per point.
    pub fn eval_grid(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.size();
        let mut out = DMatrix::zeros(grid.len(), m);
        let mut row = vec![0.0; m];
        for (r, &v) in grid.iter().enumerate() {
            eval_basis_into(&self.knots, v, &mut row)?;
            for (c, &x) in row.iter().enumerate() {
                out[(r, c)] = x;
            }
        }
        Ok(out)
    }
}

/// Evenly spaced points `0, 1/(n-1), ..., 1`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}
