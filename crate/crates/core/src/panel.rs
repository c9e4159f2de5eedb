//! Panel observations and the within-transformed sieve design.
//!
//! Regressor rows are expanded as `z_it = x_it ⊗ b(t/T)`: the block for
//! regressor 1 (all `M` basis functions) comes first, then regressor 2, so the
//! coefficient vector is `vec(Pi)` of the `M x p` control-point matrix.
//! The time argument always uses the global calendar, `v = t / T`, even for
//! units observed over a shorter span.
//!
//! Demeaning acts on `z_it` itself rather than on `x_it`, since `b(t/T)`
//! varies over time. A regressor that is constant over time within every unit
//! (an intercept) has demeaned columns summing to zero, because the basis is a
//! partition of unity; its level is absorbed by the fixed effects. Such
//! regressors are estimated in sum-to-zero contrasts and their curves are
//! reported with zero mean over the sample clock `t / T`, `t = 1..T`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spline::{eval_basis_into, SplineBasis, SplineConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct UnitSeries {
    pub id: String,
    /// Observed calendar periods, strictly increasing, 1-based.
    pub times: Vec<usize>,
    pub y: Vec<f64>,
    /// `T_i x p`, one row per observed period.
    pub x: DMatrix<f64>,
}

impl UnitSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    units: Vec<UnitSeries>,
    global_t: usize,
    n_regressors: usize,
}

impl Panel {
    /// Validates and sorts each unit by time. `global_t` of `None` takes the
    /// largest observed period.
    pub fn new(mut units: Vec<UnitSeries>, global_t: Option<usize>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::InvalidConfig("panel has no units".into()));
        }
        let p = units[0].x.ncols();
        let mut max_t = 0;
        for unit in &mut units {
            if unit.times.is_empty() {
                return Err(Error::EmptyUnit(unit.id.clone()));
            }
            if unit.y.len() != unit.times.len() {
                return Err(Error::DimensionMismatch {
                    expected: unit.times.len(),
                    found: unit.y.len(),
                });
            }
            if unit.x.nrows() != unit.times.len() {
                return Err(Error::DimensionMismatch {
                    expected: unit.times.len(),
                    found: unit.x.nrows(),
                });
            }
            if unit.x.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: unit.x.ncols(),
                });
            }
            sort_unit(unit)?;
            if unit.times[0] == 0 {
                return Err(Error::InvalidConfig(format!(
                    "unit {}: time indices start at 1",
                    unit.id
                )));
            }
            max_t = max_t.max(*unit.times.last().unwrap());
        }
        let global_t = global_t.unwrap_or(max_t);
        if max_t > global_t {
            return Err(Error::InvalidConfig(format!(
                "observed period {max_t} exceeds the panel length {global_t}"
            )));
        }
        Ok(Self {
            units,
            global_t,
            n_regressors: p,
        })
    }

    pub fn units(&self) -> &[UnitSeries] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn global_t(&self) -> usize {
        self.global_t
    }

    pub fn n_regressors(&self) -> usize {
        self.n_regressors
    }

    pub fn total_observations(&self) -> usize {
        self.units.iter().map(UnitSeries::len).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.units.iter().all(|u| u.len() == self.global_t)
    }

    /// Replaces every regressor matrix by a single column of ones.
    pub fn into_intercept_only(mut self) -> Self {
        for unit in &mut self.units {
            unit.x = DMatrix::from_element(unit.len(), 1, 1.0);
        }
        self.n_regressors = 1;
        self
    }

    /// Writes the long-format CSV layout read by [`load_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["unit_id".to_string(), "time_index".into(), "y".into()];
        header.extend((1..=self.n_regressors).map(|l| format!("x{l}")));
        w.write_record(&header).map_err(csv_io)?;
        for unit in &self.units {
            for (r, &t) in unit.times.iter().enumerate() {
                let mut row = vec![unit.id.clone(), t.to_string(), fmt_f64(unit.y[r])];
                row.extend((0..self.n_regressors).map(|l| fmt_f64(unit.x[(r, l)])));
                w.write_record(&row).map_err(csv_io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    // Shortest representation that round-trips exactly.
    format!("{x:?}")
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn sort_unit(unit: &mut UnitSeries) -> Result<()> {
    let mut order: Vec<usize> = (0..unit.times.len()).collect();
    order.sort_by_key(|&r| unit.times[r]);
    for w in order.windows(2) {
        if unit.times[w[0]] == unit.times[w[1]] {
            return Err(Error::DuplicateObservation {
                unit: unit.id.clone(),
                time: unit.times[w[0]],
            });
        }
    }
    if order.iter().enumerate().all(|(i, &r)| i == r) {
        return Ok(());
    }
    let times = order.iter().map(|&r| unit.times[r]).collect();
    let y = order.iter().map(|&r| unit.y[r]).collect();
    let x = DMatrix::from_fn(unit.x.nrows(), unit.x.ncols(), |r, c| unit.x[(order[r], c)]);
    unit.times = times;
    unit.y = y;
    unit.x = x;
    Ok(())
}

/// Reads a long-format panel: header `unit_id,time_index,y,x1,...,xp`.
/// Units appear in order of first occurrence; periods absent from the file are
/// treated as missing.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Panel> {
    let file = std::fs::File::open(path)?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "unit_id" || names[1] != "time_index" || names[2] != "y" {
        return Err(Error::Parse {
            line: 1,
            message: "header must start with unit_id,time_index,y".into(),
        });
    }
    let p = names.len() - 3;

    struct Acc {
        times: Vec<usize>,
        y: Vec<f64>,
        x: Vec<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, Acc> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        let id = record[0].to_string();
        let time: usize = record[1].parse().map_err(|_| {
            bad(format!(
                "time_index {:?} is not a positive integer",
                &record[1]
            ))
        })?;
        if time == 0 {
            return Err(bad("time_index must be positive".into()));
        }
        let parse_real = |s: &str| -> Result<f64> {
            let v: f64 = s
                .parse()
                .map_err(|_| bad(format!("{s:?} is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("{s:?} is not finite")))
            }
        };
        let y = parse_real(&record[2])?;
        let entry = acc.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Acc {
                times: Vec::new(),
                y: Vec::new(),
                x: Vec::new(),
            }
        });
        if entry.times.contains(&time) {
            return Err(Error::DuplicateObservation { unit: id, time });
        }
        entry.times.push(time);
        entry.y.push(y);
        for l in 0..p {
            entry.x.push(parse_real(&record[3 + l])?);
        }
    }

    let units = order
        .into_iter()
        .map(|id| {
            let a = acc.remove(&id).unwrap();
            let n = a.times.len();
            UnitSeries {
                id,
                times: a.times,
                y: a.y,
                x: DMatrix::from_row_slice(n, p, &a.x),
            }
        })
        .collect();
    Panel::new(units, None)
}

/// Within-transformed sieve regressors and responses for one unit.
#[derive(Clone, Debug)]
pub struct UnitDesign {
    pub id: String,
    pub times: Vec<usize>,
    /// `T_i x q` demeaned regressors in reduced coordinates.
    pub z: DMatrix<f64>,
    /// Demeaned responses.
    pub y: DVector<f64>,
    /// `Z' Z`.
    pub gram: DMatrix<f64>,
    /// `Z' y`.
    pub zty: DVector<f64>,
}

impl UnitDesign {
    pub fn n_obs(&self) -> usize {
        self.times.len()
    }

    pub fn ssr(&self, coef: &[f64]) -> f64 {
        let c = DVector::from_column_slice(coef);
        (&self.y - &self.z * c).norm_squared()
    }
}

#[derive(Clone, Debug)]
pub struct SieveDesign {
    basis: SplineBasis,
    n_regressors: usize,
    global_t: usize,
    /// `M p x q` map from reduced coefficients to `vec(Pi)`.
    reduction: DMatrix<f64>,
    time_invariant: Vec<bool>,
    clock_mean: DVector<f64>,
    units: Vec<UnitDesign>,
}

impl SieveDesign {
    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn units(&self) -> &[UnitDesign] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.n_regressors
    }

    pub fn global_t(&self) -> usize {
        self.global_t
    }

    pub fn basis_size(&self) -> usize {
        self.basis.size()
    }

    /// `M * p`, the length of `vec(Pi)`.
    pub fn full_dim(&self) -> usize {
        self.basis.size() * self.n_regressors
    }

    /// Number of estimated coefficients per unit.
    pub fn dim(&self) -> usize {
        self.reduction.ncols()
    }

    /// Block-diagonal map from reduced coefficients to `vec(Pi)`. The block
    /// of a time-varying regressor is the identity; a time-invariant one,
    /// whose level is absorbed by the fixed effects, gets `M - 1` orthonormal
    /// sum-to-zero contrasts.
    pub fn reduction(&self) -> &DMatrix<f64> {
        &self.reduction
    }

    /// Regressors detected as constant over time within every unit.
    pub fn time_invariant_regressors(&self) -> &[bool] {
        &self.time_invariant
    }

    pub fn total_observations(&self) -> usize {
        self.units.iter().map(UnitDesign::n_obs).sum()
    }

    /// Average number of observed periods per unit; equals `T` when balanced.
    pub fn mean_periods(&self) -> f64 {
        self.total_observations() as f64 / self.n_units() as f64
    }

    /// Basis averaged over the sample clock, `T^{-1} sum_t b(t / T)`.
    pub fn clock_mean_basis(&self) -> &DVector<f64> {
        &self.clock_mean
    }

    /// Control-point matrix (`M x p`) for a reduced coefficient vector.
    /// Curves of time-invariant regressors are only identified up to a
    /// constant and are reported with zero mean over the sample clock.
    pub fn control_points(&self, coef: &[f64]) -> DMatrix<f64> {
        let m = self.basis.size();
        let full = &self.reduction * DVector::from_column_slice(coef);
        let mut out = DMatrix::from_column_slice(m, self.n_regressors, full.as_slice());
        for (l, &fixed) in self.time_invariant.iter().enumerate() {
            if fixed {
                let level = out.column(l).dot(&self.clock_mean);
                out.column_mut(l).add_scalar_mut(-level);
            }
        }
        out
    }

    /// `p x q` matrix `L(v)` with `L(v) coef` the reported coefficient curves
    /// at `v`, consistent with [`Self::control_points`].
    pub fn curve_loading(&self, v: f64) -> Result<DMatrix<f64>> {
        let m = self.basis.size();
        let b = self.basis.eval(v)?;
        let mut rows = DMatrix::zeros(self.n_regressors, m * self.n_regressors);
        for l in 0..self.n_regressors {
            for k in 0..m {
                let mut w = b.values()[k];
                if self.time_invariant[l] {
                    w -= self.clock_mean[k];
                }
                rows[(l, l * m + k)] = w;
            }
        }
        Ok(rows * &self.reduction)
    }
}

/// `M x (M - 1)` orthonormal columns orthogonal to the ones vector
/// (normalized Helmert contrasts).
pub(crate) fn sum_zero_contrasts(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m - 1, |r, c| {
        let k = (c + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        match r.cmp(&(c + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -k / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// Builds `z_it = x_it ⊗ b(t/T)` for every observed period and applies the
/// per-unit within-transformation over observed periods only.
pub fn build_design(panel: &Panel, config: SplineConfig) -> Result<SieveDesign> {
    let basis = SplineBasis::new(config)?;
    let m = basis.size();
    let p = panel.n_regressors();
    if p == 0 {
        return Err(Error::InvalidConfig("panel has no regressors".into()));
    }
    let global_t = panel.global_t() as f64;

    let time_invariant: Vec<bool> = (0..p)
        .map(|l| {
            panel.units().iter().all(|u| {
                let first = u.x[(0, l)];
                (0..u.len()).all(|r| (u.x[(r, l)] - first).abs() <= 1e-12 * (1.0 + first.abs()))
            })
        })
        .collect();
    let q: usize = time_invariant
        .iter()
        .map(|&f| if f { m - 1 } else { m })
        .sum();
    let mut reduction = DMatrix::zeros(m * p, q);
    let mut offset = 0;
    for (l, &fixed) in time_invariant.iter().enumerate() {
        let block = if fixed {
            sum_zero_contrasts(m)
        } else {
            DMatrix::identity(m, m)
        };
        reduction
            .view_mut((l * m, offset), (m, block.ncols()))
            .copy_from(&block);
        offset += block.ncols();
    }

    let mut b = vec![0.0; m];
    let mut clock_mean = DVector::zeros(m);
    for t in 1..=panel.global_t() {
        eval_basis_into(basis.knots(), t as f64 / global_t, &mut b)?;
        clock_mean += DVector::from_column_slice(&b);
    }
    clock_mean /= global_t;

    let units = panel
        .units()
        .iter()
        .map(|u| {
            let n = u.len();
            let mut raw = DMatrix::zeros(n, m * p);
            for (r, &t) in u.times.iter().enumerate() {
                eval_basis_into(basis.knots(), t as f64 / global_t, &mut b)?;
                for l in 0..p {
                    let x = u.x[(r, l)];
                    for k in 0..m {
                        raw[(r, l * m + k)] = x * b[k];
                    }
                }
            }
            let mut z = raw * &reduction;
            let mut y = DVector::from_column_slice(&u.y);
            demean_columns(&mut z);
            let y_mean = y.mean();
            y.add_scalar_mut(-y_mean);
            let gram = z.tr_mul(&z);
            let zty = z.tr_mul(&y);
            Ok(UnitDesign {
                id: u.id.clone(),
                times: u.times.clone(),
                z,
                y,
                gram,
                zty,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SieveDesign {
        basis,
        n_regressors: p,
        global_t: panel.global_t(),
        reduction,
        time_invariant,
        clock_mean,
        units,
    })
}

pub(crate) fn demean_columns(z: &mut DMatrix<f64>) {
    let n = z.nrows() as f64;
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}
