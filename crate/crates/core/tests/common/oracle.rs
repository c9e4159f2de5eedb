//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Textbook Cox–de Boor recursion on an explicit knot vector, evaluated
/// directly from the recursive definition (no span search, no shared code
/// with the library). Right endpoint handled by the usual convention that
/// the last non-degenerate interval is closed.
pub fn cox_de_boor(knots: &[f64], degree: usize, v: f64) -> Vec<f64> {
    let n_basis = knots.len() - degree - 1;
    let last = *knots.last().unwrap();
    fn rec(knots: &[f64], i: usize, k: usize, v: f64, last: f64) -> f64 {
        if k == 0 {
            let (a, b) = (knots[i], knots[i + 1]);
            if a < b && ((a <= v && v < b) || (v == last && b == last)) {
                1.0
            } else {
                0.0
            }
        } else {
            let mut out = 0.0;
            let d1 = knots[i + k] - knots[i];
            if d1 > 0.0 {
                out += (v - knots[i]) / d1 * rec(knots, i, k - 1, v, last);
            }
            let d2 = knots[i + k + 1] - knots[i + 1];
            if d2 > 0.0 {
                out += (knots[i + k + 1] - v) / d2 * rec(knots, i + 1, k - 1, v, last);
            }
            out
        }
    }
    (0..n_basis)
        .map(|i| rec(knots, i, degree, v, last))
        .collect()
}

/// Clamped uniform knots written out by hand.
pub fn clamped_knots(degree: usize, interior: usize) -> Vec<f64> {
    let mut k = vec![0.0; degree + 1];
    for j in 1..=interior {
        k.push(j as f64 / (interior + 1) as f64);
    }
    k.extend(std::iter::repeat_n(1.0, degree + 1));
    k
}

/// One unit's demeaned data for the fused objective.
pub struct OracleUnit {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// `sum_i ||y_i - Z_i pi_i||^2 / T_i + (lambda / N) sum_{i<j} w_ij ||pi_i - pi_j||`.
pub fn fused_objective(
    units: &[OracleUnit],
    pi: &[DVector<f64>],
    lambda: f64,
    w: &DMatrix<f64>,
) -> f64 {
    let n = units.len();
    let mut f = 0.0;
    for (u, p) in units.iter().zip(pi) {
        f += (&u.y - &u.z * p).norm_squared() / u.y.len() as f64;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            f += lambda / n as f64 * w[(i, j)] * (&pi[i] - &pi[j]).norm();
        }
    }
    f
}

pub struct OracleSolution {
    pub pi: Vec<DVector<f64>>,
    pub primal: f64,
    pub dual: f64,
    pub iterations: usize,
}

/// Minimizes the fused objective through its dual,
/// `max_{||u_ij|| <= c_ij} min_pi f(pi) + sum u_ij'(pi_i - pi_j)`, by FISTA
/// with projection onto the norm balls. Stops when the duality gap falls
/// below `gap_tol`; `dual` is then a certified lower bound on the optimum.
pub fn solve_fused_dual(
    units: &[OracleUnit],
    lambda: f64,
    w: &DMatrix<f64>,
    gap_tol: f64,
    max_iter: usize,
) -> OracleSolution {
    let n = units.len();
    let q = units[0].z.ncols();
    // f_i(p) = p' H_i p - 2 c_i' p + k_i.
    let h: Vec<DMatrix<f64>> = units
        .iter()
        .map(|u| u.z.tr_mul(&u.z) / u.y.len() as f64)
        .collect();
    let h_inv: Vec<DMatrix<f64>> = h
        .iter()
        .map(|hi| {
            hi.clone()
                .try_inverse()
                .expect("unit Gram matrix must be invertible")
        })
        .collect();
    let c: Vec<DVector<f64>> = units
        .iter()
        .map(|u| u.z.tr_mul(&u.y) / u.y.len() as f64)
        .collect();
    let k: f64 = units
        .iter()
        .map(|u| u.y.norm_squared() / u.y.len() as f64)
        .sum();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let radius: Vec<f64> = pairs
        .iter()
        .map(|&(i, j)| lambda / n as f64 * w[(i, j)])
        .collect();

    let primal_of = |u: &[DVector<f64>]| -> Vec<DVector<f64>> {
        let mut g: Vec<DVector<f64>> = c.clone();
        for (&(i, j), uk) in pairs.iter().zip(u) {
            g[i] -= uk * 0.5;
            g[j] += uk * 0.5;
        }
        g.iter().zip(&h_inv).map(|(gi, hi)| hi * gi).collect()
    };
    let f_of = |p: &[DVector<f64>]| -> f64 {
        p.iter()
            .zip(&h)
            .zip(&c)
            .map(|((pi, hi), ci)| (pi.transpose() * hi * pi)[0] - 2.0 * ci.dot(pi))
            .sum::<f64>()
            + k
    };
    // Lipschitz constant of the dual gradient: ||Δ H^{-1} Δ'|| / 2.
    let max_hinv = h_inv
        .iter()
        .map(|h| h.clone().symmetric_eigenvalues().max())
        .fold(0.0, f64::max);
    let lip = n as f64 * max_hinv / 2.0;
    let step = 1.0 / lip;

    let project = |u: &mut DVector<f64>, r: f64| {
        let norm = u.norm();
        if norm > r {
            *u *= r / norm;
        }
    };

    let mut u: Vec<DVector<f64>> = vec![DVector::zeros(q); pairs.len()];
    let mut y = u.clone();
    let mut t: f64 = 1.0;
    let mut best = OracleSolution {
        pi: primal_of(&u),
        primal: f64::INFINITY,
        dual: f64::NEG_INFINITY,
        iterations: 0,
    };
    for it in 1..=max_iter {
        let p = primal_of(&y);
        let mut next: Vec<DVector<f64>> = pairs
            .iter()
            .zip(&y)
            .map(|(&(i, j), yk)| yk + (&p[i] - &p[j]) * step)
            .collect();
        for (nk, &r) in next.iter_mut().zip(&radius) {
            project(nk, r);
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = next
            .iter()
            .zip(&u)
            .map(|(a, b)| a + (a - b) * ((t - 1.0) / t_next))
            .collect();
        u = next;
        t = t_next;

        if it % 50 == 0 || it == max_iter {
            let p = primal_of(&u);
            let f = f_of(&p);
            let mut pen = 0.0;
            let mut lin = 0.0;
            for ((&(i, j), uk), &r) in pairs.iter().zip(&u).zip(&radius) {
                let d = &p[i] - &p[j];
                pen += r * d.norm();
                lin += uk.dot(&d);
            }
            let primal = f + pen;
            let dual = f + lin;
            if dual > best.dual {
                best.dual = dual;
            }
            if primal < best.primal {
                best.primal = primal;
                best.pi = p;
            }
            best.iterations = it;
            if best.primal - best.dual <= gap_tol * (1.0 + best.primal.abs()) {
                break;
            }
        }
    }
    best
}
