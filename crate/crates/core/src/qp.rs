//! Bound-constrained quadratic programs on finite probability spaces.
//!
//! Problem form, with weights `p_i > 0`:
//!
//! ```text
//! minimise   Σ_i p_i (½ y_i² + q_i y_i)
//! subject to Σ_i p_i a_{k,i} y_i = b_k   (k = 0..m)
//!            y_i ≥ l_i
//! ```
//!
//! Stationarity gives `y_i = ⟨ν, a_i⟩ − q_i + β_i` with `β_i ≥ 0`,
//! `β_i (y_i − l_i) = 0`. The solver is a primal active-set method on the
//! bounds started from a feasible point; a phase-one simplex supplies that
//! point when none is given and certifies infeasibility otherwise.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone)]
pub struct BoundedQp<'a> {
    pub p: &'a [f64],
    pub q: Vec<f64>,
    pub lower: Vec<f64>,
    /// `rows[k][i] = a_{k,i}`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub y: Vec<f64>,
    /// Equality multipliers ν.
    pub nu: Vec<f64>,
    /// Bound multipliers β (zero off the active set).
    pub beta: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum QpOutcome {
    Optimal(QpSolution),
    /// Phase one could not drive the artificial variables to zero.
    Infeasible {
        phase_one_objective: f64,
    },
}

impl<'a> BoundedQp<'a> {
    fn validate(&self) -> Result<()> {
        let n = self.p.len();
        if self.q.len() != n || self.lower.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.q.len().min(self.lower.len()),
            });
        }
        if self.rows.len() != self.rhs.len() || self.rows.is_empty() {
            return invalid("QP needs at least one equality row and one rhs per row");
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: r.len(),
            });
        }
        Ok(())
    }

    pub fn objective(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(self.p)
            .zip(&self.q)
            .map(|((y, p), q)| p * (0.5 * y * y + q * y))
            .sum()
    }

    /// Largest violation among the equality rows.
    pub fn equality_violation(&self, y: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| {
                let lhs: f64 = a
                    .iter()
                    .zip(y)
                    .zip(self.p)
                    .map(|((a, y), p)| p * a * y)
                    .sum();
                (lhs - b).abs()
            })
            .fold(0.0, f64::max)
    }

    fn scale(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        1.0f64.max(m(&self.q)).max(m(&self.lower)).max(m(&self.rhs))
    }

    /// Solves the QP. A supplied `start` must be feasible; without one the
    /// phase-one simplex constructs a vertex of the feasible set.
    pub fn solve(&self, start: Option<&[f64]>) -> Result<QpOutcome> {
        self.validate()?;
        let scale = self.scale();
        let y0 = match start {
            Some(s) => {
                if s.len() != self.p.len() {
                    return Err(Error::Dimension {
                        expected: self.p.len(),
                        got: s.len(),
                    });
                }
                let below = s.iter().zip(&self.lower).any(|(y, l)| y < l);
                if below || self.equality_violation(s) > 1e-10 * scale {
                    return invalid("QP start point is not feasible");
                }
                s.to_vec()
            }
            None => match self.phase_one()? {
                Ok(y) => y,
                Err(obj) => {
                    return Ok(QpOutcome::Infeasible {
                        phase_one_objective: obj,
                    })
                }
            },
        };
        self.active_set(y0, scale).map(QpOutcome::Optimal)
    }

    fn active_set(&self, mut y: Vec<f64>, scale: f64) -> Result<QpSolution> {
        let n = self.p.len();
        let m = self.rows.len();
        let mut free: Vec<bool> = y.iter().zip(&self.lower).map(|(y, l)| y > l).collect();
        self.ensure_rank(&mut free)?;
        let tol_d = 1e-14 * scale;
        let tol_beta = 1e-13 * scale;
        let max_iter = 10 * n + 100;
        let a_dot = |nu: &[f64], i: usize| -> f64 { (0..m).map(|k| nu[k] * self.rows[k][i]).sum() };
        for it in 0..max_iter {
            let nu = self.solve_eqp(&free)?;
            let mut max_d = 0.0f64;
            let mut d = vec![0.0; n];
            for i in 0..n {
                if free[i] {
                    d[i] = a_dot(&nu, i) - self.q[i] - y[i];
                    max_d = max_d.max(d[i].abs());
                }
            }
            if max_d <= tol_d {
                let mut worst: Option<(usize, f64)> = None;
                for i in (0..n).filter(|&i| !free[i]) {
                    let b = self.lower[i] + self.q[i] - a_dot(&nu, i);
                    if b < -tol_beta && worst.is_none_or(|(_, w)| b < w) {
                        worst = Some((i, b));
                    }
                }
                match worst {
                    Some((j, _)) => {
                        free[j] = true;
                        continue;
                    }
                    None => {
                        let mut beta = vec![0.0; n];
                        for i in 0..n {
                            if free[i] {
                                y[i] = (a_dot(&nu, i) - self.q[i]).max(self.lower[i]);
                            } else {
                                y[i] = self.lower[i];
                                beta[i] = (self.lower[i] + self.q[i] - a_dot(&nu, i)).max(0.0);
                            }
                        }
                        return Ok(QpSolution {
                            y,
                            nu,
                            beta,
                            iterations: it + 1,
                        });
                    }
                }
            }
            let mut alpha = 1.0;
            let mut block = None;
            for i in 0..n {
                if free[i] && d[i] < 0.0 {
                    let ratio = ((self.lower[i] - y[i]) / d[i]).max(0.0);
                    if ratio < alpha {
                        alpha = ratio;
                        block = Some(i);
                    }
                }
            }
            for i in 0..n {
                if free[i] {
                    y[i] += alpha * d[i];
                }
            }
            if let Some(i) = block {
                y[i] = self.lower[i];
                free[i] = false;
            }
        }
        Err(Error::NonConvergence(format!(
            "active-set QP did not terminate within {max_iter} iterations"
        )))
    }

    /// Multipliers of the equality-constrained subproblem with the
    /// non-free coordinates fixed at their bounds.
    fn solve_eqp(&self, free: &[bool]) -> Result<Vec<f64>> {
        let m = self.rows.len();
        let mut mat = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::from_vec(self.rhs.clone());
        for (i, &is_free) in free.iter().enumerate() {
            let p = self.p[i];
            if is_free {
                for k in 0..m {
                    let aki = self.rows[k][i];
                    rhs[k] += p * aki * self.q[i];
                    for j in 0..m {
                        mat[(k, j)] += p * aki * self.rows[j][i];
                    }
                }
            } else {
                for k in 0..m {
                    rhs[k] -= p * self.rows[k][i] * self.lower[i];
                }
            }
        }
        mat.lu()
            .solve(&rhs)
            .filter(|x| x.iter().all(|v| v.is_finite()))
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| {
                Error::NonConvergence("active-set QP: working set lost linear independence".into())
            })
    }

    /// Frees bound coordinates until the free columns span every equality row.
    fn ensure_rank(&self, free: &mut [bool]) -> Result<()> {
        let m = self.rows.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let add = |i: usize, basis: &mut Vec<Vec<f64>>| -> bool {
            let s = self.p[i].sqrt();
            let mut u: Vec<f64> = (0..m).map(|k| s * self.rows[k][i]).collect();
            let norm0 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            for b in basis.iter() {
                let dot: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
                u.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 * norm0.max(1e-300) {
                basis.push(u.into_iter().map(|x| x / norm).collect());
                true
            } else {
                false
            }
        };
        for i in 0..free.len() {
            if free[i] && basis.len() < m {
                add(i, &mut basis);
            }
        }
        for i in 0..free.len() {
            if basis.len() == m {
                break;
            }
            if !free[i] && add(i, &mut basis) {
                free[i] = true;
            }
        }
        if basis.len() < m {
            return invalid("QP equality rows are linearly dependent");
        }
        Ok(())
    }

    /// Phase-one simplex with Bland's rule on `y = l + s, s ≥ 0`.
    /// Returns a feasible `y`, or the positive phase-one objective.
    pub fn phase_one(&self) -> Result<std::result::Result<Vec<f64>, f64>> {
        self.validate()?;
        let n = self.p.len();
        let m = self.rows.len();
        let width = n + m;
        let mut t = vec![vec![0.0; width + 1]; m];
        let mut amax = 0.0f64;
        for k in 0..m {
            let mut b = self.rhs[k];
            for i in 0..n {
                let a = self.p[i] * self.rows[k][i];
                t[k][i] = a;
                b -= a * self.lower[i];
                amax = amax.max(a.abs());
            }
            t[k][n + k] = 1.0;
            t[k][width] = b;
            if b < 0.0 {
                for v in t[k].iter_mut() {
                    *v = -*v;
                }
                t[k][n + k] = 1.0;
            }
        }
        let eps = 1e-13 * amax.max(1e-300);
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut cost = vec![0.0; width + 1];
        for row in &t {
            for j in 0..n {
                cost[j] -= row[j];
            }
            cost[width] -= row[width];
        }
        let max_pivots = 50 * width + 100;
        for _ in 0..max_pivots {
            let Some(enter) = (0..width).find(|&j| cost[j] < -eps) else {
                let obj: f64 = (0..m).filter(|&k| basis[k] >= n).map(|k| t[k][width]).sum();
                let bscale = 1.0 + self.rhs.iter().map(|b| b.abs()).sum::<f64>();
                if obj > 1e-11 * bscale {
                    return Ok(Err(obj));
                }
                let mut y = self.lower.clone();
                for k in 0..m {
                    if basis[k] < n {
                        y[basis[k]] += t[k][width].max(0.0);
                    }
                }
                return Ok(Ok(y));
            };
            let mut leave: Option<(usize, f64)> = None;
            for k in 0..m {
                if t[k][enter] > eps {
                    let ratio = t[k][width] / t[k][enter];
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r || (ratio == r && basis[k] < basis[l]),
                    };
                    if better {
                        leave = Some((k, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::NonConvergence("phase-one simplex unbounded".into()));
            };
            let piv = t[r][enter];
            for v in t[r].iter_mut() {
                *v /= piv;
            }
            let pivot_row = t[r].clone();
            for (k, row) in t.iter_mut().enumerate() {
                if k != r && row[enter] != 0.0 {
                    let f = row[enter];
                    row.iter_mut()
                        .zip(&pivot_row)
                        .for_each(|(v, p)| *v -= f * p);
                }
            }
            let f = cost[enter];
            cost.iter_mut()
                .zip(&pivot_row)
                .for_each(|(v, p)| *v -= f * p);
            basis[r] = enter;
        }
        Err(Error::NonConvergence(
            "phase-one simplex exceeded its pivot budget".into(),
        ))
    }
}
