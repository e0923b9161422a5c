//! Dense bounded-variable primal simplex, two phases, Bland's rule.

use crate::{Error, Result};

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// A nonbasic variable with zero reduced cost exists at the optimum, so
    /// other optimal vertices may exist.
    pub non_unique: bool,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    /// m × n_total, rows of B⁻¹·A.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Moved,
}

impl Tableau {
    fn reduced_cost(&self, obj: &[f64], j: usize) -> f64 {
        let mut rc = obj[j];
        for (i, &b) in self.basis.iter().enumerate() {
            rc -= obj[b] * self.t[i][j];
        }
        rc
    }

    fn is_basic(&self) -> Vec<bool> {
        let mut basic = vec![false; self.x.len()];
        for &b in &self.basis {
            basic[b] = true;
        }
        basic
    }

    /// One iteration maximizing `obj`. Entering and leaving choices follow
    /// Bland's rule (smallest index).
    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, obj: &[f64]) -> Result<Step> {
        let basic = self.is_basic();
        let n = self.x.len();
        let mut entering = None;
        for j in 0..n {
            if basic[j] || self.hi[j] - self.lo[j] <= TOLERANCE {
                continue;
            }
            let rc = self.reduced_cost(obj, j);
            let at_lower = self.x[j] <= self.lo[j] + TOLERANCE;
            let at_upper = self.x[j] >= self.hi[j] - TOLERANCE;
            if rc > TOLERANCE && !at_upper {
                entering = Some((j, 1.0));
                break;
            }
            if rc < -TOLERANCE && !at_lower {
                entering = Some((j, -1.0));
                break;
            }
        }
        let Some((j, dir)) = entering else {
            return Ok(Step::Optimal);
        };

        // largest step along dir before a basic variable hits a bound
        let mut limits: Vec<(usize, f64, f64)> = Vec::new();
        for (i, row) in self.t.iter().enumerate() {
            let alpha = dir * row[j];
            let b = self.basis[i];
            if alpha > TOLERANCE {
                limits.push((i, ((self.x[b] - self.lo[b]) / alpha).max(0.0), self.lo[b]));
            } else if alpha < -TOLERANCE && self.hi[b].is_finite() {
                limits.push((i, ((self.hi[b] - self.x[b]) / -alpha).max(0.0), self.hi[b]));
            }
        }
        let flip = self.hi[j] - self.lo[j];
        let row_min = limits.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
        let (t_max, leave) = if row_min < flip {
            let (r, _, bound) = limits
                .iter()
                .filter(|l| l.1 <= row_min + TOLERANCE)
                .min_by_key(|l| self.basis[l.0])
                .copied()
                .unwrap();
            (row_min, Some((r, bound)))
        } else {
            (flip, None)
        };
        if !t_max.is_finite() {
            return Err(Error::Unbounded);
        }
        self.iterations += 1;
        for (i, row) in self.t.iter().enumerate() {
            self.x[self.basis[i]] -= dir * t_max * row[j];
        }
        self.x[j] += dir * t_max;
        match leave {
            Some((r, bound)) => {
                let b = self.basis[r];
                self.x[b] = bound;
                self.pivot(r, j);
            }
            None => {
                // entering variable crosses to its other bound
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
        }
        Ok(Step::Moved)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = j;
    }

    fn run(&mut self, obj: &[f64], max_iter: usize) -> Result<()> {
        loop {
            if self.iterations > max_iter {
                return Err(Error::Singular(format!(
                    "simplex exceeded {max_iter} iterations"
                )));
            }
            if let Step::Optimal = self.step(obj)? {
                return Ok(());
            }
        }
    }
}

/// Maximizes `c·x` subject to `A·x ≤ b` and `lower ≤ x ≤ upper`.
///
/// Lower bounds must be finite; upper bounds may be infinite. An
/// infeasible problem is a verdict, not an error; an unbounded one is an
/// error.
pub fn simplex_solve(
    c: &[f64],
    a_ub: &[Vec<f64>],
    b_ub: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<LpSolution> {
    let n = c.len();
    let m = a_ub.len();
    if lower.len() != n || upper.len() != n || b_ub.len() != m || a_ub.iter().any(|r| r.len() != n)
    {
        return Err(Error::Domain("inconsistent LP dimensions".into()));
    }
    if lower.iter().any(|l| !l.is_finite()) || upper.iter().any(|u| u.is_nan()) {
        return Err(Error::Domain("lower bounds must be finite".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| l > &(u + TOLERANCE)) {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: lower.to_vec(),
            objective: f64::NAN,
            non_unique: false,
            iterations: 0,
        });
    }

    // columns: x (n), slacks (m), artificials (one per row with negative
    // residual at the lower bounds)
    let residual: Vec<f64> = (0..m)
        .map(|i| b_ub[i] - (0..n).map(|j| a_ub[i][j] * lower[j]).sum::<f64>())
        .collect();
    let art_rows: Vec<usize> = (0..m).filter(|&i| residual[i] < 0.0).collect();
    let total = n + m + art_rows.len();
    let mut t = vec![vec![0.0; total]; m];
    let mut basis = vec![0; m];
    let mut x = vec![0.0; total];
    let mut lo = vec![0.0; total];
    let mut hi = vec![f64::INFINITY; total];
    lo[..n].copy_from_slice(lower);
    for j in 0..n {
        hi[j] = upper[j].max(lower[j]);
        x[j] = lower[j];
    }
    for i in 0..m {
        t[i][..n].copy_from_slice(&a_ub[i]);
        t[i][n + i] = 1.0;
    }
    for (k, &i) in art_rows.iter().enumerate() {
        // row i: A x + s - a = b with a = -residual basic; written in
        // B⁻¹ form by negating the row
        let col = n + m + k;
        t[i][col] = -1.0;
        for v in t[i].iter_mut() {
            *v = -*v;
        }
        basis[i] = col;
        x[col] = -residual[i];
    }
    for i in 0..m {
        if residual[i] >= 0.0 {
            basis[i] = n + i;
            x[n + i] = residual[i];
        }
    }
    let mut tab = Tableau {
        t,
        basis,
        x,
        lo,
        hi,
        iterations: 0,
    };
    let max_iter = 1000 + 50 * (n + m);

    if !art_rows.is_empty() {
        let mut phase1 = vec![0.0; total];
        for k in 0..art_rows.len() {
            phase1[n + m + k] = -1.0;
        }
        tab.run(&phase1, max_iter)?;
        let infeas: f64 = (0..art_rows.len()).map(|k| tab.x[n + m + k]).sum();
        if infeas > TOLERANCE * (1.0 + b_ub.iter().fold(0.0f64, |a, b| a.max(b.abs()))) {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: tab.x[..n].to_vec(),
                objective: f64::NAN,
                non_unique: false,
                iterations: tab.iterations,
            });
        }
        for k in 0..art_rows.len() {
            let col = n + m + k;
            tab.hi[col] = 0.0;
            tab.x[col] = 0.0;
        }
    }

    let mut obj = vec![0.0; total];
    obj[..n].copy_from_slice(c);
    tab.run(&obj, max_iter)?;

    let basic = tab.is_basic();
    let non_unique = (0..n + m).any(|j| {
        !basic[j] && tab.hi[j] - tab.lo[j] > TOLERANCE && tab.reduced_cost(&obj, j).abs() <= TOLERANCE
    });
    let xs: Vec<f64> = (0..n)
        .map(|j| tab.x[j].clamp(lower[j], upper[j].max(lower[j])))
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: c.iter().zip(&xs).map(|(a, b)| a * b).sum(),
        x: xs,
        non_unique,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_row_binds() {
        let s = simplex_solve(&[1.0], &[vec![1.0]], &[5.0], &[0.0], &[8.0]).unwrap();
        assert!(s.is_optimal());
        assert!((s.x[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn bound_binds_before_row() {
        let s = simplex_solve(&[1.0], &[vec![1.0]], &[5.0], &[0.0], &[3.0]).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_above_row_is_infeasible() {
        let s = simplex_solve(&[1.0], &[vec![1.0]], &[5.0], &[6.0], &[8.0]).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn two_sites_share_one_generator() {
        let s = simplex_solve(
            &[1.0, 1.0],
            &[vec![1.0, 1.0]],
            &[10.0],
            &[4.8, 4.8],
            &[8.0, 8.0],
        )
        .unwrap();
        assert!((s.objective - 10.0).abs() < 1e-9);
        assert!(s.non_unique);
        assert!(s.x.iter().all(|v| (4.8 - 1e-9..=8.0 + 1e-9).contains(v)));
    }

    #[test]
    fn unbounded_is_an_error() {
        let r = simplex_solve(&[1.0], &[vec![-1.0]], &[5.0], &[0.0], &[f64::INFINITY]);
        assert!(matches!(r, Err(Error::Unbounded)));
    }

    #[test]
    fn general_rows_with_negative_coefficients() {
        // max x + 2y; x + y <= 4; x - y <= 1; -x <= -1 (x >= 1); 0 <= x,y <= 10
        let s = simplex_solve(
            &[1.0, 2.0],
            &[vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 0.0]],
            &[4.0, 1.0, -1.0],
            &[0.0, 0.0],
            &[10.0, 10.0],
        )
        .unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 3.0).abs() < 1e-9);
        assert!(!s.non_unique);
    }
}
