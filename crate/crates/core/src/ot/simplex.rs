//! Dense two-phase primal simplex with Bland's rule, for the small
//! transportation-type programs used by the Wasserstein oracles.
//!
//! Solves `min c'x  s.t.  A x = b, x ≥ 0`. The final basic solution is
//! recomputed from the original rows to shed tableau round-off.

use crate::error::{GwglError, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        self.basis[r] = col;
    }

    /// Runs Bland-rule pivots for cost vector `cost` over the first `ncols`
    /// columns. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], ncols: usize) -> bool {
        loop {
            // reduced costs d_j = c_j − c_B' B⁻¹ A_j, read off the tableau
            let entering = (0..ncols).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(i, &bj)| cost[bj] * self.rows[i][j])
                    .sum();
                cost[j] - z < -COST_TOL * (1.0 + cost[j].abs())
            });
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i].max(0.0) / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-15 || (ratio <= best + 1e-15 && self.basis[i] < self.basis[r]) {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col),
                None => return false,
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m || lp.a.iter().any(|r| r.len() != n) {
        return Err(GwglError::dim("linear program shapes disagree"));
    }
    if m == 0 {
        return Ok(if lp.c.iter().any(|&c| c < 0.0) {
            LpOutcome::Unbounded
        } else {
            LpOutcome::Optimal {
                x: vec![0.0; n],
                value: 0.0,
            }
        });
    }
    // columns: n structural, then m artificial
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = lp.a[i].iter().map(|v| sign * v).collect();
        row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        rows.push(row);
        rhs.push(sign * lp.b[i]);
    }
    let mut tab = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
    };

    let phase1: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    tab.optimize(&phase1, n + m);
    let infeas: f64 = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &bj)| bj >= n)
        .map(|(i, _)| tab.rhs[i].abs())
        .sum();
    let scale = lp.b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if infeas > FEAS_TOL * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // drive remaining artificials out of the basis, dropping redundant rows
    let mut keep_rows: Vec<usize> = (0..m).collect();
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.rows[r][j].abs() > 1e-9 && !tab.basis.contains(&j)) {
                Some(col) => {
                    tab.pivot(r, col);
                    r += 1;
                }
                None => {
                    tab.rows.remove(r);
                    tab.rhs.remove(r);
                    tab.basis.remove(r);
                    keep_rows.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }

    let mut cost = lp.c.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !tab.optimize(&cost, n) {
        return Ok(LpOutcome::Unbounded);
    }

    let x = polish(lp, &keep_rows, &tab.basis, n).unwrap_or_else(|| {
        let mut x = vec![0.0; n];
        for (i, &bj) in tab.basis.iter().enumerate() {
            x[bj] = tab.rhs[i].max(0.0);
        }
        x
    });
    let value = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Recomputes the basic solution `B x_B = b` on the kept rows.
fn polish(lp: &LinearProgram, rows: &[usize], basis: &[usize], n: usize) -> Option<Vec<f64>> {
    let k = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| basis.iter().map(|&j| lp.a[r][j]).collect())
        .collect();
    let mut b: Vec<f64> = rows.iter().map(|&r| lp.b[r]).collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..k {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut xb = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * xb[c]).sum();
        xb[r] = (b[r] - s) / a[r][r];
    }
    let mut x = vec![0.0; n];
    for (&j, v) in basis.iter().zip(xb) {
        if v < -1e-9 {
            return None;
        }
        x[j] = v.max(0.0);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(out: LpOutcome) -> f64 {
        match out {
            LpOutcome::Optimal { value, .. } => value,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_transport() {
        // supplies (0.5, 0.5), demands (0.5, 0.5), costs [[0,1],[1,0]]
        let lp = LinearProgram {
            a: vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            b: vec![0.5, 0.5, 0.5, 0.5],
            c: vec![0.0, 1.0, 1.0, 0.0],
        };
        assert!(value(solve(&lp).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn inequality_with_slack() {
        // max x + 2y s.t. x + y + s = 1  →  min −x − 2y, optimum −2
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0, 1.0]],
            b: vec![1.0],
            c: vec![-1.0, -2.0, 0.0],
        };
        assert!((value(solve(&lp).unwrap()) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let lp = LinearProgram {
            a: vec![vec![1.0, 1.0]],
            b: vec![-1.0],
            c: vec![1.0, 1.0],
        };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Infeasible);
        let lp = LinearProgram {
            a: vec![vec![1.0, -1.0]],
            b: vec![1.0],
            c: vec![0.0, -1.0],
        };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Unbounded);
    }
}
