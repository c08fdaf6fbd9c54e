//! Dense primal simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The slack basis is feasible because `b ≥ 0`, so no phase one is needed.
//! Pricing is Dantzig's rule until a run of degenerate pivots is seen, after
//! which Bland's rule takes over for good; that guarantees termination.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("right-hand side {value} of row {row} is negative; the origin is not feasible")]
    NegativeRhs { row: usize, value: f64 },
    #[error("objective is unbounded along column {column}")]
    Unbounded { column: usize },
    #[error("simplex stalled after {0} pivots")]
    Stalled(usize),
    #[error("row {row} has {found} coefficients, expected {expected}")]
    Shape { row: usize, found: usize, expected: usize },
}

/// `max cᵀx` subject to `rows[i]·x ≤ rhs[i]` and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self { objective: vec![0.0; n_vars], rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, rhs: f64) {
        self.rows.push(coefficients);
        self.rhs.push(rhs);
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().zip(&self.rhs).map(|(row, b)| {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            lhs - b
        });
        let signs = x.iter().map(|v| -v);
        rows.chain(signs).fold(0.0, f64::max)
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LpSolution, LpError> {
        let n = self.n_vars();
        let m = self.rows.len();
        for (i, (row, &b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            if row.len() != n {
                return Err(LpError::Shape { row: i, found: row.len(), expected: n });
            }
            if b < 0.0 {
                return Err(LpError::NegativeRhs { row: i, value: b });
            }
        }

        let width = n + m + 1;
        let mut tab = vec![0.0; (m + 1) * width];
        for (i, row) in self.rows.iter().enumerate() {
            let r = &mut tab[i * width..(i + 1) * width];
            r[..n].copy_from_slice(row);
            r[n + i] = 1.0;
            r[width - 1] = self.rhs[i];
        }
        // objective row holds reduced costs as -c
        for (j, c) in self.objective.iter().enumerate() {
            tab[m * width + j] = -c;
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        let mut pivots = 0;
        let mut degenerate_run = 0;
        let mut bland = false;
        loop {
            let cost = &tab[m * width..m * width + n + m];
            let entering = if bland {
                cost.iter().position(|&z| z < -COST_EPS)
            } else {
                let mut best = None;
                let mut best_z = -COST_EPS;
                for (j, &z) in cost.iter().enumerate() {
                    if z < best_z {
                        best_z = z;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else { break };

            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = tab[i * width + col];
                if a > PIVOT_EPS {
                    let ratio = tab[i * width + width - 1] / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leaving else {
                return Err(LpError::Unbounded { column: col });
            };

            if pivots == max_pivots {
                return Err(LpError::Stalled(pivots));
            }
            if ratio.abs() <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            pivot(&mut tab, width, m, row, col);
            basis[row] = col;
            pivots += 1;
        }

        let mut x = vec![0.0; n];
        for (i, &var) in basis.iter().enumerate() {
            if var < n {
                x[var] = tab[i * width + width - 1].max(0.0);
            }
        }
        let objective = self.evaluate(&x);
        Ok(LpSolution { x, objective, pivots })
    }
}

fn pivot(tab: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = tab[row * width + col];
    for v in &mut tab[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = tab[row * width..(row + 1) * width].to_vec();
    for i in 0..=m {
        if i == row {
            continue;
        }
        let factor = tab[i * width + col];
        if factor == 0.0 {
            continue;
        }
        let r = &mut tab[i * width..(i + 1) * width];
        for (v, pv) in r.iter_mut().zip(&pivot_row) {
            *v -= factor * pv;
        }
        r[col] = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_instance() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![1.0, 0.0], 4.0);
        lp.add_row(vec![0.0, 2.0], 12.0);
        lp.add_row(vec![3.0, 2.0], 18.0);
        let sol = lp.solve(100).unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![-1.0, 1.0], 1.0);
        assert!(matches!(lp.solve(100), Err(LpError::Unbounded { column: 0 })));
    }

    #[test]
    fn negative_rhs_rejected() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(vec![1.0], -1.0);
        assert!(matches!(lp.solve(10), Err(LpError::NegativeRhs { row: 0, .. })));
    }

    #[test]
    fn degenerate_instance_terminates() {
        // Beale's cycling example (converted to max form)
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -20.0, 0.5, -6.0];
        lp.add_row(vec![0.25, -8.0, -1.0, 9.0], 0.0);
        lp.add_row(vec![0.5, -12.0, -0.5, 3.0], 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let sol = lp.solve(1000).unwrap();
        assert!((sol.objective - 1.25).abs() < 1e-9);
        assert!(lp.max_violation(&sol.x) < 1e-9);
    }

    #[test]
    fn stall_limit_reported() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![1.0, 0.0], 4.0);
        lp.add_row(vec![0.0, 2.0], 12.0);
        lp.add_row(vec![3.0, 2.0], 18.0);
        assert_eq!(lp.solve(0), Err(LpError::Stalled(0)));
    }
}
