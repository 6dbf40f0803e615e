//! Dense two-phase simplex for small linear programs in standard form.

use crate::{Error, Result};

const TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes `cost . x` over the current feasible basis, entering only
    /// columns with `allowed[j]`. Bland's rule on both choices.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let rhs = self.cols;
        for _ in 0..100_000 {
            let reduced = |j: usize, t: &Tableau| -> f64 {
                cost[j] - t.t.iter().zip(&t.basis).map(|(line, &b)| cost[b] * line[j]).sum::<f64>()
            };
            let entering = (0..self.cols).find(|&j| allowed[j] && !self.basis.contains(&j) && reduced(j, self) < -TOL);
            let Some(col) = entering else { return Ok(()) };
            let mut best: Option<(f64, usize)> = None;
            for (r, line) in self.t.iter().enumerate() {
                if line[col] > TOL {
                    let ratio = line[rhs] / line[col];
                    best = match best {
                        Some((br, bi)) if ratio > br + TOL => Some((br, bi)),
                        Some((br, bi)) if (ratio - br).abs() <= TOL && self.basis[bi] < self.basis[r] => Some((br, bi)),
                        _ => Some((ratio, r)),
                    };
                }
            }
            let Some((_, row)) = best else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            self.pivot(row, col);
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }
}

/// Minimizes `c . x` subject to `A x = b`, `x >= 0`.
pub(crate) fn solve_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("linear program dimensions disagree".into()));
    }
    // rows with b >= 0, one artificial per row
    let cols = n + m;
    let mut t = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut line: Vec<f64> = row.iter().map(|v| sign * v).collect();
        line.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        line.push(sign * bi);
        t.push(line);
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), cols };

    let phase1: Vec<f64> = (0..cols).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    tab.optimize(&phase1, &vec![true; cols])?;
    let infeasibility: f64 = tab.t.iter().zip(&tab.basis).filter(|(_, &bv)| bv >= n).map(|(l, _)| l[cols]).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-9 * scale {
        return Err(Error::Domain("linear program is infeasible".into()));
    }
    // drive zero-level artificials out of the basis; drop redundant rows
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.t[r][j].abs() > 1e-9) {
                Some(j) => tab.pivot(r, j),
                None => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    let allowed: Vec<bool> = (0..cols).map(|j| j < n).collect();
    tab.optimize(&phase2, &allowed)?;

    let mut x = vec![0.0; n];
    for (line, &bv) in tab.t.iter().zip(&tab.basis) {
        if bv < n {
            x[bv] = line[cols];
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> 36 at (2, 6)
        let a = vec![
            vec![1.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0, 1.0, 0.0],
            vec![3.0, 2.0, 0.0, 0.0, 1.0],
        ];
        let sol = solve_standard(&a, &[4.0, 12.0, 18.0], &[-3.0, -5.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        // x + y = 1 stated twice
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let sol = solve_standard(&a, &[1.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible() {
        let a = vec![vec![1.0], vec![1.0]];
        assert!(solve_standard(&a, &[1.0, 2.0], &[1.0]).is_err());
    }
}
