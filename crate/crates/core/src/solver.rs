//! Small dense linear-program solver.
//!
//! Two-phase tableau simplex with Bland's smallest-index rule for both the
//! entering and the leaving variable, which rules out cycling on degenerate
//! vertices and makes the pivot sequence a pure function of the input.
//! Intended for desk-scale problems (a few hundred variables and rows).

use thiserror::Error;

/// Pivot, reduced-cost and feasibility tolerance.
pub const TOLERANCE: f64 = 1e-9;

const DEFAULT_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c . x` subject to linear rows and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    /// Largest violation of any row or bound by `x`, relative to the row's
    /// scale.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs: f64 = c.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = 1.0 + c.rhs.abs().max(lhs.abs());
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap / scale);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal(_) => LpStatus::Optimal,
            LpOutcome::Infeasible => LpStatus::Infeasible,
            LpOutcome::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite coefficient in the program")]
    NonFinite,
    #[error("iteration limit of {0} pivots exceeded")]
    IterationLimit(usize),
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, SolverError> {
    solve_lp_with_limit(lp, DEFAULT_MAX_ITERATIONS)
}

pub fn solve_lp_with_limit(lp: &LinearProgram, max_iterations: usize) -> Result<LpOutcome, SolverError> {
    let n = lp.num_vars();
    for (row, c) in lp.constraints.iter().enumerate() {
        if c.coefficients.len() != n {
            return Err(SolverError::DimensionMismatch {
                row,
                expected: n,
                got: c.coefficients.len(),
            });
        }
    }
    let finite = lp.objective.iter().all(|v| v.is_finite())
        && lp
            .constraints
            .iter()
            .all(|c| c.rhs.is_finite() && c.coefficients.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(SolverError::NonFinite);
    }

    let mut tableau = Tableau::standard_form(lp);
    let mut budget = max_iterations;

    // Phase 1: minimize the sum of artificial variables.
    if tableau.num_artificial > 0 {
        let mut cost = vec![0.0; tableau.cols];
        for c in &mut cost[tableau.first_artificial..] {
            *c = 1.0;
        }
        tableau.set_objective(&cost);
        if let Pivoting::Unbounded = tableau.optimize(tableau.cols, &mut budget, max_iterations)? {
            unreachable!("phase 1 objective is bounded below by zero");
        }
        let infeasibility = -tableau.obj[tableau.cols];
        let scale = 1.0 + lp.constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > TOLERANCE * scale {
            return Ok(LpOutcome::Infeasible);
        }
        tableau.drive_out_artificials();
    }

    // Phase 2: original objective, artificials barred from entering.
    let mut cost = vec![0.0; tableau.cols];
    cost[..n].copy_from_slice(&lp.objective);
    tableau.set_objective(&cost);
    let allowed = tableau.first_artificial;
    if let Pivoting::Unbounded = tableau.optimize(allowed, &mut budget, max_iterations)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (row, &var) in tableau.basis.iter().enumerate() {
        if var < n {
            x[var] = tableau.rhs(row).max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome::Optimal(LpSolution { value, x }))
}

enum Pivoting {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Row-major `rows x (cols + 1)`, last column is the right-hand side.
    data: Vec<Vec<f64>>,
    /// Reduced costs, last entry is minus the current objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    first_artificial: usize,
    num_artificial: usize,
}

impl Tableau {
    fn standard_form(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        // Flip rows so every right-hand side is non-negative.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coefficients.iter().map(|v| -v).collect(), flipped, -c.rhs)
                } else {
                    (c.coefficients.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let num_artificial = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + num_slack;
        let cols = first_artificial + num_artificial;

        let mut data = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut slack, mut artificial) = (n, first_artificial);
        for (coeffs, relation, rhs) in rows {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(&coeffs);
            row[cols] = rhs;
            match relation {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[artificial] = 1.0;
                    basis.push(artificial);
                    artificial += 1;
                }
                Relation::Eq => {
                    row[artificial] = 1.0;
                    basis.push(artificial);
                    artificial += 1;
                }
            }
            data.push(row);
        }
        Self {
            data,
            obj: vec![0.0; cols + 1],
            basis,
            cols,
            first_artificial,
            num_artificial,
        }
    }

    fn rhs(&self, row: usize) -> f64 {
        self.data[row][self.cols]
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for (row, &var) in self.data.iter().zip(&self.basis) {
            let cb = cost[var];
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        self.obj = obj;
    }

    fn optimize(&mut self, allowed: usize, budget: &mut usize, limit: usize) -> Result<Pivoting, SolverError> {
        loop {
            let Some(enter) = (0..allowed).find(|&j| self.obj[j] < -TOLERANCE) else {
                return Ok(Pivoting::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.data.iter().enumerate() {
                let a = row[enter];
                if a <= TOLERANCE {
                    continue;
                }
                let ratio = row[self.cols] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= TOLERANCE * (1.0 + best_ratio.abs());
                        if ratio < best_ratio && !tie
                            || tie && self.basis[i] < self.basis[best]
                        {
                            Some((i, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((leave, _)) = leave else {
                return Ok(Pivoting::Unbounded);
            };
            if *budget == 0 {
                return Err(SolverError::IterationLimit(limit));
            }
            *budget -= 1;
            self.pivot(leave, enter);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.data[row][col];
        for v in &mut self.data[row] {
            *v /= p;
        }
        let pivot_row = std::mem::take(&mut self.data[row]);
        for (i, r) in self.data.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
        }
        self.data[row] = pivot_row;
        self.basis[row] = col;
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get dropped.
    fn drive_out_artificials(&mut self) {
        let mut row = 0;
        while row < self.data.len() {
            if self.basis[row] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.data[row][j].abs() > TOLERANCE);
                match col {
                    Some(col) => self.pivot(row, col),
                    None => {
                        self.data.remove(row);
                        self.basis.remove(row);
                        continue;
                    }
                }
            }
            row += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 3.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_negative_upper_bound() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::minimize(vec![-1.0, 0.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status(), LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_redundant_rows() {
        // x + y = 2 twice, minimize x - y -> x = 0, y = 2.
        let mut lp = LinearProgram::minimize(vec![1.0, -1.0]);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 2.0)
            .constrain(vec![2.0, 2.0], Relation::Eq, 4.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.value + 2.0).abs() < 1e-12);
        assert!(lp.max_violation(&sol.x) < 1e-12);
    }

    #[test]
    fn degenerate_klee_minty_like_problem_terminates() {
        // Beale's classic cycling example for the largest-coefficient rule.
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.constrain(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .constrain(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = solve_lp(&lp).unwrap().optimal().unwrap();
        assert!((sol.value + 0.05).abs() < 1e-9);
    }

    #[test]
    fn dimension_and_limit_errors() {
        let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 1.0);
        assert!(matches!(solve_lp(&lp), Err(SolverError::DimensionMismatch { row: 0, .. })));

        let mut lp = LinearProgram::minimize(vec![-1.0, -1.0]);
        lp.constrain(vec![1.0, 2.0], Relation::Le, 4.0)
            .constrain(vec![3.0, 1.0], Relation::Le, 6.0);
        assert_eq!(solve_lp_with_limit(&lp, 0), Err(SolverError::IterationLimit(0)));

        let lp = LinearProgram::minimize(vec![f64::NAN]);
        assert_eq!(solve_lp(&lp), Err(SolverError::NonFinite));
    }
}
