use super::{dot, LinearProgram, LpError, LpSolution, LpStatus, Relation, TOLERANCE};

/// Bland's rule cannot cycle, so this only guards against runaway numerics.
const DEFAULT_PIVOT_LIMIT: usize = 100_000;

/// Values this close to zero after a pivot are flushed to zero.
const FLUSH: f64 = 1e-12;

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_with_limit(lp, DEFAULT_PIVOT_LIMIT)
}

/// Two-phase dense tableau simplex with Bland's anti-cycling rule.
pub fn solve_with_limit(lp: &LinearProgram, max_pivots: usize) -> Result<LpSolution, LpError> {
    lp.check_dimensions()?;
    let n = lp.num_vars;
    for (j, b) in lp.bounds.iter().enumerate() {
        if !b.lower.is_finite() {
            return Err(LpError::UnsupportedBound(j));
        }
        if b.upper < b.lower - TOLERANCE {
            return Ok(infeasible(lp));
        }
    }
    let lower: Vec<f64> = lp.bounds.iter().map(|b| b.lower).collect();

    // Rows over the shifted variables y = x - lower >= 0, with rhs >= 0.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> =
        lp.constraints.iter().map(|c| (c.coeffs.clone(), c.relation, c.rhs - dot(&c.coeffs, &lower))).collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        if b.upper.is_finite() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e, Relation::Le, b.upper - b.lower));
        }
    }
    for (coeffs, rel, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            coeffs.iter_mut().for_each(|a| *a = -*a);
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let num_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let num_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let art_start = n + num_slack;
    let width = art_start + num_art;

    let mut tab = Tableau::new(m, width, max_pivots);
    let (mut slack, mut art) = (n, art_start);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut tab.rows[i];
        row[..n].copy_from_slice(coeffs);
        row[width] = *rhs;
        match rel {
            Relation::Le => {
                row[slack] = 1.0;
                tab.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -1.0;
                row[art] = 1.0;
                tab.basis[i] = art;
                slack += 1;
                art += 1;
            }
            Relation::Eq => {
                row[art] = 1.0;
                tab.basis[i] = art;
                art += 1;
            }
        }
    }

    // Phase 1: maximize -(sum of artificials).
    if num_art > 0 {
        let mut cost = vec![0.0; width];
        cost[art_start..].iter_mut().for_each(|c| *c = -1.0);
        tab.set_objective(&cost);
        let all = vec![true; width];
        tab.optimize(&all)?;
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if tab.value() < -TOLERANCE * scale {
            let mut sol = infeasible(lp);
            sol.pivots = tab.pivots;
            return Ok(sol);
        }
        tab.evict_artificials(art_start);
    }

    // Phase 2 over structural and slack columns only.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.objective);
    tab.set_objective(&cost);
    let allowed: Vec<bool> = (0..width).map(|j| j < art_start).collect();
    let status = tab.optimize(&allowed)?;

    let mut x = lower;
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(i).max(0.0);
        }
    }
    for (v, b) in x.iter_mut().zip(&lp.bounds) {
        *v = v.clamp(b.lower, b.upper.max(b.lower));
    }
    Ok(LpSolution { status, objective_value: lp.evaluate(&x), assignment: x, pivots: tab.pivots })
}

fn infeasible(lp: &LinearProgram) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        objective_value: f64::NAN,
        assignment: vec![f64::NAN; lp.num_vars],
        pivots: 0,
    }
}

struct Tableau {
    /// Constraint rows; the last entry of each row is its rhs.
    rows: Vec<Vec<f64>>,
    /// Reduced costs `z_j - c_j`; the last entry is the objective value.
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn new(m: usize, width: usize, max_pivots: usize) -> Self {
        Self {
            rows: vec![vec![0.0; width + 1]; m],
            obj: vec![0.0; width + 1],
            basis: vec![0; m],
            width,
            pivots: 0,
            max_pivots,
        }
    }

    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn value(&self) -> f64 {
        self.obj[self.width]
    }

    fn set_objective(&mut self, cost: &[f64]) {
        self.obj = cost.iter().map(|c| -c).chain([0.0]).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (o, a) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *o += cb * a;
                }
            }
        }
    }

    fn optimize(&mut self, allowed: &[bool]) -> Result<LpStatus, LpError> {
        loop {
            // Bland: lowest-index improving column, lowest-index leaving variable.
            let Some(col) = (0..self.width).find(|&j| allowed[j] && self.obj[j] < -TOLERANCE) else {
                return Ok(LpStatus::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a <= TOLERANCE {
                    continue;
                }
                let ratio = row[self.width] / a;
                let better = match leave {
                    None => true,
                    Some((r, best)) => ratio < best - FLUSH || (ratio <= best + FLUSH && self.basis[i] < self.basis[r]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(row, col)?;
        }
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(LpError::IterationLimit(self.max_pivots));
        }
        let p = self.rows[r][c];
        let prow: Vec<f64> = self.rows[r].iter().map(|a| a / p).collect();
        let eliminate = |target: &mut Vec<f64>| {
            let f = target[c];
            if f != 0.0 {
                for (t, a) in target.iter_mut().zip(&prow) {
                    *t -= f * a;
                    if t.abs() < FLUSH {
                        *t = 0.0;
                    }
                }
                target[c] = 0.0;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.rows[r] = prow;
        self.rows[r][c] = 1.0;
        self.basis[r] = c;
        Ok(())
    }

    /// Pivots zero-level artificial variables out of the basis after phase 1,
    /// dropping rows that turn out to be redundant.
    fn evict_artificials(&mut self, art_start: usize) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < art_start {
                i += 1;
                continue;
            }
            let col = (0..art_start)
                .filter(|&j| self.rows[i][j].abs() > TOLERANCE)
                .max_by(|&a, &b| self.rows[i][a].abs().total_cmp(&self.rows[i][b].abs()));
            match col {
                Some(j) => {
                    // rhs is zero here, so this pivot leaves every other row unchanged in value
                    self.pivots += 1;
                    let p = self.rows[i][j];
                    let prow: Vec<f64> = self.rows[i].iter().map(|a| a / p).collect();
                    for (k, row) in self.rows.iter_mut().enumerate() {
                        let f = row[j];
                        if k != i && f != 0.0 {
                            for (t, a) in row.iter_mut().zip(&prow) {
                                *t -= f * a;
                            }
                            row[j] = 0.0;
                        }
                    }
                    self.rows[i] = prow;
                    self.rows[i][self.width] = 0.0;
                    self.basis[i] = j;
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }
}
