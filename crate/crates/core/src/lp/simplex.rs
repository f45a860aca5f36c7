//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Two phases with artificial variables, Dantzig pricing, a Harris ratio
//! test with bound flipping, and Bland's rule after a long run of degenerate
//! pivots. The basis inverse is updated in product form and refactorized
//! periodically.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpError, LpSolution, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub refactor_every: usize,
    /// Defaults to `100 * (rows + cols) + 1000` when `None`.
    pub max_iterations: Option<usize>,
    pub scale: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            refactor_every: 64,
            max_iterations: None,
            scale: true,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut engine = Engine::new(lp, opts);
    let status = engine.run()?;
    Ok(engine.into_solution(lp, status))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Structural(usize),
    Unit { row: usize, sign: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    Free,
    /// Artificial variable removed after phase one.
    Retired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

struct Engine {
    rows: usize,
    n_struct: usize,
    n_eq: usize,
    a: DMatrix<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost: Vec<f64>,
    columns: Vec<Column>,
    kinds: Vec<Kind>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Row-major `rows x rows` basis inverse.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
    opts: SimplexOptions,
}

impl Engine {
    fn new(lp: &LinearProgram, opts: &SimplexOptions) -> Self {
        let n = lp.num_vars();
        let n_eq = lp.num_eq();
        let n_in = lp.num_ineq();
        let rows = n_eq + n_in;

        let mut a = DMatrix::zeros(rows, n);
        if n_eq > 0 {
            a.view_mut((0, 0), (n_eq, n)).copy_from(&lp.eq_matrix);
        }
        if n_in > 0 {
            a.view_mut((n_eq, 0), (n_in, n)).copy_from(&lp.ineq_matrix);
        }
        let mut b: Vec<f64> = lp.eq_rhs.iter().chain(lp.ineq_rhs.iter()).copied().collect();

        let mut row_scale = vec![1.0; rows];
        let mut col_scale = vec![1.0; n];
        if opts.scale {
            for i in 0..rows {
                let m = a.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if m > 0.0 {
                    row_scale[i] = 1.0 / m;
                }
            }
            for i in 0..rows {
                let s = row_scale[i];
                a.row_mut(i).scale_mut(s);
                b[i] *= s;
            }
            for j in 0..n {
                let m = a.column(j).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                if m > 0.0 {
                    col_scale[j] = 1.0 / m;
                    a.column_mut(j).scale_mut(col_scale[j]);
                }
            }
        }

        let mut columns = Vec::with_capacity(n + n_in + rows);
        let mut kinds = Vec::with_capacity(n + n_in + rows);
        let mut lo = Vec::with_capacity(n + n_in + rows);
        let mut up = Vec::with_capacity(n + n_in + rows);
        let mut cost = Vec::with_capacity(n + n_in + rows);
        for j in 0..n {
            columns.push(Column::Structural(j));
            kinds.push(Kind::Structural);
            lo.push(lp.lower[j] / col_scale[j]);
            up.push(lp.upper[j] / col_scale[j]);
            cost.push(lp.objective[j] * col_scale[j]);
        }
        for i in 0..n_in {
            columns.push(Column::Unit {
                row: n_eq + i,
                sign: 1.0,
            });
            kinds.push(Kind::Slack);
            lo.push(0.0);
            up.push(f64::INFINITY);
            cost.push(0.0);
        }

        let max_iterations = opts
            .max_iterations
            .unwrap_or(100 * (rows + n + n_in) + 1000);

        let mut engine = Self {
            rows,
            n_struct: n,
            n_eq,
            a,
            b,
            row_scale,
            col_scale,
            cost,
            columns,
            kinds,
            lo,
            up,
            x: Vec::new(),
            state: Vec::new(),
            basis: vec![usize::MAX; rows],
            binv: vec![0.0; rows * rows],
            iterations: 0,
            since_refactor: 0,
            max_iterations,
            opts: *opts,
        };
        engine.initial_basis();
        engine
    }

    fn initial_basis(&mut self) {
        let nvars = self.columns.len();
        self.x = vec![0.0; nvars];
        self.state = vec![VarState::Free; nvars];
        for j in 0..nvars {
            let (l, u) = (self.lo[j], self.up[j]);
            if l.is_finite() {
                self.x[j] = l;
                self.state[j] = VarState::AtLower;
            } else if u.is_finite() {
                self.x[j] = u;
                self.state[j] = VarState::AtUpper;
            } else {
                self.x[j] = 0.0;
                self.state[j] = VarState::Free;
            }
        }
        // Residual of the rows with every structural variable at its start value.
        let mut residual = self.b.clone();
        for j in 0..self.n_struct {
            let xj = self.x[j];
            if xj != 0.0 {
                let col = self.struct_col(j);
                for (r, v) in residual.iter_mut().zip(col) {
                    *r -= v * xj;
                }
            }
        }
        for i in 0..self.rows {
            let slack = if i >= self.n_eq {
                Some(self.n_struct + (i - self.n_eq))
            } else {
                None
            };
            match slack {
                Some(s) if residual[i] >= 0.0 => {
                    self.x[s] = residual[i];
                    self.state[s] = VarState::Basic(i);
                    self.basis[i] = s;
                    self.binv[i * self.rows + i] = 1.0;
                }
                _ => {
                    let sign = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
                    let j = self.columns.len();
                    self.columns.push(Column::Unit { row: i, sign });
                    self.kinds.push(Kind::Artificial);
                    self.lo.push(0.0);
                    self.up.push(f64::INFINITY);
                    self.cost.push(0.0);
                    self.x.push(residual[i].abs());
                    self.state.push(VarState::Basic(i));
                    self.basis[i] = j;
                    self.binv[i * self.rows + i] = sign;
                }
            }
        }
    }

    fn struct_col(&self, j: usize) -> &[f64] {
        &self.a.as_slice()[j * self.rows..(j + 1) * self.rows]
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        match self.columns[j] {
            Column::Structural(s) => self.struct_col(s).iter().zip(y).map(|(a, b)| a * b).sum(),
            Column::Unit { row, sign } => sign * y[row],
        }
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let r = self.rows;
        match self.columns[j] {
            Column::Structural(s) => {
                let col = self.struct_col(s);
                let nz: Vec<(usize, f64)> = col
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (k, *v))
                    .collect();
                (0..r)
                    .map(|i| {
                        let row = &self.binv[i * r..(i + 1) * r];
                        nz.iter().map(|&(k, v)| row[k] * v).sum()
                    })
                    .collect()
            }
            Column::Unit { row, sign } => (0..r).map(|i| sign * self.binv[i * r + row]).collect(),
        }
    }

    /// `yᵀ = c_Bᵀ B⁻¹`.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let r = self.rows;
        let mut y = vec![0.0; r];
        for i in 0..r {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * r..(i + 1) * r];
                for (yk, bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let r = self.rows;
        self.since_refactor = 0;
        if r == 0 {
            return Ok(());
        }
        let mut bmat = DMatrix::zeros(r, r);
        for (p, &j) in self.basis.iter().enumerate() {
            match self.columns[j] {
                Column::Structural(s) => {
                    bmat.column_mut(p).copy_from_slice(self.struct_col(s));
                }
                Column::Unit { row, sign } => bmat[(row, p)] = sign,
            }
        }
        let inv = bmat
            .try_inverse()
            .ok_or_else(|| LpError::Malformed("basis matrix became singular".into()))?;
        for i in 0..r {
            for k in 0..r {
                self.binv[i * r + k] = inv[(i, k)];
            }
        }
        // Recompute basic values from the nonbasic ones.
        let mut rhs = self.b.clone();
        for j in 0..self.columns.len() {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            match self.columns[j] {
                Column::Structural(s) => {
                    let col = &self.a.as_slice()[s * r..(s + 1) * r];
                    for (v, a) in rhs.iter_mut().zip(col) {
                        *v -= a * xj;
                    }
                }
                Column::Unit { row, sign } => rhs[row] -= sign * xj,
            }
        }
        for i in 0..r {
            let row = &self.binv[i * r..(i + 1) * r];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
        Ok(())
    }

    fn pivot_update(&mut self, p: usize, alpha: &[f64]) {
        let r = self.rows;
        let piv = alpha[p];
        let (before, rest) = self.binv.split_at_mut(p * r);
        let (prow, after) = rest.split_at_mut(r);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, chunk) in before.chunks_mut(r).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, pv) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
        for (off, chunk) in after.chunks_mut(r).enumerate() {
            let f = alpha[p + 1 + off];
            if f != 0.0 {
                for (v, pv) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let has_artificial = self.kinds.contains(&Kind::Artificial);
        if has_artificial {
            let phase1: Vec<f64> = self
                .kinds
                .iter()
                .map(|k| if *k == Kind::Artificial { 1.0 } else { 0.0 })
                .collect();
            self.iterate(&phase1)?;
            self.refactor()?;
            let infeasibility: f64 = (0..self.columns.len())
                .filter(|&j| self.kinds[j] == Kind::Artificial)
                .map(|j| self.x[j].max(0.0))
                .sum();
            let bnorm = self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeasibility > self.opts.feas_tol * (1.0 + bnorm) {
                return Ok(LpStatus::Infeasible);
            }
            self.retire_artificials()?;
        }
        let cost = self.cost.clone();
        match self.iterate(&cost)? {
            PhaseOutcome::Optimal => {
                self.refactor()?;
                Ok(LpStatus::Optimal)
            }
            PhaseOutcome::Unbounded => Ok(LpStatus::Unbounded),
        }
    }

    fn retire_artificials(&mut self) -> Result<(), LpError> {
        let nvars = self.columns.len();
        for j in 0..nvars {
            if self.kinds[j] != Kind::Artificial {
                continue;
            }
            self.up[j] = 0.0;
            match self.state[j] {
                VarState::Basic(_) => {}
                _ => {
                    self.state[j] = VarState::Retired;
                    self.x[j] = 0.0;
                }
            }
        }
        // Drive basic artificials out of the basis where a replacement exists.
        let r = self.rows;
        for p in 0..r {
            let art = self.basis[p];
            if self.kinds[art] != Kind::Artificial {
                continue;
            }
            let row: Vec<f64> = self.binv[p * r..(p + 1) * r].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..nvars {
                if self.kinds[j] == Kind::Artificial
                    || matches!(self.state[j], VarState::Basic(_) | VarState::Retired)
                {
                    continue;
                }
                let v = self.col_dot(j, &row).abs();
                if v > 1e-7 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(j);
                self.pivot_update(p, &alpha);
                self.basis[p] = j;
                self.state[j] = VarState::Basic(p);
                self.state[art] = VarState::Retired;
                self.x[art] = 0.0;
            }
        }
        self.refactor()
    }

    fn iterate(&mut self, cost: &[f64]) -> Result<PhaseOutcome, LpError> {
        let nvars = self.columns.len();
        let degenerate_limit = 10 * (self.rows + nvars);
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let y = self.duals(cost);

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None; // (var, dir, score)
            for j in 0..nvars {
                let dir = match self.state[j] {
                    VarState::Basic(_) | VarState::Retired => continue,
                    _ if self.lo[j] == self.up[j] => continue,
                    st => {
                        let d = cost[j] - self.col_dot(j, &y);
                        match st {
                            VarState::AtLower if d < -self.opts.opt_tol => (1.0, -d),
                            VarState::AtUpper if d > self.opts.opt_tol => (-1.0, d),
                            VarState::Free if d.abs() > self.opts.opt_tol => (-d.signum(), d.abs()),
                            _ => continue,
                        }
                    }
                };
                let (dirv, score) = dir;
                if bland {
                    entering = Some((j, dirv, score));
                    break;
                }
                if entering.is_none_or(|(_, _, s)| score > s) {
                    entering = Some((j, dirv, score));
                }
            }
            let Some((q, dir, _)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let alpha = self.ftran(q);
            let own_range = self.up[q] - self.lo[q];

            // Harris pass one: relaxed bound on the step.
            let tol = self.opts.feas_tol;
            let mut theta_max = f64::INFINITY;
            for p in 0..self.rows {
                let rate = dir * alpha[p];
                if rate.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let v = self.basis[p];
                let xv = self.x[v];
                let bound = if rate > 0.0 {
                    if self.lo[v].is_finite() {
                        (xv - self.lo[v] + tol) / rate
                    } else {
                        continue;
                    }
                } else if self.up[v].is_finite() {
                    (self.up[v] - xv + tol) / (-rate)
                } else {
                    continue;
                };
                theta_max = theta_max.min(bound);
            }

            // Pass two: among rows within the relaxed bound take the largest pivot.
            let mut leave: Option<(usize, f64, bool)> = None; // (row, exact ratio, to_upper)
            let mut best_pivot = 0.0;
            if theta_max.is_finite() {
                for p in 0..self.rows {
                    let rate = dir * alpha[p];
                    if rate.abs() <= self.opts.pivot_tol {
                        continue;
                    }
                    let v = self.basis[p];
                    let xv = self.x[v];
                    let (ratio, to_upper) = if rate > 0.0 {
                        if !self.lo[v].is_finite() {
                            continue;
                        }
                        ((xv - self.lo[v]) / rate, false)
                    } else {
                        if !self.up[v].is_finite() {
                            continue;
                        }
                        ((self.up[v] - xv) / (-rate), true)
                    };
                    if ratio > theta_max {
                        continue;
                    }
                    let better = if bland {
                        leave.is_none_or(|(lp, lr, _)| {
                            ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && v < self.basis[lp])
                        })
                    } else {
                        rate.abs() > best_pivot
                    };
                    if better {
                        best_pivot = rate.abs();
                        leave = Some((p, ratio.max(0.0), to_upper));
                    }
                }
            }

            let flip = own_range.is_finite()
                && leave.is_none_or(|(_, ratio, _)| own_range <= ratio);
            if leave.is_none() && !flip {
                return Ok(PhaseOutcome::Unbounded);
            }
            let theta = if flip {
                own_range
            } else {
                leave.map(|(_, r, _)| r).unwrap_or(0.0)
            };

            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }

            // Apply the step.
            if theta != 0.0 {
                for p in 0..self.rows {
                    let v = self.basis[p];
                    self.x[v] -= dir * theta * alpha[p];
                }
            }
            if flip {
                if dir > 0.0 {
                    self.x[q] = self.up[q];
                    self.state[q] = VarState::AtUpper;
                } else {
                    self.x[q] = self.lo[q];
                    self.state[q] = VarState::AtLower;
                }
                continue;
            }
            self.x[q] += dir * theta;
            let (p, _, to_upper) = leave.expect("pivot row chosen");
            let out = self.basis[p];
            if self.kinds[out] == Kind::Artificial && self.up[out] == 0.0 {
                self.x[out] = 0.0;
                self.state[out] = VarState::Retired;
            } else if to_upper {
                self.x[out] = self.up[out];
                self.state[out] = VarState::AtUpper;
            } else {
                self.x[out] = self.lo[out];
                self.state[out] = VarState::AtLower;
            }
            self.pivot_update(p, &alpha);
            self.basis[p] = q;
            self.state[q] = VarState::Basic(p);
            self.since_refactor += 1;
        }
    }

    fn into_solution(self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let n = self.n_struct;
        let x = DVector::from_iterator(n, (0..n).map(|j| self.x[j] * self.col_scale[j]));
        let n_eq = self.n_eq;
        let n_in = self.rows - n_eq;
        let (eq_duals, ineq_duals, reduced_costs) = if status == LpStatus::Optimal {
            let y = self.duals(&self.cost);
            let yu: Vec<f64> = y.iter().zip(&self.row_scale).map(|(a, s)| a * s).collect();
            let eq = DVector::from_iterator(n_eq, yu[..n_eq].iter().copied());
            let ineq = DVector::from_iterator(n_in, yu[n_eq..].iter().copied());
            let mut d = lp.objective.clone();
            if n_eq > 0 {
                d -= lp.eq_matrix.tr_mul(&eq);
            }
            if n_in > 0 {
                d -= lp.ineq_matrix.tr_mul(&ineq);
            }
            (eq, ineq, d)
        } else {
            (DVector::zeros(n_eq), DVector::zeros(n_in), DVector::zeros(n))
        };
        let objective = lp.objective_value(&x);
        LpSolution {
            status,
            x,
            objective,
            eq_duals,
            ineq_duals,
            reduced_costs,
            iterations: self.iterations,
        }
    }
}
