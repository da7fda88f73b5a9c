//! Bounded-variable primal simplex over ranged rows.
//!
//! The constraint system is held as `A x - s = 0` where every row gets a
//! logical variable `s_i` bounded by the row range `[lo_i, hi_i]`. The
//! logicals double as the starting basis (`B = -I`), so a cold start needs
//! no factorization. Feasibility is restored by a composite phase 1 that
//! minimizes the total bound violation of basic variables, then phase 2
//! optimizes the true objective.
//!
//! The basis inverse is kept explicitly (dense, row-major) and updated by
//! rank-one pivots; it is refactorized from scratch every few hundred
//! pivots, or when the branch-and-bound layer rewrites coefficients of a
//! column that sits in the basis. Ties in pricing and in the ratio test
//! break toward the lowest variable index, which makes runs bit-for-bit
//! reproducible; a Bland fallback engages after a stall of degenerate
//! pivots so the iteration cap is never reached in practice.

use crate::program::{Row, INF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("iteration cap reached ({0} iterations)")]
    IterationLimit(usize),
    #[error("basis refactorization failed (singular basis)")]
    SingularBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// A concrete linear program: boxed variables, ranged rows, linear objective.
#[derive(Debug, Clone)]
pub struct Lp {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<Row>,
    pub obj: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful for `Optimal`).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers from the final basis; marginal objective change per
    /// unit increase of the row activity. Diagnostic only.
    pub row_duals: Vec<f64>,
}

/// Solves a standalone LP with a cold start.
pub fn solve_lp(lp: &Lp) -> Result<LpSolution, LpError> {
    let mut eng = Engine::new(lp.lb.len(), &lp.rows);
    for j in 0..lp.lb.len() {
        eng.set_var_bounds(j, lp.lb[j], lp.ub[j]);
    }
    eng.set_objective(&lp.obj);
    eng.reset_basis();
    let status = eng.solve()?;
    Ok(LpSolution {
        status,
        x: eng.structural_values(),
        objective: eng.objective_value(),
        row_duals: eng.row_duals(),
    })
}

const DJ_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STALL: usize = 40;
const REFACTOR_EVERY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLb,
    AtUb,
    /// Nonbasic free variable pinned at zero (no finite bound to sit on).
    Free,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct EngineStats {
    pub solves: usize,
    pub iterations: usize,
    pub rebuilds: usize,
    pub repairs: usize,
    pub resets: usize,
}

pub(crate) struct Engine {
    /// Cumulative pivot/rebuild counters, read by the search for tuning.
    pub stats: EngineStats,
    m: usize,
    n: usize,
    /// Structural columns of A, sparse by row.
    cols: Vec<Vec<(usize, f64)>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    vals: Vec<f64>,
    /// Row-major m*m basis inverse.
    binv: Vec<f64>,
    pivots: usize,
    needs_refactor: bool,
    /// Basic columns whose coefficients were patched since the last solve;
    /// repaired by rank-one inverse updates, full rebuild as fallback.
    dirty_basic: Vec<usize>,
    feastol: f64,
}

impl Engine {
    pub fn new(n: usize, rows: &[Row]) -> Self {
        let m = rows.len();
        let mut cols = vec![Vec::new(); n];
        let mut lb = vec![0.0; n + m];
        let mut ub = vec![0.0; n + m];
        for (i, row) in rows.iter().enumerate() {
            for &(j, c) in &row.terms {
                cols[j].push((i, c));
            }
            lb[n + i] = row.lo;
            ub[n + i] = row.hi;
        }
        let mut eng = Engine {
            stats: EngineStats::default(),
            m,
            n,
            cols,
            lb,
            ub,
            obj: vec![0.0; n],
            basis: (0..m).map(|i| n + i).collect(),
            state: vec![VarState::AtLb; n + m],
            vals: vec![0.0; n + m],
            binv: vec![0.0; m * m],
            pivots: 0,
            needs_refactor: false,
            dirty_basic: Vec::new(),
            feastol: 1e-7,
        };
        eng.reset_basis();
        eng
    }

    pub fn set_feastol(&mut self, tol: f64) {
        self.feastol = tol;
    }

    pub fn set_var_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lb[j] = lo;
        self.ub[j] = hi;
    }

    pub fn set_row_bounds(&mut self, i: usize, lo: f64, hi: f64) {
        self.lb[self.n + i] = lo;
        self.ub[self.n + i] = hi;
    }

    pub fn set_objective(&mut self, obj: &[f64]) {
        self.obj.copy_from_slice(obj);
    }

    /// Rewrites the coefficient of `var` in `row` in place. The entry must
    /// already exist (rows never change sparsity pattern after `new`).
    /// A patched basic column is queued for an inverse repair at the next
    /// solve; nonbasic columns need nothing.
    pub fn patch_coef(&mut self, row: usize, var: usize, value: f64) {
        let entry = self.cols[var]
            .iter_mut()
            .find(|e| e.0 == row)
            .expect("patched entry must exist");
        if entry.1 != value {
            entry.1 = value;
            if matches!(self.state[var], VarState::Basic(_)) {
                self.needs_refactor = true;
                if !self.dirty_basic.contains(&var) {
                    self.dirty_basic.push(var);
                }
            }
        }
    }

    /// Replaces each patched basic column in the inverse by a rank-one
    /// update. Fails when a replacement pivot is too small to trust, in
    /// which case the caller falls back to a full rebuild.
    fn repair_patched_columns(&mut self) -> Result<(), LpError> {
        self.stats.repairs += 1;
        let mut h = vec![0.0; self.m];
        while let Some(j) = self.dirty_basic.pop() {
            let VarState::Basic(r) = self.state[j] else { continue };
            self.ftran(j, &mut h);
            if h[r].abs() < 1e-8 {
                return Err(LpError::SingularBasis);
            }
            self.update_binv(r, &h);
        }
        self.needs_refactor = false;
        Ok(())
    }

    /// Drops back to the all-logical basis (identity inverse, no LU needed).
    pub fn reset_basis(&mut self) {
        self.stats.resets += 1;
        for i in 0..self.m {
            self.basis[i] = self.n + i;
        }
        for j in 0..self.n + self.m {
            self.state[j] = self.initial_state(j);
        }
        for i in 0..self.m {
            self.state[self.n + i] = VarState::Basic(i);
        }
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.m {
            self.binv[i * self.m + i] = -1.0;
        }
        self.needs_refactor = false;
        self.dirty_basic.clear();
        self.pivots = 0;
    }

    fn initial_state(&self, j: usize) -> VarState {
        if self.lb[j].is_finite() {
            VarState::AtLb
        } else if self.ub[j].is_finite() {
            VarState::AtUb
        } else {
            VarState::Free
        }
    }

    fn column(&self, j: usize) -> Column<'_> {
        if j < self.n {
            Column::Structural(&self.cols[j])
        } else {
            Column::Logical(j - self.n)
        }
    }

    /// h = B^-1 * a_j
    fn ftran(&self, j: usize, h: &mut [f64]) {
        h.iter_mut().for_each(|v| *v = 0.0);
        match self.column(j) {
            Column::Structural(entries) => {
                for i in 0..self.m {
                    let row = &self.binv[i * self.m..(i + 1) * self.m];
                    let mut acc = 0.0;
                    for &(r, v) in entries {
                        acc += v * row[r];
                    }
                    h[i] = acc;
                }
            }
            Column::Logical(r) => {
                for i in 0..self.m {
                    h[i] = -self.binv[i * self.m + r];
                }
            }
        }
    }

    /// y = (B^-1)' * c_B given as sparse (row, cost) pairs.
    fn btran_sparse(&self, cb: &[(usize, f64)], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &(k, c) in cb {
            let row = &self.binv[k * self.m..(k + 1) * self.m];
            for i in 0..self.m {
                y[i] += c * row[i];
            }
        }
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        match self.column(j) {
            Column::Structural(entries) => entries.iter().map(|&(r, v)| v * y[r]).sum(),
            Column::Logical(r) => -y[r],
        }
    }

    /// Recomputes basic values from the nonbasic point: B v_B = -N v_N.
    fn recompute_basics(&mut self) {
        let mut s = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLb => self.vals[j] = self.lb[j],
                VarState::AtUb => self.vals[j] = self.ub[j],
                VarState::Free => self.vals[j] = 0.0,
            }
            let v = self.vals[j];
            if v == 0.0 {
                continue;
            }
            match self.column(j) {
                Column::Structural(entries) => {
                    for &(r, c) in entries {
                        s[r] += c * v;
                    }
                }
                Column::Logical(r) => s[r] -= v,
            }
        }
        for i in 0..self.m {
            let row = &self.binv[i * self.m..(i + 1) * self.m];
            let mut acc = 0.0;
            for r in 0..self.m {
                acc -= row[r] * s[r];
            }
            self.vals[self.basis[i]] = acc;
        }
    }

    fn bound_tol(&self, j: usize) -> f64 {
        let scale = 1.0
            + self.lb[j].abs().min(self.ub[j].abs().min(1e100))
            + self.vals[j].abs().min(1e100);
        self.feastol * scale.min(1e6)
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.vals[j];
        let tol = self.bound_tol(j);
        if self.lb[j].is_finite() && v < self.lb[j] - tol {
            self.lb[j] - v
        } else if self.ub[j].is_finite() && v > self.ub[j] + tol {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    pub fn rebuild_factorization(&mut self) -> Result<(), LpError> {
        let mut b = nalgebra::DMatrix::<f64>::zeros(self.m, self.m);
        for (r, &bj) in self.basis.iter().enumerate() {
            match self.column(bj) {
                Column::Structural(entries) => {
                    for &(i, v) in entries {
                        b[(i, r)] = v;
                    }
                }
                Column::Logical(i) => b[(i, r)] = -1.0,
            }
        }
        self.stats.rebuilds += 1;
        match b.lu().try_inverse() {
            Some(inv) => {
                for i in 0..self.m {
                    for k in 0..self.m {
                        self.binv[i * self.m + k] = inv[(i, k)];
                    }
                }
                self.needs_refactor = false;
                self.dirty_basic.clear();
                self.pivots = 0;
                Ok(())
            }
            None => Err(LpError::SingularBasis),
        }
    }

    /// Main entry: restores feasibility if needed, then optimizes.
    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        self.stats.solves += 1;
        if self.needs_refactor {
            let repaired = !self.dirty_basic.is_empty() && self.repair_patched_columns().is_ok();
            if !repaired && self.needs_refactor && self.rebuild_factorization().is_err() {
                // A stale basis can degenerate after coefficient patches;
                // the logical basis always works.
                self.reset_basis();
            }
        }
        self.recompute_basics();
        if self.total_infeasibility() > 0.0 {
            match self.run_phase(true)? {
                LpStatus::Optimal => {}
                other => return Ok(other),
            }
            if self.total_infeasibility() > 0.0 {
                return Ok(LpStatus::Infeasible);
            }
        }
        self.run_phase(false)
    }

    fn total_infeasibility(&self) -> f64 {
        self.basis.iter().map(|&b| self.infeasibility(b)).sum()
    }

    fn phase_costs(&self, phase1: bool) -> Vec<(usize, f64)> {
        let mut cb = Vec::new();
        for (r, &b) in self.basis.iter().enumerate() {
            let c = if phase1 {
                let v = self.vals[b];
                let tol = self.bound_tol(b);
                if self.lb[b].is_finite() && v < self.lb[b] - tol {
                    -1.0
                } else if self.ub[b].is_finite() && v > self.ub[b] + tol {
                    1.0
                } else {
                    0.0
                }
            } else if b < self.n {
                self.obj[b]
            } else {
                0.0
            };
            if c != 0.0 {
                cb.push((r, c));
            }
        }
        cb
    }

    fn nonbasic_cost(&self, j: usize, phase1: bool) -> f64 {
        if phase1 || j >= self.n {
            0.0
        } else {
            self.obj[j]
        }
    }

    fn run_phase(&mut self, phase1: bool) -> Result<LpStatus, LpError> {
        struct Cand {
            r: usize,
            rate: f64,
            exact: f64,
            hits_upper: bool,
        }
        let cap = 20_000 + 200 * self.m;
        let mut y = vec![0.0; self.m];
        let mut h = vec![0.0; self.m];
        let mut cands: Vec<Cand> = Vec::with_capacity(self.m);
        let mut degen_streak = 0usize;
        let mut bland = false;

        let trace = std::env::var_os("MIBL_TRACE").is_some();
        for _iter in 0..cap {
            self.stats.iterations += 1;
            if phase1 && self.total_infeasibility() == 0.0 {
                return Ok(LpStatus::Optimal);
            }
            if trace && _iter % 5000 == 0 {
                eprintln!(
                    "iter {} phase1={} infeas={:.6e} degen_streak={} bland={}",
                    _iter,
                    phase1,
                    self.total_infeasibility(),
                    degen_streak,
                    bland
                );
            }
            let cb = self.phase_costs(phase1);
            self.btran_sparse(&cb, &mut y);

            // Pricing.
            let mut enter: Option<(usize, f64, f64)> = None; // (var, |d|, dir)
            for j in 0..self.n + self.m {
                let (dir, eligible_d) = match self.state[j] {
                    VarState::Basic(_) => continue,
                    VarState::AtLb => (1.0, -DJ_TOL),
                    VarState::AtUb => (-1.0, DJ_TOL),
                    VarState::Free => (0.0, 0.0),
                };
                let d = self.nonbasic_cost(j, phase1) - self.dot_col(j, &y);
                let (dir, score) = if dir == 0.0 {
                    if d < -DJ_TOL {
                        (1.0, -d)
                    } else if d > DJ_TOL {
                        (-1.0, d)
                    } else {
                        continue;
                    }
                } else if dir > 0.0 {
                    if d < eligible_d {
                        (1.0, -d)
                    } else {
                        continue;
                    }
                } else if d > eligible_d {
                    (-1.0, d)
                } else {
                    continue;
                };
                if bland {
                    enter = Some((j, score, dir));
                    break;
                }
                match enter {
                    Some((_, best, _)) if best >= score => {}
                    _ => enter = Some((j, score, dir)),
                }
            }

            let Some((j, _, dir)) = enter else {
                // No improving direction: optimal for this phase's objective.
                return if phase1 {
                    Ok(LpStatus::Optimal) // caller re-checks residual infeasibility
                } else {
                    Ok(LpStatus::Optimal)
                };
            };

            self.ftran(j, &mut h);

            // Harris two-pass ratio test. Pass 1 collects every blocking
            // candidate and the most permissive step that overshoots each
            // blocker's bound by at most its feasibility tolerance. Pass 2
            // picks the best-conditioned pivot that stays within that step,
            // which keeps tiny pivots out of the inverse. Bland mode uses
            // the exact textbook test with lowest-index ties instead; the
            // cycling-freedom argument needs both rule halves.
            let own_range = self.ub[j] - self.lb[j];
            let mut theta_max = if own_range.is_finite() { own_range } else { INF };
            cands.clear();
            for r in 0..self.m {
                let rate = -dir * h[r];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[r];
                let v = self.vals[b];
                let tol = self.bound_tol(b);
                let below = phase1 && self.lb[b].is_finite() && v < self.lb[b] - tol;
                let above = phase1 && self.ub[b].is_finite() && v > self.ub[b] + tol;
                let target = if rate > 0.0 {
                    if below {
                        // Rising toward its violated lower bound: blocks there.
                        Some((self.lb[b], false))
                    } else if above {
                        // Already past the upper bound and rising away: the
                        // phase-1 cost prices this, it never blocks.
                        None
                    } else if self.ub[b].is_finite() {
                        Some((self.ub[b], true))
                    } else {
                        None
                    }
                } else if above {
                    Some((self.ub[b], true))
                } else if below {
                    None
                } else if self.lb[b].is_finite() {
                    Some((self.lb[b], false))
                } else {
                    None
                };
                let Some((bound, hits_upper)) = target else { continue };
                let exact = ((bound - v) / rate).max(0.0);
                let relaxed = if bland { exact } else { exact + tol / rate.abs() };
                theta_max = theta_max.min(relaxed);
                cands.push(Cand { r, rate: rate.abs(), exact, hits_upper });
            }

            let mut best_step = if own_range.is_finite() { own_range } else { INF };
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |rate|, hits_upper)
            for c in &cands {
                if c.exact > theta_max {
                    continue;
                }
                let take = match leave {
                    None => c.exact <= best_step,
                    Some((lr, lrate, _)) => {
                        if bland {
                            // Textbook: strictly smaller step wins, ties go to
                            // the lowest leaving variable index.
                            c.exact < best_step - 1e-12
                                || (c.exact <= best_step + 1e-12
                                    && self.basis[c.r] < self.basis[lr])
                        } else {
                            c.rate > lrate
                        }
                    }
                };
                if take {
                    best_step = if bland { best_step.min(c.exact) } else { c.exact };
                    leave = Some((c.r, c.rate, c.hits_upper));
                }
            }
            if leave.is_none() && best_step.is_infinite() {
                return Ok(LpStatus::Unbounded);
            }
            if best_step <= 1e-10 {
                degen_streak += 1;
                if degen_streak > DEGEN_STALL {
                    bland = true;
                }
            } else {
                degen_streak = 0;
                bland = false;
            }

            match leave {
                None => {
                    // Entering variable runs to its opposite bound: bound flip.
                    let delta = dir * best_step;
                    for r in 0..self.m {
                        let b = self.basis[r];
                        self.vals[b] -= delta * h[r];
                    }
                    self.vals[j] += delta;
                    self.state[j] = match self.state[j] {
                        VarState::AtLb => VarState::AtUb,
                        VarState::AtUb => VarState::AtLb,
                        s => s,
                    };
                }
                Some((r, _, hits_upper)) => {
                    let delta = dir * best_step;
                    for i in 0..self.m {
                        let b = self.basis[i];
                        self.vals[b] -= delta * h[i];
                    }
                    self.vals[j] += delta;
                    let leaving = self.basis[r];
                    // Snap the leaving variable exactly onto its bound.
                    self.vals[leaving] = if hits_upper { self.ub[leaving] } else { self.lb[leaving] };
                    self.state[leaving] = if hits_upper { VarState::AtUb } else { VarState::AtLb };
                    self.basis[r] = j;
                    self.state[j] = VarState::Basic(r);
                    self.update_binv(r, &h);
                    self.pivots += 1;
                    if self.pivots >= REFACTOR_EVERY {
                        if self.rebuild_factorization().is_ok() {
                            // Snap accumulated drift out of the basic values.
                            self.recompute_basics();
                        } else {
                            // A singular basis restarts from the logical one;
                            // Bland pivoting then forces a different path, a
                            // plain restart would replay the same pivots.
                            self.reset_basis();
                            self.recompute_basics();
                            bland = true;
                            degen_streak = 0;
                        }
                    }
                }
            }
        }
        if let Some(path) = std::env::var_os("MIBL_DUMP_LP") {
            let _ = std::fs::write(path, self.dump_text(phase1));
        }
        Err(LpError::IterationLimit(cap))
    }

    // Temporary diagnostic; serializes the live LP so a cap failure can be
    // replayed cold.
    fn dump_text(&self, phase1: bool) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "phase1={phase1} n={} m={}", self.n, self.m);
        for j in 0..self.n {
            let _ = writeln!(s, "var {} {:e} {:e} {:e}", j, self.lb[j], self.ub[j], self.obj[j]);
        }
        for i in 0..self.m {
            let _ = write!(s, "row {} {:e} {:e}", i, self.lb[self.n + i], self.ub[self.n + i]);
            for (j, col) in self.cols.iter().enumerate() {
                for &(r, c) in col {
                    if r == i {
                        let _ = write!(s, " {}:{:e}", j, c);
                    }
                }
            }
            let _ = writeln!(s);
        }
        s
    }

    /// Rank-one inverse update after replacing the basis column in row `r`
    /// with a column whose ftran image is `h`.
    fn update_binv(&mut self, r: usize, h: &[f64]) {
        let m = self.m;
        let alpha = h[r];
        let inv_alpha = 1.0 / alpha;
        // Row r scales; every other row i subtracts h_i * (new row r).
        for k in 0..m {
            self.binv[r * m + k] *= inv_alpha;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = h[i];
            if f == 0.0 {
                continue;
            }
            let (head, tail) = self.binv.split_at_mut(r.max(i) * m);
            let (src, dst) = if r < i {
                (&head[r * m..r * m + m], &mut tail[..m])
            } else {
                (&tail[..m], &mut head[i * m..i * m + m])
            };
            // src is row r after scaling, dst is row i.
            for k in 0..m {
                dst[k] -= f * src[k];
            }
        }
    }

    pub fn structural_values(&self) -> Vec<f64> {
        self.vals[..self.n].to_vec()
    }

    pub fn objective_value(&self) -> f64 {
        (0..self.n).map(|j| self.obj[j] * self.vals[j]).sum()
    }

    pub fn row_duals(&self) -> Vec<f64> {
        let cb = self.phase_costs(false);
        let mut y = vec![0.0; self.m];
        self.btran_sparse(&cb, &mut y);
        y
    }
}

enum Column<'a> {
    Structural(&'a [(usize, f64)]),
    Logical(usize),
}
