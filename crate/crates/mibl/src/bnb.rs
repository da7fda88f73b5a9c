//! Branch-and-bound search for mixed-integer bilinear programs.
//!
//! Each node owns a copy of the variable box. Node processing runs interval
//! propagation (`tighten`), rebuilds the McCormick envelopes that became
//! stale, solves the LP relaxation warm from the previous basis, and then
//! either prunes, records an incumbent, or branches:
//!
//! * binaries first, most fractional, lowest index on ties;
//! * otherwise the product with the largest `|w - x*y|` violation, bisecting
//!   the factor whose box is widest relative to its original width, at the
//!   LP point clipped to the central 60 % of the box.
//!
//! Node selection is best-first on the relaxation bound, with depth-first
//! plunges until the first incumbent exists. Incumbents come from LP
//! solutions that happen to be integral and product-consistent, and from a
//! rounding heuristic that fixes binaries to their rounded LP values and
//! every product's y-factor to its LP value (which collapses the envelopes
//! to exact identities) and re-solves. Every incumbent is re-checked
//! against the original program before acceptance, so a loose envelope can
//! never smuggle an infeasible point into the result.
//!
//! The search is single-threaded and fully deterministic: equal bounds pop
//! in insertion order and all tie-breaks are by lowest index.

use crate::lp::{Engine, LpError, LpStatus};
use crate::mccormick::envelope_rows;
use crate::program::{MiblProgram, ProgramError, Row, INF};
use crate::tighten::propagate;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid program: {0}")]
    Program(#[from] ProgramError),
    #[error("LP engine failure: {0}")]
    Lp(#[from] LpError),
    #[error("relaxation reported unbounded despite finite boxes")]
    Unbounded,
}

#[derive(Debug, Error, PartialEq)]
pub enum BranchError {
    #[error("no branching candidate: solution is integral and product-consistent")]
    NoCandidate,
}

/// A search node: tightened bound vectors plus bookkeeping.
#[derive(Debug, Clone)]
pub struct BnbNode {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// Best known lower bound on this subtree (monotone down the tree).
    pub bound: f64,
    pub depth: u32,
}

impl BnbNode {
    pub fn root(program: &MiblProgram) -> Self {
        BnbNode {
            lb: program.lb().to_vec(),
            ub: program.ub().to_vec(),
            bound: -INF,
            depth: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative optimality gap at which the search stops.
    pub gap_tol: f64,
    /// Scaled feasibility tolerance for accepting incumbents.
    pub feastol: f64,
    /// Integrality tolerance on binaries.
    pub int_tol: f64,
    /// Safety margin for pruning against the incumbent.
    pub eps_prune: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    /// Run the rounding heuristic every this many nodes once an incumbent
    /// exists (it always runs while none does).
    pub heuristic_period: usize,
    /// Warm-start candidate, e.g. the previous receding-horizon solution.
    pub incumbent_hint: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-4,
            feastol: 1e-6,
            int_tol: 1e-6,
            eps_prune: 1e-9,
            time_limit: None,
            node_limit: 200_000,
            heuristic_period: 16,
            incumbent_hint: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Tree exhausted; the incumbent is optimal (gap 0 up to pruning slack).
    Optimal,
    /// Stopped because the relative gap fell below `gap_tol`.
    GapLimit,
    /// Wall-clock limit hit; `values` holds the best incumbent if any.
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct MiblSolution {
    pub status: SolveStatus,
    /// Best feasible point found, if any.
    pub values: Option<Vec<f64>>,
    /// Objective of `values` (NaN when none).
    pub objective: f64,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    /// (objective - bound) / max(1, |objective|); infinite when no incumbent.
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: Duration,
}

fn rel_gap(obj: f64, bound: f64) -> f64 {
    if !obj.is_finite() {
        return INF;
    }
    ((obj - bound) / obj.abs().max(1.0)).max(0.0)
}

/// Splits a node per the branching rules. `x` is the node's LP point.
pub fn branch(
    program: &MiblProgram,
    node: &BnbNode,
    x: &[f64],
    opts: &SolveOptions,
) -> Result<(BnbNode, BnbNode), BranchError> {
    // Binaries first, lowest fractional index. Binary blocks are laid out
    // stage-major in the intended use, so this resolves early stages before
    // late ones; propagation through the dynamics then does the most work.
    let mut best_bin: Option<(usize, f64)> = None;
    for j in program.binaries() {
        if node.lb[j] >= node.ub[j] {
            continue; // already fixed
        }
        let frac = (x[j] - x[j].round()).abs();
        if frac > opts.int_tol {
            best_bin = Some((j, frac));
            break;
        }
    }
    if let Some((j, _)) = best_bin {
        let mut down = node.clone();
        let mut up = node.clone();
        down.ub[j] = 0.0;
        down.lb[j] = 0.0;
        up.lb[j] = 1.0;
        up.ub[j] = 1.0;
        down.depth += 1;
        up.depth += 1;
        return Ok((down, up));
    }

    // Spatial branching on the worst product violation.
    let mut best_prod: Option<(usize, f64)> = None;
    for (q, p) in program.products().iter().enumerate() {
        let viol = (x[p.w] - x[p.x] * x[p.y]).abs();
        let scale = 1.0 + x[p.w].abs() + (x[p.x] * x[p.y]).abs();
        if viol / scale > opts.feastol {
            match best_prod {
                Some((_, v)) if v >= viol => {}
                _ => best_prod = Some((q, viol)),
            }
        }
    }
    let Some((q, _)) = best_prod else {
        return Err(BranchError::NoCandidate);
    };
    let p = program.products()[q];

    // Pick the factor with the wider box relative to its original width.
    let rel = |j: usize| {
        let orig = (program.ub()[j] - program.lb()[j]).max(1e-300);
        (node.ub[j] - node.lb[j]) / orig
    };
    let f = if rel(p.x) >= rel(p.y) { p.x } else { p.y };
    let (lo, hi) = (node.lb[f], node.ub[f]);
    let w = hi - lo;
    let split = x[f].clamp(lo + 0.2 * w, hi - 0.2 * w);

    let mut left = node.clone();
    let mut right = node.clone();
    left.ub[f] = split;
    right.lb[f] = split;
    left.depth += 1;
    right.depth += 1;
    Ok((left, right))
}

/// Per-product factor boxes currently baked into the engine's envelope rows.
struct McState {
    boxes: Vec<[f64; 4]>,
    first_row: usize,
}

impl McState {
    fn refresh(
        &mut self,
        engine: &mut Engine,
        program: &MiblProgram,
        q: usize,
        xl: f64,
        xu: f64,
        yl: f64,
        yu: f64,
    ) {
        let p = &program.products()[q];
        let rows = envelope_rows(p, xl, xu, yl, yu);
        for (k, row) in rows.iter().enumerate() {
            let r = self.first_row + 4 * q + k;
            for &(j, c) in &row.terms {
                engine.patch_coef(r, j, c);
            }
            engine.set_row_bounds(r, row.lo, row.hi);
        }
        self.boxes[q] = [xl, xu, yl, yu];
    }

    /// Brings product `q`'s envelope up to date for a node box, widening a
    /// little on validity refreshes so nearby nodes can share the rows.
    fn sync(
        &mut self,
        engine: &mut Engine,
        program: &MiblProgram,
        q: usize,
        lb: &[f64],
        ub: &[f64],
    ) {
        let p = &program.products()[q];
        let (nxl, nxu, nyl, nyu) = (lb[p.x], ub[p.x], lb[p.y], ub[p.y]);
        let [oxl, oxu, oyl, oyu] = self.boxes[q];
        // NaN marks a never-initialized envelope and must force a refresh.
        let fresh = self.boxes[q].iter().any(|v| v.is_nan());
        let outside = fresh || nxl < oxl || nxu > oxu || nyl < oyl || nyu > oyu;
        let much_tighter = !fresh
            && ((nxu - nxl) < 0.5 * (oxu - oxl) || (nyu - nyl) < 0.5 * (oyu - oyl));
        if !(outside || much_tighter) {
            return;
        }
        if outside && !much_tighter {
            // Validity refresh: widen beyond the node box (clipped to the
            // original box) to absorb future jumps around the tree.
            let pad = |lo: f64, hi: f64, olo: f64, ohi: f64| {
                let w = 0.1 * (hi - lo).max(1e-12);
                ((lo - w).max(olo), (hi + w).min(ohi))
            };
            let (xl, xu) = pad(nxl, nxu, program.lb()[p.x], program.ub()[p.x]);
            let (yl, yu) = pad(nyl, nyu, program.lb()[p.y], program.ub()[p.y]);
            self.refresh(engine, program, q, xl, xu, yl, yu);
        } else {
            self.refresh(engine, program, q, nxl, nxu, nyl, nyu);
        }
    }
}

struct Search<'a> {
    program: &'a MiblProgram,
    opts: &'a SolveOptions,
    engine: Engine,
    mc: McState,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: usize,
    start: Instant,
}

enum Evaled {
    Pruned,
    /// LP solution was feasible for the full program; subtree closed.
    Closed,
    Open(OpenNode),
}

struct OpenNode {
    node: BnbNode,
    x: Vec<f64>,
}

struct HeapEntry {
    bound: f64,
    seq: u64,
    open: OpenNode,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // BinaryHeap is a max-heap; invert so the lowest bound pops first,
    // insertion order on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<'a> Search<'a> {
    fn new(program: &'a MiblProgram, opts: &'a SolveOptions) -> Self {
        let n = program.num_vars();
        let mut rows = program.rows().to_vec();
        let first_row = rows.len();
        // Placeholder envelope rows; the sparsity pattern is fixed here and
        // coefficients are patched per node.
        for p in program.products() {
            for _ in 0..4 {
                rows.push(Row {
                    lo: -INF,
                    hi: INF,
                    terms: vec![(p.w, 1.0), (p.y, 0.0), (p.x, 0.0)],
                });
            }
        }
        let mut engine = Engine::new(n, &rows);
        engine.set_feastol(opts.feastol * 0.1);
        engine.set_objective(program.objective());
        let mc = McState {
            boxes: vec![[f64::NAN; 4]; program.products().len()],
            first_row,
        };
        Search {
            program,
            opts,
            engine,
            mc,
            incumbent: None,
            nodes: 0,
            start: Instant::now(),
        }
    }

    fn out_of_time(&self) -> bool {
        matches!(self.opts.time_limit, Some(lim) if self.start.elapsed() >= lim)
    }

    fn incumbent_obj(&self) -> f64 {
        self.incumbent.as_ref().map(|(o, _)| *o).unwrap_or(INF)
    }

    fn try_incumbent(&mut self, x: &[f64]) -> bool {
        let obj = self.program.objective_value(x);
        if obj >= self.incumbent_obj() {
            return false;
        }
        if self.program.infeasibility(x) > self.opts.feastol {
            return false;
        }
        self.incumbent = Some((obj, x.to_vec()));
        true
    }

    fn apply_node_bounds(&mut self, node: &BnbNode) {
        for q in 0..self.program.products().len() {
            self.mc.sync(&mut self.engine, self.program, q, &node.lb, &node.ub);
        }
        for j in 0..self.program.num_vars() {
            self.engine.set_var_bounds(j, node.lb[j], node.ub[j]);
        }
    }

    fn eval(&mut self, mut node: BnbNode) -> Result<Evaled, SolveError> {
        self.nodes += 1;
        if propagate(self.program, &mut node.lb, &mut node.ub, 5).is_err() {
            return Ok(Evaled::Pruned);
        }
        self.apply_node_bounds(&node);
        match self.engine.solve()? {
            LpStatus::Infeasible => return Ok(Evaled::Pruned),
            LpStatus::Unbounded => return Err(SolveError::Unbounded),
            LpStatus::Optimal => {}
        }
        let x = self.engine.structural_values();
        let obj = self.engine.objective_value();
        node.bound = node.bound.max(obj);
        if node.bound >= self.incumbent_obj() - self.opts.eps_prune {
            return Ok(Evaled::Pruned);
        }

        // The relaxation solution may already be feasible for the program.
        if self.point_is_integral(&x) && self.products_ok(&x) {
            self.try_incumbent(&x);
            return Ok(Evaled::Closed);
        }

        let run_heur = self.incumbent.is_none()
            || (self.opts.heuristic_period > 0 && self.nodes % self.opts.heuristic_period == 0);
        if run_heur {
            if let Some(cand) = self.rounding_heuristic(&node, &x)? {
                self.try_incumbent(&cand);
                if node.bound >= self.incumbent_obj() - self.opts.eps_prune {
                    return Ok(Evaled::Pruned);
                }
            }
        }

        Ok(Evaled::Open(OpenNode { node, x }))
    }

    fn point_is_integral(&self, x: &[f64]) -> bool {
        self.program
            .binaries()
            .all(|j| (x[j] - x[j].round()).abs() <= self.opts.int_tol)
    }

    fn products_ok(&self, x: &[f64]) -> bool {
        self.program.products().iter().all(|p| {
            let err = (x[p.w] - x[p.x] * x[p.y]).abs();
            err / (1.0 + x[p.w].abs() + (x[p.x] * x[p.y]).abs()) <= self.opts.feastol
        })
    }

    /// Fix binaries to rounded LP values, then pin just enough product
    /// factors (at LP values clamped into the propagated box) that every
    /// product has one fixed factor, and re-solve. Propagation runs between
    /// pins so factors the constraints determine are never pinned twice,
    /// which keeps the dive as unconstrained as possible.
    fn rounding_heuristic(
        &mut self,
        node: &BnbNode,
        x: &[f64],
    ) -> Result<Option<Vec<f64>>, SolveError> {
        let mut lb = node.lb.clone();
        let mut ub = node.ub.clone();
        for j in self.program.binaries() {
            let v = x[j].round().clamp(lb[j], ub[j]);
            lb[j] = v;
            ub[j] = v;
        }
        if propagate(self.program, &mut lb, &mut ub, 3).is_err() {
            return Ok(None);
        }
        let fixed = |lb: &[f64], ub: &[f64], j: usize| {
            ub[j] - lb[j] <= 1e-7 * (1.0 + lb[j].abs().max(ub[j].abs()))
        };
        loop {
            let open: Vec<usize> = (0..self.program.products().len())
                .filter(|&q| {
                    let p = &self.program.products()[q];
                    !fixed(&lb, &ub, p.x) && !fixed(&lb, &ub, p.y)
                })
                .collect();
            if open.is_empty() {
                break;
            }
            // Pin the factor covering the most open products, lowest index
            // on ties.
            let mut best: Option<(usize, usize)> = None; // (count, var)
            for &q in &open {
                let p = &self.program.products()[q];
                for f in [p.x, p.y] {
                    let count = open
                        .iter()
                        .filter(|&&oq| {
                            let op = &self.program.products()[oq];
                            op.x == f || op.y == f
                        })
                        .count();
                    match best {
                        Some((c, v)) if (c, std::cmp::Reverse(v)) >= (count, std::cmp::Reverse(f)) => {}
                        _ => best = Some((count, f)),
                    }
                }
            }
            let (_, j) = best.expect("open products have factors");
            let v = x[j].clamp(lb[j], ub[j]);
            lb[j] = v;
            ub[j] = v;
            if propagate(self.program, &mut lb, &mut ub, 3).is_err() {
                return Ok(None);
            }
        }
        for q in 0..self.program.products().len() {
            self.mc.sync(&mut self.engine, self.program, q, &lb, &ub);
        }
        for j in 0..self.program.num_vars() {
            self.engine.set_var_bounds(j, lb[j], ub[j]);
        }
        match self.engine.solve()? {
            LpStatus::Optimal => Ok(Some(self.engine.structural_values())),
            _ => Ok(None),
        }
    }
}

/// Solves the program to the requested gap. Deterministic for fixed inputs.
pub fn solve(program: &MiblProgram, opts: &SolveOptions) -> Result<MiblSolution, SolveError> {
    program.validate()?;
    let mut s = Search::new(program, opts);

    if let Some(hint) = &opts.incumbent_hint {
        if hint.len() == program.num_vars() {
            s.try_incumbent(hint);
        }
    }

    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut dive: Option<OpenNode> = None;
    let mut hit_time = false;
    let mut hit_nodes = false;

    match s.eval(BnbNode::root(program))? {
        Evaled::Pruned => {
            if s.incumbent.is_none() {
                return Ok(MiblSolution {
                    status: SolveStatus::Infeasible,
                    values: None,
                    objective: f64::NAN,
                    bound: INF,
                    gap: INF,
                    nodes: s.nodes,
                    wall_time: s.start.elapsed(),
                });
            }
            // Root pruned against a hint: the hint is optimal within eps.
        }
        Evaled::Closed => {}
        Evaled::Open(open) => dive = Some(open),
    }

    loop {
        // Global bound over everything still open.
        let open_bound = dive
            .as_ref()
            .map(|o| o.node.bound)
            .into_iter()
            .chain(heap.peek().map(|e| e.bound))
            .fold(INF, f64::min);
        let inc = s.incumbent_obj();
        if open_bound.is_infinite() && open_bound > 0.0 {
            break; // exhausted
        }
        if rel_gap(inc, open_bound) <= opts.gap_tol {
            break;
        }
        if s.out_of_time() {
            hit_time = true;
            break;
        }
        if s.nodes >= opts.node_limit {
            hit_nodes = true;
            break;
        }

        let current = match dive.take() {
            Some(o) => o,
            None => match heap.pop() {
                Some(e) => e.open,
                None => break,
            },
        };
        if current.node.bound >= s.incumbent_obj() - opts.eps_prune {
            continue;
        }

        let children = match branch(program, &current.node, &current.x, opts) {
            Ok(pair) => pair,
            Err(BranchError::NoCandidate) => {
                // Integral and product-consistent: eval() normally catches
                // this; reaching here means tolerances disagreed. Accept it.
                s.try_incumbent(&current.x);
                continue;
            }
        };

        let parent_bound = current.node.bound;
        let mut opened: Vec<OpenNode> = Vec::with_capacity(2);
        for mut child in [children.0, children.1] {
            child.bound = parent_bound;
            match s.eval(child)? {
                Evaled::Open(o) => opened.push(o),
                Evaled::Pruned | Evaled::Closed => {}
            }
        }
        // Always plunge on the better child: consecutive LPs stay similar,
        // so warm starts pay off, and full depth closes subtrees early. The
        // sibling goes to the best-first heap for the restart.
        if !opened.is_empty() {
            opened.sort_by(|a, b| a.node.bound.total_cmp(&b.node.bound));
            let best = opened.remove(0);
            dive = Some(best);
        }
        for o in opened {
            heap.push(HeapEntry { bound: o.node.bound, seq, open: o });
            seq += 1;
        }
    }

    let open_bound = dive
        .as_ref()
        .map(|o| o.node.bound)
        .into_iter()
        .chain(heap.iter().map(|e| e.bound))
        .fold(INF, f64::min);
    let wall = s.start.elapsed();
    if std::env::var_os("MIBL_STATS").is_some() {
        let st = s.engine.stats;
        eprintln!(
            "bnb: nodes={} wall={:?} lp_solves={} iters={} rebuilds={} repairs={} resets={}",
            s.nodes, wall, st.solves, st.iterations, st.rebuilds, st.repairs, st.resets
        );
    }
    match s.incumbent {
        Some((obj, values)) => {
            let bound = open_bound.min(obj);
            let gap = rel_gap(obj, bound);
            let exhausted = open_bound.is_infinite() && open_bound > 0.0;
            let status = if hit_time || hit_nodes {
                SolveStatus::TimeLimit
            } else if exhausted {
                SolveStatus::Optimal
            } else {
                SolveStatus::GapLimit
            };
            Ok(MiblSolution {
                status,
                values: Some(values),
                objective: obj,
                bound,
                gap,
                nodes: s.nodes,
                wall_time: wall,
            })
        }
        None => Ok(MiblSolution {
            status: if hit_time || hit_nodes {
                SolveStatus::TimeLimit
            } else {
                SolveStatus::Infeasible
            },
            values: None,
            objective: f64::NAN,
            bound: open_bound,
            gap: INF,
            nodes: s.nodes,
            wall_time: wall,
        }),
    }
}
