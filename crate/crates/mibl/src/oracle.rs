//! Exhaustive reference solver for small programs.
//!
//! Strategy: enumerate every consistent assignment of the binaries
//! (one-hot groups are detected so only their members are enumerated, not
//! all 2^k combinations), then eliminate the bilinear terms per pattern.
//! After fixing a pattern, interval propagation usually pins several
//! variables outright; a small set of remaining "free factors" is chosen so
//! that every product has at least one fixed factor, those are swept over a
//! grid, and each grid point becomes a pure LP in which `w = x*y` turns
//! into the linear row `w - v*x = 0` with `v` the fixed factor value.
//! Grid champions are polished by golden-section coordinate descent.
//!
//! None of the envelope or branch-and-bound machinery is used here, so the
//! result is an independent cross-check for the main solver on instances
//! small enough to enumerate.

use crate::lp::{solve_lp, Lp, LpError, LpStatus};
use crate::program::{MiblProgram, Row, INF};
use crate::tighten::propagate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("too many binary patterns to enumerate ({0})")]
    TooManyPatterns(usize),
    #[error("needs {0} grid dimensions; the reference caps at {max}", max = MAX_FREE)]
    TooManyFreeFactors(usize),
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub values: Vec<f64>,
}

const MAX_PATTERNS: usize = 4096;
const MAX_FREE: usize = 6;
/// A variable whose box is this narrow (relative to scale) counts as fixed.
/// Must exceed twice the padding `tighten::propagate` puts on derived
/// bounds, or a value pinned by interval arithmetic never registers.
const FIX_TOL: f64 = 1e-7;

fn is_fixed(lo: f64, hi: f64) -> bool {
    hi - lo <= FIX_TOL * (1.0 + lo.abs().max(hi.abs()))
}

/// Detects rows of the shape `sum of binaries == 1` and returns the groups,
/// plus the binaries not in any group.
fn one_hot_groups(program: &MiblProgram) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut grouped = vec![false; program.num_vars()];
    let mut groups = Vec::new();
    for row in program.rows() {
        if (row.lo - 1.0).abs() > 1e-12 || (row.hi - 1.0).abs() > 1e-12 {
            continue;
        }
        let all_unit_binaries = row
            .terms
            .iter()
            .all(|&(j, c)| program.is_binary(j) && (c - 1.0).abs() <= 1e-12 && !grouped[j]);
        if !all_unit_binaries || row.terms.is_empty() {
            continue;
        }
        for &(j, _) in &row.terms {
            grouped[j] = true;
        }
        groups.push(row.terms.iter().map(|&(j, _)| j).collect());
    }
    let free = program
        .binaries()
        .filter(|&j| !grouped[j])
        .collect();
    (groups, free)
}

/// All binary assignments consistent with the one-hot groups, as
/// (variable, value) fixings. Free binaries take both values.
fn binary_patterns(program: &MiblProgram) -> Result<Vec<Vec<(usize, f64)>>, OracleError> {
    let (groups, free) = one_hot_groups(program);
    let mut count = 1usize;
    for g in &groups {
        count = count.saturating_mul(g.len());
    }
    count = count.saturating_mul(1usize << free.len().min(63));
    if count > MAX_PATTERNS {
        return Err(OracleError::TooManyPatterns(count));
    }

    let mut patterns: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for g in &groups {
        let mut next = Vec::with_capacity(patterns.len() * g.len());
        for pat in &patterns {
            for &on in g {
                let mut p = pat.clone();
                for &j in g {
                    p.push((j, if j == on { 1.0 } else { 0.0 }));
                }
                next.push(p);
            }
        }
        patterns = next;
    }
    for &j in &free {
        let mut next = Vec::with_capacity(patterns.len() * 2);
        for pat in &patterns {
            for v in [0.0, 1.0] {
                let mut p = pat.clone();
                p.push((j, v));
                next.push(p);
            }
        }
        patterns = next;
    }
    Ok(patterns)
}

/// Greedy hitting set: picks variables to enumerate so that, after constant
/// propagation through the products, every product has a fixed factor.
fn free_factors(
    program: &MiblProgram,
    lb: &[f64],
    ub: &[f64],
) -> Result<Vec<usize>, OracleError> {
    let n = program.num_vars();
    let base_fixed: Vec<bool> = (0..n).map(|j| is_fixed(lb[j], ub[j])).collect();

    // Closure of "fixed" under product identities: two pinned slots pin the
    // third, provided a division never crosses zero.
    let close = |mut fixed: Vec<bool>| -> Vec<bool> {
        loop {
            let mut changed = false;
            for p in program.products() {
                let excl0 = |j: usize| lb[j] > FIX_TOL || ub[j] < -FIX_TOL;
                if fixed[p.x] && fixed[p.y] && !fixed[p.w] {
                    fixed[p.w] = true;
                    changed = true;
                }
                if fixed[p.w] && fixed[p.x] && !fixed[p.y] && excl0(p.x) {
                    fixed[p.y] = true;
                    changed = true;
                }
                if fixed[p.w] && fixed[p.y] && !fixed[p.x] && excl0(p.y) {
                    fixed[p.x] = true;
                    changed = true;
                }
            }
            if !changed {
                return fixed;
            }
        }
    };

    let covered = |fixed: &[bool]| -> Vec<bool> {
        program
            .products()
            .iter()
            .map(|p| fixed[p.x] || fixed[p.y])
            .collect()
    };

    let mut chosen = Vec::new();
    let mut fixed = close(base_fixed);
    loop {
        let cov = covered(&fixed);
        if cov.iter().all(|&c| c) {
            return Ok(chosen);
        }
        if chosen.len() == MAX_FREE {
            return Err(OracleError::TooManyFreeFactors(chosen.len() + 1));
        }
        // Candidates: factors of uncovered products. Score by how many
        // products a choice covers after propagation; lowest index on ties.
        let mut best: Option<(usize, usize)> = None;
        let mut cand: Vec<usize> = Vec::new();
        for (q, p) in program.products().iter().enumerate() {
            if !cov[q] {
                cand.push(p.x);
                cand.push(p.y);
            }
        }
        cand.sort_unstable();
        cand.dedup();
        for &v in &cand {
            let mut f = fixed.clone();
            f[v] = true;
            let f = close(f);
            let gain = covered(&f).iter().filter(|&&c| c).count();
            match best {
                Some((_, g)) if g >= gain => {}
                _ => best = Some((v, gain)),
            }
        }
        let (v, _) = best.expect("uncovered product implies candidates exist");
        chosen.push(v);
        fixed[v] = true;
        fixed = close(fixed);
    }
}

/// LP value of the program with boxes `lb/ub`, bilinear terms replaced by
/// substitution rows. Returns None if some product still has no fixed
/// factor (the grid point cannot be evaluated exactly) or the LP is
/// infeasible.
fn eval_point(
    program: &MiblProgram,
    lb: &[f64],
    ub: &[f64],
) -> Result<Option<OracleResult>, LpError> {
    let mut rows = program.rows().to_vec();
    for p in program.products() {
        let (xl, xu) = (lb[p.x], ub[p.x]);
        let (yl, yu) = (lb[p.y], ub[p.y]);
        if is_fixed(yl, yu) {
            let v = 0.5 * (yl + yu);
            rows.push(Row::eq(vec![(p.w, 1.0), (p.x, -v)], 0.0));
        } else if is_fixed(xl, xu) {
            let v = 0.5 * (xl + xu);
            rows.push(Row::eq(vec![(p.w, 1.0), (p.y, -v)], 0.0));
        } else {
            return Ok(None);
        }
    }
    let lp = Lp {
        lb: lb.to_vec(),
        ub: ub.to_vec(),
        rows,
        obj: program.objective().to_vec(),
    };
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(OracleResult {
            objective: sol.objective,
            values: sol.x,
        })),
        _ => Ok(None),
    }
}

/// Fixes `factors` to `vals` on top of the pattern boxes, propagates, and
/// evaluates. Infeasible or non-evaluable points come back as None.
fn eval_assignment(
    program: &MiblProgram,
    pat_lb: &[f64],
    pat_ub: &[f64],
    factors: &[usize],
    vals: &[f64],
) -> Result<Option<OracleResult>, LpError> {
    let mut lb = pat_lb.to_vec();
    let mut ub = pat_ub.to_vec();
    for (&f, &v) in factors.iter().zip(vals) {
        let v = v.clamp(lb[f], ub[f]);
        lb[f] = v;
        ub[f] = v;
    }
    if propagate(program, &mut lb, &mut ub, 6).is_err() {
        return Ok(None);
    }
    eval_point(program, &lb, &ub)
}

fn golden_min(
    mut a: f64,
    mut b: f64,
    mut g: impl FnMut(f64) -> Result<f64, LpError>,
) -> Result<f64, LpError> {
    const PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - PHI * (b - a);
    let mut x2 = a + PHI * (b - a);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    for _ in 0..40 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - PHI * (b - a);
            f1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + PHI * (b - a);
            f2 = g(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Global reference solution by exhaustive enumeration. `grid_density` is
/// the number of sweep points per free factor (clamped to at least 3).
/// Returns None when the program is infeasible.
pub fn brute_force_reference(
    program: &MiblProgram,
    grid_density: usize,
) -> Result<Option<OracleResult>, OracleError> {
    let density = grid_density.max(3);
    let patterns = binary_patterns(program)?;
    let mut best: Option<OracleResult> = None;

    for pattern in &patterns {
        let mut lb = program.lb().to_vec();
        let mut ub = program.ub().to_vec();
        for &(j, v) in pattern {
            lb[j] = v;
            ub[j] = v;
        }
        if propagate(program, &mut lb, &mut ub, 6).is_err() {
            continue;
        }
        let factors = free_factors(program, &lb, &ub)?;

        // Cartesian grid sweep over the free factors.
        let mut champion: Option<(Vec<f64>, OracleResult)> = None;
        let mut idx = vec![0usize; factors.len()];
        loop {
            let vals: Vec<f64> = factors
                .iter()
                .zip(&idx)
                .map(|(&f, &i)| {
                    let (lo, hi) = (lb[f], ub[f]);
                    lo + (hi - lo) * (i as f64) / ((density - 1) as f64)
                })
                .collect();
            if let Some(r) = eval_assignment(program, &lb, &ub, &factors, &vals)? {
                if champion.as_ref().map_or(true, |(_, c)| r.objective < c.objective) {
                    champion = Some((vals, r));
                }
            }
            // Odometer increment; empty factor set runs exactly once.
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < density {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }

        // Coordinate-descent polish within one grid cell of the champion.
        if let Some((mut vals, mut res)) = champion {
            for _sweep in 0..2 {
                for (i, &f) in factors.iter().enumerate() {
                    let cell = (ub[f] - lb[f]) / ((density - 1) as f64);
                    let a = (vals[i] - cell).max(lb[f]);
                    let b = (vals[i] + cell).min(ub[f]);
                    if b - a <= FIX_TOL {
                        continue;
                    }
                    let mut probe = vals.clone();
                    let v = golden_min(a, b, |t| {
                        probe[i] = t;
                        Ok(eval_assignment(program, &lb, &ub, &factors, &probe)?
                            .map_or(INF, |r| r.objective))
                    })?;
                    probe[i] = v;
                    if let Some(r) = eval_assignment(program, &lb, &ub, &factors, &probe)? {
                        if r.objective < res.objective {
                            vals = probe;
                            res = r;
                        }
                    }
                }
            }
            if best.as_ref().map_or(true, |b| res.objective < b.objective) {
                best = Some(res);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_toy_matches_hand_optimum() {
        // min -x*y s.t. x + 2y <= 2 on [0,1]^2: optimum -0.5 at (1, 0.5).
        let mut p = MiblProgram::new();
        let w = p.add_var(-2.0, 2.0);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.add_product(w, x, y).unwrap();
        p.add_row(Row::le(vec![(x, 1.0), (y, 2.0)], 2.0)).unwrap();
        p.add_objective(w, -1.0);
        let r = brute_force_reference(&p, 41).unwrap().unwrap();
        assert!((r.objective + 0.5).abs() < 1e-6, "got {}", r.objective);
        assert!(p.infeasibility(&r.values) < 1e-7);
    }

    #[test]
    fn no_products_reduces_to_lp() {
        let mut p = MiblProgram::new();
        let x = p.add_var(0.0, 4.0);
        let y = p.add_var(0.0, 4.0);
        p.add_row(Row::ge(vec![(x, 1.0), (y, 2.0)], 3.0)).unwrap();
        p.add_objective(x, 2.0);
        p.add_objective(y, 1.0);
        let r = brute_force_reference(&p, 5).unwrap().unwrap();
        assert!((r.objective - 1.5).abs() < 1e-8);
    }

    #[test]
    fn one_hot_groups_are_detected() {
        let mut p = MiblProgram::new();
        let a = p.add_binary();
        let b = p.add_binary();
        let c = p.add_binary();
        let d = p.add_binary();
        p.add_row(Row::eq(vec![(a, 1.0), (b, 1.0), (c, 1.0)], 1.0)).unwrap();
        let (groups, free) = one_hot_groups(&p);
        assert_eq!(groups, vec![vec![a, b, c]]);
        assert_eq!(free, vec![d]);
        // 3 one-hot choices x 2 free values.
        assert_eq!(binary_patterns(&p).unwrap().len(), 6);
    }

    #[test]
    fn picks_best_one_hot_branch() {
        // Binary-gated box: d=1 allows x up to 3, d=0 caps x at 1. max x.
        let mut p = MiblProgram::new();
        let x = p.add_var(0.0, 3.0);
        let d0 = p.add_binary();
        let d1 = p.add_binary();
        p.add_row(Row::eq(vec![(d0, 1.0), (d1, 1.0)], 1.0)).unwrap();
        // x <= 1 + 2*d1
        p.add_row(Row::le(vec![(x, 1.0), (d1, -2.0)], 1.0)).unwrap();
        p.add_objective(x, -1.0);
        let r = brute_force_reference(&p, 5).unwrap().unwrap();
        assert!((r.objective + 3.0).abs() < 1e-8);
        assert!(r.values[d1] > 0.5);
    }

    #[test]
    fn infeasible_program_returns_none() {
        let mut p = MiblProgram::new();
        let x = p.add_var(0.0, 1.0);
        p.add_row(Row::ge(vec![(x, 1.0)], 2.0)).unwrap();
        assert!(brute_force_reference(&p, 5).unwrap().is_none());
    }

    #[test]
    fn quadratic_through_product_is_polished() {
        // min (x - 0.7)^2 as w - 1.4x + 0.49 with w = x*x is not allowed
        // (x == y is rejected), so use two variables tied by a row.
        let mut p = MiblProgram::new();
        let w = p.add_var(-10.0, 10.0);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.add_product(w, x, y).unwrap();
        p.add_row(Row::eq(vec![(x, 1.0), (y, -1.0)], 0.0)).unwrap();
        p.add_objective(w, 1.0);
        p.add_objective(x, -1.4);
        // Optimum at x = 0.7: value 0.49 - 0.98 = -0.49.
        let r = brute_force_reference(&p, 11).unwrap().unwrap();
        assert!((r.objective + 0.49).abs() < 1e-6, "got {}", r.objective);
        assert!((r.values[x] - 0.7).abs() < 1e-4);
    }
}
