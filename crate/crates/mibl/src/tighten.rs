//! Feasibility-based bound tightening over linear rows and products.
//!
//! Given a variable box, each ranged row implies bounds on every variable it
//! touches (activity interval arithmetic); each product `w = x*y` implies
//! the interval product forward and, when a factor box excludes zero, the
//! interval quotient backward. Iterating these rules to a fixpoint shrinks
//! node boxes cheaply before the envelope relaxation is built, which is
//! where most of the branch-and-bound pruning power comes from: binaries
//! fixed by branching make membership rows force tight factor boxes, and
//! tight factor boxes make McCormick nearly exact.
//!
//! All derived bounds are padded by a small relative slack so roundoff can
//! never cut off a feasible point.

use crate::mccormick::product_interval;
use crate::program::MiblProgram;

/// Signals that propagation proved the box empty (the node is infeasible).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyBox {
    pub var: usize,
}

const PAD: f64 = 1e-9;

fn pad_lo(v: f64) -> f64 {
    if v.is_finite() {
        v - PAD * (1.0 + v.abs())
    } else {
        v
    }
}

fn pad_hi(v: f64) -> f64 {
    if v.is_finite() {
        v + PAD * (1.0 + v.abs())
    } else {
        v
    }
}

/// Tightens `lb`/`ub` in place. Returns whether anything changed.
pub fn propagate(
    program: &MiblProgram,
    lb: &mut [f64],
    ub: &mut [f64],
    passes: usize,
) -> Result<bool, EmptyBox> {
    // Exactly-one groups over binaries, probed below: selecting a member
    // sets every other member to zero, which row arithmetic cannot exploit
    // because it relaxes the group terms jointly.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for row in program.rows() {
        if row.lo == 1.0
            && row.hi == 1.0
            && row.terms.len() >= 2
            && row.terms.iter().all(|&(j, c)| c == 1.0 && program.is_binary(j))
        {
            groups.push(row.terms.iter().map(|&(j, _)| j).collect());
        }
    }
    let group_rows: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            program
                .rows()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.terms.iter().any(|&(j, _)| g.contains(&j)))
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    let mut any_change = false;
    for _ in 0..passes {
        let mut changed = false;

        for row in program.rows() {
            // Activity interval with infinity counters so a single unbounded
            // term doesn't poison the residuals of the others.
            let mut min_act = 0.0;
            let mut max_act = 0.0;
            let mut min_inf = 0usize;
            let mut max_inf = 0usize;
            for &(j, c) in &row.terms {
                let (lo, hi) = if c >= 0.0 { (lb[j], ub[j]) } else { (ub[j], lb[j]) };
                let (lo, hi) = (c * lo, c * hi);
                if lo.is_finite() { min_act += lo } else { min_inf += 1 }
                if hi.is_finite() { max_act += hi } else { max_inf += 1 }
            }

            for &(j, c) in &row.terms {
                let (tlo, thi) = if c >= 0.0 {
                    (c * lb[j], c * ub[j])
                } else {
                    (c * ub[j], c * lb[j])
                };
                // Residual activity of the other terms.
                let rest_min = if tlo.is_finite() {
                    if min_inf == 0 { min_act - tlo } else { f64::NEG_INFINITY }
                } else if min_inf == 1 {
                    min_act
                } else {
                    f64::NEG_INFINITY
                };
                let rest_max = if thi.is_finite() {
                    if max_inf == 0 { max_act - thi } else { f64::INFINITY }
                } else if max_inf == 1 {
                    max_act
                } else {
                    f64::INFINITY
                };
                // lo <= rest + c*x <= hi
                let (mut ilo, mut ihi) = (f64::NEG_INFINITY, f64::INFINITY);
                if row.hi.is_finite() && rest_min.is_finite() {
                    let b = (row.hi - rest_min) / c;
                    if c > 0.0 { ihi = b } else { ilo = b }
                }
                if row.lo.is_finite() && rest_max.is_finite() {
                    let b = (row.lo - rest_max) / c;
                    if c > 0.0 { ilo = b } else { ihi = b }
                }
                changed |= shrink(j, lb, ub, pad_lo(ilo), pad_hi(ihi))?;
            }
        }

        for p in program.products() {
            let (wl, wu) = product_interval(lb[p.x], ub[p.x], lb[p.y], ub[p.y]);
            changed |= shrink(p.w, lb, ub, pad_lo(wl), pad_hi(wu))?;
            // Backward: y = w/x when x cannot be zero, and symmetrically.
            for &(f, other) in &[(p.x, p.y), (p.y, p.x)] {
                if lb[f] > 0.0 || ub[f] < 0.0 {
                    let (qlo, qhi) = quotient_interval(lb[p.w], ub[p.w], lb[f], ub[f]);
                    changed |= shrink(other, lb, ub, pad_lo(qlo), pad_hi(qhi))?;
                }
            }
        }

        for j in program.binaries() {
            if lb[j] > 1e-9 && lb[j] < 1.0 {
                lb[j] = 1.0;
                changed = true;
            }
            if ub[j] < 1.0 - 1e-9 && ub[j] > 0.0 {
                ub[j] = 0.0;
                changed = true;
            }
            if lb[j] > ub[j] {
                return Err(EmptyBox { var: j });
            }
        }

        // Probe each selectable group member alone against the rows its
        // group touches; a member no row system tolerates cannot be chosen.
        for (g, rows_of) in groups.iter().zip(&group_rows) {
            for &m in g {
                if ub[m] < 0.5 {
                    continue;
                }
                let mut ok = true;
                'rows: for &ri in rows_of {
                    let row = &program.rows()[ri];
                    let mut min_act = 0.0;
                    let mut max_act = 0.0;
                    let mut min_inf = 0usize;
                    let mut max_inf = 0usize;
                    for &(j, c) in &row.terms {
                        let (lo, hi) = if g.contains(&j) {
                            let v = if j == m { c } else { 0.0 };
                            (v, v)
                        } else if c >= 0.0 {
                            (c * lb[j], c * ub[j])
                        } else {
                            (c * ub[j], c * lb[j])
                        };
                        if lo.is_finite() { min_act += lo } else { min_inf += 1 }
                        if hi.is_finite() { max_act += hi } else { max_inf += 1 }
                    }
                    if min_inf == 0 && row.hi.is_finite() {
                        let tol = 1e-7 * (1.0 + row.hi.abs());
                        if min_act > row.hi + tol {
                            ok = false;
                            break 'rows;
                        }
                    }
                    if max_inf == 0 && row.lo.is_finite() {
                        let tol = 1e-7 * (1.0 + row.lo.abs());
                        if max_act < row.lo - tol {
                            ok = false;
                            break 'rows;
                        }
                    }
                }
                if !ok {
                    if lb[m] > 0.5 {
                        return Err(EmptyBox { var: m });
                    }
                    ub[m] = 0.0;
                    changed = true;
                }
            }
        }

        any_change |= changed;
        if !changed {
            break;
        }
    }
    Ok(any_change)
}

fn quotient_interval(wl: f64, wu: f64, fl: f64, fu: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &w in &[wl, wu] {
        for &f in &[fl, fu] {
            let q = w / f;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

fn shrink(
    j: usize,
    lb: &mut [f64],
    ub: &mut [f64],
    ilo: f64,
    ihi: f64,
) -> Result<bool, EmptyBox> {
    let mut changed = false;
    let step = 1e-12 * (1.0 + lb[j].abs().max(ub[j].abs()));
    if ilo > lb[j] + step {
        lb[j] = ilo;
        changed = true;
    }
    if ihi < ub[j] - step {
        ub[j] = ihi;
        changed = true;
    }
    if lb[j] > ub[j] + step {
        return Err(EmptyBox { var: j });
    }
    if lb[j] > ub[j] {
        // Within roundoff: collapse to a point instead of reporting empty.
        let mid = 0.5 * (lb[j] + ub[j]);
        lb[j] = mid;
        ub[j] = mid;
    }
    Ok(changed)
}
