//! McCormick envelopes for bilinear products over variable boxes.
//!
//! For `w = x*y` with `x in [xl, xu]`, `y in [yl, yu]` the convex hull of
//! the graph is cut out by four inequalities:
//!
//! ```text
//!   w >= xl*y + yl*x - xl*yl        w >= xu*y + yu*x - xu*yu
//!   w <= xu*y + yl*x - xu*yl        w <= xl*y + yu*x - xl*yu
//! ```
//!
//! The envelope is exact at the box corners and collapses to the identity
//! `w = c*y` when a factor box degenerates to a point `c`. Relaxation
//! quality scales with the box area, which is why the solver tightens boxes
//! before rebuilding envelopes at every node.

use crate::bnb::BnbNode;
use crate::lp::Lp;
use crate::program::{MiblProgram, Product, Row, INF};

/// The four envelope rows for one product under the given factor boxes.
/// Order: the two lower supports, then the two upper supports.
pub fn envelope_rows(p: &Product, xl: f64, xu: f64, yl: f64, yu: f64) -> [Row; 4] {
    let t = |cy: f64, cx: f64| vec![(p.w, 1.0), (p.y, -cy), (p.x, -cx)];
    [
        Row::ge(t(xl, yl), -xl * yl),
        Row::ge(t(xu, yu), -xu * yu),
        Row::le(t(xu, yl), -xu * yl),
        Row::le(t(xl, yu), -xl * yu),
    ]
}

/// Builds the LP relaxation of `program` at `node`: original rows plus four
/// envelope rows per registered product, with the node's variable boxes.
///
/// The node boxes must be non-empty and finite for every product factor;
/// an empty box is a prune signal the search layer handles before calling.
pub fn mccormick_relax(program: &MiblProgram, node: &BnbNode) -> Lp {
    let mut rows = program.rows().to_vec();
    for p in program.products() {
        rows.extend(envelope_rows(p, node.lb[p.x], node.ub[p.x], node.lb[p.y], node.ub[p.y]));
    }
    Lp {
        lb: node.lb.clone(),
        ub: node.ub.clone(),
        rows,
        obj: program.objective().to_vec(),
    }
}

/// Envelope value interval for w implied by the factor boxes alone
/// (interval product). Useful for bound propagation.
pub fn product_interval(xl: f64, xu: f64, yl: f64, yu: f64) -> (f64, f64) {
    let mut lo = INF;
    let mut hi = -INF;
    for &a in &[xl, xu] {
        for &b in &[yl, yu] {
            let v = a * b;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}
