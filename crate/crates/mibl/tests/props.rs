//! Property tests for the relaxation and propagation invariants.

use mibl::{branch, envelope_rows, product_interval, propagate, BnbNode, MiblProgram, Product, Row, SolveOptions};
use proptest::prelude::*;

fn ordered_pair(lo: f64, hi: f64) -> impl Strategy<Value = (f64, f64)> {
    (lo..hi, lo..hi).prop_map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
}

proptest! {
    /// Any true product point inside the factor box satisfies all four
    /// envelope rows.
    #[test]
    fn envelopes_contain_the_product_surface(
        (xl, xu) in ordered_pair(-10.0, 10.0),
        (yl, yu) in ordered_pair(-10.0, 10.0),
        tx in 0.0..1.0f64,
        ty in 0.0..1.0f64,
    ) {
        let x = xl + tx * (xu - xl);
        let y = yl + ty * (yu - yl);
        let p = Product { w: 0, x: 1, y: 2 };
        let point = [x * y, x, y];
        for row in envelope_rows(&p, xl, xu, yl, yu) {
            let at = row.activity(&point);
            // Envelope arithmetic is exact at corners; interior points may
            // see roundoff proportional to the magnitudes involved.
            let tol = 1e-9 * (1.0 + x.abs().max(y.abs())).powi(2);
            prop_assert!(at >= row.lo - tol && at <= row.hi + tol,
                "activity {at} outside [{}, {}]", row.lo, row.hi);
        }
    }

    /// The interval product bound contains every achievable product.
    #[test]
    fn product_interval_is_sound(
        (xl, xu) in ordered_pair(-8.0, 8.0),
        (yl, yu) in ordered_pair(-8.0, 8.0),
        tx in 0.0..1.0f64,
        ty in 0.0..1.0f64,
    ) {
        let x = xl + tx * (xu - xl);
        let y = yl + ty * (yu - yl);
        let (lo, hi) = product_interval(xl, xu, yl, yu);
        let tol = 1e-9 * (1.0 + (x * y).abs());
        prop_assert!(x * y >= lo - tol && x * y <= hi + tol);
    }

    /// Propagation never cuts off a feasible point: a witness inside the
    /// box that satisfies the anchored row and product stays inside the
    /// tightened box.
    #[test]
    fn propagation_keeps_feasible_witness(
        (xl, xu) in ordered_pair(-4.0, 4.0),
        (yl, yu) in ordered_pair(-4.0, 4.0),
        tx in 0.05..0.95f64,
        ty in 0.05..0.95f64,
        c0 in -2.0..2.0f64,
        c1 in -2.0..2.0f64,
        slack in 0.01..1.0f64,
    ) {
        let x = xl + tx * (xu - xl);
        let y = yl + ty * (yu - yl);
        let mut p = MiblProgram::new();
        let w = p.add_var(-20.0, 20.0);
        let vx = p.add_var(xl, xu);
        let vy = p.add_var(yl, yu);
        p.add_product(w, vx, vy).unwrap();
        let at = c0 * x + c1 * y;
        p.add_row(Row::ranged(vec![(vx, c0), (vy, c1)], at - slack, at + slack)).unwrap();
        let witness = [x * y, x, y];

        let mut lb = p.lb().to_vec();
        let mut ub = p.ub().to_vec();
        let r = propagate(&p, &mut lb, &mut ub, 8);
        prop_assert!(r.is_ok(), "witness exists, box cannot be empty");
        for j in 0..3 {
            prop_assert!(witness[j] >= lb[j] - 1e-7 && witness[j] <= ub[j] + 1e-7,
                "witness[{j}] = {} left [{}, {}]", witness[j], lb[j], ub[j]);
        }
    }

    /// Spatial branching partitions the box: the two children share exactly
    /// the split plane and their union is the parent box.
    #[test]
    fn spatial_branch_partitions_the_box(
        (xl, xu) in ordered_pair(-3.0, 3.0),
        (yl, yu) in ordered_pair(-3.0, 3.0),
        tx in 0.0..1.0f64,
        ty in 0.0..1.0f64,
    ) {
        prop_assume!(xu - xl > 0.01 && yu - yl > 0.01);
        let mut p = MiblProgram::new();
        let w = p.add_var(-20.0, 20.0);
        let vx = p.add_var(xl, xu);
        let vy = p.add_var(yl, yu);
        p.add_product(w, vx, vy).unwrap();
        let node = BnbNode::root(&p);
        let x = xl + tx * (xu - xl);
        let y = yl + ty * (yu - yl);
        // A deliberately wrong w makes the product the branching target.
        let lp_point = vec![x * y + 1.0, x, y];
        let (l, r) = branch(&p, &node, &lp_point, &SolveOptions::default()).unwrap();
        // Exactly one coordinate was split.
        let split_on_x = l.ub[vx] < node.ub[vx];
        let f = if split_on_x { vx } else { vy };
        prop_assert_eq!(l.ub[f].to_bits(), r.lb[f].to_bits());
        prop_assert_eq!(l.lb[f].to_bits(), node.lb[f].to_bits());
        prop_assert_eq!(r.ub[f].to_bits(), node.ub[f].to_bits());
        // Split point is interior and respects the central-band clipping.
        let wdt = node.ub[f] - node.lb[f];
        prop_assert!(l.ub[f] >= node.lb[f] + 0.2 * wdt - 1e-12);
        prop_assert!(l.ub[f] <= node.ub[f] - 0.2 * wdt + 1e-12);
    }
}
