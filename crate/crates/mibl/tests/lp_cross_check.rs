//! Cross-checks the production simplex against the naive tableau solver on
//! randomly generated instances that are feasible by construction.

use mibl::{solve_lp, Lp, LpStatus, Row};
use naivelp::{generate_feasible_lp, reference_solve, RefOutcome, RefRow, XorShift};

fn to_lp(g: &naivelp::GeneratedLp) -> Lp {
    Lp {
        lb: g.lb.clone(),
        ub: g.ub.clone(),
        rows: g
            .rows
            .iter()
            .map(|r| Row { lo: r.lo, hi: r.hi, terms: r.terms.clone() })
            .collect(),
        obj: g.obj.clone(),
    }
}

#[test]
fn agrees_with_reference_on_200_random_lps() {
    let mut rng = XorShift::new(0x5eed_1);
    for case in 0..200 {
        let g = generate_feasible_lp(&mut rng);
        let mine = solve_lp(&to_lp(&g)).expect("engine failure");
        let refr = reference_solve(&g.lb, &g.ub, &g.rows, &g.obj);
        match (mine.status, refr) {
            (LpStatus::Optimal, RefOutcome::Optimal { objective, .. }) => {
                let diff = (mine.objective - objective).abs();
                let scale = 1.0_f64.max(objective.abs());
                assert!(
                    diff / scale < 1e-7,
                    "case {case}: objective mismatch {} vs {}",
                    mine.objective,
                    objective
                );
                // The returned point must satisfy what it claims.
                for (j, &v) in mine.x.iter().enumerate() {
                    assert!(v >= g.lb[j] - 1e-7 && v <= g.ub[j] + 1e-7, "case {case}: bound");
                }
                for r in &g.rows {
                    let at: f64 = r.terms.iter().map(|&(j, c)| c * mine.x[j]).sum();
                    assert!(
                        at >= r.lo - 1e-6 && at <= r.hi + 1e-6,
                        "case {case}: row violated: {at} not in [{}, {}]",
                        r.lo,
                        r.hi
                    );
                }
            }
            (a, b) => panic!("case {case}: status disagreement: {a:?} vs {b:?}"),
        }
    }
}

#[test]
fn agrees_with_reference_on_infeasible_variants() {
    // Take feasible instances and append a row that contradicts the box.
    let mut rng = XorShift::new(0x5eed_2);
    for case in 0..60 {
        let g = generate_feasible_lp(&mut rng);
        let j = rng.below(g.lb.len());
        let mut rows = g.rows.clone();
        // x_j >= ub_j + 1 cannot hold inside the box.
        rows.push(RefRow {
            lo: g.ub[j] + 1.0,
            hi: f64::INFINITY,
            terms: vec![(j, 1.0)],
        });
        let lp = Lp {
            lb: g.lb.clone(),
            ub: g.ub.clone(),
            rows: rows
                .iter()
                .map(|r| Row { lo: r.lo, hi: r.hi, terms: r.terms.clone() })
                .collect(),
            obj: g.obj.clone(),
        };
        let mine = solve_lp(&lp).expect("engine failure");
        let refr = reference_solve(&g.lb, &g.ub, &rows, &g.obj);
        assert_eq!(mine.status, LpStatus::Infeasible, "case {case}");
        assert_eq!(refr, RefOutcome::Infeasible, "case {case}");
    }
}

#[test]
fn agrees_after_box_tightening() {
    // Instances whose boxes are shrunk around the witness stay feasible and
    // both solvers must still agree on them.
    let mut rng = XorShift::new(0x5eed_3);
    for _case in 0..40 {
        let g = generate_feasible_lp(&mut rng);
        let mut lp = to_lp(&g);
        // Shrink a couple of boxes around the witness so it stays feasible.
        for _ in 0..2 {
            let j = rng.below(g.lb.len());
            let w = g.witness[j];
            let half = 0.3 * (lp.ub[j] - lp.lb[j]);
            lp.lb[j] = lp.lb[j].max(w - half);
            lp.ub[j] = lp.ub[j].min(w + half);
        }
        let second = solve_lp(&lp).expect("engine failure");
        let rows: Vec<RefRow> = g
            .rows
            .iter()
            .map(|r| RefRow { lo: r.lo, hi: r.hi, terms: r.terms.clone() })
            .collect();
        match (second.status, reference_solve(&lp.lb, &lp.ub, &rows, &lp.obj)) {
            (LpStatus::Optimal, RefOutcome::Optimal { objective, .. }) => {
                assert!(
                    (second.objective - objective).abs() / 1.0_f64.max(objective.abs()) < 1e-7
                );
            }
            (a, b) => panic!("status disagreement after tightening: {a:?} vs {b:?}"),
        }
    }
}
