//! Pits the branch-and-bound solver against the exhaustive reference on
//! random small programs with one-hot binaries and shared-factor products.

use mibl::{brute_force_reference, solve, MiblProgram, Row, SolveOptions, SolveStatus};
use naivelp::XorShift;

/// Feasible-by-construction instance: products `w_i = x_i * y` share the
/// factor `y`, binaries form a one-hot group, and every extra row is
/// anchored on a known witness point.
fn random_instance(rng: &mut XorShift) -> (MiblProgram, Vec<f64>) {
    let k = 1 + rng.below(2); // products
    let g = 2 + rng.below(2); // one-hot group size

    let mut p = MiblProgram::new();
    let mut witness = Vec::new();

    let y_lo = rng.range(-2.0, 0.5);
    let y_hi = y_lo + rng.range(0.5, 2.5);
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for _ in 0..k {
        let w = p.add_var(-12.0, 12.0);
        ws.push(w);
        witness.push(f64::NAN); // patched below once factors exist
    }
    for _ in 0..k {
        let lo = rng.range(-2.0, 1.0);
        let hi = lo + rng.range(0.5, 2.0);
        let x = p.add_var(lo, hi);
        xs.push(x);
        witness.push(rng.range(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)));
    }
    let y = p.add_var(y_lo, y_hi);
    witness.push(rng.range(y_lo + 0.1 * (y_hi - y_lo), y_hi - 0.1 * (y_hi - y_lo)));
    for i in 0..k {
        p.add_product(ws[i], xs[i], y).unwrap();
        witness[i] = witness[k + i] * witness[2 * k];
    }

    let chosen = rng.below(g);
    let mut ds = Vec::new();
    for j in 0..g {
        let d = p.add_binary();
        ds.push(d);
        witness.push(if j == chosen { 1.0 } else { 0.0 });
    }
    p.add_row(Row::eq(ds.iter().map(|&d| (d, 1.0)).collect(), 1.0)).unwrap();

    // Anchored rows keep the witness feasible whatever the coefficients.
    let n = p.num_vars();
    for _ in 0..(2 + rng.below(3)) {
        let nnz = 2 + rng.below(3);
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for _ in 0..nnz {
            let j = rng.below(n);
            if terms.iter().all(|&(q, _)| q != j) {
                terms.push((j, rng.range(-2.0, 2.0)));
            }
        }
        let at: f64 = terms.iter().map(|&(j, c)| c * witness[j]).sum();
        let row = match rng.below(3) {
            0 => Row::le(terms, at + rng.range(0.1, 1.5)),
            1 => Row::ge(terms, at - rng.range(0.1, 1.5)),
            _ => Row::ranged(terms, at - rng.range(0.1, 1.5), at + rng.range(0.1, 1.5)),
        };
        p.add_row(row).unwrap();
    }
    for j in 0..n {
        p.add_objective(j, rng.range(-2.0, 2.0));
    }
    (p, witness)
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut rng = XorShift::new(0xbf_01);
    let opts = SolveOptions { gap_tol: 1e-5, ..Default::default() };
    for case in 0..30 {
        let (p, witness) = random_instance(&mut rng);
        assert!(
            p.infeasibility(&witness) < 1e-9,
            "case {case}: witness must be feasible"
        );
        let mine = solve(&p, &opts).expect("solver failure");
        assert!(
            matches!(mine.status, SolveStatus::Optimal | SolveStatus::GapLimit),
            "case {case}: unexpected status {:?}",
            mine.status
        );
        let refr = brute_force_reference(&p, 41)
            .expect("oracle failure")
            .expect("oracle says infeasible but witness exists");
        let scale = 1.0_f64.max(refr.objective.abs());
        assert!(
            (mine.objective - refr.objective).abs() / scale < 1e-4,
            "case {case}: {} vs reference {}",
            mine.objective,
            refr.objective
        );
        let x = mine.values.expect("optimal must carry values");
        assert!(p.infeasibility(&x) <= 1e-6, "case {case}: incumbent infeasible");
    }
}

#[test]
fn repeat_solves_are_bit_identical() {
    let mut rng = XorShift::new(0xbf_02);
    for _ in 0..5 {
        let (p, _) = random_instance(&mut rng);
        let a = solve(&p, &SolveOptions::default()).unwrap();
        let b = solve(&p, &SolveOptions::default()).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        match (a.values, b.values) {
            (Some(va), Some(vb)) => {
                assert_eq!(
                    va.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    vb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
            }
            (None, None) => {}
            _ => panic!("value presence differed between runs"),
        }
    }
}

#[test]
fn previous_solution_hint_never_degrades_result() {
    let mut rng = XorShift::new(0xbf_03);
    for case in 0..10 {
        let (p, _) = random_instance(&mut rng);
        let plain = solve(&p, &SolveOptions::default()).unwrap();
        let Some(values) = plain.values else { continue };
        let hinted = solve(
            &p,
            &SolveOptions { incumbent_hint: Some(values), ..Default::default() },
        )
        .unwrap();
        assert!(
            hinted.objective <= plain.objective + 1e-4 * (1.0 + plain.objective.abs()),
            "case {case}: hint made the result worse"
        );
    }
}
