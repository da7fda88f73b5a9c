//! Temporary probe: replays a dumped LP cold.

use mibl::lp::{solve_lp, Lp};
use mibl::program::Row;

fn parse_dump(text: &str) -> Lp {
    let mut lb = Vec::new();
    let mut ub = Vec::new();
    let mut obj = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("var") => {
                let _ = it.next();
                lb.push(it.next().unwrap().parse().unwrap());
                ub.push(it.next().unwrap().parse().unwrap());
                obj.push(it.next().unwrap().parse().unwrap());
            }
            Some("row") => {
                let _ = it.next();
                let lo: f64 = it.next().unwrap().parse().unwrap();
                let hi: f64 = it.next().unwrap().parse().unwrap();
                let terms: Vec<(usize, f64)> = it
                    .map(|t| {
                        let (j, c) = t.split_once(':').unwrap();
                        (j.parse().unwrap(), c.parse().unwrap())
                    })
                    .collect();
                rows.push(Row { lo, hi, terms });
            }
            _ => {}
        }
    }
    Lp { lb, ub, rows, obj }
}

#[test]
#[ignore = "probe"]
fn replay_dumped_lp() {
    let text = std::fs::read_to_string("/tmp/failing_lp.txt").unwrap();
    let lp = parse_dump(&text);
    println!("n={} m={}", lp.lb.len(), lp.rows.len());
    let t0 = std::time::Instant::now();
    match solve_lp(&lp) {
        Ok(sol) => println!("cold solve: {:?} obj={} in {:?}", sol.status, sol.objective, t0.elapsed()),
        Err(e) => println!("cold solve failed: {e} in {:?}", t0.elapsed()),
    }
}
