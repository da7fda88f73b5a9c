//! Plain-text dump and load for programs.
//!
//! The format is line-oriented so instances can be saved from a failing run
//! and replayed in a test. Floats are written with Rust's shortest
//! round-trip formatting; infinities appear as `inf` / `-inf`.
//!
//! ```text
//! mibl 1
//! var <lb> <ub> [bin]     (one per variable, in index order)
//! obj <j> <coef>
//! row <lo> <hi> <j> <coef> [<j> <coef> ...]
//! prod <w> <x> <y>
//! ```

use crate::program::{MiblProgram, ProgramError, Row};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("line {0}: {1}")]
    Program(usize, ProgramError),
}

fn fmt_f(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn parse_f(tok: &str) -> Option<f64> {
    match tok {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

pub fn write_program(p: &MiblProgram) -> String {
    let mut s = String::new();
    s.push_str("mibl 1\n");
    for j in 0..p.num_vars() {
        let tag = if p.is_binary(j) { " bin" } else { "" };
        let _ = writeln!(s, "var {} {}{tag}", fmt_f(p.lb()[j]), fmt_f(p.ub()[j]));
    }
    for (j, &c) in p.objective().iter().enumerate() {
        if c != 0.0 {
            let _ = writeln!(s, "obj {j} {}", fmt_f(c));
        }
    }
    for row in p.rows() {
        let _ = write!(s, "row {} {}", fmt_f(row.lo), fmt_f(row.hi));
        for &(j, c) in &row.terms {
            let _ = write!(s, " {j} {}", fmt_f(c));
        }
        s.push('\n');
    }
    for pr in p.products() {
        let _ = writeln!(s, "prod {} {} {}", pr.w, pr.x, pr.y);
    }
    s
}

pub fn read_program(text: &str) -> Result<MiblProgram, IoError> {
    let mut p = MiblProgram::new();
    let bad = |ln: usize, msg: &str| IoError::Parse(ln, msg.to_string());

    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "mibl" => {
                if toks.get(1) != Some(&"1") {
                    return Err(bad(ln, "unsupported format version"));
                }
            }
            "var" => {
                let lo = toks
                    .get(1)
                    .and_then(|t| parse_f(t))
                    .ok_or_else(|| bad(ln, "bad var lower bound"))?;
                let hi = toks
                    .get(2)
                    .and_then(|t| parse_f(t))
                    .ok_or_else(|| bad(ln, "bad var upper bound"))?;
                match toks.get(3) {
                    Some(&"bin") => {
                        let j = p.add_binary();
                        p.set_bounds(j, lo, hi);
                    }
                    None => {
                        p.add_var(lo, hi);
                    }
                    Some(_) => return Err(bad(ln, "unknown var flag")),
                }
            }
            "obj" => {
                let j: usize = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad(ln, "bad obj index"))?;
                let c = toks
                    .get(2)
                    .and_then(|t| parse_f(t))
                    .ok_or_else(|| bad(ln, "bad obj coefficient"))?;
                if j >= p.num_vars() {
                    return Err(bad(ln, "obj index out of range"));
                }
                p.add_objective(j, c);
            }
            "row" => {
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(bad(ln, "row needs bounds plus index/coef pairs"));
                }
                let lo = parse_f(toks[1]).ok_or_else(|| bad(ln, "bad row lower bound"))?;
                let hi = parse_f(toks[2]).ok_or_else(|| bad(ln, "bad row upper bound"))?;
                let mut terms = Vec::with_capacity((toks.len() - 3) / 2);
                let mut k = 3;
                while k + 1 < toks.len() {
                    let j: usize = toks[k]
                        .parse()
                        .map_err(|_| bad(ln, "bad row index"))?;
                    let c = parse_f(toks[k + 1]).ok_or_else(|| bad(ln, "bad row coefficient"))?;
                    terms.push((j, c));
                    k += 2;
                }
                p.add_row(Row { lo, hi, terms })
                    .map_err(|e| IoError::Program(ln, e))?;
            }
            "prod" => {
                let idx = |k: usize, what: &str| -> Result<usize, IoError> {
                    toks.get(k)
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad(ln, what))
                };
                let w = idx(1, "bad prod w")?;
                let x = idx(2, "bad prod x")?;
                let y = idx(3, "bad prod y")?;
                p.add_product(w, x, y).map_err(|e| IoError::Program(ln, e))?;
            }
            other => return Err(bad(ln, &format!("unknown record '{other}'"))),
        }
    }
    Ok(p)
}
