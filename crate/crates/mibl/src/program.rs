//! Problem container for mixed-integer bilinear programs.
//!
//! A program is a linear program over boxed variables plus two non-linear
//! ingredients that stay symbolic until the solver deals with them:
//!
//! ```text
//!   minimize    c'x
//!   subject to  lo <= a'x <= hi        (ranged linear rows)
//!               x[w] == x[xf] * x[yf]  (registered bilinear products)
//!               x[b] in {0, 1}         (flagged binaries)
//!               lb <= x <= ub
//! ```
//!
//! Every variable must carry finite bounds: McCormick envelopes are built
//! from bound products, and an unbounded factor makes the relaxation vacuous.

use thiserror::Error;

/// Infinity alias used for one-sided rows.
pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("variable index {0} out of range")]
    BadVar(usize),
    #[error("non-finite coefficient on variable {0}")]
    BadCoef(usize),
    #[error("row has lo {lo} > hi {hi}")]
    EmptyRow { lo: f64, hi: f64 },
    #[error("row is unbounded on both sides")]
    FreeRow,
    #[error("variable {0} has invalid bounds [{1}, {2}]")]
    BadBounds(usize, f64, f64),
    #[error("product target {0} already registered")]
    DuplicateProduct(usize),
    #[error("product factors must be distinct variables, got w={w} x={x} y={y}")]
    DegenerateProduct { w: usize, x: usize, y: usize },
    #[error("binary variable {0} must keep bounds inside [0, 1]")]
    BadBinaryBounds(usize),
}

/// A ranged linear constraint `lo <= sum(coef * var) <= hi`.
///
/// One-sided rows use `-INF` / `INF`; equalities use `lo == hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Row {
    pub fn le(terms: Vec<(usize, f64)>, hi: f64) -> Self {
        Row { lo: -INF, hi, terms }
    }

    pub fn ge(terms: Vec<(usize, f64)>, lo: f64) -> Self {
        Row { lo, hi: INF, terms }
    }

    pub fn eq(terms: Vec<(usize, f64)>, rhs: f64) -> Self {
        Row { lo: rhs, hi: rhs, terms }
    }

    pub fn ranged(terms: Vec<(usize, f64)>, lo: f64, hi: f64) -> Self {
        Row { lo, hi, terms }
    }

    /// Activity of the row at a point.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Worst bound violation at a point, scaled by the row magnitude.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        let scale = 1.0 + self.terms.iter().map(|&(j, c)| (c * x[j]).abs()).sum::<f64>();
        let below = if self.lo.is_finite() { (self.lo - act).max(0.0) } else { 0.0 };
        let above = if self.hi.is_finite() { (act - self.hi).max(0.0) } else { 0.0 };
        below.max(above) / scale
    }
}

/// A registered bilinear identity `x[w] == x[x] * x[y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Product {
    pub w: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MiblProgram {
    lb: Vec<f64>,
    ub: Vec<f64>,
    binary: Vec<bool>,
    rows: Vec<Row>,
    products: Vec<Product>,
    objective: Vec<f64>,
}

impl MiblProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a continuous variable with the given box and returns its index.
    pub fn add_var(&mut self, lb: f64, ub: f64) -> usize {
        let j = self.lb.len();
        self.lb.push(lb);
        self.ub.push(ub);
        self.binary.push(false);
        self.objective.push(0.0);
        j
    }

    /// Adds a binary variable (box [0, 1], integrality enforced by the solver).
    pub fn add_binary(&mut self) -> usize {
        let j = self.add_var(0.0, 1.0);
        self.binary[j] = true;
        j
    }

    pub fn set_bounds(&mut self, var: usize, lb: f64, ub: f64) {
        self.lb[var] = lb;
        self.ub[var] = ub;
    }

    /// Adds `coef` to the objective coefficient of `var`.
    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn add_row(&mut self, row: Row) -> Result<usize, ProgramError> {
        if row.lo > row.hi {
            return Err(ProgramError::EmptyRow { lo: row.lo, hi: row.hi });
        }
        if row.lo == -INF && row.hi == INF {
            return Err(ProgramError::FreeRow);
        }
        for &(j, c) in &row.terms {
            if j >= self.lb.len() {
                return Err(ProgramError::BadVar(j));
            }
            if !c.is_finite() {
                return Err(ProgramError::BadCoef(j));
            }
        }
        self.rows.push(row);
        Ok(self.rows.len() - 1)
    }

    /// Registers `w == x * y`. Factors must be distinct and not the target;
    /// each target may carry only one product.
    pub fn add_product(&mut self, w: usize, x: usize, y: usize) -> Result<(), ProgramError> {
        for &j in &[w, x, y] {
            if j >= self.lb.len() {
                return Err(ProgramError::BadVar(j));
            }
        }
        if w == x || w == y || x == y {
            return Err(ProgramError::DegenerateProduct { w, x, y });
        }
        if self.products.iter().any(|p| p.w == w) {
            return Err(ProgramError::DuplicateProduct(w));
        }
        self.products.push(Product { w, x, y });
        Ok(())
    }

    /// Checks the finite-box and binary-range invariants the solver relies on.
    pub fn validate(&self) -> Result<(), ProgramError> {
        for j in 0..self.lb.len() {
            let (lb, ub) = (self.lb[j], self.ub[j]);
            if !lb.is_finite() || !ub.is_finite() || lb > ub {
                return Err(ProgramError::BadBounds(j, lb, ub));
            }
            if self.binary[j] && (lb < -1e-12 || ub > 1.0 + 1e-12) {
                return Err(ProgramError::BadBinaryBounds(j));
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.lb.len()
    }

    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    pub fn ub(&self) -> &[f64] {
        &self.ub
    }

    pub fn is_binary(&self, var: usize) -> bool {
        self.binary[var]
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.binary.len()).filter(|&j| self.binary[j])
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint violation of a candidate point: linear rows,
    /// product identities, bound and integrality residuals, all scale-relative.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            worst = worst.max(row.violation(x));
        }
        for p in &self.products {
            let err = (x[p.w] - x[p.x] * x[p.y]).abs();
            worst = worst.max(err / (1.0 + x[p.w].abs() + (x[p.x] * x[p.y]).abs()));
        }
        for j in 0..self.lb.len() {
            let scale = 1.0 + self.lb[j].abs().max(self.ub[j].abs());
            worst = worst.max((self.lb[j] - x[j]).max(0.0) / scale);
            worst = worst.max((x[j] - self.ub[j]).max(0.0) / scale);
            if self.binary[j] {
                worst = worst.max((x[j] - x[j].round()).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_constructors_cover_senses() {
        let le = Row::le(vec![(0, 1.0)], 5.0);
        assert_eq!(le.lo, -INF);
        let ge = Row::ge(vec![(0, 1.0)], 2.0);
        assert_eq!(ge.hi, INF);
        let eq = Row::eq(vec![(0, 1.0)], 3.0);
        assert_eq!((eq.lo, eq.hi), (3.0, 3.0));
    }

    #[test]
    fn add_row_rejects_bad_input() {
        let mut p = MiblProgram::new();
        let x = p.add_var(0.0, 1.0);
        assert_eq!(
            p.add_row(Row::ranged(vec![(x, 1.0)], 2.0, 1.0)),
            Err(ProgramError::EmptyRow { lo: 2.0, hi: 1.0 })
        );
        assert_eq!(p.add_row(Row::ranged(vec![(x, 1.0)], -INF, INF)), Err(ProgramError::FreeRow));
        assert_eq!(p.add_row(Row::le(vec![(7, 1.0)], 1.0)), Err(ProgramError::BadVar(7)));
        assert_eq!(p.add_row(Row::le(vec![(x, f64::NAN)], 1.0)), Err(ProgramError::BadCoef(x)));
    }

    #[test]
    fn product_registration_is_checked() {
        let mut p = MiblProgram::new();
        let w = p.add_var(0.0, 1.0);
        let x = p.add_var(0.0, 1.0);
        let y = p.add_var(0.0, 1.0);
        p.add_product(w, x, y).unwrap();
        assert_eq!(p.add_product(w, y, x), Err(ProgramError::DuplicateProduct(w)));
        let w2 = p.add_var(0.0, 1.0);
        assert!(matches!(
            p.add_product(w2, x, x),
            Err(ProgramError::DegenerateProduct { .. })
        ));
    }

    #[test]
    fn validate_requires_finite_boxes() {
        let mut p = MiblProgram::new();
        p.add_var(0.0, INF);
        assert!(matches!(p.validate(), Err(ProgramError::BadBounds(0, _, _))));
    }

    #[test]
    fn infeasibility_measures_products_and_rows() {
        let mut p = MiblProgram::new();
        let w = p.add_var(0.0, 4.0);
        let x = p.add_var(0.0, 2.0);
        let y = p.add_var(0.0, 2.0);
        p.add_product(w, x, y).unwrap();
        p.add_row(Row::le(vec![(x, 1.0), (y, 1.0)], 3.0)).unwrap();
        // Exact point: w = x*y, row satisfied.
        assert!(p.infeasibility(&[2.0, 1.0, 2.0]) < 1e-12);
        // Product broken by 1.
        assert!(p.infeasibility(&[3.0, 1.0, 2.0]) > 0.1);
    }
}
