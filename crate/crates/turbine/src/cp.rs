//! Tabulated power-coefficient surface Cp(lambda, theta).
//!
//! The plant model evaluates Cp by bilinear interpolation on a rectilinear
//! grid over tip-speed ratio and blade pitch. The grid is loaded from a CSV
//! with columns `lambda,theta_deg,cp`; validation requires strictly
//! increasing axes, a value for every grid node, and all values inside
//! [0, 16/27) (no machine extracts the full Betz limit).
//!
//! `synthetic_cp` is the analytic surface used to generate the committed
//! data file. It is a standard exponential-family Cp curve with a smoothed
//! pitch offset so the surface stays flat (rather than kinked) around the
//! fine-pitch end of the actuator range, and it clamps to zero in the
//! runaway region at high tip-speed ratio.

use thiserror::Error;

/// Betz limit 16/27; every tabulated value must be strictly below it.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpError {
    /// Grid axes must be strictly increasing with at least two points.
    #[error("{axis} axis must be strictly increasing with >= 2 points")]
    BadAxis { axis: &'static str },
    /// values.len() != lambda_grid.len() * theta_grid.len().
    #[error("expected {expected} grid values, got {got}")]
    WrongValueCount { expected: usize, got: usize },
    /// A tabulated value was NaN, negative, or >= the Betz limit.
    #[error("cp({lambda}, {theta}) = {cp} outside [0, 16/27)")]
    BadValue { lambda: f64, theta: f64, cp: f64 },
    /// CSV line that failed to parse.
    #[error("csv line {line}: cannot parse {text:?}")]
    BadCsvLine { line: usize, text: String },
    /// A (lambda, theta) node appeared twice or was missing in the CSV.
    #[error("csv grid: {missing} missing and {duplicate} duplicate nodes")]
    IncompleteGrid { missing: usize, duplicate: usize },
    /// Query outside the tabulated box.
    #[error("query ({lambda}, {theta}) outside tabulated domain")]
    OutOfDomain { lambda: f64, theta: f64 },
}

/// Rectilinear Cp table with bilinear interpolation.
///
/// Values are stored row-major: `values[i * theta_grid.len() + j]` is the
/// coefficient at `(lambda_grid[i], theta_grid[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpSurface {
    lambda_grid: Vec<f64>,
    theta_grid: Vec<f64>,
    values: Vec<f64>,
}

fn check_axis(axis: &'static str, grid: &[f64]) -> Result<(), CpError> {
    let ok = grid.len() >= 2
        && grid.iter().all(|v| v.is_finite())
        && grid.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(CpError::BadAxis { axis })
    }
}

impl CpSurface {
    pub fn new(
        lambda_grid: Vec<f64>,
        theta_grid: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, CpError> {
        check_axis("lambda", &lambda_grid)?;
        check_axis("theta", &theta_grid)?;
        let expected = lambda_grid.len() * theta_grid.len();
        if values.len() != expected {
            return Err(CpError::WrongValueCount {
                expected,
                got: values.len(),
            });
        }
        for (idx, &cp) in values.iter().enumerate() {
            if !(cp >= 0.0 && cp < BETZ_LIMIT) {
                let i = idx / theta_grid.len();
                let j = idx % theta_grid.len();
                return Err(CpError::BadValue {
                    lambda: lambda_grid[i],
                    theta: theta_grid[j],
                    cp,
                });
            }
        }
        Ok(CpSurface {
            lambda_grid,
            theta_grid,
            values,
        })
    }

    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }

    pub fn theta_grid(&self) -> &[f64] {
        &self.theta_grid
    }

    /// Node values, row-major over (lambda index, theta index).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        (self.lambda_grid[0], *self.lambda_grid.last().unwrap())
    }

    pub fn theta_range(&self) -> (f64, f64) {
        (self.theta_grid[0], *self.theta_grid.last().unwrap())
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.theta_grid.len() + j]
    }

    /// Index of the grid cell containing `x` (clamped to valid cells so a
    /// query exactly on the upper edge still lands in the last cell).
    fn cell(grid: &[f64], x: f64) -> usize {
        let upper = grid.partition_point(|&g| g <= x);
        upper.saturating_sub(1).min(grid.len() - 2)
    }

    /// Bilinear interpolation; errors on queries outside the tabulated box.
    pub fn eval(&self, lambda: f64, theta: f64) -> Result<f64, CpError> {
        let (ll, lu) = self.lambda_range();
        let (tl, tu) = self.theta_range();
        if !(lambda >= ll && lambda <= lu && theta >= tl && theta <= tu) {
            return Err(CpError::OutOfDomain { lambda, theta });
        }
        let i = Self::cell(&self.lambda_grid, lambda);
        let j = Self::cell(&self.theta_grid, theta);
        let (l0, l1) = (self.lambda_grid[i], self.lambda_grid[i + 1]);
        let (t0, t1) = (self.theta_grid[j], self.theta_grid[j + 1]);
        let u = (lambda - l0) / (l1 - l0);
        let v = (theta - t0) / (t1 - t0);
        let c00 = self.node(i, j);
        let c10 = self.node(i + 1, j);
        let c01 = self.node(i, j + 1);
        let c11 = self.node(i + 1, j + 1);
        Ok(c00 * (1.0 - u) * (1.0 - v)
            + c10 * u * (1.0 - v)
            + c01 * (1.0 - u) * v
            + c11 * u * v)
    }

    /// Evaluation with the query clamped into the box; the flag reports
    /// whether clamping happened. Used by the plant so a gust that pushes the
    /// operating point past the table edge degrades gracefully.
    pub fn eval_clamped(&self, lambda: f64, theta: f64) -> (f64, bool) {
        let (ll, lu) = self.lambda_range();
        let (tl, tu) = self.theta_range();
        let lc = lambda.clamp(ll, lu);
        let tc = theta.clamp(tl, tu);
        let clamped = lc != lambda || tc != theta;
        let cp = self
            .eval(lc, tc)
            .expect("clamped query is inside the domain");
        (cp, clamped)
    }

    /// Largest tabulated value and the node where it occurs.
    pub fn max_node(&self) -> (f64, f64, f64) {
        let mut best = (self.values[0], self.lambda_grid[0], self.theta_grid[0]);
        for i in 0..self.lambda_grid.len() {
            for j in 0..self.theta_grid.len() {
                let v = self.node(i, j);
                if v > best.0 {
                    best = (v, self.lambda_grid[i], self.theta_grid[j]);
                }
            }
        }
        best
    }

    /// Parses `lambda,theta_deg,cp` CSV text (header line required).
    pub fn from_csv_text(text: &str) -> Result<Self, CpError> {
        let mut triples: Vec<(f64, f64, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if line == 1 || trimmed.starts_with("lambda") {
                continue;
            }
            let mut parts = trimmed.split(',');
            let mut next = || -> Option<f64> {
                parts.next()?.trim().parse::<f64>().ok().filter(|v| v.is_finite())
            };
            match (next(), next(), next(), parts.next()) {
                (Some(l), Some(t), Some(c), None) => triples.push((l, t, c)),
                _ => {
                    return Err(CpError::BadCsvLine {
                        line,
                        text: trimmed.to_string(),
                    })
                }
            }
        }

        let mut lambda_grid: Vec<f64> = triples.iter().map(|t| t.0).collect();
        lambda_grid.sort_by(f64::total_cmp);
        lambda_grid.dedup();
        let mut theta_grid: Vec<f64> = triples.iter().map(|t| t.1).collect();
        theta_grid.sort_by(f64::total_cmp);
        theta_grid.dedup();
        check_axis("lambda", &lambda_grid)?;
        check_axis("theta", &theta_grid)?;

        let nt = theta_grid.len();
        let mut values = vec![f64::NAN; lambda_grid.len() * nt];
        let mut duplicate = 0usize;
        for (l, t, c) in triples {
            // Axes were built from the triples themselves, so exact matches exist.
            let i = lambda_grid.partition_point(|&g| g < l);
            let j = theta_grid.partition_point(|&g| g < t);
            let slot = &mut values[i * nt + j];
            if slot.is_nan() {
                *slot = c;
            } else {
                duplicate += 1;
            }
        }
        let missing = values.iter().filter(|v| v.is_nan()).count();
        if missing > 0 || duplicate > 0 {
            return Err(CpError::IncompleteGrid { missing, duplicate });
        }
        CpSurface::new(lambda_grid, theta_grid, values)
    }

    /// Serializes the table back to the CSV format `from_csv_text` reads.
    pub fn to_csv_text(&self) -> String {
        let mut out = String::from("lambda,theta_deg,cp\n");
        for (i, &l) in self.lambda_grid.iter().enumerate() {
            for (j, &t) in self.theta_grid.iter().enumerate() {
                out.push_str(&format!("{},{},{:.17e}\n", l, t, self.node(i, j)));
            }
        }
        out
    }
}

/// Analytic Cp model used to generate `data/cp_surface.csv`.
///
/// Exponential-family curve with coefficients (0.5176, 116, 0.4, 5, 21,
/// 0.0068). The raw pitch angle is passed through a smooth softplus-style
/// map centered at 0.6 deg so the surface is nearly constant over the first
/// degree of pitch travel, and the result is clamped to [0, Betz).
pub fn synthetic_cp(lambda: f64, theta_deg: f64) -> f64 {
    let d = theta_deg - 0.6;
    let theta_eff = 0.5 * (d + (d * d + 0.1).sqrt());
    let inv_li = 1.0 / (lambda + 0.08 * theta_eff)
        - 0.035 / (1.0 + theta_eff * theta_eff * theta_eff);
    let cp = 0.5176 * (116.0 * inv_li - 0.4 * theta_eff - 5.0) * (-21.0 * inv_li).exp()
        + 0.0068 * lambda;
    cp.clamp(0.0, BETZ_LIMIT - 1e-9)
}

/// Grid axes used for the committed surface table.
pub fn reference_grid() -> (Vec<f64>, Vec<f64>) {
    // lambda 0.5..24 step 0.25, theta 0..26 step 0.5; endpoints exact.
    let lambda: Vec<f64> = (0..=94).map(|i| 0.5 + 0.25 * i as f64).collect();
    let theta: Vec<f64> = (0..=52).map(|j| 0.5 * j as f64).collect();
    (lambda, theta)
}

/// Builds the reference table by sampling `synthetic_cp` on `reference_grid`.
pub fn reference_surface() -> CpSurface {
    let (lambda, theta) = reference_grid();
    let mut values = Vec::with_capacity(lambda.len() * theta.len());
    for &l in &lambda {
        for &t in &theta {
            values.push(synthetic_cp(l, t));
        }
    }
    CpSurface::new(lambda, theta, values).expect("synthetic surface is valid")
}
