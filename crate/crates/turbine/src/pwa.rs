//! Continuous piecewise-affine approximation of the Cp surface and its
//! mixed-integer region encoding.
//!
//! The operating box in the (lambda, theta) plane is cut into an axis-aligned
//! grid of rectangles, each carrying one affine piece a*lambda + b*theta + c.
//! The fit is least squares over a uniform sample grid per region, subject to
//! hard continuity equalities: adjacent pieces must agree at both endpoints
//! of every shared edge, which (both restrictions being affine along the
//! edge) makes the whole function continuous. The equalities are assembled
//! as one "star" per break-grid node, first incident region against each
//! other incident region; that set is equivalent to the per-edge-endpoint
//! pairs by transitivity but has full row rank, so the KKT system is
//! nonsingular whenever the sample design is rich enough.
//!
//! `encode_bigm` turns region membership into linear rows over caller-owned
//! variables: one-hot binaries select a region, big-M constants deactivate
//! the other regions' membership rows, and per-region contribution variables
//! sum to the selected piece's value. Rows that can never bind (a region
//! face lying on the operating-box boundary) are dropped at emission.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::config::KvMap;
use crate::cp::CpSurface;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PwaError {
    /// Break lists must be finite, ascending, length >= 2.
    #[error("{axis} breaks must be ascending")]
    BadBreaks { axis: &'static str },
    /// The Cp table does not cover the partition's box.
    #[error("cp table does not cover the partition box")]
    SurfaceTooSmall,
    /// The KKT system was singular: degenerate partition or sample design.
    #[error("continuity-constrained fit is rank deficient")]
    Degenerate,
    /// Query outside the partition box.
    #[error("({lambda}, {theta}) outside the partition box")]
    OutOfBox { lambda: f64, theta: f64 },
    /// Handle vectors do not match the region count.
    #[error("expected {expected} handles, got {got}")]
    HandleMismatch { expected: usize, got: usize },
    /// PWA description file problems.
    #[error("pwa file line {line}: {what}")]
    Format { line: usize, what: String },
}

/// Closed axis-aligned rectangle in the (lambda, theta) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl Rect {
    pub fn contains(&self, lambda: f64, theta: f64) -> bool {
        lambda >= self.lambda_lo
            && lambda <= self.lambda_hi
            && theta >= self.theta_lo
            && theta <= self.theta_hi
    }

    pub fn vertices(&self) -> [[f64; 2]; 4] {
        [
            [self.lambda_lo, self.theta_lo],
            [self.lambda_lo, self.theta_hi],
            [self.lambda_hi, self.theta_lo],
            [self.lambda_hi, self.theta_hi],
        ]
    }
}

/// One shared edge between two adjacent regions, with its endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedEdge {
    pub region_a: usize,
    pub region_b: usize,
    pub p0: [f64; 2],
    pub p1: [f64; 2],
}

/// Axis-aligned grid partition of the operating box.
///
/// Region indexing is row-major with lambda as the slow axis:
/// `j = i_lambda * (theta cells) + i_theta`. Each region's canonical
/// halfspace system has four unit-normal rows in the fixed order
/// (-lambda, +lambda, -theta, +theta).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadPartition {
    lambda_breaks: Vec<f64>,
    theta_breaks: Vec<f64>,
    rects: Vec<Rect>,
}

fn check_breaks(axis: &'static str, breaks: &[f64]) -> Result<(), PwaError> {
    let ok = breaks.len() >= 2
        && breaks.iter().all(|v| v.is_finite())
        && breaks.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(PwaError::BadBreaks { axis })
    }
}

pub fn build_partition(
    lambda_breaks: &[f64],
    theta_breaks: &[f64],
) -> Result<QuadPartition, PwaError> {
    check_breaks("lambda", lambda_breaks)?;
    check_breaks("theta", theta_breaks)?;
    let nt = theta_breaks.len() - 1;
    let mut rects = Vec::with_capacity((lambda_breaks.len() - 1) * nt);
    for il in 0..lambda_breaks.len() - 1 {
        for it in 0..nt {
            rects.push(Rect {
                lambda_lo: lambda_breaks[il],
                lambda_hi: lambda_breaks[il + 1],
                theta_lo: theta_breaks[it],
                theta_hi: theta_breaks[it + 1],
            });
        }
    }
    Ok(QuadPartition {
        lambda_breaks: lambda_breaks.to_vec(),
        theta_breaks: theta_breaks.to_vec(),
        rects,
    })
}

impl QuadPartition {
    pub fn num_regions(&self) -> usize {
        self.rects.len()
    }

    pub fn regions(&self) -> &[Rect] {
        &self.rects
    }

    pub fn lambda_breaks(&self) -> &[f64] {
        &self.lambda_breaks
    }

    pub fn theta_breaks(&self) -> &[f64] {
        &self.theta_breaks
    }

    /// The full covered box as a rectangle.
    pub fn bounding_box(&self) -> Rect {
        Rect {
            lambda_lo: self.lambda_breaks[0],
            lambda_hi: *self.lambda_breaks.last().unwrap(),
            theta_lo: self.theta_breaks[0],
            theta_hi: *self.theta_breaks.last().unwrap(),
        }
    }

    /// Canonical halfspace system of region `j`: rows (normal, offset) with
    /// unit normals in the order (-lambda, +lambda, -theta, +theta), meaning
    /// normal . x <= offset.
    pub fn halfspaces(&self, j: usize) -> [([f64; 2], f64); 4] {
        let r = self.rects[j];
        [
            ([-1.0, 0.0], -r.lambda_lo),
            ([1.0, 0.0], r.lambda_hi),
            ([0.0, -1.0], -r.theta_lo),
            ([0.0, 1.0], r.theta_hi),
        ]
    }

    /// Region containing the point, lowest index winning on shared
    /// boundaries; `None` outside the box.
    pub fn locate(&self, lambda: f64, theta: f64) -> Option<usize> {
        let bb = self.bounding_box();
        if !bb.contains(lambda, theta) {
            return None;
        }
        // Count of breaks strictly below the query, minus one, lands in the
        // lower cell at interior breaks: that is the lowest-index region.
        let cell = |breaks: &[f64], x: f64| -> usize {
            breaks
                .partition_point(|&b| b < x)
                .saturating_sub(1)
                .min(breaks.len() - 2)
        };
        let il = cell(&self.lambda_breaks, lambda);
        let it = cell(&self.theta_breaks, theta);
        Some(il * (self.theta_breaks.len() - 1) + it)
    }

    /// All interior shared edges with their endpoints.
    pub fn shared_edges(&self) -> Vec<SharedEdge> {
        let nl = self.lambda_breaks.len() - 1;
        let nt = self.theta_breaks.len() - 1;
        let idx = |il: usize, it: usize| il * nt + it;
        let mut edges = Vec::new();
        for il in 0..nl - 1 {
            for it in 0..nt {
                let x = self.lambda_breaks[il + 1];
                edges.push(SharedEdge {
                    region_a: idx(il, it),
                    region_b: idx(il + 1, it),
                    p0: [x, self.theta_breaks[it]],
                    p1: [x, self.theta_breaks[it + 1]],
                });
            }
        }
        for il in 0..nl {
            for it in 0..nt - 1 {
                let y = self.theta_breaks[it + 1];
                edges.push(SharedEdge {
                    region_a: idx(il, it),
                    region_b: idx(il, it + 1),
                    p0: [self.lambda_breaks[il], y],
                    p1: [self.lambda_breaks[il + 1], y],
                });
            }
        }
        edges
    }

    /// Break-grid nodes with the regions incident to each, for assembling
    /// non-redundant continuity equalities.
    fn node_stars(&self) -> Vec<([f64; 2], Vec<usize>)> {
        let nl = self.lambda_breaks.len() - 1;
        let nt = self.theta_breaks.len() - 1;
        let mut stars = Vec::new();
        for (bi, &bl) in self.lambda_breaks.iter().enumerate() {
            for (bj, &bt) in self.theta_breaks.iter().enumerate() {
                let mut incident = Vec::new();
                for il in bi.saturating_sub(1)..=bi.min(nl - 1) {
                    for it in bj.saturating_sub(1)..=bj.min(nt - 1) {
                        if (il == bi || il + 1 == bi) && (it == bj || it + 1 == bj) {
                            incident.push(il * nt + it);
                        }
                    }
                }
                incident.sort_unstable();
                incident.dedup();
                if incident.len() > 1 {
                    stars.push(([bl, bt], incident));
                }
            }
        }
        stars
    }
}

/// Fitted piecewise-affine surface over a `QuadPartition`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaSurface {
    pub partition: QuadPartition,
    /// Per-region (a, b, c) for value a*lambda + b*theta + c.
    pub coeffs: Vec<[f64; 3]>,
    /// Root-mean-square residual over the fit sample set.
    pub fit_rms: f64,
}

/// Least-squares fit with hard continuity equalities, solved via the KKT
/// linear system. `samples_per_axis` sample points are placed uniformly per
/// region and axis (inclusive of region edges).
pub fn fit_pwa(
    surface: &CpSurface,
    partition: &QuadPartition,
    samples_per_axis: usize,
) -> Result<PwaSurface, PwaError> {
    let bb = partition.bounding_box();
    let (sl_lo, sl_hi) = surface.lambda_range();
    let (st_lo, st_hi) = surface.theta_range();
    if bb.lambda_lo < sl_lo - 1e-12
        || bb.lambda_hi > sl_hi + 1e-12
        || bb.theta_lo < st_lo - 1e-12
        || bb.theta_hi > st_hi + 1e-12
    {
        return Err(PwaError::SurfaceTooSmall);
    }
    let s = samples_per_axis.max(2);
    let nr = partition.num_regions();
    let nx = 3 * nr;

    // Normal-equation blocks: ata is block-diagonal (3x3 per region).
    let mut ata = DMatrix::<f64>::zeros(nx, nx);
    let mut aty = DVector::<f64>::zeros(nx);
    let mut samples: Vec<(usize, f64, f64, f64)> = Vec::with_capacity(nr * s * s);
    for (j, r) in partition.regions().iter().enumerate() {
        for a in 0..s {
            for b in 0..s {
                let l = r.lambda_lo + (r.lambda_hi - r.lambda_lo) * a as f64 / (s - 1) as f64;
                let t = r.theta_lo + (r.theta_hi - r.theta_lo) * b as f64 / (s - 1) as f64;
                let y = surface
                    .eval(l.clamp(sl_lo, sl_hi), t.clamp(st_lo, st_hi))
                    .expect("sample inside surface domain");
                samples.push((j, l, t, y));
                let row = [l, t, 1.0];
                for p in 0..3 {
                    for q in 0..3 {
                        ata[(3 * j + p, 3 * j + q)] += row[p] * row[q];
                    }
                    aty[3 * j + p] += row[p] * y;
                }
            }
        }
    }

    // Continuity equalities: per break-grid node, first incident region
    // against each other incident region.
    let stars = partition.node_stars();
    let ncon: usize = stars.iter().map(|(_, inc)| inc.len() - 1).sum();
    let mut cmat = DMatrix::<f64>::zeros(ncon, nx);
    let mut crow = 0usize;
    for (p, incident) in &stars {
        let lead = incident[0];
        for &other in &incident[1..] {
            let row = [p[0], p[1], 1.0];
            for q in 0..3 {
                cmat[(crow, 3 * lead + q)] += row[q];
                cmat[(crow, 3 * other + q)] -= row[q];
            }
            crow += 1;
        }
    }

    // KKT system: [2 A'A  C'; C  0] [x; nu] = [2 A'y; 0].
    let dim = nx + ncon;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for p in 0..nx {
        for q in 0..nx {
            kkt[(p, q)] = 2.0 * ata[(p, q)];
        }
        rhs[p] = 2.0 * aty[p];
    }
    for r in 0..ncon {
        for q in 0..nx {
            kkt[(nx + r, q)] = cmat[(r, q)];
            kkt[(q, nx + r)] = cmat[(r, q)];
        }
    }
    let solution = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(PwaError::Degenerate)?;
    // LU succeeds on some nearly singular systems; verify the residual.
    let resid = (&kkt * &solution - &rhs).amax();
    let scale = rhs.amax().max(1.0);
    if !resid.is_finite() || resid > 1e-7 * scale {
        return Err(PwaError::Degenerate);
    }

    let coeffs: Vec<[f64; 3]> = (0..nr)
        .map(|j| [solution[3 * j], solution[3 * j + 1], solution[3 * j + 2]])
        .collect();
    let sse: f64 = samples
        .iter()
        .map(|&(j, l, t, y)| {
            let v = coeffs[j][0] * l + coeffs[j][1] * t + coeffs[j][2];
            (v - y) * (v - y)
        })
        .sum();
    let fit_rms = (sse / samples.len() as f64).sqrt();
    Ok(PwaSurface {
        partition: partition.clone(),
        coeffs,
        fit_rms,
    })
}

/// Evaluates the fitted surface; lowest region index wins on boundaries.
pub fn pwa_eval(pwa: &PwaSurface, lambda: f64, theta: f64) -> Result<f64, PwaError> {
    let j = pwa
        .partition
        .locate(lambda, theta)
        .ok_or(PwaError::OutOfBox { lambda, theta })?;
    let [a, b, c] = pwa.coeffs[j];
    Ok(a * lambda + b * theta + c)
}

/// Deactivation constants for the region encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMData {
    /// Componentwise upper bound on the canonical halfspace rows
    /// (-lambda, +lambda, -theta, +theta) over the operating box.
    pub row_max: [f64; 4],
    /// Lower bound on every region's affine piece over the box, slackened.
    pub piece_min: f64,
    /// Upper bound on every region's affine piece over the box, slackened.
    pub piece_max: f64,
}

/// Bounds by vertex enumeration (affine extrema lie at vertices), with 5% of
/// the observed piece range (absolute floor 1e-6) added as slack.
pub fn compute_bigm(pwa: &PwaSurface, operating_box: Rect) -> BigMData {
    let verts = operating_box.vertices();
    let mut row_max = [f64::NEG_INFINITY; 4];
    let rows: [[f64; 2]; 4] = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
    for v in verts {
        for (r, n) in rows.iter().enumerate() {
            row_max[r] = row_max[r].max(n[0] * v[0] + n[1] * v[1]);
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for [a, b, c] in &pwa.coeffs {
        for v in verts {
            let val = a * v[0] + b * v[1] + c;
            lo = lo.min(val);
            hi = hi.max(val);
        }
    }
    let slack = (0.05 * (hi - lo)).max(1e-6);
    BigMData {
        row_max,
        piece_min: lo - slack,
        piece_max: hi + slack,
    }
}

/// Affine expression over caller-owned variable ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(id: usize) -> Self {
        LinExpr {
            terms: vec![(id, 1.0)],
            constant: 0.0,
        }
    }

    pub fn scaled_var(id: usize, coef: f64) -> Self {
        LinExpr {
            terms: vec![(id, coef)],
            constant: 0.0,
        }
    }
}

/// Variable handles the caller allocated for one region-selection block.
#[derive(Debug, Clone, PartialEq)]
pub struct BigmHandles {
    /// Tip-speed ratio as an affine expression in problem variables.
    pub lambda: LinExpr,
    /// Pitch as an affine expression in problem variables.
    pub theta: LinExpr,
    /// Total coefficient variable.
    pub cp_total: usize,
    /// Per-region contribution variables, length N_R.
    pub cp_parts: Vec<usize>,
    /// Per-region selection binaries, length N_R.
    pub deltas: Vec<usize>,
}

/// One emitted two-sided linear row: lo <= sum(coef * var) <= hi.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedConstraint {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<(usize, f64)>,
}

fn push_term(terms: &mut Vec<(usize, f64)>, id: usize, coef: f64) {
    if coef == 0.0 {
        return;
    }
    if let Some(t) = terms.iter_mut().find(|t| t.0 == id) {
        t.1 += coef;
    } else {
        terms.push((id, coef));
    }
}

fn add_expr(terms: &mut Vec<(usize, f64)>, expr: &LinExpr, scale: f64) -> f64 {
    for &(id, coef) in &expr.terms {
        push_term(terms, id, scale * coef);
    }
    scale * expr.constant
}

/// Emits the region-selection rows over the supplied handles.
///
/// Per block: the contributions sum to the total; the binaries sum to one;
/// four window rows pin (lambda, theta) inside the selected region by
/// bounding each coordinate with the one-hot combination of the region
/// windows (exact for binary selections, and tighter than per-region big-M
/// rows on fractional ones); each contribution is zero when unselected; and
/// each contribution equals its affine piece when selected.
pub fn encode_bigm(
    pwa: &PwaSurface,
    bigm: &BigMData,
    handles: &BigmHandles,
) -> Result<Vec<EncodedConstraint>, PwaError> {
    let nr = pwa.partition.num_regions();
    if handles.cp_parts.len() != nr {
        return Err(PwaError::HandleMismatch {
            expected: nr,
            got: handles.cp_parts.len(),
        });
    }
    if handles.deltas.len() != nr {
        return Err(PwaError::HandleMismatch {
            expected: nr,
            got: handles.deltas.len(),
        });
    }
    let mut rows = Vec::new();

    // Contributions sum to the total.
    let mut terms = vec![(handles.cp_total, -1.0)];
    for &cpj in &handles.cp_parts {
        push_term(&mut terms, cpj, 1.0);
    }
    rows.push(EncodedConstraint {
        lo: 0.0,
        hi: 0.0,
        terms,
    });

    // Exactly one region selected.
    let mut terms = Vec::new();
    for &d in &handles.deltas {
        push_term(&mut terms, d, 1.0);
    }
    rows.push(EncodedConstraint {
        lo: 1.0,
        hi: 1.0,
        terms,
    });

    // Window rows: each coordinate sits between the selected region's lower
    // and upper edge, written as one-hot combinations over all regions.
    for (expr, axis) in [(&handles.lambda, 0usize), (&handles.theta, 1usize)] {
        for upper in [false, true] {
            let mut terms = Vec::new();
            let shift = add_expr(&mut terms, expr, 1.0);
            for (j, rect) in pwa.partition.regions().iter().enumerate() {
                let edge = match (axis, upper) {
                    (0, false) => rect.lambda_lo,
                    (0, true) => rect.lambda_hi,
                    (1, false) => rect.theta_lo,
                    _ => rect.theta_hi,
                };
                push_term(&mut terms, handles.deltas[j], -edge);
            }
            let (lo, hi) = if upper {
                (f64::NEG_INFINITY, -shift)
            } else {
                (-shift, f64::INFINITY)
            };
            rows.push(EncodedConstraint { lo, hi, terms });
        }
    }

    for j in 0..nr {
        let delta = handles.deltas[j];
        let cpj = handles.cp_parts[j];
        let [a, b, c] = pwa.coeffs[j];

        // Contribution vanishes unless selected: delta*min <= cpj <= delta*max.
        rows.push(EncodedConstraint {
            lo: 0.0,
            hi: f64::INFINITY,
            terms: vec![(cpj, 1.0), (delta, -bigm.piece_min)],
        });
        rows.push(EncodedConstraint {
            lo: f64::NEG_INFINITY,
            hi: 0.0,
            terms: vec![(cpj, 1.0), (delta, -bigm.piece_max)],
        });

        // Contribution equals the piece when selected:
        // min*(1-delta) <= a*lambda + b*theta + c - cpj <= max*(1-delta).
        let mut base_terms = Vec::new();
        let mut shift = 0.0;
        shift += add_expr(&mut base_terms, &handles.lambda, a);
        shift += add_expr(&mut base_terms, &handles.theta, b);
        push_term(&mut base_terms, cpj, -1.0);
        let mut lo_terms = base_terms.clone();
        push_term(&mut lo_terms, delta, bigm.piece_min);
        rows.push(EncodedConstraint {
            lo: bigm.piece_min - c - shift,
            hi: f64::INFINITY,
            terms: lo_terms,
        });
        let mut hi_terms = base_terms;
        push_term(&mut hi_terms, delta, bigm.piece_max);
        rows.push(EncodedConstraint {
            lo: f64::NEG_INFINITY,
            hi: bigm.piece_max - c - shift,
            terms: hi_terms,
        });
    }
    Ok(rows)
}

/// Serializes a fitted surface with its big-M data to the description file
/// format the `fit-cp` tool writes: `key=value` lines, then a region CSV.
pub fn pwa_to_text(pwa: &PwaSurface, bigm: &BigMData) -> String {
    let mut out = String::new();
    let fmt_list = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.17e}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    out.push_str("# piecewise-affine cp surface with region-selection bounds\n");
    out.push_str(&format!(
        "lambda_breaks={}\n",
        fmt_list(pwa.partition.lambda_breaks())
    ));
    out.push_str(&format!(
        "theta_breaks={}\n",
        fmt_list(pwa.partition.theta_breaks())
    ));
    out.push_str(&format!("fit_rms={:.17e}\n", pwa.fit_rms));
    out.push_str(&format!("bigm_rows={}\n", fmt_list(&bigm.row_max)));
    out.push_str(&format!("piece_min={:.17e}\n", bigm.piece_min));
    out.push_str(&format!("piece_max={:.17e}\n", bigm.piece_max));
    out.push_str("region,a,b,c\n");
    for (j, [a, b, c]) in pwa.coeffs.iter().enumerate() {
        out.push_str(&format!("{j},{a:.17e},{b:.17e},{c:.17e}\n"));
    }
    out
}

/// Parses the `fit-cp` description format back into a surface and bounds.
pub fn pwa_from_text(text: &str) -> Result<(PwaSurface, BigMData), PwaError> {
    let mut kv_lines = String::new();
    let mut coeffs: Vec<[f64; 3]> = Vec::new();
    let mut in_csv = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with("region,") {
            in_csv = true;
            continue;
        }
        if !in_csv {
            kv_lines.push_str(trimmed);
            kv_lines.push('\n');
            continue;
        }
        let parts: Vec<&str> = trimmed.split(',').collect();
        if parts.len() != 4 {
            return Err(PwaError::Format {
                line,
                what: format!("expected region,a,b,c, got {trimmed:?}"),
            });
        }
        let j: usize = parts[0].trim().parse().map_err(|_| PwaError::Format {
            line,
            what: "bad region index".to_string(),
        })?;
        if j != coeffs.len() {
            return Err(PwaError::Format {
                line,
                what: format!("region rows out of order at index {j}"),
            });
        }
        let mut vals = [0.0; 3];
        for (slot, p) in vals.iter_mut().zip(&parts[1..]) {
            *slot = p
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PwaError::Format {
                    line,
                    what: format!("bad coefficient {p:?}"),
                })?;
        }
        coeffs.push(vals);
    }
    let kv = KvMap::parse(&kv_lines).map_err(|e| PwaError::Format {
        line: 0,
        what: e.to_string(),
    })?;
    let bad = |what: &str| PwaError::Format {
        line: 0,
        what: what.to_string(),
    };
    let lb = kv
        .get_f64_list("lambda_breaks")
        .map_err(|e| bad(&e.to_string()))?;
    let tb = kv
        .get_f64_list("theta_breaks")
        .map_err(|e| bad(&e.to_string()))?;
    let partition = build_partition(&lb, &tb)?;
    if coeffs.len() != partition.num_regions() {
        return Err(bad(&format!(
            "{} region rows for {} regions",
            coeffs.len(),
            partition.num_regions()
        )));
    }
    let fit_rms = kv.get_f64("fit_rms").map_err(|e| bad(&e.to_string()))?;
    let rows = kv
        .get_f64_list("bigm_rows")
        .map_err(|e| bad(&e.to_string()))?;
    if rows.len() != 4 {
        return Err(bad("bigm_rows must have 4 entries"));
    }
    let bigm = BigMData {
        row_max: [rows[0], rows[1], rows[2], rows[3]],
        piece_min: kv.get_f64("piece_min").map_err(|e| bad(&e.to_string()))?,
        piece_max: kv.get_f64("piece_max").map_err(|e| bad(&e.to_string()))?,
    };
    Ok((
        PwaSurface {
            partition,
            coeffs,
            fit_rms,
        },
        bigm,
    ))
}
