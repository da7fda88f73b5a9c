//! Textbook dense-tableau simplex, used only as a cross-check in tests.
//!
//! Deliberately naive: variables are shifted to [0, span] and their upper
//! bounds become explicit rows, every two-sided row is split into single
//! inequalities, and the whole thing is solved as a standard-form tableau
//! with slacks plus a two-phase artificial start. Bland's rule everywhere,
//! so it cannot cycle. Nothing here is shared with the production solver:
//! no basis factorization, no bounded-variable logic, no warm starts.

/// One input constraint: `lo <= terms . x <= hi` (either side may be
/// infinite, not both).
#[derive(Debug, Clone)]
pub struct RefRow {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

const EPS: f64 = 1e-9;

/// Minimizes `obj . x` over finite boxes `lb/ub` subject to `rows`.
pub fn reference_solve(lb: &[f64], ub: &[f64], rows: &[RefRow], obj: &[f64]) -> RefOutcome {
    let n = lb.len();
    assert_eq!(ub.len(), n);
    assert_eq!(obj.len(), n);
    assert!(
        lb.iter().chain(ub.iter()).all(|v| v.is_finite()),
        "reference solver needs finite boxes"
    );

    // Shift to y = x - lb >= 0; collect every constraint as a <= row in y.
    let mut a: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut push_le = |coef: Vec<f64>, rhs: f64| {
        a.push(coef);
        b.push(rhs);
    };
    for j in 0..n {
        let mut c = vec![0.0; n];
        c[j] = 1.0;
        push_le(c, ub[j] - lb[j]);
    }
    for r in rows {
        let mut c = vec![0.0; n];
        let mut base = 0.0;
        for &(j, v) in &r.terms {
            c[j] += v;
            base += v * lb[j];
        }
        if r.hi.is_finite() {
            push_le(c.clone(), r.hi - base);
        }
        if r.lo.is_finite() {
            push_le(c.iter().map(|v| -v).collect(), base - r.lo);
        }
    }
    let m = a.len();

    // Normalize rhs >= 0 so phase 1 only needs artificials there.
    for i in 0..m {
        if b[i] < 0.0 {
            for v in a[i].iter_mut() {
                *v = -*v;
            }
            b[i] = -b[i];
            a[i].push(-1.0); // surplus for the flipped row
        } else {
            a[i].push(0.0);
        }
    }
    // Column layout: n structural, then m slacks, then artificials where
    // needed. The per-row surplus marker added above is folded into the
    // slack block instead: rebuild cleanly.
    let mut cols = n;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut slack_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    for i in 0..m {
        let surplus = a[i][n] < -0.5;
        let mut row: Vec<f64> = a[i][..n].to_vec();
        row.resize(cols, 0.0);
        tab.push(row);
        if surplus {
            // -1 surplus plus +1 artificial
            slack_col[i] = cols;
            art_col[i] = cols + 1;
            cols += 2;
        } else {
            slack_col[i] = cols;
            cols += 1;
        }
    }
    for i in 0..m {
        for row in tab.iter_mut() {
            row.resize(cols, 0.0);
        }
        let surplus = art_col[i] != usize::MAX;
        tab[i][slack_col[i]] = if surplus { -1.0 } else { 1.0 };
        if surplus {
            tab[i][art_col[i]] = 1.0;
        }
    }
    let mut basis: Vec<usize> = (0..m)
        .map(|i| if art_col[i] != usize::MAX { art_col[i] } else { slack_col[i] })
        .collect();

    // Phase 1: minimize the artificial sum.
    let mut cost1 = vec![0.0; cols];
    for i in 0..m {
        if art_col[i] != usize::MAX {
            cost1[art_col[i]] = 1.0;
        }
    }
    let feas = run_simplex(&mut tab, &mut b, &mut basis, &cost1, None);
    debug_assert!(feas != Phase::Unbounded, "phase 1 is bounded below by 0");
    let art_sum: f64 = basis
        .iter()
        .zip(b.iter())
        .filter(|(&c, _)| art_col.contains(&c))
        .map(|(_, &v)| v)
        .sum();
    if art_sum > 1e-7 {
        return RefOutcome::Infeasible;
    }

    // Phase 2 on the original costs; artificials are cost-blocked so they
    // never re-enter with positive value.
    let mut cost2 = vec![0.0; cols];
    for j in 0..n {
        cost2[j] = obj[j];
    }
    let banned: Vec<usize> = (0..m).filter_map(|i| {
        let c = art_col[i];
        (c != usize::MAX).then_some(c)
    }).collect();
    match run_simplex(&mut tab, &mut b, &mut basis, &cost2, Some(&banned)) {
        Phase::Unbounded => RefOutcome::Unbounded,
        Phase::Optimal => {
            let mut x = lb.to_vec();
            for (r, &c) in basis.iter().enumerate() {
                if c < n {
                    x[c] += b[r];
                }
            }
            let objective = x.iter().zip(obj).map(|(v, c)| v * c).sum();
            RefOutcome::Optimal { objective, x }
        }
    }
}

#[derive(PartialEq)]
enum Phase {
    Optimal,
    Unbounded,
}

/// Bland-rule primal simplex on an explicit tableau. `banned` columns may
/// never enter the basis.
fn run_simplex(
    tab: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    banned: Option<&[usize]>,
) -> Phase {
    let m = tab.len();
    let cols = if m > 0 { tab[0].len() } else { 0 };
    loop {
        // Reduced costs via the basic-cost combination.
        let mut entering = None;
        'cols: for j in 0..cols {
            if basis.contains(&j) {
                continue;
            }
            if let Some(banned) = banned {
                if banned.contains(&j) {
                    continue 'cols;
                }
            }
            let mut rc = cost[j];
            for i in 0..m {
                rc -= cost[basis[i]] * tab[i][j];
            }
            if rc < -EPS {
                entering = Some(j);
                break; // Bland: lowest index
            }
        }
        let Some(e) = entering else {
            return Phase::Optimal;
        };

        // Ratio test, lowest index on ties.
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][e] > EPS {
                let ratio = b[i] / tab[i][e];
                if ratio < best - EPS || (ratio < best + EPS && leave.map_or(true, |l| basis[i] < basis[l])) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(l) = leave else {
            return Phase::Unbounded;
        };

        // Pivot.
        let piv = tab[l][e];
        for v in tab[l].iter_mut() {
            *v /= piv;
        }
        b[l] /= piv;
        for i in 0..m {
            if i == l {
                continue;
            }
            let f = tab[i][e];
            if f != 0.0 {
                for j in 0..cols {
                    let d = tab[l][j] * f;
                    tab[i][j] -= d;
                }
                b[i] -= b[l] * f;
            }
        }
        basis[l] = e;
    }
}

/// Deterministic xorshift64* stream for test-case generation.
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed.max(1))
    }
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }
    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// A random LP that is feasible by construction: rows are anchored on an
/// interior point of the box so that point always satisfies them.
pub struct GeneratedLp {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<RefRow>,
    pub obj: Vec<f64>,
    /// The anchor point used to guarantee feasibility.
    pub witness: Vec<f64>,
}

pub fn generate_feasible_lp(rng: &mut XorShift) -> GeneratedLp {
    let n = 2 + rng.below(8);
    let mut lb = Vec::with_capacity(n);
    let mut ub = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.range(-5.0, 2.0);
        let b = a + rng.range(0.1, 6.0);
        lb.push(a);
        ub.push(b);
    }
    let witness: Vec<f64> = (0..n)
        .map(|j| lb[j] + (ub[j] - lb[j]) * rng.range(0.15, 0.85))
        .collect();
    let m = 1 + rng.below(8);
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let nnz = 1 + rng.below(n.min(4));
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for _ in 0..nnz {
            let j = rng.below(n);
            if terms.iter().all(|&(k, _)| k != j) {
                terms.push((j, rng.range(-3.0, 3.0)));
            }
        }
        let at: f64 = terms.iter().map(|&(j, c)| c * witness[j]).sum();
        let (lo, hi) = match rng.below(3) {
            0 => (f64::NEG_INFINITY, at + rng.range(0.0, 2.0)),
            1 => (at - rng.range(0.0, 2.0), f64::INFINITY),
            _ => (at - rng.range(0.0, 2.0), at + rng.range(0.0, 2.0)),
        };
        rows.push(RefRow { lo, hi, terms });
    }
    let obj: Vec<f64> = (0..n).map(|_| rng.range(-2.0, 2.0)).collect();
    GeneratedLp { lb, ub, rows, obj, witness }
}
