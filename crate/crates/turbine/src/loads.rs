//! Offline load post-processing: rainflow cycle counting, damage-equivalent
//! load aggregation, and actuator travel summaries.

/// One counted load cycle. `count` is 1.0 for a closed cycle and 0.5 for a
/// residual half cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub range: f64,
    pub mean: f64,
    pub count: f64,
}

/// Compresses a series to its local extrema. Monotone interior points and
/// exact repeats are dropped; the first and last samples are kept so the
/// residual sees the full excursion.
pub fn turning_points(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &x in series {
        if let Some(&last) = out.last() {
            if x == last {
                continue;
            }
            if out.len() >= 2 {
                let prev = out[out.len() - 2];
                let same_direction = (last - prev).signum() == (x - last).signum();
                if same_direction {
                    *out.last_mut().unwrap() = x;
                    continue;
                }
            }
        }
        out.push(x);
    }
    out
}

/// Four-point rainflow counting with residual half cycles.
///
/// A closed cycle is extracted whenever the inner range of the last four
/// turning points is no larger than both neighbouring ranges. Whatever
/// remains unclosed at the end is counted as half cycles between adjacent
/// residual points.
pub fn rainflow(series: &[f64]) -> Vec<Cycle> {
    let tp = turning_points(series);
    let mut cycles = Vec::new();
    let mut stack: Vec<f64> = Vec::new();
    for &x in &tp {
        stack.push(x);
        while stack.len() >= 4 {
            let n = stack.len();
            let (a, b, c, d) = (stack[n - 4], stack[n - 3], stack[n - 2], stack[n - 1]);
            let inner = (b - c).abs();
            if inner <= (a - b).abs() && inner <= (c - d).abs() {
                cycles.push(Cycle {
                    range: inner,
                    mean: 0.5 * (b + c),
                    count: 1.0,
                });
                stack.remove(n - 2);
                stack.remove(n - 3);
            } else {
                break;
            }
        }
    }
    for pair in stack.windows(2) {
        cycles.push(Cycle {
            range: (pair[0] - pair[1]).abs(),
            mean: 0.5 * (pair[0] + pair[1]),
            count: 0.5,
        });
    }
    cycles
}

/// Damage-equivalent load: the constant-amplitude range that would produce
/// the same Wohler-exponent damage over `n_ref` cycles. `lifetime_factor`
/// scales every cycle count, extrapolating a short record to a full life.
pub fn damage_equivalent_load(
    cycles: &[Cycle],
    wohler_m: f64,
    n_ref: f64,
    lifetime_factor: f64,
) -> f64 {
    assert!(wohler_m > 0.0, "Wohler exponent must be positive");
    assert!(n_ref > 0.0, "reference cycle count must be positive");
    assert!(lifetime_factor >= 1.0, "lifetime factor must be >= 1");
    let damage: f64 = cycles
        .iter()
        .map(|c| c.count * lifetime_factor * c.range.powf(wohler_m))
        .sum();
    (damage / n_ref).powf(1.0 / wohler_m)
}

/// Total absolute actuator movement over a command series.
pub fn actuator_travel(series: &[f64]) -> f64 {
    series.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Number of direction reversals in a command series.
pub fn reversal_count(series: &[f64]) -> usize {
    let tp = turning_points(series);
    tp.len().saturating_sub(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turning_points_compress_monotone_runs() {
        assert_eq!(
            turning_points(&[0.0, 1.0, 2.0, 3.0, 1.0, 1.0, 4.0]),
            vec![0.0, 3.0, 1.0, 4.0]
        );
        assert_eq!(turning_points(&[1.0, 1.0, 1.0]), vec![1.0]);
        assert_eq!(turning_points(&[]), Vec::<f64>::new());
        assert_eq!(turning_points(&[2.0]), vec![2.0]);
    }

    #[test]
    fn rainflow_reference_sequence() {
        // Hand-traced: one closed cycle (range 4, mean 1) plus residual
        // halves with ranges 3, 4, 8, 9, 8, 6.
        let series = [-2.0, 1.0, -3.0, 5.0, -1.0, 3.0, -4.0, 4.0, -2.0];
        let cycles = rainflow(&series);
        let full: Vec<&Cycle> = cycles.iter().filter(|c| c.count == 1.0).collect();
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].range, 4.0);
        assert_eq!(full[0].mean, 1.0);
        let mut halves: Vec<f64> = cycles
            .iter()
            .filter(|c| c.count == 0.5)
            .map(|c| c.range)
            .collect();
        halves.sort_by(f64::total_cmp);
        assert_eq!(halves, vec![3.0, 4.0, 6.0, 8.0, 8.0, 9.0]);
    }

    #[test]
    fn rainflow_monotone_series_is_one_half_cycle() {
        let cycles = rainflow(&[0.0, 1.0, 2.0, 5.0]);
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0], Cycle { range: 5.0, mean: 2.5, count: 0.5 });
    }

    #[test]
    fn rainflow_pure_oscillation_counts_full_cycles() {
        // 0, 2, 0, 2, ... closes a full cycle per period once four points
        // are in view; the tails stay in the residual.
        let series = [0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0];
        let cycles = rainflow(&series);
        let fulls = cycles.iter().filter(|c| c.count == 1.0).count();
        let halves = cycles.iter().filter(|c| c.count == 0.5).count();
        assert_eq!(fulls + halves / 2 + halves % 2, 4, "total cycle mass");
        for c in &cycles {
            assert_eq!(c.range, 2.0);
            assert_eq!(c.mean, 1.0);
        }
    }

    #[test]
    fn rainflow_ranges_bounded_by_global_excursion() {
        // Fixed linear congruential stream keeps the test deterministic.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut series = Vec::new();
        for _ in 0..500 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            series.push(((state >> 11) as f64 / (1u64 << 53) as f64) * 10.0 - 5.0);
        }
        let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cycles = rainflow(&series);
        assert!(!cycles.is_empty());
        for c in &cycles {
            assert!(c.range <= hi - lo + 1e-12);
            assert!(c.mean >= lo - 1e-12 && c.mean <= hi + 1e-12);
            assert!(c.count == 1.0 || c.count == 0.5);
        }
        // Every turning-point excursion is accounted for exactly once:
        // closed cycles take two excursions, halves take one.
        let tp = turning_points(&series);
        let mass: f64 = cycles.iter().map(|c| 2.0 * c.count).sum();
        assert_eq!(mass as usize, tp.len() - 1, "excursion count");
    }

    #[test]
    fn del_reference_value() {
        // Ranges 1 and 2 at one cycle each, exponent 3, one reference
        // cycle: (1 + 8)^(1/3).
        let cycles = [
            Cycle { range: 1.0, mean: 0.0, count: 1.0 },
            Cycle { range: 2.0, mean: 0.0, count: 1.0 },
        ];
        let del = damage_equivalent_load(&cycles, 3.0, 1.0, 1.0);
        assert!((del - 9.0f64.cbrt()).abs() < 1e-12);
        assert!((del - 2.08008).abs() < 1e-5);
    }

    #[test]
    fn del_is_homogeneous_in_amplitude() {
        let series = [0.0, 3.0, -1.0, 4.0, 0.5, 2.0, -2.0];
        let scaled: Vec<f64> = series.iter().map(|x| 2.5 * x).collect();
        for m in [3.0, 5.0, 10.0] {
            let d1 = damage_equivalent_load(&rainflow(&series), m, 100.0, 1.0);
            let d2 = damage_equivalent_load(&rainflow(&scaled), m, 100.0, 1.0);
            assert!((d2 - 2.5 * d1).abs() < 1e-9 * d2.abs().max(1.0));
        }
    }

    #[test]
    fn del_grows_with_added_cycles() {
        let base = [
            Cycle { range: 2.0, mean: 0.0, count: 1.0 },
            Cycle { range: 1.0, mean: 0.0, count: 0.5 },
        ];
        let mut more = base.to_vec();
        more.push(Cycle { range: 1.5, mean: 0.0, count: 1.0 });
        for m in [3.0, 7.0] {
            let d_base = damage_equivalent_load(&base, m, 10.0, 1.0);
            let d_more = damage_equivalent_load(&more, m, 10.0, 1.0);
            assert!(d_more > d_base);
        }
    }

    #[test]
    fn del_reference_count_scaling() {
        // Quadrupling the reference count at m = 2 halves the DEL.
        let cycles = [Cycle { range: 3.0, mean: 0.0, count: 8.0 }];
        let d1 = damage_equivalent_load(&cycles, 2.0, 2.0, 1.0);
        let d2 = damage_equivalent_load(&cycles, 2.0, 8.0, 1.0);
        assert!((d1 - 2.0 * d2).abs() < 1e-12);
    }

    #[test]
    fn del_lifetime_factor_definition_and_scaling() {
        // One full cycle of range r, extrapolated so factor * count equals
        // the reference count, gives DEL = r exactly.
        let cycles = [Cycle { range: 4.0, mean: 1.0, count: 1.0 }];
        let d = damage_equivalent_load(&cycles, 5.0, 20.0, 20.0);
        assert!((d - 4.0).abs() < 1e-12);
        // The factor enters as factor^(1/m).
        for m in [2.0, 3.0, 8.0] {
            let base = damage_equivalent_load(&cycles, m, 7.0, 1.0);
            let scaled = damage_equivalent_load(&cycles, m, 7.0, 32.0);
            assert!((scaled - 32.0f64.powf(1.0 / m) * base).abs() < 1e-9 * scaled);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Every extracted range fits inside the global excursion, and
            // cycle mass accounts for every turning-point excursion once.
            #[test]
            fn rainflow_conserves_excursions(series in proptest::collection::vec(-100.0f64..100.0, 0..60)) {
                let cycles = rainflow(&series);
                let tp = turning_points(&series);
                let mass: f64 = cycles.iter().map(|c| 2.0 * c.count).sum();
                prop_assert_eq!(mass as usize, tp.len().saturating_sub(1));
                if !series.is_empty() {
                    let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    for c in &cycles {
                        prop_assert!(c.range <= hi - lo + 1e-9);
                        prop_assert!(c.mean >= lo - 1e-9 && c.mean <= hi + 1e-9);
                    }
                }
            }

            // Scaling the signal scales the DEL by the same factor.
            #[test]
            fn del_scales_with_signal(
                series in proptest::collection::vec(-10.0f64..10.0, 2..40),
                alpha in 0.1f64..10.0,
                m in 2.0f64..8.0,
            ) {
                let scaled: Vec<f64> = series.iter().map(|x| alpha * x).collect();
                let d1 = damage_equivalent_load(&rainflow(&series), m, 50.0, 1.0);
                let d2 = damage_equivalent_load(&rainflow(&scaled), m, 50.0, 1.0);
                prop_assert!((d2 - alpha * d1).abs() <= 1e-9 * d2.abs().max(1.0));
            }

            // Travel dominates the net displacement.
            #[test]
            fn travel_bounds_net_move(series in proptest::collection::vec(-50.0f64..50.0, 2..40)) {
                let travel = actuator_travel(&series);
                let net = (series[series.len() - 1] - series[0]).abs();
                prop_assert!(travel >= net - 1e-12);
            }
        }
    }

    #[test]
    fn travel_and_reversals() {
        let series = [0.0, 2.0, 1.0, 3.0, 3.0, 0.5];
        assert!((actuator_travel(&series) - (2.0 + 1.0 + 2.0 + 0.0 + 2.5)).abs() < 1e-12);
        // Turning points 0, 2, 1, 3, 0.5: three interior reversals.
        assert_eq!(reversal_count(&series), 3);
        assert_eq!(reversal_count(&[1.0, 2.0]), 0);
        assert_eq!(reversal_count(&[]), 0);
    }
}
